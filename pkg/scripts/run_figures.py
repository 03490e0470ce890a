#!/usr/bin/env python3
"""Run every preset experiment and collect plot-ready data under one root.

Usage: python scripts/run_figures.py [output_root]

The two ring-interference runs integrate their full windows and take about
a minute each; everything else finishes in seconds.
"""

import sys
from pathlib import Path

from phonon_gauge.cli import run_experiment
from phonon_gauge.config import parse_config

CONFIGS = {
    "dressed_map": "experiment = fig2a_dressed_map\n",
    "link_scan": "experiment = fig2b_link_scan\n",
    "plaquette_flux0": "experiment = fig2cd_plaquette\nplaquette.flux = 0\n",
    "plaquette_fluxpi": "experiment = fig2cd_plaquette\nplaquette.flux = pi\n",
    "ladder_spectrum": "experiment = fig2e_ladder_spectrum\n",
    "flux_sweep": "experiment = fig2f_flux_sweep\n",
    "butterfly": "experiment = butterfly\n",
}


def main() -> int:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("figure_data")
    for name, text in CONFIGS.items():
        out = root / name
        print(f"== {name} -> {out}")
        for written in run_experiment(parse_config(text), out):
            print(f"   {written}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
