"""Command-line interface: run preset experiments and emit plot-ready data.

Usage:
    phonon-gauge simulate --config FILE --out DIR [--format csv|json] [--jobs N]
    phonon-gauge preset --list

Exit codes: 0 success, 1 configuration error, 2 numerical failure.  The
environment variable PHONON_GAUGE_OUT, when set, overrides --out.  Rerunning
with an identical config reproduces bit-identical data files; the manifest
additionally records the wall-clock duration.
"""

from __future__ import annotations

import argparse
import json
import math
import multiprocessing
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, EXPERIMENT_SUMMARIES, EXPERIMENTS, ExperimentConfig, \
    parse_config
from .couplings import BrokenCycleError, DomainError, dressed_factor, \
    effective_coupling_matrix
from .dynamics import IntegrationError, LinkScanResult, link_point, plaquette_experiment
from .fock import CapacityError
from .model import ConfigurationError, GeometryError, build_array, cosine_drive, laser_drive
from .spectra import FluxSweepResult, eigensystem, edge_state_report, flat_band_report, \
    gap_windows_from_clusters, rhombic_ladder_cells, rhombic_ladder_matrix, \
    square_lattice_matrix

ENV_OUT = "PHONON_GAUGE_OUT"

_CONFIG_ERRORS = (ConfigError, ConfigurationError, GeometryError, CapacityError,
                  BrokenCycleError, DomainError, ValueError, KeyError)
_NUMERIC_ERRORS = (IntegrationError, np.linalg.LinAlgError, FloatingPointError)


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with multiprocessing.get_context("fork").Pool(processes=jobs) as pool:
        return pool.map(fn, items)


def _write(path: Path, text: str) -> str:
    path.write_text(text, encoding="utf-8", newline="")
    return path.name


def _fmt(v: float) -> str:
    return format(v, ".17g")


# --- worker jobs (module level so they pickle) ------------------------------


def _dressed_row(args):
    eta, r, dphis = args
    return [abs(dressed_factor(r, eta, dp)) for dp in dphis]


def _link_job(args):
    dphi, kwargs = args
    return link_point(dphi, **kwargs)


def _ladder_sweep_job(args):
    cells, j1, j2, boundary, phi = args
    return np.linalg.eigvalsh(rhombic_ladder_matrix(cells, j1, j2, phi, boundary))


def _butterfly_job(args):
    size, jx, jy, m_max, boundary, alpha = args
    return np.linalg.eigvalsh(square_lattice_matrix(size, size, alpha, jx, jy,
                                                    m_max, boundary))


# --- experiment runners ------------------------------------------------------


def _run_dressed_map(cfg: ExperimentConfig, out: Path, fmt: str, jobs: int, info: dict):
    etas = np.linspace(0.0, cfg["map.eta_max"], cfg["map.eta_points"])
    dphis = np.linspace(0.0, 2.0 * math.pi, cfg["map.phase_points"])
    r = cfg["drive.resonance_order"]
    rows = _pmap(_dressed_row, [(eta, r, tuple(dphis)) for eta in etas], jobs)
    if fmt == "json":
        payload = {"eta_d": etas.tolist(), "delta_phi": dphis.tolist(),
                   "magnitude": [list(map(float, row)) for row in rows]}
        return [_write(out / "dressed_map.json",
                       json.dumps(payload, sort_keys=True, indent=2) + "\n")]
    lines = ["eta_d,delta_phi,magnitude"]
    for eta, row in zip(etas, rows):
        for dp, mag in zip(dphis, row):
            lines.append(f"{_fmt(eta)},{_fmt(dp)},{_fmt(mag)}")
    return [_write(out / "dressed_map.csv", "\n".join(lines) + "\n")]


def _run_link_scan(cfg: ExperimentConfig, out: Path, fmt: str, jobs: int, info: dict):
    grid = np.linspace(0.0, 2.0 * math.pi, cfg["scan.points"])
    kwargs = {
        "gradient": cfg["array.gradient"],
        "coulomb_beta": cfg["array.beta"],
        "base_frequency": cfg["array.base_frequency"],
        "rabi_frequency": cfg["drive.rabi_frequency"],
        "beat_frequency": cfg["drive.beat_frequency"],
        "lamb_dicke": cfg["drive.lamb_dicke"],
        "resonance_order": cfg["drive.resonance_order"],
        "n_max": cfg["numerics.n_max"],
        "direction": cfg["direction"],
        "time_step_divisor": cfg["numerics.time_step_divisor"],
    }
    rows = _pmap(_link_job, [(p, kwargs) for p in grid], jobs)
    t_star, n2_eff, n2_exact, defined = (np.array(x) for x in zip(*rows))
    result = LinkScanResult(delta_phi=grid, t_star=t_star, n2_effective=n2_eff,
                            n2_exact=n2_exact, defined=defined.astype(bool))
    if fmt == "json":
        payload = {
            "delta_phi": grid.tolist(),
            "t_star": [None if not d else t for t, d in zip(t_star, result.defined)],
            "n2_effective": [None if not d else v for v, d in zip(n2_eff, result.defined)],
            "n2_exact": [None if not d else v for v, d in zip(n2_exact, result.defined)],
            "defined": result.defined.tolist(),
        }
        return [_write(out / "link_scan.json",
                       json.dumps(payload, sort_keys=True, indent=2) + "\n")]
    return [_write(out / "link_scan.csv", result.to_csv())]


def _run_plaquette(cfg: ExperimentConfig, out: Path, fmt: str, jobs: int, info: dict):
    res_eff, res_exact = plaquette_experiment(
        cfg["plaquette.flux"],
        rabi_frequency=cfg["drive.rabi_frequency"],
        n_max=cfg["numerics.n_max"],
        gradient=cfg["array.gradient"],
        coulomb_beta=cfg["array.beta"],
        beat_frequency=cfg["drive.beat_frequency"],
        lamb_dicke=cfg["drive.lamb_dicke"],
        resonance_order=cfg["drive.resonance_order"],
        direction=cfg["direction"],
        window=cfg.get("numerics.window"),
        samples=cfg["numerics.samples"],
        time_step_divisor=cfg["numerics.time_step_divisor"],
        cutoff_range=cfg["numerics.cutoff_range"],
    )
    for key in ("window", "spacing_y", "bond_magnitude", "drive_strength"):
        info[key] = res_eff.parameters[key]
    files = []
    for tag, res in (("effective", res_eff), ("exact", res_exact)):
        if fmt == "json":
            files.append(_write(out / f"plaquette_{tag}.json", res.to_json()))
        else:
            files.append(_write(out / f"plaquette_{tag}.csv", res.to_csv()))
    return files


def _run_ladder_spectrum(cfg: ExperimentConfig, out: Path, fmt: str, jobs: int, info: dict):
    cells_n = cfg["ladder.cells"]
    boundary = cfg["ladder.boundary"]
    matrix = rhombic_ladder_matrix(cells_n, cfg["ladder.j1"], cfg["ladder.j2"],
                                   cfg["ladder.flux"], boundary)
    cells = rhombic_ladder_cells(cells_n, boundary)
    spectrum = eigensystem(matrix, cells=cells, flux=cfg["ladder.flux"])
    clusters = flat_band_report(spectrum)
    bulk = [c for c in clusters if c.count >= 3]
    windows = gap_windows_from_clusters(bulk if len(bulk) >= 2 else clusters)
    edges = edge_state_report(spectrum, windows)
    payload = {
        "spectrum": spectrum.to_json_dict(),
        "flat_bands": [{"energy": c.energy, "count": c.count, "spread": c.spread}
                       for c in clusters],
        "gap_windows": [list(w) for w in windows],
        "edge_states": [
            {"energy": e.energy, "boundary_weight": e.boundary_weight,
             "localization_length": (None if math.isinf(e.localization_length)
                                     else e.localization_length)}
            for e in edges
        ],
    }
    return [_write(out / "ladder_spectrum.json",
                   json.dumps(payload, sort_keys=True, indent=2) + "\n")]


def _run_flux_sweep(cfg: ExperimentConfig, out: Path, fmt: str, jobs: int, info: dict):
    phis = np.linspace(-math.pi, math.pi, cfg["sweep.points"])
    args = [(cfg["ladder.cells"], cfg["ladder.j1"], cfg["ladder.j2"],
             cfg["sweep.boundary"], phi) for phi in phis]
    table = np.array(_pmap(_ladder_sweep_job, args, jobs))
    absvals = np.sort(np.abs(table), axis=1)
    scale = max(np.abs(table).max(), 1e-300)
    zero_band = int(min((row < 1e-8 * scale).sum() for row in absvals))
    gaps = absvals[:, zero_band] if zero_band < table.shape[1] else np.zeros(phis.size)
    result = FluxSweepResult(fluxes=phis, eigenvalues=table, gaps=gaps)
    return [_write(out / "flux_sweep.csv", result.to_csv())]


def _run_butterfly(cfg: ExperimentConfig, out: Path, fmt: str, jobs: int, info: dict):
    alphas = np.linspace(0.0, 2.0 * math.pi, cfg["butterfly.points"])
    args = [(cfg["butterfly.size"], cfg["butterfly.j_x"], cfg["butterfly.j_y"],
             cfg["butterfly.m_max"], cfg["butterfly.boundary"], a) for a in alphas]
    rows = _pmap(_butterfly_job, args, jobs)
    n = rows[0].size
    lines = ["alpha," + ",".join(f"E_{k+1}" for k in range(n))]
    for alpha, vals in zip(alphas, rows):
        lines.append(_fmt(alpha) + "," + ",".join(_fmt(v) for v in vals))
    return [_write(out / "butterfly.csv", "\n".join(lines) + "\n")]


def _run_custom(cfg: ExperimentConfig, out: Path, fmt: str, jobs: int, info: dict):
    layout = cfg["array.layout"]
    dims = {"link": (2,), "plaquette": (2, 2),
            "square": (cfg["array.nx"], cfg["array.ny"]),
            "rhombic_ladder": (cfg["array.cells"],)}[layout]
    array = build_array(layout, dims, spacing_x=cfg["array.spacing_x"],
                        spacing_y=cfg["array.spacing_y"],
                        base_frequency=cfg["array.base_frequency"],
                        gradient=cfg["array.gradient"],
                        coulomb_beta=cfg["array.beta"])
    if cfg["drive.mode"] == "laser":
        drive = laser_drive(cfg["drive.rabi_frequency"], cfg["drive.beat_frequency"],
                            cfg["drive.lamb_dicke"], cfg["drive.resonance_order"],
                            phase_x=cfg["drive.phase_x"], phase_y=cfg["drive.phase_y"])
    else:
        drive = cosine_drive(cfg["drive.beat_frequency"], cfg["drive.strength"],
                             cfg["drive.resonance_order"],
                             phase_x=cfg["drive.phase_x"], phase_y=cfg["drive.phase_y"])
    matrix = effective_coupling_matrix(array, drive, cfg["direction"],
                                       cfg["numerics.cutoff_range"])
    spectrum = eigensystem(matrix.matrix)
    payload = {
        "layout": layout,
        "n_sites": array.n_sites,
        "spectrum": spectrum.to_json_dict(),
    }
    return [_write(out / "custom_spectrum.json",
                   json.dumps(payload, sort_keys=True, indent=2) + "\n")]


_RUNNERS = {
    "fig2a_dressed_map": _run_dressed_map,
    "fig2b_link_scan": _run_link_scan,
    "fig2cd_plaquette": _run_plaquette,
    "fig2e_ladder_spectrum": _run_ladder_spectrum,
    "fig2f_flux_sweep": _run_flux_sweep,
    "butterfly": _run_butterfly,
    "custom": _run_custom,
}


def run_experiment(config: ExperimentConfig, out_dir, fmt: str | None = None,
                   jobs: int = 1) -> list[str]:
    """Run the configured experiment into `out_dir`; returns written files.

    Data files are bit-identical across reruns of the same config.  A
    manifest.json records the fully resolved parameters, the package
    version, and the wall-clock duration.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = fmt or config.get("output.format", "csv")
    start = time.perf_counter()
    info: dict = {}
    files = _RUNNERS[config.experiment](config, out, fmt, jobs, info)
    manifest = {
        "experiment": config.experiment,
        "parameters": {k: v for k, v in config.values},
        "resolved": info,
        "output_format": fmt,
        "files": files,
        "version": __version__,
        "duration_seconds": time.perf_counter() - start,
    }
    files.append(_write(out / "manifest.json",
                        json.dumps(manifest, sort_keys=True, indent=2) + "\n"))
    return files


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage problems are config errors
        raise ConfigError([f"usage: {message}"])


def _build_parser() -> _Parser:
    parser = _Parser(prog="phonon-gauge", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")
    sim = sub.add_parser("simulate", help="run an experiment from a config file")
    sim.add_argument("--config", required=True, help="path to the config file")
    sim.add_argument("--out", default=None, help=f"output directory (or ${ENV_OUT})")
    sim.add_argument("--format", choices=("csv", "json"), default=None,
                     help="override the configured output format")
    sim.add_argument("--jobs", type=int, default=1,
                     help="worker pool size for sweep points")
    pre = sub.add_parser("preset", help="inspect available presets")
    pre.add_argument("--list", action="store_true", dest="list_presets")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.command == "preset":
            if args.list_presets:
                for name in EXPERIMENTS:
                    print(f"{name}: {EXPERIMENT_SUMMARIES[name]}")
            else:
                print("nothing to do; try 'preset --list'")
            return 0
        if args.command != "simulate":
            raise ConfigError(["usage: expected a subcommand (simulate | preset)"])
        out_dir = os.environ.get(ENV_OUT) or args.out
        if out_dir is None:
            raise ConfigError([f"--out is required (or set ${ENV_OUT})"])
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"config file: {exc}"]) from None
        config = parse_config(text)
        files = run_experiment(config, out_dir, fmt=args.format, jobs=args.jobs)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 1
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    for name in files:
        print(name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
