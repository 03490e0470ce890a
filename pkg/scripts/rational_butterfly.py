#!/usr/bin/env python3
"""Square-lattice spectrum at rational fluxes 2 pi p/q on a torus.

Enumerates coprime p/q up to a maximum denominator; each flux gets a torus
whose side is a multiple of q so the flux pattern is commensurate.  Prints
CSV rows (flux_fraction, eigenvalues...) to stdout, the classic
self-similar band picture.

Usage: python scripts/rational_butterfly.py [q_max] > butterfly.csv
"""

import math
import sys

import numpy as np

from phonon_gauge.spectra import square_lattice_matrix


def main() -> int:
    q_max = int(sys.argv[1]) if len(sys.argv) > 1 else 8
    fractions = sorted(
        {(0, 1)} | {(p, q) for q in range(2, q_max + 1)
                    for p in range(1, q) if math.gcd(p, q) == 1},
        key=lambda f: f[0] / f[1],
    )
    for p, q in fractions:
        size = q * max(2, math.ceil(24 / q))  # commensurate torus, side ~24
        alpha = 2.0 * math.pi * p / q
        vals = np.linalg.eigvalsh(
            square_lattice_matrix(size, size, alpha, 1.0, 1.0, boundary="periodic")
        )
        row = ",".join(format(v, ".10g") for v in vals)
        print(f"{p}/{q},{row}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
