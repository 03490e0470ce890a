"""Single-particle spectra: ladder and square-lattice tight-binding matrices,
dense Hermitian eigensystems with localisation metrics, and flux sweeps.

Diagonalisations at different flux values are independent; a sweep may be
mapped over workers with no shared mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .couplings import dressed_factor
from .model import DriveSpec

#: Relative tolerance used to verify Hermiticity of eigensystem inputs.
HERMITICITY_TOL = 1e-12

#: Default eigenvalue clustering tolerance, relative to max |E|.
DEFAULT_CLUSTER_TOL = 1e-8


class NonHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""


def rhombic_ladder_matrix(n_cells: int, j1: float, j2: float, phi: float,
                          boundary: str = "open") -> np.ndarray:
    """Three-leg rhombic ladder with one flux-carrying bond per plaquette.

    Site order is (hub_0, up_0, low_0, hub_1, ...); open boundaries append a
    terminating hub, giving 3p+1 sites, while periodic boundaries keep 3p.
    Per cell j the bonds are hub_j-up_j and low_j-hub_{j+1} at j1,
    hub_j-low_j at j2, and up_j-hub_{j+1} at j2*exp(i phi).
    """
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if j1 <= 0 or j2 < 0:
        raise ValueError("couplings must be positive (j2 may be zero)")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    p = n_cells
    n = 3 * p + 1 if boundary == "open" else 3 * p
    hub = lambda j: 3 * (j % p) if boundary == "periodic" else 3 * j
    m = np.zeros((n, n), dtype=complex)

    def add(i, k, v):
        m[i, k] += v
        m[k, i] += np.conj(v)

    for j in range(p):
        up, low = 3 * j + 1, 3 * j + 2
        add(hub(j), up, j1)
        add(hub(j), low, j2)
        add(low, hub(j + 1), j1)
        add(up, hub(j + 1), j2 * np.exp(1j * phi))
    return m


def rhombic_ladder_cells(n_cells: int, boundary: str = "open") -> np.ndarray:
    """Cell index per site; the terminating hub joins the last cell."""
    cells = np.repeat(np.arange(n_cells), 3)
    if boundary == "open":
        cells = np.append(cells, n_cells - 1)
    return cells


def dressed_ladder_couplings(j1: float, drive: DriveSpec, spacing_ratio: float):
    """(j1, j2, phi) for a ladder whose assisted bonds derive from a drive.

    j2 = j1 * |dressed_factor(r, eta_d, phase_x)| * spacing_ratio**3 with
    spacing_ratio = d_y / d_x; the plaquette flux is r * phase_y up to the
    orientation gauge (spectra are even in the flux).
    """
    f = dressed_factor(drive.resonance_order, drive.eta_d, drive.phase_x)
    j2 = j1 * abs(f) * spacing_ratio**3
    return j1, j2, drive.resonance_order * drive.phase_y


def square_lattice_matrix(l_x: int, l_y: int, alpha: float, j_x: float, j_y: float,
                          m_max: int = 1, boundary: str = "open") -> np.ndarray:
    """Square lattice with a uniform flux alpha per plaquette (Landau gauge).

    x bonds carry j_x * exp(-i alpha i_y); y bonds at range m carry the
    dipolar tail j_y / m^3 for m <= m_max.  Periodic boundaries require
    alpha * l_y to be a multiple of 2 pi for a consistent flux pattern.
    """
    if l_x < 1 or l_y < 1:
        raise ValueError("lattice sizes must be >= 1")
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    periodic = boundary == "periodic"
    n = l_x * l_y
    idx = lambda ix, iy: ix * l_y + iy
    m = np.zeros((n, n), dtype=complex)

    def add(i, k, v):
        m[i, k] += v
        m[k, i] += np.conj(v)

    for ix in range(l_x):
        for iy in range(l_y):
            i = idx(ix, iy)
            if ix + 1 < l_x or (periodic and l_x > 1):
                add(i, idx((ix + 1) % l_x, iy), j_x * np.exp(-1j * alpha * iy))
            for step in range(1, m_max + 1):
                if iy + step < l_y or (periodic and l_y > step):
                    add(i, idx(ix, (iy + step) % l_y), j_y / step**3)
    return m


@dataclass(frozen=True)
class SpectrumResult:
    """Eigen-data of a Hermitian lattice matrix with localisation metrics."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ipr: np.ndarray
    boundary_weight: np.ndarray
    band_labels: np.ndarray
    cells: np.ndarray
    flux: float | None = None

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def cell_probabilities(self, state: int) -> np.ndarray:
        prob = np.abs(self.eigenvectors[:, state]) ** 2
        n_cells = int(self.cells.max()) + 1
        return np.array([prob[self.cells == c].sum() for c in range(n_cells)])

    def to_json_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "ipr": self.ipr.tolist(),
            "boundary_weight": self.boundary_weight.tolist(),
            "band_labels": self.band_labels.tolist(),
            "flux": self.flux,
        }


def _deterministic_phases(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, k])))  # ties resolve to the lowest index
        pivot = out[i, k]
        if pivot != 0:
            out[:, k] *= np.conj(pivot) / abs(pivot)
    return out


def _greedy_clusters(values: np.ndarray, tol: float) -> np.ndarray:
    """Chain clustering of sorted values: a gap above tol starts a new cluster."""
    labels = np.zeros(values.size, dtype=int)
    for k in range(1, values.size):
        labels[k] = labels[k - 1] + (1 if values[k] - values[k - 1] > tol else 0)
    return labels


def eigensystem(matrix: np.ndarray, *, cells: np.ndarray | None = None,
                flux: float | None = None,
                cluster_tol: float | None = None) -> SpectrumResult:
    """Full spectrum of a Hermitian matrix with deterministic conventions.

    Eigenvalues ascend; each eigenvector is rotated so its largest-magnitude
    component is real positive.  Per-state metrics: inverse participation
    ratio sum |v_i|^4 and the probability weight on the outermost cell at
    each end (sites are their own cells unless `cells` is given).
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonHermitianError("eigensystem needs a square matrix")
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.conj().T).max() > HERMITICITY_TOL * scale:
        raise NonHermitianError("matrix is not Hermitian within 1e-12")
    vals, vecs = np.linalg.eigh(m)
    vecs = _deterministic_phases(vecs)
    prob = np.abs(vecs) ** 2
    ipr = (prob**2).sum(axis=0)
    if cells is None:
        cells = np.arange(m.shape[0])
    cells = np.asarray(cells)
    first, last = cells.min(), cells.max()
    edge_mask = (cells == first) | (cells == last)
    boundary_weight = prob[edge_mask].sum(axis=0)
    tol = (cluster_tol if cluster_tol is not None
           else DEFAULT_CLUSTER_TOL * max(np.abs(vals).max(), 1e-300))
    labels = _greedy_clusters(vals, tol)
    return SpectrumResult(
        eigenvalues=vals,
        eigenvectors=vecs,
        ipr=ipr,
        boundary_weight=boundary_weight,
        band_labels=labels,
        cells=cells,
        flux=flux,
    )


@dataclass(frozen=True)
class BandCluster:
    energy: float
    count: int
    spread: float


def flat_band_report(spectrum: SpectrumResult,
                     cluster_tol: float | None = None) -> list[BandCluster]:
    """Greedy 1D clustering of the spectrum: centers, multiplicities, spreads."""
    vals = spectrum.eigenvalues
    tol = (cluster_tol if cluster_tol is not None
           else DEFAULT_CLUSTER_TOL * max(np.abs(vals).max(), 1e-300))
    labels = _greedy_clusters(vals, tol)
    out = []
    for lab in range(labels.max() + 1):
        sel = vals[labels == lab]
        out.append(BandCluster(energy=float(sel.mean()), count=int(sel.size),
                               spread=float(sel.max() - sel.min())))
    return out


def gap_windows_from_clusters(clusters: list[BandCluster], trim: float = 0.1):
    """Open energy intervals between consecutive cluster centers."""
    centers = sorted(c.energy for c in clusters)
    windows = []
    for lo, hi in zip(centers, centers[1:]):
        margin = trim * (hi - lo)
        windows.append((lo + margin, hi - margin))
    return windows


@dataclass(frozen=True)
class EdgeState:
    energy: float
    boundary_weight: float
    localization_length: float


def _localization_length(cell_prob: np.ndarray) -> float:
    """Decay length (in cells) from an exponential fit of the cell profile.

    The profile is read away from the dominant edge; compactly localised
    states with no resolvable tail report 0.
    """
    p = cell_prob
    if p[-1] > p[0]:
        p = p[::-1]
    valid = p > 1e-14
    cut = int(np.argmin(valid)) if not valid.all() else p.size  # leading run
    if cut < 2:
        return 0.0
    slope = np.polyfit(np.arange(cut), np.log(p[:cut]), 1)[0]
    if slope >= 0:
        return math.inf
    return float(-1.0 / slope)


def edge_state_report(spectrum: SpectrumResult, gap_windows) -> list[EdgeState]:
    """States inside the given spectral gaps carrying most of their weight
    on the outermost cells (boundary weight above 0.5)."""
    out = []
    for k, e in enumerate(spectrum.eigenvalues):
        if not any(lo < e < hi for lo, hi in gap_windows):
            continue
        bw = float(spectrum.boundary_weight[k])
        if bw <= 0.5:
            continue
        xi = _localization_length(spectrum.cell_probabilities(k))
        out.append(EdgeState(energy=float(e), boundary_weight=bw,
                             localization_length=xi))
    return out


@dataclass(frozen=True)
class FluxSweepResult:
    fluxes: np.ndarray
    eigenvalues: np.ndarray  # shape (n_flux, n_states)
    gaps: np.ndarray

    def to_csv(self) -> str:
        lines = ["phi," + ",".join(f"E_{k+1}" for k in range(self.eigenvalues.shape[1]))
                 + ",min_gap"]
        for phi, row, gap in zip(self.fluxes, self.eigenvalues, self.gaps):
            vals = ",".join(format(v, ".17g") for v in row)
            lines.append(f"{phi:.17g},{vals},{gap:.17g}")
        return "\n".join(lines) + "\n"


def flux_sweep(model_builder, phi_grid, *, zero_band_size: int | None = None,
               zero_tol: float = 1e-8) -> FluxSweepResult:
    """Spectra over a grid of flux values plus the minimal inter-band gap.

    The gap at each flux is the smallest |E| outside the geometry-protected
    zero band; the zero-band size is the minimal count of near-zero
    eigenvalues across the sweep unless given explicitly.  It closes where a
    dispersive band touches the zero band.
    """
    phis = np.asarray(list(phi_grid), dtype=float)
    spectra = []
    for phi in phis:
        spectra.append(np.linalg.eigvalsh(model_builder(phi)))
    table = np.array(spectra)
    absvals = np.sort(np.abs(table), axis=1)
    scale = max(np.abs(table).max(), 1e-300)
    if zero_band_size is None:
        zero_band_size = int(min((row < zero_tol * scale).sum() for row in absvals))
    if zero_band_size >= table.shape[1]:
        gaps = np.zeros(phis.size)
    else:
        gaps = absvals[:, zero_band_size]
    return FluxSweepResult(fluxes=phis, eigenvalues=table, gaps=gaps)
