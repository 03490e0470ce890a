"""Dipolar phonon couplings and their Bessel-series dressing under a drive.

All functions here are pure and operate on immutable inputs, so they can be
evaluated in parallel across parameter grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError, DriveSpec, GeometryError, TrapArray

#: Largest |x| accepted by bessel_j.
BESSEL_MAX_ARGUMENT = 50.0

#: Orders above this are indistinguishable from zero at the supported
#: arguments (|J_s(x)| < 1e-50 for s >= 150, |x| <= 50).
_BESSEL_ZERO_ORDER = 150

#: Default dipolar cutoff, in lattice constants (Euclidean lattice distance).
DEFAULT_CUTOFF_RANGE = 3.0


class DomainError(ValueError):
    """Argument outside the supported range of a special function."""


class BrokenCycleError(ValueError):
    """A plaquette cycle crosses a missing (zero) bond."""


def _bessel_series(order: int, x: float) -> float:
    # Ascending power series; stable for small |x| where no cancellation occurs.
    half = x / 2.0
    if half == 0.0:  # includes subnormal x whose half underflows
        return 1.0 if order == 0 else 0.0
    term = math.exp(order * math.log(half) - math.lgamma(order + 1))
    total = term
    q = (x / 2.0) ** 2
    for k in range(1, 200):
        term *= -q / (k * (k + order))
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)):
            break
    return total


def _bessel_array_miller(n_top: int, x: float) -> np.ndarray:
    """J_0..J_{n_top} at x > 0 by backward (Miller) recurrence."""
    start = max(n_top, int(x)) + 36
    out = np.zeros(start + 2)
    out[start] = 1e-30  # arbitrary seed; normalisation fixes the scale
    for k in range(start, 0, -1):
        out[k - 1] = (2.0 * k / x) * out[k] - out[k + 1]
        if abs(out[k - 1]) > 1e250:  # rescale to dodge overflow
            out[k - 1:] *= 1e-250
    norm = out[0] + 2.0 * out[2:start + 1:2].sum()
    return out[: n_top + 1] / norm


def bessel_first_kind_array(n_top: int, x: float) -> np.ndarray:
    """Array [J_0(x), ..., J_{n_top}(x)] for 0 <= x <= 50."""
    if x < 0:
        raise DomainError("bessel_first_kind_array expects x >= 0")
    if x > BESSEL_MAX_ARGUMENT:
        raise DomainError(f"argument {x} outside supported range |x| <= {BESSEL_MAX_ARGUMENT}")
    if x == 0.0:
        out = np.zeros(n_top + 1)
        out[0] = 1.0
        return out
    if x <= 8.0:
        return np.array([_bessel_series(s, x) for s in range(n_top + 1)])
    return _bessel_array_miller(n_top, x)


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind J_order(x), |x| <= 50.

    Backward (Miller) recurrence for moderate arguments, ascending series
    for small ones; absolute error below 1e-12 over the supported range.
    """
    if abs(x) > BESSEL_MAX_ARGUMENT:
        raise DomainError(f"argument {x} outside supported range |x| <= {BESSEL_MAX_ARGUMENT}")
    s = int(order)
    sign = 1.0
    if s < 0:
        s = -s
        if s % 2:
            sign = -sign
    if x < 0:
        x = -x
        if s % 2:
            sign = -sign
    if s >= _BESSEL_ZERO_ORDER:
        return 0.0
    if x == 0.0:
        return 1.0 if s == 0 else 0.0
    if x <= 8.0:
        return sign * _bessel_series(s, x)
    return sign * float(_bessel_array_miller(s, x)[s])


def dressed_series_cutoff(eta_d: float) -> int:
    # The Bessel tail decays super-exponentially once the order exceeds the
    # argument; this margin keeps the truncated tail below 1e-14.
    return 25 + math.ceil(3.0 * eta_d)


def dressed_factor(resonance_order: int, eta_d: float, delta_phi: float) -> complex:
    """Drive-dressed renormalisation of a hopping bridged by r drive quanta.

    Sums J_s(eta_d) J_{s+r}(eta_d) exp(i (s + r/2) delta_phi) over integer s,
    truncated where the tail is below 1e-14.  Satisfies
    |value| = |J_r(2 eta_d sin(delta_phi / 2))|.
    """
    r = int(resonance_order)
    if r < 0:
        raise DomainError("resonance_order must be >= 0")
    if eta_d < 0:
        raise DomainError("eta_d must be >= 0")
    cut = dressed_series_cutoff(eta_d)
    table = bessel_first_kind_array(cut + r, eta_d)

    def j_signed(s: int) -> float:
        a = abs(s)
        if a >= table.size:
            return 0.0
        v = table[a]
        return -v if (s < 0 and a % 2) else v

    s_vals = np.arange(-cut, cut + 1)
    left = np.array([j_signed(s) for s in s_vals])
    right = np.array([j_signed(s + r) for s in s_vals])
    phases = np.exp(1j * (s_vals + r / 2.0) * delta_phi)
    return complex(np.sum(left * right * phases))


@dataclass(frozen=True)
class CouplingMatrix:
    """Hermitian matrix of complex hopping amplitudes for one direction."""

    matrix: np.ndarray
    direction: str
    metadata: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("coupling matrix must be square")
        if np.any(np.diagonal(m) != 0):
            raise ValueError("coupling matrix must have zero diagonal")
        if not np.array_equal(m, m.conj().T):
            raise ValueError("coupling matrix must be exactly Hermitian")
        m.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _pair_table(array: TrapArray, direction: str, cutoff_range: float,
                reference_frequencies: bool):
    """Bare dipolar amplitude for every retained ordered pair (i > j)."""
    pos = array.positions
    lat = array.lattice
    if reference_frequencies:
        w = np.full(array.n_sites, dict(array.base_frequency)[direction])
    else:
        w = array.frequencies(direction)
    axis = {"x": 0, "y": 1, "z": None}[direction]
    beta = array.coulomb_beta
    out = {}
    for i in range(array.n_sites):
        for j in range(i):
            dlat = math.hypot(lat[i][0] - lat[j][0], lat[i][1] - lat[j][1])
            if dlat > cutoff_range + 1e-9:
                continue
            dr = pos[i] - pos[j]
            dist = math.hypot(dr[0], dr[1])
            if dist == 0.0:
                raise GeometryError(f"sites {i} and {j} coincide")
            comp = 0.0 if axis is None else dr[axis]
            geom = (3.0 * comp * comp - dist * dist) / dist**5
            out[(i, j)] = -(beta / 2.0) * geom / math.sqrt(w[i] * w[j])
    return out


def bare_coupling_matrix(array: TrapArray, direction: str,
                         cutoff_range: float = DEFAULT_CUTOFF_RANGE, *,
                         reference_frequencies: bool = False) -> CouplingMatrix:
    """Static dipolar couplings for the chosen vibrational direction.

    Amplitudes follow the harmonic expansion of the Coulomb interaction:
    -(beta/2) [3 (dr)_a (dr)_a - |dr|^2] / |dr|^5 / sqrt(w_i w_j) in reduced
    units.  Pairs beyond `cutoff_range` (Euclidean distance in lattice
    coordinates) are dropped.  With reference_frequencies=True the
    per-site frequency factor is evaluated at the base frequency, i.e. at
    leading order in the gradient.
    """
    if direction not in ("x", "y", "z"):
        raise ConfigurationError(f"unknown direction {direction!r}")
    if cutoff_range < 1:
        raise ConfigurationError("cutoff_range must be >= 1")
    n = array.n_sites
    m = np.zeros((n, n), dtype=complex)
    for (i, j), v in _pair_table(array, direction, cutoff_range,
                                 reference_frequencies).items():
        m[i, j] = v
        m[j, i] = v
    return CouplingMatrix(matrix=m, direction=direction)


def effective_coupling_matrix(array: TrapArray, drive: DriveSpec, direction: str,
                              cutoff_range: float = DEFAULT_CUTOFF_RANGE, *,
                              reference_frequencies: bool = False,
                              diagonal_bonds: bool = True) -> CouplingMatrix:
    """Drive-assisted couplings on a gradient array.

    Bonds that climb one column (i_x = j_x + 1) acquire the dressed factor
    and the phase exp(-i (r/2)(phi_i + phi_j)); bonds within a column keep
    the bare amplitude; bonds spanning two or more columns are dropped as
    off-resonant.  diagonal_bonds=False additionally drops the assisted
    bonds that also step in y, leaving the pure tight-binding form.
    """
    if array.gradient == 0.0:
        raise ConfigurationError("effective couplings need a frequency gradient along x")
    if not drive.is_resonant(array):
        raise ConfigurationError(
            f"drive is off-resonant: r * drive_frequency = "
            f"{drive.resonance_order * drive.drive_frequency}, gradient = {array.gradient}"
        )
    bare = bare_coupling_matrix(array, direction, cutoff_range,
                                reference_frequencies=reference_frequencies)
    phases = drive.site_phases(array)
    r = drive.resonance_order
    eta = drive.eta_d
    lat = array.lattice
    n = array.n_sites
    m = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i == j or bare.matrix[i, j] == 0:
                continue
            dix = lat[i][0] - lat[j][0]
            if dix == 0:
                m[i, j] = bare.matrix[i, j]
            elif dix == 1:
                if not diagonal_bonds and lat[i][1] != lat[j][1]:
                    continue
                dphi = phases[i] - phases[j]
                amp = bare.matrix[i, j] * dressed_factor(r, eta, dphi) \
                    * np.exp(-0.5j * r * (phases[i] + phases[j]))
                m[i, j] = amp
                m[j, i] = np.conj(amp)
    meta = (
        ("resonance_order", float(r)),
        ("drive_strength", float(eta)),
        ("phase_x", float(drive.phase_x)),
        ("phase_y", float(drive.phase_y)),
    )
    return CouplingMatrix(matrix=m, direction=direction, metadata=meta)


def plaquette_flux(matrix, cycle) -> float:
    """Gauge-invariant phase accumulated around a closed path of bonds.

    The path visits `cycle` in order and closes on its first site; the bond
    factor for the step a -> b is matrix[a, b].  Returns arg of the product,
    mapped to (-pi, pi].
    """
    m = matrix.matrix if isinstance(matrix, CouplingMatrix) else np.asarray(matrix)
    sites = list(cycle)
    if len(sites) < 3:
        raise BrokenCycleError("a plaquette cycle must visit at least three sites")
    prod = 1.0 + 0.0j
    for a, b in zip(sites, sites[1:] + sites[:1]):
        v = m[a, b]
        if v == 0:
            raise BrokenCycleError(f"zero bond on cycle: {a} -> {b}")
        prod *= v
    flux = float(np.angle(prod))
    if flux <= -math.pi + 1e-12:
        flux += 2.0 * math.pi
    return flux
