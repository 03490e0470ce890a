"""Experiment configuration: strict key-value schema and presets.

Config files are flat UTF-8 text, one ``section.key = value`` pair per line,
'#' comments allowed.  Presets fully populate every physical parameter with
the reference defaults; user lines override them.  Unknown keys, keys that
the chosen experiment does not consume, and out-of-range values are all
rejected, with every violation reported at once.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

EXPERIMENTS = (
    "fig2a_dressed_map",
    "fig2b_link_scan",
    "fig2cd_plaquette",
    "fig2e_ladder_spectrum",
    "fig2f_flux_sweep",
    "butterfly",
    "custom",
)

EXPERIMENT_SUMMARIES = {
    "fig2a_dressed_map": "map of the dressed-coupling magnitude over drive strength and phase step",
    "fig2b_link_scan": "two-site transfer at the full-transfer time vs phase step, dressed vs exact drive",
    "fig2cd_plaquette": "four-site ring interference at synthetic flux 0 or pi, dressed vs exact drive",
    "fig2e_ladder_spectrum": "rhombic-ladder spectrum with flat-band and edge-state reports",
    "fig2f_flux_sweep": "rhombic-ladder spectrum and minimal inter-band gap vs flux",
    "butterfly": "square-lattice spectrum vs flux per plaquette",
    "custom": "effective-coupling spectrum for a user-defined array and drive",
}


class ConfigError(ValueError):
    """One or more schema violations; `.violations` lists them all."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


_PI_FORM = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)?)\s*pi$")


def _parse_float(text: str) -> float:
    return float(text)


def _parse_angle(text: str) -> float:
    m = _PI_FORM.match(text.strip())
    if m:
        mult = m.group(1)
        if mult in ("", "+"):
            mult = "1"
        elif mult == "-":
            mult = "-1"
        return float(mult) * math.pi
    return float(text)


def _parse_int(text: str) -> int:
    if not re.fullmatch(r"[+-]?\d+", text.strip()):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(text)


def _parse_flux_token(text: str) -> float:
    token = text.strip()
    if token == "0":
        return 0.0
    if token == "pi":
        return math.pi
    raise ValueError(f"expected 0 or pi, got {text!r}")


def _enum(*options):
    def parse(text: str) -> str:
        token = text.strip()
        if token not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return token
    return parse


def _ge(bound):
    def check(v):
        return None if v >= bound else f"must be >= {bound}, got {v}"
    return check


def _gt(bound):
    def check(v):
        return None if v > bound else f"must be > {bound}, got {v}"
    return check


@dataclass(frozen=True)
class FieldSpec:
    parse: object
    experiments: frozenset
    check: object = None
    help: str = ""


def _f(parse, experiments, check=None, help=""):
    return FieldSpec(parse=parse, experiments=frozenset(experiments), check=check, help=help)


_DYNAMIC = ("fig2b_link_scan", "fig2cd_plaquette")
_LADDERS = ("fig2e_ladder_spectrum", "fig2f_flux_sweep")
_ALL = EXPERIMENTS

SCHEMA: dict[str, FieldSpec] = {
    "experiment": _f(_enum(*EXPERIMENTS), _ALL, help="which preset to run"),
    "output.format": _f(_enum("csv", "json"), _ALL),
    "direction": _f(_enum("x", "y", "z"), _DYNAMIC + ("custom",)),
    # dressed-coupling map
    "map.eta_max": _f(_parse_float, ("fig2a_dressed_map",), _gt(0)),
    "map.eta_points": _f(_parse_int, ("fig2a_dressed_map",), _ge(2)),
    "map.phase_points": _f(_parse_int, ("fig2a_dressed_map",), _ge(2)),
    # array geometry / Coulomb scale
    "array.layout": _f(_enum("link", "plaquette", "rhombic_ladder", "square"), ("custom",)),
    "array.nx": _f(_parse_int, ("custom",)),
    "array.ny": _f(_parse_int, ("custom",)),
    "array.cells": _f(_parse_int, ("custom",)),
    "array.spacing_x": _f(_parse_float, ("custom",), _gt(0)),
    "array.spacing_y": _f(_parse_float, ("custom",), _gt(0)),
    "array.base_frequency": _f(_parse_float, _DYNAMIC + ("custom",), _gt(0)),
    "array.gradient": _f(_parse_float, _DYNAMIC + ("custom",)),
    "array.beta": _f(_parse_float, _DYNAMIC + ("custom",), _gt(0)),
    # drive
    "drive.mode": _f(_enum("cosine", "laser"), ("custom",)),
    "drive.rabi_frequency": _f(_parse_float, _DYNAMIC + ("custom",), _ge(0)),
    "drive.beat_frequency": _f(_parse_float, _DYNAMIC + ("custom",), _gt(0)),
    "drive.lamb_dicke": _f(_parse_float, _DYNAMIC + ("custom",), _ge(0)),
    "drive.strength": _f(_parse_float, ("custom",), _ge(0)),
    "drive.resonance_order": _f(_parse_int, ("fig2a_dressed_map",) + _DYNAMIC + ("custom",), _ge(1)),
    "drive.phase_x": _f(_parse_angle, ("custom",)),
    "drive.phase_y": _f(_parse_angle, ("custom",)),
    # experiment-specific knobs
    "plaquette.flux": _f(_parse_flux_token, ("fig2cd_plaquette",)),
    "scan.points": _f(_parse_int, ("fig2b_link_scan",), _ge(2)),
    "ladder.cells": _f(_parse_int, _LADDERS, _ge(1)),
    "ladder.j1": _f(_parse_float, _LADDERS, _gt(0)),
    "ladder.j2": _f(_parse_float, _LADDERS, _ge(0)),
    "ladder.flux": _f(_parse_angle, ("fig2e_ladder_spectrum",)),
    "ladder.boundary": _f(_enum("open", "periodic"), ("fig2e_ladder_spectrum",)),
    "sweep.points": _f(_parse_int, ("fig2f_flux_sweep",), _ge(2)),
    "sweep.boundary": _f(_enum("open", "periodic"), ("fig2f_flux_sweep",)),
    "butterfly.size": _f(_parse_int, ("butterfly",), _ge(2)),
    "butterfly.points": _f(_parse_int, ("butterfly",), _ge(2)),
    "butterfly.j_x": _f(_parse_float, ("butterfly",), _gt(0)),
    "butterfly.j_y": _f(_parse_float, ("butterfly",), _gt(0)),
    "butterfly.m_max": _f(_parse_int, ("butterfly",), _ge(1)),
    "butterfly.boundary": _f(_enum("open", "periodic"), ("butterfly",)),
    # numerics
    "numerics.n_max": _f(_parse_int, _DYNAMIC, _ge(0)),
    "numerics.samples": _f(_parse_int, ("fig2cd_plaquette",), _ge(2)),
    "numerics.time_step_divisor": _f(_parse_int, _DYNAMIC, _ge(1)),
    "numerics.cutoff_range": _f(_parse_float, ("fig2cd_plaquette", "custom"), _ge(1)),
    "numerics.window": _f(_parse_float, ("fig2cd_plaquette",), _gt(0)),
}

_REQUIRED = {"custom": ("array.layout",)}

#: Conditional default: the ring-interference drive power depends on the flux
#: (strong drive for free circulation, weak drive for the interference run).
_PLAQUETTE_RABI = {0.0: 0.75, math.pi: 0.25}

PRESETS: dict[str, dict] = {
    "fig2a_dressed_map": {
        "map.eta_max": 2.0,
        "map.eta_points": 81,
        "map.phase_points": 81,
        "drive.resonance_order": 1,
        "output.format": "csv",
    },
    "fig2b_link_scan": {
        "array.gradient": 0.05,
        "array.beta": 0.002,
        "array.base_frequency": 1.0,
        "drive.rabi_frequency": 0.75,
        "drive.beat_frequency": 0.05,
        "drive.lamb_dicke": 0.2,
        "drive.resonance_order": 1,
        "numerics.n_max": 4,
        "numerics.time_step_divisor": 40,
        "scan.points": 21,
        "direction": "z",
        "output.format": "csv",
    },
    "fig2cd_plaquette": {
        "plaquette.flux": math.pi,
        "array.gradient": 0.05,
        "array.beta": 0.002,
        "array.base_frequency": 1.0,
        "drive.rabi_frequency": None,  # resolved from the flux unless given
        "drive.beat_frequency": 0.05,
        "drive.lamb_dicke": 0.2,
        "drive.resonance_order": 1,
        "numerics.n_max": 2,
        "numerics.samples": 601,
        "numerics.time_step_divisor": 40,
        "numerics.cutoff_range": 3.0,
        "numerics.window": None,  # auto: one full ring-transfer cycle
        "direction": "z",
        "output.format": "csv",
    },
    "fig2e_ladder_spectrum": {
        "ladder.cells": 10,
        "ladder.j1": 1.0,
        "ladder.j2": 1.0,
        "ladder.flux": math.pi,
        "ladder.boundary": "open",
        "output.format": "json",
    },
    "fig2f_flux_sweep": {
        "sweep.points": 41,
        "sweep.boundary": "periodic",
        "ladder.cells": 10,
        "ladder.j1": 1.0,
        "ladder.j2": 1.0,
        "output.format": "csv",
    },
    "butterfly": {
        "butterfly.size": 12,
        "butterfly.points": 121,
        "butterfly.j_x": 1.0,
        "butterfly.j_y": 1.0,
        "butterfly.m_max": 1,
        "butterfly.boundary": "open",
        "output.format": "csv",
    },
    "custom": {
        "array.layout": None,  # required
        "array.nx": 2,
        "array.ny": 2,
        "array.cells": 4,
        "array.spacing_x": 1.0,
        "array.spacing_y": 1.0,
        "array.base_frequency": 1.0,
        "array.gradient": 0.05,
        "array.beta": 0.002,
        "drive.mode": "laser",
        "drive.rabi_frequency": 0.75,
        "drive.beat_frequency": 0.05,
        "drive.lamb_dicke": 0.2,
        "drive.strength": 0.6,
        "drive.resonance_order": 1,
        "drive.phase_x": math.pi,
        "drive.phase_y": math.pi,
        "numerics.cutoff_range": 3.0,
        "direction": "z",
        "output.format": "json",
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    values: tuple[tuple[str, object], ...]

    def __getitem__(self, key: str):
        for k, v in self.values:
            if k == key:
                return v
        raise KeyError(key)

    def get(self, key: str, default=None):
        try:
            return self[key]
        except KeyError:
            return default

    def as_dict(self) -> dict:
        out = {"experiment": self.experiment}
        out.update(dict(self.values))
        return out


def _split_lines(text: str):
    """Yield (lineno, key, value) triples; malformed lines yield key=None."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            yield lineno, None, line
            continue
        key, value = line.split("=", 1)
        yield lineno, key.strip(), value.strip()


def parse_config(text: str) -> ExperimentConfig:
    """Validate the document against the schema or raise ConfigError with
    the full list of violations (path plus reason, one entry each)."""
    violations: list[str] = []
    raw: dict[str, str] = {}
    for lineno, key, value in _split_lines(text):
        if key is None:
            violations.append(f"line {lineno}: not a 'key = value' pair: {value!r}")
            continue
        if key in raw:
            violations.append(f"{key}: duplicate key (line {lineno})")
            continue
        raw[key] = value

    experiment = raw.pop("experiment", None)
    if experiment is None:
        violations.append(
            "experiment: missing required key (one of " + ", ".join(EXPERIMENTS) + ")"
        )
        raise ConfigError(violations)
    if experiment not in EXPERIMENTS:
        violations.append(f"experiment: expected one of {EXPERIMENTS}, got {experiment!r}")
        raise ConfigError(violations)

    values = dict(PRESETS[experiment])
    for key, text_value in raw.items():
        spec = SCHEMA.get(key)
        if spec is None:
            violations.append(f"{key}: unknown key")
            continue
        if experiment not in spec.experiments:
            violations.append(f"{key}: not consumed by experiment {experiment}")
            continue
        try:
            value = spec.parse(text_value)
        except ValueError as exc:
            violations.append(f"{key}: {exc}")
            continue
        if spec.check is not None:
            problem = spec.check(value)
            if problem:
                violations.append(f"{key}: range violation, {problem}")
                continue
        values[key] = value

    for key in _REQUIRED.get(experiment, ()):
        if values.get(key) is None:
            violations.append(f"{key}: missing required key for experiment {experiment}")

    if experiment == "fig2cd_plaquette" and values.get("drive.rabi_frequency") is None:
        values["drive.rabi_frequency"] = _PLAQUETTE_RABI[values["plaquette.flux"]]

    if violations:
        raise ConfigError(violations)
    return ExperimentConfig(experiment=experiment,
                            values=tuple(sorted(values.items())))
