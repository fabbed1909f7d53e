"""Scenario files: a strict ``key = value`` format with mandatory units.

Example::

    name = half_loop
    experiment = half_vs_full
    field = calibrated
    acceleration = 481 m/s2
    T1 = 5.4 us
    scan.start = 0 us
    scan.stop = 400 us
    scan.points = 81
    output.format = csv

``#`` starts a comment. Every physical quantity needs a unit suffix (with or
without a space). Lists are comma separated. Values are converted to SI on
parsing; trap frequencies given in Hz become angular frequencies.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .constants import AMU, BIAS_FIELD_DEFAULT, M_C12, M_RB87
from .errors import ConfigError
from .feasibility import MacroObjectSpec
from .interferometer import build_timeline
from .magnetics import (
    CalibratedAcceleration,
    RectWire,
    ThinWire,
    ThreeWireQuadrupole,
    UniformGradient,
    gradient_for_acceleration,
    thin_wire_current_for_gradient,
)
from .wavepacket import CondensateParams, GaussianState, released_state

# unit -> (dimension, factor to SI)
UNITS: dict[str, tuple[str, float]] = {
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
    "µs": ("time", 1e-6),
    "ns": ("time", 1e-9),
    "m": ("length", 1.0),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "µm": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "m/s": ("velocity", 1.0),
    "mm/s": ("velocity", 1e-3),
    "um/s": ("velocity", 1e-6),
    "m/s2": ("acceleration", 1.0),
    "m/s^2": ("acceleration", 1.0),
    "T/m": ("gradient", 1.0),
    "G/cm": ("gradient", 1e-2),
    "T/m2": ("curvature", 1.0),
    "T/m^2": ("curvature", 1.0),
    "T": ("field", 1.0),
    "mT": ("field", 1e-3),
    "G": ("field", 1e-4),
    "A": ("current", 1.0),
    "mA": ("current", 1e-3),
    "Hz": ("frequency", 2.0 * math.pi),
    "kHz": ("frequency", 2.0 * math.pi * 1e3),
    "MHz": ("frequency", 2.0 * math.pi * 1e6),
    "rad/s": ("frequency", 1.0),
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180.0),
    "kg": ("mass", 1.0),
    "u": ("mass", AMU),
    "muB": ("moment", 1.0),
}

EXPERIMENTS = ("simulate", "scan", "optimize", "fit", "single_kick", "half_vs_full", "jitter", "feasibility")
FIELDS = ("none", "uniform", "calibrated", "thin_wire", "rect_wire", "quadrupole")


@dataclass(frozen=True)
class KeySpec:
    kind: str  # quantity | count | number | string | choice | bool | list
    dim: str | None = None
    choices: tuple[str, ...] = ()
    item_kind: str | None = None  # element kind of a list


def _q(dim):
    return KeySpec("quantity", dim)


def _choice(*options):
    return KeySpec("choice", choices=options)


SCHEMA: dict[str, KeySpec] = {
    "name": KeySpec("string"),
    "experiment": _choice(*EXPERIMENTS),
    "seed": KeySpec("count"),
    "output.format": _choice("csv", "json"),
    "output.path": KeySpec("string"),
    "scheme": _choice("CurrentInversionA", "CurrentInversionB", "SpinInversion", "HalfLoop", "SingleKick"),
    "T1": _q("time"),
    "T2": _q("time"),
    "T3": _q("time"),
    "T4": _q("time"),
    "Td1": _q("time"),
    "Td2": _q("time"),
    "Td0": _q("time"),
    "gravity": KeySpec("bool"),
    "spin_coherence_time": _q("time"),
    "samples_per_segment": KeySpec("count"),
    "field": _choice(*FIELDS),
    "acceleration": _q("acceleration"),
    "gradient": _q("gradient"),
    "curvature": _q("curvature"),
    "current": _q("current"),
    "wire_position": _q("length"),
    "wire_width": _q("length"),
    "wire_height": _q("length"),
    "wire_center": _q("length"),
    "lateral_offset": _q("length"),
    "bias_field": _q("field"),
    "quad.currents": KeySpec("list", "current", item_kind="quantity"),
    "quad.offsets": KeySpec("list", "length", item_kind="quantity"),
    "quad.height": _q("length"),
    "initial.source": _choice("condensate", "minimum", "coherence"),
    "initial.sigma_z": _q("length"),
    "initial.l_z": _q("length"),
    "initial.lp_velocity": _q("velocity"),
    "initial.z": _q("length"),
    "initial.v": _q("velocity"),
    "condensate.N": KeySpec("number"),
    "condensate.fx": _q("frequency"),
    "condensate.fy": _q("frequency"),
    "condensate.fz": _q("frequency"),
    "condensate.a_s": _q("length"),
    "readout_phase": _q("angle"),
    "phi.points": KeySpec("count"),
    "scan.variable": _choice("T23", "phi", "Td"),
    "scan.start": KeySpec("quantity"),
    "scan.stop": KeySpec("quantity"),
    "scan.points": KeySpec("count"),
    "optimize.free": KeySpec("list", item_kind="string"),
    "optimize.constraint": _choice("none", "fixed_total_time"),
    "optimize.objective": _choice("HDPenalty", "OverlapMagnitude"),
    "optimize.grid_points": KeySpec("count"),
    "fit.input": KeySpec("string"),
    "fit.model": _choice("sine", "gaussian_sine"),
    "fit.phase_degree": KeySpec("count"),
    "fit.center": KeySpec("quantity"),
    "jitter.current_rel_sigma": KeySpec("number"),
    "jitter.timing_sigma": _q("time"),
    "jitter.shots": KeySpec("count"),
    "feasibility.n_atoms": KeySpec("number"),
    "feasibility.atom_mass": _q("mass"),
    "feasibility.spin_moment": _q("moment"),
    "feasibility.trap_frequency": _q("frequency"),
    "feasibility.spin_coherence_time": _q("time"),
    "feasibility.distance": _q("length"),
    "feasibility.T_list": KeySpec("list", "time", item_kind="quantity"),
}

# dimension of scan.start / scan.stop for each scan variable
SCAN_DIMENSION = {"T23": "time", "phi": "angle", "Td": "time", "dv": "velocity"}


class ScenarioError(ConfigError):
    """Parse or validation error, with location and a machine-readable kind."""

    def __init__(self, kind: str, message: str, key: str | None = None, line: int | None = None, col: int | None = None):
        self.kind = kind
        self.key = key
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(f"{where}{message}")

    def as_dict(self) -> dict:
        return {"error": self.kind, "key": self.key, "line": self.line, "column": self.col, "message": str(self)}


@dataclass(frozen=True)
class Quantity:
    """A parsed physical value: SI magnitude plus the dimension it was written in."""

    value: float
    dim: str


@dataclass(frozen=True)
class Scenario:
    name: str
    experiment: str
    parameters: dict = field(default_factory=dict)
    output_format: str = "csv"
    output_path: str = "."
    seed: int = 0

    def get(self, key, default=None):
        v = self.parameters.get(key, default)
        return v.value if isinstance(v, Quantity) else v

    def as_dict(self) -> dict:
        params = {}
        for k, v in sorted(self.parameters.items()):
            if isinstance(v, Quantity):
                params[k] = {"value": v.value, "dimension": v.dim}
            elif isinstance(v, list):
                params[k] = [{"value": x.value, "dimension": x.dim} if isinstance(x, Quantity) else x for x in v]
            else:
                params[k] = v
        return {
            "name": self.name,
            "experiment": self.experiment,
            "seed": self.seed,
            "output": {"format": self.output_format, "path": self.output_path},
            "parameters": params,
        }


_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*)$")


def _parse_quantity(text, key, dim, line, col):
    m = _NUMBER.match(text)
    if not m:
        raise ScenarioError("bad_value", f"{key}: expected a number with a unit, got {text!r}", key, line, col)
    number, unit = float(m.group(1)), m.group(2).strip()
    if not unit:
        raise ScenarioError("missing_unit", f"{key}: value {text!r} has no unit", key, line, col)
    unit_col = col + text.index(unit) if unit in text else col
    if unit not in UNITS:
        raise ScenarioError("unknown_unit", f"{key}: unknown unit {unit!r}", key, line, unit_col)
    udim, factor = UNITS[unit]
    if dim is not None and udim != dim:
        raise ScenarioError("unit_mismatch", f"{key}: unit {unit!r} is a {udim}, expected a {dim}", key, line, unit_col)
    value = number * factor
    if udim == "time" and value < 0:
        raise ScenarioError("negative_duration", f"{key}: duration must be non-negative", key, line, col)
    return Quantity(value, udim)


def _parse_scalar(spec: KeySpec, text, key, line, col, dim=None):
    kind = spec.kind
    if kind == "quantity":
        return _parse_quantity(text, key, dim or spec.dim, line, col)
    if kind == "count":
        if not re.fullmatch(r"\d+", text):
            raise ScenarioError("bad_value", f"{key}: expected a non-negative integer, got {text!r}", key, line, col)
        return int(text)
    if kind == "number":
        m = _NUMBER.match(text)
        if not m or m.group(2):
            raise ScenarioError("bad_value", f"{key}: expected a plain number, got {text!r}", key, line, col)
        return float(m.group(1))
    if kind == "bool":
        low = text.lower()
        if low not in ("true", "false", "yes", "no", "on", "off"):
            raise ScenarioError("bad_value", f"{key}: expected true or false, got {text!r}", key, line, col)
        return low in ("true", "yes", "on")
    if kind == "choice":
        if text not in spec.choices:
            raise ScenarioError("bad_value", f"{key}: {text!r} is not one of {', '.join(spec.choices)}", key, line, col)
        return text
    if kind == "string":
        if not text:
            raise ScenarioError("bad_value", f"{key}: empty value", key, line, col)
        return text
    raise AssertionError(kind)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; raises ScenarioError with line/column."""
    raw: dict[str, tuple[str, int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        if "=" not in stripped:
            col = len(line) - len(line.lstrip()) + 1
            raise ScenarioError("syntax", "expected 'key = value'", None, lineno, col)
        key_part, value_part = stripped.split("=", 1)
        key = key_part.strip()
        key_col = line.index(key) + 1 if key else 1
        if key not in SCHEMA:
            raise ScenarioError("unknown_key", f"unknown key {key!r}", key, lineno, key_col)
        if key in raw:
            raise ScenarioError("duplicate_key", f"key {key!r} given twice", key, lineno, key_col)
        value = value_part.strip()
        value_col = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip())) if value else len(stripped) + 1
        raw[key] = (value, lineno, value_col)

    parsed = {}
    for key, (value, lineno, col) in raw.items():
        spec = SCHEMA[key]
        if key in ("scan.start", "scan.stop"):
            continue
        if spec.kind == "list":
            items = [s.strip() for s in value.split(",")]
            if not all(items):
                raise ScenarioError("bad_value", f"{key}: empty list entry", key, lineno, col)
            item_spec = KeySpec(spec.item_kind, spec.dim)
            parsed[key] = [_parse_scalar(item_spec, it, key, lineno, col) for it in items]
        else:
            parsed[key] = _parse_scalar(spec, value, key, lineno, col)

    if "experiment" not in parsed:
        raise ScenarioError("missing_key", "scenario needs an 'experiment' key", "experiment")
    variable = parsed.get("scan.variable")
    if parsed["experiment"] == "single_kick":
        variable = "dv"
    for key in ("scan.start", "scan.stop"):
        if key in raw:
            value, lineno, col = raw[key]
            dim = SCAN_DIMENSION.get(variable) if variable else None
            parsed[key] = _parse_quantity(value, key, dim, lineno, col)

    params = {k: v for k, v in parsed.items() if k not in ("name", "experiment", "seed", "output.format", "output.path")}
    return Scenario(
        name=parsed.get("name", parsed["experiment"]),
        experiment=parsed["experiment"],
        parameters=params,
        output_format=parsed.get("output.format", "csv"),
        output_path=parsed.get("output.path", "."),
        seed=parsed.get("seed", 0),
    )


def require(scenario: Scenario, *keys):
    missing = [k for k in keys if k not in scenario.parameters]
    if missing:
        raise ScenarioError("missing_key", f"experiment {scenario.experiment!r} needs {', '.join(missing)}", missing[0])


# --- builders ---------------------------------------------------------------------


def build_field(scenario: Scenario):
    kind = scenario.get("field", "calibrated" if "acceleration" in scenario.parameters else "none")
    bias = scenario.get("bias_field", BIAS_FIELD_DEFAULT)
    if kind == "none":
        return None
    if kind == "calibrated":
        require(scenario, "acceleration")
        return CalibratedAcceleration(scenario.get("acceleration"), bias_field=bias)
    if kind == "uniform":
        if "gradient" in scenario.parameters:
            grad = scenario.get("gradient")
        else:
            require(scenario, "acceleration")
            grad = gradient_for_acceleration(scenario.get("acceleration"), M_RB87)
        return UniformGradient(grad, scenario.get("curvature", 0.0), bias)
    if kind == "thin_wire":
        pos = scenario.get("wire_position", 0.0)
        if "current" in scenario.parameters:
            current = scenario.get("current")
        else:
            # current whose relative acceleration at the initial position matches, pushing away from the wire
            require(scenario, "acceleration", "initial.z")
            grad = gradient_for_acceleration(scenario.get("acceleration"), M_RB87)
            current = -thin_wire_current_for_gradient(grad, abs(pos - scenario.get("initial.z")))
        return ThinWire(current, pos, scenario.get("lateral_offset", 0.0), bias)
    if kind == "rect_wire":
        require(scenario, "current", "wire_width", "wire_height")
        return RectWire(
            scenario.get("current"),
            scenario.get("wire_width"),
            scenario.get("wire_height"),
            scenario.get("wire_center", 0.0),
            scenario.get("lateral_offset", 0.0),
            bias,
        )
    if kind == "quadrupole":
        require(scenario, "quad.currents", "quad.offsets")
        currents = [q.value for q in scenario.parameters["quad.currents"]]
        offsets = [q.value for q in scenario.parameters["quad.offsets"]]
        if len(currents) != 3 or len(offsets) != 3:
            raise ScenarioError("bad_value", "a quadrupole needs three currents and three offsets", "quad.currents")
        h = scenario.get("quad.height", 0.0)
        return ThreeWireQuadrupole(tuple(currents), tuple((y, h) for y in offsets), bias)
    raise AssertionError(kind)


def build_initial(scenario: Scenario):
    source = scenario.get("initial.source", "condensate")
    z = scenario.get("initial.z", 0.0)
    p = M_RB87 * scenario.get("initial.v", 0.0)
    if source == "minimum":
        require(scenario, "initial.sigma_z")
        return GaussianState.minimum_uncertainty(scenario.get("initial.sigma_z"), z=z, p=p)
    if source == "coherence":
        require(scenario, "initial.l_z", "initial.lp_velocity")
        return GaussianState.from_coherence_scales(
            scenario.get("initial.l_z"), M_RB87 * scenario.get("initial.lp_velocity"), z=z, p=p
        )
    two_pi = 2.0 * math.pi
    params = CondensateParams(
        N=scenario.get("condensate.N", 1e4),
        omega_x=scenario.get("condensate.fx", two_pi * 40.0),
        omega_y=scenario.get("condensate.fy", two_pi * 40.0),
        omega_z=scenario.get("condensate.fz", two_pi * 126.0),
        a_s=scenario.get("condensate.a_s", 5.18e-9),
    )
    return released_state(params, z=z, p=p)


def build_timeline_from(scenario: Scenario, scheme: str | None = None):
    durations = {k: scenario.get(k, 0.0) for k in ("T1", "T2", "T3", "T4", "Td1", "Td2", "Td0")}
    return build_timeline(
        scheme or scenario.get("scheme", "CurrentInversionA"),
        durations,
        build_field(scenario),
        gravity=scenario.get("gravity", True),
        spin_coherence_time=scenario.get("spin_coherence_time"),
    )


def build_macro_spec(scenario: Scenario):
    moment = scenario.get("feasibility.spin_moment", 2.0)
    return MacroObjectSpec(
        n_atoms=scenario.get("feasibility.n_atoms", 1e6),
        atom_mass=scenario.get("feasibility.atom_mass", M_C12),
        spin_moment=moment,
        trap_omega=scenario.get("feasibility.trap_frequency", 2.0 * math.pi * 80e3),
        spin_coherence_time=scenario.get("feasibility.spin_coherence_time", 0.6),
    )

