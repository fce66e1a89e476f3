"""Scenario files: schema, parser, serializer, presets and model assembly.

The format is sectioned key/value text::

    [plant]
    A =
        0 4 0 0
        -15 -15.85 -4.02 -5.7
        ...
    d_bar = 1

Scalars and vectors sit on the key line; a matrix leaves the key line empty
and lists one indented row per line. ``#`` starts a comment.
"""

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .controller import AdaptiveGains, ConstraintSpec
from .errors import BLFMRACError, ScenarioParseError, ScenarioValidationError
from .feasibility import FeasibilityInputs, feasibility_report
from .simulation import CONTROLLERS, AugmentedState, ClosedLoop, ControllerConfig
from .system import (
    DISTURBANCE_KINDS,
    REFERENCE_KINDS,
    DisturbanceSignal,
    PlantModel,
    ReferenceModel,
    ReferenceSignal,
)

__all__ = [
    "SCHEMA",
    "Scenario",
    "ScenarioModels",
    "parse_scenario",
    "serialize_scenario",
    "load_scenario",
    "load_preset",
    "PRESETS",
    "paper_s4",
]

MATRIX, VECTOR, FLOAT, INT, STR = "matrix", "vector", "float", "int", "str"

# section -> key -> (type, required)
SCHEMA = {
    "plant": {"A": (MATRIX, True), "B": (MATRIX, True), "d_bar": (FLOAT, True)},
    "reference": {"Ar": (MATRIX, True), "Br": (MATRIX, True), "Q": (MATRIX, True)},
    "constraints": {
        "x_bar": (FLOAT, True), "u1_bar": (FLOAT, True), "u2_bar": (FLOAT, True),
        "M": (MATRIX, True), "x_bar_r": (FLOAT, True),
    },
    "gains": {
        "Gamma_x": (MATRIX, True), "Gamma_u": (MATRIX, True), "sigma_x": (FLOAT, True),
        "kx_bar": (FLOAT, True), "kr_bar": (FLOAT, True), "rho": (FLOAT, False),
        "eps_p": (FLOAT, False), "baseline_Gamma_x": (MATRIX, False),
        "baseline_sigma_x": (FLOAT, False),
    },
    "signals": {
        "reference": (STR, False), "reference_amplitude": (VECTOR, False),
        "reference_omega": (VECTOR, False), "reference_phase": (VECTOR, False),
        "reference_values": (VECTOR, False), "r_bar": (FLOAT, False),
        "disturbance": (STR, False), "disturbance_amplitude": (VECTOR, False),
        "disturbance_omega": (VECTOR, False), "disturbance_phase": (VECTOR, False),
        "disturbance_level": (FLOAT, False), "disturbance_terms": (INT, False),
    },
    "init": {
        "x": (VECTOR, False), "xr": (VECTOR, False), "u": (VECTOR, False),
        "u_dot": (VECTOR, False), "Khat_x": (MATRIX, False), "Ku": (MATRIX, False),
    },
    "integrator": {
        "dt": (FLOAT, False), "horizon": (FLOAT, False), "decimation": (INT, False),
        "dt_min": (FLOAT, False),
    },
    "run": {"controller": (STR, False), "seed": (INT, False)},
}

DEFAULTS = {
    "signals.reference": "zero",
    "signals.disturbance": "zero",
    "signals.disturbance_level": 0.99,
    "signals.disturbance_terms": 3,
    "integrator.dt": 1e-3,
    "integrator.horizon": 60.0,
    "integrator.decimation": 10,
    "integrator.dt_min": 1e-6,
    "run.controller": "proposed",
    "run.seed": 0,
}


def _values_equal(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a = np.asarray(a)
        b = np.asarray(b)
        return a.shape == b.shape and np.array_equal(a, b)
    return type(a) is type(b) and a == b


@dataclass(eq=False)
class Scenario:
    """Validated scenario content, keyed ``data[section][key]``.

    Only keys present in the source are stored; :meth:`get` supplies
    defaults. Use :meth:`build` to obtain model objects.
    """

    data: dict

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        if set(self.data) != set(other.data):
            return False
        for sec, entries in self.data.items():
            if set(entries) != set(other.data[sec]):
                return False
            for key, value in entries.items():
                if not _values_equal(value, other.data[sec][key]):
                    return False
        return True

    def get(self, dotted, default=None):
        sec, key = dotted.split(".")
        if key in self.data.get(sec, {}):
            return self.data[sec][key]
        return DEFAULTS.get(dotted, default)

    def with_values(self, **dotted_values):
        """Copy with entries replaced, e.g. ``with_values(**{"integrator.dt": 2e-3})``."""
        data = {sec: dict(entries) for sec, entries in self.data.items()}
        for dotted, value in dotted_values.items():
            sec, key = dotted.split(".")
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise ScenarioParseError("unknown key", field=dotted)
            kind = SCHEMA[sec][key][0]
            data.setdefault(sec, {})[key] = _coerce(value, kind, dotted)
        out = Scenario(data)
        _validate(out)
        return out

    @property
    def controller(self):
        return self.get("run.controller")

    @property
    def seed(self):
        return self.get("run.seed")

    @property
    def dt(self):
        return self.get("integrator.dt")

    @property
    def horizon(self):
        return self.get("integrator.horizon")

    @property
    def decimation(self):
        return self.get("integrator.decimation")

    def build(self):
        return ScenarioModels.from_scenario(self)


def _coerce(value, kind, dotted):
    try:
        if kind == MATRIX:
            arr = np.array(value, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            return arr
        if kind == VECTOR:
            return np.array(value, dtype=float).ravel()
        if kind == FLOAT:
            return float(value)
        if kind == INT:
            return int(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"bad value ({exc})", field=dotted) from None


def _numbers(text, lineno, dotted):
    parts = text.replace(",", " ").split()
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ScenarioParseError(f"non-numeric entry in {text!r}", line=lineno,
                                 field=dotted) from None


def parse_scenario(text):
    """Parse scenario text into a validated :class:`Scenario`."""
    data = {}
    section = None
    pending = None  # (dotted, first line, rows, row line numbers)
    raw = {}

    def flush():
        nonlocal pending
        if pending is None:
            return
        dotted, lineno, rows, row_lines = pending
        if not rows:
            raise ScenarioParseError("matrix has no rows", line=lineno, field=dotted)
        width = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != width:
                raise ScenarioValidationError(
                    f"{dotted}: row {i} has {len(row)} entries, expected {width} "
                    f"(line {row_lines[i]})",
                    fields=(dotted,),
                )
        raw[dotted] = (np.array(rows, dtype=float), lineno)
        pending = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        if body[0] in " \t":
            if pending is None:
                raise ScenarioParseError("unexpected indented line", line=lineno)
            pending[2].append(_numbers(body, lineno, pending[0]))
            pending[3].append(lineno)
            continue
        flush()
        stripped = body.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ScenarioParseError("malformed section header", line=lineno)
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise ScenarioParseError(f"unknown section [{section}]", line=lineno)
            if section in data:
                raise ScenarioParseError(f"duplicate section [{section}]", line=lineno)
            data[section] = {}
            continue
        if "=" not in stripped:
            raise ScenarioParseError("expected 'key = value'", line=lineno)
        if section is None:
            raise ScenarioParseError("key outside any section", line=lineno)
        key, value = (s.strip() for s in stripped.split("=", 1))
        dotted = f"{section}.{key}"
        if key not in SCHEMA[section]:
            raise ScenarioParseError("unknown key", line=lineno, field=dotted)
        if dotted in raw:
            raise ScenarioParseError("duplicate key", line=lineno, field=dotted)
        kind = SCHEMA[section][key][0]
        if kind == MATRIX and value == "":
            pending = (dotted, lineno, [], [])
            continue
        if value == "":
            raise ScenarioParseError("missing value", line=lineno, field=dotted)
        if kind == STR:
            raw[dotted] = (value, lineno)
        elif kind in (MATRIX, VECTOR):
            raw[dotted] = (_numbers(value, lineno, dotted), lineno)
        else:
            nums = _numbers(value, lineno, dotted)
            if len(nums) != 1:
                raise ScenarioParseError("expected a single number", line=lineno, field=dotted)
            if kind == INT and nums[0] != int(nums[0]):
                raise ScenarioParseError("expected an integer", line=lineno, field=dotted)
            raw[dotted] = (nums[0], lineno)
    flush()

    for dotted, (value, lineno) in raw.items():
        sec, key = dotted.split(".")
        data.setdefault(sec, {})[key] = _coerce(value, SCHEMA[sec][key][0], dotted)
    scenario = Scenario(data)
    _validate(scenario)
    return scenario


def _require(scenario):
    for sec, keys in SCHEMA.items():
        for key, (_, required) in keys.items():
            if required and key not in scenario.data.get(sec, {}):
                raise ScenarioParseError("missing required entry", field=f"{sec}.{key}")


def _validate(scenario):
    _require(scenario)
    g = scenario.get

    def mismatch(msg, *fields):
        raise ScenarioValidationError(f"{msg} ({' vs '.join(fields)})", fields=fields)

    A, B = g("plant.A"), g("plant.B")
    n = A.shape[0]
    if A.shape != (n, n):
        mismatch(f"plant.A must be square, got {A.shape}", "plant.A")
    if B.shape[0] != n:
        mismatch(f"plant.B has {B.shape[0]} rows, plant.A is {n}x{n}", "plant.B", "plant.A")
    m = B.shape[1]
    for name, shape in (("reference.Ar", (n, n)), ("reference.Br", (n, m)),
                        ("reference.Q", (n, n)), ("constraints.M", (m, m)),
                        ("gains.Gamma_x", (m, m)), ("gains.Gamma_u", (m, m)),
                        ("gains.baseline_Gamma_x", (m, m)), ("init.Khat_x", (m, n)),
                        ("init.Ku", (m, m))):
        value = g(name)
        if value is not None and value.shape != shape:
            ref = "plant.A" if shape[0] == n and shape != (m, m) else "plant.B"
            mismatch(f"{name} has shape {value.shape}, expected {shape}", name, ref)
    for name, dim in (("init.x", n), ("init.xr", n), ("init.u", m), ("init.u_dot", m),
                      ("signals.reference_amplitude", m), ("signals.reference_omega", m),
                      ("signals.reference_phase", m), ("signals.reference_values", m),
                      ("signals.disturbance_amplitude", n), ("signals.disturbance_omega", n),
                      ("signals.disturbance_phase", n)):
        value = g(name)
        if value is not None and value.size != dim:
            mismatch(f"{name} has {value.size} entries, expected {dim}", name,
                     "plant.A" if dim == n else "plant.B")
    if g("signals.reference") not in REFERENCE_KINDS:
        mismatch(f"signals.reference must be one of {REFERENCE_KINDS}", "signals.reference")
    if g("signals.disturbance") not in DISTURBANCE_KINDS:
        mismatch(f"signals.disturbance must be one of {DISTURBANCE_KINDS}",
                 "signals.disturbance")
    if g("run.controller") not in CONTROLLERS:
        mismatch(f"run.controller must be one of {CONTROLLERS}", "run.controller")
    for name in ("integrator.dt", "integrator.horizon", "integrator.dt_min"):
        if not g(name) > 0.0:
            mismatch(f"{name} must be positive", name)
    if g("integrator.decimation") < 1:
        mismatch("integrator.decimation must be >= 1", "integrator.decimation")
    steps = g("integrator.horizon") / g("integrator.dt")
    if not math.isclose(steps, round(steps), rel_tol=1e-9):
        mismatch("integrator.horizon must be a multiple of integrator.dt",
                 "integrator.horizon", "integrator.dt")


def _fmt(x):
    x = float(x)
    return repr(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


def serialize_scenario(scenario):
    """Inverse of :func:`parse_scenario`; floats are written with repr()."""
    out = []
    for sec, keys in SCHEMA.items():
        entries = scenario.data.get(sec)
        if not entries:
            continue
        out.append(f"[{sec}]")
        for key, (kind, _) in keys.items():
            if key not in entries:
                continue
            value = entries[key]
            if kind == MATRIX:
                out.append(f"{key} =")
                for row in np.atleast_2d(value):
                    out.append("    " + " ".join(_fmt(v) for v in row))
            elif kind == VECTOR:
                out.append(f"{key} = " + " ".join(_fmt(v) for v in value))
            elif kind == FLOAT:
                out.append(f"{key} = {_fmt(value)}")
            else:
                out.append(f"{key} = {value}")
        out.append("")
    return "\n".join(out)


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


PRESETS = {
    "paper-s4": "paper_s4.cfg",
    "paper-s4-robust-mrac": "paper_s4_robust_mrac.cfg",
}


def load_preset(name):
    if name not in PRESETS:
        raise ScenarioParseError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    text = resources.files("blfmrac.presets").joinpath(PRESETS[name]).read_text("utf-8")
    return parse_scenario(text)


def paper_s4(controller="proposed"):
    """The aircraft longitudinal example, built in code (mirrors the shipped file)."""
    half_pi = math.pi / 2.0
    data = {
        "plant": {
            "A": np.array([[0.0, 4.0, 0.0, 0.0],
                           [-15.0, -15.85, -4.02, -5.7],
                           [0.0, 0.0, 0.0, 4.0],
                           [-6.85, -9.9, -8.0, -9.8]]),
            "B": np.array([[0.0, 0.0], [0.2, 0.0], [0.0, 0.0], [0.0, 0.2]]),
            "d_bar": 1.0,
        },
        "reference": {
            "Ar": np.array([[0.0, 4.0, 0.0, 0.0],
                            [-14.18, -16.05, -3.88, -6.12],
                            [0.0, 0.0, 0.0, 4.0],
                            [-7.0, -10.2, -7.0, -10.2]]),
            "Br": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 2.0]]),
            "Q": np.eye(4),
        },
        "constraints": {"x_bar": 6.0, "u1_bar": 1.0, "u2_bar": 0.6, "M": np.eye(2),
                        "x_bar_r": 2.0},
        "gains": {
            "Gamma_x": 5.0 * np.eye(2) if controller == "proposed" else 15.0 * np.eye(2),
            "Gamma_u": 2.0 * np.eye(2),
            "sigma_x": 1.0, "kx_bar": 5.0, "kr_bar": 10.0, "rho": 2.3,
            "baseline_Gamma_x": 15.0 * np.eye(2), "baseline_sigma_x": 1.0,
        },
        "signals": {
            "reference": "sinusoid-vector",
            "reference_amplitude": np.array([0.4, 0.2]),
            "reference_omega": np.array([0.1, 0.05]),
            "reference_phase": np.array([0.0, half_pi]),
            "disturbance": "sinusoid-vector",
            "disturbance_amplitude": np.ones(4),
            "disturbance_omega": np.array([2.0, 3.0, 1.0, 2.0]),
            "disturbance_phase": np.array([0.0, half_pi, 0.0, half_pi]),
            "disturbance_level": 0.99,
        },
        "init": {
            "x": np.zeros(4), "xr": np.zeros(4), "u": np.zeros(2), "u_dot": np.zeros(2),
            "Khat_x": np.zeros((2, 4)), "Ku": np.eye(2),
        },
        "integrator": {"dt": 1e-3, "horizon": 60.0, "decimation": 10, "dt_min": 1e-6},
        "run": {"controller": controller, "seed": 0},
    }
    scenario = Scenario(data)
    _validate(scenario)
    return scenario


class ScenarioModels:
    """Model objects assembled from a :class:`Scenario`."""

    def __init__(self, scenario, plant, ref, reference_signal, disturbance, spec, gains,
                 baseline_gains, feasibility_inputs, feasibility, initial):
        self.scenario = scenario
        self.plant = plant
        self.ref = ref
        self.reference_signal = reference_signal
        self.disturbance = disturbance
        self.spec = spec
        self.gains = gains
        self.baseline_gains = baseline_gains
        self.feasibility_inputs = feasibility_inputs
        self.feasibility = feasibility
        self.initial = initial

    @classmethod
    def from_scenario(cls, sc):
        g = sc.get
        try:
            plant = PlantModel(g("plant.A"), g("plant.B"), g("plant.d_bar"))
            ref = ReferenceModel(g("reference.Ar"), g("reference.Br"), g("reference.Q"))
            n, m = plant.n, plant.m
            rsig = ReferenceSignal(
                g("signals.reference"), m, amplitude=g("signals.reference_amplitude"),
                omega=g("signals.reference_omega"), phase=g("signals.reference_phase"),
                values=g("signals.reference_values"), r_bar=g("signals.r_bar"),
            )
            dist = DisturbanceSignal(
                g("signals.disturbance"), n, bound=plant.d_bar,
                amplitude=g("signals.disturbance_amplitude"),
                omega=g("signals.disturbance_omega"), phase=g("signals.disturbance_phase"),
                level=g("signals.disturbance_level"), n_terms=g("signals.disturbance_terms"),
                seed=g("run.seed"),
            )
            spec = ConstraintSpec(g("constraints.x_bar"), g("constraints.u1_bar"),
                                  g("constraints.u2_bar"), g("constraints.M"),
                                  g("constraints.x_bar_r"))
            eps_kw = {} if g("gains.eps_p") is None else {"eps_p": g("gains.eps_p")}
            gains = AdaptiveGains(g("gains.Gamma_x"), g("gains.Gamma_u"), g("gains.sigma_x"),
                                  g("gains.kx_bar"), g("gains.kr_bar"), **eps_kw)
            base_G = g("gains.baseline_Gamma_x")
            base_s = g("gains.baseline_sigma_x")
            baseline = AdaptiveGains(
                gains.Gamma_x if base_G is None else base_G, gains.Gamma_u,
                gains.sigma_x if base_s is None else base_s, gains.kx_bar, gains.kr_bar,
                **eps_kw,
            )
            inputs = FeasibilityInputs.from_models(plant, ref, rsig, gains, spec,
                                                   rho=g("gains.rho"))
            report = feasibility_report(inputs)
            if report.ed_bar > 0.0:
                spec = spec.with_error_bound(report.ed_bar, ref.P)
            initial = AugmentedState(
                _or_zeros(g("init.x"), n), _or_zeros(g("init.xr"), n), np.zeros(n),
                _or_zeros(g("init.u"), m), _or_zeros(g("init.u_dot"), m),
                _or_zeros(g("init.Khat_x"), (m, n)),
                np.eye(m) if g("init.Ku") is None else g("init.Ku").copy(),
            )
        except ScenarioValidationError:
            raise
        except BLFMRACError as exc:
            raise ScenarioValidationError(str(exc)) from exc
        return cls(sc, plant, ref, rsig, dist, spec, gains, baseline, inputs, report, initial)

    def closed_loop(self, controller=None):
        kind = controller or self.scenario.controller
        if kind == "proposed":
            gains = self.gains
        else:
            gains = self.baseline_gains if self.scenario.controller == "proposed" else self.gains
        config = ControllerConfig(self.plant.B, self.ref.Br, self.ref.P, gains, self.spec, kind)
        return ClosedLoop(self.plant, self.ref, self.reference_signal, self.disturbance, config)


def _or_zeros(value, shape):
    return np.zeros(shape) if value is None else np.array(value, dtype=float)
