"""Experiment configuration: a TOML file with sections ``[model]``,
``[discretization]``, ``[pod]``, ``[synthesis]`` and ``[report]``.

Every field has a default; unknown keys and ill-typed values raise
:class:`~treehjb.errors.ConfigError` carrying the dotted field path.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass

import numpy as np

from ..dynamics import ControlProblem, LinearQuadraticProblem, PolynomialProblem
from ..errors import ConfigError
from ..tree import DEFAULT_NODE_CAP
from .heat import PROFILES, assemble_heat

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODEL_KINDS = ("heat", "linear", "polynomial")
METHODS = ("tsa", "alg1", "alg2")
REFERENCES = ("auto", "riccati", "realized", "none")

DEFAULTS = {
    "model": {
        "kind": "heat",
        "t0": 0.0,
        "T": 1.0,
        "lam": 0.0,
        "control_box": [[-1.0, 0.0]],
        # heat
        "grid_points": 1000,
        "sigma": 0.15,
        "profile": "parabola",
        "state_weight": 1.0,
        "control_weight": 0.5,
        "terminal_weight": 0.5,
        # linear / polynomial
        "A": None,
        "coeffs": None,
        "B": None,
        "Q": None,
        "R": None,
        "QT": None,
        "delta": None,
        "x0": None,
    },
    "discretization": {
        "dt": [0.1, 0.05, 0.025],
        "controls": 11,
        "prune_eps": "dt2",
        "node_cap": DEFAULT_NODE_CAP,
    },
    "pod": {
        "enabled": True,
        "tau": 1e-4,
        "snapshot_dt": 0.1,
        "snapshot_controls": 2,
        "basis_file": "",
    },
    "synthesis": {
        "methods": ["tsa"],
        "fine_controls": 100,
        "use_subtree": False,
        "reference": "auto",
    },
    "report": {
        "out": "out",
        "riccati_substeps": 10,
        "threads": 1,
        "trajectories": True,
    },
}


def _matrix(value, path, ndim=2):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric array") from None
    if ndim == 2:
        arr = np.atleast_2d(arr)
    if arr.ndim != ndim or not np.all(np.isfinite(arr)):
        raise ConfigError(path, f"expected a finite {ndim}-d numeric array")
    return arr


def _number(value, path, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, "must be positive")
    if nonneg and value < 0:
        raise ConfigError(path, "must be non-negative")
    return int(value) if integer else float(value)


@dataclass
class ExperimentConfig:
    """Validated configuration; ``data`` holds every section with defaults filled in."""

    data: dict

    def __getitem__(self, section):
        return self.data[section]

    @property
    def model(self) -> dict:
        return self.data["model"]

    @property
    def discretization(self) -> dict:
        return self.data["discretization"]

    @property
    def pod(self) -> dict:
        return self.data["pod"]

    @property
    def synthesis(self) -> dict:
        return self.data["synthesis"]

    @property
    def report(self) -> dict:
        return self.data["report"]

    def prune_eps(self, dt: float) -> float:
        eps = self.discretization["prune_eps"]
        return dt * dt if eps == "dt2" else float(eps)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """New config with ``{"section.key": value}`` overrides applied and re-validated."""
        raw = copy.deepcopy(self.data)
        for key, value in overrides.items():
            section, _, name = key.partition(".")
            if section not in raw or name not in raw[section]:
                raise ConfigError(key, "unknown field")
            raw[section][name] = value
        return validate(raw)

    def build_model(self) -> tuple[ControlProblem, np.ndarray]:
        """The control problem and its initial state."""
        m = self.model
        kw = dict(t0=m["t0"], T=m["T"], lam=m["lam"])
        if m["kind"] == "heat":
            heat = assemble_heat(m["grid_points"], m["sigma"], m["profile"])
            problem = heat.problem(m["control_box"], state_weight=m["state_weight"],
                                   control_weight=m["control_weight"],
                                   terminal_weight=m["terminal_weight"], **kw)
            return problem, heat.y0
        if m["kind"] == "linear":
            problem = LinearQuadraticProblem(m["A"], m["B"], m["Q"], m["R"], m["QT"], m["control_box"],
                                             delta=m["delta"], **kw)
        else:
            problem = PolynomialProblem(m["coeffs"], m["B"], m["Q"], m["R"], m["QT"], m["control_box"],
                                        delta=m["delta"], **kw)
        return problem, np.asarray(m["x0"], dtype=float)

    def to_json(self) -> dict:
        def plain(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: plain(x) for k, x in v.items()}
            return v
        return plain(self.data)


def _validate_model(m: dict) -> None:
    if m["kind"] not in MODEL_KINDS:
        raise ConfigError("model.kind", f"expected one of {MODEL_KINDS}, got {m['kind']!r}")
    m["t0"] = _number(m["t0"], "model.t0")
    m["T"] = _number(m["T"], "model.T")
    if not m["T"] > m["t0"]:
        raise ConfigError("model.T", "must exceed model.t0")
    m["lam"] = _number(m["lam"], "model.lam", nonneg=True)
    box = _matrix(m["control_box"], "model.control_box")
    if box.shape[1] != 2 or np.any(box[:, 0] > box[:, 1]):
        raise ConfigError("model.control_box", "expected rows [lower, upper] with lower <= upper")
    m["control_box"] = box
    if m["kind"] == "heat":
        m["grid_points"] = _number(m["grid_points"], "model.grid_points", integer=True)
        if m["grid_points"] < 2:
            raise ConfigError("model.grid_points", "need at least 2")
        m["sigma"] = _number(m["sigma"], "model.sigma", positive=True)
        if m["profile"] not in PROFILES:
            raise ConfigError("model.profile", f"expected one of {sorted(PROFILES)}")
        for key in ("state_weight", "control_weight", "terminal_weight"):
            m[key] = _number(m[key], f"model.{key}", nonneg=True)
        if m["control_weight"] <= 0:
            raise ConfigError("model.control_weight", "must be positive")
        if box.shape[0] != 1:
            raise ConfigError("model.control_box", "the heat model has a scalar control")
        return
    drift = "A" if m["kind"] == "linear" else "coeffs"
    for key in (drift, "B", "Q", "R", "QT", "x0"):
        if m[key] is None:
            raise ConfigError(f"model.{key}", f"required for kind={m['kind']!r}")
    m[drift] = _matrix(m[drift], f"model.{drift}")
    d = m[drift].shape[0]
    m["x0"] = _matrix(m["x0"], "model.x0", ndim=1)
    if m["x0"].shape != (d,):
        raise ConfigError("model.x0", f"expected {d} components")
    B = _matrix(m["B"], "model.B")
    if B.shape[0] != d and B.size == d:
        B = B.reshape(d, 1)
    if B.shape[0] != d:
        raise ConfigError("model.B", f"expected {d} rows")
    m["B"] = B
    nctl = B.shape[1]
    if box.shape[0] != nctl:
        raise ConfigError("model.control_box", f"expected {nctl} rows, one per control")
    for key, shape in (("Q", (d, d)), ("QT", (d, d)), ("R", (nctl, nctl))):
        m[key] = _matrix(m[key], f"model.{key}")
        if m[key].shape != shape:
            raise ConfigError(f"model.{key}", f"expected shape {shape}")
    if m["kind"] == "linear" and m["A"].shape != (d, d):
        raise ConfigError("model.A", "must be square")
    if m["delta"] is not None:
        m["delta"] = _matrix(m["delta"], "model.delta", ndim=1)
        if m["delta"].shape != (nctl,):
            raise ConfigError("model.delta", f"expected {nctl} components")


def validate(raw: dict) -> ExperimentConfig:
    """Fill defaults, check types and ranges, and return the validated config."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a table of sections")
    data = {}
    for section, defaults in DEFAULTS.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(section, "expected a table")
        for key in given:
            if key not in defaults:
                raise ConfigError(f"{section}.{key}", "unknown field")
        data[section] = {**copy.deepcopy(defaults), **copy.deepcopy(given)}
    for section in raw:
        if section not in DEFAULTS:
            raise ConfigError(section, "unknown section")

    _validate_model(data["model"])

    disc = data["discretization"]
    dts = disc["dt"] if isinstance(disc["dt"], list) else [disc["dt"]]
    if not dts:
        raise ConfigError("discretization.dt", "need at least one time step")
    disc["dt"] = [_number(v, f"discretization.dt[{i}]", positive=True) for i, v in enumerate(dts)]
    horizon = data["model"]["T"] - data["model"]["t0"]
    for i, dt in enumerate(disc["dt"]):
        n = round(horizon / dt)
        if n < 1 or abs(n * dt - horizon) > 1e-12 * max(1.0, horizon):
            raise ConfigError(f"discretization.dt[{i}]", f"{dt} does not divide the horizon")
    disc["controls"] = _number(disc["controls"], "discretization.controls", positive=True, integer=True)
    if disc["prune_eps"] != "dt2":
        disc["prune_eps"] = _number(disc["prune_eps"], "discretization.prune_eps", nonneg=True)
    disc["node_cap"] = _number(disc["node_cap"], "discretization.node_cap", positive=True, integer=True)

    pod = data["pod"]
    if not isinstance(pod["enabled"], bool):
        raise ConfigError("pod.enabled", "expected true or false")
    pod["tau"] = _number(pod["tau"], "pod.tau", nonneg=True)
    if pod["tau"] > 1:
        raise ConfigError("pod.tau", "must lie in [0, 1]")
    pod["snapshot_dt"] = _number(pod["snapshot_dt"], "pod.snapshot_dt", positive=True)
    pod["snapshot_controls"] = _number(pod["snapshot_controls"], "pod.snapshot_controls",
                                       positive=True, integer=True)
    if not isinstance(pod["basis_file"], str):
        raise ConfigError("pod.basis_file", "expected a path string")

    syn = data["synthesis"]
    methods = syn["methods"] if isinstance(syn["methods"], list) else [syn["methods"]]
    for i, name in enumerate(methods):
        if name not in METHODS:
            raise ConfigError(f"synthesis.methods[{i}]", f"expected one of {METHODS}, got {name!r}")
    if not methods:
        raise ConfigError("synthesis.methods", "need at least one method")
    syn["methods"] = list(dict.fromkeys(methods))
    syn["fine_controls"] = _number(syn["fine_controls"], "synthesis.fine_controls", positive=True, integer=True)
    if not isinstance(syn["use_subtree"], bool):
        raise ConfigError("synthesis.use_subtree", "expected true or false")
    if syn["reference"] not in REFERENCES:
        raise ConfigError("synthesis.reference", f"expected one of {REFERENCES}")
    if "alg2" in syn["methods"]:
        if disc["controls"] != 3:
            raise ConfigError("discretization.controls", "quadratic reconstruction (alg2) needs exactly 3 controls")
        if data["model"]["control_box"].shape[0] != 1:
            raise ConfigError("model.control_box", "quadratic reconstruction (alg2) needs a scalar control")

    rep = data["report"]
    if not isinstance(rep["out"], str):
        raise ConfigError("report.out", "expected a path string")
    rep["riccati_substeps"] = _number(rep["riccati_substeps"], "report.riccati_substeps",
                                      positive=True, integer=True)
    rep["threads"] = _number(rep["threads"], "report.threads", positive=True, integer=True)
    if not isinstance(rep["trajectories"], bool):
        raise ConfigError("report.trajectories", "expected true or false")
    return ExperimentConfig(data)


def load_config(path=None) -> ExperimentConfig:
    """Read a TOML config file; ``None`` gives the defaults (reduced heat benchmark)."""
    if path is None:
        return validate({})
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML: {exc}") from None
    return validate(raw)


def loads_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<string>", f"not valid TOML: {exc}") from None
    return validate(raw)
