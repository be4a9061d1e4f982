"""Scenario configuration: schema, defaults and JSON round-trip.

A config document is JSON. For the named scenarios (``rod``, ``beam``,
``beam_linear``) a partial document is merged over the scenario defaults;
``custom`` documents must be complete. Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import copy
import json
from typing import Any, Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "SignalConfig",
    "ScenarioConfig",
    "default_config",
    "parse_config",
    "load_config",
    "dump_config",
    "apply_overrides",
]

SCHEMA_VERSION = 1
ScenarioName = Literal["rod", "beam", "beam_linear", "custom"]


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SignalConfig(_Strict):
    """Piecewise input signal with amplitude ``value``.

    ``constant``: value; ``step``: value while ``t <= t_switch``;
    ``ramp_down``: value * (1 - t/t_switch) while ``t <= t_switch``;
    ``ramp_up``: value * t/t_switch while ``t <= t_switch``. Zero afterwards.
    """

    kind: Literal["constant", "step", "ramp_down", "ramp_up"] = "constant"
    value: tuple[float, ...]
    t_switch: float | None = None

    @model_validator(mode="after")
    def _switch_time(self):
        if self.kind != "constant" and (self.t_switch is None or self.t_switch <= 0):
            raise ValueError(f"signal kind {self.kind!r} needs a positive t_switch")
        return self

    def function(self, scale: float = 1.0) -> Callable[[float], np.ndarray]:
        value = scale * np.asarray(self.value, dtype=float)
        kind, ts = self.kind, self.t_switch
        if kind == "constant":
            return lambda t: value.copy()
        if kind == "step":
            return lambda t: value.copy() if t <= ts else np.zeros_like(value)
        if kind == "ramp_down":
            return lambda t: value * (1.0 - t / ts) if t <= ts else np.zeros_like(value)
        return lambda t: value * (t / ts) if t <= ts else np.zeros_like(value)


class GeometryConfig(_Strict):
    lengths: tuple[float, ...] = Field(description="domain extent per axis [m]")


class MeshConfig(_Strict):
    elements: tuple[int, ...] = Field(description="cells per axis (2D: squares split into two triangles)")


class MaterialConfig(_Strict):
    rho0: float = Field(gt=0, description="reference density [kg/m or kg/m^2]")
    young: float | None = Field(default=None, gt=0, description="Young's modulus [Pa] (rod)")
    area: float | None = Field(default=None, gt=0, description="cross-section [m^2] (rod)")
    lam: float | None = Field(default=None, description="first Lame parameter [Pa] (2D, plane stress)")
    mu: float | None = Field(default=None, gt=0, description="shear modulus [Pa] (2D)")


class DegreesConfig(_Strict):
    velocity: int = Field(ge=1, le=2)
    stress: int = Field(ge=0, le=2)
    defgrad: int = Field(ge=0, le=2)


class TimeConfig(_Strict):
    dt: float = Field(default=1e-3, gt=0, description="[s]")
    t_end: float = Field(ge=0, description="[s]")


class SolverConfig(_Strict):
    newton_tol: float = Field(default=1e-10, gt=0)
    max_newton_iter: int = Field(default=15, ge=1)
    jacobian: Literal["analytic", "finite_difference"] = "analytic"
    linear_solver: Literal["block", "direct"] = "block"


class LoadingConfig(_Strict):
    traction: SignalConfig = Field(description="traction on the loaded Neumann boundary [N/m^2; N for the rod]")
    velocity: SignalConfig = Field(description="velocity imposed weakly on the Dirichlet boundary [m/s]")
    input_basis: Literal["uniform", "trace"] = "uniform"


class InitialConfig(_Strict):
    velocity: tuple[float, ...] = Field(description="uniform initial velocity [m/s]")
    stress: tuple[float, ...] | None = Field(default=None, description="uniform initial stress, Voigt [Pa]")


class OutputConfig(_Strict):
    directory: str = "out"
    vtk_every: int = Field(default=20, ge=0, description="VTK stride in steps, 0 disables")
    dump_matrices: bool = False


class ScenarioConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    scenario: ScenarioName = "custom"
    linear: bool = False
    geometry: GeometryConfig
    mesh: MeshConfig
    material: MaterialConfig
    degrees: DegreesConfig
    time: TimeConfig
    solver: SolverConfig = SolverConfig()
    loading: LoadingConfig
    initial: InitialConfig
    probes: tuple[tuple[float, ...], ...] | None = Field(
        default=None, description="material points for displacement traces; default is (Lx, 0)"
    )
    output: OutputConfig = OutputConfig()

    @property
    def dim(self) -> int:
        return len(self.geometry.lengths)

    @property
    def probe_points(self) -> tuple[tuple[float, ...], ...]:
        if self.probes is not None:
            return self.probes
        return ((self.geometry.lengths[0],) + (0.0,) * (self.dim - 1),)

    @model_validator(mode="after")
    def _consistent(self):
        d = self.dim
        if d not in (1, 2):
            raise ValueError("geometry.lengths must have 1 (rod) or 2 (plane) entries")
        if any(x <= 0 for x in self.geometry.lengths):
            raise ValueError("geometry.lengths must be positive")
        if len(self.mesh.elements) != d or any(n < 1 for n in self.mesh.elements):
            raise ValueError(f"mesh.elements needs {d} positive entries")
        m = self.material
        if d == 1 and (m.young is None or m.area is None):
            raise ValueError("a 1D scenario needs material.young and material.area")
        if d == 2 and (m.lam is None or m.mu is None):
            raise ValueError("a 2D scenario needs material.lam and material.mu")
        for name, sig in (("traction", self.loading.traction), ("velocity", self.loading.velocity)):
            if len(sig.value) != d:
                raise ValueError(f"loading.{name}.value needs {d} entries")
        if len(self.initial.velocity) != d:
            raise ValueError(f"initial.velocity needs {d} entries")
        m_sym = d * (d + 1) // 2
        if self.initial.stress is not None and len(self.initial.stress) != m_sym:
            raise ValueError(f"initial.stress needs {m_sym} Voigt entries")
        for p in self.probe_points:
            if len(p) != d:
                raise ValueError(f"probe {p} needs {d} coordinates")
        if self.scenario == "beam_linear" and not self.linear:
            raise ValueError("scenario 'beam_linear' requires linear = true")
        return self


_DEFAULTS: dict[str, dict[str, Any]] = {
    "rod": {
        "schema_version": SCHEMA_VERSION,
        "scenario": "rod",
        "linear": False,
        "geometry": {"lengths": [3.0]},
        "mesh": {"elements": [100]},
        "material": {"rho0": 7.85, "young": 1.0e9, "area": 1.0e-4},
        "degrees": {"velocity": 2, "stress": 2, "defgrad": 1},
        "time": {"dt": 1e-3, "t_end": 1.0},
        "loading": {
            "traction": {"kind": "step", "value": [100.0], "t_switch": 0.2},
            "velocity": {"kind": "ramp_down", "value": [0.5], "t_switch": 0.2},
        },
        "initial": {"velocity": [0.5]},
        "output": {"directory": "out/rod", "vtk_every": 0},
    },
    "beam": {
        "schema_version": SCHEMA_VERSION,
        "scenario": "beam",
        "linear": False,
        "geometry": {"lengths": [25.0, 1.0]},
        "mesh": {"elements": [125, 5]},
        "material": {"rho0": 1.02e-4, "lam": 329.67, "mu": 384.62},
        "degrees": {"velocity": 1, "stress": 1, "defgrad": 0},
        "time": {"dt": 1e-3, "t_end": 4.0},
        "loading": {
            "traction": {"kind": "ramp_up", "value": [0.0, 0.1], "t_switch": 1.0},
            "velocity": {"kind": "constant", "value": [0.0, 0.0]},
        },
        "initial": {"velocity": [0.0, 0.0]},
        "output": {"directory": "out/beam", "vtk_every": 20},
    },
}
_DEFAULTS["beam_linear"] = copy.deepcopy(_DEFAULTS["beam"])
_DEFAULTS["beam_linear"].update(scenario="beam_linear", linear=True)
_DEFAULTS["beam_linear"]["output"] = {"directory": "out/beam_linear", "vtk_every": 20}


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in update.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _validate(doc: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def default_config(scenario: str) -> ScenarioConfig:
    """Benchmark defaults for ``rod``, ``beam`` or ``beam_linear``."""
    if scenario not in _DEFAULTS:
        raise ConfigError(f"no defaults for scenario {scenario!r}; choose from {sorted(_DEFAULTS)}")
    return _validate(_DEFAULTS[scenario])


def parse_config(doc: dict) -> ScenarioConfig:
    """Validate a config document, filling scenario defaults where available."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    scenario = doc.get("scenario", "custom")
    if scenario in _DEFAULTS:
        doc = _merge(_DEFAULTS[scenario], doc)
    return _validate(doc)


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(doc)


def dump_config(config: ScenarioConfig) -> str:
    """Complete JSON document; ``parse_config`` of it returns an equal config."""
    return json.dumps(config.model_dump(mode="json"), indent=2) + "\n"


def apply_overrides(config: ScenarioConfig, **overrides: Any) -> ScenarioConfig:
    """Return a revalidated copy with command-line style overrides applied.

    Recognised keys: ``elements``, ``dt``, ``t_end``, ``out``, ``newton_tol``,
    ``vtk_every``, ``dump_matrices``, ``linear``. ``None`` values are ignored.
    """
    paths = {
        "elements": ("mesh", "elements"),
        "dt": ("time", "dt"),
        "t_end": ("time", "t_end"),
        "out": ("output", "directory"),
        "newton_tol": ("solver", "newton_tol"),
        "vtk_every": ("output", "vtk_every"),
        "dump_matrices": ("output", "dump_matrices"),
        "linear": ("linear",),
    }
    doc = config.model_dump(mode="json")
    for key, val in overrides.items():
        if key not in paths:
            raise ConfigError(f"unknown override {key!r}")
        if val is None:
            continue
        node = doc
        *parents, leaf = paths[key]
        for p in parents:
            node = node[p]
        node[leaf] = list(val) if isinstance(val, tuple) else val
    return _validate(doc)
