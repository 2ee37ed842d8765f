"""JSON run configuration: schema, defaults and validation."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .control import DEFAULT_PULSE_WIDTH, PulseMode, SequenceKind
from .heom import HeomError, IntegratorConfig
from .model import BellState, FiberParams, ModelConfig, ModelError, Topology


class ConfigError(ValueError):
    pass


class Experiment(enum.Enum):
    DECAY = "decay"
    MAP = "map"
    DD = "dd"
    DD_MAP = "dd-map"
    VALIDATE = "validate"


DEFAULT_ETA_GRID = tuple(np.geomspace(0.01, 0.2, 6))
DEFAULT_LC_GRID_KM = tuple(np.geomspace(0.01, 1.0, 6))
VALIDATION_ETAS = (0.0, 0.01, 0.1)
VALIDATION_LCS_KM = (0.01, 0.1, 1.0)

_TOP_KEYS = {
    "experiment", "fiber", "model", "integrator", "schedule", "sweep",
    "total_distance_km", "threshold", "output_path", "workers",
}
_FIBER_KEYS = {
    "wavelength_nm", "mean_birefringence", "birefringence_std",
    "correlation_length_km", "group_index", "optical_frequency",
}
_MODEL_KEYS = {"topology", "initial_state", "Omega1", "Omega2", "exponents"}
_INTEGRATOR_KEYS = {"dt", "N_c", "sample_every", "pulse_substep"}
_SCHEDULE_KEYS = {"kind", "N", "mode", "tau_p"}
_SWEEP_KEYS = {"eta_list", "lc_list_km"}


@dataclass(frozen=True)
class ScheduleSpec:
    kind: SequenceKind = SequenceKind.CPMG
    N: int = 100
    mode: PulseMode = PulseMode.IDEAL
    tau_p: float = DEFAULT_PULSE_WIDTH


@dataclass(frozen=True)
class SweepSpec:
    eta_list: tuple
    lc_list_km: tuple


@dataclass(frozen=True)
class RunConfig:
    experiment: Experiment
    model: ModelConfig = field(default_factory=ModelConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    schedule: ScheduleSpec | None = None
    sweep: SweepSpec | None = None
    total_distance_km: float = 5.0
    threshold: float = 0.1
    output_path: str | None = None
    workers: int | None = None

    @property
    def total_time(self):
        return self.total_distance_km / self.model.derived.v_f

    def to_dict(self):
        """Fully resolved configuration, in the same schema ``parse_config`` reads."""
        f = self.model.fiber
        m = self.model
        out = {
            "experiment": self.experiment.value,
            "fiber": {
                "wavelength_nm": f.wavelength_nm,
                "mean_birefringence": f.mean_birefringence,
                "birefringence_std": f.birefringence_std,
                "correlation_length_km": f.correlation_length_km,
                "group_index": f.group_index,
                "optical_frequency": f.optical_frequency,
            },
            "model": {
                "topology": m.topology.value,
                "initial_state": m.initial_state.value,
                "Omega1": m.Omega1,
                "Omega2": m.Omega2,
                "exponents": None if m.exponents is None else [
                    [c.real, c.imag, nu.real, nu.imag] for c, nu in m.exponents
                ],
            },
            "integrator": {
                "dt": self.integrator.dt,
                "N_c": self.integrator.max_depth,
                "sample_every": self.integrator.sample_every,
                "pulse_substep": self.integrator.pulse_substep,
            },
            "schedule": None,
            "sweep": None,
            "total_distance_km": self.total_distance_km,
            "threshold": self.threshold,
            "output_path": self.output_path,
            "workers": self.workers,
        }
        if self.schedule is not None:
            s = self.schedule
            out["schedule"] = {"kind": s.kind.value, "N": s.N, "mode": s.mode.value, "tau_p": s.tau_p}
        if self.sweep is not None:
            out["sweep"] = {"eta_list": list(self.sweep.eta_list), "lc_list_km": list(self.sweep.lc_list_km)}
        return out


def _section(doc, key, allowed, where):
    value = doc.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where}{key}: expected an object")
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"{where}{key}: unknown key(s) {sorted(unknown)}")
    return value


def _number(value, key, *, positive=False, nonnegative=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be > 0, got {value!r}")
    if nonnegative and value < 0:
        raise ConfigError(f"{key}: must be >= 0, got {value!r}")
    return int(value) if integer else float(value)


def _choice(enum_cls, value, key):
    try:
        return enum_cls(value)
    except ValueError:
        options = ", ".join(repr(e.value) for e in enum_cls)
        raise ConfigError(f"{key}: {value!r} is not one of {options}") from None


def _number_list(value, key):
    if not isinstance(value, list) or len(value) < 2:
        raise ConfigError(f"{key}: expected a list of at least 2 numbers")
    return tuple(_number(v, f"{key}[{i}]", positive=True) for i, v in enumerate(value))


def parse_config(text, overrides=None):
    """Parse and validate a JSON run configuration.

    ``overrides`` maps ``"workers"``, ``"N_c"``, ``"dt"`` and
    ``"output_path"`` to values that replace the document's own;
    ``"experiment"`` is used only when the document does not name one.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}")
    overrides = overrides or {}
    if "experiment" in doc:
        experiment = _choice(Experiment, doc["experiment"], "experiment")
    elif overrides.get("experiment") is not None:
        experiment = _choice(Experiment, overrides["experiment"], "experiment")
    else:
        raise ConfigError("experiment: required")

    fiber_doc = _section(doc, "fiber", _FIBER_KEYS, "")
    fiber_kwargs = {}
    for key, val in fiber_doc.items():
        if key == "optical_frequency" and val is None:
            fiber_kwargs[key] = None
            continue
        fiber_kwargs[key] = _number(val, f"fiber.{key}")
    try:
        fiber = FiberParams(**fiber_kwargs)
    except ModelError as exc:
        raise ConfigError(f"fiber: {exc}") from None

    model_doc = _section(doc, "model", _MODEL_KEYS, "")
    exponents = None
    if model_doc.get("exponents") is not None:
        raw = model_doc["exponents"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("model.exponents: expected a non-empty list of [c_re, c_im, nu_re, nu_im]")
        parsed = []
        for i, item in enumerate(raw):
            if not isinstance(item, list) or len(item) != 4:
                raise ConfigError(f"model.exponents[{i}]: expected [c_re, c_im, nu_re, nu_im]")
            c_re, c_im, nu_re, nu_im = (_number(v, f"model.exponents[{i}]") for v in item)
            if not nu_re > 0:
                raise ConfigError(f"model.exponents[{i}]: nu_re must be > 0")
            parsed.append((complex(c_re, c_im), complex(nu_re, nu_im)))
        exponents = tuple(parsed)
    omegas = {}
    for key in ("Omega1", "Omega2"):
        if model_doc.get(key) is not None:
            omegas[key] = _number(model_doc[key], f"model.{key}")
    model = ModelConfig(
        fiber=fiber,
        topology=_choice(Topology, model_doc.get("topology", "independent"), "model.topology"),
        initial_state=_choice(BellState, model_doc.get("initial_state", "phi+"), "model.initial_state"),
        exponents=exponents,
        **omegas,
    )

    integ_doc = dict(_section(doc, "integrator", _INTEGRATOR_KEYS, ""))
    for key in ("N_c", "dt"):
        if overrides.get(key) is not None:
            integ_doc[key] = overrides[key]
    integ_kwargs = {}
    if "dt" in integ_doc:
        integ_kwargs["dt"] = _number(integ_doc["dt"], "integrator.dt", positive=True)
    if "N_c" in integ_doc:
        integ_kwargs["max_depth"] = _number(integ_doc["N_c"], "integrator.N_c", nonnegative=True, integer=True)
    if integ_doc.get("sample_every") is not None:
        integ_kwargs["sample_every"] = _number(
            integ_doc["sample_every"], "integrator.sample_every", positive=True, integer=True)
    if integ_doc.get("pulse_substep") is not None:
        integ_kwargs["pulse_substep"] = _number(integ_doc["pulse_substep"], "integrator.pulse_substep", positive=True)
    try:
        integrator = IntegratorConfig(**integ_kwargs)
    except HeomError as exc:
        raise ConfigError(f"integrator: {exc}") from None

    schedule = None
    if experiment in (Experiment.DD, Experiment.DD_MAP):
        sched_doc = _section(doc, "schedule", _SCHEDULE_KEYS, "")
        tau_p = _number(sched_doc.get("tau_p", DEFAULT_PULSE_WIDTH), "schedule.tau_p", positive=True)
        schedule = ScheduleSpec(
            kind=_choice(SequenceKind, sched_doc.get("kind", "cpmg"), "schedule.kind"),
            N=_number(sched_doc.get("N", 100), "schedule.N", positive=True, integer=True),
            mode=_choice(PulseMode, sched_doc.get("mode", "ideal"), "schedule.mode"),
            tau_p=tau_p,
        )
    elif doc.get("schedule") is not None:
        raise ConfigError(f"schedule: only valid for dd and dd-map experiments, not {experiment.value}")

    sweep = None
    sweep_allowed = experiment in (Experiment.MAP, Experiment.DD_MAP, Experiment.VALIDATE)
    if doc.get("sweep") is not None and not sweep_allowed:
        raise ConfigError(f"sweep: only valid for map, dd-map and validate experiments, not {experiment.value}")
    if sweep_allowed:
        sweep_doc = _section(doc, "sweep", _SWEEP_KEYS, "")
        if experiment is Experiment.VALIDATE:
            etas, lcs = VALIDATION_ETAS, VALIDATION_LCS_KM
        else:
            etas, lcs = DEFAULT_ETA_GRID, DEFAULT_LC_GRID_KM
        if "eta_list" in sweep_doc:
            etas = tuple(_number(v, f"sweep.eta_list[{i}]", nonnegative=True)
                         for i, v in enumerate(_require_list(sweep_doc["eta_list"], "sweep.eta_list")))
        if "lc_list_km" in sweep_doc:
            lcs = _number_list(sweep_doc["lc_list_km"], "sweep.lc_list_km")
        if any(e > 1 for e in etas):
            raise ConfigError("sweep.eta_list: coupling eta must not exceed 1")
        sweep = SweepSpec(tuple(sorted(etas)), tuple(sorted(lcs)))

    if experiment is Experiment.VALIDATE and exponents is not None and any(c.imag != 0 for c, _ in exponents):
        raise ConfigError("model.exponents: validate needs real correlation amplitudes")

    total = _number(doc.get("total_distance_km", 5.0), "total_distance_km", positive=True)
    threshold = _number(doc.get("threshold", 0.1), "threshold")
    if not 0 < threshold < 1:
        raise ConfigError("threshold: must lie in (0, 1)")

    workers = doc.get("workers")
    if overrides.get("workers") is not None:
        workers = overrides["workers"]
    if workers is not None:
        workers = _number(workers, "workers", positive=True, integer=True)
    output_path = overrides.get("output_path") or doc.get("output_path")
    if output_path is not None and not isinstance(output_path, str):
        raise ConfigError("output_path: expected a string")

    return RunConfig(
        experiment=experiment,
        model=model,
        integrator=integrator,
        schedule=schedule,
        sweep=sweep,
        total_distance_km=total,
        threshold=threshold,
        output_path=output_path,
        workers=workers,
    )


def _require_list(value, key):
    if not isinstance(value, list) or len(value) < 2:
        raise ConfigError(f"{key}: expected a list of at least 2 numbers")
    return value


def cell_model(model: ModelConfig, eta: float, lc_km: float) -> ModelConfig:
    """Copy of ``model`` whose fiber has coupling ``eta`` and correlation length ``lc_km``."""
    fiber = model.fiber
    fiber = replace(fiber, birefringence_std=eta * fiber.mean_birefringence,
                    correlation_length_km=lc_km)
    return replace(model, fiber=fiber)
