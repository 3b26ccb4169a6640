"""Scenario configuration: JSON loading, validation and echo.

A scenario bundles the physics (memory, detection, phase matching), the
channel list, the measurement plan (storage times, input states, pulses
per setting) and the run controls (seed, resample count, output dir).
Loading is strict: unknown keys are rejected with their full field path
so a typo in a config file fails loudly instead of silently running
defaults.

``effective_config`` echoes every parameter a run will actually use,
defaults included, so an emitted artifact is self-describing and the
echo can be diffed against the schema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .detection import MAX_PULSES, DetectionConfig
from .errors import ConfigError
from .memory import DEFAULT_CHANNELS, ChannelSpec, MemoryConfig, PhaseMatchConfig
from .polarization import STATE_LABELS

DEFAULT_SEED = 12345
DEFAULT_PULSES = 100_000
DEFAULT_RESAMPLES = 500
#: Storage-time grid (ms): dense enough for decay fits, includes the
#: 5 us table point and the 6 ms endpoint.
DEFAULT_STORAGE_TIMES = (
    0.005, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0,
)
DEFAULT_INPUT_STATES = ("H", "V", "D", "R")

# Leaf types: int means strict int, float accepts int or float, and
# bools are rejected everywhere (json true/false is never a number
# here).  "nullable_float" additionally admits null.
CONFIG_SCHEMA: dict = {
    "seed": int,
    "pulses_per_setting": int,
    "mc_resamples": int,
    "output_dir": str,
    "storage_times": [float],
    "input_states": [str],
    "rep_rate_hz": float,
    "cycle_ms": float,
    "memory": {
        "r0_axis": float,
        "r0_ch2": float,
        "tau": float,
        "sigma_gamma": float,
        "theta_w": float,
        "static_gamma": {"*": float},
        "r0_overrides": {"*": float},
        "b0": float,
        "gradient": float,
        "sigma_b": float,
    },
    "detection": {
        "eta_fiber": float,
        "eta_etalons": float,
        "eta_mmf": float,
        "eta_spd": float,
        "eta_total": "nullable_float",
        "n_bar": float,
        "background_n": float,
    },
    "phase_match": {"delta": float},
    "channels": [{"id": str, "theta": float}],
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a reproducible run needs.

    ``rep_rate_hz`` and ``cycle_ms`` are experiment-cycle metadata used
    only to convert pulse budgets into wall-clock estimates in artifact
    metadata; they do not enter the simulation.
    """

    memory: MemoryConfig = field(default_factory=MemoryConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    phase_match: PhaseMatchConfig = field(default_factory=PhaseMatchConfig)
    channels: tuple[ChannelSpec, ...] = DEFAULT_CHANNELS
    storage_times: tuple[float, ...] = DEFAULT_STORAGE_TIMES
    input_states: tuple[str, ...] = DEFAULT_INPUT_STATES
    pulses_per_setting: int = DEFAULT_PULSES
    mc_resamples: int = DEFAULT_RESAMPLES
    seed: int = DEFAULT_SEED
    output_dir: str = "out"
    rep_rate_hz: float = 20.0
    cycle_ms: float = 42.0

    def __post_init__(self) -> None:
        if not self.channels:
            raise ValueError("channels must not be empty")
        ids = [ch.id for ch in self.channels]
        if len(set(ids)) != len(ids):
            raise ValueError("channel ids must be unique")
        if not self.storage_times:
            raise ValueError("storage_times must not be empty")
        for t in self.storage_times:
            if not (math.isfinite(t) and t >= 0.0):
                raise ValueError(f"storage_times entries must be finite and >= 0, got {t}")
        if not self.input_states:
            raise ValueError("input_states must not be empty")
        unknown = [s for s in self.input_states if s not in STATE_LABELS]
        if unknown:
            raise ValueError(
                f"unknown input_states {unknown}; choose from {list(STATE_LABELS)}"
            )
        if len(set(self.input_states)) != len(self.input_states):
            raise ValueError("input_states must be unique")
        if not 1 <= self.pulses_per_setting <= MAX_PULSES:
            raise ValueError(
                f"pulses_per_setting must be in [1, {MAX_PULSES}], "
                f"got {self.pulses_per_setting}"
            )
        if self.mc_resamples < 2:
            raise ValueError(f"mc_resamples must be >= 2, got {self.mc_resamples}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.rep_rate_hz <= 0 or self.cycle_ms <= 0:
            raise ValueError("rep_rate_hz and cycle_ms must be > 0")

    def channel(self, channel_id: str) -> ChannelSpec:
        for ch in self.channels:
            if ch.id == channel_id:
                return ch
        known = ", ".join(ch.id for ch in self.channels)
        raise KeyError(f"unknown channel {channel_id!r} (configured: {known})")

    def channel_index(self, channel_id: str) -> int:
        for i, ch in enumerate(self.channels):
            if ch.id == channel_id:
                return i
        raise KeyError(f"unknown channel {channel_id!r}")


def _check_leaf(path: str, value, leaf_type) -> None:
    if leaf_type == "nullable_float":
        if value is None:
            return
        leaf_type = float
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected {leaf_type.__name__}, got bool")
    if leaf_type is float:
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number, got {type(value).__name__}")
    elif not isinstance(value, leaf_type):
        raise ConfigError(
            f"{path}: expected {leaf_type.__name__}, got {type(value).__name__}"
        )


def _validate(data, schema, path: str) -> None:
    if isinstance(schema, dict):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected an object")
        if "*" in schema:
            for key, value in data.items():
                _check_leaf(f"{path}.{key}", value, schema["*"])
            return
        for key, value in data.items():
            child = f"{path}.{key}" if path else key
            if key not in schema:
                raise ConfigError(f"unknown key {child}")
            _validate(value, schema[key], child)
    elif isinstance(schema, list):
        if not isinstance(data, list):
            raise ConfigError(f"{path}: expected a list")
        for i, item in enumerate(data):
            _validate(item, schema[0], f"{path}[{i}]")
    else:
        _check_leaf(path, data, schema)


def _build(data: dict) -> ScenarioConfig:
    kwargs: dict = {}
    if "memory" in data:
        mem = dict(data["memory"])
        if "r0_overrides" in mem:
            try:
                mem["r0_overrides"] = {
                    float(k): float(v) for k, v in mem["r0_overrides"].items()
                }
            except ValueError:
                raise ConfigError(
                    "memory.r0_overrides: keys must parse as angles in degrees"
                ) from None
        try:
            kwargs["memory"] = MemoryConfig(**mem)
        except ValueError as exc:
            raise ConfigError(f"memory.{exc}") from None
        except TypeError as exc:
            raise ConfigError(f"memory: {exc}") from None
    if "detection" in data:
        try:
            kwargs["detection"] = DetectionConfig(**data["detection"])
        except ValueError as exc:
            raise ConfigError(f"detection.{exc}") from None
        except TypeError as exc:
            raise ConfigError(f"detection: {exc}") from None
    if "phase_match" in data:
        try:
            kwargs["phase_match"] = PhaseMatchConfig(**data["phase_match"])
        except ValueError as exc:
            raise ConfigError(f"phase_match.{exc}") from None
        except TypeError as exc:
            raise ConfigError(f"phase_match: {exc}") from None
    if "channels" in data:
        channels = []
        for i, entry in enumerate(data["channels"]):
            missing = {"id", "theta"} - set(entry)
            if missing:
                raise ConfigError(f"channels[{i}]: missing {sorted(missing)}")
            try:
                channels.append(ChannelSpec(entry["id"], float(entry["theta"])))
            except ValueError as exc:
                raise ConfigError(f"channels[{i}]: {exc}") from None
        kwargs["channels"] = tuple(channels)
    if "storage_times" in data:
        kwargs["storage_times"] = tuple(float(t) for t in data["storage_times"])
    if "input_states" in data:
        kwargs["input_states"] = tuple(data["input_states"])
    for key in (
        "seed",
        "pulses_per_setting",
        "mc_resamples",
        "output_dir",
        "rep_rate_hz",
        "cycle_ms",
    ):
        if key in data:
            kwargs[key] = data[key]
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(data: dict) -> ScenarioConfig:
    """Validate a parsed config mapping and build a ScenarioConfig."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _validate(data, CONFIG_SCHEMA, "")
    return _build(data)


def load_config(path: str) -> ScenarioConfig:
    """Load and validate a JSON scenario config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return config_from_dict(data)


def effective_config(cfg: ScenarioConfig) -> dict:
    """Full parameter echo of a scenario, defaults included."""
    mem, det, pm = cfg.memory, cfg.detection, cfg.phase_match
    return {
        "seed": cfg.seed,
        "pulses_per_setting": cfg.pulses_per_setting,
        "mc_resamples": cfg.mc_resamples,
        "output_dir": cfg.output_dir,
        "storage_times": list(cfg.storage_times),
        "input_states": list(cfg.input_states),
        "rep_rate_hz": cfg.rep_rate_hz,
        "cycle_ms": cfg.cycle_ms,
        "memory": {
            "r0_axis": mem.r0_axis,
            "r0_ch2": mem.r0_ch2,
            "tau": mem.tau,
            "sigma_gamma": mem.sigma_gamma,
            "theta_w": mem.theta_w,
            "static_gamma": dict(sorted(mem.static_gamma.items())),
            "r0_overrides": {f"{k:g}": v for k, v in sorted(mem.r0_overrides.items())},
            "b0": mem.b0,
            "gradient": mem.gradient,
            "sigma_b": mem.sigma_b,
        },
        "detection": {
            "eta_fiber": det.eta_fiber,
            "eta_etalons": det.eta_etalons,
            "eta_mmf": det.eta_mmf,
            "eta_spd": det.eta_spd,
            "eta_total": det.eta_total,
            "n_bar": det.n_bar,
            "background_n": det.background_n,
        },
        "phase_match": {"delta": pm.delta},
        "channels": [{"id": ch.id, "theta": ch.theta} for ch in cfg.channels],
    }
