"""Configuration ingestion and the resolved run description.

A run is fully described by a ``SystemConfig``.  Config files are YAML with
one mapping per section (``channel``, ``distortion``, ``energy``,
``harvest``, ``protocol``, ``solver``, ``rl``) plus a top-level ``seed``.  An
empty file resolves to the shipped default profile.

Battery capacity and mean harvest income may be given normalized by the
maximum single-packet slot cost (``battery_norm`` / ``mean_income_norm``);
the loader resolves them to quanta and refuses configs that set both the
normalized and the raw form of the same field.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .channel import ChannelModel
from .distortion import DistortionModel
from .energy import EnergyModel, HarvestModel, max_slot_energy
from .errors import ConfigError

log = logging.getLogger("ehpolicy")


@dataclass(frozen=True)
class SolverParams:
    span_threshold: float = 1e-8
    max_iterations: int = 200_000

    def __post_init__(self) -> None:
        if not self.span_threshold > 0:
            raise ValueError("solver.span_threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("solver.max_iterations must be positive")


@dataclass(frozen=True)
class RLParams:
    iterations: int = 300_000
    epsilon0: float = 1.0
    epsilon_min: float = 0.01
    epsilon_knee: float = 0.7      # fraction of the budget at which epsilon bottoms out
    alpha0: float = 0.2
    alpha_tau: float = 30_000.0
    beta: float = 0.01
    rho_init: float = -5.0
    checkpoint_every: int = 1000

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("rl.iterations must be positive")
        if not 0.0 <= self.epsilon_min <= self.epsilon0 <= 1.0:
            raise ValueError("rl epsilon schedule needs 0 <= epsilon_min <= epsilon0 <= 1")
        if not 0 < self.epsilon_knee <= 1:
            raise ValueError("rl.epsilon_knee must lie in (0, 1]")
        if not self.alpha0 > 0 or not self.alpha_tau > 0:
            raise ValueError("rl.alpha0 and rl.alpha_tau must be positive")
        if not self.beta > 0:
            raise ValueError("rl.beta must be positive")
        if self.checkpoint_every < 1:
            raise ValueError("rl.checkpoint_every must be positive")


@dataclass(frozen=True)
class SystemConfig:
    """Single source of truth for one run."""

    channel: ChannelModel = field(default_factory=ChannelModel)
    distortion: DistortionModel = field(default_factory=DistortionModel)
    energy: EnergyModel = field(default_factory=EnergyModel.calibrated)
    harvest: HarvestModel = field(default_factory=HarvestModel)
    max_attempts: int = 2
    solver: SolverParams = field(default_factory=SolverParams)
    rl: RLParams = field(default_factory=RLParams)
    seed: int = 1

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("protocol.max_attempts must be at least 1")
        if self.energy.levels != self.distortion.levels:
            raise ValueError("energy and distortion models disagree on the level count")
        if self.max_attempts > self.distortion.levels:
            raise ValueError("protocol.max_attempts cannot exceed the level count")

    @property
    def gamma_bar(self) -> float:
        return self.channel.mean_snr

    @property
    def e_max(self) -> int:
        return max_slot_energy(self.energy)

    @property
    def battery_norm(self) -> float:
        return self.energy.battery_capacity / self.e_max

    @property
    def mean_income_norm(self) -> float:
        return self.harvest.mean_income / self.e_max


_CHANNEL_KEYS = {"tx_power", "carrier_freq", "ref_distance", "distance",
                 "pathloss_exp", "noise_psd", "bandwidth", "mean_snr"}
_DISTORTION_KEYS = {"exponent", "scale", "levels", "d_floor", "block_bits"}
_ENERGY_KEYS = {"mode", "battery_capacity", "battery_norm", "tx_quanta",
                "idle_quanta", "tx_circuit_quanta", "proc_scale",
                "proc_offset", "proc_slope",
                # physical mode
                "cpu_energy_per_cycle", "cycles_slope", "cycles_offset",
                "amp_efficiency", "slot_duration", "sense_energy",
                "sync_energy", "circuit_power", "quantum"}
_HARVEST_KEYS = {"p_bad_to_good", "p_good_to_bad", "mean_income",
                 "mean_income_norm", "income_variance", "max_income"}
_PROTOCOL_KEYS = {"max_attempts", "slot_bits"}
_SOLVER_KEYS = {"span_threshold", "max_iterations"}
_RL_KEYS = {"iterations", "epsilon0", "epsilon_min", "epsilon_knee",
            "alpha0", "alpha_tau", "beta", "rho_init", "checkpoint_every"}
_SECTIONS = {"channel": _CHANNEL_KEYS, "distortion": _DISTORTION_KEYS,
             "energy": _ENERGY_KEYS, "harvest": _HARVEST_KEYS,
             "protocol": _PROTOCOL_KEYS, "solver": _SOLVER_KEYS, "rl": _RL_KEYS}


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    unknown = set(sec) - _SECTIONS[name]
    if unknown:
        raise ConfigError(f"unknown key(s) in section '{name}': {sorted(unknown)}")
    return dict(sec)


def _exclusive(sec: dict, section: str, raw_key: str, norm_key: str) -> None:
    if raw_key in sec and norm_key in sec:
        raise ConfigError(
            f"{section}.{raw_key} and {section}.{norm_key} are two forms of the "
            "same field; set only one")


def resolve_config(raw: dict | None) -> tuple[SystemConfig, list[str]]:
    """Turn a parsed config mapping into a validated ``SystemConfig``.

    Returns the config together with one message per applied default, so the
    run log can state exactly what was filled in.
    """
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    defaults: list[str] = []

    def build(factory, section: str, sec: dict):
        try:
            return factory(**sec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid '{section}' section: {exc}") from None

    chan_sec = _section(raw, "channel")
    if "mean_snr" in chan_sec:
        chan_sec["mean_snr_override"] = chan_sec.pop("mean_snr")
    channel = build(ChannelModel, "channel", chan_sec)

    dist_sec = _section(raw, "distortion")
    proto_sec = _section(raw, "protocol")
    if "slot_bits" in proto_sec:
        dist_sec["slot_bits"] = proto_sec.pop("slot_bits")
    distortion = build(DistortionModel, "distortion", dist_sec)

    energy_sec = _section(raw, "energy")
    _exclusive(energy_sec, "energy", "battery_capacity", "battery_norm")
    mode = energy_sec.pop("mode", "calibrated")
    battery_norm = energy_sec.pop("battery_norm", None)
    battery_raw = energy_sec.pop("battery_capacity", None)
    if mode == "calibrated":
        energy = build(EnergyModel.calibrated, "energy",
                       {**energy_sec, "levels": distortion.levels,
                        "battery_capacity": 0})
    elif mode == "physical":
        energy = build(
            lambda **kw: EnergyModel.from_physical(**kw), "energy",
            {**energy_sec, "levels": distortion.levels, "battery_capacity": 0,
             "tx_power": channel.tx_power, "block_bits": distortion.block_bits})
    else:
        raise ConfigError(f"energy.mode must be 'calibrated' or 'physical', not {mode!r}")
    e_max = max_slot_energy(energy)
    if battery_raw is not None:
        capacity = int(battery_raw)
    elif battery_norm is not None:
        capacity = int(math.floor(battery_norm * e_max))
    else:
        capacity = int(math.floor(0.8 * e_max))
        defaults.append(f"energy.battery_capacity = {capacity} (battery_norm 0.8)")
    energy = dataclasses.replace(energy, battery_capacity=capacity)

    harv_sec = _section(raw, "harvest")
    _exclusive(harv_sec, "harvest", "mean_income", "mean_income_norm")
    income_norm = harv_sec.pop("mean_income_norm", None)
    if income_norm is not None:
        harv_sec["mean_income"] = float(income_norm) * e_max
    elif "mean_income" not in harv_sec:
        harv_sec["mean_income"] = 1.0 * e_max
        defaults.append(f"harvest.mean_income = {harv_sec['mean_income']} "
                        "(mean_income_norm 1.0)")
    if "max_income" not in harv_sec:
        harv_sec["max_income"] = max(capacity, 1)
        defaults.append(f"harvest.max_income = {harv_sec['max_income']} "
                        "(battery capacity)")
    harvest = build(HarvestModel, "harvest", harv_sec)

    solver = build(SolverParams, "solver", _section(raw, "solver"))
    rl = build(RLParams, "rl", _section(raw, "rl"))

    max_attempts = proto_sec.pop("max_attempts", None)
    if max_attempts is None:
        max_attempts = 2
        defaults.append("protocol.max_attempts = 2")
    seed = raw.get("seed")
    if seed is None:
        seed = 1
        defaults.append("seed = 1")

    try:
        cfg = SystemConfig(channel=channel, distortion=distortion, energy=energy,
                           harvest=harvest, max_attempts=int(max_attempts),
                           solver=solver, rl=rl, seed=int(seed))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, defaults


def load_config(path: str | Path) -> SystemConfig:
    """Parse and validate a YAML config file; an empty file means defaults."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    cfg, defaults = resolve_config(raw)
    for msg in defaults:
        log.info("config default applied: %s", msg)
    return cfg


def config_to_dict(cfg: SystemConfig) -> dict[str, Any]:
    """Fully resolved, round-trippable form of a config.

    Normalized shortcut fields are emitted in their resolved raw form, so
    feeding the result back through the loader reproduces the run exactly.
    """
    channel: dict[str, Any] = {
        "tx_power": cfg.channel.tx_power,
        "carrier_freq": cfg.channel.carrier_freq,
        "ref_distance": cfg.channel.ref_distance,
        "distance": cfg.channel.distance,
        "pathloss_exp": cfg.channel.pathloss_exp,
        "noise_psd": cfg.channel.noise_psd,
        "bandwidth": cfg.channel.bandwidth,
    }
    if cfg.channel.mean_snr_override is not None:
        channel["mean_snr"] = cfg.channel.mean_snr_override
    return {
        "channel": channel,
        "distortion": {
            "exponent": cfg.distortion.exponent,
            "scale": cfg.distortion.scale,
            "levels": cfg.distortion.levels,
            "d_floor": cfg.distortion.d_floor,
            "block_bits": cfg.distortion.block_bits,
        },
        "energy": {
            "battery_capacity": cfg.energy.battery_capacity,
            "tx_quanta": cfg.energy.tx_quanta,
            "idle_quanta": cfg.energy.idle_quanta,
            "tx_circuit_quanta": cfg.energy.tx_circuit_quanta,
        },
        "harvest": {
            "p_bad_to_good": cfg.harvest.p_bad_to_good,
            "p_good_to_bad": cfg.harvest.p_good_to_bad,
            "mean_income": cfg.harvest.mean_income,
            "income_variance": cfg.harvest.income_variance,
            "max_income": cfg.harvest.max_income,
        },
        "protocol": {
            "max_attempts": cfg.max_attempts,
            "slot_bits": cfg.distortion.slot_bits,
        },
        "solver": {
            "span_threshold": cfg.solver.span_threshold,
            "max_iterations": cfg.solver.max_iterations,
        },
        "rl": {
            "iterations": cfg.rl.iterations,
            "epsilon0": cfg.rl.epsilon0,
            "epsilon_min": cfg.rl.epsilon_min,
            "epsilon_knee": cfg.rl.epsilon_knee,
            "alpha0": cfg.rl.alpha0,
            "alpha_tau": cfg.rl.alpha_tau,
            "beta": cfg.rl.beta,
            "rho_init": cfg.rl.rho_init,
            "checkpoint_every": cfg.rl.checkpoint_every,
        },
        "seed": cfg.seed,
    }


def save_config(cfg: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
