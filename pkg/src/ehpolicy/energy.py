"""Quantized energy accounting: per-slot costs, battery recursion, harvesting.

All costs and incomes are integers in battery quanta.  Costs derived from
physical (joule) parameters are quantized upward and harvest income downward,
which errs on the side of energy causality.

Per-slot consumption when q blocks are processed at compression level k:

    q * processing(k) + transmission * [k > 0] + circuitry(k)

Processing grows affinely with k/levels and vanishes at k = 0 (discard) and
k = levels (no compression); transmission and circuitry do not depend on the
backlog because the radio is on for the whole slot either way.

The ambient energy source is a two-state chain: a bad state that yields
nothing and a good state whose income follows a discrete normal kernel
truncated to {1..max_income}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CausalityError


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class EnergyModel:
    """Per-operation costs in quanta, plus the battery size.

    ``proc_quanta[k]`` is the per-block processing cost at level k; it is zero
    at both ends of the level range by construction.
    """

    battery_capacity: int
    levels: int
    proc_quanta: tuple[int, ...]
    tx_quanta: int
    idle_quanta: int
    tx_circuit_quanta: int

    def __post_init__(self) -> None:
        if self.battery_capacity < 0:
            raise ValueError("battery_capacity must be nonnegative")
        if self.levels < 2:
            raise ValueError("levels must be at least 2")
        if len(self.proc_quanta) != self.levels + 1:
            raise ValueError("proc_quanta must have one entry per level 0..levels")
        if self.proc_quanta[0] != 0 or self.proc_quanta[-1] != 0:
            raise ValueError("processing cost must be zero at levels 0 and levels")
        if any(q < 0 for q in self.proc_quanta):
            raise ValueError("processing costs must be nonnegative")
        inner = self.proc_quanta[1:self.levels]
        if any(b < a for a, b in zip(inner, inner[1:])):
            raise ValueError("processing cost must be non-decreasing on 1..levels-1")
        if min(self.tx_quanta, self.idle_quanta, self.tx_circuit_quanta) < 0:
            raise ValueError("energy costs must be nonnegative")

    @classmethod
    def calibrated(cls, levels: int = 30, battery_capacity: int = 19,
                   tx_quanta: int = 10, idle_quanta: int = 2,
                   tx_circuit_quanta: int = 2, proc_scale: float = 10.0,
                   proc_offset: float = 0.2, proc_slope: float = 0.8) -> "EnergyModel":
        """Default profile stated directly in quanta.

        Processing at level k costs round(scale*(offset + slope*k/levels)),
        so with the defaults it is of the same order as a transmission while
        the circuitry terms stay smaller.
        """
        proc = [0] * (levels + 1)
        for k in range(1, levels):
            proc[k] = _round_half_up(proc_scale * (proc_offset + proc_slope * k / levels))
        return cls(battery_capacity=battery_capacity, levels=levels,
                   proc_quanta=tuple(proc), tx_quanta=tx_quanta,
                   idle_quanta=idle_quanta, tx_circuit_quanta=tx_circuit_quanta)

    @classmethod
    def from_physical(cls, *, cpu_energy_per_cycle: float, cycles_slope: float,
                      cycles_offset: float, amp_efficiency: float,
                      slot_duration: float, sense_energy: float,
                      sync_energy: float, circuit_power: float,
                      tx_power: float, block_bits: int, quantum: float,
                      battery_capacity: int, levels: int) -> "EnergyModel":
        """Build the quanta table from datasheet-style joule parameters.

        Each cost is quantized with a ceiling.  Processing per block at level
        k is  E0 * L0 * (slope*k/levels + offset)  joules; transmission is
        T*P_tx/eta_A; circuitry is sense+sync always plus circuit_power*T
        while transmitting.
        """
        if not 0 < amp_efficiency <= 1:
            raise ValueError("amp_efficiency must lie in (0, 1]")
        if not quantum > 0:
            raise ValueError("quantum must be positive")
        for name, v in (("cpu_energy_per_cycle", cpu_energy_per_cycle),
                        ("cycles_slope", cycles_slope),
                        ("cycles_offset", cycles_offset),
                        ("slot_duration", slot_duration),
                        ("sense_energy", sense_energy),
                        ("sync_energy", sync_energy),
                        ("circuit_power", circuit_power),
                        ("tx_power", tx_power)):
            if v < 0:
                raise ValueError(f"{name} must be nonnegative")
        proc = [0] * (levels + 1)
        for k in range(1, levels):
            joules = cpu_energy_per_cycle * block_bits * (
                cycles_slope * k / levels + cycles_offset)
            proc[k] = math.ceil(joules / quantum)
        return cls(
            battery_capacity=battery_capacity,
            levels=levels,
            proc_quanta=tuple(proc),
            tx_quanta=math.ceil(slot_duration * tx_power / (amp_efficiency * quantum)),
            idle_quanta=math.ceil((sense_energy + sync_energy) / quantum),
            tx_circuit_quanta=math.ceil(circuit_power * slot_duration / quantum),
        )


def processing_energy(model: EnergyModel, level: int) -> int:
    """Per-block compression cost in quanta; zero at the two extreme levels."""
    if not 0 <= level <= model.levels:
        raise ValueError(f"level must be in 0..{model.levels}")
    return model.proc_quanta[level]


def transmission_energy(model: EnergyModel) -> int:
    """Radio cost of one slot, independent of backlog and level."""
    return model.tx_quanta


def circuitry_energy(model: EnergyModel, level: int) -> int:
    """Sensing/synchronization cost, plus the active-circuitry term if sending."""
    if not 0 <= level <= model.levels:
        raise ValueError(f"level must be in 0..{model.levels}")
    return model.idle_quanta + (model.tx_circuit_quanta if level > 0 else 0)


def slot_energy(model: EnergyModel, backlog: int, level: int) -> int:
    """Total consumption of a slot carrying ``backlog`` blocks at ``level``."""
    if backlog < 1:
        raise ValueError("backlog must be at least 1")
    if not 0 <= level <= model.levels // backlog:
        raise ValueError(
            f"level must be in 0..{model.levels // backlog} for backlog {backlog}")
    tx = model.tx_quanta if level > 0 else 0
    return backlog * processing_energy(model, level) + tx + circuitry_energy(model, level)


def max_slot_energy(model: EnergyModel) -> int:
    """Largest single-packet slot cost; the normalizer for battery and income."""
    return max(slot_energy(model, 1, k) for k in range(model.levels + 1))


def battery_step(level_now: int, income: int, used: int, capacity: int) -> int:
    """Next battery level: add income, subtract usage, clamp at capacity."""
    if not 0 <= level_now <= capacity:
        raise ValueError("battery level out of range")
    if income < 0:
        raise ValueError("income must be nonnegative")
    if used > level_now:
        raise CausalityError(
            f"action uses {used} quanta but only {level_now} are stored")
    if used < 0:
        raise ValueError("energy use must be nonnegative")
    return min(level_now + income - used, capacity)


BAD, GOOD = 0, 1


@dataclass(frozen=True)
class HarvestModel:
    """Two-state ambient source with per-state income distributions."""

    p_bad_to_good: float = 0.3
    p_good_to_bad: float = 0.1
    mean_income: float = 24.0
    income_variance: float = 10.0
    max_income: int = 19
    _good_pmf: tuple[float, ...] = field(init=False, repr=False)
    _good_cdf: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("p_bad_to_good", "p_good_to_bad"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"harvest.{name} must lie in [0, 1]")
        if not self.income_variance > 0:
            raise ValueError("harvest.income_variance must be positive")
        if self.max_income < 1:
            raise ValueError("harvest.max_income must be at least 1")
        if not self.mean_income > 0:
            raise ValueError("harvest.mean_income must be positive")
        support = np.arange(1, self.max_income + 1, dtype=float)
        kernel = np.exp(-((support - self.mean_income) ** 2)
                        / (2.0 * self.income_variance))
        total = kernel.sum()
        if not total > 0:
            raise ValueError("truncated income distribution has no mass on 1..max_income")
        pmf = kernel / total
        object.__setattr__(self, "_good_pmf", tuple(pmf))
        object.__setattr__(self, "_good_cdf", tuple(np.cumsum(pmf)))

    def transition_matrix(self) -> np.ndarray:
        return np.array([
            [1.0 - self.p_bad_to_good, self.p_bad_to_good],
            [self.p_good_to_bad, 1.0 - self.p_good_to_bad],
        ])


def harvest_pmf(model: HarvestModel, source_state: int) -> np.ndarray:
    """Income distribution over {0..max_income} for the given source state."""
    if source_state not in (BAD, GOOD):
        raise ValueError("source state must be 0 (bad) or 1 (good)")
    pmf = np.zeros(model.max_income + 1)
    if source_state == BAD:
        pmf[0] = 1.0
    else:
        pmf[1:] = model._good_pmf
    return pmf


def harvest_step(model: HarvestModel, source_state: int,
                 rng: np.random.Generator) -> tuple[int, int]:
    """One harvesting slot: income from the current state, then transition.

    Consumes the stream in a fixed order (income draw first, in the good
    state only, then the state transition), so trajectories are reproducible
    for a fixed seed.
    """
    if source_state not in (BAD, GOOD):
        raise ValueError("source state must be 0 (bad) or 1 (good)")
    if source_state == GOOD:
        income = 1 + int(np.searchsorted(model._good_cdf, rng.random(), side="right"))
        income = min(income, model.max_income)
        p_leave = model.p_good_to_bad
        next_state = BAD if rng.random() < p_leave else GOOD
    else:
        income = 0
        p_leave = model.p_bad_to_good
        next_state = GOOD if rng.random() < p_leave else BAD
    return next_state, income
