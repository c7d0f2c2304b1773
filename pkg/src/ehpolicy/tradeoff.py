"""Joint compression/coding operating-point selection under an energy budget.

For a backlog of q blocks the usable levels are {0..levels//q}.  Two candidate
levels matter: the rate-optimal one (minimizing expected receiver distortion
with energy ignored) and the largest level affordable with the allocated
budget.  Expected distortion falls monotonically up to the rate-optimal level,
so the budget-constrained optimum is their minimum whenever that point is
affordable; ``choose_k`` always returns the exact affordable optimum found by
exhaustive scan, which also covers the corner where the affordable set is not
an interval (sending uncompressed costs no processing, so the top level can be
cheaper than the ones below it).

The module also contains numeric checks of the retransmission analysis: the
gain of allowing r combined attempts over single-shot transmission, and the
comparison between attempt limits r and r-1 through their distortion on the
decisive event (a delivery right after r-1 consecutive failures).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .channel import outage_probability
from .config import SystemConfig
from .distortion import (ack_distortion, coding_rate,
                         expected_receiver_distortion, source_distortion)
from .energy import slot_energy
from .errors import DegenerateConfigError


@dataclass(frozen=True)
class OperatingPoint:
    backlog: int
    k_star: int
    k_rate: int
    k_energy: int
    expected_distortion: float   # raw units, for the whole q-block packet
    energy_cost: int             # quanta the selected scheme consumes
    forced_idle: bool = False    # budget below even the idle circuitry cost


def optimal_k_rate(cfg: SystemConfig, backlog: int) -> int:
    """Rate-optimal level for a backlog-q packet, energy constraints ignored.

    Exhaustive scan over the admissible levels; ties break toward the smaller
    level (stronger channel code).
    """
    if not 1 <= backlog <= cfg.max_attempts:
        raise ValueError(f"backlog must be in 1..{cfg.max_attempts}")
    best_k, best_v = 0, math.inf
    for k in range(cfg.distortion.max_level(backlog) + 1):
        v = expected_receiver_distortion(cfg.distortion, cfg.gamma_bar, backlog, k)
        if v < best_v:
            best_k, best_v = k, v
    return best_k


def max_k_energy(cfg: SystemConfig, backlog: int, budget: int) -> int:
    """Largest affordable level; 0 when nothing (not even idling) fits.

    The affordable set is scanned exhaustively because it need not be an
    interval: the top level carries no processing cost.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    best = 0
    for k in range(cfg.distortion.max_level(backlog) + 1):
        if slot_energy(cfg.energy, backlog, k) <= budget:
            best = k
    return best


def min_energy_for_k(cfg: SystemConfig, backlog: int, level: int) -> int:
    """Quanta needed to process and send a backlog-q packet at ``level``."""
    return slot_energy(cfg.energy, backlog, level)


def choose_k(cfg: SystemConfig, backlog: int, budget: int) -> OperatingPoint:
    """Best affordable operating point for the given backlog and budget."""
    if not 1 <= backlog <= cfg.max_attempts:
        raise ValueError(f"backlog must be in 1..{cfg.max_attempts}")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    k_rate = optimal_k_rate(cfg, backlog)
    k_energy = max_k_energy(cfg, backlog, budget)
    best_k, best_v = None, math.inf
    for k in range(cfg.distortion.max_level(backlog) + 1):
        if slot_energy(cfg.energy, backlog, k) > budget:
            continue
        v = expected_receiver_distortion(cfg.distortion, cfg.gamma_bar, backlog, k)
        if v < best_v:
            best_k, best_v = k, v
    if best_k is None:
        # Not even the idle circuitry fits in the budget: the packet is
        # dropped and the slot contributes the full floor penalty.
        return OperatingPoint(
            backlog=backlog, k_star=0, k_rate=k_rate, k_energy=0,
            expected_distortion=backlog * cfg.distortion.d_floor,
            energy_cost=slot_energy(cfg.energy, backlog, 0), forced_idle=True)
    return OperatingPoint(
        backlog=backlog, k_star=best_k, k_rate=k_rate, k_energy=k_energy,
        expected_distortion=best_v,
        energy_cost=slot_energy(cfg.energy, backlog, best_k))


def required_budget(cfg: SystemConfig, backlog: int) -> int:
    """Energy that attains the rate-optimal level for this backlog."""
    return min_energy_for_k(cfg, backlog, optimal_k_rate(cfg, backlog))


@dataclass(frozen=True)
class RetransmissionGainReport:
    attempts: int
    k_single: int                # rate-optimal level without retransmission
    k_multi: int                 # rate-optimal level at full backlog
    k_ratio_ok: bool             # k_multi >= k_single / attempts
    distortion_gain_ok: bool     # r*D(k_multi) <= (r-1)*floor + D(k_single)
    combined_distortion: float
    single_shot_distortion: float

    @property
    def all_ok(self) -> bool:
        return self.k_ratio_ok and self.distortion_gain_ok


def verify_retransmission_gain(cfg: SystemConfig, attempts: int) -> RetransmissionGainReport:
    """Check numerically that combining up to ``attempts`` blocks helps.

    Energy constraints are ignored (both levels are the rate-optimal ones).
    The decisive event is a delivery right after attempts-1 failures: the
    combined scheme books attempts*D(k_multi), the single-shot one books the
    floor penalty for each failure plus D(k_single).
    """
    if attempts < 2:
        raise ValueError("attempts must be at least 2")
    dist = cfg.distortion
    k_single = _unconstrained_k(cfg, 1)
    k_multi = _unconstrained_k(cfg, attempts)
    if k_multi == 0:
        raise DegenerateConfigError(
            "rate-optimal level at full backlog is 0; the combined scheme "
            "degenerates to discarding and the comparison premise fails")
    combined = attempts * source_distortion(dist, k_multi)
    single = (attempts - 1) * dist.d_floor + source_distortion(dist, k_single)
    return RetransmissionGainReport(
        attempts=attempts, k_single=k_single, k_multi=k_multi,
        k_ratio_ok=attempts * k_multi >= k_single,
        distortion_gain_ok=combined <= single,
        combined_distortion=combined, single_shot_distortion=single)


def _unconstrained_k(cfg: SystemConfig, backlog: int) -> int:
    """Rate-optimal level for a backlog that may exceed cfg.max_attempts."""
    best_k, best_v = 0, math.inf
    for k in range(cfg.distortion.max_level(backlog) + 1):
        v = expected_receiver_distortion(cfg.distortion, cfg.gamma_bar, backlog, k)
        if v < best_v:
            best_k, best_v = k, v
    return best_k


def breakeven_level(cfg: SystemConfig, attempts: int) -> float:
    """Real-valued level at which attempt limits r and r-1 tie.

    Solves D(k) = ((r-1)*D(k_prev) + floor)/r in closed form, where k_prev is
    the rate-optimal level at backlog r-1.  An attempt limit of r wins exactly
    when its rate-optimal level lands above this threshold.
    """
    if attempts < 2:
        raise ValueError("attempts must be at least 2")
    k_prev = _unconstrained_k(cfg, attempts - 1)
    if k_prev == 0:
        raise ValueError("rate-optimal level at backlog r-1 is 0; no threshold exists")
    dist = cfg.distortion
    mu = (attempts - 1) / attempts
    term = (mu * k_prev ** (-dist.exponent)
            + (1.0 - mu) * (dist.scale + dist.d_floor)
            / (dist.scale * dist.levels ** dist.exponent))
    return term ** (-1.0 / dist.exponent)


class AttemptComparison(enum.Enum):
    MORE_ATTEMPTS_BETTER = "more_attempts_better"      # limit r wins
    FEWER_ATTEMPTS_BETTER = "fewer_attempts_better"    # limit r-1 wins
    EQUAL = "equal"


@dataclass(frozen=True)
class AttemptComparisonReport:
    attempts: int
    k_more: int
    k_fewer: int
    distortion_more: float     # r * D(k at backlog r)
    distortion_fewer: float    # (r-1) * D(k at backlog r-1) + floor
    ordering: AttemptComparison


def compare_attempt_limits(cfg: SystemConfig, attempts: int) -> AttemptComparisonReport:
    """Distortion comparison between attempt limits r and r-1.

    Evaluated on the decisive event (success after r-1 straight failures)
    with energy constraints ignored, mirroring ``verify_retransmission_gain``.
    """
    if attempts < 2:
        raise ValueError("attempts must be at least 2")
    dist = cfg.distortion
    k_more = _unconstrained_k(cfg, attempts)
    k_fewer = _unconstrained_k(cfg, attempts - 1)
    d_more = attempts * source_distortion(dist, k_more)
    d_fewer = (attempts - 1) * source_distortion(dist, k_fewer) + dist.d_floor
    if d_more < d_fewer:
        ordering = AttemptComparison.MORE_ATTEMPTS_BETTER
    elif d_more > d_fewer:
        ordering = AttemptComparison.FEWER_ATTEMPTS_BETTER
    else:
        ordering = AttemptComparison.EQUAL
    return AttemptComparisonReport(
        attempts=attempts, k_more=k_more, k_fewer=k_fewer,
        distortion_more=d_more, distortion_fewer=d_fewer, ordering=ordering)


class OperatingTable:
    """Per-(backlog, budget) cache of operating points for one config.

    Built once, then read-only; the MDP construction, the simulator and the
    policy exports all share it.
    """

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self._points: dict[tuple[int, int], OperatingPoint] = {}
        self.k_rate = {q: optimal_k_rate(cfg, q)
                       for q in range(1, cfg.max_attempts + 1)}

    def point(self, backlog: int, budget: int) -> OperatingPoint:
        key = (backlog, budget)
        cached = self._points.get(key)
        if cached is None:
            cached = choose_k(self.cfg, backlog, budget)
            self._points[key] = cached
        return cached

    def success_probability(self, backlog: int, budget: int) -> float:
        """Delivery probability under the chosen operating point."""
        pt = self.point(backlog, budget)
        if pt.k_star == 0:
            return 0.0
        rate = coding_rate(self.cfg.distortion, backlog, pt.k_star)
        return 1.0 - outage_probability(rate, self.cfg.gamma_bar)

    def stage_cost(self, backlog: int, budget: int) -> float:
        """Expected one-slot cost (raw units) of allocating ``budget``."""
        pt = self.point(backlog, budget)
        d_floor = self.cfg.distortion.d_floor
        if pt.k_star == 0:
            return d_floor
        p_succ = self.success_probability(backlog, budget)
        ack = ack_distortion(self.cfg.distortion, backlog, pt.k_star)
        return p_succ * ack + (1.0 - p_succ) * d_floor

    def ack_cost(self, backlog: int, budget: int) -> float:
        """Cost booked on a delivery at this operating point."""
        pt = self.point(backlog, budget)
        if pt.k_star == 0:
            return self.cfg.distortion.d_floor
        return ack_distortion(self.cfg.distortion, backlog, pt.k_star)
