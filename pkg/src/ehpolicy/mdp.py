"""Average-cost MDP over (source state, battery, backlog).

The decision each slot is how much stored energy u (0..battery) to allocate;
the operating point implied by (backlog, u) fixes the delivery probability
and the stage cost.  Transitions factor into the harvesting chain, the income
distribution of the current source state, the success-runs backlog dynamics,
and the deterministic battery recursion.

The solver is relative value iteration: alternate a Bellman backup with a
re-centering at a fixed reference state (the backup is invariant to constant
shifts, and without the re-centering the values drift linearly).  The span of
successive differences both certifies convergence and brackets the optimal
gain.  Policies are evaluated exactly through the stationary distribution of
the chain they induce.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .config import SystemConfig
from .energy import GOOD, harvest_pmf
from .errors import ConvergenceError, ReducibleChainWarning
from .tradeoff import OperatingTable, required_budget


class SystemState(NamedTuple):
    x: int   # harvesting source state, 0 bad / 1 good
    b: int   # battery quanta
    q: int   # backlog, number of blocks sharing the next packet


@dataclass(frozen=True)
class StateSpace:
    """Total, invertible indexing of (x, b, q) triples.

    Index order is x-major, then battery, then backlog, which is also the
    row order of every exported policy table.
    """

    battery_capacity: int
    max_attempts: int

    @property
    def size(self) -> int:
        return 2 * (self.battery_capacity + 1) * self.max_attempts

    def index(self, state: SystemState) -> int:
        x, b, q = state
        if x not in (0, 1):
            raise ValueError("source state must be 0 or 1")
        if not 0 <= b <= self.battery_capacity:
            raise ValueError("battery level out of range")
        if not 1 <= q <= self.max_attempts:
            raise ValueError("backlog out of range")
        return (x * (self.battery_capacity + 1) + b) * self.max_attempts + (q - 1)

    def state(self, idx: int) -> SystemState:
        if not 0 <= idx < self.size:
            raise ValueError("state index out of range")
        idx, qm1 = divmod(idx, self.max_attempts)
        x, b = divmod(idx, self.battery_capacity + 1)
        return SystemState(x=x, b=b, q=qm1 + 1)

    def __iter__(self) -> Iterator[SystemState]:
        return (self.state(i) for i in range(self.size))


@dataclass
class Policy:
    """Deterministic stationary policy: one energy action per state."""

    actions: np.ndarray
    battery_capacity: int
    max_attempts: int

    def __post_init__(self) -> None:
        self.actions = np.asarray(self.actions, dtype=int)
        space = self.space
        if self.actions.shape != (space.size,):
            raise ValueError("policy action table has the wrong length")
        for idx, u in enumerate(self.actions):
            b = space.state(idx).b
            if not 0 <= u <= b:
                raise ValueError(
                    f"action {u} inadmissible in state {space.state(idx)}")

    @property
    def space(self) -> StateSpace:
        return StateSpace(self.battery_capacity, self.max_attempts)

    def action(self, state: SystemState) -> int:
        return int(self.actions[self.space.index(state)])


class MdpModel:
    """Dense cost table and sparse transition kernel for one config."""

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.space = StateSpace(cfg.energy.battery_capacity, cfg.max_attempts)
        self.table = OperatingTable(cfg)
        self.num_actions = cfg.energy.battery_capacity + 1
        self._income_pmf = [harvest_pmf(cfg.harvest, x) for x in (0, 1)]
        self._source_matrix = cfg.harvest.transition_matrix()
        self._build()

    def _build(self) -> None:
        size, acts = self.space.size, self.num_actions
        costs = np.full((size, acts), np.inf)
        rows, cols, vals = [], [], []
        for idx in range(size):
            state = self.space.state(idx)
            for u in range(state.b + 1):
                costs[idx, u] = self.table.stage_cost(state.q, u)
                row = idx * acts + u
                for succ, p in self.transition_kernel(state, u).items():
                    rows.append(row)
                    cols.append(self.space.index(succ))
                    vals.append(p)
        self.costs = costs
        self.transitions = sp.csr_matrix(
            (vals, (rows, cols)), shape=(size * acts, size))

    def transition_kernel(self, state: SystemState, u: int) -> dict[SystemState, float]:
        """Sparse successor distribution of one (state, action) pair."""
        if not 0 <= u <= state.b:
            raise ValueError(f"action {u} inadmissible in state {state}")
        cfg = self.cfg
        cap = cfg.energy.battery_capacity
        p_succ = self.table.success_probability(state.q, u)
        q_fail = min(state.q + 1, cfg.max_attempts)
        out: dict[SystemState, float] = {}
        for x_next in (0, 1):
            p_x = self._source_matrix[state.x, x_next]
            if p_x == 0.0:
                continue
            pmf = self._income_pmf[state.x]
            for income, p_e in enumerate(pmf):
                if p_e == 0.0:
                    continue
                b_next = min(state.b + income - u, cap)
                for q_next, p_q in ((1, p_succ), (q_fail, 1.0 - p_succ)):
                    if p_q == 0.0:
                        continue
                    succ = SystemState(x_next, b_next, q_next)
                    out[succ] = out.get(succ, 0.0) + p_x * p_e * p_q
        return out

    def policy_matrix(self, policy: Policy) -> tuple[sp.csr_matrix, np.ndarray]:
        """Chain and stage-cost vector induced by a policy."""
        if (policy.battery_capacity != self.space.battery_capacity
                or policy.max_attempts != self.space.max_attempts):
            raise ValueError("policy was built for a different state space")
        size = self.space.size
        row_ids = np.arange(size) * self.num_actions + policy.actions
        chain = self.transitions[row_ids]
        stage = self.costs[np.arange(size), policy.actions]
        return chain, stage


@dataclass
class SolveResult:
    policy: Policy
    gain: float                # per-slot cost normalized by the floor penalty
    iterations: int
    final_span: float
    steady_state: np.ndarray


def rvia_solve(model: MdpModel, span_threshold: float | None = None,
               max_iterations: int | None = None,
               initial_values: np.ndarray | None = None) -> SolveResult:
    """Relative value iteration on the assembled tables.

    Stops when the span seminorm of the successive-difference vector falls
    below the threshold; the returned gain is the midpoint of that vector's
    range (normalized), and the policy is greedy with respect to the final
    action values.
    """
    cfg = model.cfg
    threshold = span_threshold if span_threshold is not None else cfg.solver.span_threshold
    cap = max_iterations if max_iterations is not None else cfg.solver.max_iterations
    size, acts = model.space.size, model.num_actions
    if initial_values is None:
        values = np.zeros(size)
    else:
        values = np.asarray(initial_values, dtype=float).copy()
        if values.shape != (size,):
            raise ValueError("initial_values has the wrong length")
    costs_flat = model.costs.reshape(size * acts)

    iterations = 0
    span = np.inf
    gain_est = np.nan
    action_values = None
    while iterations < cap:
        iterations += 1
        action_values = (costs_flat + model.transitions @ values).reshape(size, acts)
        backed_up = action_values.min(axis=1)
        diff = backed_up - values
        span = float(diff.max() - diff.min())
        gain_est = float((diff.max() + diff.min()) / 2.0)
        values = backed_up - backed_up[0]
        if span <= threshold:
            break
    else:
        raise ConvergenceError(
            f"relative value iteration did not reach span {threshold} "
            f"within {cap} sweeps (span {span:.3e})")

    actions = np.asarray(action_values.argmin(axis=1))
    policy = Policy(actions=actions, battery_capacity=model.space.battery_capacity,
                    max_attempts=model.space.max_attempts)
    _, steady = evaluate_policy(model, policy)
    return SolveResult(policy=policy, gain=gain_est / cfg.distortion.d_floor,
                       iterations=iterations, final_span=span, steady_state=steady)


def start_state(model: MdpModel) -> SystemState:
    """Canonical initial state: good source, full battery, fresh backlog."""
    return SystemState(x=GOOD, b=model.space.battery_capacity, q=1)


def evaluate_policy(model: MdpModel, policy: Policy) -> tuple[float, np.ndarray]:
    """Exact normalized gain and stationary distribution of a policy.

    The stationary distribution is found by power iteration (with uniform
    damping, which preserves it while removing periodicity) started from the
    canonical initial state, so for a multichain policy the result is the
    limiting occupation reached from that start; such policies trigger a
    ``ReducibleChainWarning``.
    """
    chain, stage = model.policy_matrix(policy)
    dist = _stationary_from(chain, model.space.index(start_state(model)))
    gain = float(dist @ stage) / model.cfg.distortion.d_floor
    return gain, dist


def _stationary_from(chain: sp.csr_matrix, start: int,
                     tol: float = 1e-12, cap: int = 200_000) -> np.ndarray:
    size = chain.shape[0]
    if _reachable_recurrent_classes(chain, start) > 1:
        warnings.warn(
            "induced chain has multiple recurrent classes; reporting the "
            "limiting occupation from the canonical start state",
            ReducibleChainWarning, stacklevel=3)
    transpose = chain.T.tocsr()
    dist = np.zeros(size)
    dist[start] = 1.0
    # damped kernel (I + P)/2: same stationary distribution, aperiodic
    for _ in range(cap):
        nxt = 0.5 * (dist + transpose @ dist)
        if np.abs(nxt - dist).sum() <= tol:
            dist = nxt
            break
        dist = nxt
    if np.abs(transpose @ dist - dist).sum() > 1e-9:
        dist = _stationary_by_squaring(chain, start)
    if np.abs(transpose @ dist - dist).sum() > 1e-9:
        raise ConvergenceError("stationary distribution iteration stalled")
    dist = np.maximum(dist, 0.0)
    return dist / dist.sum()


def _stationary_by_squaring(chain: sp.csr_matrix, start: int) -> np.ndarray:
    """Dense fallback: repeatedly square the damped kernel."""
    damped = 0.5 * (np.eye(chain.shape[0]) + chain.toarray())
    for _ in range(80):
        nxt = damped @ damped
        if np.abs(nxt - damped).max() < 1e-15:
            damped = nxt
            break
        damped = nxt
    return damped[start]


def _reachable_recurrent_classes(chain: sp.csr_matrix, start: int) -> int:
    """Number of recurrent classes reachable from ``start``."""
    reach = breadth_first_order(chain, start, return_predecessors=False)
    sub = chain[reach][:, reach].tocoo()
    n_comp, labels = connected_components(
        sp.csr_matrix((sub.data, (sub.row, sub.col)), shape=sub.shape),
        directed=True, connection="strong")
    has_exit = np.zeros(n_comp, dtype=bool)
    for i, j, v in zip(sub.row, sub.col, sub.data):
        if v > 0 and labels[i] != labels[j]:
            has_exit[labels[i]] = True
    return int(np.sum(~has_exit))


def stationary_distribution_linear(chain: sp.csr_matrix) -> np.ndarray:
    """Direct linear solve for the stationary distribution of a unichain.

    Cross-check companion to the power-iteration path; only meaningful when
    the chain has a single recurrent class.
    """
    size = chain.shape[0]
    dense = chain.toarray()
    system = dense.T - np.eye(size)
    system[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    dist, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    dist = np.maximum(dist, 0.0)
    return dist / dist.sum()


def greedy_policy(model: MdpModel) -> Policy:
    """Energy-unaware baseline: spend everything up to the rate-optimal need."""
    budgets = {q: required_budget(model.cfg, q)
               for q in range(1, model.cfg.max_attempts + 1)}
    actions = np.empty(model.space.size, dtype=int)
    for idx in range(model.space.size):
        state = model.space.state(idx)
        actions[idx] = min(state.b, budgets[state.q])
    return Policy(actions=actions, battery_capacity=model.space.battery_capacity,
                  max_attempts=model.space.max_attempts)


def random_policy(model: MdpModel, rng: np.random.Generator) -> Policy:
    """Uniformly random admissible action in every state."""
    actions = np.empty(model.space.size, dtype=int)
    for idx in range(model.space.size):
        actions[idx] = rng.integers(0, model.space.state(idx).b + 1)
    return Policy(actions=actions, battery_capacity=model.space.battery_capacity,
                  max_attempts=model.space.max_attempts)


def policy_rows(model: MdpModel, policy: Policy) -> list[tuple[int, int, int, int, int]]:
    """Export rows (x, b, q, u, k_star) in deterministic index order."""
    rows = []
    for idx in range(model.space.size):
        state = model.space.state(idx)
        u = int(policy.actions[idx])
        pt = model.table.point(state.q, u)
        rows.append((state.x, state.b, state.q, u, pt.k_star))
    return rows
