"""SAT decision, projected model enumeration and unit-weight MaxSAT."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np
from pysat.card import ITotalizer
from pysat.solvers import Solver

from .encode import SatInstance, blocking_clause, decode
from .machine import RewardMachineModel, is_non_stuttering

DEFAULT_CAP = 10_000
DEFAULT_SOLVER = "g4"


class InfeasibleError(RuntimeError):
    """Hard clauses admit no model."""


@dataclass
class SolveStats:
    calls: int = 0
    conflicts: int = 0
    decisions: int = 0
    propagations: int = 0
    wall: float = 0.0

    def absorb(self, solver: Solver, wall: float) -> None:
        st = solver.accum_stats() or {}
        self.conflicts += int(st.get("conflicts", 0))
        self.decisions += int(st.get("decisions", 0))
        self.propagations += int(st.get("propagations", 0))
        self.wall += wall

    def lines(self) -> list[str]:
        return [f"{k}={v}" for k, v in vars(self).items()]


@dataclass
class SolveResult:
    sat: bool
    assignment: list[int] | None = None
    stats: SolveStats = field(default_factory=SolveStats)


@dataclass
class Enumeration:
    models: list[RewardMachineModel]
    capped: bool
    cost: int = 0
    stats: SolveStats = field(default_factory=SolveStats)


def _solver(inst: SatInstance, name: str, clauses=None) -> Solver:
    s = Solver(name=name, bootstrap_with=inst.hard_cnf() if clauses is None else clauses)
    return s


def solve(inst: SatInstance, solver: str = DEFAULT_SOLVER) -> SolveResult:
    """Decide the hard part of the instance (pair clauses included)."""
    stats = SolveStats()
    t0 = time.perf_counter()
    with _solver(inst, solver) as s:
        ok = s.solve()
        stats.calls = 1
        model = s.get_model() if ok else None
        stats.absorb(s, time.perf_counter() - t0)
    return SolveResult(bool(ok), model, stats)


def _enumerate(s: Solver, inst: SatInstance, cap: int, stats: SolveStats,
               assumptions=()) -> tuple[list[RewardMachineModel], bool]:
    models: list[RewardMachineModel] = []
    while True:
        stats.calls += 1
        if not s.solve(assumptions=list(assumptions)):
            return models, False
        if len(models) >= cap:
            return models, True
        m = decode(inst, s.get_model()[:inst.n_b])
        models.append(m)
        s.add_clause(blocking_clause(inst, m))


def enumerate_models(inst: SatInstance, cap: int = DEFAULT_CAP,
                     solver: str = DEFAULT_SOLVER) -> Enumeration:
    """All distinct transition tables satisfying the hard clauses, up to ``cap``.

    Occupancy and relaxation variables are functions of the transition
    variables, so blocking on the transition variables alone loses nothing.
    ``capped`` is set when a further model exists beyond the cap.
    """
    stats = SolveStats()
    t0 = time.perf_counter()
    with _solver(inst, solver) as s:
        models, capped = _enumerate(s, inst, cap, stats)
        stats.absorb(s, time.perf_counter() - t0)
    return Enumeration(models, capped, 0, stats)


def _cost(inst: SatInstance, assignment: list[int]) -> int:
    true = set(lit for lit in assignment if lit > 0)
    return sum(1 for r in inst.relax if r in true)


class _PairCost:
    """Number of pairs a transition table puts in the same node, by running the prefix tree."""

    def __init__(self, inst: SatInstance):
        order = sorted(inst.tree.items(), key=lambda kv: kv[1])
        self.levels: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        by_len: dict[int, list[tuple[int, int, int]]] = {}
        for w, idx in order:
            if w:
                by_len.setdefault(len(w), []).append((idx, inst.tree[w[:-1]], w[-1]))
        for length in sorted(by_len):
            rows = np.array(by_len[length], dtype=np.int64)
            self.levels.append((rows[:, 0], rows[:, 1], rows[:, 2]))
        self.n_tree = len(inst.tree)
        self.p = np.array([inst.tree[a] for a, _ in inst.pairs], dtype=np.int64)
        self.q = np.array([inst.tree[b] for _, b in inst.pairs], dtype=np.int64)

    def __call__(self, delta: np.ndarray) -> int:
        node = np.zeros(self.n_tree, dtype=np.int64)
        for idx, parent, label in self.levels:
            node[idx] = delta[node[parent], label]
        return int(np.count_nonzero(node[self.p] == node[self.q]))


def _improve(inst: SatInstance, model: RewardMachineModel,
             cost: _PairCost) -> tuple[RewardMachineModel, int]:
    """Greedy descent over single transition changes; only tightens the upper bound."""
    delta = model.delta.copy()
    best = cost(delta)
    n, P = inst.n_nodes, inst.n_props
    improved = True
    while improved and best > 0:
        improved = False
        for i, k, j in itertools.product(range(n), range(P), range(n)):
            if delta[i, k] == j:
                continue
            trial = delta.copy()
            trial[i, k] = j
            if inst.non_stuttering and not is_non_stuttering(RewardMachineModel(trial)):
                continue
            c = cost(trial)
            if c < best:
                delta, best, improved = trial, c, True
    return RewardMachineModel(delta), best


def maxsat(inst: SatInstance, cap: int = DEFAULT_CAP, solver: str = DEFAULT_SOLVER,
           upper: int | None = None) -> Enumeration:
    """Minimum number of violated pairs and every optimal transition table.

    Linear search from above.  A greedy descent over transition tables gives
    the first upper bound, which keeps the totalizer over the relaxation
    literals small; each further model tightens the bound until it is
    infeasible.  The optimal models are then enumerated under the final bound.
    With ``upper`` only costs up to that value are searched and
    ``InfeasibleError`` is raised when none exists.
    """
    if not inst.relax:
        return enumerate_models(inst, cap, solver)
    stats = SolveStats()
    t0 = time.perf_counter()
    cost = _PairCost(inst)
    with Solver(name=solver, bootstrap_with=inst.hard) as s:
        s.set_phases([-r for r in inst.relax])
        stats.calls += 1
        if not s.solve():
            stats.absorb(s, time.perf_counter() - t0)
            raise InfeasibleError("hard clauses are unsatisfiable")
        _, best = _improve(inst, decode(inst, s.get_model()[:inst.n_b]), cost)
        if upper is not None and best > upper:
            if upper < 0:
                raise InfeasibleError("negative cost bound")
            # nothing known below upper yet: one call decides whether it is reachable
            tot = ITotalizer(lits=inst.relax, ubound=upper + 1, top_id=inst.n_vars)
            for c in tot.cnf.clauses:
                s.add_clause(c)
            stats.calls += 1
            if not s.solve(assumptions=[-tot.rhs[upper]]):
                stats.absorb(s, time.perf_counter() - t0)
                raise InfeasibleError(f"no table violates at most {upper} pairs")
            best = _cost(inst, s.get_model())
        elif best > 0:
            tot = ITotalizer(lits=inst.relax, ubound=best, top_id=inst.n_vars)
            for c in tot.cnf.clauses:
                s.add_clause(c)
        # rhs[k] is true when more than k relaxations are true
        while best > 0:
            stats.calls += 1
            if not s.solve(assumptions=[-tot.rhs[best - 1]]):
                break
            found = decode(inst, s.get_model()[:inst.n_b])
            best = min(_cost(inst, s.get_model()), _improve(inst, found, cost)[1])
        if best == 0:
            bound_lits = [-r for r in inst.relax]
        elif best >= len(inst.relax):
            bound_lits = []  # every pair violated, nothing to bound
        else:
            bound_lits = [-tot.rhs[best]]
        models, capped = _enumerate(s, inst, cap, stats, bound_lits)
        stats.absorb(s, time.perf_counter() - t0)
    return Enumeration(models, capped, best, stats)


def maxsat_rc2(inst: SatInstance, cap: int = DEFAULT_CAP,
               solver: str = DEFAULT_SOLVER) -> Enumeration:
    """Same contract as ``maxsat`` through the core-guided RC2 solver.

    Independent second route, practical on small instances only; optimal
    tables are collected by blocking each one and re-solving until the
    cost rises.
    """
    from pysat.examples.rc2 import RC2

    from .encode import to_wcnf

    stats = SolveStats()
    t0 = time.perf_counter()
    if not inst.relax:
        return enumerate_models(inst, cap, solver)
    models: list[RewardMachineModel] = []
    capped = False
    with RC2(to_wcnf(inst), solver=solver) as rc:
        m = rc.compute()
        stats.calls += 1
        if m is None:
            raise InfeasibleError("hard clauses are unsatisfiable")
        best = rc.cost
        while m is not None and rc.cost == best:
            if len(models) >= cap:
                capped = True
                break
            found = decode(inst, m[:inst.n_b])
            models.append(found)
            rc.add_clause(blocking_clause(inst, found))
            m = rc.compute()
            stats.calls += 1
    stats.wall = time.perf_counter() - t0
    return Enumeration(models, capped, best, stats)
