"""Minimal reward machine search and learned product-policy assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encode import encode
from .forward import ProductPolicy
from .machine import RewardMachineModel, as_model, run
from .mdp import LabeledMdp, build_product
from .negex import DEFAULT_TOL, ConflictGroups, NegativeExampleSet
from .ptp import PrefixTreePolicy
from .solve import DEFAULT_CAP, Enumeration, InfeasibleError, enumerate_models, maxsat, solve


class LearningError(RuntimeError):
    """No machine with at most ``u_max`` nodes fits the negative examples."""


class PolicyConflict(ValueError):
    """Two prefixes sent to the same product state disagree on the action distribution."""


@dataclass
class LearnResult:
    n_nodes: int
    models: list[RewardMachineModel]
    cost: int = 0
    capped: bool = False
    per_n: dict[int, dict] = field(default_factory=dict)


def trivial_model(n_props: int) -> RewardMachineModel:
    return RewardMachineModel(np.zeros((1, n_props), dtype=np.int64))


def models_at(neg: NegativeExampleSet | ConflictGroups, n: int, n_props: int, non_stuttering: bool = True,
              maxsat_mode: bool = False, cap: int = DEFAULT_CAP,
              upper: int | None = None) -> Enumeration:
    """All (optimal) models with exactly ``n`` nodes."""
    inst = encode(neg, n, n_props, non_stuttering, maxsat_mode)
    return maxsat(inst, cap, upper=upper) if maxsat_mode else enumerate_models(inst, cap)


def learn_minimal_models(neg: NegativeExampleSet | ConflictGroups, u_max: int, n_props: int,
                         non_stuttering: bool = True, maxsat_mode: bool = False,
                         cap: int = DEFAULT_CAP) -> LearnResult:
    """Smallest node count with a consistent machine, and all machines of that size.

    In MaxSAT mode the smallest ``n <= u_max`` reaching the overall minimum
    violation count wins.  An unreachable extra node changes no run, so the
    minimum never grows with ``n``: it is computed at ``u_max`` first and the
    smaller sizes are only asked whether they reach it.
    """
    if u_max < 1:
        raise ValueError("u_max must be at least 1")
    per_n: dict[int, dict] = {}
    if not maxsat_mode:
        for n in range(1, u_max + 1):
            inst = encode(neg, n, n_props, non_stuttering)
            res = solve(inst)
            per_n[n] = {"sat": res.sat, "vars": inst.n_vars, "clauses": len(inst.hard),
                        "wall": res.stats.wall}
            if res.sat:
                found = enumerate_models(inst, cap)
                per_n[n]["wall"] += found.stats.wall
                return LearnResult(n, found.models, 0, found.capped, per_n)
        raise LearningError(f"no machine with at most {u_max} nodes separates "
                            f"all {len(neg)} negative examples")
    try:
        top = models_at(neg, u_max, n_props, non_stuttering, True, cap)
    except InfeasibleError as exc:
        raise LearningError(f"hard clauses infeasible with {u_max} nodes") from exc
    per_n[u_max] = {"sat": True, "cost": top.cost, "wall": top.stats.wall}
    for n in range(1, u_max):
        try:
            found = models_at(neg, n, n_props, non_stuttering, True, cap, upper=top.cost)
        except InfeasibleError:
            per_n[n] = {"sat": False, "cost_above": top.cost}
            continue
        per_n[n] = {"sat": True, "cost": found.cost, "wall": found.stats.wall}
        return LearnResult(n, found.models, found.cost, found.capped, per_n)
    return LearnResult(u_max, top.models, top.cost, top.capped, per_n)


def sufficient_depth(mdp: LabeledMdp, u_max: int) -> int:
    """Prefix depth ``|S| * u_max^2`` that guarantees policy equivalence."""
    return mdp.n_states * u_max * u_max


def build_learned_product_policy(model, ptp: PrefixTreePolicy, mdp: LabeledMdp,
                                 mode: str = "exact", tol: float = DEFAULT_TOL) -> ProductPolicy:
    """Product policy of ``mdp x model`` read off a prefix tree policy.

    ``exact``: every ``(sigma, s)`` entry is copied to ``(s, run(sigma))``;
    disagreement beyond ``tol`` raises ``PolicyConflict``.
    ``aggregate``: rows are visit-weighted averages of all entries landing on
    the same product state (exact entries weigh 1).
    Product states that no entry reaches get the uniform row and ``known=False``.
    """
    if mode not in ("exact", "aggregate"):
        raise ValueError(f"unknown mode {mode!r}")
    model = as_model(model)
    prod = build_product(mdp, model)
    N, A = prod.n_states, prod.n_actions
    index = prod.index
    acc = np.zeros((N, A))
    seen = np.zeros(N, dtype=bool)
    for word, node in ptp.table.items():
        u = run(model, word)
        for s, p, n in zip(node.states, node.probs, node.visits):
            i = index.get((int(s), u))
            if i is None:
                raise PolicyConflict(f"state {s} with node {u} is not reachable in the product")
            if mode == "exact":
                if seen[i] and np.max(np.abs(acc[i] - p)) > tol:
                    raise PolicyConflict(f"prefix {word} disagrees with an earlier prefix at "
                                         f"state {s}, node {u}")
                if not seen[i]:
                    acc[i] = p
            else:
                acc[i] += p * (1.0 if np.isinf(n) else n)
            seen[i] = True
    probs = np.full((N, A), 1.0 / A)
    probs[seen] = acc[seen] / acc[seen].sum(axis=1, keepdims=True)
    return ProductPolicy(prod, probs, known=seen)
