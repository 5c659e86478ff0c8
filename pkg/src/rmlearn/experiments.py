"""End-to-end pipelines behind the benchmark tables.

Each ``table*`` function returns a list of row dicts; the CLI writes them as
tab-separated files.  Everything is seeded.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .envs import (make_blockworld, make_hallway, make_patrol, stack_avoid_minimal_model,
                   two_node_block_model, random_node_policy)
from .evaluate import rollout_returns
from .forward import ProductPolicy, soft_bellman_solve
from .irl import baseline_maxent_irl
from .learn import (LearnResult, build_learned_product_policy, learn_minimal_models,
                    models_at, trivial_model)
from .machine import RewardMachine, RewardMachineModel, as_model, is_renaming_of, run
from .mdp import LabeledMdp, build_product
from .negex import (DEFAULT_TOL, NegativeExampleSet, canonical_pair, compress_negatives,
                    exact_negatives, statistical_negatives)
from .ptp import PrefixTreePolicy, estimate_ptp, induce_exact_ptp, simulate_demonstrations
from .solve import DEFAULT_CAP

TASKS = ("patrol", "hallway", "stack", "stack_avoid")


def load_task(name: str, **kw) -> tuple[LabeledMdp, RewardMachine]:
    name = name.replace("-", "_")
    if name == "patrol":
        return make_patrol(**kw)
    if name == "hallway":
        return make_hallway(**kw)
    if name in ("stack", "stack_avoid"):
        return make_blockworld(name, **kw)
    raise ValueError(f"unknown task {name!r}; choose from {', '.join(TASKS)}")


@dataclass
class ExactRun:
    ptp: PrefixTreePolicy
    negatives: NegativeExampleSet
    result: LearnResult
    timings: dict[str, float] = field(default_factory=dict)

    def all_renamings_of(self, model) -> bool:
        return all(is_renaming_of(m, model) for m in self.result.models)


def exact_pipeline(mdp: LabeledMdp, truth: RewardMachine, depth: int, u_max: int,
                   non_stuttering: bool = True, compress_ptp: bool | None = None,
                   tol: float = DEFAULT_TOL, lam: float = 1.0,
                   cap: int = DEFAULT_CAP) -> ExactRun:
    """Forward-solve ``truth``, induce the exact depth-``depth`` PTP, learn.

    ``compress_ptp`` (default: ``non_stuttering``) keys the tree by stutter-free
    words.  With ``non_stuttering`` and a raw tree the negatives are compressed
    after extraction instead.
    """
    compress_ptp = non_stuttering if compress_ptp is None else compress_ptp
    t = {}
    t0 = time.perf_counter()
    policy = soft_bellman_solve(build_product(mdp, truth), lam)
    t["forward"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ptp = induce_exact_ptp(mdp, truth.model, policy, depth, compress=compress_ptp)
    t["ptp"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    neg = exact_negatives(ptp, tol)
    if non_stuttering and not compress_ptp:
        neg = compress_negatives(neg)
    t["negatives"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = learn_minimal_models(neg, u_max, mdp.n_props, non_stuttering, cap=cap)
    t["solve"] = time.perf_counter() - t0
    return ExactRun(ptp, neg, res, t)


def _row(task, depth, mdp, run_: ExactRun, **extra) -> dict:
    row = {"task": task, "depth": depth, "S": mdp.n_states, "A": mdp.n_actions,
           "negatives": len(run_.negatives), "nodes": run_.result.n_nodes,
           "models": len(run_.result.models), "solve_s": round(run_.timings["solve"], 3)}
    row.update(extra)
    return row


def table1(tol: float = DEFAULT_TOL) -> list[dict]:
    """Patrol with and without stutter compression, and the hallway variant."""
    rows = []
    mdp, rm = make_patrol()
    for ns in (False, True):
        r = exact_pipeline(mdp, rm, 6, 4, non_stuttering=ns, compress_ptp=False, tol=tol)
        rows.append(_row("patrol", 6, mdp, r, non_stutter=ns,
                         renamings=r.all_renamings_of(rm.model)))
    mdp, rm = make_hallway()
    r = exact_pipeline(mdp, rm, 9, 4, tol=tol)
    rows.append(_row("patrol-hallway", 9, mdp, r, non_stutter=True,
                     renamings=r.all_renamings_of(rm.model)))
    return rows


def table2(tol: float = DEFAULT_TOL, cap: int = DEFAULT_CAP) -> list[dict]:
    """Blockworld stack and stack-avoid; the latter also enumerated at four nodes."""
    rows = []
    mdp, rm = make_blockworld("stack")
    r = exact_pipeline(mdp, rm, 10, 3, tol=tol, cap=cap)
    rows.append(_row("stack", 10, mdp, r, umax=3, renamings=r.all_renamings_of(rm.model)))
    mdp, rm = make_blockworld("stack_avoid")
    r = exact_pipeline(mdp, rm, 8, 3, tol=tol, cap=cap)
    rows.append(_row("stack-avoid", 8, mdp, r, umax=3,
                     renamings=r.all_renamings_of(stack_avoid_minimal_model())))
    t0 = time.perf_counter()
    four = models_at(r.negatives, 4, mdp.n_props, True, cap=cap)
    rows.append({"task": "stack-avoid", "depth": 8, "S": mdp.n_states, "A": mdp.n_actions,
                 "negatives": len(r.negatives), "nodes": 4,
                 "models": f">={cap}" if four.capped else len(four.models),
                 "solve_s": round(time.perf_counter() - t0, 3), "umax": 4, "renamings": False})
    return rows


# ------------------------------------------------------------ finite samples

def finite_sample(task: str, sizes, horizon: int = 20, alpha: float = 0.05, depth: int = 10,
                  u_max: int = 3, seed: int = 0, reference: RewardMachineModel | None = None,
                  lam: float = 1.0) -> list[dict]:
    """Solution counts for nested demonstration sets of growing size.

    One pool of ``max(sizes)`` trajectories is simulated and each size uses
    its first trajectories, so larger sets contain the smaller ones.
    """
    mdp, rm = load_task(task)
    if reference is None:
        reference = stack_avoid_minimal_model() if task.replace("-", "_") == "stack_avoid" \
            else rm.model
    policy = soft_bellman_solve(build_product(mdp, rm), lam)
    sizes = sorted(int(n) for n in sizes)
    pool = simulate_demonstrations(mdp, rm.model, policy, sizes[-1], horizon, seed)
    rows = []
    for n in sizes:
        t0 = time.perf_counter()
        ptp = estimate_ptp(pool.subset(range(n)), mdp, depth, compress=True)
        neg = statistical_negatives(ptp, alpha)
        res = learn_minimal_models(neg, u_max, mdp.n_props, True)
        rows.append({"task": task, "demos": n, "horizon": horizon, "negatives": len(neg),
                     "alpha": alpha, "seed": seed, "nodes": res.n_nodes,
                     "models": len(res.models),
                     "has_truth": any(is_renaming_of(m, reference) for m in res.models),
                     "wall_s": round(time.perf_counter() - t0, 3)})
    return rows


def table5(seed: int = 0, sizes=(1000, 3000, 5000, 10_000, 100_000), **kw) -> list[dict]:
    return finite_sample("stack", sizes, seed=seed, **kw)


def table6(seed: int = 0, sizes=(200, 500, 1000, 100_000), **kw) -> list[dict]:
    return finite_sample("stack_avoid", sizes, seed=seed, **kw)


# --------------------------------------------------------- node-bound sweep

def table7(seed: int = 0, n_traj: int = 2500, horizon: int = 10, alpha: float = 0.05,
           depth: int = 10, bounds=(2, 3, 4), n_rollouts: int = 10_000,
           rollout_horizon: int = 100, reward: float = 10.0, baselines: bool = True,
           baseline_iters: int = 300) -> list[dict]:
    """MaxSAT models under several node bounds, scored by ground-truth rollouts.

    Each learned model gets the aggregate product policy read off the
    empirical PTP; actions follow it while the reward is paid by the true
    machine.  Flat MaxEnt IRL with per-state and per-label features is the
    baseline.
    """
    mdp, rm = make_patrol(reward=reward)
    truth_policy = soft_bellman_solve(build_product(mdp, rm))
    demos = simulate_demonstrations(mdp, rm.model, truth_policy, n_traj, horizon, seed)
    ptp = estimate_ptp(demos, mdp, depth, compress=True)
    neg = statistical_negatives(ptp, alpha)
    rows = []
    for u in bounds:
        res = learn_minimal_models(neg, u, mdp.n_props, True, maxsat_mode=True)
        model = res.models[0]
        learned = build_learned_product_policy(model, ptp, mdp, "aggregate")
        disc, raw = rollout_returns(mdp, model, learned, rm, n_rollouts, rollout_horizon, seed)
        rows.append({"model": f"umax={u}", "negatives": len(neg), "used": len(neg) - res.cost,
                     "nodes": res.n_nodes, "rollouts": n_rollouts, "horizon": rollout_horizon,
                     "return": round(raw, 4), "discounted": round(disc, 4)})
    if baselines:
        for name, feats in (("D-IRL", "dense"), ("F-IRL", "label")):
            _, flat = baseline_maxent_irl(mdp, demos, feats, n_iter=baseline_iters)
            disc, raw = rollout_returns(mdp, trivial_model(mdp.n_props), flat, rm, n_rollouts,
                                        rollout_horizon, seed)
            rows.append({"model": name, "negatives": "-", "used": "-", "nodes": 1,
                         "rollouts": n_rollouts, "horizon": rollout_horizon,
                         "return": round(raw, 4), "discounted": round(disc, 4)})
    return rows


# ------------------------------------------------------- robustness helpers

def inject_false_positives(neg: NegativeExampleSet, truth, words, fraction: float,
                           seed: int = 0) -> tuple[NegativeExampleSet, list]:
    """Add ``round(fraction * |neg|)`` pairs that ``truth`` sends to the same node."""
    model = as_model(truth)
    words = sorted(set(map(tuple, words)), key=lambda w: (len(w), w))
    by_node: dict[int, list] = {}
    for w in words:
        by_node.setdefault(run(model, w), []).append(w)
    groups = [g for g in by_node.values() if len(g) > 1]
    if not groups:
        raise ValueError("no two words share a node; nothing to inject")
    want = int(round(fraction * len(neg)))
    rng = np.random.default_rng(seed)
    out = NegativeExampleSet(dict(neg.pairs), dict(neg.weights))
    added = []
    tries = 0
    while len(added) < want:
        tries += 1
        if tries > 100 * want + 1000:
            raise ValueError("could not find enough fresh same-node pairs")
        g = groups[rng.integers(len(groups))]
        i, j = rng.choice(len(g), 2, replace=False)
        key = canonical_pair(g[i], g[j])
        if key in out.pairs:
            continue
        out.add(*key)
        added.append(key)
    return out, added


def suboptimal_demos(n_traj: int = 50_000, horizon: int = 20, seed: int = 0,
                     concentration: float = 1.0):
    """Blockworld demos from an arbitrary node-dependent policy on a 2-node model."""
    mdp, _ = make_blockworld("stack")
    model = two_node_block_model()
    prod = build_product(mdp, model)
    policy = ProductPolicy(prod, random_node_policy(prod, seed, concentration))
    return mdp, model, simulate_demonstrations(mdp, model, policy, n_traj, horizon, seed)


__all__ = ["ExactRun", "exact_pipeline", "finite_sample", "inject_false_positives",
           "load_task", "suboptimal_demos", "table1", "table2", "table5", "table6", "table7"]
