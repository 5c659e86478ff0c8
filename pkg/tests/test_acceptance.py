"""Acceptance suite, one test (or pair of tests) per criterion.

Each criterion records a PASS/FAIL line that the terminal summary prints in
order.  Criteria that the current build cannot meet are marked ``xfail``
with ``strict=True``: the assertion is the real one, so a future fix turns
them into an unexpected pass.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from instances import soundness_instance, equivalence_instance
from oracles import brute_force, run_word
from rmlearn.encode import encode
from rmlearn.envs import make_blockworld, make_hallway, make_patrol, stack_avoid_minimal_model
from rmlearn.equivalence import check_policy_equivalence
from rmlearn.evaluate import trajectory_loglik
from rmlearn.experiments import (exact_pipeline, finite_sample, inject_false_positives,
                                 suboptimal_demos)
from rmlearn.forward import ProductPolicy, soft_bellman_solve
from rmlearn.irl import extract_rewards
from rmlearn.learn import build_learned_product_policy, learn_minimal_models, models_at
from rmlearn.machine import enumerate_renamings, run
from rmlearn.mdp import build_product, prefix_levels
from rmlearn.negex import (NegativeExampleSet, compress_negatives, exact_conflicts,
                           exact_negatives, statistical_negatives)
from rmlearn.ptp import estimate_ptp, induce_exact_ptp, simulate_demonstrations
from rmlearn.solve import enumerate_models, maxsat, maxsat_rc2, solve

TOL = 1e-6


def model_set(models):
    return {m.delta.tobytes() for m in models}


def renaming_set(model):
    return model_set(enumerate_renamings(model))


@lru_cache(maxsize=None)
def patrol_run(non_stuttering: bool):
    mdp, rm = make_patrol()
    t0 = time.perf_counter()
    r = exact_pipeline(mdp, rm, 6, 4, non_stuttering=non_stuttering, compress_ptp=False, tol=TOL)
    return mdp, rm, r, time.perf_counter() - t0


@lru_cache(maxsize=None)
def hallway_run():
    mdp, rm = make_hallway()
    return mdp, rm, exact_pipeline(mdp, rm, 9, 4, tol=TOL)


@lru_cache(maxsize=None)
def block_run(task: str, depth: int):
    mdp, rm = make_blockworld(task)
    t0 = time.perf_counter()
    r = exact_pipeline(mdp, rm, depth, 3, tol=TOL)
    return mdp, rm, r, time.perf_counter() - t0


def unsound_pairs(neg, truth) -> int:
    """Pairs that ``truth`` sends to the same node (should be none)."""
    nodes = {w: run(truth, w) for w in neg.words()}
    return sum(nodes[a] == nodes[b] for a, b in neg)


# ---------------------------------------------------------------- criterion 1

def test_c01_patrol_exact(criterion):
    mdp, rm, r, wall = patrol_run(True)
    res = r.result
    ok = (res.n_nodes == 4 and len(res.models) == 6
          and model_set(res.models) == renaming_set(rm.model) and wall < 60)
    criterion(1, ok, f"n*={res.n_nodes} models={len(res.models)} wall={wall:.1f}s")
    assert res.n_nodes == 4
    assert model_set(res.models) == renaming_set(rm.model)
    assert len(res.models) == 6
    assert wall < 60


# ---------------------------------------------------------------- criterion 2

def test_c02_compression_ratio(criterion):
    _, rm, raw, _ = patrol_run(False)
    _, _, ns, _ = patrol_run(True)
    ratio = len(raw.negatives) / len(ns.negatives)
    same = model_set(raw.result.models) == model_set(ns.result.models)
    ok = 5 <= ratio <= 20 and same
    criterion(2, ok, f"|E-| raw={len(raw.negatives)} non-stuttering={len(ns.negatives)} "
                     f"ratio={ratio:.1f} same_models={same} (soft target 30573/3076)")
    assert 5 <= ratio <= 20
    assert same


# ---------------------------------------------------------------- criterion 3

def test_c03_hallway(criterion):
    mdp, rm, r = hallway_run()
    res = r.result
    recovered = res.n_nodes == 4 and model_set(res.models) == renaming_set(rm.model)
    shortest = set()
    for m in res.models:
        # the learned node playing the role of the true node 3
        image = {}
        for w in r.ptp.table:
            image.setdefault(run(rm, w), run(m, w))
        target = image[3]
        for level in prefix_levels(mdp, 9, compress=True):
            hits = [mdp.format_word(w) for w in level.words if run(m, w) == target]
            if hits:
                shortest.update(hits)
                break
    ok = recovered and len(res.models) == 6 and shortest == {"A.H.B.H.C"}
    criterion(3, ok, f"models={len(res.models)} shortest={sorted(shortest)}")
    assert recovered and len(res.models) == 6
    assert shortest == {"A.H.B.H.C"}


# ---------------------------------------------------------------- criterion 4

def test_c04_stack(criterion):
    _, rm, r, wall = block_run("stack", 10)
    res = r.result
    ok = len(res.models) == 2 and model_set(res.models) == renaming_set(rm.model) and wall < 120
    criterion(4, ok, f"models={len(res.models)} wall={wall:.1f}s")
    assert model_set(res.models) == renaming_set(rm.model)
    assert len(res.models) == 2
    assert wall < 120


# ---------------------------------------------------------------- criterion 5

def test_c05_stack_avoid(criterion):
    mdp, _, r, _ = block_run("stack_avoid", 8)
    res = r.result
    minimal = model_set(res.models) == renaming_set(stack_avoid_minimal_model())
    four = models_at(r.negatives, 4, mdp.n_props, True)
    ok = len(res.models) == 2 and minimal and len(four.models) > 1000
    criterion(5, ok, f"u_max=3 models={len(res.models)} u_max=4 models={len(four.models)}"
                     f"{' (capped)' if four.capped else ''}")
    assert len(res.models) == 2 and minimal
    assert len(four.models) > 1000


# ---------------------------------------------------------------- criterion 6

N_EQUIV = 50


@lru_cache(maxsize=None)
def equivalence_case(k: int):
    inst = equivalence_instance(k)
    l = inst.mdp.n_states * inst.u_max ** 2
    sets, last = [], None
    for depth in (l, l + 1, l + 2):
        ptp = induce_exact_ptp(inst.mdp, inst.truth.model, inst.policy, depth, compress=True)
        groups = exact_conflicts(ptp, TOL)
        res = learn_minimal_models(groups, inst.u_max, inst.mdp.n_props, True)
        sets.append(model_set(res.models))
        if last is None:
            last = (ptp, groups, res)
    ptp, groups, res = last
    gaps = [check_policy_equivalence(inst.mdp, inst.policy,
                                     build_learned_product_policy(m, ptp, inst.mdp),
                                     tol=1e-5).max_gap
            for m in res.models]
    return inst, groups, res, gaps, sets


def test_c06_depth_equivalence_suite(criterion):
    t0 = time.perf_counter()
    bad_equiv, unstable, n_models = [], [], 0
    for k in range(N_EQUIV):
        inst, _, res, gaps, sets = equivalence_case(k)
        n_models += len(res.models)
        if max(gaps) > 1e-5:
            bad_equiv.append(k)
        if not sets[0] == sets[1] == sets[2]:
            unstable.append(k)
    wall = time.perf_counter() - t0
    ok = not bad_equiv and not unstable and wall < 600
    criterion(6, ok, f"instances={N_EQUIV} models={n_models} not_equivalent={bad_equiv} "
                     f"unstable={unstable} wall={wall:.1f}s")
    assert not bad_equiv
    assert not unstable
    assert wall < 600


# ---------------------------------------------------------------- criterion 7

N_PROPOSITION = 100


@lru_cache(maxsize=None)
def soundness_case(k: int):
    inst, depth = soundness_instance(k)
    ptp = induce_exact_ptp(inst.mdp, inst.truth.model, inst.policy, depth, compress=inst.compress)
    neg = exact_negatives(ptp, TOL)
    res = learn_minimal_models(neg, inst.u_max, inst.mdp.n_props, inst.compress)
    worst = 0.0
    for m in res.models:
        learned = build_learned_product_policy(m, ptp, inst.mdp, "exact", TOL)
        again = induce_exact_ptp(inst.mdp, m, learned, depth, compress=inst.compress)
        worst = max(worst, ptp.max_abs_diff(again))
    return inst, neg, res, worst


def test_c07_soundness_suite(criterion):
    failures, worst_all = [], 0.0
    for k in range(N_PROPOSITION):
        _, _, _, worst = soundness_case(k)
        worst_all = max(worst_all, worst)
        if worst > 1e-6:
            failures.append(k)
    criterion(7, not failures, f"instances={N_PROPOSITION} failures={failures} "
                               f"max_linf={worst_all:.2e}")
    assert not failures


# ---------------------------------------------------------------- criterion 8

def test_c08_lemma_soundness(criterion):
    counts = {}
    _, rm, r, _ = patrol_run(False)
    counts["patrol"] = unsound_pairs(r.negatives, rm)
    _, rm, r, _ = patrol_run(True)
    counts["patrol-ns"] = unsound_pairs(r.negatives, rm)
    _, rm, r = hallway_run()
    counts["hallway"] = unsound_pairs(r.negatives, rm)
    for task, depth in (("stack", 10), ("stack_avoid", 8)):
        _, rm, r, _ = block_run(task, depth)
        counts[task] = unsound_pairs(r.negatives, rm)
    counts["equivalence"] = 0
    for k in range(N_EQUIV):
        inst, groups, *_ = equivalence_case(k)
        d = inst.truth.model.delta.tolist()
        counts["equivalence"] += sum(run_word(d, a) == run_word(d, b)
                                 for a, b, _ in groups.iter_pairs())
    counts["soundness"] = sum(unsound_pairs(soundness_case(k)[1], soundness_case(k)[0].truth)
                                for k in range(N_PROPOSITION))
    total = sum(counts.values())
    criterion(8, total == 0, " ".join(f"{k}={v}" for k, v in counts.items()))
    assert total == 0


# ---------------------------------------------------------------- criterion 9

SEEDS = (0, 1, 2)
SIZES = (1000, 10_000, 100_000)


@lru_cache(maxsize=None)
def stack_samples(seed: int):
    return finite_sample("stack", SIZES, seed=seed)


def test_c09_finite_sample_trend(criterion):
    detail = []
    ok = True
    for seed in SEEDS:
        rows = stack_samples(seed)
        counts = [r["models"] for r in rows]
        trend = all(a >= b for a, b in zip(counts, counts[1:]))
        truth = all(r["has_truth"] for r in rows)
        ok = ok and trend and truth
        detail.append(f"seed{seed}={counts}")
    criterion(9, ok, "non-increasing with truth: " + " ".join(detail))
    assert ok


@pytest.mark.xfail(strict=True, reason="prefix-tree convention leaves 16 models at 1e5 demos")
def test_c09_finite_sample_at_most_four(criterion):
    last = [stack_samples(seed)[-1]["models"] for seed in SEEDS]
    ok = all(c <= 4 for c in last)
    criterion(9, ok, f"models at 1e5 = {last} (need <= 4)")
    assert ok


# --------------------------------------------------------------- criterion 10

def test_c10_maxsat_robustness(criterion):
    mdp, rm = make_patrol()
    policy = soft_bellman_solve(build_product(mdp, rm))
    ptp = induce_exact_ptp(mdp, rm.model, policy, 5)
    neg = compress_negatives(exact_negatives(ptp, TOL))
    noisy, added = inject_false_positives(neg, rm, neg.words(), 0.02, seed=0)
    hard_ok = True
    for n in range(1, 5):
        res = solve(encode(noisy, n, mdp.n_props, True))
        if res.sat:
            hard_ok = False
    inst = encode(noisy, 4, mdp.n_props, True, maxsat=True)
    best = maxsat(inst)
    ok = (hard_ok and best.cost == len(added)
          and model_set(best.models) == renaming_set(rm.model))
    criterion(10, ok, f"pairs={len(noisy)} injected={len(added)} hard_infeasible={hard_ok} "
                      f"cost={best.cost} models={len(best.models)}")
    assert hard_ok
    assert best.cost == len(added)
    assert model_set(best.models) == renaming_set(rm.model)


# --------------------------------------------------------------- criterion 11

def round_trip_gap(mdp, machine, policy) -> float:
    ex = extract_rewards(policy.product, policy)
    again = soft_bellman_solve(build_product(mdp, ex.machine))
    return float(np.max(np.abs(again.probs - policy.probs)))


def test_c11_irl_round_trip(criterion):
    gaps = {}
    for name, (mdp, rm) in (("patrol", make_patrol()), ("stack", make_blockworld("stack"))):
        policy = soft_bellman_solve(build_product(mdp, rm))
        gaps[name] = round_trip_gap(mdp, rm, policy)
    ok = max(gaps.values()) <= 1e-6
    criterion(11, ok, " ".join(f"{k}={v:.1e}" for k, v in gaps.items()))
    assert ok


# --------------------------------------------------------------- criterion 12

def test_c12_uniform_loglik(criterion):
    mdp, rm = make_patrol()
    assert mdp.n_actions == 4
    prod = build_product(mdp, rm)
    uniform = ProductPolicy(prod, np.full((prod.n_states, 4), 0.25))
    demos = simulate_demonstrations(mdp, rm.model, uniform, 500, 22, seed=0)
    mean = trajectory_loglik(mdp, rm.model, uniform, demos).mean
    target = 22 * np.log(0.25)
    # the published row truncates to two decimals
    printed = np.trunc(mean * 100) / 100
    ok = abs(mean - target) <= 1e-6 and printed == -30.49
    criterion(12, ok, f"mean={mean:.6f} target={target:.6f} printed={printed:.2f}")
    assert abs(mean - target) <= 1e-6
    assert printed == -30.49


# --------------------------------------------------------------- criterion 13

@pytest.mark.xfail(strict=True, reason="5e4 demos leave the toggle's st2/st3 moves at u1 open")
def test_c13_suboptimal_demos(criterion):
    mdp, model, demos = suboptimal_demos(50_000, 20, seed=0)
    ptp = estimate_ptp(demos, mdp, 10, compress=True)
    neg = statistical_negatives(ptp, 0.05)
    res = learn_minimal_models(neg, 3, mdp.n_props, True)
    ok = len(res.models) == 1 and res.models[0] == model
    criterion(13, ok, f"nodes={res.n_nodes} models={len(res.models)} "
                      f"truth_found={any(m == model for m in res.models)}")
    assert ok


# --------------------------------------------------------------- criterion 14

def random_negatives(rng, n_props: int, n_pairs: int, max_len: int) -> NegativeExampleSet:
    neg = NegativeExampleSet()
    # a short alphabet may not have n_pairs distinct pairs
    for _ in range(50 * n_pairs):
        if len(neg) >= n_pairs:
            break
        a = tuple(int(x) for x in rng.integers(n_props, size=int(rng.integers(1, max_len + 1))))
        b = tuple(int(x) for x in rng.integers(n_props, size=int(rng.integers(1, max_len + 1))))
        if a != b:
            neg.add(a, b)
    return neg


def cross_check(neg, n, n_props, ns):
    """Mismatches between solvers and brute force on one instance (empty list = agree)."""
    pairs = list(neg)
    consistent, best, argbest = brute_force(pairs, n, n_props, ns)
    out = []
    # the cap must not hide models: allow every table
    found = enumerate_models(encode(neg, n, n_props, ns), cap=n ** (n * n_props) + 1)
    if model_set(found.models) != model_set(consistent):
        out.append("enumerate")
    if pairs:
        for name, fn in (("lsu", maxsat), ("rc2", maxsat_rc2)):
            r = fn(encode(neg, n, n_props, ns, maxsat=True), cap=n ** (n * n_props) + 1)
            if r.cost != best or model_set(r.models) != model_set(argbest):
                out.append(name)
    return out


def small_instances():
    rng = np.random.default_rng(14)
    for k in range(60):
        n = int(rng.integers(1, 4))
        n_props = int(rng.integers(1, 4 if n == 3 else 8))
        if n * n_props * n > 30:
            continue
        yield f"random{k}", random_negatives(rng, n_props, int(rng.integers(1, 25)), 5), \
            n, n_props, bool(k % 2)
    for k in range(N_EQUIV):
        inst, groups, *_ = equivalence_case(k)
        P = inst.mdp.n_props
        if inst.u_max ** 2 * P <= 30 and len(groups.words()) <= 400:
            yield f"equivalence{k}", groups.to_pairs(), inst.u_max, P, True
    for k in range(N_PROPOSITION):
        inst, neg, *_ = soundness_case(k)
        P = inst.mdp.n_props
        if inst.u_max ** 2 * P <= 30 and len(neg.words()) <= 400 and len(neg) <= 2000:
            yield f"proposition{k}", neg, inst.u_max, P, inst.compress


def test_c14_solver_cross_validation(criterion):
    checked, mismatches = 0, []
    for name, neg, n, n_props, ns in small_instances():
        checked += 1
        bad = cross_check(neg, n, n_props, ns)
        if bad:
            mismatches.append((name, bad))
    ok = not mismatches and checked > 50
    criterion(14, ok, f"instances={checked} mismatches={mismatches}")
    assert not mismatches
    assert checked > 50
