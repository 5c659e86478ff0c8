import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exact_ptp_oracle, random_machine, random_mdp
from rmlearn.forward import soft_bellman_solve
from rmlearn.machine import MachineError, RewardMachineModel
from rmlearn.mdp import LabeledMdp, build_product
from rmlearn.ptp import Demonstrations, estimate_ptp, induce_exact_ptp, simulate_demonstrations


def instance(seed, n_nodes=2, ns=True):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, int(rng.integers(2, 5)), int(rng.integers(2, 4)), 2)
    rm = random_machine(rng, n_nodes, 2, non_stuttering=ns)
    return mdp, rm, soft_bellman_solve(build_product(mdp, rm))


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(1, 5), st.booleans())
def test_exact_ptp_matches_oracle(seed, depth, compress):
    mdp, rm, pol = instance(seed, ns=compress or seed % 2 == 0)
    ptp = induce_exact_ptp(mdp, rm.model, pol, depth, compress=compress)
    want = exact_ptp_oracle(mdp, rm.model, pol, depth, compress)
    got = {(w, s): p for w, s, p, _ in ptp.items()}
    assert got.keys() == want.keys()
    for key, p in got.items():
        assert np.allclose(p, want[key])
    assert all(np.isinf(n) for *_, n in ptp.items())


def test_compressed_needs_non_stuttering():
    rng = np.random.default_rng(0)
    mdp = random_mdp(rng, 3, 2, 2)
    rm = random_machine(rng, 2, 2, non_stuttering=False)
    while rm.model.delta[rm.model.delta[0, 0], 0] == rm.model.delta[0, 0]:
        rm = random_machine(rng, 2, 2, non_stuttering=False)
    pol = soft_bellman_solve(build_product(mdp, rm))
    with pytest.raises(MachineError):
        induce_exact_ptp(mdp, rm.model, pol, 3, compress=True)


def test_restrict_and_lookup():
    mdp, rm, pol = instance(3)
    ptp = induce_exact_ptp(mdp, rm.model, pol, 4)
    small = ptp.restrict(2)
    assert max(len(w) for w in small.table) <= 2
    assert small.max_abs_diff(induce_exact_ptp(mdp, rm.model, pol, 2)) == 0
    w, s, p, _ = next(ptp.items())
    assert np.array_equal(ptp.get(w, s)[0], p)
    assert ptp.get((9, 9), 0) is None


def test_simulation_is_seeded_and_feasible():
    mdp, rm, pol = instance(5)
    a = simulate_demonstrations(mdp, rm.model, pol, 50, 7, seed=1)
    b = simulate_demonstrations(mdp, rm.model, pol, 50, 7, seed=1)
    c = simulate_demonstrations(mdp, rm.model, pol, 50, 7, seed=2)
    assert [t[0].tolist() for t in a] == [t[0].tolist() for t in b]
    assert [t[0].tolist() for t in a] != [t[0].tolist() for t in c]
    a.validate(mdp)
    assert len(a) == 50 and all(len(acts) == 7 for _, acts in a)


def test_estimate_counts_by_hand():
    # two states with labels p, q; action 0 stays, action 1 switches
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[1, 0, 1] = P[0, 1, 1] = P[1, 1, 0] = 1
    mdp = LabeledMdp.from_dense(P, [1, 0], 0.9, [0, 1], ("p", "q"))
    demos = Demonstrations.from_arrays(np.array([[0, 0, 1], [0, 1, 1], [0, 0, 0]]),
                                       np.array([[0, 1], [1, 0], [0, 0]]))
    raw = estimate_ptp(demos, mdp, 2)
    p, n = raw.get((0,), 0)
    assert n == 3 and np.allclose(p, [2 / 3, 1 / 3])
    assert raw.get((0, 0), 0)[1] == 2 and raw.get((0, 1), 1)[1] == 1
    assert not raw.exact
    comp = estimate_ptp(demos, mdp, 2, compress=True)
    p, n = comp.get((0,), 0)
    # the stuttering steps pool into the word (p,)
    assert n == 5 and np.allclose(p, [3 / 5, 2 / 5])
    with pytest.raises(ValueError):
        estimate_ptp(Demonstrations(), mdp, 2)


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.booleans())
def test_estimate_converges_to_exact(seed, compress):
    mdp, rm, pol = instance(seed, ns=True)
    exact = induce_exact_ptp(mdp, rm.model, pol, 3, compress=compress)
    demos = simulate_demonstrations(mdp, rm.model, pol, 20_000, 6, seed)
    est = estimate_ptp(demos, mdp, 3, compress=compress)
    assert set(est.table) <= set(exact.table)
    for w, s, p, n in est.items():
        if n >= 2000:
            assert np.max(np.abs(p - exact.get(w, s)[0])) < 0.08


def test_trivial_machine_tree_is_node_free():
    # with one node every word carries the same row at a state
    mdp, _, _ = instance(11)
    m = RewardMachineModel(np.zeros((1, 2), dtype=int))
    from rmlearn.machine import RewardMachine
    rm = RewardMachine(m, [[0.3, -0.2]])
    pol = soft_bellman_solve(build_product(mdp, rm))
    ptp = induce_exact_ptp(mdp, m, pol, 4)
    for s, (_, probs, _) in ptp.by_state().items():
        assert np.allclose(probs, probs[0])
