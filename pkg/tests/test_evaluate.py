import numpy as np
import pytest

from rmlearn.envs import make_blockworld, make_patrol, make_patrol_transfer
from rmlearn.evaluate import (rollout_returns, train_test_split, trajectory_loglik,
                              transfer_evaluate)
from rmlearn.forward import ProductPolicy, soft_bellman_solve
from rmlearn.learn import trivial_model
from rmlearn.mdp import MdpError, build_product
from rmlearn.ptp import Demonstrations, induce_exact_ptp, simulate_demonstrations


def test_loglik_by_hand():
    mdp, rm = make_patrol()
    pol = soft_bellman_solve(build_product(mdp, rm))
    demos = simulate_demonstrations(mdp, rm.model, pol, 5, 4, 0)
    ll = trajectory_loglik(mdp, rm.model, pol, demos)
    for k, (states, actions) in enumerate(demos):
        u = rm.model.delta[0, mdp.labels[states[0]]]
        want = 0.0
        for t, a in enumerate(actions):
            want += np.log(pol.row(int(states[t]), int(u))[a])
            u = rm.model.delta[u, mdp.labels[states[t + 1]]]
        assert ll.per_trajectory[k] == pytest.approx(want)
    assert ll.lines()[0].startswith("mean_loglik=")


def test_zero_probability_actions():
    mdp, rm = make_patrol()
    prod = build_product(mdp, rm)
    probs = np.zeros((prod.n_states, 4))
    probs[:, 0] = 1
    pol = ProductPolicy(prod, probs)
    demos = simulate_demonstrations(mdp, rm.model, ProductPolicy(prod, np.full_like(probs, 0.25)),
                                    20, 3, 0)
    ll = trajectory_loglik(mdp, rm.model, pol, demos)
    assert ll.floored > 0
    with pytest.raises(ValueError):
        trajectory_loglik(mdp, rm.model, pol, demos, floor=None)


def test_split_is_seeded_partition():
    demos = Demonstrations([(np.array([0, 0]), np.array([k % 4])) for k in range(50)])
    train, test = train_test_split(demos, 0.8, seed=3)
    assert len(train) == 40 and len(test) == 10
    again = train_test_split(demos, 0.8, seed=3)[1]
    assert [a.tolist() for _, a in test] == [a.tolist() for _, a in again]


def test_rollouts_of_true_policy_beat_uniform():
    mdp, rm = make_blockworld("stack")
    prod = build_product(mdp, rm)
    pol = soft_bellman_solve(prod)
    good = rollout_returns(mdp, rm.model, pol, rm, 500, 40, 0)[1]
    flat = build_product(mdp, trivial_model(mdp.n_props))
    uniform = ProductPolicy(flat, np.full((flat.n_states, mdp.n_actions), 1 / mdp.n_actions))
    bad = rollout_returns(mdp, trivial_model(mdp.n_props), uniform, rm, 500, 40, 0)[1]
    assert good > bad


def test_transfer():
    mdp, rm = make_patrol()
    target, truth = make_patrol_transfer()
    pol = soft_bellman_solve(build_product(mdp, rm))
    ptp = induce_exact_ptp(mdp, rm.model, pol, 6, compress=True)
    tpol = soft_bellman_solve(build_product(target, truth))
    demos = simulate_demonstrations(target, truth.model, tpol, 200, 15, 0)
    moved = transfer_evaluate(rm.model, ptp, mdp, target, demos).mean
    flat = build_product(target, trivial_model(4))
    uniform = ProductPolicy(flat, np.full((flat.n_states, 4), 0.25))
    assert moved > trajectory_loglik(target, trivial_model(4), uniform, demos).mean
    # same rewards re-planned: matches the true target policy's likelihood
    best = trajectory_loglik(target, truth.model, tpol, demos).mean
    assert moved == pytest.approx(best, abs=1e-4)
    hall, _ = make_blockworld("stack")
    with pytest.raises(MdpError):
        transfer_evaluate(rm.model, ptp, mdp, hall, demos)


def test_deterministic_matching_policy_scores_zero():
    mdp, rm = make_blockworld("stack")
    prod = build_product(mdp, rm)
    probs = np.zeros((prod.n_states, mdp.n_actions))
    probs[:, 4] = 1
    pol = ProductPolicy(prod, probs)
    demos = simulate_demonstrations(mdp, rm.model, pol, 10, 6, 0)
    ll = trajectory_loglik(mdp, rm.model, pol, demos)
    assert np.all(ll.per_trajectory == 0) and ll.floored == 0


def test_uniform_policy_value():
    mdp, _ = make_patrol()
    flat = build_product(mdp, trivial_model(4))
    uniform = ProductPolicy(flat, np.full((flat.n_states, 4), 0.25))
    demos = simulate_demonstrations(mdp, trivial_model(4), uniform, 30, 22, 1)
    assert trajectory_loglik(mdp, trivial_model(4), uniform, demos).mean == \
        pytest.approx(22 * np.log(0.25))


def test_loglik_additive_over_trajectories():
    mdp, rm = make_patrol()
    pol = soft_bellman_solve(build_product(mdp, rm))
    demos = simulate_demonstrations(mdp, rm.model, pol, 12, 5, 2)
    whole = trajectory_loglik(mdp, rm.model, pol, demos).per_trajectory
    parts = np.concatenate([
        trajectory_loglik(mdp, rm.model, pol, demos.subset(range(0, 5))).per_trajectory,
        trajectory_loglik(mdp, rm.model, pol, demos.subset(range(5, 12))).per_trajectory])
    assert np.allclose(whole, parts)
