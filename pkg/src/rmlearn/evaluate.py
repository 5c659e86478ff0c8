"""Held-out log-likelihood, rollout returns and transfer to a relabeled MDP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ProductPolicy, policy_return, soft_bellman_solve
from .irl import extract_rewards
from .learn import build_learned_product_policy
from .machine import RewardMachine, SyncMachine, as_model
from .mdp import LabeledMdp, MdpError, build_product
from .ptp import Demonstrations, PrefixTreePolicy

LOG_FLOOR = 1e-12


@dataclass
class Loglik:
    per_trajectory: np.ndarray
    floored: int = 0

    @property
    def mean(self) -> float:
        return float(self.per_trajectory.mean()) if len(self.per_trajectory) else 0.0

    def lines(self) -> list[str]:
        return [f"mean_loglik={self.mean:.6f}", f"trajectories={len(self.per_trajectory)}",
                f"floored_steps={self.floored}"]


def trajectory_loglik(mdp: LabeledMdp, model, policy: ProductPolicy, demos: Demonstrations,
                      floor: float | None = LOG_FLOOR) -> Loglik:
    """Sum of ``log pi(a_t | s_t, u_t)`` per trajectory, tracking ``u_t`` along the labels.

    Actions with probability below ``floor`` count as ``log(floor)``; with
    ``floor=None`` they raise instead.
    """
    model = as_model(model)
    if model.n_props != mdp.n_props:
        raise MdpError("alphabet mismatch")
    index = policy.product.index
    delta, labels = model.delta, mdp.labels
    out = np.zeros(len(demos))
    floored = 0
    for k, (states, actions) in enumerate(demos):
        u = int(delta[model.initial, labels[states[0]]])
        total = 0.0
        for t, a in enumerate(actions):
            s = int(states[t])
            i = index.get((s, u))
            if i is None:
                raise MdpError(f"trajectory {k} visits ({s}, {u}) outside the product")
            p = policy.probs[i, a]
            if floor is None and p <= 0:
                raise ValueError(f"trajectory {k} step {t}: action {a} has probability zero")
            if floor is not None and p < floor:
                p = floor
                floored += 1
            total += np.log(p)
            u = int(delta[u, labels[states[t + 1]]])
        out[k] = total
    return Loglik(out, floored)


def train_test_split(demos: Demonstrations, train_frac: float = 0.9,
                     seed: int = 0) -> tuple[Demonstrations, Demonstrations]:
    order = np.random.default_rng(seed).permutation(len(demos))
    cut = int(round(train_frac * len(demos)))
    return demos.subset(order[:cut]), demos.subset(order[cut:])


def rollout_returns(mdp: LabeledMdp, model, policy: ProductPolicy, truth: RewardMachine,
                    n_rollouts: int = 1000, horizon: int = 100,
                    seed: int = 0) -> tuple[float, float]:
    """Mean discounted and raw return of ``policy`` scored by the ground-truth machine.

    Actions follow ``policy`` on ``mdp x model``; rewards come from ``truth``
    tracked in parallel through the synchronized product.
    """
    model = as_model(model)
    sync = SyncMachine(model, truth.model).as_model()
    prod = build_product(mdp, sync)
    n2 = truth.n_nodes
    # synchronized node u1 * n2 + u2 is paid by the truth's row u2
    prod = prod.with_rewards(np.tile(truth.rewards, (model.n_nodes, 1)))
    index = policy.product.index
    u1 = prod.pairs[:, 1] // n2
    rows = np.array([index[(int(s), int(u))] for s, u in zip(prod.pairs[:, 0], u1)])
    lifted = ProductPolicy(prod, policy.probs[rows])
    return policy_return(prod, lifted, n_rollouts, horizon, seed)


def transfer_evaluate(model, source_ptp: PrefixTreePolicy, source_mdp: LabeledMdp,
                      target_mdp: LabeledMdp, target_demos: Demonstrations,
                      lam: float = 1.0) -> Loglik:
    """Learn rewards for ``model`` on the source, re-plan on the target, score target demos."""
    if source_mdp.propositions != target_mdp.propositions:
        raise MdpError("source and target use different alphabets")
    model = as_model(model)
    learned = build_learned_product_policy(model, source_ptp, source_mdp, "aggregate")
    rewards = extract_rewards(learned.product, learned, lam).machine
    target = soft_bellman_solve(build_product(target_mdp, rewards), lam)
    return trajectory_loglik(target_mdp, model, target, target_demos)
