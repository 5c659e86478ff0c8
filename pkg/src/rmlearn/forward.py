"""Entropy-regularized (soft) value iteration on product MDPs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .mdp import ProductMdp


class ConvergenceError(RuntimeError):
    pass


@dataclass
class ProductPolicy:
    """Action distributions ``probs[i, a]`` over the states of ``product``.

    ``known`` marks rows that carry information; rows assembled from partial
    data may be placeholders.
    """

    product: ProductMdp
    probs: np.ndarray
    known: np.ndarray = field(default=None)
    values: np.ndarray | None = None
    q: np.ndarray | None = None
    iterations: int = 0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (self.product.n_states, self.product.n_actions):
            raise ValueError(f"policy shape {self.probs.shape} does not match product")
        if self.known is None:
            self.known = np.ones(self.product.n_states, dtype=bool)

    def row(self, s: int, u: int) -> np.ndarray:
        return self.probs[self.product.index[(s, u)]]


def soft_bellman_solve(prod: ProductMdp, lam: float = 1.0, tol: float = 1e-10,
                       max_iter: int = 100_000) -> ProductPolicy:
    """MaxEnt-optimal product policy by synchronous soft Bellman iteration.

    ``Q <- rbar + gamma * P V`` and ``V <- lam * logsumexp(Q / lam)`` until the
    sup-norm change of ``V`` drops below ``tol``; the policy is
    ``exp((Q - V) / lam)``.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rbar = prod.immediate_rewards()
    N, A = rbar.shape
    gamma = prod.gamma
    V = np.zeros(N)
    for k in range(1, max_iter + 1):
        Q = rbar + gamma * (prod.kernel @ V).reshape(N, A)
        V_new = lam * logsumexp(Q / lam, axis=1)
        err = np.max(np.abs(V_new - V)) if N else 0.0
        V = V_new
        if err <= tol:
            break
    else:
        raise ConvergenceError(f"soft Bellman iteration did not reach tol={tol} in {max_iter} sweeps")
    probs = np.exp((Q - V[:, None]) / lam)
    probs /= probs.sum(axis=1, keepdims=True)
    return ProductPolicy(prod, probs, values=V, q=Q, iterations=k)


def sample_rows(matrix: sp.csr_matrix, rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one column per requested row of a row-stochastic CSR matrix."""
    rows = np.asarray(rows)
    indptr, indices = matrix.indptr, matrix.indices
    cum = np.cumsum(matrix.data)
    lo, hi = indptr[rows], indptr[rows + 1]
    base = np.where(lo > 0, cum[np.maximum(lo - 1, 0)], 0.0)
    total = cum[hi - 1] - base
    target = base + rng.random(len(rows)) * total
    pos = np.searchsorted(cum, target, side="right")
    pos = np.clip(pos, lo, hi - 1)
    return indices[pos]


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    u = rng.random(len(probs)) * cum[:, -1]
    return np.minimum((cum < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def policy_return(prod: ProductMdp, policy: ProductPolicy, n_rollouts: int, horizon: int,
                  rng_seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo mean discounted and mean undiscounted return of ``policy``."""
    if prod.rewards is None:
        raise ValueError("product carries no reward table")
    if n_rollouts == 0:
        return 0.0, 0.0
    rng = np.random.default_rng(rng_seed)
    A = prod.n_actions
    labels = prod.base.labels
    rewards = prod.rewards
    idx = rng.choice(prod.n_states, size=n_rollouts, p=prod.mu0)
    disc = np.zeros(n_rollouts)
    raw = np.zeros(n_rollouts)
    g = 1.0
    for _ in range(horizon):
        a = sample_actions(policy.probs[idx], rng)
        nxt = sample_rows(prod.kernel, idx * A + a, rng)
        r = rewards[prod.pairs[idx, 1], labels[prod.pairs[nxt, 0]]]
        disc += g * r
        raw += r
        g *= prod.gamma
        idx = nxt
    return float(disc.mean()), float(raw.mean())
