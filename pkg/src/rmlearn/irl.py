"""Reward recovery: inverse soft Bellman on a product MDP, and flat MaxEnt IRL baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr
from scipy.special import logsumexp

from .forward import ConvergenceError, ProductPolicy
from .machine import RewardMachine, RewardMachineModel
from .mdp import LabeledMdp, ProductMdp, build_product
from .ptp import Demonstrations

DENSE_LIMIT = 4000


class ResidualError(ValueError):
    """The policy is not soft-optimal for any reward of the machine's form."""


@dataclass(frozen=True)
class FeatureMap:
    """Coordinate ``u * n_props + label`` for the reward ``delta_r(u, label)``."""

    n_nodes: int
    n_props: int

    @property
    def dim(self) -> int:
        return self.n_nodes * self.n_props

    def index(self, u, label):
        return np.asarray(u) * self.n_props + np.asarray(label)

    def table(self, theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta).reshape(self.n_nodes, self.n_props)


@dataclass
class RewardExtraction:
    machine: RewardMachine
    values: np.ndarray
    max_residual: float
    rms_residual: float
    n_equations: int

    def lines(self) -> list[str]:
        return [f"max_residual={self.max_residual:.3e}", f"rms_residual={self.rms_residual:.3e}",
                f"equations={self.n_equations}"]


def clip_policy(probs: np.ndarray, floor: float = 0.05) -> np.ndarray:
    out = np.maximum(probs, floor)
    return out / out.sum(axis=1, keepdims=True)


def extract_rewards(prod: ProductMdp, policy: ProductPolicy, lam: float = 1.0,
                    ridge: float = 1e-8, clip: float | None = None,
                    max_residual: float | None = None) -> RewardExtraction:
    """Rewards ``delta_r(u, label)`` under which ``policy`` is soft-optimal.

    Soft optimality gives one linear equation per known product state ``i``
    and action ``a``::

        lam * log pi(a | i) = sum_j P(j | i, a) (delta_r(u_i, L(s_j)) + gamma V_j) - V_i

    The unknowns ``delta_r`` and ``V`` are solved jointly by least squares.
    Constant shifts are fixed by ``sum(delta_r) = 0``; ``ridge`` only touches
    ``delta_r`` and settles entries the equations do not see.
    """
    if policy.product is not prod and policy.probs.shape != (prod.n_states, prod.n_actions):
        raise ValueError("policy does not match the product")
    probs = policy.probs if clip is None else clip_policy(policy.probs, clip)
    rows_known = np.flatnonzero(policy.known)
    if np.any(probs[rows_known] <= 0):
        raise ValueError("policy must be strictly positive on known product states")
    N, A = prod.n_states, prod.n_actions
    fmap = FeatureMap(prod.machine.n_nodes, prod.machine.n_props)
    D = fmap.dim
    K = prod.kernel.tocoo()
    i_of_row, a_of_row = np.divmod(K.row, A)
    keep = policy.known[i_of_row]
    row = K.row[keep]
    i_of_row = i_of_row[keep]
    j = K.col[keep]
    p = K.data[keep]
    u = prod.pairs[i_of_row, 1]
    lab = prod.base.labels[prod.pairs[j, 0]]
    # map equation rows (i * A + a) onto a dense 0..m-1 range
    eq_rows = (rows_known[:, None] * A + np.arange(A)[None, :]).ravel()
    eq_id = np.full(N * A, -1)
    eq_id[eq_rows] = np.arange(len(eq_rows))
    m = len(eq_rows)
    r = eq_id[row]
    M = sp.coo_matrix((p, (r, fmap.index(u, lab))), shape=(m, D + N))
    M = M + sp.coo_matrix((prod.gamma * p, (r, D + j)), shape=(m, D + N))
    M = M - sp.coo_matrix((np.ones(m), (np.arange(m), D + eq_rows // A)), shape=(m, D + N))
    rhs = lam * np.log(probs.ravel()[eq_rows])
    gauge = sp.coo_matrix((np.ones(D), (np.zeros(D), np.arange(D))), shape=(1, D + N))
    # the ridge must not bias entries the equations pin down
    unseen = np.flatnonzero(np.bincount(fmap.index(u, lab), minlength=D) == 0)
    reg = sp.coo_matrix((np.full(len(unseen), np.sqrt(ridge)), (np.arange(len(unseen)), unseen)),
                        shape=(len(unseen), D + N))
    system = sp.vstack([M, gauge, reg]).tocsr()
    target = np.concatenate([rhs, [0.0], np.zeros(len(unseen))])
    if system.shape[1] <= DENSE_LIMIT:
        x = np.linalg.lstsq(system.toarray(), target, rcond=None)[0]
    else:
        x = lsqr(system, target, atol=1e-14, btol=1e-14, iter_lim=100 * system.shape[1])[0]
    resid = M @ x - rhs
    max_res = float(np.max(np.abs(resid))) if m else 0.0
    rms = float(np.sqrt(np.mean(resid ** 2))) if m else 0.0
    if max_residual is not None and max_res > max_residual:
        raise ResidualError(f"max residual {max_res:.3e} above {max_residual:.3e}")
    rewards = fmap.table(x[:D])
    return RewardExtraction(RewardMachine(prod.machine, rewards), x[D:], max_res, rms, m)


# ------------------------------------------------------------------ baselines

def _state_features(mdp: LabeledMdp, features: str) -> np.ndarray:
    if features == "dense":
        return np.eye(mdp.n_states)
    if features == "label":
        return mdp.label_masks.T.astype(float)
    raise ValueError(f"unknown feature set {features!r}")


def _soft_policy(mdp: LabeledMdp, state_reward: np.ndarray, lam: float, tol: float,
                 max_iter: int) -> np.ndarray:
    S, A = mdp.n_states, mdp.n_actions
    rbar = (mdp.kernel @ state_reward).reshape(S, A)
    V = np.zeros(S)
    for _ in range(max_iter):
        Q = rbar + mdp.gamma * (mdp.kernel @ V).reshape(S, A)
        V_new = lam * logsumexp(Q / lam, axis=1)
        done = np.max(np.abs(V_new - V)) <= tol
        V = V_new
        if done:
            break
    else:
        raise ConvergenceError("soft value iteration did not converge")
    return np.exp((Q - V[:, None]) / lam)


def baseline_policy(mdp: LabeledMdp, probs: np.ndarray) -> ProductPolicy:
    """Wrap a flat policy ``probs[s, a]`` as a product policy over a 1-node machine."""
    model = RewardMachineModel(np.zeros((1, mdp.n_props), dtype=np.int64))
    prod = build_product(mdp, model)
    return ProductPolicy(prod, probs[prod.pairs[:, 0]])


def baseline_maxent_irl(mdp: LabeledMdp, demos: Demonstrations, features: str = "dense",
                        lam: float = 1.0, lr: float = 0.1, n_iter: int = 300,
                        tol: float = 1e-8) -> tuple[np.ndarray, ProductPolicy]:
    """MaxEnt IRL with a static reward ``theta . phi(s')`` paid on arrival.

    Gradient ascent on the demonstration likelihood, i.e. on the gap between
    empirical and expected discounted feature counts over the demonstrated
    horizon.  ``features='dense'`` gives one weight per state,
    ``features='label'`` one per proposition.  Returns the state reward and
    the soft-optimal policy as a 1-node product policy.
    """
    if len(demos) == 0 or all(len(a) == 0 for _, a in demos):
        raise ValueError("baseline IRL needs at least one non-empty demonstration")
    phi = _state_features(mdp, features)
    S = mdp.n_states
    gamma = mdp.gamma
    horizon = max(len(a) for _, a in demos)
    start = np.zeros(S)
    emp = np.zeros(phi.shape[1])
    for states, actions in demos:
        start[states[0]] += 1
        disc = gamma ** np.arange(len(actions))
        emp += disc @ phi[states[1:len(actions) + 1]]
    start /= len(demos)
    emp /= len(demos)
    P = mdp.kernel
    theta = np.zeros(phi.shape[1])
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for it in range(1, n_iter + 1):
        pi = _soft_policy(mdp, phi @ theta, lam, tol, 100_000)
        d = start.copy()
        exp = np.zeros_like(theta)
        g = 1.0
        for _ in range(horizon):
            flow = (d[:, None] * pi).ravel()
            d = P.T @ flow
            exp += g * (d @ phi)
            g *= gamma
        grad = emp - exp
        # Adam step
        m = 0.9 * m + 0.1 * grad
        v = 0.999 * v + 0.001 * grad ** 2
        theta += lr * (m / (1 - 0.9 ** it)) / (np.sqrt(v / (1 - 0.999 ** it)) + 1e-8)
        if np.max(np.abs(grad)) < 1e-6:
            break
    pi = _soft_policy(mdp, phi @ theta, lam, tol, 100_000)
    return phi @ theta, baseline_policy(mdp, pi)
