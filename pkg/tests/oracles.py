"""Independent reference implementations used by the tests.

Everything here is deliberately naive: explicit loops, dictionaries and
brute-force enumeration, sharing no code path with the library beyond the
plain data classes.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from rmlearn.machine import RewardMachine, RewardMachineModel
from rmlearn.mdp import LabeledMdp


# ------------------------------------------------------------------ machines

def all_models(n: int, n_props: int, non_stuttering: bool = False):
    """Every transition table on ``n`` nodes with initial node 0."""
    for flat in itertools.product(range(n), repeat=n * n_props):
        delta = np.array(flat, dtype=np.int64).reshape(n, n_props)
        if non_stuttering and not _ns(delta):
            continue
        yield RewardMachineModel(delta)


def _ns(delta) -> bool:
    n, P = delta.shape
    return all(delta[delta[u][k]][k] == delta[u][k] for u in range(n) for k in range(P))


def run_word(delta, word) -> int:
    u = 0
    for k in word:
        u = int(delta[u][k])
    return u


def violations(model, pairs) -> int:
    d = model.delta.tolist()
    return sum(run_word(d, p) == run_word(d, q) for p, q in pairs)


def brute_force(pairs, n: int, n_props: int, non_stuttering: bool = False):
    """(consistent models, minimum violation count, models at the minimum)."""
    best, argbest, consistent = None, [], []
    for m in all_models(n, n_props, non_stuttering):
        v = violations(m, pairs)
        if v == 0:
            consistent.append(m)
        if best is None or v < best:
            best, argbest = v, [m]
        elif v == best:
            argbest.append(m)
    return consistent, best, argbest


def clause_sat(clauses, assignment) -> bool:
    true = {l for l in assignment if l > 0}
    val = lambda lit: (lit in true) if lit > 0 else (-lit not in true)
    return all(any(val(l) for l in c) for c in clauses)


# -------------------------------------------------------------------- words

def dense(mdp: LabeledMdp) -> np.ndarray:
    return mdp.kernel.toarray().reshape(mdp.n_states, mdp.n_actions, mdp.n_states)


def reach_bfs(mdp: LabeledMdp, depth: int, compress: bool = False) -> dict:
    """word -> set of states, by explicit search over (word, state) pairs.

    Compressed words record a label only when it differs from the previous
    one, so a state may be revisited under the same word any number of times.
    """
    P = dense(mdp)
    lab = mdp.labels.tolist()
    out: dict[tuple, set] = {}
    seen = set()
    queue = deque()
    for s in range(mdp.n_states):
        if mdp.mu0[s] > 0:
            item = ((lab[s],), s)
            seen.add(item)
            queue.append(item)
    while queue:
        w, s = queue.popleft()
        out.setdefault(w, set()).add(s)
        for s2 in range(mdp.n_states):
            if not P[s, :, s2].any():
                continue
            w2 = w if compress and lab[s2] == w[-1] else w + (lab[s2],)
            if len(w2) > depth or (w2, s2) in seen:
                continue
            seen.add((w2, s2))
            queue.append((w2, s2))
    return out


def node_policy_table(product_policy):
    """(s, u) -> action distribution."""
    prod = product_policy.product
    return {(int(s), int(u)): product_policy.probs[i] for i, (s, u) in enumerate(prod.pairs)}


def exact_ptp_oracle(mdp, model, product_policy, depth, compress=False) -> dict:
    table = node_policy_table(product_policy)
    d = model.delta.tolist()
    return {(w, s): table[(s, run_word(d, w))]
            for w, states in reach_bfs(mdp, depth, compress).items() for s in states}


def exact_pairs_oracle(ptp_dict: dict, tol: float) -> set:
    """Canonical pairs of words whose rows differ by more than ``tol`` at a shared state."""
    by_state: dict[int, list] = {}
    for (w, s), p in ptp_dict.items():
        by_state.setdefault(s, []).append((w, p))
    out = set()
    for rows in by_state.values():
        for (w1, p1), (w2, p2) in itertools.combinations(rows, 2):
            if np.max(np.abs(p1 - p2)) > tol:
                out.add(tuple(sorted((w1, w2), key=lambda w: (len(w), w))))
    return out


# ---------------------------------------------------------------- instances

def random_mdp(rng, n_states: int, n_actions: int, n_props: int, branching: int = 2,
               gamma: float = 0.9) -> LabeledMdp:
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            k = int(rng.integers(1, branching + 1))
            succ = rng.choice(n_states, size=min(k, n_states), replace=False)
            P[s, a, succ] = rng.dirichlet(np.ones(len(succ)))
    labels = rng.integers(n_props, size=n_states)
    labels[rng.permutation(n_states)[:min(n_props, n_states)]] = np.arange(min(n_props, n_states))
    mu0 = np.zeros(n_states)
    start = rng.choice(n_states, size=int(rng.integers(1, n_states + 1)), replace=False)
    mu0[start] = rng.dirichlet(np.ones(len(start)))
    props = tuple("pqr"[:n_props]) if n_props <= 3 else tuple(f"p{k}" for k in range(n_props))
    return LabeledMdp.from_dense(P, mu0, gamma, labels, props)


def random_machine(rng, n_nodes: int, n_props: int, non_stuttering: bool = True,
                   scale: float = 1.0) -> RewardMachine:
    while True:
        delta = rng.integers(n_nodes, size=(n_nodes, n_props))
        if not non_stuttering or _ns(delta):
            break
    return RewardMachine(RewardMachineModel(delta), scale * rng.normal(size=(n_nodes, n_props)))


def soft_values(mdp: LabeledMdp, rm: RewardMachine, lam: float = 1.0, sweeps: int = 3000):
    """Soft value iteration over the full grid of (state, node) with plain loops.

    Returns ``(s, u) -> action distribution``.  Entering ``s'`` from node
    ``u`` pays ``rewards[u, L(s')]`` and moves to ``delta[u, L(s')]``.
    """
    P = dense(mdp)
    S, A, _ = P.shape
    n = rm.n_nodes
    d, r, lab = rm.model.delta, rm.rewards, mdp.labels
    V = np.zeros((S, n))
    for _ in range(sweeps):
        Q = np.zeros((S, n, A))
        for s in range(S):
            for u in range(n):
                for a in range(A):
                    Q[s, u, a] = sum(P[s, a, t] * (r[u, lab[t]] + mdp.gamma * V[t, d[u, lab[t]]])
                                     for t in range(S) if P[s, a, t] > 0)
        m = Q.max(axis=2, keepdims=True)
        V_new = (m[..., 0] + lam * np.log(np.exp((Q - m) / lam).sum(axis=2)))
        if np.max(np.abs(V_new - V)) < 1e-12:
            V = V_new
            break
        V = V_new
    pi = np.exp((Q - V[..., None]) / lam)
    pi /= pi.sum(axis=2, keepdims=True)
    return {(s, u): pi[s, u] for s in range(S) for u in range(n)}
