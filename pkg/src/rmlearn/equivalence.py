"""Policy equivalence of two reward machines over a labeled MDP."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .forward import ProductPolicy, soft_bellman_solve
from .machine import RewardMachine, SyncMachine, Word, as_model
from .mdp import LabeledMdp, MdpError, build_product

DEFAULT_TOL = 1e-6


@dataclass
class EquivalenceResult:
    equivalent: bool
    max_gap: float
    witness: Word | None = None
    witness_state: int | None = None

    def __bool__(self) -> bool:
        return self.equivalent


def _policy(mdp: LabeledMdp, machine, lam: float) -> ProductPolicy:
    if isinstance(machine, ProductPolicy):
        if machine.product.base is not mdp:
            raise MdpError("policy was solved on a different mdp")
        return machine
    if not isinstance(machine, RewardMachine):
        raise ValueError("need a reward machine or a solved product policy")
    return soft_bellman_solve(build_product(mdp, machine), lam)


def check_policy_equivalence(mdp: LabeledMdp, rm1, rm2, tol: float = DEFAULT_TOL,
                             lam: float = 1.0) -> EquivalenceResult:
    """Compare the prefix tree policies induced by two machines.

    ``rm1`` / ``rm2`` are reward machines (solved here) or product policies.
    The two product policies are compared on every reachable ``(s, u1, u2)``
    of the synchronized product; a failing triple is reported together with
    the shortest word leading to it.  Its length is at most ``|S| * n1 * n2``.
    """
    p1, p2 = _policy(mdp, rm1, lam), _policy(mdp, rm2, lam)
    m1, m2 = p1.product.machine, p2.product.machine
    if m1.n_props != mdp.n_props or m2.n_props != mdp.n_props:
        raise MdpError("alphabet mismatch")
    sync = build_product(mdp, SyncMachine(as_model(m1), as_model(m2)).as_model())
    n2 = m2.n_nodes
    s = sync.pairs[:, 0]
    u1, u2 = np.divmod(sync.pairs[:, 1], n2)
    idx1, idx2 = p1.product.index, p2.product.index
    rows1 = np.array([idx1[(int(a), int(b))] for a, b in zip(s, u1)], dtype=np.int64)
    rows2 = np.array([idx2[(int(a), int(b))] for a, b in zip(s, u2)], dtype=np.int64)
    gaps = np.max(np.abs(p1.probs[rows1] - p2.probs[rows2]), axis=1)
    worst = float(gaps.max()) if len(gaps) else 0.0
    bad = gaps > tol
    if not bad.any():
        return EquivalenceResult(True, worst)
    # shortest path in the synchronized product to a failing triple
    A = sync.n_actions
    succ = sync.kernel.tocsr()
    parent = np.full(sync.n_states, -2, dtype=np.int64)
    queue: deque[int] = deque()
    for i in np.flatnonzero(sync.mu0 > 0):
        parent[i] = -1
        queue.append(int(i))
    target = -1
    while queue:
        i = queue.popleft()
        if bad[i]:
            target = i
            break
        lo, hi = succ.indptr[i * A], succ.indptr[(i + 1) * A]
        for j in succ.indices[lo:hi]:
            if parent[j] == -2:
                parent[j] = i
                queue.append(int(j))
    path = []
    while target >= 0:
        path.append(target)
        target = int(parent[target])
    path.reverse()
    word = tuple(int(mdp.labels[s[i]]) for i in path)
    return EquivalenceResult(False, worst, word, int(s[path[-1]]))
