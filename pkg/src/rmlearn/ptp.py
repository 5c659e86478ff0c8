"""Prefix tree policies: exact (induced by a product policy) or estimated from demonstrations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .forward import ProductPolicy, sample_actions, sample_rows
from .machine import MachineError, Word, as_model, compress_trace, is_non_stuttering
from .mdp import LabeledMdp, MdpError, prefix_levels


@dataclass
class PtpNode:
    """Entries of one word: ``probs[k]`` is the action distribution at ``states[k]``."""

    states: np.ndarray
    probs: np.ndarray
    visits: np.ndarray
    counts: np.ndarray | None = None


@dataclass
class PrefixTreePolicy:
    """Map ``(word, state) -> action distribution`` for words of length <= ``depth``.

    Exact trees carry ``inf`` visit counts.  A compressed tree is keyed by
    stutter-free words; it only makes sense for non-stuttering machines.
    """

    n_actions: int
    depth: int
    table: dict[Word, PtpNode] = field(default_factory=dict)
    exact: bool = True
    compressed: bool = False

    def __len__(self) -> int:
        return sum(len(node.states) for node in self.table.values())

    def words(self) -> list[Word]:
        return list(self.table)

    def get(self, sigma: Sequence[int], s: int) -> tuple[np.ndarray, float] | None:
        node = self.table.get(tuple(sigma))
        if node is None:
            return None
        k = np.searchsorted(node.states, s)
        if k < len(node.states) and node.states[k] == s:
            return node.probs[k], float(node.visits[k])
        return None

    def items(self) -> Iterator[tuple[Word, int, np.ndarray, float]]:
        for word, node in self.table.items():
            for s, p, n in zip(node.states, node.probs, node.visits):
                yield word, int(s), p, float(n)

    def restrict(self, depth: int) -> "PrefixTreePolicy":
        """Depth restriction.  For compressed trees this bounds the compressed length."""
        table = {w: n for w, n in self.table.items() if len(w) <= depth}
        return PrefixTreePolicy(self.n_actions, min(depth, self.depth), table, self.exact,
                                self.compressed)

    def by_state(self, min_visits: float = 0.0) -> dict[int, tuple[list[Word], np.ndarray, np.ndarray]]:
        """Regroup entries per state: ``s -> (words, probs (m, A), visits (m,))``."""
        acc: dict[int, tuple[list, list, list]] = {}
        for word, node in self.table.items():
            for s, p, n in zip(node.states, node.probs, node.visits):
                if n < min_visits:
                    continue
                words, ps, ns = acc.setdefault(int(s), ([], [], []))
                words.append(word)
                ps.append(p)
                ns.append(n)
        return {s: (w, np.array(p), np.array(n, dtype=float)) for s, (w, p, n) in acc.items()}

    def max_abs_diff(self, other: "PrefixTreePolicy") -> float:
        """Sup-norm gap over the common domain; ``inf`` when the domains differ."""
        if self.table.keys() != other.table.keys():
            return float("inf")
        worst = 0.0
        for word, node in self.table.items():
            o = other.table[word]
            if not np.array_equal(node.states, o.states):
                return float("inf")
            if len(node.states):
                worst = max(worst, float(np.max(np.abs(node.probs - o.probs))))
        return worst


def induce_exact_ptp(mdp: LabeledMdp, model, policy: ProductPolicy, depth: int,
                     compress: bool = False) -> PrefixTreePolicy:
    """Prefix tree policy induced by a product policy:
    ``pi_ptp(a | s, sigma) = pi_prod(a | s, run(model, sigma))``."""
    model = as_model(model)
    if compress and not is_non_stuttering(model):
        raise MachineError("compressed prefix trees need a non-stuttering machine")
    prod = policy.product
    # row of (s, u) in the product, -1 where the pair is missing or unknown
    rows = np.full((mdp.n_states, model.n_nodes), -1, dtype=np.int64)
    known = np.flatnonzero(policy.known)
    rows[prod.pairs[known, 0], prod.pairs[known, 1]] = known
    table = {}
    nodes = None
    for level in prefix_levels(mdp, depth, compress):
        if nodes is None:
            nodes = model.delta[model.initial, level.label]
        else:
            nodes = model.delta[nodes[level.parent], level.label]
        ws, ss = np.nonzero(level.reach)
        r = rows[ss, nodes[ws]]
        if np.any(r < 0):
            k = int(np.flatnonzero(r < 0)[0])
            raise MdpError(f"policy has no row for state {ss[k]}, node {nodes[ws[k]]}")
        probs = policy.probs[r]
        bounds = np.searchsorted(ws, np.arange(len(level.words) + 1))
        for k, word in enumerate(level.words):
            lo, hi = bounds[k], bounds[k + 1]
            table[word] = PtpNode(ss[lo:hi], probs[lo:hi], np.full(hi - lo, np.inf))
    return PrefixTreePolicy(mdp.n_actions, depth, table, exact=True, compressed=compress)


@dataclass
class Demonstrations:
    """Trajectories ``(states[0..T], actions[0..T-1])`` over an MDP."""

    trajectories: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    @classmethod
    def from_arrays(cls, states: np.ndarray, actions: np.ndarray) -> "Demonstrations":
        return cls([(np.asarray(s), np.asarray(a)) for s, a in zip(states, actions)])

    def label_sequences(self, mdp: LabeledMdp) -> list[Word]:
        return [tuple(int(l) for l in mdp.labels[s]) for s, _ in self.trajectories]

    def validate(self, mdp: LabeledMdp) -> None:
        for k, (states, actions) in enumerate(self.trajectories):
            if len(states) != len(actions) + 1:
                raise ValueError(f"trajectory {k}: expected one more state than actions")
            for t, a in enumerate(actions):
                nxt, p = mdp.successors(int(states[t]), int(a))
                if int(states[t + 1]) not in set(nxt[p > 0].tolist()):
                    raise ValueError(f"trajectory {k} step {t} is not kernel-feasible")

    def subset(self, idx) -> "Demonstrations":
        return Demonstrations([self.trajectories[i] for i in idx])


def simulate_demonstrations(mdp: LabeledMdp, model, policy: ProductPolicy, n_traj: int,
                            horizon: int, seed: int = 0) -> Demonstrations:
    """Sample ``n_traj`` trajectories of ``horizon`` actions under a product policy.

    The machine node is tracked internally and dropped from the output.
    """
    prod = policy.product
    if prod.base is not mdp or as_model(model) != prod.machine:
        raise ValueError("policy was not built on this mdp and machine")
    if n_traj == 0:
        return Demonstrations()
    rng = np.random.default_rng(seed)
    A = mdp.n_actions
    idx = rng.choice(prod.n_states, size=n_traj, p=prod.mu0)
    states = np.empty((n_traj, horizon + 1), dtype=np.int64)
    actions = np.empty((n_traj, horizon), dtype=np.int64)
    states[:, 0] = prod.pairs[idx, 0]
    for t in range(horizon):
        a = sample_actions(policy.probs[idx], rng)
        idx = sample_rows(prod.kernel, idx * A + a, rng)
        actions[:, t] = a
        states[:, t + 1] = prod.pairs[idx, 0]
    return Demonstrations.from_arrays(states, actions)


def estimate_ptp(demos: Demonstrations, mdp: LabeledMdp, depth: int,
                 compress: bool = False) -> PrefixTreePolicy:
    """Empirical prefix tree policy ``count(sigma, s, a) / count(sigma, s)``.

    The word for step ``t`` is the label sequence of ``states[0..t]`` (so it ends
    with the label of the acting state).  Only words of length <= ``depth`` are
    counted; unvisited cells are absent.  ``compress`` pools counts of words with
    the same stutter-free form, and then ``depth`` bounds the compressed length.
    """
    if len(demos) == 0:
        raise ValueError("no demonstrations")
    S, A = mdp.n_states, mdp.n_actions
    n = len(demos)
    T = max(len(a) for _, a in demos)
    if not compress:
        T = min(depth, T)
    st = np.full((n, T), -1, dtype=np.int64)
    ac = np.full((n, T), -1, dtype=np.int64)
    for k, (states, actions) in enumerate(demos):
        m = min(T, len(actions))
        st[k, :m] = states[:m]
        ac[k, :m] = actions[:m]
    # node ids of a prefix trie; node 0 is the empty word
    words: list[Word] = [()]
    children: dict[tuple[int, int], int] = {}
    last = np.full(n, -1, dtype=np.int64)
    node = np.zeros(n, dtype=np.int64)
    length = np.zeros(n, dtype=np.int64)
    events = []
    for t in range(T):
        alive = st[:, t] >= 0
        lab = np.where(alive, mdp.labels[np.maximum(st[:, t], 0)], -1)
        grow = alive & ~(compress & (lab == last))
        length += grow
        alive &= length <= depth
        grow &= alive
        if not alive.any():
            break
        if grow.any():
            codes = node[grow] * mdp.n_props + lab[grow]
            uniq, inv = np.unique(codes, return_inverse=True)
            ids = np.empty(len(uniq), dtype=np.int64)
            for j, code in enumerate(uniq.tolist()):
                parent, label = divmod(code, mdp.n_props)
                child = children.get((parent, label))
                if child is None:
                    child = children[(parent, label)] = len(words)
                    words.append(words[parent] + (label,))
                ids[j] = child
            node[grow] = ids[inv]
        last = np.where(alive, lab, last)
        events.append((node[alive] * S + st[alive, t]) * A + ac[alive, t])
    codes, counts = np.unique(np.concatenate(events), return_counts=True)
    cell, action = np.divmod(codes, A)
    word_id, state = np.divmod(cell, S)
    table: dict[Word, PtpNode] = {}
    cells, first = np.unique(cell, return_index=True)
    bounds = np.append(first, len(cell))
    per_word: dict[int, list] = {}
    for j in range(len(cells)):
        lo, hi = bounds[j], bounds[j + 1]
        row = np.zeros(A, dtype=np.int64)
        row[action[lo:hi]] = counts[lo:hi]
        per_word.setdefault(int(word_id[lo]), []).append((int(state[lo]), row))
    for wid, entries in per_word.items():
        ss = np.array([s for s, _ in entries], dtype=np.int64)
        cnt = np.array([r for _, r in entries])
        vis = cnt.sum(axis=1)
        table[words[wid]] = PtpNode(ss, cnt / vis[:, None], vis.astype(float), cnt)
    return PrefixTreePolicy(A, depth, table, exact=False, compressed=compress)


def compress_ptp_key(sigma: Sequence[int]) -> Word:
    return compress_trace(sigma)
