"""Labeled MDP models, product construction and prefix reachability."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .machine import RewardMachine, RewardMachineModel, Word, as_model

PROB_TOL = 1e-9


class MdpError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledMdp:
    """Finite MDP model with one atomic proposition per state.

    ``kernel`` is a sparse ``(n_states * n_actions, n_states)`` matrix whose row
    ``s * n_actions + a`` holds ``P(. | s, a)``.
    """

    kernel: sp.csr_matrix
    n_actions: int
    mu0: np.ndarray
    gamma: float
    labels: np.ndarray
    propositions: tuple[str, ...]

    def __post_init__(self):
        kernel = sp.csr_matrix(self.kernel, dtype=float)
        kernel.eliminate_zeros()
        kernel.sort_indices()
        n_states = kernel.shape[1]
        if kernel.shape[0] != n_states * self.n_actions:
            raise MdpError(f"kernel has {kernel.shape[0]} rows, expected {n_states * self.n_actions}")
        if kernel.nnz and kernel.data.min() < 0:
            raise MdpError("negative transition probability")
        sums = np.asarray(kernel.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
        if bad.size:
            s, a = divmod(int(bad[0]), self.n_actions)
            raise MdpError(f"P(.|s={s},a={a}) sums to {sums[bad[0]]!r}")
        mu0 = np.asarray(self.mu0, dtype=float)
        if mu0.shape != (n_states,) or mu0.min() < 0 or abs(mu0.sum() - 1.0) > PROB_TOL:
            raise MdpError("initial distribution must be a probability vector over states")
        if not 0.0 <= self.gamma < 1.0:
            raise MdpError(f"discount {self.gamma} not in [0, 1)")
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (n_states,):
            raise MdpError("every state needs exactly one label")
        if labels.min() < 0 or labels.max() >= len(self.propositions):
            raise MdpError("label outside the proposition alphabet")
        for arr in (mu0, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "propositions", tuple(self.propositions))

    @classmethod
    def from_dense(cls, P: np.ndarray, mu0, gamma: float, labels, propositions) -> "LabeledMdp":
        """Build from a dense ``P[s, a, s']`` array."""
        P = np.asarray(P, dtype=float)
        n_states, n_actions, _ = P.shape
        return cls(sp.csr_matrix(P.reshape(n_states * n_actions, n_states)), n_actions,
                   mu0, gamma, labels, propositions)

    @classmethod
    def from_transitions(cls, n_states: int, n_actions: int,
                         transitions: Iterable[tuple[int, int, int, float]], mu0, gamma: float,
                         labels, propositions, renormalize: bool = False) -> "LabeledMdp":
        rows, cols, vals = [], [], []
        for s, a, s2, p in transitions:
            if not (0 <= s < n_states and 0 <= s2 < n_states and 0 <= a < n_actions):
                raise MdpError(f"transition ({s}, {a}, {s2}) out of range")
            rows.append(s * n_actions + a)
            cols.append(s2)
            vals.append(p)
        kernel = sp.csr_matrix((vals, (rows, cols)), shape=(n_states * n_actions, n_states))
        mu0 = np.asarray(mu0, dtype=float)
        if renormalize:
            sums = np.asarray(kernel.sum(axis=1)).ravel()
            if np.any(sums <= 0):
                raise MdpError("cannot renormalize an empty kernel row")
            kernel = sp.diags(1.0 / sums) @ kernel
            mu0 = mu0 / mu0.sum()
        return cls(kernel, n_actions, mu0, gamma, labels, propositions)

    @property
    def n_states(self) -> int:
        return self.kernel.shape[1]

    @property
    def n_props(self) -> int:
        return len(self.propositions)

    def prop_id(self, name) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.n_props:
                raise MdpError(f"unknown proposition id {name}")
            return int(name)
        try:
            return self.propositions.index(name)
        except ValueError:
            raise MdpError(f"unknown proposition {name!r}") from None

    def word(self, names: Sequence) -> Word:
        """Translate proposition names (or ids) into a word of ids."""
        if isinstance(names, str):
            names = names.split(".") if "." in names else list(names)
        return tuple(self.prop_id(n) for n in names)

    def format_word(self, sigma: Sequence[int]) -> str:
        return ".".join(self.propositions[l] for l in sigma)

    def successors(self, s: int, a: int) -> tuple[np.ndarray, np.ndarray]:
        row = s * self.n_actions + a
        lo, hi = self.kernel.indptr[row], self.kernel.indptr[row + 1]
        return self.kernel.indices[lo:hi], self.kernel.data[lo:hi]

    @cached_property
    def successor_matrix(self) -> sp.csr_matrix:
        """Boolean ``(n_states, n_states)`` one-step reachability under any action."""
        coo = self.kernel.tocoo()
        m = sp.csr_matrix((np.ones(coo.nnz, dtype=bool), (coo.row // self.n_actions, coo.col)),
                          shape=(self.n_states, self.n_states), dtype=bool)
        return m

    @cached_property
    def label_masks(self) -> np.ndarray:
        return self.labels[None, :] == np.arange(self.n_props)[:, None]

    def dense_kernel(self) -> np.ndarray:
        return self.kernel.toarray().reshape(self.n_states, self.n_actions, self.n_states)

    def relabeled(self, labels, propositions=None) -> "LabeledMdp":
        return LabeledMdp(self.kernel, self.n_actions, self.mu0, self.gamma, labels,
                          self.propositions if propositions is None else propositions)


def _step(mdp: LabeledMdp, states: np.ndarray) -> np.ndarray:
    """Bool vector of successors of a bool vector of states."""
    if not states.any():
        return np.zeros(mdp.n_states, dtype=bool)
    return np.asarray(mdp.successor_matrix[np.flatnonzero(states)].sum(axis=0)).ravel() > 0


def reach_states(mdp: LabeledMdp, sigma: Sequence[int]) -> frozenset[int]:
    """States in which some feasible trajectory labeled ``sigma`` can end."""
    if len(sigma) == 0:
        raise MdpError("sigma must be non-empty")
    sigma = [mdp.prop_id(l) for l in sigma]
    masks = mdp.label_masks
    current = (mdp.mu0 > 0) & masks[sigma[0]]
    for label in sigma[1:]:
        current = _step(mdp, current) & masks[label]
    return frozenset(int(s) for s in np.flatnonzero(current))


def _stay(mdp: LabeledMdp, states: np.ndarray, label: int) -> np.ndarray:
    """States reachable from ``states`` without leaving proposition ``label``."""
    return _stay_rows(mdp, states[None, :], np.array([label]))[0]


def _succ_rows(mdp: LabeledMdp, rows: np.ndarray) -> np.ndarray:
    """Successor sets of a block of state sets, one bool row per set."""
    if rows.shape[0] == 0:
        return rows.copy()
    return (sp.csr_matrix(rows.astype(np.float64)) @ mdp.successor_matrix).toarray() > 0


def _stay_rows(mdp: LabeledMdp, rows: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Row-wise closure of ``rows[i]`` under moves inside proposition ``labels[i]``."""
    masks = mdp.label_masks[labels]
    current = rows.copy()
    active = np.arange(len(rows))
    while len(active):
        grown = current[active] | (_succ_rows(mdp, current[active]) & masks[active])
        changed = (grown != current[active]).any(axis=1)
        current[active] = grown
        active = active[changed]
    return current


@dataclass
class PrefixLevel:
    """Words of one length: ``words[k]`` extends ``words_prev[parent[k]]`` by ``label[k]``."""

    words: list[Word]
    parent: np.ndarray
    label: np.ndarray
    reach: np.ndarray  # (len(words), n_states) bool


def prefix_levels(mdp: LabeledMdp, depth: int, compress: bool = False) -> Iterator[PrefixLevel]:
    """Realizable words level by level, with their reach sets.

    With ``compress`` words are stutter-free and ``depth`` bounds the number
    of label changes only: a state belongs to a word's set when some
    trajectory of any length whose label sequence compresses to the word ends
    there.
    """
    if depth < 1:
        raise MdpError("depth must be >= 1")
    masks = mdp.label_masks
    first = (mdp.mu0 > 0)[None, :] & masks
    keep = np.flatnonzero(first.any(axis=1))
    reach = first[keep]
    if compress:
        reach = _stay_rows(mdp, reach, keep)
    level = PrefixLevel([(int(k),) for k in keep], np.full(len(keep), -1), keep, reach)
    for length in range(1, depth + 1):
        if not level.words:
            return
        yield level
        if length == depth:
            return
        succ = _succ_rows(mdp, level.reach)
        # candidate (parent, label) pairs in word order
        cand = succ[:, None, :] & masks[None, :, :]
        ok = cand.any(axis=2)
        if compress:
            ok[np.arange(len(level.words)), level.label] = False
        parent, label = np.nonzero(ok)
        new = cand[parent, label]
        if compress:
            new = _stay_rows(mdp, new, label)
        words = [level.words[p] + (int(l),) for p, l in zip(parent.tolist(), label.tolist())]
        level = PrefixLevel(words, parent, label, new)


def prefix_reach(mdp: LabeledMdp, depth: int, compress: bool = False) -> dict[Word, np.ndarray]:
    """Map every realizable word of length <= ``depth`` to its reach set (bool vector).

    See ``prefix_levels`` for the compressed semantics.
    """
    reach: dict[Word, np.ndarray] = {}
    for level in prefix_levels(mdp, depth, compress):
        reach.update(zip(level.words, level.reach))
    return reach


def language_prefixes(mdp: LabeledMdp, depth: int) -> set[Word]:
    """Realizable label words of length 1..depth."""
    return set(prefix_reach(mdp, depth))


@dataclass(frozen=True, eq=False)
class ProductMdp:
    """Reachable fragment of ``machine x mdp``.

    Product state ``i`` is the pair ``pairs[i] = (s, u)``; ``kernel`` has rows
    ``i * n_actions + a``.  ``rewards`` is an optional ``delta_r`` table indexed
    by ``(u, label)``.
    """

    base: LabeledMdp
    machine: RewardMachineModel
    pairs: np.ndarray
    kernel: sp.csr_matrix
    mu0: np.ndarray
    rewards: np.ndarray | None = None

    @property
    def n_states(self) -> int:
        return len(self.pairs)

    @property
    def n_actions(self) -> int:
        return self.base.n_actions

    @property
    def gamma(self) -> float:
        return self.base.gamma

    @cached_property
    def index(self) -> dict[tuple[int, int], int]:
        return {(int(s), int(u)): i for i, (s, u) in enumerate(self.pairs)}

    def with_rewards(self, rewards) -> "ProductMdp":
        if isinstance(rewards, RewardMachine):
            rewards = rewards.rewards
        rewards = np.asarray(rewards, dtype=float)
        if rewards.shape != self.machine.delta.shape:
            raise MdpError(f"reward table shape {rewards.shape} != {self.machine.delta.shape}")
        return ProductMdp(self.base, self.machine, self.pairs, self.kernel, self.mu0, rewards)

    def immediate_rewards(self) -> np.ndarray:
        """``rbar[i, a] = sum_s' P(s'|s,a) delta_r(u, L(s'))`` for every product state."""
        if self.rewards is None:
            raise MdpError("product carries no reward table")
        base = self.base
        per_node = base.kernel @ self.rewards[:, base.labels].T  # (S*A, n_nodes)
        per_node = np.asarray(per_node).reshape(base.n_states, base.n_actions, -1)
        s, u = self.pairs[:, 0], self.pairs[:, 1]
        return per_node[s, :, u]

    def base_rows(self) -> np.ndarray:
        """Row index into the base kernel for every (product state, action)."""
        A = self.n_actions
        return (self.pairs[:, 0, None] * A + np.arange(A)[None, :]).ravel()


def build_product(mdp: LabeledMdp, machine) -> ProductMdp:
    """Reachable product of a labeled MDP with a reward machine (model).

    The machine reads the label of the initial state first, so the initial
    product states are ``(s0, delta(u_I, L(s0)))``.
    """
    rewards = machine.rewards if isinstance(machine, RewardMachine) else None
    model = as_model(machine)
    if model.n_props != mdp.n_props:
        raise MdpError(f"alphabet mismatch: machine has {model.n_props} propositions, "
                       f"mdp has {mdp.n_props}")
    if model.propositions is not None and tuple(model.propositions) != mdp.propositions:
        raise MdpError("alphabet mismatch: proposition names differ")
    delta, labels, A = model.delta, mdp.labels, mdp.n_actions
    index: dict[tuple[int, int], int] = {}
    pairs: list[tuple[int, int]] = []
    queue: deque[int] = deque()

    def visit(s, u):
        key = (s, u)
        i = index.get(key)
        if i is None:
            i = index[key] = len(pairs)
            pairs.append(key)
            queue.append(i)
        return i

    init = {}
    for s in np.flatnonzero(mdp.mu0 > 0):
        s = int(s)
        i = visit(s, int(delta[model.initial, labels[s]]))
        init[i] = init.get(i, 0.0) + mdp.mu0[s]
    rows, cols, vals = [], [], []
    indptr, indices, data = mdp.kernel.indptr, mdp.kernel.indices, mdp.kernel.data
    while queue:
        i = queue.popleft()
        s, u = pairs[i]
        for a in range(A):
            r = s * A + a
            for k in range(indptr[r], indptr[r + 1]):
                s2 = int(indices[k])
                j = visit(s2, int(delta[u, labels[s2]]))
                rows.append(i * A + a)
                cols.append(j)
                vals.append(data[k])
    n = len(pairs)
    kernel = sp.csr_matrix((vals, (rows, cols)), shape=(n * A, n))
    mu0 = np.zeros(n)
    for i, p in init.items():
        mu0[i] = p
    return ProductMdp(mdp, model, np.array(pairs, dtype=np.int64).reshape(-1, 2), kernel, mu0,
                      rewards)
