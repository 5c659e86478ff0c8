"""Reward machine models and reward machines over a finite proposition alphabet.

Words (proposition sequences) are tuples of integer proposition ids.  Node 0
is the initial node unless stated otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]


class MachineError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RewardMachineModel:
    """Deterministic, fully specified transition structure ``delta[u, label] -> u'``."""

    delta: np.ndarray
    initial: int = 0
    propositions: tuple[str, ...] | None = None

    def __post_init__(self):
        delta = np.array(self.delta, dtype=np.int64)
        if delta.ndim != 2 or delta.shape[0] < 1 or delta.shape[1] < 1:
            raise MachineError(f"delta must be a non-empty 2-d table, got shape {delta.shape}")
        if delta.min() < 0 or delta.max() >= delta.shape[0]:
            raise MachineError("delta refers to a node outside the machine")
        if not 0 <= self.initial < delta.shape[0]:
            raise MachineError(f"initial node {self.initial} out of range")
        if self.propositions is not None and len(self.propositions) != delta.shape[1]:
            raise MachineError("proposition names do not match delta width")
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)

    @property
    def n_nodes(self) -> int:
        return self.delta.shape[0]

    @property
    def n_props(self) -> int:
        return self.delta.shape[1]

    def key(self) -> tuple:
        return (self.initial, self.delta.tobytes(), self.delta.shape)

    def __eq__(self, other):
        if not isinstance(other, RewardMachineModel):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        rows = "; ".join(" ".join(str(v) for v in row) for row in self.delta)
        return f"RewardMachineModel(n_nodes={self.n_nodes}, initial={self.initial}, delta=[{rows}])"

    def step(self, u: int, label: int) -> int:
        return int(self.delta[u, label])

    @classmethod
    def from_edges(cls, n_nodes: int, n_props: int, edges: Iterable[tuple[int, int, int]],
                   initial: int = 0, propositions: Sequence[str] | None = None) -> "RewardMachineModel":
        """Build a model where every transition not listed is a self-loop."""
        delta = np.tile(np.arange(n_nodes)[:, None], (1, n_props))
        for u, label, v in edges:
            delta[u, label] = v
        return cls(delta, initial, tuple(propositions) if propositions is not None else None)


@dataclass(frozen=True, eq=False)
class RewardMachine:
    """A reward machine model together with its output table ``rewards[u, label]``."""

    model: RewardMachineModel
    rewards: np.ndarray = field(default=None)

    def __post_init__(self):
        rewards = self.rewards
        if rewards is None:
            rewards = np.zeros(self.model.delta.shape)
        rewards = np.array(rewards, dtype=float)
        if rewards.shape != self.model.delta.shape:
            raise MachineError(f"reward table shape {rewards.shape} != {self.model.delta.shape}")
        rewards.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)

    @property
    def n_nodes(self) -> int:
        return self.model.n_nodes

    @property
    def n_props(self) -> int:
        return self.model.n_props

    def shifted(self, c: float) -> "RewardMachine":
        return RewardMachine(self.model, self.rewards + c)

    def scaled(self, c: float) -> "RewardMachine":
        return RewardMachine(self.model, self.rewards * c)


def as_model(machine) -> RewardMachineModel:
    return machine.model if isinstance(machine, RewardMachine) else machine


def run(model, sigma: Sequence[int], start: int | None = None) -> int:
    """Node reached from ``start`` (default: the initial node) after reading ``sigma``."""
    model = as_model(model)
    u = model.initial if start is None else start
    delta = model.delta
    n_props = model.n_props
    for label in sigma:
        if not 0 <= label < n_props:
            raise MachineError(f"unknown proposition {label}")
        u = delta[u, label]
    return int(u)


def trace(model, sigma: Sequence[int]) -> list[int]:
    """Nodes visited while reading ``sigma``, starting with the initial node."""
    model = as_model(model)
    nodes = [model.initial]
    for label in sigma:
        nodes.append(int(model.delta[nodes[-1], label]))
    return nodes


def is_non_stuttering(model) -> bool:
    delta = as_model(model).delta
    labels = np.arange(delta.shape[1])
    after = delta[delta, labels[None, :]]
    return bool(np.array_equal(after, delta))


def compress_trace(sigma: Sequence[int]) -> Word:
    """Collapse runs of a repeated proposition to a single occurrence."""
    return tuple(label for label, _ in itertools.groupby(sigma))


def enumerate_renamings(model) -> list[RewardMachineModel]:
    """All models obtained by permuting the non-initial nodes (initial node fixed)."""
    model = as_model(model)
    n = model.n_nodes
    others = [u for u in range(n) if u != model.initial]
    out = []
    for perm in itertools.permutations(others):
        mapping = np.empty(n, dtype=np.int64)
        mapping[model.initial] = model.initial
        mapping[others] = perm
        delta = np.empty_like(model.delta)
        delta[mapping] = mapping[model.delta]
        out.append(RewardMachineModel(delta, model.initial, model.propositions))
    return out


def is_renaming_of(a, b) -> bool:
    a, b = as_model(a), as_model(b)
    if a.delta.shape != b.delta.shape or a.initial != b.initial:
        return False
    return any(r == b for r in enumerate_renamings(a))


def reachable_nodes(model) -> list[int]:
    model = as_model(model)
    seen = [model.initial]
    seen_set = {model.initial}
    for u in seen:
        for v in model.delta[u]:
            if int(v) not in seen_set:
                seen_set.add(int(v))
                seen.append(int(v))
    return seen


@dataclass(frozen=True)
class SyncMachine:
    """Pairwise product of two models reading the same word."""

    left: RewardMachineModel
    right: RewardMachineModel

    @property
    def initial(self) -> tuple[int, int]:
        return (self.left.initial, self.right.initial)

    def step(self, node: tuple[int, int], label: int) -> tuple[int, int]:
        return (int(self.left.delta[node[0], label]), int(self.right.delta[node[1], label]))

    def run(self, sigma: Sequence[int]) -> tuple[int, int]:
        node = self.initial
        for label in sigma:
            node = self.step(node, label)
        return node

    def as_model(self) -> RewardMachineModel:
        """Flatten to an ordinary model; pair (u1, u2) becomes node ``u1 * n2 + u2``."""
        n1, n2 = self.left.n_nodes, self.right.n_nodes
        if self.left.n_props != self.right.n_props:
            raise MachineError("alphabet mismatch")
        delta = self.left.delta[:, None, :] * n2 + self.right.delta[None, :, :]
        return RewardMachineModel(delta.reshape(n1 * n2, -1),
                                  self.left.initial * n2 + self.right.initial)
