"""Negative examples: pairs of prefixes that must end in different machine nodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .machine import Word, compress_trace
from .ptp import PrefixTreePolicy

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class Certificate:
    """Evidence for one pair: the common state, the L1 gap and the two tail bounds."""

    state: int
    gap: float
    delta1: float = 0.0
    delta2: float = 0.0


def canonical_pair(a: Word, b: Word) -> tuple[Word, Word]:
    a, b = tuple(a), tuple(b)
    if a == b:
        raise ValueError(f"a negative example needs two different words, got {a} twice")
    return (a, b) if (len(a), a) <= (len(b), b) else (b, a)


@dataclass
class NegativeExampleSet:
    """Unordered word pairs stored in canonical (shorter, lexicographically first) order."""

    pairs: dict[tuple[Word, Word], Certificate | None] = field(default_factory=dict)
    weights: dict[tuple[Word, Word], float] = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Word, Word]]) -> "NegativeExampleSet":
        out = cls()
        for a, b in pairs:
            out.add(a, b)
        return out

    def add(self, a: Word, b: Word, cert: Certificate | None = None, weight: float = 1.0) -> None:
        key = canonical_pair(a, b)
        if key not in self.pairs or self.pairs[key] is None:
            self.pairs[key] = cert
        self.weights.setdefault(key, weight)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[Word, Word]]:
        return iter(self.pairs)

    def __contains__(self, pair) -> bool:
        try:
            return canonical_pair(*pair) in self.pairs
        except ValueError:
            return False

    def union(self, other: "NegativeExampleSet") -> "NegativeExampleSet":
        out = NegativeExampleSet(dict(self.pairs), dict(self.weights))
        for key, cert in other.pairs.items():
            out.add(*key, cert, other.weights.get(key, 1.0))
        return out

    def words(self) -> set[Word]:
        return {w for pair in self.pairs for w in pair}

    def max_symbol(self) -> int:
        return max((max(w) for w in self.words() if w), default=-1)

    def max_length(self) -> int:
        return max((len(w) for w in self.words()), default=0)


@dataclass
class ConflictGroup:
    """At ``state``, every word of ``classes[a]`` conflicts with every word of ``classes[b]``
    for ``(a, b)`` in ``conflicts``; ``gaps`` holds the L1 distances."""

    state: int
    classes: list[tuple[Word, ...]]
    conflicts: list[tuple[int, int]]
    gaps: list[float]


@dataclass
class ConflictGroups:
    """Exact negative examples in factored form.

    Equivalent to the pair set of ``to_pairs`` but linear in the number of
    words, which matters for deep prefix trees where a state can be reached
    by tens of thousands of words on each side.
    """

    groups: list[ConflictGroup] = field(default_factory=list)

    def __len__(self) -> int:
        """Number of (class, class) conflicts, not of word pairs."""
        return sum(len(g.conflicts) for g in self.groups)

    def n_pairs(self) -> int:
        """Word pairs counted per state; a pair flagged at two states counts twice."""
        return sum(len(g.classes[a]) * len(g.classes[b]) for g in self.groups
                   for a, b in g.conflicts)

    def iter_pairs(self) -> Iterator[tuple[Word, Word, Certificate]]:
        for g in self.groups:
            for (a, b), gap in zip(g.conflicts, g.gaps):
                cert = Certificate(g.state, gap)
                for w1 in g.classes[a]:
                    for w2 in g.classes[b]:
                        yield w1, w2, cert

    def to_pairs(self) -> NegativeExampleSet:
        out = NegativeExampleSet()
        for a, b, cert in self.iter_pairs():
            out.add(a, b, cert)
        return out

    def words(self) -> set[Word]:
        out: set[Word] = set()
        for g in self.groups:
            for a, b in g.conflicts:
                out.update(g.classes[a])
                out.update(g.classes[b])
        return out

    def max_symbol(self) -> int:
        return max((max(w) for w in self.words() if w), default=-1)

    def max_length(self) -> int:
        return max((len(w) for w in self.words()), default=0)


def exact_conflicts(ptp: PrefixTreePolicy, tol: float = DEFAULT_TOL) -> ConflictGroups:
    """Words grouped per state by their exact action distribution; two groups
    conflict when their distributions differ by more than ``tol`` (sup norm)."""
    if not ptp.exact:
        raise ValueError("exact negatives need an exact prefix tree policy; "
                         "use statistical_negatives for estimated ones")
    out = ConflictGroups()
    for s, (words, probs, _) in ptp.by_state().items():
        if len(words) < 2:
            continue
        # rows come from finitely many machine nodes; compare distinct rows only
        classes, inverse = np.unique(probs, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        conflicts, gaps = [], []
        for a in range(len(classes) - 1):
            diff = np.abs(classes[a + 1:] - classes[a])
            for off in np.flatnonzero(diff.max(axis=1) > tol):
                conflicts.append((a, a + 1 + int(off)))
                gaps.append(float(diff[off].sum()))
        if conflicts:
            order = np.argsort(inverse, kind="stable")
            bounds = np.searchsorted(inverse[order], np.arange(len(classes) + 1))
            members = [tuple(words[i] for i in order[bounds[c]:bounds[c + 1]])
                       for c in range(len(classes))]
            out.groups.append(ConflictGroup(s, members, conflicts, gaps))
    return out


def exact_negatives(ptp: PrefixTreePolicy, tol: float = DEFAULT_TOL) -> NegativeExampleSet:
    """All pairs whose action distributions differ by more than ``tol`` (sup norm)
    at some state reachable under both words."""
    return exact_conflicts(ptp, tol).to_pairs()


def hoeffding_delta(n: np.ndarray | float, eps: np.ndarray | float, n_actions: int) -> np.ndarray:
    """Weissman-type tail bound ``(2^|A| - 2) exp(-n eps^2 / 2)``."""
    return (2.0 ** n_actions - 2.0) * np.exp(-0.5 * np.asarray(n, dtype=float) * np.asarray(eps) ** 2)


def min_visits_for(alpha: float, n_actions: int) -> float:
    """Below this count a single cell can never be certified (``eps <= 1``)."""
    c = 2.0 ** n_actions - 2.0
    return 2.0 * math.log(c / alpha) if c > alpha else 0.0


def statistical_negatives(ptp: PrefixTreePolicy, alpha: float) -> NegativeExampleSet:
    """Pairs certified at level ``alpha`` from empirical distributions.

    For a state visited ``n1`` and ``n2`` times under the two words, with
    ``eps`` half the L1 distance of the estimates, the pair is flagged when
    ``delta(n1) + delta(n2) <= alpha``.  The certificate kept is the one with
    the smallest ``delta1 + delta2``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    A = ptp.n_actions
    floor = min_visits_for(alpha, A)
    best: dict[tuple[Word, Word], Certificate] = {}
    for s, (words, probs, visits) in ptp.by_state(min_visits=floor).items():
        m = len(words)
        if m < 2:
            continue
        for i in range(m - 1):
            eps = 0.5 * np.abs(probs[i + 1:] - probs[i]).sum(axis=1)
            d1 = hoeffding_delta(visits[i], eps, A)
            d2 = hoeffding_delta(visits[i + 1:], eps, A)
            tot = d1 + d2
            for off in np.flatnonzero(tot <= alpha):
                j = i + 1 + int(off)
                key = canonical_pair(words[i], words[j])
                swap = key[0] != tuple(words[i])
                a, b = (float(d2[off]), float(d1[off])) if swap else (float(d1[off]), float(d2[off]))
                cert = Certificate(s, 2.0 * float(eps[off]), a, b)
                old = best.get(key)
                if old is None or a + b < old.delta1 + old.delta2:
                    best[key] = cert
    out = NegativeExampleSet()
    for key, cert in best.items():
        out.add(*key, cert)
    return out


def compress_negatives(neg: NegativeExampleSet, non_stuttering: bool = True) -> NegativeExampleSet:
    """Replace every pair by its stutter-free form and merge duplicates.

    Pairs whose two words compress to the same word are dropped: no
    non-stuttering machine can separate them.
    """
    if not non_stuttering:
        return neg
    out = NegativeExampleSet()
    for (a, b), cert in neg.pairs.items():
        ca, cb = compress_trace(a), compress_trace(b)
        if ca != cb:
            out.add(ca, cb, cert, neg.weights.get((a, b), 1.0))
    return out
