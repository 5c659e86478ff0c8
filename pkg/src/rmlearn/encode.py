"""Propositional encoding of reward machine model synthesis.

Transition variables ``b[i, k, j]`` (node ``i`` moves to ``j`` on proposition
``k``) come first, numbered ``1 + (i * n_props + k) * n + j``.  Occupancy
variables ``x[w, i]`` ("word ``w`` ends in node ``i``") follow, one block of
``n`` per node of the prefix tree spanned by the negative examples.  In MaxSAT
mode every pair also gets a relaxation variable that is true when the pair is
violated; the soft clauses are the unit negations of those.

Grouped negatives (``ConflictGroups``) add one variable ``y[c, i]`` per word
class and node, implied by ``x[w, i]`` for each member; a conflict between two
classes is then ``n`` binary clauses instead of one block per word pair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from pysat.formula import CNF, WCNF

from .machine import RewardMachineModel, Word, run
from .negex import ConflictGroups, NegativeExampleSet


class EncodingError(ValueError):
    pass


@dataclass
class SatInstance:
    n_nodes: int
    n_props: int
    non_stuttering: bool
    maxsat: bool
    tree: dict[Word, int]
    pairs: list[tuple[Word, Word]]
    hard: list[list[int]] = field(default_factory=list)
    soft: list[list[int]] = field(default_factory=list)
    weights: list[int] = field(default_factory=list)
    relax: list[int] = field(default_factory=list)
    n_vars: int = 0
    classes: list[tuple[Word, ...]] = field(default_factory=list)
    class_base: int = 0

    @property
    def n_b(self) -> int:
        return self.n_nodes * self.n_props * self.n_nodes

    def b(self, i: int, k: int, j: int) -> int:
        return 1 + (i * self.n_props + k) * self.n_nodes + j

    def x(self, w: Word, i: int) -> int:
        return 1 + self.n_b + self.tree[w] * self.n_nodes + i

    def y(self, c: int, i: int) -> int:
        return 1 + self.class_base + c * self.n_nodes + i

    def projection(self) -> list[int]:
        return list(range(1, self.n_b + 1))

    def hard_cnf(self) -> list[list[int]]:
        """Hard clauses plus the pair clauses forced hard (relaxations fixed false)."""
        return self.hard + [[-r] for r in self.relax] if self.maxsat else self.hard


def _tree(words) -> dict[Word, int]:
    tree: dict[Word, int] = {(): 0}
    for w in sorted(words, key=lambda w: (len(w), w)):
        for t in range(1, len(w) + 1):
            if w[:t] not in tree:
                tree[w[:t]] = len(tree)
    return tree


def encode(neg: NegativeExampleSet | ConflictGroups, n: int, n_props: int,
           non_stuttering: bool = False, maxsat: bool = False) -> SatInstance:
    if n < 1:
        raise EncodingError("need at least one node")
    grouped = isinstance(neg, ConflictGroups)
    if grouped and maxsat:
        raise EncodingError("grouped negatives only support hard constraints; "
                            "expand them with to_pairs() for MaxSAT")
    if neg.max_symbol() >= n_props:
        raise EncodingError(f"negative example uses proposition {neg.max_symbol()} "
                            f"but the alphabet has {n_props}")
    pairs = [] if grouped else sorted(neg.pairs, key=lambda p: (len(p[0]) + len(p[1]), p))
    inst = SatInstance(n, n_props, non_stuttering, maxsat, _tree(neg.words()), pairs)
    hard = inst.hard
    b = inst.b
    nodes = range(n)

    def exactly_one(lits):
        hard.append(list(lits))
        hard.extend([-p, -q] for p, q in itertools.combinations(lits, 2))

    for i, k in itertools.product(nodes, range(n_props)):
        exactly_one([b(i, k, j) for j in nodes])
    if non_stuttering:
        for i, k, j in itertools.product(nodes, range(n_props), nodes):
            if i != j:
                hard.append([-b(i, k, j), b(j, k, j)])

    x = inst.x
    hard.append([x((), 0)])
    hard.extend([-x((), i)] for i in range(1, n))
    for w in inst.tree:
        if not w:
            continue
        parent, k = w[:-1], w[-1]
        for i, j in itertools.product(nodes, nodes):
            hard.append([-x(parent, i), -b(i, k, j), x(w, j)])
        exactly_one([x(w, i) for i in nodes])
    inst.n_vars = inst.n_b + len(inst.tree) * n
    if grouped:
        _encode_groups(inst, neg)
        return inst

    for p, q in pairs:
        if maxsat:
            inst.n_vars += 1
            r = inst.n_vars
            inst.relax.append(r)
            hard.extend([-x(p, i), -x(q, i), r] for i in nodes)
            inst.soft.append([-r])
            inst.weights.append(1)
        else:
            hard.extend([-x(p, i), -x(q, i)] for i in nodes)
    return inst


def _encode_groups(inst: SatInstance, groups: ConflictGroups) -> None:
    n = inst.n_nodes
    index: dict[tuple[Word, ...], int] = {}
    edges: set[tuple[int, int]] = set()
    for g in groups.groups:
        for a, b in g.conflicts:
            ca, cb = (index.setdefault(tuple(sorted(g.classes[c])), len(index))
                      for c in (a, b))
            edges.add((min(ca, cb), max(ca, cb)))
    inst.classes = sorted(index, key=index.get)
    inst.class_base = inst.n_vars
    inst.n_vars += len(inst.classes) * n
    y, x, hard = inst.y, inst.x, inst.hard
    for c, members in enumerate(inst.classes):
        for w in members:
            hard.extend([-x(w, i), y(c, i)] for i in range(n))
    for c, d in sorted(edges):
        hard.extend([-y(c, i), -y(d, i)] for i in range(n))


def decode(inst: SatInstance, assignment) -> RewardMachineModel:
    """Read the transition table off a (full or projected) assignment."""
    true = {lit for lit in assignment if lit > 0}
    n, P = inst.n_nodes, inst.n_props
    delta = np.empty((n, P), dtype=np.int64)
    for i, k in itertools.product(range(n), range(P)):
        hits = [j for j in range(n) if inst.b(i, k, j) in true]
        if len(hits) != 1:
            raise EncodingError(f"row ({i}, {k}) of the assignment is not one-hot: {hits}")
        delta[i, k] = hits[0]
    return RewardMachineModel(delta)


def characteristic_assignment(inst: SatInstance, model: RewardMachineModel) -> list[int]:
    """Full assignment that describes ``model`` (the inverse of ``decode``)."""
    if model.n_nodes != inst.n_nodes or model.n_props != inst.n_props or model.initial != 0:
        raise EncodingError("model does not fit the instance")
    true = {inst.b(i, k, int(model.delta[i, k]))
            for i in range(inst.n_nodes) for k in range(inst.n_props)}
    for w in inst.tree:
        true.add(inst.x(w, run(model, w)))
    for r, (p, q) in zip(inst.relax, inst.pairs):
        if run(model, p) == run(model, q):
            true.add(r)
    for c, members in enumerate(inst.classes):
        for i in {run(model, w) for w in members}:
            true.add(inst.y(c, i))
    return [v if v in true else -v for v in range(1, inst.n_vars + 1)]


def blocking_clause(inst: SatInstance, model: RewardMachineModel) -> list[int]:
    return [-inst.b(i, k, int(model.delta[i, k]))
            for i in range(inst.n_nodes) for k in range(inst.n_props)]


def to_cnf(inst: SatInstance) -> CNF:
    return CNF(from_clauses=inst.hard_cnf())


def to_wcnf(inst: SatInstance) -> WCNF:
    w = WCNF()
    for c in inst.hard:
        w.append(c)
    for c, wt in zip(inst.soft, inst.weights):
        w.append(c, weight=wt)
    return w


def to_dimacs(inst: SatInstance) -> str:
    cnf = to_cnf(inst)
    cnf.nv = max(cnf.nv, inst.n_vars)
    return cnf.to_dimacs() + "\n"


def to_wcnf_text(inst: SatInstance) -> str:
    w = to_wcnf(inst)
    w.nv = max(w.nv, inst.n_vars)
    return w.to_dimacs() + "\n"
