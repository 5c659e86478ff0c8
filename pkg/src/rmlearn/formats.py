"""Line-oriented text formats for MDPs, machines, trajectories, prefix trees,
negative examples and product policies.  ``#`` starts a comment."""

from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .forward import ProductPolicy
from .machine import RewardMachine, RewardMachineModel, Word
from .mdp import LabeledMdp, ProductMdp
from .negex import Certificate, NegativeExampleSet
from .ptp import Demonstrations, PrefixTreePolicy, PtpNode


class FormatError(ValueError):
    pass


def _records(text: str) -> Iterator[tuple[int, list[str]]]:
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def _text(src) -> str:
    if isinstance(src, io.TextIOBase):
        return src.read()
    return Path(src).read_text()


def _fmt(x: float) -> str:
    return repr(float(x))


def _write(path, lines: Sequence[str]) -> None:
    Path(path).write_text("".join(line + "\n" for line in lines))


# ---------------------------------------------------------------------- mdp

def dump_mdp(mdp: LabeledMdp) -> list[str]:
    out = [f"mdp {mdp.n_states} {mdp.n_actions} {_fmt(mdp.gamma)}"]
    out += [f"ap {i} {name}" for i, name in enumerate(mdp.propositions)]
    out += [f"label {s} {int(l)}" for s, l in enumerate(mdp.labels)]
    out += [f"init {s} {_fmt(mdp.mu0[s])}" for s in np.flatnonzero(mdp.mu0)]
    K = mdp.kernel
    A = mdp.n_actions
    for row in range(K.shape[0]):
        s, a = divmod(row, A)
        for k in range(K.indptr[row], K.indptr[row + 1]):
            out.append(f"t {s} {a} {K.indices[k]} {_fmt(K.data[k])}")
    return out


def write_mdp(mdp: LabeledMdp, path) -> None:
    _write(path, dump_mdp(mdp))


def parse_mdp(text: str, renormalize: bool = False) -> LabeledMdp:
    header = None
    props: dict[int, str] = {}
    labels: dict[int, str] = {}
    init: dict[int, float] = {}
    trans = []
    for no, rec in _records(text):
        try:
            kind = rec[0]
            if kind == "mdp":
                header = (int(rec[1]), int(rec[2]), float(rec[3]))
            elif kind == "ap":
                props[int(rec[1])] = rec[2]
            elif kind == "label":
                labels[int(rec[1])] = rec[2]
            elif kind == "init":
                init[int(rec[1])] = float(rec[2])
            elif kind == "t":
                trans.append((int(rec[1]), int(rec[2]), int(rec[3]), float(rec[4])))
            else:
                raise FormatError(f"unknown record {kind!r}")
        except (IndexError, ValueError) as exc:
            raise FormatError(f"line {no}: {exc}") from None
    if header is None:
        raise FormatError("missing 'mdp' header")
    n, A, gamma = header
    if sorted(props) != list(range(len(props))):
        raise FormatError("proposition ids must be 0..k-1")
    names = tuple(props[i] for i in range(len(props)))

    def prop(tok: str) -> int:
        if tok in names:
            return names.index(tok)
        try:
            return int(tok)
        except ValueError:
            raise FormatError(f"unknown proposition {tok!r}") from None

    if set(labels) != set(range(n)):
        raise FormatError("every state needs a label record")
    lab = np.array([prop(labels[s]) for s in range(n)])
    mu0 = np.zeros(n)
    for s, p in init.items():
        mu0[s] = p
    return LabeledMdp.from_transitions(n, A, trans, mu0, gamma, lab, names, renormalize)


def read_mdp(src, renormalize: bool = False) -> LabeledMdp:
    return parse_mdp(_text(src), renormalize)


# ----------------------------------------------------------------- machines

def dump_rm(machine, names: Sequence[str] | None = None) -> list[str]:
    model = machine.model if isinstance(machine, RewardMachine) else machine
    rewards = machine.rewards if isinstance(machine, RewardMachine) else None
    names = names or model.propositions
    out = [f"rm {model.n_nodes} {model.initial}"]
    if names:
        out += [f"ap {i} {name}" for i, name in enumerate(names)]
    else:
        out.append(f"props {model.n_props}")
    for u in range(model.n_nodes):
        for k in range(model.n_props):
            tail = f" {_fmt(rewards[u, k])}" if rewards is not None else ""
            out.append(f"t {u} {k} {int(model.delta[u, k])}{tail}")
    return out


def write_rm(machine, path, names: Sequence[str] | None = None) -> None:
    _write(path, dump_rm(machine, names))


def parse_rm(text: str, n_props: int | None = None):
    """Parse a machine; returns a ``RewardMachine`` when every line carries a reward."""
    header = None
    props: dict[int, str] = {}
    edges = []
    for no, rec in _records(text):
        try:
            if rec[0] == "rm":
                header = (int(rec[1]), int(rec[2]))
            elif rec[0] == "ap":
                props[int(rec[1])] = rec[2]
            elif rec[0] == "props":
                n_props = int(rec[1])
            elif rec[0] == "t":
                edges.append((rec[1], rec[2], rec[3], rec[4] if len(rec) > 4 else None))
            else:
                raise FormatError(f"unknown record {rec[0]!r}")
        except (IndexError, ValueError) as exc:
            raise FormatError(f"line {no}: {exc}") from None
    if header is None:
        raise FormatError("missing 'rm' header")
    n, init = header
    names = tuple(props[i] for i in range(len(props))) if props else None
    P = len(names) if names else n_props
    if P is None:
        raise FormatError("alphabet size unknown: add 'ap' or 'props' records")

    def prop(tok):
        if names and tok in names:
            return names.index(tok)
        return int(tok)

    delta = np.tile(np.arange(n)[:, None], (1, P))
    rewards = np.zeros((n, P))
    with_r = [r is not None for *_, r in edges]
    if any(with_r) and not all(with_r):
        raise FormatError("either every transition carries a reward or none does")
    for u, k, v, r in edges:
        delta[int(u), prop(k)] = int(v)
        if r is not None:
            rewards[int(u), prop(k)] = float(r)
    model = RewardMachineModel(delta, init, names)
    return RewardMachine(model, rewards) if edges and all(with_r) else model


def read_rm(src, n_props: int | None = None):
    return parse_rm(_text(src), n_props)


# ------------------------------------------------------------- trajectories

def dump_trajectories(demos: Demonstrations) -> list[str]:
    out = []
    for states, actions in demos:
        toks = []
        for t, a in enumerate(actions):
            toks += [str(int(states[t])), str(int(a))]
        toks.append(str(int(states[len(actions)])))
        out.append(" ".join(toks))
    return out


def write_trajectories(demos: Demonstrations, path) -> None:
    _write(path, dump_trajectories(demos))


def parse_trajectories(text: str, mdp: LabeledMdp | None = None) -> Demonstrations:
    trajs = []
    for no, rec in _records(text):
        if len(rec) % 2 == 0:
            raise FormatError(f"line {no}: expected alternating states and actions ending in a state")
        vals = np.array([int(x) for x in rec], dtype=np.int64)
        trajs.append((vals[0::2], vals[1::2]))
    demos = Demonstrations(trajs)
    if mdp is not None:
        demos.validate(mdp)
    return demos


def load_trajectories(path, mdp: LabeledMdp | None = None) -> Demonstrations:
    return parse_trajectories(_text(path), mdp)


# ------------------------------------------------------------ prefix trees

def _word_str(word: Word, names: Sequence[str]) -> str:
    return ".".join(names[l] for l in word)


def _word(tok: str, names: Sequence[str]) -> Word:
    try:
        return tuple(names.index(x) for x in tok.split("."))
    except ValueError:
        raise FormatError(f"unknown proposition in {tok!r}") from None


def dump_ptp(ptp: PrefixTreePolicy, names: Sequence[str]) -> list[str]:
    out = [f"ptpdef {ptp.depth} {ptp.n_actions} {'exact' if ptp.exact else 'empirical'} "
           f"{'compressed' if ptp.compressed else 'raw'}"]
    for word in sorted(ptp.table, key=lambda w: (len(w), w)):
        node = ptp.table[word]
        for k, s in enumerate(node.states):
            n = node.visits[k]
            if node.counts is not None:
                row = " ".join(str(int(c)) for c in node.counts[k])
                out.append(f"ptpc {_word_str(word, names)} {int(s)} {row}")
            else:
                count = "inf" if math.isinf(n) else str(int(n))
                row = " ".join(_fmt(p) for p in node.probs[k])
                out.append(f"ptp {_word_str(word, names)} {int(s)} {count} {row}")
    return out


def write_ptp(ptp: PrefixTreePolicy, path, names: Sequence[str]) -> None:
    _write(path, dump_ptp(ptp, names))


def parse_ptp(text: str, names: Sequence[str]) -> PrefixTreePolicy:
    names = list(names)
    head = None
    cells: dict[Word, list] = {}
    for no, rec in _records(text):
        if rec[0] == "ptpdef":
            head = (int(rec[1]), int(rec[2]), rec[3] == "exact", rec[4] == "compressed")
        elif rec[0] in ("ptp", "ptpc"):
            word = _word(rec[1], names)
            s = int(rec[2])
            if rec[0] == "ptpc":
                counts = np.array([int(x) for x in rec[3:]])
                cells.setdefault(word, []).append((s, counts / counts.sum(), float(counts.sum()), counts))
            else:
                n = math.inf if rec[3] == "inf" else float(rec[3])
                cells.setdefault(word, []).append((s, np.array([float(x) for x in rec[4:]]), n, None))
        else:
            raise FormatError(f"line {no}: unknown record {rec[0]!r}")
    if head is None:
        raise FormatError("missing 'ptpdef' header")
    depth, A, exact, compressed = head
    table = {}
    for word, entries in cells.items():
        entries.sort(key=lambda e: e[0])
        counts = [e[3] for e in entries]
        table[word] = PtpNode(np.array([e[0] for e in entries], dtype=np.int64),
                              np.array([e[1] for e in entries]),
                              np.array([e[2] for e in entries]),
                              None if counts[0] is None else np.array(counts))
    return PrefixTreePolicy(A, depth, table, exact, compressed)


def read_ptp(src, names: Sequence[str]) -> PrefixTreePolicy:
    return parse_ptp(_text(src), names)


# -------------------------------------------------------- negative examples

def dump_negatives(neg: NegativeExampleSet, names: Sequence[str]) -> list[str]:
    out = []
    for (a, b), cert in neg.pairs.items():
        line = f"ne {_word_str(a, names)} {_word_str(b, names)}"
        if cert is not None:
            line += f" {cert.state} {_fmt(cert.gap)} {_fmt(cert.delta1)} {_fmt(cert.delta2)}"
        out.append(line)
    return out


def write_negatives(neg: NegativeExampleSet, path, names: Sequence[str]) -> None:
    _write(path, dump_negatives(neg, names))


def parse_negatives(text: str, names: Sequence[str]) -> NegativeExampleSet:
    names = list(names)
    neg = NegativeExampleSet()
    for no, rec in _records(text):
        if rec[0] != "ne" or len(rec) not in (3, 7):
            raise FormatError(f"line {no}: expected 'ne <sigma> <sigma'> [<s> <gap> <d1> <d2>]'")
        cert = None
        if len(rec) == 7:
            cert = Certificate(int(rec[3]), float(rec[4]), float(rec[5]), float(rec[6]))
        neg.add(_word(rec[1], names), _word(rec[2], names), cert)
    return neg


def read_negatives(src, names: Sequence[str]) -> NegativeExampleSet:
    return parse_negatives(_text(src), names)


# ---------------------------------------------------------- product policies

def dump_policy(policy: ProductPolicy) -> list[str]:
    out = []
    for i, (s, u) in enumerate(policy.product.pairs):
        for a, p in enumerate(policy.probs[i]):
            out.append(f"pp {int(s)} {int(u)} {a} {_fmt(p)}")
    return out


def write_policy(policy: ProductPolicy, path) -> None:
    _write(path, dump_policy(policy))


def parse_policy(text: str, product: ProductMdp) -> ProductPolicy:
    probs = np.zeros((product.n_states, product.n_actions))
    known = np.zeros(product.n_states, dtype=bool)
    index = product.index
    for no, rec in _records(text):
        if rec[0] != "pp":
            raise FormatError(f"line {no}: expected 'pp <s> <u> <a> <prob>'")
        i = index.get((int(rec[1]), int(rec[2])))
        if i is None:
            raise FormatError(f"line {no}: pair ({rec[1]}, {rec[2]}) not in the product")
        probs[i, int(rec[3])] = float(rec[4])
        known[i] = True
    probs[~known] = 1.0 / product.n_actions
    return ProductPolicy(product, probs, known=known)


def read_policy(src, product: ProductMdp) -> ProductPolicy:
    return parse_policy(_text(src), product)
