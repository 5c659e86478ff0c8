"""Benchmark environments: room grids, block world, and the labyrinth maze."""

from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path

import numpy as np

from .machine import RewardMachine, RewardMachineModel
from .mdp import LabeledMdp

GAMMA = 0.99

# up, right, down, left
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


def read_room_map(text: str) -> list[list[str]]:
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("room map must be a non-empty rectangle")
    return rows


def load_room_map(name: str) -> list[list[str]]:
    return read_room_map(resources.files("rmlearn.data").joinpath(name).read_text())


def gridworld(room_map: list[list[str]], propositions: tuple[str, ...], p_slip: float = 0.1,
              start_label: str | None = None, gamma: float = GAMMA) -> LabeledMdp:
    """4-action grid; with prob. ``p_slip`` the move goes to a random lateral
    neighbour instead.  Bumping into a wall leaves the agent in place."""
    if not 0.0 <= p_slip < 1.0:
        raise ValueError("p_slip must be in [0, 1)")
    H, W = len(room_map), len(room_map[0])
    n = H * W
    P = np.zeros((n, 4, n))

    def target(r, c, m):
        dr, dc = MOVES[m]
        rr, cc = r + dr, c + dc
        if 0 <= rr < H and 0 <= cc < W:
            return rr * W + cc
        return r * W + c

    for r, c in itertools.product(range(H), range(W)):
        s = r * W + c
        for a in range(4):
            P[s, a, target(r, c, a)] += 1.0 - p_slip
            for lat in ((a + 1) % 4, (a + 3) % 4):
                P[s, a, target(r, c, lat)] += p_slip / 2
    labels = np.array([propositions.index(room_map[r][c]) for r in range(H) for c in range(W)])
    if start_label is None:
        mu0 = np.full(n, 1.0 / n)
    else:
        mask = labels == propositions.index(start_label)
        mu0 = mask / mask.sum()
    return LabeledMdp.from_dense(P, mu0, gamma, labels, propositions)


def patrol_machine(propositions=("A", "B", "C", "D"), reward: float = 1.0) -> RewardMachine:
    """A -> B -> C -> D cycle; closing the cycle with D pays ``reward``.

    Propositions outside the cycle (e.g. a hallway) self-loop everywhere.
    """
    idx = {p: i for i, p in enumerate(propositions)}
    edges = [(0, idx["A"], 1), (1, idx["B"], 2), (2, idx["C"], 3), (3, idx["D"], 0)]
    model = RewardMachineModel.from_edges(4, len(propositions), edges, propositions=propositions)
    rewards = np.zeros((4, len(propositions)))
    rewards[3, idx["D"]] = reward
    return RewardMachine(model, rewards)


def make_patrol(p_slip: float = 0.1, room_map: str = "patrol.map", gamma: float = GAMMA,
                reward: float = 1.0, start_label: str | None = None) -> tuple[LabeledMdp, RewardMachine]:
    """4x4 room grid and the patrol machine.

    The start is uniform over all cells unless ``start_label`` names a room.
    Starting only in room A leaves the initial node interchangeable with u1.
    """
    props = ("A", "B", "C", "D")
    mdp = gridworld(load_room_map(room_map), props, p_slip, start_label=start_label, gamma=gamma)
    return mdp, patrol_machine(props, reward)


def make_patrol_transfer(p_slip: float = 0.1, gamma: float = GAMMA, reward: float = 1.0,
                         start_label: str | None = None) -> tuple[LabeledMdp, RewardMachine]:
    """Same dynamics as the patrol grid with a different room assignment."""
    return make_patrol(p_slip, "patrol_transfer.map", gamma, reward, start_label)


def make_hallway(p_slip: float = 0.1, gamma: float = GAMMA, start_label: str | None = None,
                 reward: float = 1.0) -> tuple[LabeledMdp, RewardMachine]:
    props = ("A", "B", "C", "D", "H")
    mdp = gridworld(load_room_map("hallway.map"), props, p_slip, start_label=start_label,
                   gamma=gamma)
    return mdp, patrol_machine(props, reward)


# ---------------------------------------------------------------- block world

BLOCKS = ("G", "Y", "R")
N_PILES = 3
STACKED = ("G", "Y", "R")  # bottom to top


def block_configurations() -> list[tuple[tuple[str, ...], ...]]:
    """All placements of the three distinct blocks on three ordered piles."""
    configs = []
    for perm in itertools.permutations(BLOCKS):
        for cuts in itertools.combinations_with_replacement(range(len(BLOCKS) + 1), N_PILES - 1):
            bounds = (0,) + cuts + (len(BLOCKS),)
            configs.append(tuple(perm[bounds[i]:bounds[i + 1]] for i in range(N_PILES)))
    return sorted(set(configs))


def _full_stack(pile: int) -> tuple[tuple[str, ...], ...]:
    return tuple(STACKED if i == pile else () for i in range(N_PILES))


ST1, ST2, ST3 = _full_stack(0), _full_stack(1), _full_stack(2)
ST_BAD = (("G",), (), ("R", "Y"))


def blockworld(labeling: dict, default: str, propositions: tuple[str, ...],
               gamma: float = GAMMA, start: str = "intermediate") -> LabeledMdp:
    """Deterministic pick-and-place block world.

    Action ``3 * i + j`` moves the top block of pile ``i`` onto pile ``j``;
    picking from an empty pile or placing back on the same pile is a no-op.
    """
    configs = block_configurations()
    index = {c: k for k, c in enumerate(configs)}
    n = len(configs)
    transitions = []
    for k, conf in enumerate(configs):
        for i, j in itertools.product(range(N_PILES), repeat=2):
            if not conf[i] or i == j:
                nxt = k
            else:
                piles = [list(p) for p in conf]
                piles[j].append(piles[i].pop())
                nxt = index[tuple(tuple(p) for p in piles)]
            transitions.append((k, 3 * i + j, nxt, 1.0))
    labels = np.array([propositions.index(labeling.get(c, default)) for c in configs])
    if start == "intermediate":
        mask = labels == propositions.index(default)
        mu0 = mask / mask.sum()
    else:
        mu0 = np.full(n, 1.0 / n)
    return LabeledMdp.from_transitions(n, N_PILES * N_PILES, transitions, mu0, gamma, labels,
                                       propositions)


def make_blockworld(task: str = "stack", gamma: float = GAMMA) -> tuple[LabeledMdp, RewardMachine]:
    """``stack``: after st1 then st2, reward 1 for every step spent in st3.
    ``stack_avoid``: reach st2 after st1 without touching st_bd."""
    if task == "stack":
        props = ("st1", "st2", "st3", "i")
        mdp = blockworld({ST1: "st1", ST2: "st2", ST3: "st3"}, "i", props, gamma)
        # st3 pays at u2 on every step the stack is kept
        model = RewardMachineModel.from_edges(3, 4, [(0, 0, 1), (1, 1, 2)], propositions=props)
        rewards = np.zeros((3, 4))
        rewards[2, 2] = 1.0
        return mdp, RewardMachine(model, rewards)
    if task == "stack_avoid":
        props = ("st1", "st2", "st3", "i", "st_bd")
        mdp = blockworld({ST1: "st1", ST2: "st2", ST3: "st3", ST_BAD: "st_bd"}, "i", props, gamma)
        st1, st2, bad = 0, 1, 4
        model = RewardMachineModel.from_edges(
            4, 5, [(0, st1, 1), (0, bad, 3), (1, st2, 2), (1, bad, 3)], propositions=props)
        rewards = np.zeros((4, 5))
        rewards[2, :] = 1.0
        rewards[1, st2] = 1.0
        rewards[0, bad] = rewards[1, bad] = 0.2
        return mdp, RewardMachine(model, rewards)
    raise ValueError(f"unknown block world task {task!r}")


def stack_avoid_minimal_model() -> RewardMachineModel:
    """Three-node machine that merges the two absorbing stack-avoid nodes."""
    props = ("st1", "st2", "st3", "i", "st_bd")
    return RewardMachineModel.from_edges(3, 5, [(0, 0, 1), (0, 4, 2), (1, 1, 2), (1, 4, 2)],
                                         propositions=props)


def two_node_block_model() -> RewardMachineModel:
    """Toggle between two nodes: st1 switches on, st3 switches back."""
    props = ("st1", "st2", "st3", "i")
    return RewardMachineModel.from_edges(2, 4, [(0, 0, 1), (1, 2, 0)], propositions=props)


def random_node_policy(product, seed: int = 0, concentration: float = 1.0) -> np.ndarray:
    """Arbitrary stochastic policy: an independent Dirichlet draw per product state."""
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.full(product.n_actions, concentration), size=product.n_states)


# ---------------------------------------------------------------- labyrinth

def labyrinth_path() -> Path:
    return Path(str(resources.files("rmlearn.data").joinpath("labyrinth127.mdp")))


def load_maze(path=None) -> LabeledMdp:
    """Load a maze MDP (default: the bundled 127-node binary-tree labyrinth)."""
    from .formats import read_mdp
    return read_mdp(labyrinth_path() if path is None else path)


def load_trajectories(path, mdp: LabeledMdp | None = None):
    """Read ``s a s a ... s`` trajectory lines, validating against ``mdp`` if given."""
    from .formats import load_trajectories as _load
    return _load(path, mdp)


def binary_tree_maze(depth: int = 6, home: int = 0, water: int = 116,
                     gamma: float = GAMMA) -> LabeledMdp:
    """Binary-tree labyrinth with actions stay / right / left / reverse.

    Used to generate the bundled maze file; ``load_maze`` reads the file.
    """
    n = 2 ** (depth + 1) - 1
    transitions = []
    for s in range(n):
        left, right = 2 * s + 1, 2 * s + 2
        parent = (s - 1) // 2 if s > 0 else s
        leaf = left >= n
        targets = (s, s if leaf else right, s if leaf else left, parent)
        for a, t in enumerate(targets):
            transitions.append((s, a, t, 1.0))
    props = ("h", "w", "i")
    labels = np.full(n, 2)
    labels[home] = 0
    labels[water] = 1
    mu0 = np.zeros(n)
    mu0[home] = 1.0
    return LabeledMdp.from_transitions(n, 4, transitions, mu0, gamma, labels, props)


def water_machine() -> RewardMachine:
    """Two-node machine: drink at the water port, then the home port pays."""
    props = ("h", "w", "i")
    model = RewardMachineModel.from_edges(2, 3, [(0, 1, 1)], propositions=props)
    rewards = np.zeros((2, 3))
    rewards[0, 1] = 2.0
    rewards[1, 0] = 1.0
    return RewardMachine(model, rewards)
