"""Sokoban: an agent pushes boxes onto target cells.

Eight unit-cost actions: move and push, each in the four grid directions.
A push requires a box in the move direction and a free cell beyond it;
boxes can never be pulled.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..errors import ContractError, GenerationError, OracleError, ParseError
from .base import DIRECTIONS, Instance, add_cells, in_bounds, rotate_cell, rotated_dims

TAG = "sokoban"
CHANNELS = 5  # wall, empty, box, agent, target
AGENT_SLOTS = 1


class SokobanAction(NamedTuple):
    name: str
    index: int
    kind: str  # "move" or "push"
    delta: tuple


ACTIONS = tuple(
    SokobanAction(f"{kind}_{dname}", i, kind, delta)
    for i, (kind, (dname, delta)) in enumerate(
        [("move", d) for d in DIRECTIONS] + [("push", d) for d in DIRECTIONS])
)
ACTION_COUNT = len(ACTIONS)
ACTION_BY_NAME = {a.name: a for a in ACTIONS}


@dataclass(frozen=True)
class SokobanBoard:
    h: int
    w: int
    walls: frozenset
    targets: frozenset


@dataclass(frozen=True)
class SokobanState:
    board: SokobanBoard
    agent: tuple
    boxes: frozenset

    def __post_init__(self):
        b = self.board
        if self.agent in b.walls or not in_bounds(self.agent, b.h, b.w):
            raise ContractError(f"agent at {self.agent} is on a wall or outside the grid")
        if self.agent in self.boxes:
            raise ContractError(f"agent at {self.agent} overlaps a box")
        if len(self.boxes) != len(b.targets):
            raise ContractError(f"{len(self.boxes)} boxes vs {len(b.targets)} targets")
        if self.boxes & b.walls:
            raise ContractError("box placed on a wall")
        # closed sets key on the dynamic fields; cache their hash
        object.__setattr__(self, "_hash", hash((self.agent, self.boxes)))

    def __hash__(self):
        return self._hash


def _free(board, cell, boxes):
    return in_bounds(cell, board.h, board.w) and cell not in board.walls and cell not in boxes


def apply_action(state, action):
    """Resulting state, or None when the action is inapplicable."""
    target = add_cells(state.agent, action.delta)
    board = state.board
    if not in_bounds(target, board.h, board.w) or target in board.walls:
        return None
    if action.kind == "move":
        if target in state.boxes:
            return None
        return SokobanState(board, target, state.boxes)
    if target not in state.boxes:
        return None
    beyond = add_cells(target, action.delta)
    if not _free(board, beyond, state.boxes):
        return None
    return SokobanState(board, target, (state.boxes - {target}) | {beyond})


def successors(state):
    """Applicable (action, state) pairs in action-index order; each direction
    is classified once (blocked / box / free) and shared by move and push."""
    board = state.board
    boxes = state.boxes
    ar, ac = state.agent
    h, w = board.h, board.w
    targets = []
    for _, (dr, dc) in DIRECTIONS:
        t = (ar + dr, ac + dc)
        if not (0 <= t[0] < h and 0 <= t[1] < w) or t in board.walls:
            targets.append(None)
        else:
            targets.append((t, (dr, dc)))
    out = []
    for di, entry in enumerate(targets):  # moves
        if entry is None:
            continue
        t, _ = entry
        if t not in boxes:
            out.append((ACTIONS[di], SokobanState(board, t, boxes)))
    for di, entry in enumerate(targets):  # pushes
        if entry is None:
            continue
        t, (dr, dc) = entry
        if t in boxes:
            beyond = (t[0] + dr, t[1] + dc)
            if (0 <= beyond[0] < h and 0 <= beyond[1] < w
                    and beyond not in board.walls and beyond not in boxes):
                out.append((ACTIONS[4 + di], SokobanState(board, t, (boxes - {t}) | {beyond})))
    return out


def goal_condition(state):
    return state.board.targets


def is_goal(state, goal=None):
    goal = state.board.targets if goal is None else goal
    return goal <= state.boxes


def agent_cells(state):
    return [state.agent]


def canonical_goal_state(state):
    """Boxes on targets; the agent parked on the first row-major free
    non-target cell, making the goal encoding fixed per instance."""
    board = state.board
    for r in range(board.h):
        for c in range(board.w):
            cell = (r, c)
            if cell not in board.walls and cell not in board.targets:
                return SokobanState(board, cell, frozenset(board.targets))
    raise ContractError("no free non-target cell to park the agent in the goal state")


def encode(state):
    board = state.board
    enc = np.zeros((board.h, board.w, CHANNELS), dtype=np.float32)
    enc[:, :, 1] = 1.0  # empty by default
    for r, c in board.walls:
        enc[r, c, 0] = 1.0
        enc[r, c, 1] = 0.0
    for r, c in state.boxes:
        enc[r, c, 2] = 1.0
        enc[r, c, 1] = 0.0
    ar, ac = state.agent
    enc[ar, ac, 3] = 1.0
    enc[ar, ac, 1] = 0.0
    for r, c in board.targets:
        enc[r, c, 4] = 1.0
    return enc


def admissible_heuristic(instance):
    """Sum over boxes of the wall-respecting distance to the nearest target
    (box interactions and agent positioning ignored)."""
    board = instance.initial_state.board
    dist = {}
    frontier = deque()
    for t in board.targets:
        dist[t] = 0
        frontier.append(t)
    while frontier:
        cell = frontier.popleft()
        for _, delta in DIRECTIONS:
            nxt = add_cells(cell, delta)
            if in_bounds(nxt, board.h, board.w) and nxt not in board.walls and nxt not in dist:
                dist[nxt] = dist[cell] + 1
                frontier.append(nxt)

    def h(state):
        total = 0
        for box in state.boxes:
            d = dist.get(box)
            if d is None:
                return float("inf")
            total += d
        return float(total)

    return h


# --- text format ----------------------------------------------------------

_GLYPHS = {"#", " ", "$", ".", "@", "*", "+"}


def render_body(instance):
    state = instance.initial_state
    board = state.board
    rows = []
    for r in range(board.h):
        chars = []
        for c in range(board.w):
            cell = (r, c)
            if cell in board.walls:
                chars.append("#")
            elif cell in state.boxes:
                chars.append("*" if cell in board.targets else "$")
            elif cell == state.agent:
                chars.append("+" if cell in board.targets else "@")
            elif cell in board.targets:
                chars.append(".")
            else:
                chars.append(" ")
        rows.append("".join(chars))
    return rows


def parse_body(lines, h, w, line_offset=0):
    if len(lines) != h:
        raise ParseError(f"expected {h} grid rows, got {len(lines)}", line=line_offset + 1)
    walls, targets, boxes = set(), set(), set()
    agent = None
    for r, line in enumerate(lines):
        if len(line) > w:
            raise ParseError(f"row longer than w={w}", line=line_offset + r + 1, column=w + 1)
        line = line.ljust(w)
        for c, ch in enumerate(line):
            if ch not in _GLYPHS:
                raise ParseError(f"unknown glyph {ch!r}", line=line_offset + r + 1, column=c + 1)
            cell = (r, c)
            if ch == "#":
                walls.add(cell)
            elif ch in ("$", "*"):
                boxes.add(cell)
            elif ch in ("@", "+"):
                if agent is not None:
                    raise ParseError("more than one agent", line=line_offset + r + 1, column=c + 1)
                agent = cell
            if ch in (".", "*", "+"):
                targets.add(cell)
    if agent is None:
        raise ParseError("no agent in grid", line=line_offset + 1)
    if len(boxes) != len(targets):
        raise ParseError(f"{len(boxes)} boxes vs {len(targets)} targets", line=line_offset + 1)
    board = SokobanBoard(h, w, frozenset(walls), frozenset(targets))
    state = SokobanState(board, agent, frozenset(boxes))
    return state, board.targets


# --- generation -----------------------------------------------------------

@dataclass(frozen=True)
class SokobanParams:
    h: int
    w: int
    boxes: int = 3
    wall_density: float = 0.12
    pull_steps: int = 0  # 0 -> derived from size and box count

    def __post_init__(self):
        if self.h < 4 or self.w < 4:
            raise GenerationError("grid must be at least 4x4 (border walls leave a 2x2 interior)")
        if self.boxes < 1:
            raise GenerationError("need at least one box")


def _connected(cells):
    cells = set(cells)
    if not cells:
        return True
    seen = {next(iter(sorted(cells)))}
    frontier = deque(seen)
    while frontier:
        cell = frontier.popleft()
        for _, delta in DIRECTIONS:
            nxt = add_cells(cell, delta)
            if nxt in cells and nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return len(seen) == len(cells)


def _reverse_scramble(board, targets, rng, steps):
    """Walk backwards from the solved position using pulls and moves; the
    inverted action sequence is a witness that the result is solvable."""
    boxes = set(targets)
    free_start = sorted(
        (r, c) for r in range(board.h) for c in range(board.w)
        if (r, c) not in board.walls and (r, c) not in boxes)
    agent = rng.choice(free_start)
    for _ in range(steps):
        pulls, moves = [], []
        for _, delta in DIRECTIONS:
            dest = add_cells(agent, delta)
            origin = add_cells(agent, (-delta[0], -delta[1]))
            if _free(board, dest, boxes):
                moves.append(dest)
                if origin in boxes:
                    pulls.append((dest, origin))
        if pulls and (rng.random() < 0.6 or not moves):
            dest, origin = rng.choice(sorted(pulls))
            boxes.discard(origin)
            boxes.add(agent)
            agent = dest
        elif moves:
            agent = rng.choice(sorted(moves))
        else:
            break
    return agent, frozenset(boxes)


def generate(params, seed, certify=True, certify_budget=None):
    from ..search import oracle_solve  # local import: search depends on domains

    rng = random.Random(seed)
    for attempt in range(60):
        walls = set()
        for r in range(params.h):
            for c in range(params.w):
                border = r in (0, params.h - 1) or c in (0, params.w - 1)
                if border or rng.random() < params.wall_density:
                    walls.add((r, c))
        free = [(r, c) for r in range(params.h) for c in range(params.w) if (r, c) not in walls]
        if len(free) < 2 * params.boxes + 2 or not _connected(free):
            continue
        targets = frozenset(rng.sample(free, params.boxes))
        board = SokobanBoard(params.h, params.w, frozenset(walls), targets)
        steps = params.pull_steps or (4 * (params.h + params.w) + 12 * params.boxes)
        agent, boxes = _reverse_scramble(board, targets, rng, steps)
        if boxes == targets:
            continue  # scramble failed to displace anything
        state = SokobanState(board, agent, boxes)
        instance = Instance(
            domain=TAG, initial_state=state, goal=targets,
            metadata={"seed": seed, "boxes": params.boxes})
        if certify:
            try:
                plan = oracle_solve(instance, budget=certify_budget)
            except OracleError:
                continue
            instance.certificate = plan
            instance.metadata["oracle_length"] = plan.length
        return instance
    raise GenerationError(
        f"could not generate a solvable {params.h}x{params.w} sokoban instance with "
        f"{params.boxes} boxes after 60 attempts (seed {seed})")


# --- rotation ---------------------------------------------------------------

def rotate_instance(instance, quarter_turns):
    state = instance.initial_state
    board = state.board
    h, w = board.h, board.w
    nh, nw = rotated_dims(quarter_turns, h, w)
    rot = lambda cell: rotate_cell(cell, quarter_turns, h, w)
    new_board = SokobanBoard(nh, nw,
                             frozenset(map(rot, board.walls)),
                             frozenset(map(rot, board.targets)))
    new_state = SokobanState(new_board, rot(state.agent), frozenset(map(rot, state.boxes)))
    metadata = dict(instance.metadata)
    turns = (metadata.pop("rotation", 0) + quarter_turns) % 4
    if turns:
        metadata["rotation"] = turns
    return Instance(domain=TAG, initial_state=new_state, goal=new_board.targets, metadata=metadata)
