"""Maze with teleports: an agent walks to a goal cell through corridors that
may contain paired teleport pads.

Four unit-cost move actions. Stepping onto a pad relocates the agent to the
paired pad as part of that same move, so teleports create non-local edges
without a dedicated action.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ContractError, GenerationError, ParseError
from .base import DIRECTIONS, Instance, add_cells, in_bounds, rotate_cell, rotated_dims

TAG = "maze"
CHANNELS = 8  # agent, wall, floor, goal, teleport pairs 1-4
MAX_TELEPORT_PAIRS = 4
AGENT_SLOTS = 1


class MazeAction(NamedTuple):
    name: str
    index: int
    delta: tuple


ACTIONS = tuple(MazeAction(name, i, delta) for i, (name, delta) in enumerate(DIRECTIONS))
ACTION_COUNT = len(ACTIONS)
ACTION_BY_NAME = {a.name: a for a in ACTIONS}


@dataclass(frozen=True)
class MazeBoard:
    h: int
    w: int
    walls: frozenset
    goal: tuple
    teleports: tuple  # ((pair_id, cell_a, cell_b), ...) with pair_id in 0..3

    def __post_init__(self):
        if self.goal in self.walls or not in_bounds(self.goal, self.h, self.w):
            raise ContractError(f"goal {self.goal} on a wall or outside the grid")
        pads = []
        for pair_id, a, b in self.teleports:
            if not (0 <= pair_id < MAX_TELEPORT_PAIRS):
                raise ContractError(f"teleport pair id {pair_id} out of range")
            pads.extend((a, b))
        if len(set(pads)) != len(pads):
            raise ContractError("teleport pads are not mutually distinct")
        for pad in pads:
            if pad in self.walls or not in_bounds(pad, self.h, self.w):
                raise ContractError(f"teleport pad {pad} on a wall or outside the grid")
            if pad == self.goal:
                raise ContractError("teleport pad on the goal cell")

    def pad_exit(self, cell):
        """Paired pad for a pad cell, or None for ordinary cells."""
        for _, a, b in self.teleports:
            if cell == a:
                return b
            if cell == b:
                return a
        return None


@dataclass(frozen=True)
class MazeState:
    board: MazeBoard
    agent: tuple

    def __post_init__(self):
        if self.agent in self.board.walls or not in_bounds(self.agent, self.board.h, self.board.w):
            raise ContractError(f"agent {self.agent} on a wall or outside the grid")
        object.__setattr__(self, "_hash", hash(self.agent))

    def __hash__(self):
        return self._hash


def apply_action(state, action):
    board = state.board
    target = add_cells(state.agent, action.delta)
    if not in_bounds(target, board.h, board.w) or target in board.walls:
        return None
    landing = board.pad_exit(target)
    return MazeState(board, landing if landing is not None else target)


def successors(state):
    board = state.board
    ar, ac = state.agent
    h, w = board.h, board.w
    out = []
    for di, (_, (dr, dc)) in enumerate(DIRECTIONS):
        t = (ar + dr, ac + dc)
        if not (0 <= t[0] < h and 0 <= t[1] < w) or t in board.walls:
            continue
        landing = board.pad_exit(t)
        out.append((ACTIONS[di], MazeState(board, landing if landing is not None else t)))
    return out


def goal_condition(state):
    return state.board.goal


def is_goal(state, goal=None):
    goal = state.board.goal if goal is None else goal
    return state.agent == goal


def agent_cells(state):
    return [state.agent]


def canonical_goal_state(state):
    return MazeState(state.board, state.board.goal)


def encode(state):
    board = state.board
    enc = np.zeros((board.h, board.w, CHANNELS), dtype=np.float32)
    enc[:, :, 2] = 1.0  # floor by default
    for r, c in board.walls:
        enc[r, c, 1] = 1.0
        enc[r, c, 2] = 0.0
    ar, ac = state.agent
    enc[ar, ac, 0] = 1.0
    enc[ar, ac, 2] = 0.0
    enc[board.goal[0], board.goal[1], 3] = 1.0
    for pair_id, a, b in board.teleports:
        enc[a[0], a[1], 4 + pair_id] = 1.0
        enc[b[0], b[1], 4 + pair_id] = 1.0
    return enc


def _forward_edges(board):
    """Directed move edges (from, landing) of the teleport-aware grid graph."""
    edges = []
    for r in range(board.h):
        for c in range(board.w):
            cell = (r, c)
            if cell in board.walls:
                continue
            for _, delta in DIRECTIONS:
                target = add_cells(cell, delta)
                if not in_bounds(target, board.h, board.w) or target in board.walls:
                    continue
                landing = board.pad_exit(target)
                edges.append((cell, landing if landing is not None else target))
    return edges


def goal_distances(board):
    """Exact distance-to-goal for every cell, by backward breadth-first
    search over the reversed move edges (teleports make the graph directed)."""
    preds = {}
    for src, dst in _forward_edges(board):
        preds.setdefault(dst, []).append(src)
    dist = {board.goal: 0}
    frontier = deque([board.goal])
    while frontier:
        cell = frontier.popleft()
        for src in preds.get(cell, ()):
            if src not in dist:
                dist[src] = dist[cell] + 1
                frontier.append(src)
    return dist


def admissible_heuristic(instance):
    dist = goal_distances(instance.initial_state.board)

    def h(state):
        d = dist.get(state.agent)
        return float("inf") if d is None else float(d)

    return h


# --- text format ----------------------------------------------------------

def render_body(instance):
    state = instance.initial_state
    board = state.board
    pad_digit = {}
    for pair_id, a, b in board.teleports:
        pad_digit[a] = str(pair_id + 1)
        pad_digit[b] = str(pair_id + 1)
    if state.agent in pad_digit:
        raise ContractError("cannot serialize a maze whose agent stands on a teleport pad")
    rows = []
    for r in range(board.h):
        chars = []
        for c in range(board.w):
            cell = (r, c)
            if cell in board.walls:
                chars.append("#")
            elif cell == state.agent:
                chars.append("S")
            elif cell == board.goal:
                chars.append("G")
            elif cell in pad_digit:
                chars.append(pad_digit[cell])
            else:
                chars.append(".")
        rows.append("".join(chars))
    return rows


def parse_body(lines, h, w, line_offset=0):
    if len(lines) != h:
        raise ParseError(f"expected {h} grid rows, got {len(lines)}", line=line_offset + 1)
    walls = set()
    agent = goal = None
    pads = {}
    for r, line in enumerate(lines):
        if len(line) != w:
            raise ParseError(f"row has {len(line)} glyphs, expected {w}", line=line_offset + r + 1)
        for c, ch in enumerate(line):
            cell = (r, c)
            if ch == "#":
                walls.add(cell)
            elif ch == "S":
                if agent is not None:
                    raise ParseError("more than one agent", line=line_offset + r + 1, column=c + 1)
                agent = cell
            elif ch == "G":
                if goal is not None:
                    raise ParseError("more than one goal", line=line_offset + r + 1, column=c + 1)
                goal = cell
            elif ch in "1234":
                pads.setdefault(ch, []).append(cell)
            elif ch != ".":
                raise ParseError(f"unknown glyph {ch!r}", line=line_offset + r + 1, column=c + 1)
    if agent is None:
        raise ParseError("no agent ('S') in grid", line=line_offset + 1)
    if goal is None:
        raise ParseError("no goal ('G') in grid", line=line_offset + 1)
    teleports = []
    for digit in sorted(pads):
        cells = pads[digit]
        if len(cells) != 2:
            raise ParseError(f"teleport digit {digit!r} appears {len(cells)} times, expected 2",
                             line=line_offset + 1)
        teleports.append((int(digit) - 1, cells[0], cells[1]))
    board = MazeBoard(h, w, frozenset(walls), goal, tuple(teleports))
    return MazeState(board, agent), goal


# --- generation -----------------------------------------------------------

@dataclass(frozen=True)
class MazeParams:
    h: int
    w: int
    teleport_pairs: int = 4
    extra_openings: int = -1  # -1 -> derived from area

    def __post_init__(self):
        if self.h < 3 or self.w < 3:
            raise GenerationError("maze must be at least 3x3")
        if not (0 <= self.teleport_pairs <= MAX_TELEPORT_PAIRS):
            raise GenerationError(f"teleport pairs must be 0..{MAX_TELEPORT_PAIRS}")


def _carve_maze(h, w, rng):
    """Depth-first perfect maze on the odd-coordinate room lattice."""
    walls = {(r, c) for r in range(h) for c in range(w)}
    rooms = [(r, c) for r in range(1, h, 2) for c in range(1, w, 2)]
    if not rooms:
        rooms = [(1, 1)]
    start = rooms[0]
    walls.discard(start)
    stack = [start]
    visited = {start}
    while stack:
        room = stack[-1]
        options = []
        for _, delta in DIRECTIONS:
            nxt = (room[0] + 2 * delta[0], room[1] + 2 * delta[1])
            if in_bounds(nxt, h, w) and nxt[0] % 2 == 1 and nxt[1] % 2 == 1 and nxt not in visited:
                options.append((nxt, add_cells(room, delta)))
        if options:
            nxt, between = rng.choice(options)
            walls.discard(between)
            walls.discard(nxt)
            visited.add(nxt)
            stack.append(nxt)
        else:
            stack.pop()
    return walls


def _reachable_from(board, start):
    seen = {start}
    frontier = deque([start])
    while frontier:
        state = MazeState(board, frontier.popleft())
        for _, nxt in successors(state):
            if nxt.agent not in seen:
                seen.add(nxt.agent)
                frontier.append(nxt.agent)
    return seen


def generate(params, seed, certify=True, certify_budget=None):
    from ..search import oracle_solve

    rng = random.Random(seed)
    for attempt in range(40):
        walls = _carve_maze(params.h, params.w, rng)
        openings = params.extra_openings
        if openings < 0:
            openings = max(1, (params.h * params.w) // 30)
        interior = sorted(w_ for w_ in walls
                          if 0 < w_[0] < params.h - 1 and 0 < w_[1] < params.w - 1)
        for cell in rng.sample(interior, min(openings, len(interior))):
            walls.discard(cell)
        free = sorted((r, c) for r in range(params.h) for c in range(params.w)
                      if (r, c) not in walls)
        if len(free) < 2 + 2 * params.teleport_pairs:
            continue
        agent, goal = free[0], free[-1]  # upper-left start, lower-right goal
        if agent == goal:
            continue
        candidates = [cell for cell in free if cell not in (agent, goal)]
        placed = False
        for _ in range(20):
            pads = rng.sample(candidates, 2 * params.teleport_pairs)
            teleports = tuple((i, pads[2 * i], pads[2 * i + 1]) for i in range(params.teleport_pairs))
            board = MazeBoard(params.h, params.w, frozenset(walls), goal, teleports)
            if goal in _reachable_from(board, agent):
                placed = True
                break
        if not placed:
            continue
        state = MazeState(board, agent)
        instance = Instance(domain=TAG, initial_state=state, goal=goal,
                            metadata={"seed": seed, "teleport_pairs": params.teleport_pairs})
        if certify:
            plan = oracle_solve(instance, budget=certify_budget)
            instance.certificate = plan
            instance.metadata["oracle_length"] = plan.length
        return instance
    raise GenerationError(
        f"could not generate a solvable {params.h}x{params.w} maze (seed {seed})")


# --- rotation ---------------------------------------------------------------

def rotate_instance(instance, quarter_turns):
    state = instance.initial_state
    board = state.board
    h, w = board.h, board.w
    nh, nw = rotated_dims(quarter_turns, h, w)
    rot = lambda cell: rotate_cell(cell, quarter_turns, h, w)
    teleports = tuple((pair_id, rot(a), rot(b)) for pair_id, a, b in board.teleports)
    new_board = MazeBoard(nh, nw, frozenset(map(rot, board.walls)), rot(board.goal), teleports)
    new_state = MazeState(new_board, rot(state.agent))
    metadata = dict(instance.metadata)
    turns = (metadata.pop("rotation", 0) + quarter_turns) % 4
    if turns:
        metadata["rotation"] = turns
    return Instance(domain=TAG, initial_state=new_state, goal=new_board.goal, metadata=metadata)
