"""Floor-Tile: two agents color a grid to match a target checkerboard.

Agent 1 always paints white, agent 2 always paints black. An agent may move
onto an uncolored unoccupied cell or paint an adjacent uncolored unoccupied
cell with its own color; colored cells can never be entered or repainted, so
every paint is irreversible. The goal fixes the colors of every cell except
two designated cells where the agents can end up.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ContractError, GenerationError, ParseError
from .base import DIRECTIONS, Instance, add_cells, in_bounds, rotate_cell, rotated_dims

TAG = "floortile"
CHANNELS = 4  # agent1, agent2, black, white
AGENT_SLOTS = 2


class FloorTileAction(NamedTuple):
    name: str
    index: int
    agent: int  # 1 or 2
    kind: str  # "move" or "paint"
    delta: tuple


def _build_actions():
    actions = []
    for agent in (1, 2):
        for kind in ("move", "paint"):
            for dname, delta in DIRECTIONS:
                actions.append(FloorTileAction(f"a{agent}_{kind}_{dname}", len(actions), agent, kind, delta))
    return tuple(actions)


ACTIONS = _build_actions()
ACTION_COUNT = len(ACTIONS)
ACTION_BY_NAME = {a.name: a for a in ACTIONS}


@dataclass(frozen=True)
class FloorTileBoard:
    h: int
    w: int
    goal_white: frozenset
    goal_black: frozenset

    def __post_init__(self):
        if self.goal_white & self.goal_black:
            raise ContractError("a goal cell cannot be both white and black")
        for cell in self.goal_white | self.goal_black:
            if not in_bounds(cell, self.h, self.w):
                raise ContractError(f"goal cell {cell} outside the grid")

    def designated_cells(self):
        """Cells outside the goal coloring, in row-major order."""
        colored = self.goal_white | self.goal_black
        return [(r, c) for r in range(self.h) for c in range(self.w) if (r, c) not in colored]


@dataclass(frozen=True)
class FloorTileState:
    board: FloorTileBoard
    agent1: tuple
    agent2: tuple
    white: frozenset
    black: frozenset

    def __post_init__(self):
        if self.agent1 == self.agent2:
            raise ContractError("agents on the same cell")
        for agent in (self.agent1, self.agent2):
            if not in_bounds(agent, self.board.h, self.board.w):
                raise ContractError(f"agent {agent} outside the grid")
            if agent in self.white or agent in self.black:
                raise ContractError(f"agent {agent} standing on a colored cell")
        if self.white & self.black:
            raise ContractError("a cell cannot be both white and black")
        # closed sets key on the dynamic fields; cache their hash
        object.__setattr__(self, "_hash",
                           hash((self.agent1, self.agent2, self.white, self.black)))

    def __hash__(self):
        return self._hash


def apply_action(state, action):
    mover = state.agent1 if action.agent == 1 else state.agent2
    other = state.agent2 if action.agent == 1 else state.agent1
    target = add_cells(mover, action.delta)
    board = state.board
    if not in_bounds(target, board.h, board.w) or target == other:
        return None
    if target in state.white or target in state.black:
        return None
    if action.kind == "move":
        if action.agent == 1:
            return FloorTileState(board, target, state.agent2, state.white, state.black)
        return FloorTileState(board, state.agent1, target, state.white, state.black)
    # paint: agent 1 colors white, agent 2 colors black
    if action.agent == 1:
        return FloorTileState(board, state.agent1, state.agent2, state.white | {target}, state.black)
    return FloorTileState(board, state.agent1, state.agent2, state.white, state.black | {target})


def successors(state):
    """Applicable (action, state) pairs in action-index order.

    Move and paint share the same target precondition (in bounds, uncolored,
    unoccupied), so each direction is checked once per agent.
    """
    out = []
    board = state.board
    h, w = board.h, board.w
    white, black = state.white, state.black
    for agent_no, pos, other in ((1, state.agent1, state.agent2),
                                 (2, state.agent2, state.agent1)):
        ar, ac = pos
        valid = []
        for di, (_, (dr, dc)) in enumerate(DIRECTIONS):
            t = (ar + dr, ac + dc)
            if (0 <= t[0] < h and 0 <= t[1] < w and t != other
                    and t not in white and t not in black):
                valid.append((di, t))
        base = (agent_no - 1) * 8
        for di, t in valid:  # moves
            if agent_no == 1:
                nxt = FloorTileState(board, t, state.agent2, white, black)
            else:
                nxt = FloorTileState(board, state.agent1, t, white, black)
            out.append((ACTIONS[base + di], nxt))
        for di, t in valid:  # paints
            if agent_no == 1:
                nxt = FloorTileState(board, state.agent1, state.agent2, white | {t}, black)
            else:
                nxt = FloorTileState(board, state.agent1, state.agent2, white, black | {t})
            out.append((ACTIONS[base + 4 + di], nxt))
    return out


def goal_condition(state):
    return (state.board.goal_white, state.board.goal_black)


def is_goal(state, goal=None):
    gw, gb = (state.board.goal_white, state.board.goal_black) if goal is None else goal
    return gw <= state.white and gb <= state.black


def agent_cells(state):
    return [state.agent1, state.agent2]


def canonical_goal_state(state):
    board = state.board
    designated = board.designated_cells()
    if len(designated) < 2:
        raise ContractError("goal coloring leaves fewer than two cells for the agents")
    return FloorTileState(board, designated[0], designated[1],
                          frozenset(board.goal_white), frozenset(board.goal_black))


def encode(state):
    board = state.board
    enc = np.zeros((board.h, board.w, CHANNELS), dtype=np.float32)
    enc[state.agent1[0], state.agent1[1], 0] = 1.0
    enc[state.agent2[0], state.agent2[1], 1] = 1.0
    for r, c in state.black:
        enc[r, c, 2] = 1.0
    for r, c in state.white:
        enc[r, c, 3] = 1.0
    return enc


def admissible_heuristic(instance):
    """Number of goal cells not yet correctly colored; each paint fixes at
    most one of them, so this never overestimates."""
    board = instance.initial_state.board
    gw, gb = board.goal_white, board.goal_black

    def h(state):
        return float(len(gw - state.white) + len(gb - state.black))

    return h


# --- text format ----------------------------------------------------------

GOAL_SEPARATOR = "---goal---"


def render_body(instance):
    state = instance.initial_state
    board = state.board
    rows = []
    for r in range(board.h):
        chars = []
        for c in range(board.w):
            cell = (r, c)
            if cell == state.agent1:
                chars.append("A")
            elif cell == state.agent2:
                chars.append("B")
            elif cell in state.white:
                chars.append("w")
            elif cell in state.black:
                chars.append("b")
            else:
                chars.append(".")
        rows.append("".join(chars))
    rows.append(GOAL_SEPARATOR)
    for r in range(board.h):
        chars = []
        for c in range(board.w):
            cell = (r, c)
            if cell in board.goal_white:
                chars.append("w")
            elif cell in board.goal_black:
                chars.append("b")
            else:
                chars.append(".")
        rows.append("".join(chars))
    return rows


def parse_body(lines, h, w, line_offset=0):
    if len(lines) != 2 * h + 1:
        raise ParseError(f"expected {h} state rows, separator, {h} goal rows; got {len(lines)} lines",
                         line=line_offset + 1)
    if lines[h] != GOAL_SEPARATOR:
        raise ParseError(f"expected {GOAL_SEPARATOR!r} separator", line=line_offset + h + 1)
    agent1 = agent2 = None
    white, black = set(), set()
    for r, line in enumerate(lines[:h]):
        if len(line) != w:
            raise ParseError(f"row has {len(line)} glyphs, expected {w}", line=line_offset + r + 1)
        for c, ch in enumerate(line):
            cell = (r, c)
            if ch == "A":
                if agent1 is not None:
                    raise ParseError("more than one 'A' agent", line=line_offset + r + 1, column=c + 1)
                agent1 = cell
            elif ch == "B":
                if agent2 is not None:
                    raise ParseError("more than one 'B' agent", line=line_offset + r + 1, column=c + 1)
                agent2 = cell
            elif ch == "w":
                white.add(cell)
            elif ch == "b":
                black.add(cell)
            elif ch != ".":
                raise ParseError(f"unknown glyph {ch!r}", line=line_offset + r + 1, column=c + 1)
    if agent1 is None or agent2 is None:
        raise ParseError("both agents 'A' and 'B' are required", line=line_offset + 1)
    goal_white, goal_black = set(), set()
    for r, line in enumerate(lines[h + 1:]):
        row_no = line_offset + h + 2 + r
        if len(line) != w:
            raise ParseError(f"goal row has {len(line)} glyphs, expected {w}", line=row_no)
        for c, ch in enumerate(line):
            if ch == "w":
                goal_white.add((r, c))
            elif ch == "b":
                goal_black.add((r, c))
            elif ch != ".":
                raise ParseError(f"unknown goal glyph {ch!r}", line=row_no, column=c + 1)
    if h * w - len(goal_white) - len(goal_black) < 2:
        raise ParseError("goal coloring must leave at least two uncolored cells", line=line_offset + h + 2)
    board = FloorTileBoard(h, w, frozenset(goal_white), frozenset(goal_black))
    state = FloorTileState(board, agent1, agent2, frozenset(white), frozenset(black))
    return state, (board.goal_white, board.goal_black)


# --- generation -----------------------------------------------------------

@dataclass(frozen=True)
class FloorTileParams:
    h: int
    w: int

    def __post_init__(self):
        if self.h * self.w < 4:
            raise GenerationError("grid too small for two agents and a goal coloring")


def _reverse_walk(board, rng, max_steps):
    """Un-paint backwards from the solved coloring; reaching the blank grid
    proves the forward instance solvable."""
    white = set(board.goal_white)
    black = set(board.goal_black)
    designated = board.designated_cells()
    a1, a2 = rng.sample(designated, 2)
    for _ in range(max_steps):
        if not white and not black:
            return a1, a2
        unpaints, moves = [], []
        for agent_no, pos, own in ((1, a1, white), (2, a2, black)):
            other = a2 if agent_no == 1 else a1
            for _, delta in DIRECTIONS:
                t = add_cells(pos, delta)
                if not in_bounds(t, board.h, board.w) or t == other:
                    continue
                if t in own:
                    unpaints.append((agent_no, t))
                elif t not in white and t not in black:
                    moves.append((agent_no, t))
        if unpaints and (rng.random() < 0.65 or not moves):
            agent_no, t = rng.choice(sorted(unpaints))
            (white if agent_no == 1 else black).discard(t)
        elif moves:
            agent_no, t = rng.choice(sorted(moves))
            if agent_no == 1:
                a1 = t
            else:
                a2 = t
        else:
            return None
    return (a1, a2) if not white and not black else None


def generate(params, seed, certify=True, certify_budget=None):
    from ..search import oracle_solve

    rng = random.Random(seed)
    cells = [(r, c) for r in range(params.h) for c in range(params.w)]
    for attempt in range(80):
        flip = rng.random() < 0.5
        finals = rng.sample(cells, 2)
        goal_white, goal_black = set(), set()
        for cell in cells:
            if cell in finals:
                continue
            shade = (cell[0] + cell[1]) % 2 == (1 if flip else 0)
            (goal_white if shade else goal_black).add(cell)
        board = FloorTileBoard(params.h, params.w, frozenset(goal_white), frozenset(goal_black))
        walked = _reverse_walk(board, rng, max_steps=40 * params.h * params.w)
        if walked is None:
            continue
        a1, a2 = walked
        state = FloorTileState(board, a1, a2, frozenset(), frozenset())
        instance = Instance(domain=TAG, initial_state=state,
                            goal=(board.goal_white, board.goal_black),
                            metadata={"seed": seed})
        if certify:
            plan = oracle_solve(instance, budget=certify_budget)
            instance.certificate = plan
            instance.metadata["oracle_length"] = plan.length
        return instance
    raise GenerationError(
        f"could not generate a solvable {params.h}x{params.w} floor-tile instance (seed {seed})")


# --- rotation ---------------------------------------------------------------

def rotate_instance(instance, quarter_turns):
    state = instance.initial_state
    board = state.board
    h, w = board.h, board.w
    nh, nw = rotated_dims(quarter_turns, h, w)
    rot = lambda cell: rotate_cell(cell, quarter_turns, h, w)
    new_board = FloorTileBoard(nh, nw,
                               frozenset(map(rot, board.goal_white)),
                               frozenset(map(rot, board.goal_black)))
    new_state = FloorTileState(new_board, rot(state.agent1), rot(state.agent2),
                               frozenset(map(rot, state.white)), frozenset(map(rot, state.black)))
    metadata = dict(instance.metadata)
    turns = (metadata.pop("rotation", 0) + quarter_turns) % 4
    if turns:
        metadata["rotation"] = turns
    return Instance(domain=TAG, initial_state=new_state,
                    goal=(new_board.goal_white, new_board.goal_black), metadata=metadata)
