"""Shared pieces of the grid domains: directions, the Instance wrapper, and
cell rotation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

DIRECTIONS = (
    ("up", (-1, 0)),
    ("down", (1, 0)),
    ("left", (0, -1)),
    ("right", (0, 1)),
)


@dataclass
class Instance:
    """A planning problem: an initial state plus its goal condition.

    The goal condition is also embedded in the state (targets, goal cell,
    goal coloring), so states are self-contained; the explicit field keeps
    the task tuple visible. `certificate` optionally carries an oracle plan
    attached by the generator; it is in-memory only, never serialized.
    """

    domain: str
    initial_state: object
    goal: object
    metadata: dict = field(default_factory=dict)
    certificate: object = field(default=None, repr=False, compare=False)

    @property
    def instance_id(self):
        name = self.metadata.get("name")
        if name:
            return str(name)
        board = self.initial_state.board
        seed = self.metadata.get("seed")
        return f"{self.domain}-{board.h}x{board.w}-s{seed}"


def rotate_cell(cell, quarter_turns, h, w):
    """Rotate a (row, col) cell clockwise by quarter turns on an h*w grid."""
    r, c = cell
    for _ in range(quarter_turns % 4):
        r, c = c, h - 1 - r
        h, w = w, h
    return (r, c)


def rotated_dims(quarter_turns, h, w):
    return (h, w) if quarter_turns % 2 == 0 else (w, h)


def in_bounds(cell, h, w):
    return 0 <= cell[0] < h and 0 <= cell[1] < w


def add_cells(cell, delta):
    return (cell[0] + delta[0], cell[1] + delta[1])
