"""Exact state-transition systems, one-hot encoders, instance generators and
rotations for the three grid domains, plus the shared instance text format.

Generic operations dispatch on the state's type (or an instance's domain
tag); the per-domain rules live in sokoban.py, maze.py and floortile.py.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ParseError
from . import floortile, maze, sokoban
from .base import Instance, rotate_cell, rotated_dims

MODULES = {sokoban.TAG: sokoban, maze.TAG: maze, floortile.TAG: floortile}
DOMAIN_TAGS = tuple(MODULES)

_STATE_TYPES = {
    sokoban.SokobanState: sokoban,
    maze.MazeState: maze,
    floortile.FloorTileState: floortile,
}


def module_for(obj):
    """Domain module for a tag, state or instance."""
    if isinstance(obj, str):
        try:
            return MODULES[obj]
        except KeyError:
            raise ConfigError(f"unknown domain {obj!r}; expected one of {DOMAIN_TAGS}") from None
    if isinstance(obj, Instance):
        return module_for(obj.domain)
    mod = _STATE_TYPES.get(type(obj))
    if mod is None:
        raise ConfigError(f"not a domain state: {type(obj).__name__}")
    return mod


def successors(state):
    return module_for(state).successors(state)


def apply_action(state, action):
    return module_for(state).apply_action(state, action)


def is_goal(state, goal=None):
    return module_for(state).is_goal(state, goal)


def agent_count(domain_tag):
    return module_for(domain_tag).AGENT_SLOTS


def state_channels(domain_tag):
    return module_for(domain_tag).CHANNELS


def encoded_channels(domain_tag):
    """Channels fed to the network: state and goal encodings stacked."""
    return 2 * module_for(domain_tag).CHANNELS


def action_count(domain_tag):
    return module_for(domain_tag).ACTION_COUNT


def actions_for(domain_tag):
    return module_for(domain_tag).ACTIONS


def action_by_name(domain_tag, name):
    try:
        return module_for(domain_tag).ACTION_BY_NAME[name]
    except KeyError:
        raise ConfigError(f"unknown {domain_tag} action {name!r}") from None


def canonical_goal_state(state):
    return module_for(state).canonical_goal_state(state)


def encode_pair(state, goal_state):
    """One-hot encode a state with its goal state stacked along channels.

    Returns (array of shape h*w*(2*channels), agent cell list for the
    agent-anchored flatten).
    """
    mod = module_for(state)
    if type(goal_state) is not type(state):
        raise ConfigError("state and goal state come from different domains")
    if state.board.h != goal_state.board.h or state.board.w != goal_state.board.w:
        raise ConfigError("state and goal state grids have different dimensions")
    encoded = np.concatenate([mod.encode(state), mod.encode(goal_state)], axis=2)
    return encoded, mod.agent_cells(state)


def admissible_heuristic(instance):
    return module_for(instance).admissible_heuristic(instance)


def generate(domain_tag, params, seed, certify=True, certify_budget=None):
    return module_for(domain_tag).generate(params, seed, certify=certify,
                                           certify_budget=certify_budget)


def rotate(instance, quarter_turns):
    if quarter_turns not in (0, 1, 2, 3):
        raise ConfigError(f"quarter_turns must be in 0..3, got {quarter_turns}")
    return module_for(instance).rotate_instance(instance, quarter_turns)


# --- instance text format ---------------------------------------------------

_RESERVED_KEYS = ("domain", "h", "w")


def serialize_instance(instance):
    """Instance to text: a `domain=<tag> h=<n> w=<n>` header (plus metadata
    tokens) followed by the glyph grid."""
    mod = module_for(instance)
    board = instance.initial_state.board
    tokens = [f"domain={instance.domain}", f"h={board.h}", f"w={board.w}"]
    for key in sorted(instance.metadata):
        value = instance.metadata[key]
        if key in _RESERVED_KEYS or value is None:
            continue
        tokens.append(f"{key}={value}")
    lines = [" ".join(tokens)]
    lines.extend(mod.render_body(instance))
    return "\n".join(lines) + "\n"


def _parse_scalar(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_instance(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty instance text", line=1)
    header = lines[0].split()
    fields = {}
    for i, token in enumerate(header):
        if "=" not in token:
            raise ParseError(f"header token {token!r} is not key=value", line=1, column=i + 1)
        key, value = token.split("=", 1)
        fields[key] = value
    for key in _RESERVED_KEYS:
        if key not in fields:
            raise ParseError(f"header missing {key}=", line=1)
    domain = fields.pop("domain")
    if domain not in MODULES:
        raise ParseError(f"unknown domain {domain!r}", line=1)
    try:
        h = int(fields.pop("h"))
        w = int(fields.pop("w"))
    except ValueError:
        raise ParseError("h= and w= must be integers", line=1) from None
    if h < 1 or w < 1:
        raise ParseError("h and w must be positive", line=1)
    metadata = {key: _parse_scalar(value) for key, value in fields.items()}
    mod = MODULES[domain]
    state, goal = mod.parse_body(lines[1:], h, w, line_offset=1)
    return Instance(domain=domain, initial_state=state, goal=goal, metadata=metadata)
