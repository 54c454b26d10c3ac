"""Typed PDDL export for the three domains.

The emitted domain/problem pairs ground to transition systems matching the
in-repo rules cell for cell, so any external planner can be run on the same
instances by hand. Predicate mapping per domain:

  sokoban:   (at-agent ?c), (at-box ?c), (clear ?c), (adj ?a ?b ?dir);
             wall cells are simply absent from the object set.
  maze:      (at ?c) with precomputed (edge ?from ?to) facts; teleport
             relocation is baked into the edge facts, matching the rule that
             entering a pad lands on its pair.
  floortile: (robot-at ?r ?t), (painted ?t ?c), (clear ?t), (adj ?a ?b),
             (robot-color ?r ?c); clear means uncolored and unoccupied.
"""

from __future__ import annotations

from . import domains
from .domains import floortile, maze, sokoban
from .domains.base import DIRECTIONS, add_cells, in_bounds

SOKOBAN_DOMAIN = """\
(define (domain sokoban)
  (:requirements :strips :typing)
  (:types cell dir)
  (:constants up down left right - dir)
  (:predicates
    (at-agent ?c - cell)
    (at-box ?c - cell)
    (clear ?c - cell)
    (adj ?a - cell ?b - cell ?d - dir))
  (:action move
    :parameters (?from - cell ?to - cell ?d - dir)
    :precondition (and (at-agent ?from) (adj ?from ?to ?d) (clear ?to))
    :effect (and (not (at-agent ?from)) (at-agent ?to)
                 (clear ?from) (not (clear ?to))))
  (:action push
    :parameters (?from - cell ?box - cell ?dest - cell ?d - dir)
    :precondition (and (at-agent ?from) (at-box ?box)
                       (adj ?from ?box ?d) (adj ?box ?dest ?d) (clear ?dest))
    :effect (and (not (at-agent ?from)) (at-agent ?box)
                 (not (at-box ?box)) (at-box ?dest)
                 (clear ?from) (not (clear ?dest)))))
"""

MAZE_DOMAIN = """\
(define (domain maze-teleport)
  (:requirements :strips :typing)
  (:types cell)
  (:predicates
    (at ?c - cell)
    (edge ?from - cell ?to - cell))
  (:action move
    :parameters (?from - cell ?to - cell)
    :precondition (and (at ?from) (edge ?from ?to))
    :effect (and (not (at ?from)) (at ?to))))
"""

FLOORTILE_DOMAIN = """\
(define (domain floortile)
  (:requirements :strips :typing)
  (:types robot tile color)
  (:constants white black - color)
  (:predicates
    (robot-at ?r - robot ?t - tile)
    (adj ?a - tile ?b - tile)
    (clear ?t - tile)
    (painted ?t - tile ?c - color)
    (robot-color ?r - robot ?c - color))
  (:action move
    :parameters (?r - robot ?from - tile ?to - tile)
    :precondition (and (robot-at ?r ?from) (adj ?from ?to) (clear ?to))
    :effect (and (not (robot-at ?r ?from)) (robot-at ?r ?to)
                 (clear ?from) (not (clear ?to))))
  (:action paint
    :parameters (?r - robot ?at - tile ?target - tile ?c - color)
    :precondition (and (robot-at ?r ?at) (adj ?at ?target)
                       (clear ?target) (robot-color ?r ?c))
    :effect (and (painted ?target ?c) (not (clear ?target)))))
"""


def _cell_name(cell):
    return f"c{cell[0]}-{cell[1]}"


def _problem(name, domain_name, objects, init, goal):
    lines = [f"(define (problem {name})", f"  (:domain {domain_name})", "  (:objects"]
    lines.extend(f"    {line}" for line in objects)
    lines.append("  )")
    lines.append("  (:init")
    lines.extend(f"    {fact}" for fact in sorted(init))
    lines.append("  )")
    lines.append("  (:goal (and")
    lines.extend(f"    {fact}" for fact in sorted(goal))
    lines.append("  ))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def _sokoban_problem(instance):
    state = instance.initial_state
    board = state.board
    cells = sorted((r, c) for r in range(board.h) for c in range(board.w)
                   if (r, c) not in board.walls)
    cellset = set(cells)
    init = []
    for cell in cells:
        for dname, delta in DIRECTIONS:
            nxt = add_cells(cell, delta)
            if nxt in cellset:
                init.append(f"(adj {_cell_name(cell)} {_cell_name(nxt)} {dname})")
    init.append(f"(at-agent {_cell_name(state.agent)})")
    for box in state.boxes:
        init.append(f"(at-box {_cell_name(box)})")
    for cell in cells:
        if cell != state.agent and cell not in state.boxes:
            init.append(f"(clear {_cell_name(cell)})")
    goal = [f"(at-box {_cell_name(t)})" for t in board.targets]
    objects = [" ".join(_cell_name(c) for c in cells) + " - cell"]
    return _problem(f"sokoban-{board.h}x{board.w}", "sokoban", objects, init, goal)


def _maze_problem(instance):
    state = instance.initial_state
    board = state.board
    cells = sorted((r, c) for r in range(board.h) for c in range(board.w)
                   if (r, c) not in board.walls)
    edges = sorted(set(maze._forward_edges(board)))
    init = [f"(edge {_cell_name(a)} {_cell_name(b)})" for a, b in edges]
    init.append(f"(at {_cell_name(state.agent)})")
    goal = [f"(at {_cell_name(board.goal)})"]
    objects = [" ".join(_cell_name(c) for c in cells) + " - cell"]
    return _problem(f"maze-{board.h}x{board.w}", "maze-teleport", objects, init, goal)


def _floortile_problem(instance):
    state = instance.initial_state
    board = state.board
    cells = sorted((r, c) for r in range(board.h) for c in range(board.w))
    cellset = set(cells)
    init = ["(robot-color r1 white)", "(robot-color r2 black)"]
    for cell in cells:
        for _, delta in DIRECTIONS:
            nxt = add_cells(cell, delta)
            if nxt in cellset:
                init.append(f"(adj {_cell_name(cell)} {_cell_name(nxt)})")
    init.append(f"(robot-at r1 {_cell_name(state.agent1)})")
    init.append(f"(robot-at r2 {_cell_name(state.agent2)})")
    colored = {}
    for cell in state.white:
        colored[cell] = "white"
    for cell in state.black:
        colored[cell] = "black"
    for cell, color in colored.items():
        init.append(f"(painted {_cell_name(cell)} {color})")
    occupied = {state.agent1, state.agent2}
    for cell in cells:
        if cell not in colored and cell not in occupied:
            init.append(f"(clear {_cell_name(cell)})")
    goal = [f"(painted {_cell_name(c)} white)" for c in board.goal_white]
    goal += [f"(painted {_cell_name(c)} black)" for c in board.goal_black]
    objects = [" ".join(_cell_name(c) for c in cells) + " - tile", "r1 r2 - robot"]
    return _problem(f"floortile-{board.h}x{board.w}", "floortile", objects, init, goal)


_DOMAIN_TEXT = {sokoban.TAG: SOKOBAN_DOMAIN, maze.TAG: MAZE_DOMAIN, floortile.TAG: FLOORTILE_DOMAIN}
_PROBLEM_FN = {sokoban.TAG: _sokoban_problem, maze.TAG: _maze_problem, floortile.TAG: _floortile_problem}


def export_pddl(instance):
    """(domain_text, problem_text) for an instance; deterministic output."""
    domains.module_for(instance)  # validates the tag
    return _DOMAIN_TEXT[instance.domain], _PROBLEM_FN[instance.domain](instance)
