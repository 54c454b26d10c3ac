"""Vanilla A* with pluggable heuristics, plus the in-repo optimal oracle.

Best-first on f = g + h with unit costs, duplicate detection on a closed set
over full dynamic states, no reopening, and deterministic tie-breaking
(lower h first, then FIFO insertion order). The oracle runs the same search
with a per-domain admissible consistent heuristic, so its plans are optimal.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

from . import domains
from .errors import ContractError, OracleError

SOLVED = "solved"
EXHAUSTED = "exhausted"
TIMED_OUT = "timed_out"

# Desk default: whichever of 200k expansions / 60 s trips first.
DESK_BUDGET_EXPANSIONS = 200_000
DESK_BUDGET_SECONDS = 60.0
# Analog of the ten-minute wall-clock benchmark budget.
PAPER_BUDGET_SECONDS = 600.0


@dataclass(frozen=True)
class SearchBudget:
    max_expansions: int | None = None
    max_seconds: float | None = None

    def __post_init__(self):
        if self.max_expansions is None and self.max_seconds is None:
            raise ContractError("at least one budget bound must be finite")
        if self.max_expansions is not None and self.max_expansions < 1:
            raise ContractError("max_expansions must be >= 1")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ContractError("max_seconds must be positive")

    @classmethod
    def desk(cls):
        return cls(DESK_BUDGET_EXPANSIONS, DESK_BUDGET_SECONDS)

    @classmethod
    def paper(cls):
        return cls(None, PAPER_BUDGET_SECONDS)


@dataclass(frozen=True)
class Plan:
    actions: tuple
    states: tuple  # induced sequence, initial state first; len(states) == len(actions) + 1

    @property
    def length(self):
        return len(self.actions)


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0
    max_open: int = 0
    elapsed: float = 0.0


@dataclass
class SearchResult:
    outcome: str
    plan: Plan | None
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def solved(self):
        return self.outcome == SOLVED


def zero_heuristic(state):
    return 0.0


def _reconstruct(parents, state, start):
    actions, states = [], [state]
    while state != start:
        prev, action = parents[state]
        actions.append(action)
        states.append(prev)
        state = prev
    actions.reverse()
    states.reverse()
    return Plan(tuple(actions), tuple(states))


def astar(instance, heuristic, budget):
    """A* over the instance's transition system.

    The heuristic is memoized per search; budget exhaustion is an outcome,
    not an exception. Returns the plan of the first goal expansion.
    """
    mod = domains.module_for(instance)
    start = instance.initial_state
    goal = instance.goal
    successors = mod.successors
    is_goal = mod.is_goal

    memo = {}

    def h(state):
        value = memo.get(state)
        if value is None:
            value = heuristic(state)
            memo[state] = value
        return value

    stats = SearchStats()
    t0 = time.perf_counter()
    tie = itertools.count()
    h0 = h(start)
    open_heap = [(h0, h0, next(tie), start)]
    best_g = {start: 0}
    parents = {}
    closed = set()
    max_expansions = budget.max_expansions
    max_seconds = budget.max_seconds

    while open_heap:
        stats.max_open = max(stats.max_open, len(open_heap))
        _, _, _, state = heapq.heappop(open_heap)
        if state in closed:
            continue
        closed.add(state)
        stats.expanded += 1
        if is_goal(state, goal):
            stats.elapsed = time.perf_counter() - t0
            return SearchResult(SOLVED, _reconstruct(parents, state, start), stats)
        if max_expansions is not None and stats.expanded >= max_expansions:
            stats.elapsed = time.perf_counter() - t0
            return SearchResult(EXHAUSTED, None, stats)
        if max_seconds is not None and time.perf_counter() - t0 > max_seconds:
            stats.elapsed = time.perf_counter() - t0
            return SearchResult(TIMED_OUT, None, stats)
        g_next = best_g[state] + 1
        for action, nxt in successors(state):
            stats.generated += 1
            if nxt in closed:
                continue
            known = best_g.get(nxt)
            if known is not None and known <= g_next:
                continue
            best_g[nxt] = g_next
            parents[nxt] = (state, action)
            hn = h(nxt)
            heapq.heappush(open_heap, (g_next + hn, hn, next(tie), nxt))
        if len(open_heap) > stats.max_open:
            stats.max_open = len(open_heap)

    stats.elapsed = time.perf_counter() - t0
    return SearchResult(EXHAUSTED, None, stats)


def oracle_solve(instance, budget=None):
    """Optimal plan via A* with the domain's admissible consistent heuristic.

    Raises OracleError when the budget runs out; shrink the instance
    parameters in that case.
    """
    if budget is None:
        budget = SearchBudget(max_expansions=2_000_000, max_seconds=300.0)
    h = domains.admissible_heuristic(instance)
    result = astar(instance, h, budget)
    if not result.solved:
        raise OracleError(
            f"oracle {result.outcome} on {instance.instance_id} after "
            f"{result.stats.expanded} expansions; reduce instance difficulty")
    return result.plan


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    failure_index: int | None  # action index, or len(actions) for a goal-check failure

    def __bool__(self):
        return self.valid


def validate_plan(instance, plan):
    """Replay a plan through the transition rules.

    Valid iff every action applies in sequence from the initial state and the
    final state satisfies the goal. The failure index points at the first
    offending action, or one past the end when only the goal check fails.
    """
    mod = domains.module_for(instance)
    state = instance.initial_state
    for i, action in enumerate(plan.actions):
        nxt = mod.apply_action(state, action)
        if nxt is None:
            return ValidationReport(False, i)
        if i + 1 < len(plan.states) and plan.states[i + 1] != nxt:
            return ValidationReport(False, i)
        state = nxt
    if not mod.is_goal(state, instance.goal):
        return ValidationReport(False, len(plan.actions))
    return ValidationReport(True, None)
