"""Independent reference implementations used as test oracles.

Everything here is deliberately written from the rules directly — plain
tuples, dicts and double loops, no imports from the package's transition or
layer code — so a bug in the implementation cannot hide in its own oracle.
"""

from collections import deque

import numpy as np

DIRS = (("up", (-1, 0)), ("down", (1, 0)), ("left", (0, -1)), ("right", (0, 1)))


# --- numeric gradient oracle -------------------------------------------------

def numeric_gradient(f, arrays, index, eps=1e-5):
    """Central finite differences of scalar f(arrays) w.r.t. arrays[index]."""
    arr = arrays[index]
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        fp = f(arrays)
        flat[i] = original - eps
        fm = f(arrays)
        flat[i] = original
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def max_relative_error(analytic, numeric, floor=1e-7):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


# --- attention oracle ---------------------------------------------------------

def attention_reference(z, head_count):
    """Literal double-loop evaluation of the attention formula: per head,
    channels split into key/query/value thirds, softmax over all positions of
    the query.key dot products, weighted sum of values."""
    h, w, d = z.shape
    per_head = d // head_count
    third = per_head // 3
    out = np.zeros((h, w, head_count * third), dtype=z.dtype)
    for head in range(head_count):
        base = head * per_head
        k = z[:, :, base:base + third]
        q = z[:, :, base + third:base + 2 * third]
        v = z[:, :, base + 2 * third:base + 3 * third]
        for u in range(h):
            for vv in range(w):
                weights = np.zeros((h, w), dtype=z.dtype)
                for r in range(h):
                    for s in range(w):
                        weights[r, s] = np.exp(np.dot(q[u, vv], k[r, s]))
                weights /= weights.sum()
                acc = np.zeros(third, dtype=z.dtype)
                for r in range(h):
                    for s in range(w):
                        acc += weights[r, s] * v[r, s]
                out[u, vv, head * third:(head + 1) * third] = acc
    return out


# --- triple-loop dense oracle ---------------------------------------------------

def dense_reference(x, weights, bias):
    n, m = weights.shape
    out = np.zeros(m, dtype=x.dtype)
    for j in range(m):
        acc = 0.0
        for i in range(n):
            acc += x[i] * weights[i, j]
        out[j] = acc + bias[j]
    return out


# --- plain-tuple domain rules ---------------------------------------------------

def sokoban_ref_successors(h, w, walls, agent, boxes):
    """(action name, agent, boxes) triples from the push/move rules."""
    results = []
    for name, (dr, dc) in DIRS:
        na = (agent[0] + dr, agent[1] + dc)
        if not (0 <= na[0] < h and 0 <= na[1] < w) or na in walls:
            continue
        if na in boxes:
            nb = (na[0] + dr, na[1] + dc)
            if (0 <= nb[0] < h and 0 <= nb[1] < w) and nb not in walls and nb not in boxes:
                results.append((f"push_{name}", na, frozenset(boxes - {na}) | {nb}))
        else:
            results.append((f"move_{name}", na, frozenset(boxes)))
    return results


def maze_ref_successors(h, w, walls, pads, agent):
    """(action name, agent) pairs; pads maps a pad cell to its pair."""
    results = []
    for name, (dr, dc) in DIRS:
        na = (agent[0] + dr, agent[1] + dc)
        if not (0 <= na[0] < h and 0 <= na[1] < w) or na in walls:
            continue
        results.append((name, pads.get(na, na)))
    return results


def floortile_ref_successors(h, w, a1, a2, white, black):
    """(action name, a1, a2, white, black) tuples from the move/paint rules."""
    results = []
    colored = white | black
    for agent_no, pos, other in ((1, a1, a2), (2, a2, a1)):
        reachable = []
        for name, (dr, dc) in DIRS:
            t = (pos[0] + dr, pos[1] + dc)
            if (0 <= t[0] < h and 0 <= t[1] < w) and t != other and t not in colored:
                reachable.append((name, t))
        for name, t in reachable:
            if agent_no == 1:
                results.append((f"a1_move_{name}", t, a2, frozenset(white), frozenset(black)))
            else:
                results.append((f"a2_move_{name}", a1, t, frozenset(white), frozenset(black)))
        for name, t in reachable:
            if agent_no == 1:
                results.append((f"a1_paint_{name}", a1, a2, frozenset(white | {t}), frozenset(black)))
            else:
                results.append((f"a2_paint_{name}", a1, a2, frozenset(white), frozenset(black | {t})))
    return results


# --- plain-tuple projections of package states ----------------------------------

def project(state):
    """Dynamic fields of a package state as a plain hashable tuple."""
    cls = type(state).__name__
    if cls == "SokobanState":
        return (state.agent, frozenset(state.boxes))
    if cls == "MazeState":
        return (state.agent,)
    if cls == "FloorTileState":
        return (state.agent1, state.agent2, frozenset(state.white), frozenset(state.black))
    raise TypeError(cls)


def ref_successor_set(instance, plain):
    """Reference successor set for a plain dynamic state of an instance."""
    board = instance.initial_state.board
    if instance.domain == "sokoban":
        agent, boxes = plain
        triples = sokoban_ref_successors(board.h, board.w, set(board.walls), agent, set(boxes))
        return {(name, (agent2, boxes2)) for name, agent2, boxes2 in triples}
    if instance.domain == "maze":
        (agent,) = plain
        pads = {}
        for _, a, b in board.teleports:
            pads[a] = b
            pads[b] = a
        pairs = maze_ref_successors(board.h, board.w, set(board.walls), pads, agent)
        return {(name, (agent2,)) for name, agent2 in pairs}
    if instance.domain == "floortile":
        a1, a2, white, black = plain
        tuples = floortile_ref_successors(board.h, board.w, a1, a2, set(white), set(black))
        return {(name, (na1, na2, nw, nb)) for name, na1, na2, nw, nb in tuples}
    raise ValueError(instance.domain)


def ref_goal_test(instance, plain):
    board = instance.initial_state.board
    if instance.domain == "sokoban":
        return set(board.targets) <= set(plain[1])
    if instance.domain == "maze":
        return plain[0] == board.goal
    if instance.domain == "floortile":
        return set(board.goal_white) <= set(plain[2]) and set(board.goal_black) <= set(plain[3])
    raise ValueError(instance.domain)


def bfs_optimal_length(instance, limit=2_000_000):
    """Uniform-cost optimal plan length by plain breadth-first search over the
    reference rules; None when no plan exists within the node limit."""
    start = project(instance.initial_state)
    if ref_goal_test(instance, start):
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        plain, depth = frontier.popleft()
        for _, nxt in sorted(ref_successor_set(instance, plain)):
            if nxt in seen:
                continue
            if ref_goal_test(instance, nxt):
                return depth + 1
            seen.add(nxt)
            if len(seen) > limit:
                raise RuntimeError("reference BFS limit exceeded")
            frontier.append((nxt, depth + 1))
    return None


def model_parameter_count_reference(preconv_layers, preconv_filters, blocks, block_filters,
                                    d_e, fc1_width, input_channels, action_count,
                                    dual_head, agents):
    """Shape walk over the architecture, written from the layer arithmetic."""
    total = 0
    cin = input_channels
    for _ in range(preconv_layers):
        total += 3 * 3 * cin * preconv_filters + preconv_filters
        cin = preconv_filters
    branch_total = 0
    c = preconv_filters
    for _ in range(blocks):
        branch_total += 3 * 3 * c * block_filters + block_filters
        c = block_filters // 3 + d_e
    branches = 2 if dual_head else 1
    total += branches * branch_total
    flat = branches * agents * (block_filters // 3 + d_e)
    total += flat * fc1_width + fc1_width
    total += fc1_width * 1 + 1
    if dual_head:
        total += fc1_width * action_count + action_count
    return total
