"""Responses to simultaneous attacks.

When several targets are under attack and the Attacker has nothing left to
play, the patroller's problem is a deadline-constrained routing problem: pick
an order of attacked targets, walk shortest paths between them, and save
every target reached before its residual deadline expires.  The solver below
is a subset dynamic program over (covered set, last target) keeping the
earliest arrival time.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Mapping

from .model import Board, BudgetExceeded, PatrolInstance

EPS = 1e-12


@dataclass(frozen=True)
class DirectRoute:
    waypoints: tuple[str, ...]
    arrival_times: tuple[int, ...]

    @property
    def walk(self) -> tuple[str, ...]:
        return self.waypoints


@dataclass(frozen=True)
class CoveringRoute:
    route: DirectRoute
    covered: frozenset[str]
    utility: float

    @property
    def waypoints(self) -> tuple[str, ...]:
        return self.route.waypoints


def _feasible_masks(board: Board, start: int, items: tuple[tuple[int, int], ...]) -> dict[int, int]:
    """Earliest arrival per (mask, last) collapsed to: mask -> min arrival at any last."""
    dist = board.dist
    m = len(items)
    # best[mask][i]: earliest time having covered mask, standing at items[i]
    best: dict[int, dict[int, int]] = {}
    for i, (t, res) in enumerate(items):
        a = dist[start][t]
        if a <= res:
            best.setdefault(1 << i, {})[i] = a
    for mask in range(1, 1 << m):  # successors always have larger masks
        row = best.get(mask)
        if not row:
            continue
        for i, a in row.items():
            ti = items[i][0]
            for j in range(m):
                if mask >> j & 1:
                    continue
                tj, rj = items[j]
                b = a + dist[ti][tj]
                if b <= rj:
                    nxt = best.setdefault(mask | 1 << j, {})
                    if b < nxt.get(j, b + 1):
                        nxt[j] = b
    return {mask: min(row.values()) for mask, row in best.items()}


def cover_value(board: Board, start: int, items: tuple[tuple[int, int], ...]) -> float:
    """Largest total value of attacked targets that one walk from ``start`` can save.

    ``items`` is a tuple of (target index, residual deadline) pairs.
    """
    cache = board.__dict__.setdefault("_cover_cache", {})
    key = (start, items)
    hit = cache.get(key)
    if hit is not None:
        return hit
    masks = _feasible_masks(board, start, items)
    best = 0.0
    for mask in masks:
        val = sum(board.value[items[i][0]] for i in range(len(items)) if mask >> i & 1)
        if val > best:
            best = val
    cache[key] = best
    return best


def srg_utility(board: Board, start: int, items: tuple[tuple[int, int], ...]) -> float:
    """Defender utility of the best covering route: minus the value left uncovered."""
    total = sum(board.value[t] for t, _ in items)
    return cover_value(board, start, items) - total


def _lex_order(board: Board, start: int, items: tuple[tuple[int, int], ...], mask: int) -> list[int]:
    """Lexicographically smallest feasible visiting order (by vertex name) of ``mask``."""
    order = sorted((i for i in range(len(items)) if mask >> i & 1), key=lambda i: board.names[items[i][0]])
    dead: set[tuple[int, int, int]] = set()
    dist = board.dist

    def dfs(pos: int, time: int, left: int) -> list[int] | None:
        if not left:
            return []
        if (pos, time, left) in dead:
            return None
        for i in order:
            if left >> i & 1:
                t, res = items[i]
                a = time + dist[pos][t]
                if a <= res:
                    rest = dfs(t, a, left & ~(1 << i))
                    if rest is not None:
                        return [i] + rest
        dead.add((pos, time, left))
        return None

    found = dfs(start, 0, mask)
    assert found is not None
    return found


def best_cover_route(board: Board, start: int, items: tuple[tuple[int, int], ...]) -> tuple[list[int], list[int], float]:
    """Waypoints (target indices), arrival times and utility of the preferred covering route.

    Preference: highest covered value, then fewest waypoints, then the
    lexicographically smallest waypoint sequence.
    """
    masks = _feasible_masks(board, start, items)
    total = sum(board.value[t] for t, _ in items)
    best_val = 0.0
    candidates = [0]
    for mask in sorted(masks):
        val = sum(board.value[items[i][0]] for i in range(len(items)) if mask >> i & 1)
        if val > best_val + EPS:
            best_val, candidates = val, [mask]
        elif abs(val - best_val) <= EPS:
            candidates.append(mask)
    fewest = min(c.bit_count() for c in candidates)
    routes = []
    for mask in candidates:
        if mask.bit_count() != fewest:
            continue
        order = _lex_order(board, start, items, mask) if mask else []
        routes.append([board.names[items[i][0]] for i in order])
    seq = [board.index[n] for n in min(routes)]
    times, pos, clock = [], start, 0
    for t in seq:
        clock += board.dist[pos][t]
        times.append(clock)
        pos = t
    return seq, times, best_val - total


def _items(board: Board, attacked: Mapping[str, int]) -> tuple[tuple[int, int], ...]:
    return tuple(sorted((board.index[t], int(d)) for t, d in attacked.items()))


def solve_srg(start: str, attacked: Mapping[str, int], instance: PatrolInstance) -> CoveringRoute:
    """Best covering route from ``start`` for targets attacked with the given residual deadlines."""
    if not attacked:
        raise ValueError("attacked set must be non-empty")
    board = instance.compiled
    for t, d in attacked.items():
        if t not in instance.targets:
            raise ValueError(f"{t!r} is not a target")
        if d < 0:
            raise ValueError(f"residual deadline of {t!r} is negative")
    return make_route(board, board.index[start], _items(board, attacked))


def make_route(board: Board, start: int, items: tuple[tuple[int, int], ...]) -> CoveringRoute:
    """Named covering route; an attacked start is covered on the spot and not repeated as a waypoint."""
    seq, times, util = best_cover_route(board, start, items)
    here = frozenset()
    if seq and seq[0] == start:
        seq, times, here = seq[1:], times[1:], frozenset([board.names[start]])
    route = DirectRoute((board.names[start],) + tuple(board.names[t] for t in seq), (0,) + tuple(times))
    return CoveringRoute(route, frozenset(route.waypoints[1:]) | here, util)


def sa_feasible(start: str, attacked: Mapping[str, int], instance: PatrolInstance) -> bool:
    """True iff every attacked target can be covered from ``start``."""
    board = instance.compiled
    items = _items(board, attacked)
    full = (1 << len(items)) - 1
    return full in _feasible_masks(board, board.index[start], items)


def single_attack_value(board: Board, pos: int, excluded: frozenset[int] = frozenset()) -> float:
    """Worst single attack against a patroller waiting at ``pos``."""
    worst = 0.0
    for t in board.targets:
        if t in excluded:
            continue
        if board.dist[pos][t] > board.deadline[t]:
            worst = min(worst, -board.value[t])
    return worst


def best_static_placement_k1(instance: PatrolInstance) -> tuple[str, float]:
    """Vertex maximizing the worst case against one attack, and that value."""
    board = instance.compiled
    best = max(board.original, key=lambda v: (single_attack_value(board, v), -v))
    return board.names[best], single_attack_value(board, best)


def simultaneous_attack_value(
    instance: PatrolInstance, k: int, max_subsets: int = 10**6
) -> tuple[str, float]:
    """Game value when the Attacker must spend all k resources at once."""
    board = instance.compiled
    size = min(k, len(board.targets))
    count = comb(len(board.targets), size)
    if count > max_subsets:
        raise BudgetExceeded(f"{count} attack subsets exceed the budget of {max_subsets}")
    best_v, best_u = None, None
    for v in board.original:
        worst = 0.0
        for subset in combinations(board.targets, size):
            items = tuple((t, board.deadline[t]) for t in subset)
            worst = min(worst, srg_utility(board, v, items))
        if best_u is None or worst > best_u + EPS:
            best_v, best_u = v, worst
    return board.names[best_v], best_u
