"""Equilibrium paths against two sequential attacks.

After the first attack on ``t'`` the Defender commits to a walk; the Attacker
watches and fires the second resource at the worst moment.  The value of a
walk is therefore the minimum, over its steps, of the best contingency
response available at that step, so walks can be built column by column in a
vertex-by-time matrix, keeping for every cell only the incoming walk with the
highest such minimum.

A walk ends either on ``t'`` (caught; the last resource then faces the
patroller standing on ``t'``) or by conceding ``t'`` wherever the patroller
is.  Staying in place or revisiting a vertex only shrinks the residual
deadline of ``t'``, so the matrix never needs more than |V| columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .covering import CoveringRoute, make_route, single_attack_value, srg_utility
from .model import Board, BudgetExceeded, PatrolInstance

EPS = 1e-12


@dataclass
class ResponseCell:
    incoming_route: tuple[int, ...] = ()
    contingency: tuple[int, ...] | None = None  # items of the worst second attack
    utility: float = 0.0
    reachable: bool = False


@dataclass
class ResponseMatrix:
    n: int
    horizon: int
    cells: list[list[ResponseCell]] = field(default_factory=list)

    def __post_init__(self):
        if not self.cells:
            self.cells = [[ResponseCell() for _ in range(self.horizon + 1)] for _ in range(self.n)]

    def __getitem__(self, key: tuple[int, int]) -> ResponseCell:
        i, j = key
        return self.cells[i][j]

    def column(self, j: int):
        return [(i, row[j]) for i, row in enumerate(self.cells) if row[j].reachable]


@dataclass(frozen=True)
class EquilibriumAnswer:
    path: tuple[str, ...]
    contingency: CoveringRoute | None
    value: float
    placement: str
    ends: str = "reach"  # "reach" t' in time, or "concede" it

    def to_dict(self) -> dict:
        return {
            "placement": self.placement,
            "value": self.value,
            "path": list(self.path),
            "ends": self.ends,
            "contingency": list(self.contingency.waypoints) if self.contingency else None,
        }


def attack_prediction_idx(
    board: Board, v: int, first: int, elapsed: int, resolved: frozenset[int] = frozenset()
) -> tuple[tuple[tuple[int, int], ...], float]:
    """Worst second attack against a patroller on ``v``, ``elapsed`` turns after ``first`` was hit."""
    residual = board.deadline[first] - elapsed
    worst_items, worst_u = None, None
    for t in board.targets:
        if t == first or t in resolved:
            continue
        items = tuple(sorted([(t, board.deadline[t]), (first, residual)]))
        u = srg_utility(board, v, items)
        if worst_u is None or u < worst_u - EPS:
            worst_items, worst_u = items, u
    if worst_items is None:
        worst_items = ((first, residual),)
        worst_u = srg_utility(board, v, worst_items)
    return worst_items, worst_u


def attack_prediction(v: str, first_target: str, elapsed: int, instance: PatrolInstance) -> tuple[CoveringRoute, float]:
    """Covering route and utility for the worst-timed second attack seen from ``v``."""
    board = instance.compiled
    first = board.index[first_target]
    if elapsed < 0 or elapsed > board.deadline[first]:
        raise ValueError(f"elapsed must lie in [0, {board.deadline[first]}]")
    items, u = attack_prediction_idx(board, board.index[v], first, elapsed)
    return make_route(board, board.index[v], items), u


def _better(u: float, path: tuple[int, ...], cell: ResponseCell, board: Board) -> bool:
    if not cell.reachable or u > cell.utility + EPS:
        return True
    if u < cell.utility - EPS:
        return False
    return [board.rank[x] for x in path] < [board.rank[x] for x in cell.incoming_route]


def fill_matrix(board: Board, start: int, first: int, horizon: int | None = None) -> tuple[ResponseMatrix, list]:
    """Fill the response matrix and collect terminal options (utility, path, contingency, kind)."""
    d = board.deadline[first]
    horizon = min(d, board.n - 1) if horizon is None else min(d, horizon)
    M = ResponseMatrix(board.n, horizon)
    concede_tail = {}

    def concede_value(i: int) -> float:
        if i not in concede_tail:
            concede_tail[i] = -board.value[first] + single_attack_value(board, i, frozenset([first]))
        return concede_tail[i]

    # a second attack in the same turn as the first is the simultaneous opening, valued by the caller
    M.cells[start][0] = ResponseCell((start,), None, 0.0, True)
    terminals = []
    for j in range(horizon + 1):
        for i, cell in M.column(j):
            if i == first:
                terminals.append((cell.utility, cell.incoming_route, cell.contingency, "reach"))
                continue
            terminals.append((min(cell.utility, concede_value(i)), cell.incoming_route, None, "concede"))
            if j == horizon:
                continue
            for adj in board.adj[i]:
                if adj in cell.incoming_route:
                    continue
                items, pred = attack_prediction_idx(board, adj, first, j + 1)
                u = min(cell.utility, pred)
                path = cell.incoming_route + (adj,)
                target = M.cells[adj][j + 1]
                if _better(u, path, target, board):
                    contingency = items if pred <= cell.utility else cell.contingency
                    M.cells[adj][j + 1] = ResponseCell(path, contingency, u, True)
    return M, terminals


def _pick(board: Board, terminals):
    def key(term):
        u, path, _, _ = term
        return (-round(u, 12), len(path), [board.rank[x] for x in path])

    return min(terminals, key=key)


def path_finder(v_s: str, first_target: str, instance: PatrolInstance, horizon: int | None = None) -> EquilibriumAnswer:
    """Best Defender walk after the first of two attacks hits ``first_target`` with the patroller on ``v_s``."""
    board = instance.compiled
    if first_target not in instance.targets:
        raise ValueError(f"{first_target!r} is not a target")
    start, first = board.index[v_s], board.index[first_target]
    _, terminals = fill_matrix(board, start, first, horizon)
    u, path, contingency, kind = _pick(board, terminals)
    cover = None
    if contingency is not None:
        # the worst second attack strikes at the first step whose prediction equals the walk value
        for step, v in enumerate(path[1:], 1):
            items, pred = attack_prediction_idx(board, v, first, step)
            if abs(pred - u) <= EPS:
                cover = make_route(board, v, items)
                break
    return EquilibriumAnswer(tuple(board.name(x) for x in path), cover, u, v_s, kind)


def placement_value_k2(board: Board, v: int) -> tuple[float, dict]:
    """Worst opening against a patroller placed on ``v`` when the Attacker holds two resources."""
    table = {}
    worst = 0.0
    for t in board.targets:
        _, terminals = fill_matrix(board, v, t)
        u = _pick(board, terminals)[0]
        table[("seq", t)] = u
        worst = min(worst, u)
    for a, b in combinations(board.targets, 2):
        u = srg_utility(board, v, ((a, board.deadline[a]), (b, board.deadline[b])))
        table[("sim", a, b)] = u
        worst = min(worst, u)
    return worst, table


def best_placement_k2(instance: PatrolInstance, max_vertices: int = 500, start: str | None = None) -> EquilibriumAnswer:
    """Placement maximizing the worst opening (single first attack or two at once) for k = 2.

    ``start`` (default: the instance's declared start, if any) pins the placement.
    """
    board = instance.compiled
    if board.n > max_vertices:
        raise BudgetExceeded(f"{board.n} vertices after unit expansion exceed the bound of {max_vertices}")
    start = start if start is not None else instance.defender_start
    candidates = [board.index[start]] if start is not None else board.original
    best = None
    for v in sorted(candidates, key=board.name):
        u, _ = placement_value_k2(board, v)
        if best is None or u > best[0] + EPS:
            best = (u, v)
    u, v = best
    # report the equilibrium path against the Attacker's worst single first attack
    worst = None
    for t in board.targets:
        ans = path_finder(board.name(v), board.name(t), instance)
        if worst is None or ans.value < worst.value - EPS:
            worst = ans
    return EquilibriumAnswer(worst.path, worst.contingency, u, board.name(v), worst.ends)


def response_table(instance: PatrolInstance) -> list[dict]:
    """Per (placement, first target) PathFinder values plus simultaneous openings."""
    board = instance.compiled
    rows = []
    for v in sorted(board.original, key=board.name):
        for t in board.targets:
            ans = path_finder(board.name(v), board.name(t), instance)
            rows.append(
                {"placement": board.name(v), "first": board.name(t), "value": ans.value,
                 "ends": ans.ends, "path": " ".join(ans.path)}
            )
    return rows
