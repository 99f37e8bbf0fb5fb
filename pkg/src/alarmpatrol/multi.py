"""Equilibria against any number of sequential attacks.

The game splits into *response phases*.  A phase starts when a wave of
attacks lands; the patroller then walks while the Attacker watches, and the
phase ends either when every attack of the wave is resolved or when the
Attacker fires again, which starts a new phase from the current position.
Inside a phase a walk is described by (vertex, elapsed turns, caught set):
the status of every pending attack follows from those three.

With no resources left a phase is a plain covering problem, so it is handed
to the covering solver instead of being walked out.  Between phases, with
nothing pending, the Attacker either opens a new wave or stops.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .covering import best_static_placement_k1, single_attack_value, srg_utility
from .gametree import Active, DEFAULT_STATE_BUDGET, game_tree_oracle, open_attacks, strikes
from .model import Board, BudgetExceeded, PatrolInstance
from .pathfinder import EquilibriumAnswer, best_placement_k2

__all__ = [
    "MultiResponseCell",
    "OracleState",
    "SequentialSolver",
    "game_tree_oracle",
    "path_finder_multi",
    "solve_sequential",
]

EPS = 1e-12


@dataclass(frozen=True)
class OracleState:
    """A game position with the Defender to move, in named form."""

    defender_position: str
    active_attacks: dict  # target -> elapsed turns since the attack opened
    remaining_resources: int
    resolved: dict  # target -> "saved" | "lost"
    turn: int = 0


@dataclass(frozen=True)
class MultiResponseCell:
    incoming_route: tuple[str, ...]
    covered: frozenset[str]
    utility: float
    reachable: bool = True


class SequentialSolver:
    def __init__(self, board: Board, state_budget: int = DEFAULT_STATE_BUDGET):
        self.board = board
        self.state_budget = state_budget
        self.idle_memo: dict = {}
        self.phase_memo: dict = {}
        self.cell_memo: dict = {}

    @property
    def states(self) -> int:
        return len(self.idle_memo) + len(self.phase_memo) + len(self.cell_memo)

    def _count(self):
        if self.states > self.state_budget:
            raise BudgetExceeded(
                f"sequential solver used {self.states} sub-problems, over the budget of {self.state_budget}"
            )

    def idle(self, pos: int, r: int, lost: int) -> float:
        """Nothing pending, patroller on ``pos``: the Attacker opens a wave or stops."""
        key = (pos, r, lost)
        hit = self.idle_memo.get(key)
        if hit is not None:
            return hit
        best = 0.0
        if r:
            for subset, nxt, bits, val in strikes(self.board, pos, (), r, lost, True):
                best = min(best, -val + self.respond(pos, nxt, r - len(subset), lost | bits))
        self.idle_memo[key] = best
        self._count()
        return best

    def respond(self, pos: int, active: Active, r: int, lost: int) -> float:
        """A wave just landed (``active``); the Defender is about to move."""
        if not active:
            # everything resolved on the spot: the patroller gets a free step
            return max(self.idle(p, r, lost) for p in self.board.moves[pos])
        if r == 0:
            return srg_utility(self.board, pos, active)
        key = (pos, active, r, lost)
        hit = self.phase_memo.get(key)
        if hit is not None:
            return hit
        best = max(self._cell(key, p, 1, self._catch(active, p, 0)) for p in self.board.moves[pos])
        self.phase_memo[key] = best
        self._count()
        return best

    @staticmethod
    def _catch(active: Active, p: int, caught: int) -> int:
        for t, _ in active:
            if t == p:
                return caught | 1 << t
        return caught

    def status(self, phase, v: int, j: int, caught: int) -> tuple[Active, int, float]:
        """Pending attacks, newly lost bits and lost value at a walk cell."""
        _, active, _, _ = phase
        dist = self.board.dist[v]
        pending, bits, val = [], 0, 0.0
        for t, left in active:
            if caught >> t & 1:
                continue
            left -= j
            if dist[t] > left:
                bits |= 1 << t
                val += self.board.value[t]
            else:
                pending.append((t, left))
        return tuple(pending), bits, val

    def _cell(self, phase, v: int, j: int, caught: int) -> float:
        key = (phase, v, j, caught)
        hit = self.cell_memo.get(key)
        if hit is not None:
            return hit
        _, _, r, lost = phase
        pending, bits, loss = self.status(phase, v, j, caught)
        lost_now = lost | bits
        if not pending:
            best = -loss + self.idle(v, r, lost_now)
        else:
            best = max(self._cell(phase, p, j + 1, self._catch(pending, p, caught)) for p in self.board.moves[v])
            for subset, nxt, sbits, sval in strikes(self.board, v, pending, r, lost_now, True):
                best = min(best, -loss - sval + self.respond(v, nxt, r - len(subset), lost_now | sbits))
        self.cell_memo[key] = best
        self._count()
        return best

    def walk(self, pos: int, active: Active, r: int, lost: int) -> list[MultiResponseCell]:
        """Equilibrium walk of a phase, assuming the Attacker holds fire until it ends."""
        b = self.board
        cells = [MultiResponseCell((b.name(pos),), frozenset(), self.respond(pos, active, r, lost))]
        if not active or r == 0:
            return cells
        phase = (pos, active, r, lost)
        v, j, caught, route = pos, 0, 0, [pos]
        while True:
            options = []
            for p in b.moves[v]:
                c = self._catch(self.status(phase, v, j, caught)[0] if j else active, p, caught)
                options.append((self._cell(phase, p, j + 1, c), p, c))
            top = max(u for u, _, _ in options)
            # prefer moving on over waiting, then declaration order
            u, v, caught = min((o for o in options if o[0] >= top - EPS), key=lambda o: (o[1] == v, b.rank[o[1]]))
            j += 1
            route.append(v)
            covered = frozenset(b.name(t) for t in b.targets if caught >> t & 1)
            cells.append(MultiResponseCell(tuple(b.name(x) for x in route), covered, u))
            if not self.status(phase, v, j, caught)[0]:
                return cells


def _wave(board: Board, first_wave: Iterable[str]) -> tuple[int, ...]:
    wave = tuple(sorted(board.index[t] for t in first_wave))
    if len(set(wave)) != len(wave):
        raise ValueError("first wave repeats a target")
    for t in wave:
        if t not in board.value:
            raise ValueError(f"{board.name(t)!r} is not a target")
    return wave


def path_finder_multi(
    v_s: str,
    first_wave: Iterable[str],
    instance: PatrolInstance,
    k: int,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> EquilibriumAnswer:
    """Equilibrium walk and value after ``first_wave`` lands with the patroller on ``v_s``."""
    board = instance.compiled
    wave = _wave(board, first_wave)
    if k < 2 or len(wave) != k - 1:
        raise ValueError(f"first wave must hold k-1 = {k - 1} targets with k >= 2")
    solver = SequentialSolver(board, state_budget)
    pos = board.index[v_s]
    active, bits, val = open_attacks(board, pos, (), wave)
    value = -val + solver.respond(pos, active, k - len(wave), bits)
    cells = solver.walk(pos, active, k - len(wave), bits)
    return EquilibriumAnswer(cells[-1].incoming_route, None, value, v_s, "multi")


def solve_sequential(
    instance: PatrolInstance,
    k: int | None = None,
    state_budget: int = DEFAULT_STATE_BUDGET,
    start: str | None = None,
) -> tuple[float, str]:
    """Equilibrium value and placement against k sequential attacks.

    ``start`` (default: the instance's declared start, if any) pins the placement.
    """
    k = instance.k if k is None else k
    if k < 1:
        raise ValueError("k must be at least 1")
    start = start if start is not None else instance.defender_start
    board = instance.compiled
    if k == 1:
        if start is not None:
            return single_attack_value(board, board.index[start]), start
        v, u = best_static_placement_k1(instance)
        return u, v
    if k == 2:
        ans = best_placement_k2(instance, start=start)
        return ans.value, ans.placement
    solver = SequentialSolver(board, state_budget)
    candidates = [board.index[start]] if start is not None else board.original
    best = None
    for v in sorted(candidates, key=board.name):
        u = solver.idle(v, k, 0)
        if best is None or u > best[0] + EPS:
            best = (u, v)
    return best[0], board.name(best[1])
