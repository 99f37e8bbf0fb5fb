"""Turn-by-turn backward induction over the patrolling game.

Each turn the Attacker either waits or opens attacks on some unresolved
targets, then the Defender moves to an adjacent vertex or stays.  An attack on
``t`` opened at turn ``tau`` is caught if the patroller stands on ``t`` at any
point within ``d(t)`` moves after ``tau``; otherwise ``t`` is compromised and
its value is lost once and for all.

State conventions used throughout:

* ``active`` is a sorted tuple of ``(target, moves_left)`` pairs.  An attack
  the patroller can no longer reach in time is resolved as lost immediately;
  this never changes a value because nothing the players do can alter it.
* ``lost`` is a bitmask over vertex indices.
* values are the Defender's utility from this point on (always <= 0).

With no attack in progress the Attacker's "wait" is collapsed: the patroller
can always stand still, so delaying never gains the Attacker anything against
an optimizing Defender.  Fixed policies may wander while idle, so
:class:`PolicyEvaluator` follows their idle trajectory explicitly.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Iterable, Protocol

from .covering import srg_utility
from .model import Board, BudgetExceeded, PatrolInstance

Active = tuple[tuple[int, int], ...]

DEFAULT_STATE_BUDGET = 5_000_000

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


def advance(board: Board, pos: int, active: Active) -> tuple[Active, int, float]:
    """Apply one Defender move ending at ``pos``: returns (still active, lost bits, lost value)."""
    out = []
    lost_bits, lost_val = 0, 0.0
    dist = board.dist[pos]
    for t, left in active:
        left -= 1
        if t == pos:
            continue
        if dist[t] > left:
            lost_bits |= 1 << t
            lost_val += board.value[t]
        else:
            out.append((t, left))
    return tuple(out), lost_bits, lost_val


def open_attacks(board: Board, pos: int, active: Active, strike: Iterable[int]) -> tuple[Active, int, float]:
    """Add newly attacked targets while the patroller stands on ``pos``."""
    out = list(active)
    lost_bits, lost_val = 0, 0.0
    for t in strike:
        if t == pos:
            continue  # caught on the spot
        if board.dist[pos][t] > board.deadline[t]:
            lost_bits |= 1 << t
            lost_val += board.value[t]
        else:
            out.append((t, board.deadline[t]))
    out.sort()
    return tuple(out), lost_bits, lost_val


def attackable(board: Board, active: Active, lost: int) -> list[int]:
    busy = {t for t, _ in active}
    return [t for t in board.targets if not (lost >> t & 1) and t not in busy]


def strikes(board: Board, pos: int, active: Active, r: int, lost: int, skip_wasted: bool):
    """All Attacker openings available now, as (targets, next active, lost bits, lost value)."""
    free = attackable(board, active, lost)
    if skip_wasted:
        free = [t for t in free if t != pos]
    for size in range(1, min(r, len(free)) + 1):
        for subset in combinations(free, size):
            yield (subset,) + open_attacks(board, pos, active, subset)


class GameTreeOracle:
    """Exact value of the game against an optimizing Defender, by memoized recursion.

    Attacks on the target the patroller currently stands on are skipped: they
    burn a resource and hand the Defender a free move, which an optimizing
    Attacker never wants.

    With ``cover_shortcut`` the positions where the Attacker has nothing left
    are valued by the covering solver instead of being played out.  Leave it
    off when the oracle is used to check that solver.
    """

    def __init__(self, board: Board, state_budget: int = DEFAULT_STATE_BUDGET, cover_shortcut: bool = False):
        self.board = board
        self.state_budget = state_budget
        self.cover_shortcut = cover_shortcut
        self.va: dict = {}
        self.vd: dict = {}

    def _count(self):
        if len(self.va) + len(self.vd) > self.state_budget:
            raise BudgetExceeded(
                f"game tree exceeded {self.state_budget} memoized states; raise the budget or shrink the instance"
            )

    def attacker(self, pos: int, active: Active, r: int, lost: int) -> float:
        key = (pos, active, r, lost)
        hit = self.va.get(key)
        if hit is not None:
            return hit
        best = self.defender(pos, active, r, lost) if active else 0.0
        if r:
            for _, nxt, bits, val in strikes(self.board, pos, active, r, lost, True):
                size = len(_)
                v = -val + self.defender(pos, nxt, r - size, lost | bits)
                if v < best:
                    best = v
        self.va[key] = best
        self._count()
        return best

    def defender(self, pos: int, active: Active, r: int, lost: int) -> float:
        key = (pos, active, r, lost)
        hit = self.vd.get(key)
        if hit is not None:
            return hit
        if self.cover_shortcut and r == 0:
            best = srg_utility(self.board, pos, active) if active else 0.0
            self.vd[key] = best
            return best
        best = None
        for p in self.board.moves[pos]:
            nxt, bits, val = advance(self.board, p, active)
            v = -val + self.attacker(p, nxt, r, lost | bits)
            if best is None or v > best:
                best = v
        self.vd[key] = best
        self._count()
        return best

    def best_move(self, pos: int, active: Active, r: int, lost: int) -> int:
        """Defender move achieving :meth:`defender`; ties go to staying, then smallest index."""
        best_p, best_v = None, None
        for p in self.board.moves[pos]:
            nxt, bits, val = advance(self.board, p, active)
            v = -val + self.attacker(p, nxt, r, lost | bits)
            if best_v is None or v > best_v + 1e-12:
                best_p, best_v = p, v
        return best_p

    def value(self, k: int, start: int | None = None) -> tuple[float, int]:
        """Game value and the placement achieving it (smallest name among ties)."""
        board = self.board
        starts = [start] if start is not None else board.original
        best_v, best_s = None, None
        for s in sorted(starts, key=board.name):
            v = self.attacker(s, (), k, 0)
            if best_v is None or v > best_v + 1e-12:
                best_v, best_s = v, s
        return best_v, best_s

    def principal_variation(self, start: int, k: int) -> list[str]:
        """One equilibrium play from ``start``: the Attacker's minimizing choices and the Defender's replies."""
        b = self.board
        pos, active, r, lost, turn = start, (), k, 0, 0
        lines = [f"place {b.name(start)}"]
        while True:
            here = self.attacker(pos, active, r, lost)
            choice = None
            if r:
                for subset, nxt, bits, val in strikes(b, pos, active, r, lost, True):
                    if abs(-val + self.defender(pos, nxt, r - len(subset), lost | bits) - here) <= 1e-12:
                        choice = (subset, nxt, bits, val)
                        break
            wait_ok = active and abs(self.defender(pos, active, r, lost) - here) <= 1e-12
            if choice is not None and not wait_ok:
                subset, active, bits, _ = choice
                r -= len(subset)
                lost |= bits
                lines.append(f"turn {turn}: attack {','.join(b.name(t) for t in subset)}")
            elif not active:
                lines.append(f"turn {turn}: attacker stops")
                break
            p = self.best_move(pos, active, r, lost)
            active, bits, _ = advance(b, p, active)
            for t in b.targets:
                if bits >> t & 1:
                    lines.append(f"turn {turn}: {b.name(t)} compromised")
            lost |= bits
            if p != pos:
                lines.append(f"turn {turn}: move to {b.name(p)}")
            pos = p
            turn += 1
        lines.append(f"lost: {sorted(b.name(t) for t in b.targets if lost >> t & 1)}")
        return lines


def check_guard(board: Board, k: int, max_vertices: int, max_k: int):
    if board.n > max_vertices or k > max_k:
        raise BudgetExceeded(
            f"game tree oracle limited to |V| <= {max_vertices} and k <= {max_k} "
            f"(got |V|={board.n} after unit expansion, k={k})"
        )


def game_tree_oracle(
    instance: PatrolInstance,
    k: int | None = None,
    max_vertices: int = 9,
    max_k: int = 3,
    state_budget: int = DEFAULT_STATE_BUDGET,
    start: str | None = None,
) -> tuple[float, str]:
    """Exact equilibrium value and placement by backward induction."""
    k = instance.k if k is None else k
    board = instance.compiled
    check_guard(board, k, max_vertices, max_k)
    start = start if start is not None else instance.defender_start
    oracle = GameTreeOracle(board, state_budget)
    v, s = oracle.value(k, board.index[start] if start is not None else None)
    return v, board.name(s)


# --------------------------------------------------------------------------
# fixed Defender policies


class Policy(Protocol):
    """A Defender rule the Attacker knows and best-responds to.

    ``memory`` is any hashable internal state; ``observe`` may be random and
    returns a distribution over successor memories.
    """

    def placement(self) -> int: ...

    def initial_memory(self) -> Hashable: ...

    def observe(
        self, pos: int, active: Active, opened: tuple[int, ...], used: int, lost: int, memory: Hashable
    ) -> list[tuple[float, Hashable]]: ...

    def move(self, pos: int, active: Active, used: int, lost: int, memory: Hashable) -> int: ...


@dataclass
class PolicyEvaluator:
    """Worst-case (expected) Defender utility of a fixed policy against a k-resource Attacker."""

    board: Board
    policy: Policy
    k: int
    state_budget: int = DEFAULT_STATE_BUDGET

    def __post_init__(self):
        self.va: dict = {}
        self.vd: dict = {}
        self.picks: dict = {}

    def _count(self):
        if len(self.va) + len(self.vd) > self.state_budget:
            raise BudgetExceeded(f"policy evaluation exceeded {self.state_budget} states")

    def value(self) -> float:
        return self.attacker(self.policy.placement(), (), self.k, 0, self.policy.initial_memory())

    def _strike_values(self, pos, active, r, lost, mem):
        used = self.k - r
        for subset, nxt, bits, val in strikes(self.board, pos, active, r, lost, False):
            exp = 0.0
            for prob, m2 in self.policy.observe(pos, nxt, subset, used + len(subset), lost | bits, mem):
                exp += prob * self.defender(pos, nxt, r - len(subset), lost | bits, m2)
            yield subset, -val + exp

    def attacker(self, pos: int, active: Active, r: int, lost: int, mem) -> float:
        key = (pos, active, r, lost, mem)
        hit = self.va.get(key)
        if hit is not None:
            return hit
        if active:
            best = self.defender(pos, active, r, lost, mem)
            if r:
                for _, v in self._strike_values(pos, active, r, lost, mem):
                    best = min(best, v)
        else:
            # idle: the Attacker may strike anywhere along the policy's idle trajectory
            best = 0.0
            if r and attackable(self.board, (), lost):
                seen = []
                q = pos
                while q not in seen:
                    seen.append(q)
                    for _, v in self._strike_values(q, (), r, lost, mem):
                        best = min(best, v)
                    q = self.policy.move(q, (), self.k - r, lost, mem)
        self.va[key] = best
        self._count()
        return best

    def choice(self, pos: int, active: Active, r: int, lost: int, mem) -> tuple:
        """The Attacker's worst-case action here.

        One of ``("wait",)``, ``("stop",)``, ``("strike", targets)`` or
        ``("idle", steps, targets)``; the last means let the patroller make
        ``steps`` idle moves first.
        """
        key = (pos, active, r, lost, mem)
        if key not in self.picks:
            self.picks[key] = self._choose(pos, active, r, lost, mem)
        return self.picks[key]

    def _choose(self, pos, active, r, lost, mem):
        if active:
            best, pick = self.defender(pos, active, r, lost, mem), ("wait",)
            if r:
                for subset, v in self._strike_values(pos, active, r, lost, mem):
                    if v < best - 1e-12:
                        best, pick = v, ("strike", subset)
            return pick
        best, pick = 0.0, ("stop",)
        if r and attackable(self.board, (), lost):
            seen, q = [], pos
            while q not in seen:
                seen.append(q)
                for subset, v in self._strike_values(q, (), r, lost, mem):
                    if v < best - 1e-12:
                        best, pick = v, ("idle", len(seen) - 1, subset)
                q = self.policy.move(q, (), self.k - r, lost, mem)
        return pick

    def defender(self, pos: int, active: Active, r: int, lost: int, mem) -> float:
        key = (pos, active, r, lost, mem)
        hit = self.vd.get(key)
        if hit is not None:
            return hit
        p = self.policy.move(pos, active, self.k - r, lost, mem)
        if p not in self.board.moves[pos]:
            raise ValueError(f"policy moved from {self.board.name(pos)} to non-adjacent {self.board.name(p)}")
        nxt, bits, val = advance(self.board, p, active)
        v = -val + self.attacker(p, nxt, r, lost | bits, mem)
        self.vd[key] = v
        self._count()
        return v
