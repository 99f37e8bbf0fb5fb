"""Defender policies that react to alarms without knowing how many attacks remain.

Two policies are provided:

``greedy-deterministic``
    Every alarm is answered: the patroller commits to the best covering route
    for what is currently under attack and replans only when a new alarm
    rings.  With ``threshold`` set, alarms farther away than the threshold are
    ignored instead.

``coin-flip-randomized``
    Alarms within ``near_radius`` of the patroller are always answered.  A
    farther alarm is answered with probability ``respond_probability``;
    otherwise the patroller leaves it and keeps to its current plan (or home).

With nothing to do the patroller walks back to ``home``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_DOWN, Decimal, localcontext
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .covering import best_cover_route, best_static_placement_k1
from .gametree import DEFAULT_STATE_BUDGET, Active, GameTreeOracle, PolicyEvaluator, advance, open_attacks
from .model import AttackEvent, Board, GameOutcome, PatrolInstance, TargetSpec, topk_total

KINDS = ("greedy-deterministic", "coin-flip-randomized")


@dataclass(frozen=True)
class OnlinePolicy:
    kind: str
    home: str
    respond_probability: float | None = None
    near_radius: int = 1
    threshold: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        p = self.respond_probability
        if p is None:
            p = 1.0 if self.kind == "greedy-deterministic" else 0.5
            object.__setattr__(self, "respond_probability", p)
        if not 0 <= p <= 1:
            raise ValueError("respond_probability must lie in [0, 1]")
        if self.kind == "greedy-deterministic" and p != 1:
            raise ValueError("the deterministic policy always responds (probability 1)")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError("threshold must be non-negative")

    def bind(self, board: Board) -> "BoundPolicy":
        if self.home not in board.index:
            raise ValueError(f"home {self.home!r} is not a vertex")
        return BoundPolicy(board, self)

    @classmethod
    def default_for(cls, instance: PatrolInstance, kind: str, **kwargs) -> "OnlinePolicy":
        """Home on the hub ``v`` if the instance has one, else on the best single-attack placement."""
        home = "v" if "v" in instance.vertices else best_static_placement_k1(instance)[0]
        return cls(kind, home, **kwargs)


class BoundPolicy:
    """An :class:`OnlinePolicy` compiled against a board.

    Memory is ``(ignored targets, committed waypoints)``.
    """

    def __init__(self, board: Board, config: OnlinePolicy):
        self.board = board
        self.config = config
        self.home = board.index[config.home]
        self._seen: dict = {}

    def placement(self) -> int:
        return self.home

    def initial_memory(self):
        return ((), ())

    def _far(self, pos: int, t: int) -> bool:
        c = self.config
        d = self.board.dist[pos][t]
        if c.kind == "coin-flip-randomized":
            return d > c.near_radius
        return c.threshold is not None and d > c.threshold

    def _plan(self, pos: int, active: Active, ignored: frozenset) -> tuple[int, ...]:
        pending = tuple((t, left) for t, left in active if t not in ignored)
        if not pending:
            return ()
        return tuple(best_cover_route(self.board, pos, pending)[0])

    def observe(self, pos, active, opened, used, lost, memory):
        key = (pos, active, opened, memory)
        if key not in self._seen:
            self._seen[key] = self._observe(pos, active, opened, memory)
        return self._seen[key]

    def _observe(self, pos, active, opened, memory):
        live = {t for t, _ in active}
        ignored = frozenset(t for t in memory[0] if t in live)
        fresh = [t for t in opened if t in live]
        c = self.config
        branches = []
        for t in fresh:
            if not self._far(pos, t):
                branches.append(((1.0, False),))
            elif c.kind == "greedy-deterministic":
                branches.append(((1.0, True),))
            else:
                p = c.respond_probability
                branches.append(tuple(o for o in ((p, False), (1 - p, True)) if o[0] > 0))
        merged: dict = {}
        for combo in product(*branches):
            prob = math.prod(pr for pr, _ in combo)
            skip = ignored | {t for t, (_, ig) in zip(fresh, combo) if ig}
            mem = (tuple(sorted(skip)), self._plan(pos, active, skip))
            merged[mem] = merged.get(mem, 0.0) + prob
        return [(p, m) for m, p in merged.items()]

    def move(self, pos: int, active: Active, used: int, lost: int, memory) -> int:
        ignored, plan = memory
        live = {t for t, _ in active}
        for t in plan:
            if t in live and t not in ignored:
                return self.board.path(pos, t)[1]
        if pos == self.home:
            return pos
        return self.board.path(pos, self.home)[1]


@dataclass(frozen=True)
class AttackStream:
    events: tuple[AttackEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: (e.turn, sorted(e.targets)))))

    @property
    def resources(self) -> int:
        return sum(len(e.targets) for e in self.events)

    @classmethod
    def of(cls, *pairs) -> "AttackStream":
        """Build from ``(turn, target or targets)`` pairs."""
        events = []
        for turn, targets in pairs:
            targets = {targets} if isinstance(targets, str) else set(targets)
            events.append(AttackEvent(turn, frozenset(targets)))
        return cls(tuple(events))


def _draw(rng: np.random.Generator, options):
    if len(options) == 1:
        return options[0][1]
    u = rng.random()
    acc = 0.0
    for p, m in options:
        acc += p
        if u < acc:
            return m
    return options[-1][1]


def simulate_online(policy: OnlinePolicy, instance: PatrolInstance, stream: AttackStream, seed: int = 0) -> GameOutcome:
    """Play a scripted attack stream against the policy.

    Attacks naming a target already under attack or already lost are
    skipped.  Coins come from a generator seeded with ``seed``.
    """
    if stream.resources > instance.k:
        raise ValueError(f"stream uses {stream.resources} attacks but the Attacker holds k={instance.k}")
    board = instance.compiled
    runner = policy.bind(board)
    rng = np.random.default_rng(seed)
    by_turn: dict[int, list[int]] = {}
    for e in stream.events:
        for t in sorted(e.targets):
            if t not in instance.targets:
                raise ValueError(f"{t!r} is not a target")
            by_turn.setdefault(e.turn, []).append(board.index[t])
    last = max(by_turn, default=-1)
    pos, active, lost, used, mem = runner.placement(), (), 0, 0, runner.initial_memory()
    saved = set()
    turn = 0
    while turn <= last or active:
        strike = [t for t in by_turn.get(turn, []) if not (lost >> t & 1) and t not in {a for a, _ in active}]
        if strike:
            if pos in strike:
                saved.add(pos)
            nxt, bits, _ = open_attacks(board, pos, active, strike)
            used += len(strike)
            lost |= bits
            mem = _draw(rng, runner.observe(pos, nxt, tuple(strike), used, lost, mem))
            active = nxt
        p = runner.move(pos, active, used, lost, mem)
        before = {t for t, _ in active}
        active, bits, _ = advance(board, p, active)
        lost |= bits
        saved |= before - {t for t, _ in active} - {t for t in before if bits >> t & 1}
        pos = p
        turn += 1
    lost_names = frozenset(board.name(t) for t in board.targets if lost >> t & 1)
    saved_names = frozenset(board.name(t) for t in saved) - lost_names
    return GameOutcome(saved_names, lost_names, board.loss(t for t in board.targets if lost >> t & 1) + 0.0)


def _playout(ev: PolicyEvaluator, runner: BoundPolicy, rng: np.random.Generator) -> float:
    """One game against the worst-case adaptive Attacker, sampling the policy's coins."""
    board, k = ev.board, ev.k
    pos, active, r, lost, mem = runner.placement(), (), k, 0, runner.initial_memory()
    total = 0.0
    while True:
        pick = ev.choice(pos, active, r, lost, mem)
        if pick[0] == "stop":
            return total
        if pick[0] == "idle":
            for _ in range(pick[1]):
                pos = runner.move(pos, (), k - r, lost, mem)
        if pick[0] in ("idle", "strike"):
            subset = pick[-1]
            active, bits, val = open_attacks(board, pos, active, subset)
            r -= len(subset)
            lost |= bits
            total -= val
            mem = _draw(rng, runner.observe(pos, active, subset, k - r, lost, mem))
        p = runner.move(pos, active, k - r, lost, mem)
        active, bits, val = advance(board, p, active)
        lost |= bits
        total -= val
        pos = p


@dataclass(frozen=True)
class CompetitiveReport:
    v: float
    v_star: float
    gamma: float | None
    trials: int
    seed: int | None
    stderr: float | None = None
    scale: float = 1.0
    exact: float | None = None  # exhaustive expectation, when computed

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "v_star": self.v_star,
            "gamma": self.gamma,
            "trials": self.trials,
            "seed": self.seed,
            "stderr": self.stderr,
        }


def ratio(v: float, v_star: float, scale: float) -> float | None:
    """Competitive ratio on the scale where 1 is nothing lost and 0 is the top-k values lost."""
    v, v_star, scale = Fraction(v), Fraction(v_star), Fraction(scale)
    low = 1 + v_star / scale
    if abs(low) <= Fraction(1, 10**12):
        return None
    return float((1 + v / scale) / low)


def estimate_competitive_factor(
    policy: OnlinePolicy,
    instance: PatrolInstance,
    adversary: str = "exhaustive",
    trials: int = 0,
    seed: int = 0,
    stream: AttackStream | None = None,
    k: int | None = None,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> CompetitiveReport:
    """Worst-case value of an online policy relative to the clairvoyant optimum.

    ``exhaustive``: the Attacker best-responds to the policy, seeing its
    moves.  With ``trials == 0`` coins are integrated exactly; otherwise
    ``trials`` games against that same adaptive Attacker are sampled.
    ``scripted``: ``trials`` runs of ``stream`` (coins sampled).
    Trial ``i`` draws from a generator seeded with ``(seed, i)``.
    """
    k = instance.k if k is None else k
    board = instance.compiled
    runner = policy.bind(board)
    v_star, _ = GameTreeOracle(board, state_budget, cover_shortcut=True).value(k)
    scale = topk_total(instance, k)
    exact = None
    if adversary == "exhaustive":
        ev = PolicyEvaluator(board, runner, k, state_budget)
        exact = ev.value()
        samples = [_playout(ev, runner, np.random.default_rng([seed, i])) for i in range(trials)]
    elif adversary == "scripted":
        if stream is None:
            raise ValueError("the scripted adversary needs a stream")
        if trials < 1:
            raise ValueError("the scripted adversary needs at least one trial")
        inst_k = instance.with_k(k)
        samples = [
            simulate_online(policy, inst_k, stream, np.random.SeedSequence([seed, i]).generate_state(1)[0])
            .defender_utility
            for i in range(trials)
        ]
    else:
        raise ValueError("adversary must be 'exhaustive' or 'scripted'")
    if samples:
        arr = np.asarray(samples)
        v = float(arr.mean())
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else None
    else:
        v, stderr = exact, None
    return CompetitiveReport(v, v_star, ratio(v, v_star, scale), trials, seed, stderr, scale, exact)


# --------------------------------------------------------------------------
# worst-case instances and the competitive-factor table


def gen_lower_bound_instance(k: int) -> PatrolInstance:
    """Hub ``v`` with max(1, k-1) unit spokes and one far target ``tf`` at distance 2k."""
    if k < 1:
        raise ValueError("k must be at least 1")
    spokes = [f"s{i}" for i in range(1, max(1, k - 1) + 1)]
    near = max(1, 2 * k - 1)
    targets = {s: TargetSpec(1.0, near) for s in spokes}
    targets["tf"] = TargetSpec(1.0, 2 * k)
    edges = [["v", s, 1] for s in spokes] + [["v", "tf", 2 * k]]
    return PatrolInstance(["v"] + spokes + ["tf"], edges, targets, k=k, defender_start=None, name=f"lower-bound-{k}")


def gen_randomized_worstcase_instance(k: int, h: int) -> PatrolInstance:
    """Clique of the hub and k-h near targets, plus h targets on spokes of weight k."""
    if not 1 <= h < k:
        raise ValueError("need 1 <= h < k")
    clique = ["v"] + [f"c{i}" for i in range(1, k - h + 1)]
    edges = [[a, b, 1] for i, a in enumerate(clique) for b in clique[i + 1:]]
    targets = {c: TargetSpec(1.0, k - h) for c in clique[1:]}
    outer = [f"o{i}" for i in range(1, h + 1)]
    edges += [["v", o, k] for o in outer]
    targets.update({o: TargetSpec(1.0, k) for o in outer})
    return PatrolInstance(clique + outer, edges, targets, k=k, name=f"randomized-{k}-{h}")


def gamma_r_exact(k: int, h: int) -> Fraction:
    if not 1 <= h < k:
        raise ValueError("need 1 <= h < k")
    return Fraction(1, k - h) * (1 - Fraction(1, 2 ** (h + 1))) + Fraction(1, 2**h)


def gamma_r_closed_form(k: int, h: int) -> float:
    """Published competitive factor of the coin policy on the (k, h) instance."""
    return float(gamma_r_exact(k, h))


def coin_policy_ratio(k: int, h: int) -> Fraction:
    """Exact worst-case ratio of the coin policy on the (k, h) instance.

    Each far alarm is answered with probability 1/2, and an answered one
    abandons the home clique: the Attacker hits the h far targets first,
    then the near ones.
    """
    if not 1 <= h < k:
        raise ValueError("need 1 <= h < k")
    stay = Fraction(1, 2**h)
    return (1 - stay) / (k - h) + stay


def round2(x) -> str:
    """Two decimals, ties rounded down (the convention of the published table)."""
    x = Fraction(x)
    with localcontext() as ctx:
        ctx.prec = 60
        d = Decimal(x.numerator) / Decimal(x.denominator)
        return str(d.quantize(Decimal("0.01"), rounding=ROUND_HALF_DOWN))


@dataclass(frozen=True)
class TableRow:
    k: int
    h: int
    gamma_r: Fraction
    gamma_d: Fraction

    def cells(self) -> list[str]:
        return [str(self.k), str(self.h), round2(self.gamma_r), round2(self.gamma_d)]


def competitive_table(k_values: Sequence[int]) -> list[TableRow]:
    rows = []
    for k in k_values:
        if k < 2:
            raise ValueError("the table needs k >= 2")
        h = min(range(1, k), key=lambda h: (gamma_r_exact(k, h), h))
        rows.append(TableRow(k, h, gamma_r_exact(k, h), Fraction(1, k - 1)))
    return rows


TABLE_HEADER = ["k", "h", "gamma_r", "gamma_d"]


def render_table(rows: Sequence[TableRow], fmt: str = "text") -> str:
    body = [r.cells() for r in rows]
    if fmt == "csv":
        return "\n".join(",".join(line) for line in [TABLE_HEADER] + body) + "\n"
    widths = [max(len(line[i]) for line in [TABLE_HEADER] + body) for i in range(len(TABLE_HEADER))]
    out = []
    for line in [TABLE_HEADER] + body:
        out.append("  ".join(cell.rjust(w) for cell, w in zip(line, widths)))
    return "\n".join(out) + "\n"
