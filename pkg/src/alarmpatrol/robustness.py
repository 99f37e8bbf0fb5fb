"""What a wrong guess about the Attacker's resources costs the Defender.

The Defender commits to the policy that is optimal when the Attacker holds
``k_prime`` resources.  A best-responding Attacker with ``k`` resources then
plays against that fixed policy, and the result is compared with the value the
Defender would get had she known ``k``:

* ratio factor: both values are rescaled so that 1 means nothing lost and 0
  means the k most valuable targets lost, then divided;
* additive factor: plain difference of the raw values.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .covering import best_cover_route
from .gametree import DEFAULT_STATE_BUDGET, Active, GameTreeOracle, PolicyEvaluator
from .model import Board, PatrolInstance, TargetSpec, topk_total
from .online import ratio

FAMILIES = ("ratio", "additive", "ratio-star", "additive-mid", "additive-high")


@dataclass(frozen=True)
class GuessAnalysis:
    k: int
    k_prime: int
    v_star: float
    v_guess: float
    gamma: float | None  # None when the clairvoyant value sits at the bottom of the scale
    gamma_prime: float
    scale: float  # total value of the k most valuable targets
    placement: str

    @property
    def excluded(self) -> bool:
        return self.gamma is None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "k_prime": self.k_prime,
            "v_star": self.v_star,
            "v_guess": self.v_guess,
            "v_star_scaled": 1 + self.v_star / self.scale,
            "v_guess_scaled": 1 + self.v_guess / self.scale,
            "gamma": self.gamma,
            "gamma_prime": self.gamma_prime,
            "placement": self.placement,
        }


class CommittedPolicy:
    """Optimal play for a ``k_prime``-resource Attacker, applied whatever really happens.

    Once the guessed resources look spent, the patroller just follows the
    best covering route for whatever is under attack and otherwise stays put.
    """

    def __init__(self, board: Board, k_prime: int, state_budget: int = DEFAULT_STATE_BUDGET, start: int | None = None):
        self.board = board
        self.k_prime = k_prime
        self.oracle = GameTreeOracle(board, state_budget, cover_shortcut=True)
        self.value, self.start = self.oracle.value(k_prime, start)

    def placement(self) -> int:
        return self.start

    def initial_memory(self):
        return None

    def observe(self, pos, active, opened, used, lost, memory):
        return [(1.0, None)]

    def move(self, pos: int, active: Active, used: int, lost: int, memory) -> int:
        believed = self.k_prime - used
        if believed > 0:
            return self.oracle.best_move(pos, active, believed, lost)
        if not active:
            return pos
        seq, _, _ = best_cover_route(self.board, pos, active)
        if not seq:
            return pos
        return self.board.path(pos, seq[0])[1]


def value_with_guess(
    instance: PatrolInstance,
    k: int,
    k_prime: int,
    state_budget: int = DEFAULT_STATE_BUDGET,
    start: str | None = None,
) -> GuessAnalysis:
    """Clairvoyant value against k resources versus the value of the policy tuned for ``k_prime``."""
    if k < 1 or k_prime < 1:
        raise ValueError("resource counts must be positive")
    board = instance.compiled
    start = start if start is not None else instance.defender_start
    s = board.index[start] if start is not None else None
    v_star, _ = GameTreeOracle(board, state_budget, cover_shortcut=True).value(k, s)
    if k_prime == k:
        v_guess = v_star
        policy_start = CommittedPolicy(board, k_prime, state_budget, s).start
    else:
        policy = CommittedPolicy(board, k_prime, state_budget, s)
        policy_start = policy.start
        v_guess = PolicyEvaluator(board, policy, k, state_budget).value()
    scale = topk_total(instance, k)
    gamma = ratio(v_guess, v_star, scale)
    return GuessAnalysis(k, k_prime, v_star, v_guess, gamma, v_guess - v_star, scale, board.name(policy_start))


def _check(k: int, k_prime: int, epsilon: float):
    if k < 1 or k_prime < 1:
        raise ValueError("resource counts must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")


def _hub_and_clique(n_clique_targets: int, value: float, deadline: int):
    vertices = ["v"] + [f"c{i}" for i in range(1, n_clique_targets + 1)]
    edges = [[a, b, 1] for i, a in enumerate(vertices) for b in vertices[i + 1:]]
    targets = {c: TargetSpec(value, deadline) for c in vertices[1:]}
    return vertices, edges, targets


def gen_underestimation_instance(k: int, k_prime: int, epsilon: float, family: str = "ratio") -> PatrolInstance:
    """Clique around a hub holding k-k' valuable targets, plus k' cheap targets far out on heavy spokes."""
    _check(k, k_prime, epsilon)
    if k_prime >= k:
        raise ValueError("underestimation needs k_prime < k")
    if family not in ("ratio", "additive"):
        raise ValueError("family must be 'ratio' or 'additive'")
    near = k - k_prime if family == "ratio" else k
    vertices, edges, targets = _hub_and_clique(k - k_prime, 1.0, near)
    for i in range(1, k_prime + 1):
        vertices.append(f"o{i}")
        edges.append(["v", f"o{i}", k])
        targets[f"o{i}"] = TargetSpec(epsilon, k)
    return PatrolInstance(vertices, edges, targets, k=k, defender_start=None, name=f"under-{family}-{k}-{k_prime}")


def gen_overestimation_instance(k: int, k_prime: int, epsilon: float, family: str = "ratio-star") -> PatrolInstance:
    """Instances where preparing for more attacks than the Attacker has backfires."""
    _check(k, k_prime, epsilon)
    if k_prime <= k:
        raise ValueError("overestimation needs k_prime > k")
    if family == "ratio-star":
        # one spare leaf: with exactly k leaves a cautious patroller loses nothing extra
        leaves = [f"t{i}" for i in range(k + 1)]
        targets = {t: TargetSpec(1.0 if i == 0 else 1 - epsilon, 1) for i, t in enumerate(leaves)}
        return PatrolInstance(["v"] + leaves, [["v", t, 1] for t in leaves], targets, k=k, name=f"over-star-{k}")
    if family == "additive-mid":
        if not k_prime < 2 * k:
            raise ValueError("additive-mid needs k < k_prime < 2k")
        deadline = k_prime - k
    elif family == "additive-high":
        if k_prime < 2 * k:
            raise ValueError("additive-high needs k_prime >= 2k")
        deadline = k + 1
    else:
        raise ValueError(f"unknown family {family!r}")
    vertices, edges, targets = _hub_and_clique(k_prime - k, 1.0, deadline)
    outer = [f"o{i}" for i in range(1, k + 1)]
    vertices += outer
    edges += [["v", o, k] for o in outer]
    edges += [[a, b, 1] for i, a in enumerate(outer) for b in outer[i + 1:]]
    targets.update({o: TargetSpec(1 - epsilon, deadline) for o in outer})
    return PatrolInstance(vertices, edges, targets, k=k, name=f"over-{family[9:]}-{k}-{k_prime}")


def gamma_prime_closed_form(k: int, k_prime: int, epsilon):
    """Additive factor of a wrong guess on the worst-case families (exact for Fraction input)."""
    if k == k_prime:
        raise ValueError("additive factor is 0 for a correct guess and has no closed-form case")
    if k < 1 or k_prime < 1:
        raise ValueError("resource counts must be positive")
    one = Fraction(1) if isinstance(epsilon, Fraction) else 1
    if k_prime < k:
        return -(k - k_prime) + epsilon
    if k_prime < 2 * k:
        return -(k_prime - k) * (one - epsilon)
    return -k * (one - epsilon)
