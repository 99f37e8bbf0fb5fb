"""Solvers for adversarial patrolling games on graphs with alarmed targets."""
from .model import (
    AttackEvent,
    BudgetExceeded,
    DistanceMatrix,
    GameOutcome,
    InstanceError,
    ParseError,
    PatrolInstance,
    TargetSpec,
    ValidationError,
    all_pairs_shortest_paths,
    dump_instance,
    expand_to_unit_time,
    load_instance,
    normalize_values_topk,
    outcome_utility,
)
from .covering import (
    CoveringRoute,
    DirectRoute,
    best_static_placement_k1,
    sa_feasible,
    simultaneous_attack_value,
    solve_srg,
)
from .gametree import GameTreeOracle, PolicyEvaluator, game_tree_oracle
from .pathfinder import EquilibriumAnswer, attack_prediction, best_placement_k2, path_finder
from .multi import path_finder_multi, solve_sequential
from .robustness import (
    GuessAnalysis,
    gamma_prime_closed_form,
    gen_overestimation_instance,
    gen_underestimation_instance,
    value_with_guess,
)
from .online import (
    AttackStream,
    CompetitiveReport,
    OnlinePolicy,
    competitive_table,
    estimate_competitive_factor,
    gamma_r_closed_form,
    gen_lower_bound_instance,
    gen_randomized_worstcase_instance,
    simulate_online,
)

__version__ = "0.1.0"
