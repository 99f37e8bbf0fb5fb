"""Acceptance checks, one test per criterion.

Every test prints a ``PASS``/``FAIL`` line (straight to the terminal, so it
shows up in ``pytest -v`` logs) before asserting.  Criteria known not to hold
under the game rules are marked strict xfail: they still run in full and
still print ``FAIL``.
"""
import json
import random
import time
from fractions import Fraction

import pytest

from alarmpatrol import (
    AttackStream,
    BudgetExceeded,
    OnlinePolicy,
    all_pairs_shortest_paths,
    estimate_competitive_factor,
    expand_to_unit_time,
    game_tree_oracle,
    gamma_prime_closed_form,
    gen_lower_bound_instance,
    gen_overestimation_instance,
    gen_randomized_worstcase_instance,
    gen_underestimation_instance,
    path_finder,
    simulate_online,
    simultaneous_attack_value,
    solve_sequential,
    solve_srg,
    value_with_guess,
)
from alarmpatrol.cli import run

from conftest import brute_force_cover, random_instance, small_instances

PER_PAIR_BUDGET = 400_000


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok

    return emit


def test_criterion_1_table(report):
    start = time.perf_counter()
    code, out, _ = run(["table", "--k", "3..10,100", "--format", "csv"])
    elapsed = time.perf_counter() - start
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    gamma_r = [r[2] for r in rows]
    gamma_d = [r[3] for r in rows]
    ok = (
        code == 0
        and gamma_r == ["0.87", "0.69", "0.54", "0.44", "0.36", "0.30", "0.26", "0.22", "0.01"]
        and gamma_d == ["0.50", "0.33", "0.25", "0.20", "0.17", "0.14", "0.12", "0.11", "0.01"]
        and elapsed < 1
    )
    assert report(1, ok, f"gamma_r={gamma_r} gamma_d={gamma_d} in {elapsed:.2f}s")


def test_criterion_2_sequential_beats_simultaneous(fig2, report):
    start = time.perf_counter()
    sim = simultaneous_attack_value(fig2, 2)[1]
    seq = solve_sequential(fig2, 2)[0]
    oracle = game_tree_oracle(fig2, 2)[0]
    elapsed = time.perf_counter() - start
    ok = sim == 0 and seq == -1 and oracle == -1 and elapsed < 5
    assert report(2, ok, f"simultaneous={sim} sequential={seq} oracle={oracle} in {elapsed:.2f}s")


def test_criterion_3_shortest_path_dominated(fig3, report):
    start = time.perf_counter()
    ans = path_finder("vD", "t1", fig3)
    shortest = all_pairs_shortest_paths(fig3).path("vD", "t1")
    # the greedy responder walks the shortest path to the first alarm
    chase = OnlinePolicy("greedy-deterministic", "vD")
    out = simulate_online(chase, fig3, AttackStream.of((0, "t1"), (1, "t2")))
    elapsed = time.perf_counter() - start
    ok = (
        len(ans.path) - 1 == 4
        and "v5" not in ans.path
        and ans.value == 0
        and "v5" in shortest
        and len(out.lost) >= 1
        and elapsed < 5
    )
    assert report(
        3, ok, f"path={' '.join(ans.path)} value={ans.value}; shortest-path policy lost {sorted(out.lost)} in {elapsed:.2f}s"
    )


def test_criterion_4_gamma_goes_to_zero(report):
    start = time.perf_counter()
    failures = []
    for k, kp in [(3, 2), (4, 3), (3, 4)]:
        for eps in (0.1, 0.01, 0.001):
            if kp < k:
                inst = gen_underestimation_instance(k, kp, eps)
            else:
                inst = gen_overestimation_instance(k, kp, eps, family="ratio-star")
            g = value_with_guess(inst, k, kp)
            if g.gamma is None or abs(g.gamma - eps) > 1e-9:
                failures.append((k, kp, eps, g.gamma))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    assert report(4, ok, f"mismatches={failures} in {elapsed:.1f}s")


def criterion_5_pairs():
    for k in range(1, 5):
        for kp in range(1, 9):
            if kp < k:
                yield k, kp, "additive"
            elif k < kp < 2 * k:
                yield k, kp, "additive-mid"
            elif kp >= 2 * k:
                yield k, kp, "additive-high"


@pytest.mark.xfail(strict=True, reason="overestimation families do not reach the closed form; see decision notes")
def test_criterion_5_additive_factor(report, capsys):
    start = time.perf_counter()
    results = []
    for k, kp, family in criterion_5_pairs():
        for eps in (Fraction(1, 10), Fraction(1, 100)):
            if family == "additive":
                inst = gen_underestimation_instance(k, kp, float(eps), family="additive")
            else:
                inst = gen_overestimation_instance(k, kp, float(eps), family=family)
            expect = float(gamma_prime_closed_form(k, kp, eps))
            try:
                got = value_with_guess(inst, k, kp, state_budget=PER_PAIR_BUDGET).gamma_prime
            except BudgetExceeded:
                got = None
            good = got is not None and abs(got - expect) <= 1e-9
            results.append(good)
            with capsys.disabled():
                shown = "over budget" if got is None else f"{got:.6f}"
                print(f"\n  {'ok ' if good else 'bad'} k={k} k'={kp} {family} eps={eps}: got {shown}, closed form {expect:.6f}")
        if kp == 2 * k:
            cont = gamma_prime_closed_form(k, kp, Fraction(1, 100)) == -(kp - k) * (1 - Fraction(1, 100))
            results.append(cont)
    elapsed = time.perf_counter() - start
    ok = all(results) and elapsed < 300
    assert report(5, ok, f"{sum(results)}/{len(results)} checks matched in {elapsed:.1f}s")


def test_criterion_6_deterministic_lower_bound(report):
    start = time.perf_counter()
    ratios = {}
    for k in (2, 3, 4, 5):
        inst = gen_lower_bound_instance(k)
        rep = estimate_competitive_factor(OnlinePolicy.default_for(inst, "greedy-deterministic"), inst)
        ratios[k] = Fraction(rep.gamma).limit_denominator(1000)
    elapsed = time.perf_counter() - start
    ok = all(ratios[k] == Fraction(1, k - 1) for k in ratios) and elapsed < 60
    assert report(6, ok, f"ratios={ {k: str(v) for k, v in ratios.items()} } in {elapsed:.1f}s")


def test_criterion_7_oracle_equivalence(report):
    start = time.perf_counter()
    mismatches = []
    instances = small_instances(2024, 100, max_unit_vertices=7, min_targets=2, t_max=4, d_max=4)
    for inst in instances:
        for k in (1, 2, 3):
            a = solve_sequential(inst, k)[0]
            b = game_tree_oracle(inst, k)[0]
            if abs(a - b) > 1e-9:
                mismatches.append((inst.name, k, a, b))
    rng = random.Random(2025)
    covering = 0
    while covering < 100:
        inst = random_instance(rng, n_max=10, t_max=8, weights=(1, 2, 3), d_max=8)
        start_v = rng.choice(inst.vertices)
        attacked = {t: rng.randint(0, 8) for t in inst.targets}
        if abs(solve_srg(start_v, attacked, inst).utility - brute_force_cover(inst, start_v, attacked)) > 1e-9:
            mismatches.append(("cover", start_v, attacked))
        covering += 1
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 600
    assert report(7, ok, f"{len(instances)} instances x k=1..3 and {covering} covering checks, mismatches={mismatches[:3]} in {elapsed:.1f}s")


def test_criterion_8_invariants(report):
    start = time.perf_counter()
    broken = []
    rng = random.Random(8)
    for _ in range(60):
        inst = random_instance(rng, n_max=7, weights=(1, 2))
        board_names = list(inst.vertices)
        v, t = rng.choice(board_names), rng.choice(list(inst.targets))
        path = path_finder(v, t, inst).path
        if len(set(path)) != len(path):
            broken.append(("revisit", path))
        attacked = {x: rng.randint(0, 6) for x in inst.targets}
        route = solve_srg(v, attacked, inst)
        dm = all_pairs_shortest_paths(inst)
        wps, times = route.waypoints, route.route.arrival_times
        for i in range(1, len(wps)):
            if times[i] != times[i - 1] + dm(wps[i - 1], wps[i]) or times[i] > attacked[wps[i]]:
                broken.append(("route", wps))
        unit = all_pairs_shortest_paths(expand_to_unit_time(inst))
        if any(dm(a, b) != unit(a, b) for a in board_names for b in board_names):
            broken.append(("expansion", inst.name))
        if inst.compiled.n <= 7:
            values = [game_tree_oracle(inst, k)[0] for k in (1, 2, 3)]
            if not values[0] + 1e-12 >= values[1] >= values[2] - 1e-12:
                broken.append(("monotone", values))
    inst = gen_randomized_worstcase_instance(4, 2)
    stream = AttackStream.of((0, "o1"), (1, "o2"), (3, ["c1", "c2"]))
    pol = OnlinePolicy.default_for(inst, "coin-flip-randomized")
    outs = {json.dumps(simulate_online(pol, inst, stream, seed=99).to_dict()) for _ in range(3)}
    argv = ["online", "--policy", "coin", "--k", "3", "--h", "1", "--trials", "200", "--seed", "5", "--format", "csv"]
    if len(outs) != 1 or run(argv)[1] != run(argv)[1]:
        broken.append(("rerun", None))
    elapsed = time.perf_counter() - start
    assert report(8, not broken, f"violations={broken[:3]} in {elapsed:.1f}s")
