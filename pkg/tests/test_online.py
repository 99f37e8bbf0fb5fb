import json
from fractions import Fraction

import numpy as np
import pytest

from alarmpatrol import (
    AttackStream,
    OnlinePolicy,
    all_pairs_shortest_paths,
    competitive_table,
    estimate_competitive_factor,
    gamma_r_closed_form,
    gen_lower_bound_instance,
    gen_randomized_worstcase_instance,
    simulate_online,
)
from alarmpatrol.online import coin_policy_ratio, gamma_r_exact, render_table, round2

EXPECTED_GAMMA_R = ["0.87", "0.69", "0.54", "0.44", "0.36", "0.30", "0.26", "0.22", "0.01"]
EXPECTED_GAMMA_D = ["0.50", "0.33", "0.25", "0.20", "0.17", "0.14", "0.12", "0.11", "0.01"]
K_VALUES = [3, 4, 5, 6, 7, 8, 9, 10, 100]


def coin(inst):
    return OnlinePolicy.default_for(inst, "coin-flip-randomized")


def gamma_sigma(report):
    return report.stderr / report.scale / (1 + report.v_star / report.scale)


@pytest.fixture(scope="module")
def mc_3_1():
    inst = gen_randomized_worstcase_instance(3, 1)
    return estimate_competitive_factor(coin(inst), inst, trials=100_000, seed=42)


@pytest.fixture(scope="module")
def mc_5_2():
    inst = gen_randomized_worstcase_instance(5, 2)
    return estimate_competitive_factor(coin(inst), inst, trials=100_000, seed=42)


def test_lower_bound_k1():
    inst = gen_lower_bound_instance(1)
    assert set(inst.targets) == {"s1", "tf"}
    assert inst.deadline("s1") == 1 and inst.deadline("tf") == 2
    assert all_pairs_shortest_paths(inst)("v", "tf") == 2


def test_lower_bound_k4():
    inst = gen_lower_bound_instance(4)
    spokes = sorted(t for t in inst.targets if t != "tf")
    assert spokes == ["s1", "s2", "s3"]
    assert {inst.deadline(s) for s in spokes} == {7}
    assert inst.deadline("tf") == 8
    assert all_pairs_shortest_paths(inst)("v", "tf") == 8


def test_randomized_instance_shapes():
    inst = gen_randomized_worstcase_instance(3, 1)
    near = sorted(t for t in inst.targets if t.startswith("c"))
    assert near == ["c1", "c2"] and {inst.deadline(c) for c in near} == {2}
    assert inst.deadline("o1") == 3 and all_pairs_shortest_paths(inst)("v", "o1") == 3
    small = gen_randomized_worstcase_instance(2, 1)
    assert sorted(small.targets) == ["c1", "o1"] and small.deadline("c1") == 1
    with pytest.raises(ValueError):
        gen_randomized_worstcase_instance(3, 3)


def test_closed_form_values():
    assert gamma_r_closed_form(3, 1) == 0.875
    assert gamma_r_closed_form(3, 2) == 1.125
    assert round2(min(gamma_r_exact(4, h) for h in range(1, 4))) == "0.69"
    with pytest.raises(ValueError):
        gamma_r_closed_form(3, 0)


def test_table_matches_published():
    rows = competitive_table(K_VALUES)
    assert [round2(r.gamma_r) for r in rows] == EXPECTED_GAMMA_R
    assert [round2(r.gamma_d) for r in rows] == EXPECTED_GAMMA_D
    assert rows[0].h == 1 and rows[0].gamma_d == Fraction(1, 2)


def test_table_render():
    text = render_table(competitive_table([3, 4]), "text")
    assert text.splitlines()[0].split() == ["k", "h", "gamma_r", "gamma_d"]
    csv = render_table(competitive_table([3]), "csv")
    assert csv == "k,h,gamma_r,gamma_d\n3,1,0.87,0.50\n"


def test_randomized_beats_deterministic():
    for row in competitive_table(range(3, 11)):
        assert row.gamma_r > row.gamma_d
    last = competitive_table([100])[0]
    assert last.gamma_r - last.gamma_d < Fraction(5, 1000)


@pytest.mark.parametrize("k", range(3, 11))
def test_minimizer_unique(k):
    values = sorted(gamma_r_exact(k, h) for h in range(1, k))
    assert values[0] < values[1]


def test_greedy_single_attack_saved(fig2):
    pol = OnlinePolicy("greedy-deterministic", "n1")
    out = simulate_online(pol, fig2, AttackStream.of((0, "t2")), seed=1)
    assert out.lost == frozenset() and out.saved == {"t2"}
    assert out.defender_utility == 0


def test_coin_standing_loses_spokes():
    inst = gen_randomized_worstcase_instance(3, 1)
    pol = coin(inst)
    # the first draw decides the single far alarm; at or above 1/2 the policy stays home
    seed = next(s for s in range(100) if np.random.default_rng(s).random() >= 0.5)
    out = simulate_online(pol, inst, AttackStream.of((0, "o1"), (2, ["c1", "c2"])), seed=seed)
    assert out.lost == {"o1"}
    assert out.saved == {"c1", "c2"}


def test_coin_answering_loses_clique():
    inst = gen_randomized_worstcase_instance(3, 1)
    seed = next(s for s in range(100) if np.random.default_rng(s).random() < 0.5)
    # two steps down the spoke the clique is out of reach
    out = simulate_online(coin(inst), inst, AttackStream.of((0, "o1"), (2, ["c1", "c2"])), seed=seed)
    assert out.saved == {"o1"}
    assert out.lost == {"c1", "c2"}


@pytest.mark.parametrize("k", [2, 3, 4])
def test_greedy_chases_tf(k):
    inst = gen_lower_bound_instance(k)
    pol = OnlinePolicy.default_for(inst, "greedy-deterministic")
    spokes = [t for t in inst.targets if t != "tf"]
    out = simulate_online(pol, inst, AttackStream.of((0, "tf"), (2 * k - 1, spokes)))
    assert out.saved == {"tf"}
    assert out.lost == set(spokes)


def test_stream_too_long(fig2):
    pol = OnlinePolicy("greedy-deterministic", "n1")
    with pytest.raises(ValueError):
        simulate_online(pol, fig2, AttackStream.of((0, "t1"), (1, "t2"), (2, "t1")))


def test_policy_validation():
    with pytest.raises(ValueError):
        OnlinePolicy("greedy-deterministic", "v", respond_probability=0.5)
    with pytest.raises(ValueError):
        OnlinePolicy("lazy", "v")
    assert OnlinePolicy("coin-flip-randomized", "v").respond_probability == 0.5


def test_simulation_is_deterministic():
    inst = gen_randomized_worstcase_instance(4, 2)
    stream = AttackStream.of((0, "o1"), (1, "o2"), (3, ["c1", "c2"]))
    runs = [json.dumps(simulate_online(coin(inst), inst, stream, seed=7).to_dict()) for _ in range(3)]
    assert len(set(runs)) == 1
    seen = {json.dumps(simulate_online(coin(inst), inst, stream, seed=s).to_dict()) for s in range(40)}
    assert len(seen) > 1


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_lower_bound_ratio(k):
    inst = gen_lower_bound_instance(k)
    report = estimate_competitive_factor(OnlinePolicy.default_for(inst, "greedy-deterministic"), inst)
    assert Fraction(report.gamma).limit_denominator(100) == Fraction(1, k - 1)
    assert report.v_star == -1


def test_threshold_variant_ignores_tf():
    inst = gen_lower_bound_instance(3)
    pol = OnlinePolicy.default_for(inst, "greedy-deterministic", threshold=2)
    assert estimate_competitive_factor(pol, inst).gamma == pytest.approx(1)


@pytest.mark.parametrize("k, h", [(3, 1), (4, 1), (4, 2), (5, 2), (3, 2)])
def test_exhaustive_coin_matches_derivation(k, h):
    inst = gen_randomized_worstcase_instance(k, h)
    report = estimate_competitive_factor(coin(inst), inst)
    assert report.gamma == pytest.approx(float(coin_policy_ratio(k, h)), abs=1e-9)


@pytest.mark.xfail(strict=True, reason="published coin-policy value; exact expectation of the policy is 0.75")
def test_exhaustive_coin_published_value():
    inst = gen_randomized_worstcase_instance(3, 1)
    assert estimate_competitive_factor(coin(inst), inst).gamma == pytest.approx(0.875, abs=1e-9)


def test_monte_carlo_converges(mc_3_1, mc_5_2):
    for report, (k, h) in [(mc_3_1, (3, 1)), (mc_5_2, (5, 2))]:
        assert report.trials == 100_000
        assert abs(report.gamma - float(coin_policy_ratio(k, h))) <= 3 * gamma_sigma(report)
        assert abs(report.v - report.exact) <= 3 * report.stderr


@pytest.mark.xfail(strict=True, reason="published coin-policy value is not the policy's expectation")
def test_monte_carlo_published_3_1(mc_3_1):
    assert abs(mc_3_1.gamma - 0.875) <= 3 * gamma_sigma(mc_3_1)


@pytest.mark.xfail(strict=True, reason="published coin-policy formula is not the policy's expectation")
def test_monte_carlo_published_5_2(mc_5_2):
    assert abs(mc_5_2.gamma - gamma_r_closed_form(5, 2)) <= 3 * gamma_sigma(mc_5_2)


def test_monte_carlo_seeded():
    inst = gen_randomized_worstcase_instance(3, 1)
    a = estimate_competitive_factor(coin(inst), inst, trials=500, seed=3)
    b = estimate_competitive_factor(coin(inst), inst, trials=500, seed=3)
    assert a == b


def test_scripted_adversary():
    inst = gen_randomized_worstcase_instance(3, 1)
    stream = AttackStream.of((0, "o1"), (1, ["c1", "c2"]))
    report = estimate_competitive_factor(coin(inst), inst, adversary="scripted", stream=stream, trials=400, seed=1)
    assert -2 <= report.v <= -1
    with pytest.raises(ValueError):
        estimate_competitive_factor(coin(inst), inst, adversary="scripted")
