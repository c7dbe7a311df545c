import math

import pytest

from swapqkd import harness
from swapqkd.adversary import AttackStrategy
from swapqkd.harness import (
    CurvePoint,
    SimulationConfig,
    bits_tested_curve,
    curve_to_csv,
    detection_curve,
    run_simulation,
    splitmix64,
)


def test_splitmix64_is_deterministic_and_spreads():
    seeds = [splitmix64(12345, i) for i in range(1000)]
    assert seeds == [splitmix64(12345, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert all(0 <= s < 2**64 for s in seeds)
    assert splitmix64(1, 0) != splitmix64(2, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(rounds=0)
    with pytest.raises(ValueError):
        SimulationConfig(test_fraction=1.5)
    with pytest.raises(ValueError):
        SimulationConfig(procedure_policy=-0.1)
    with pytest.raises(ValueError):
        SimulationConfig(protocol="five")
    with pytest.raises(ValueError):
        SimulationConfig(protocol="four", attack=AttackStrategy("zlg"))
    with pytest.raises(ValueError):
        SimulationConfig(protocol="six", attack=AttackStrategy("four-swap"))


def test_identical_config_gives_bit_identical_report():
    config = SimulationConfig(
        protocol="six", rounds=400, attack=AttackStrategy("mixed"),
        test_fraction=0.7, master_seed=2024,
    )
    assert run_simulation(config) == run_simulation(config)


def test_different_seeds_give_different_transcript_statistics():
    reports = {
        run_simulation(
            SimulationConfig(protocol="six", rounds=300, attack=AttackStrategy("zlg"),
                             test_fraction=1.0, master_seed=seed)
        ).empirical_detection_prob
        for seed in range(4)
    }
    assert len(reports) > 1


@pytest.mark.parametrize(
    "config",
    [
        SimulationConfig(protocol="six", rounds=300, attack=AttackStrategy("none"),
                         test_fraction=1.0, master_seed=5),
        SimulationConfig(protocol="four", rounds=300, attack=AttackStrategy("none"),
                         test_fraction=0.3, master_seed=6),
        SimulationConfig(protocol="six", rounds=200, attack=AttackStrategy("none"),
                         procedure_policy=0.0, master_seed=7),
    ],
)
def test_no_adversary_null(config):
    report = run_simulation(config)
    assert report.agreement_rate == 1.0
    assert not report.detected_any
    assert report.empirical_detection_prob == 0.0
    assert report.eve_key_information == 0.0


def test_matched_attack_null():
    # zlg against a procedure-(i)-only Alice: invisible and fully informed.
    config = SimulationConfig(
        protocol="six", rounds=500, attack=AttackStrategy("zlg"),
        procedure_policy=1.0, test_fraction=1.0, master_seed=11,
    )
    report = run_simulation(config)
    assert not report.detected_any
    assert report.empirical_detection_prob == 0.0
    assert report.eve_key_information == 1.0
    assert report.agreement_rate == 1.0


def test_zlg_fair_coin_mismatch_rate_quarter():
    rounds = 4000
    config = SimulationConfig(
        protocol="six", rounds=rounds, attack=AttackStrategy("zlg"),
        test_fraction=1.0, master_seed=13,
    )
    report = run_simulation(config)
    sigma = math.sqrt(0.25 * 0.75 / rounds)
    assert abs(report.empirical_detection_prob - 0.25) < 3 * sigma
    assert report.compared == rounds
    # eve learns the key exactly on matched (procedure i) rounds
    assert abs(report.eve_key_information - 0.5) < 3 * math.sqrt(0.25 / rounds)


def test_report_invariants_and_json():
    config = SimulationConfig(protocol="four", rounds=250,
                              attack=AttackStrategy("four-swap"),
                              test_fraction=0.5, master_seed=3)
    report = run_simulation(config)
    assert 0 <= report.compared <= report.rounds_run
    assert 0.0 <= report.agreement_rate <= 1.0
    assert 0.0 <= report.empirical_detection_prob <= 1.0
    assert 0.0 <= report.eve_key_information <= 1.0
    assert report.key_bits_per_transmitted_qubit == 1.0
    lo, hi = report.detection_ci
    assert 0.0 <= lo <= report.empirical_detection_prob <= hi <= 1.0
    doc = report.to_json_dict()
    assert doc["rounds_run"] == 250
    assert doc["theoretical_detection_prob"] == 1.0 - 0.75**report.compared


def test_detection_curve_edge_points():
    config = SimulationConfig(protocol="six", rounds=1, attack=AttackStrategy("mixed"),
                              master_seed=21)
    points = detection_curve(config, [0, 1], 200)
    zero, one = points
    assert zero.n == 0 and zero.empirical == 0.0 and zero.theoretical == 0.0
    assert one.theoretical == 0.25
    sigma = math.sqrt(0.25 * 0.75 / 200)
    assert abs(one.empirical - 0.25) < 4 * sigma


def test_detection_curve_validation():
    config = SimulationConfig(protocol="six", rounds=1, attack=AttackStrategy("mixed"))
    with pytest.raises(ValueError):
        detection_curve(config, [1], 99)
    with pytest.raises(ValueError):
        detection_curve(config, [-1], 100)


def test_bits_tested_curve_maps_bits_to_pairs():
    config = SimulationConfig(protocol="six", rounds=1, attack=AttackStrategy("mixed"),
                              master_seed=22)
    points = bits_tested_curve(config, [0, 2, 4], 150)
    assert [pt.n for pt in points] == [0, 1, 2]
    assert points[1].theoretical == 0.25
    assert abs(points[2].theoretical - (1 - 0.75**2)) < 1e-12
    with pytest.raises(ValueError):
        bits_tested_curve(config, [3], 150)


def test_curve_is_reproducible_and_csv_stable():
    config = SimulationConfig(protocol="four", rounds=1,
                              attack=AttackStrategy("four-swap"), master_seed=9)
    points_a = detection_curve(config, [1, 2], 120)
    points_b = detection_curve(config, [1, 2], 120)
    assert points_a == points_b
    csv_text = curve_to_csv(points_a)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "n,empirical,theoretical,ci_low,ci_high"
    assert len(lines) == 3


def test_curve_point_fields():
    pt = CurvePoint(n=4, empirical=0.7, theoretical=1 - 0.75**4, ci_low=0.65, ci_high=0.75)
    assert pt.n == 4
    assert abs(pt.theoretical - 175 / 256) < 1e-12
