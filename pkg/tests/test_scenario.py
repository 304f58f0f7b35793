import numpy as np
import pytest

from snftransfer import (InstanceError, ScenarioSpec, apply_scenario1,
                         apply_scenario2, apply_scenario3,
                         build_scenario_instance,
                         check_myopic_optimality_condition,
                         evaluate_policy_average, myopic_policy, neighbors,
                         policy_iteration_average, run_sweep, sample_baselines,
                         write_sweep_csv)
from snftransfer.fixtures import (case_baselines, case_names,
                                  case_printed_kernels, five_snf_cost_matrix)
from snftransfer.scenario import SWEEP_CSV_HEADER


# ----------------------------------------------------------------------
# baseline sampling
# ----------------------------------------------------------------------

def test_baselines_rows_stochastic():
    bl = sample_baselines(5, seed=11)
    assert np.allclose(bl.matrices.sum(axis=2), 1.0)
    assert np.all(bl.matrices >= 0) and np.all(bl.matrices <= 1)


def test_baselines_deterministic_given_seed():
    a = sample_baselines(4, seed=42)
    b = sample_baselines(4, seed=42)
    assert np.array_equal(a.matrices, b.matrices)


def test_baselines_differ_across_seeds():
    a = sample_baselines(4, seed=1)
    b = sample_baselines(4, seed=2)
    assert not np.allclose(a.matrices, b.matrices)


def test_baselines_reject_empty():
    with pytest.raises(InstanceError):
        sample_baselines(0, seed=0)


# ----------------------------------------------------------------------
# neighbor structure
# ----------------------------------------------------------------------

def test_neighbors_endpoints_and_interior():
    assert neighbors(1, 5) == {2}
    assert neighbors(4, 5) == {3, 5}
    assert neighbors(5, 5) == {4}
    assert neighbors(1, 1) == set()


def test_neighbors_range_checked():
    with pytest.raises(InstanceError):
        neighbors(0, 5)
    with pytest.raises(InstanceError):
        neighbors(6, 5)


# ----------------------------------------------------------------------
# scenario constructions
# ----------------------------------------------------------------------

def test_scenario1_reproduces_published_matrices():
    for name in case_names():
        bl = case_baselines(name)
        kern = apply_scenario1(bl, 0.2)
        printed = case_printed_kernels(name)
        worst = max(abs(kern[a, j, r, c] - printed[f"{a},{j}"][r][c])
                    for a in range(1, 6) for j in range(1, 6)
                    for r in range(2) for c in range(2))
        assert worst <= 0.005, (name, worst)


def test_scenario1_beta_one_is_identity():
    bl = sample_baselines(4, seed=3)
    kern = apply_scenario1(bl, 1.0)
    for a in range(5):
        for j in range(1, 5):
            assert np.allclose(kern[a, j], bl.matrices[j - 1])


def test_scenario1_nonreceiving_untouched():
    bl = sample_baselines(3, seed=4)
    kern = apply_scenario1(bl, 0.3)
    assert np.allclose(kern[2, 1], bl.matrices[0])
    assert np.allclose(kern[0, 2], bl.matrices[1])
    # receiving facility: only the available-row changes
    assert np.allclose(kern[2, 2, 0], bl.matrices[1][0])
    assert kern[2, 2, 1, 1] == pytest.approx(0.3 * bl.matrices[1][1][1])


def test_scenario2_multipliers():
    bl = sample_baselines(5, seed=5)
    beta, gamma = 0.2, 5.0
    kern = apply_scenario2(bl, beta, gamma)
    # transfer to facility 4 touches facilities 3, 4, 5 only
    for j in (1, 2):
        assert np.allclose(kern[4, j], bl.matrices[j - 1])
    assert kern[4, 4, 1, 1] == pytest.approx(beta / gamma * bl.stay_available(4))
    assert kern[4, 3, 1, 1] == pytest.approx(beta * bl.stay_available(3))
    assert kern[4, 5, 1, 1] == pytest.approx(beta * bl.stay_available(5))


def test_scenario2_identity_at_unit_parameters():
    bl = sample_baselines(5, seed=6)
    kern = apply_scenario2(bl, 1.0, 1.0)
    for a in range(6):
        for j in range(1, 6):
            assert np.allclose(kern[a, j], bl.matrices[j - 1])


def test_scenario3_delta_one_matches_scenario2_plus_nonneighbors():
    bl = sample_baselines(5, seed=7)
    beta, gamma = 0.4, 4.0
    k3 = apply_scenario3(bl, beta, gamma, 1.0)
    k2 = apply_scenario2(bl, beta, gamma)
    for a in range(1, 6):
        touched = {a} | neighbors(a, 5)
        for j in range(1, 6):
            if j in touched:
                assert np.allclose(k3[a, j], k2[a, j])
            else:
                assert k3[a, j, 1, 1] == pytest.approx(beta * bl.stay_available(j))
                assert np.allclose(k3[a, j, 0], bl.matrices[j - 1][0])


def test_scenario3_identity_at_unit_parameters():
    bl = sample_baselines(5, seed=8)
    kern = apply_scenario3(bl, 1.0, 3.0, 3.0)
    for a in range(6):
        for j in range(1, 6):
            assert np.allclose(kern[a, j], bl.matrices[j - 1])


def test_scenario3_receiving_multiplier_dominated():
    rng = np.random.default_rng(9)
    bl = sample_baselines(5, seed=9)
    for _ in range(20):
        beta = rng.uniform(0, 1)
        gamma = rng.uniform(1, 10)
        delta = rng.uniform(1, gamma)
        kern = apply_scenario3(bl, beta, gamma, delta)
        for a in range(1, 6):
            receiving = kern[a, a, 1, 1] / bl.stay_available(a)
            for j in neighbors(a, 5):
                neighbor = kern[a, j, 1, 1] / bl.stay_available(j)
                assert receiving <= neighbor + 1e-12


def test_scenario_kernels_always_row_stochastic_row0_untouched():
    rng = np.random.default_rng(10)
    for _ in range(10):
        bl = sample_baselines(5, seed=int(rng.integers(1 << 30)))
        beta = rng.uniform(0, 1)
        gamma = rng.uniform(1, 10)
        delta = rng.uniform(1, gamma)
        for kern in (apply_scenario1(bl, beta),
                     apply_scenario2(bl, beta, gamma),
                     apply_scenario3(bl, beta, gamma, delta)):
            assert np.allclose(kern.sum(axis=3), 1.0)
            assert np.all(kern >= 0) and np.all(kern <= 1)
            for j in range(1, 6):
                assert np.allclose(kern[:, j, 0], bl.matrices[j - 1][0])


def test_parameter_validation():
    bl = sample_baselines(3, seed=0)
    with pytest.raises(InstanceError):
        apply_scenario1(bl, 1.2)
    with pytest.raises(InstanceError):
        apply_scenario2(bl, 0.5, 0.5)
    with pytest.raises(InstanceError):
        apply_scenario3(bl, 0.5, 2.0, 3.0)
    with pytest.raises(InstanceError):
        ScenarioSpec(scenario=3, beta=0.5, gamma=2.0, delta=3.0)
    with pytest.raises(InstanceError):
        ScenarioSpec(scenario=4, beta=0.5)


def test_spec_round_trip():
    spec = ScenarioSpec(scenario=3, beta=0.25, gamma=6.5, delta=1.75, seed=12)
    assert ScenarioSpec.from_dict(spec.to_dict()) == spec


# ----------------------------------------------------------------------
# reverted kernels make the myopic rule optimal
# ----------------------------------------------------------------------

def test_identity_parameters_make_myopic_optimal():
    costs = np.asarray(five_snf_cost_matrix())[:, :3]      # trim to 3 facilities
    lambdas = [0.2, 0.2, 0.2, 0.2]
    for spec in (ScenarioSpec(scenario=1, beta=1.0, seed=13, num_facilities=3),
                 ScenarioSpec(scenario=2, beta=1.0, gamma=1.0, seed=13,
                              num_facilities=3),
                 ScenarioSpec(scenario=3, beta=1.0, gamma=2.0, delta=2.0,
                              seed=13, num_facilities=3)):
        bl = sample_baselines(3, seed=[spec.seed, 0])
        inst = build_scenario_instance(spec, bl, costs, lambdas, 100.0)
        assert check_myopic_optimality_condition(inst)
        g_opt = policy_iteration_average(inst).gain
        g_myo, _ = evaluate_policy_average(inst, myopic_policy(inst))
        assert abs(g_myo - g_opt) <= 1e-8


# ----------------------------------------------------------------------
# sweeps
# ----------------------------------------------------------------------

def test_sweep_empty():
    spec = ScenarioSpec(scenario=1, beta=0.2, seed=14, num_facilities=2)
    result = run_sweep(spec, 0, [[10.0, 12.0]], [0.4], 50.0)
    assert result.records == () and result.failures == ()


def test_sweep_csv_shape(tmp_path):
    spec = ScenarioSpec(scenario=1, beta=0.3, seed=15, num_facilities=2)
    result = run_sweep(spec, 4, [[10.0, 12.0], [8.0, 14.0]], [0.3, 0.3], 60.0)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(result, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == SWEEP_CSV_HEADER
    assert len(lines) == 5
    assert lines[1].split(",")[0] == "0"


def test_sweep_deterministic_and_parallel_consistent():
    spec = ScenarioSpec(scenario=2, beta=0.5, gamma=2.0, seed=16, num_facilities=2)
    costs = [[10.0, 12.0], [8.0, 14.0]]
    a = run_sweep(spec, 6, costs, [0.3, 0.3], 60.0, jobs=1)
    b = run_sweep(spec, 6, costs, [0.3, 0.3], 60.0, jobs=2)
    assert [r.g_opt for r in a.records] == [r.g_opt for r in b.records]
    assert [r.g_rpr for r in a.records] == [r.g_rpr for r in b.records]


def test_sweep_gaps_nonnegative():
    spec = ScenarioSpec(scenario=3, beta=0.25, gamma=4.0, delta=1.75, seed=17,
                        num_facilities=3)
    costs = np.asarray(five_snf_cost_matrix())[:, :3]
    result = run_sweep(spec, 5, costs, [0.2] * 4, 100.0)
    assert result.failures == ()
    for rec in result.records:
        assert rec.gap_myopic_pct >= -1e-6
        assert rec.gap_rpr_pct >= -1e-6
