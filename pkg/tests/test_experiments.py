"""Tests for the end-to-end experiment drivers and the runner."""

import numpy as np
import pytest

from ph3lab.catalog import CATALOG, builtin_map
from ph3lab.exceptions import VerificationFailed
from ph3lab.experiments import (
    ExperimentRunner,
    SweepReport,
    rigidity_verdict,
    run_anosov_center_inequality,
    run_center_topology,
    run_rigidity,
    run_sweep,
    seed_points,
    split_clusters,
)


LINEAR = (-1.0, 0.0, 1.0)
# Orbit lengths long enough to resolve the exponent drop of da_ph at epsilon 0.2
RESOLVED = {"cocycle": {"burn_in": 100, "stderr_blocks": 10}, "experiments": {"exceedance": False}}


def test_seed_points_do_not_depend_on_count():
    np.testing.assert_array_equal(seed_points(5, 2), seed_points(5, 4)[:2])


def test_rigidity_verdict_rules():
    stderr = (0.01, 0.01, 0.01)
    assert rigidity_verdict((-1.0, 0.0, 1.0), stderr, LINEAR, 1e-8) == "rigid-consistent"
    assert rigidity_verdict((-0.8, 0.0, 0.8), stderr, LINEAR, 1e-8) == "inequality-consistent"
    assert rigidity_verdict((-1.0, -0.2, 1.2), stderr, LINEAR, 1e-8) == "violation"
    assert rigidity_verdict((-1.2, 0.2, 1.0), stderr, LINEAR, 1e-8) == "violation"


def test_split_clusters_cuts_wide_gaps():
    groups = split_clusters(np.array([0.5, 0.1, 0.1001]), np.full(3, 1e-3), 1e-8)
    assert [g.tolist() for g in groups] == [[1, 2], [0]]
    assert len(split_clusters(np.array([0.3]), np.array([0.0]), 1e-8)) == 1


def test_linear_map_is_rigid(linear_ph, fast_config):
    report = run_rigidity(linear_ph, seeds=2, n=200, burn_in=60, config=fast_config)
    assert report.verdict == "rigid-consistent"
    assert np.max(np.abs(report.difference)) < 1e-8
    assert report.clusters == []
    assert report.to_frame().shape == (2, 4)


def test_rigidity_reports_exceedance(linear_ph):
    config = {"experiments": {"exceedance_n_max": 40, "exceedance_n": 10}}
    report = run_rigidity(linear_ph, seeds=2, n=100, burn_in=60, config=config)
    assert [e["sigma"] for e in report.exceedance] == ["u", "s"]
    assert all(e["fraction"] == 0.0 for e in report.exceedance)


def test_sweep_grid_must_contain_zero(fast_config):
    with pytest.raises(ValueError):
        run_sweep(CATALOG["da_ph"].factory, [0.1, 0.2], seeds=2, n=50, burn_in=10, config=fast_config)


def test_sweep_with_flip_check(fast_config):
    report = run_sweep(CATALOG["da_ph"].factory, [0.0, 0.05], seeds=2, n=100, burn_in=20, config=fast_config)
    assert report.epsilons == [0.0, 0.05]
    assert len(report.symmetry) == 1
    assert set(report.symmetry[0]) == {"epsilon", "value", "flipped", "consistent"}
    assert report.to_frame().shape == (2, 3)


def test_shear_family_satisfies_the_exponent_inequality():
    spec = builtin_map("da_ph", 0.2)
    report = run_rigidity(spec, seeds=4, n=20000, master_seed=7, config=RESOLVED)
    assert report.verdict == "inequality-consistent"
    assert report.difference[2] < -3.0 * report.stderr[2]
    assert report.difference[0] > 0.0


def test_sweep_peaks_at_the_linear_map():
    report = run_sweep(
        CATALOG["da_ph"].factory, [-0.2, 0.0, 0.2], seeds=3, n=8000, master_seed=11, flip_axis=None, config=RESOLVED,
    )
    assert report.argmax == 0.0
    assert report.max_at_zero
    assert report.verdict == "local-max-consistent"
    assert report.symmetry == []


def test_sweep_verdict_from_curve():
    peaked = SweepReport("f", [-0.1, 0.0, 0.1], [0.9, 1.0, 0.95], [0.001] * 3, 100, 0, 4, 1e-8)
    assert peaked.argmax == 0.0
    assert peaked.verdict == "local-max-consistent"
    shifted = SweepReport("f", [-0.1, 0.0, 0.1], [0.9, 1.0, 1.2], [0.001] * 3, 100, 0, 4, 1e-8)
    assert shifted.verdict == "violation"


def test_skew_map_has_circle_center_leaves(skew_ph, fast_config):
    report = run_center_topology(skew_ph, seeds=2, n=200, burn_in=20, config=fast_config)
    assert report.decoupled
    assert report.circle_length == pytest.approx(1.0)
    assert report.exponent_vanishes
    assert report.leaves_close
    assert report.verdict == "circles-consistent"


def test_center_topology_needs_neutral_center(linear_anosov, fast_config):
    with pytest.raises(ValueError):
        run_center_topology(linear_anosov, seeds=2, n=100, config=fast_config)


def test_center_inequality_for_linear_inverse(linear_ph, fast_config):
    spec = builtin_map("linear_anosov_inverse")
    report = run_anosov_center_inequality(spec, seeds=2, n=200, burn_in=60, config=fast_config)
    assert report.verdict == "rigid-consistent"
    assert abs(report.margin) < 1e-8
    with pytest.raises(ValueError):
        run_anosov_center_inequality(linear_ph, seeds=2, n=100, config=fast_config)


def test_runner_spectrum(linear_ph, fast_config):
    runner = ExperimentRunner(fast_config)
    outcome = runner.execute("spectrum", linear_ph, {"n": 100, "burn_in": 60}, seed=1)
    assert outcome.verdict is None
    assert not outcome.is_violation
    assert np.max(np.abs(outcome.result["difference"])) < 1e-8
    assert len(outcome.tables["per_seed"]) == 2


def test_runner_periodic(linear_anosov, fast_config):
    runner = ExperimentRunner(fast_config)
    outcome = runner.execute("periodic", linear_anosov, {"max_period": 2}, seed=0)
    assert outcome.verdict == "constant"
    assert outcome.result["f1"]["counts"]["2"] == {"found": 13, "expected": 13}
    assert len(outcome.tables["periodic_f1"]) == 7


def test_runner_splitting(linear_anosov, fast_config):
    outcome = ExperimentRunner(fast_config).execute("splitting", linear_anosov, {"grid": 3}, seed=0)
    assert outcome.verdict == "partially-hyperbolic"
    assert min(outcome.result["gram"]) > 0.1


def test_runner_rejects_unknown_kind_and_missing_family(linear_ph, fast_config):
    runner = ExperimentRunner(fast_config)
    with pytest.raises(ValueError):
        runner.execute("teleport", linear_ph, {})
    with pytest.raises(ValueError):
        runner.execute("sweep", linear_ph, {"epsilons": [0.0]})


def test_runner_refuses_maps_that_fail_verification(fast_config):
    runner = ExperimentRunner(fast_config)
    with pytest.raises(VerificationFailed):
        runner.execute("periodic", builtin_map("da_anosov", 0.2), {"max_period": 2})
    with pytest.raises(VerificationFailed):
        runner.execute(
            "sweep", builtin_map("da_anosov", 0.0), {"epsilons": [0.0, 0.2]}, family=CATALOG["da_anosov"].factory,
        )


def test_runner_verifies_with_configured_horizon(fast_config):
    spec = builtin_map("da_ph", 0.2)
    outcome = ExperimentRunner(fast_config).execute("splitting", spec, {}, seed=0)
    assert outcome.verdict == "partially-hyperbolic"
    assert outcome.result["partial_hyperbolicity"]["horizon"] == 5
    assert outcome.result["frame"]["converged"] is True

    short = dict(fast_config, experiments=dict(fast_config["experiments"], ph_horizon=1))
    outcome = ExperimentRunner(short).execute("splitting", spec, {}, seed=0)
    assert outcome.verdict == "not-verified"
    with pytest.raises(VerificationFailed):
        ExperimentRunner(short).execute("leaf", spec, {"R": [1.0]})


def test_runner_flags_unconverged_splitting(fast_config):
    outcome = ExperimentRunner(fast_config).execute("splitting", builtin_map("da_ph", 0.2), {"horizon": 3}, seed=0)
    assert outcome.verdict == "not-converged"
    assert outcome.result["frame"]["converged"] is False
    assert outcome.result["partial_hyperbolicity"]["passed"] is True
