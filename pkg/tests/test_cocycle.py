"""Tests for the splitting and Lyapunov exponent estimators."""

import numpy as np
import pytest

from ph3lab.catalog import builtin_map
from ph3lab.cocycle import (
    convergence_diagnostic,
    directional_exponent,
    exceedance_fraction,
    lyapunov_spectrum,
    oseledec_splitting,
    random_points,
)


SETTLED = {"cocycle": {"burn_in": 60, "stderr_blocks": 5}}


def test_linear_spectrum_is_exact(linear_ph, linear_anosov):
    points = random_points(0, 3)
    for spec in (linear_ph, linear_anosov):
        report = lyapunov_spectrum(spec, points, n=200, config=SETTLED)
        np.testing.assert_allclose(report.exponents, spec.linearization().exponents, atol=1e-10)
        assert report.per_seed.shape == (3, 3)


def test_perturbed_spectrum_sums_to_zero(da_ph):
    report = lyapunov_spectrum(da_ph, random_points(1, 2), n=300, burn_in=20)
    assert report.sum_defect < 1e-10
    assert report.exponents[0] < report.exponents[1] < report.exponents[2]


def test_single_seed_uses_block_errors(da_ph):
    report = lyapunov_spectrum(da_ph, [0.2, 0.3, 0.4], n=100, burn_in=10, seed=5, config=SETTLED)
    assert report.stderr.shape == (3,)
    assert np.all(report.stderr > 0.0)
    assert report.to_dict()["seed"] == 5


def test_rejects_empty_run(linear_ph):
    with pytest.raises(ValueError):
        lyapunov_spectrum(linear_ph, [0.1, 0.2, 0.3], n=0)


def test_splitting_matches_eigenvectors(linear_anosov):
    frame = oseledec_splitting(linear_anosov, random_points(2, 4), horizon=60)
    data = linear_anosov.linearization()
    for sigma in ("s", "c", "u"):
        cosines = np.abs(frame.direction(sigma) @ data.direction(sigma))
        np.testing.assert_allclose(cosines, 1.0, atol=1e-10)
    assert np.all(frame.gram_determinant() > 0.1)
    assert frame.residuals.max() < 1e-8


def test_splitting_is_invariant_for_perturbed_map(da_ph):
    frame = oseledec_splitting(da_ph, [0.3, 0.6, 0.1], horizon=60)
    assert frame.residuals.max() < 1e-6
    np.testing.assert_allclose(np.linalg.norm(frame.e_c), 1.0)
    assert frame.converged
    assert frame.to_dict()["converged"] is True


def test_short_horizon_splitting_is_flagged_unconverged():
    frame = oseledec_splitting(builtin_map("da_ph", 0.3), [0.3, 0.6, 0.1], horizon=3)
    assert frame.residuals.max() > 1e-3
    assert not frame.converged
    assert frame.to_dict()["converged"] is False


def test_directional_exponent_of_linear_map(linear_ph):
    value = directional_exponent(linear_ph, [0.1, 0.2, 0.3], "u", n=50)
    assert value == pytest.approx(linear_ph.linearization().exponent("u"), abs=1e-10)
    with pytest.raises(ValueError):
        directional_exponent(linear_ph, [0.1, 0.2, 0.3], "x", n=50)


def test_linear_map_never_exceeds_its_rate(linear_ph):
    result = exceedance_fraction(linear_ph, "u", random_points(3, 5), n=10, n_max=40, margin=0.05)
    assert result["fraction"] == 0.0
    assert result["count"] == 5
    with pytest.raises(ValueError):
        exceedance_fraction(linear_ph, "u", random_points(3, 5), n=50, n_max=40, margin=0.05)


def test_convergence_diagnostic_is_quiet_for_linear(linear_anosov):
    result = convergence_diagnostic(linear_anosov, random_points(4, 2), n=100, config=SETTLED)
    assert not result["flagged"]
