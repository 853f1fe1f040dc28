"""Tests for map specifications, Jacobians and linearizations."""

import math

import numpy as np
import pytest

from ph3lab.catalog import A_ANOSOV, A_PH, builtin_map
from ph3lab.exceptions import NotPartiallyHyperbolicLinearization, VerificationFailed
from ph3lab.torus_maps import (
    IntegerMatrix3,
    ShearStep,
    TorusMapSpec,
    flip_conjugate,
    integer_adjugate,
    integer_det,
    verify_partial_hyperbolicity,
)


POINTS = np.array([
    [0.1, 0.2, 0.3],
    [0.7, 0.05, 0.9],
    [0.33, 0.61, 0.48],
])


def test_integer_matrix_rejects_non_unimodular():
    with pytest.raises(ValueError):
        IntegerMatrix3(((2, 0, 0), (0, 1, 0), (0, 0, 1)))
    with pytest.raises(ValueError):
        IntegerMatrix3.from_array([[1.5, 0, 0], [0, 1, 0], [0, 0, 1]])


def test_power_and_inverse_are_exact():
    assert A_ANOSOV.power(2).to_list() == [[14, 11, 6], [11, 9, 5], [6, 5, 3]]
    assert A_ANOSOV.power(-1).to_list() == [[1, -1, 0], [-1, 2, -1], [0, -1, 2]]
    identity = np.array(A_ANOSOV.entries) @ np.array(A_ANOSOV.inverse().entries)
    np.testing.assert_array_equal(identity, np.eye(3, dtype=int))


def test_integer_det_and_adjugate():
    shifted = np.array(A_ANOSOV.entries) - np.eye(3, dtype=int)
    assert integer_det(shifted) == 1
    product = integer_adjugate(shifted).dot(shifted.astype(object))
    assert [[int(v) for v in row] for row in product] == np.eye(3, dtype=int).tolist()


def test_linearization_of_ph_matrix(linear_ph):
    data = linear_ph.linearization()
    golden = math.log((3 + math.sqrt(5)) / 2)
    assert data.exponent("u") == pytest.approx(golden, abs=1e-12)
    assert data.exponent("u") == pytest.approx(0.9624236501192069, abs=1e-12)
    assert data.exponent("c") == pytest.approx(0.0, abs=1e-12)
    assert data.exponent("s") == pytest.approx(-golden, abs=1e-12)
    assert not data.is_anosov
    np.testing.assert_allclose(np.abs(data.direction("c")), [0.0, 0.0, 1.0], atol=1e-12)


def test_linearization_of_anosov_matrix(linear_anosov):
    data = linear_anosov.linearization()
    assert data.is_anosov
    assert sum(data.exponents) == pytest.approx(0.0, abs=1e-12)
    assert data.exponent("c") < 0.0


def test_linearization_rejects_repeated_moduli():
    spec = TorusMapSpec(IntegerMatrix3(((1, 0, 0), (0, 1, 0), (0, 0, 1))))
    with pytest.raises(NotPartiallyHyperbolicLinearization):
        spec.linearization()


def test_inverse_round_trip(da_ph, conjugate_anosov):
    for spec in (da_ph, conjugate_anosov):
        back = spec.inverse_evaluate(spec.evaluate(POINTS, "cover"), "cover")
        np.testing.assert_allclose(back, POINTS, atol=1e-12)


def test_jacobian_matches_finite_differences(conjugate_anosov):
    h = 1e-6
    jac = conjugate_anosov.jacobian(POINTS)
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        column = (conjugate_anosov.evaluate(POINTS + step, "cover")
                  - conjugate_anosov.evaluate(POINTS - step, "cover")) / (2 * h)
        np.testing.assert_allclose(jac[..., :, i], column, atol=1e-6)


def test_jacobian_is_volume_preserving(da_ph):
    np.testing.assert_allclose(np.linalg.det(da_ph.jacobian(POINTS)), 1.0, atol=1e-12)


def test_cover_equivariance(da_ph):
    shift = np.array([1.0, -2.0, 3.0])
    lhs = da_ph.evaluate(POINTS + shift, "cover")
    rhs = da_ph.evaluate(POINTS, "cover") + A_PH.array @ shift
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_iterated_composes(da_ph):
    twice = da_ph.iterated(2)
    np.testing.assert_allclose(
        twice.evaluate(POINTS, "cover"),
        da_ph.evaluate(da_ph.evaluate(POINTS, "cover"), "cover"),
        atol=1e-12,
    )
    np.testing.assert_array_equal(twice.cover_matrix, A_PH.power(2).array)


def test_torus_evaluation_is_reduced(da_ph):
    images = da_ph.evaluate(POINTS)
    assert np.all(images >= 0.0) and np.all(images < 1.0)


def test_flip_conjugate_is_reflection_conjugacy(da_ph):
    for axis in range(3):
        reflect = np.ones(3)
        reflect[axis] = -1.0
        flipped = flip_conjugate(da_ph, axis)
        np.testing.assert_allclose(
            flipped.evaluate(POINTS, "cover"),
            reflect * da_ph.evaluate(reflect * POINTS, "cover"),
            atol=1e-12,
        )


def test_shear_profile_and_derivative():
    step = ShearStep(source=0, target=1, epsilon=0.2, cos_coeffs=(0.5,), sin_coeffs=(1.0, 0.25))
    t = np.linspace(0.0, 1.0, 7)
    expected = 0.5 * np.cos(2 * np.pi * t) + np.sin(2 * np.pi * t) + 0.25 * np.sin(4 * np.pi * t)
    np.testing.assert_allclose(step.profile(t), expected, atol=1e-12)
    h = 1e-6
    numeric = (step.profile(t + h) - step.profile(t - h)) / (2 * h)
    np.testing.assert_allclose(step.profile_derivative(t), numeric, atol=1e-6)
    with pytest.raises(ValueError):
        ShearStep(source=1, target=1, epsilon=0.1)


def test_partial_hyperbolicity_passes_for_linear(linear_ph):
    estimate = verify_partial_hyperbolicity(linear_ph, horizon=1, grid=3)
    assert estimate.passed
    assert estimate.mu_minus == pytest.approx(1.0, abs=1e-9)
    assert estimate.lambda_minus == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-9)
    assert estimate.center_brackets_one
    assert estimate.to_dict()["center_brackets_one"] is True


def test_contracting_center_passes_without_bracketing_one(linear_anosov):
    estimate = verify_partial_hyperbolicity(linear_anosov, horizon=1, grid=3)
    assert estimate.passed
    assert estimate.mu_plus < 1.0
    assert not estimate.center_brackets_one


def test_small_shear_verifies_with_expansion_margin():
    estimate = verify_partial_hyperbolicity(builtin_map("da_ph", 0.05), horizon=5, grid=8)
    assert estimate.passed
    assert estimate.lambda_minus > 1.05
    assert estimate.nu_plus < estimate.mu_minus <= estimate.mu_plus < estimate.lambda_minus


def test_large_shear_fails_domination():
    with pytest.raises(VerificationFailed) as caught:
        verify_partial_hyperbolicity(builtin_map("da_anosov", 0.2), horizon=5, grid=16)
    sample = caught.value.sample
    assert sample["violations"]
    assert sample["estimate"]["passed"] is False
    assert len(sample["max_center_point"]) == 3


def test_longer_horizon_certifies_what_one_step_misses():
    spec = builtin_map("da_ph", 0.2)
    with pytest.raises(VerificationFailed):
        verify_partial_hyperbolicity(spec, horizon=1, grid=16)
    assert verify_partial_hyperbolicity(spec, horizon=5, grid=16).passed
