"""Tests for periodic-point search and periodic data."""

from types import SimpleNamespace

import numpy as np
import pytest

from ph3lab.catalog import builtin_map
from ph3lab.exceptions import ComplexPair, DegenerateJacobian
from ph3lab.periodic import (
    PeriodicOrbit,
    _shifted_matrix,
    find_periodic_points,
    integer_kernel,
    linear_periodic_points,
    periodic_data,
    periodic_data_constancy,
)
from ph3lab.torus_maps import IntegerMatrix3, TorusMapSpec


SMALL = {"periodic": {"seed_grid": 3, "trace_circles": False}}


def test_linear_points_of_anosov_matrix(linear_anosov):
    fixed = linear_periodic_points(linear_anosov, 1)
    np.testing.assert_array_equal(fixed, [[0.0, 0.0, 0.0]])
    period_two = linear_periodic_points(linear_anosov, 2)
    assert period_two.shape == (13, 3)
    images = period_two @ linear_anosov.linear_part.power(2).array.T - period_two
    np.testing.assert_allclose(images, np.round(images), atol=1e-9)


def test_linear_points_refuse_singular_and_huge(linear_ph, linear_anosov):
    with pytest.raises(DegenerateJacobian):
        linear_periodic_points(linear_ph, 1)
    with pytest.raises(ValueError):
        linear_periodic_points(linear_anosov, 8, max_points=100)


def test_search_on_linear_anosov(linear_anosov):
    search = find_periodic_points(linear_anosov, 2, config=SMALL)
    assert search.expected_count == 13
    assert search.point_count == 13
    assert len(search.orbits) == 7
    assert sorted(o.minimal_period for o in search.orbits) == [1, 2, 2, 2, 2, 2, 2]
    assert search.linear_check is True
    assert search.to_dict()["continuum"] is None


def test_conjugate_fixed_point_moves_with_the_conjugator(conjugate_anosov):
    search = find_periodic_points(conjugate_anosov, 1, config=SMALL)
    assert len(search.orbits) == 1
    orbit = search.orbits[0]
    np.testing.assert_allclose(orbit.point, [0.0, 0.0, 0.1], atol=1e-9)
    assert orbit.residual <= 1e-10
    exponents = periodic_data(conjugate_anosov, orbit)
    np.testing.assert_allclose(exponents, conjugate_anosov.linearization().exponents, atol=1e-9)


def test_singular_shift_gives_circles(linear_ph):
    assert integer_kernel(_shifted_matrix(linear_ph, 1)) == (0, 0, 1)
    search = find_periodic_points(linear_ph, 1, config=SMALL)
    assert search.continuum is not None
    assert search.continuum.circle_length == pytest.approx(1.0)
    assert len(search.continuum.base_points) == 1
    base = search.continuum.base_points[0]
    np.testing.assert_allclose(np.minimum(base[:2], 1.0 - base[:2]), 0.0, atol=1e-9)


def test_periodic_data_is_constant_for_conjugate(conjugate_anosov):
    report = periodic_data_constancy(conjugate_anosov, 2, config=SMALL)
    assert report.counts[1] == {"found": 1, "expected": 1}
    assert report.counts[2] == {"found": 13, "expected": 13}
    assert len(report.orbits) == 7
    assert max(report.spread) < 1e-8
    assert max(report.deviation) < 1e-8
    assert report.zero_sum_defect < 1e-10
    assert report.verdict == {"s": "constant", "c": "constant", "u": "constant"}
    payload = report.to_dict()
    assert payload["complex_pairs"] == 0
    assert len(payload["orbits"]) == 7


def test_periodic_data_varies_for_shear_family():
    report = periodic_data_constancy(builtin_map("da_anosov", 0.05), 2, 1e-3, config=SMALL)
    assert report.counts[1] == {"found": 1, "expected": 1}
    assert len(report.orbits) >= 2
    assert report.spread[2] > 1e-3
    assert report.verdict["u"] == "non-constant"


def test_rotation_block_has_complex_pair():
    rotation = TorusMapSpec(IntegerMatrix3(((0, -1, 0), (1, 0, 0), (0, 0, 1))), name="rotation")
    orbit = PeriodicOrbit(np.zeros(3), 1, 1, (0, 0, 0), 0.0)
    frames = SimpleNamespace(e_s=np.eye(3)[0], e_c=np.eye(3)[1], e_u=np.eye(3)[2])
    with pytest.raises(ComplexPair):
        periodic_data(rotation, orbit, frames=frames)


def test_period_must_be_positive(linear_anosov):
    with pytest.raises(ValueError):
        find_periodic_points(linear_anosov, 0)
