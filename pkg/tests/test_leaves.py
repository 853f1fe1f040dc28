"""Tests for strong and center leaf tracing."""

import numpy as np
import pytest

from ph3lab.exceptions import HorizonTooSmall, InsufficientScale
from ph3lab.leaves import (
    asymptotic_direction,
    closure_return,
    large_scale_comparability,
    quasi_isometry_constant,
    trace_center_leaf,
    trace_strong_leaf,
)


BASE = np.array([0.21, 0.47, 0.33])


def _distance_to_line(points, origin, direction):
    offsets = points - origin
    along = offsets @ direction
    return np.linalg.norm(offsets - along[:, None] * direction, axis=1)


@pytest.mark.parametrize("sigma", ["u", "s"])
def test_linear_strong_leaf_is_a_straight_line(linear_anosov, sigma):
    leaf = trace_strong_leaf(linear_anosov, sigma, BASE, R=1.0)
    assert leaf.reach[0] >= 1.0 and leaf.reach[1] >= 1.0
    np.testing.assert_allclose(leaf.vertices[leaf.base_index], BASE, atol=1e-8)
    assert leaf.arc[leaf.base_index] == 0.0
    assert np.all(np.diff(leaf.arc) > 0.0)
    direction = linear_anosov.linearization().direction(sigma)
    assert _distance_to_line(leaf.vertices, BASE, direction).max() < 1e-8
    assert np.diff(leaf.arc).max() <= leaf.spacing + 1e-12


def test_perturbed_leaf_passes_tangency_check(da_ph):
    leaf = trace_strong_leaf(da_ph, "u", BASE, R=0.5)
    assert leaf.tangency_defect < 1e-2
    assert leaf.to_frame().columns.tolist() == ["arc_length", "x1", "x2", "x3"]


def test_short_horizon_is_reported(linear_ph):
    with pytest.raises(HorizonTooSmall):
        trace_strong_leaf(linear_ph, "u", BASE, R=1.0, horizon=1)
    with pytest.raises(ValueError):
        trace_strong_leaf(linear_ph, "c", BASE, R=1.0)


def test_linear_leaf_is_isometric(linear_ph):
    leaf = trace_strong_leaf(linear_ph, "u", BASE, R=1.0)
    report = quasi_isometry_constant(leaf, r_min=0.1, samples=2000)
    assert report.max_ratio == pytest.approx(1.0, abs=1e-9)
    assert report.pairs > 0
    assert np.all(report.samples[:, 0] >= report.samples[:, 1] - 1e-12)


def test_asymptotic_direction_of_linear_leaf(linear_ph):
    leaf = trace_strong_leaf(linear_ph, "u", BASE, R=1.0)
    rows = asymptotic_direction(leaf, [0.25, 0.5])
    assert len(rows) == 4
    assert max(row["angle"] for row in rows) < 1e-6


def test_large_scale_comparability_of_linear_leaf(linear_ph):
    leaf = trace_strong_leaf(linear_ph, "u", BASE, R=1.0)
    result = large_scale_comparability(linear_ph, leaf, k=3, min_distance=0.2, samples=500)
    assert result["dynamic_ratio"][0] == pytest.approx(1.0, abs=1e-8)
    assert result["growth_ratio"][1] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("name", ["linear_ph", "skew_ph"])
def test_center_leaves_close_up(name, request):
    spec = request.getfixturevalue(name)
    leaf = trace_center_leaf(spec, BASE, R=1.1)
    hit = closure_return(leaf, min_arc=0.5)
    assert hit["distance"] < 1e-6
    assert abs(hit["arc"]) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(InsufficientScale):
        closure_return(leaf, min_arc=5.0)
