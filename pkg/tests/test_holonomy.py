"""Tests for unstable and center holonomies."""

import numpy as np
import pytest

from ph3lab.catalog import builtin_map
from ph3lab.exceptions import NoIntersection
from ph3lab.holonomy import (
    HolonomyReport,
    build_strip,
    center_holonomy,
    center_holonomy_report,
    holonomy_lipschitz_vs_delta,
    strip_report,
    unstable_holonomy,
    weighted_unstable_length,
)
from ph3lab.leaves import trace_center_leaf


BASE = np.array([0.21, 0.47, 0.33])
COARSE = {
    "leaves": {"center_spacing": 0.1, "frame_horizon": 30},
    "holonomy": {"spacing": 1e-2},
}
# Fine unstable tracing for curved leaves; the center leaves of da_ph are straight.
CURVED = {
    "leaves": {"center_spacing": 0.1, "frame_horizon": 30},
    "holonomy": {"spacing": 1e-3, "intersection_tolerance": 1e-5},
}


def test_linear_center_holonomy_is_isometric(linear_anosov):
    sample = center_holonomy(linear_anosov, BASE, 1.0, 0.5, config=COARSE)
    assert sample["du_xy"] == pytest.approx(1.0, abs=1e-2)
    assert sample["ratio"] == pytest.approx(1.0, abs=1e-6)


def test_unstable_holonomy_lands_on_the_target_leaf(linear_anosov):
    strip = build_strip(linear_anosov, BASE, 1.0, 1.0, config=COARSE)
    z = strip.center_x.vertices[strip.center_x.base_index + 20]
    hit = unstable_holonomy(linear_anosov, strip, z, config=COARSE)
    assert hit.residual <= 1e-6
    assert hit.length == pytest.approx(abs(strip.du), abs=1e-6)
    np.testing.assert_allclose(hit.point - z, strip.y - strip.x, atol=1e-6)


def test_short_search_reports_no_intersection(linear_anosov):
    config = dict(COARSE, holonomy={"spacing": 1e-2, "search_factor": 0.1, "search_margin": 0.0})
    strip = build_strip(linear_anosov, BASE, 1.0, 1.0, config=config)
    with pytest.raises(NoIntersection):
        unstable_holonomy(linear_anosov, strip, strip.x, config=config)


def test_report_two_sided_constant():
    report = HolonomyReport("center", [
        {"du_xy": 1.0, "t": 0.5, "ratio": 0.8, "length": 0.8},
        {"du_xy": 2.0, "t": 0.5, "ratio": 1.1, "length": 2.2},
    ])
    assert report.c_hat == pytest.approx(1.25)
    assert report.spread() == pytest.approx(1.375)
    assert set(report.to_dict()["scales"]) == {"1", "2"}


def test_lipschitz_comparison_needs_expanding_center(linear_anosov):
    with pytest.raises(ValueError):
        holonomy_lipschitz_vs_delta(linear_anosov, BASE, 0.1, 0.5)


def test_weighted_length_of_linear_center_leaf():
    spec = builtin_map("linear_anosov_inverse")
    leaf = trace_center_leaf(spec, BASE, R=0.2, spacing=0.1)
    result = weighted_unstable_length(spec, leaf, 0.0, 0.1)
    assert result["weighted"] == pytest.approx(result["arc"], rel=1e-9)
    with pytest.raises(ValueError):
        weighted_unstable_length(spec, leaf, 0.05, 0.0505)


def test_center_holonomy_of_shear_family_is_two_sided_bounded(da_ph):
    report = center_holonomy_report(da_ph, [BASE], [1.0, 2.0], [0.5, 1.0], config=CURVED)
    assert len(report.samples) == 4
    ratios = [s["ratio"] for s in report.samples]
    assert all(0.5 < r < 2.0 for r in ratios)
    assert report.c_hat < 2.0


def test_strip_lengths_of_shear_family_are_comparable(da_ph):
    strip = build_strip(da_ph, BASE, 1.0, 1.0, config=CURVED)
    report = strip_report(da_ph, strip, [-0.4, 0.0, 0.4], config=CURVED)
    lengths = [s["length"] for s in report.samples]
    assert min(lengths) > 0.5 * abs(strip.du)
    assert max(lengths) < 2.0 * abs(strip.du)
