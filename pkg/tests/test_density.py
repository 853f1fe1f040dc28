"""Tests for Jacobian-ratio densities, foliated boxes and U.B.D. constants."""

import math

import numpy as np
import pytest

from ph3lab.catalog import builtin_map
from ph3lab.cocycle import unstable_frames
from ph3lab.density import (
    FoliatedBox,
    build_foliated_box,
    compare_disintegration,
    delta,
    delta_many,
    density_profile,
    empirical_disintegration,
    ubd_constant,
)
from ph3lab.exceptions import NotOnLeaf
from ph3lab.leaves import trace_strong_leaf
from ph3lab.utils import wrap_torus


BASE = np.array([0.21, 0.47, 0.33])


@pytest.fixture
def da_leaf(da_ph):
    return trace_strong_leaf(da_ph, "u", BASE, R=0.3)


def _vertex_at(leaf, s):
    return leaf.vertices[int(np.argmin(np.abs(leaf.arc - s)))]


def _log_unstable_jacobian(spec, point):
    e_u = unstable_frames(spec, wrap_torus(point)[None, :], 40)[0, :, 0]
    return math.log(np.linalg.norm(spec.jacobian(point) @ e_u))


def test_linear_delta_is_one(linear_anosov):
    leaf = trace_strong_leaf(linear_anosov, "u", BASE, R=0.5)
    logs, depth, tail = delta_many(linear_anosov, "u", BASE, leaf.vertices[::50])
    np.testing.assert_allclose(logs, 0.0, atol=1e-12)
    assert tail == 0.0
    assert depth >= 4


def test_point_off_the_leaf_is_rejected(linear_anosov):
    with pytest.raises(NotOnLeaf):
        delta(linear_anosov, "u", BASE, BASE + np.array([0.0, 0.0, 0.01]))


def test_zero_exponent_direction_is_rejected(linear_ph):
    with pytest.raises(ValueError):
        delta(linear_ph, "c", BASE, BASE + np.array([0.0, 0.0, 0.01]))


def test_delta_chain_rule_and_inversion(da_ph, da_leaf):
    y, z = _vertex_at(da_leaf, 0.1), _vertex_at(da_leaf, 0.2)
    xy = delta(da_ph, "u", BASE, y).log_value
    yz = delta(da_ph, "u", y, z).log_value
    xz = delta(da_ph, "u", BASE, z).log_value
    assert xz == pytest.approx(xy + yz, abs=1e-6)
    assert delta(da_ph, "u", y, BASE).log_value == pytest.approx(-xy, abs=1e-6)
    assert abs(xz) > 1e-4


def test_delta_transforms_with_the_unstable_jacobian(da_ph, da_leaf):
    y = _vertex_at(da_leaf, 0.05)
    before = delta(da_ph, "u", BASE, y).log_value
    after = delta(da_ph, "u", da_ph.evaluate(BASE, "cover"), da_ph.evaluate(y, "cover")).log_value
    jump = _log_unstable_jacobian(da_ph, BASE) - _log_unstable_jacobian(da_ph, y)
    assert after - before == pytest.approx(jump, abs=1e-6)


def test_fixed_depth_truncation_converges(da_ph, da_leaf):
    y = _vertex_at(da_leaf, 0.15)
    shallow = delta(da_ph, "u", BASE, y, depth=30)
    deep = delta(da_ph, "u", BASE, y, depth=35)
    assert shallow.depth == 30
    assert abs(shallow.log_value - deep.log_value) < 1e-8


def test_density_profile_is_normalized(da_ph, da_leaf):
    profile = density_profile(da_ph, "u", da_leaf)
    assert profile.integral() == pytest.approx(1.0, abs=1e-12)
    assert profile.log_delta[da_leaf.base_index] == 0.0
    assert np.all(profile.rho > 0.0)
    ratio = profile.lebesgue_ratio()
    assert ratio.min() < 1.0 < ratio.max()
    assert list(profile.to_frame().columns) == ["arc_length", "delta", "rho"]


def test_density_profile_of_linear_leaf_is_flat(linear_anosov):
    leaf = trace_strong_leaf(linear_anosov, "s", BASE, R=0.4)
    profile = density_profile(linear_anosov, "s", leaf)
    np.testing.assert_allclose(profile.lebesgue_ratio(), 1.0, atol=1e-9)


def test_ubd_constant_of_linear_map_is_bounded(linear_ph):
    report = ubd_constant(linear_ph, "u", [0.5, 1.0], mode="analytic", centers=1, seed=3)
    np.testing.assert_allclose(report.constants, 1.0, atol=1e-9)
    assert report.verdict == "bounded"
    assert report.to_dict()["R"] == [0.5, 1.0]
    with pytest.raises(ValueError):
        ubd_constant(linear_ph, "c", [0.5], mode="analytic")


def test_empirical_disintegration_of_linear_box(linear_anosov):
    box = build_foliated_box(
        linear_anosov, "u", BASE, R=0.2, disk_radius=0.02, plaque_count=9, spacing=0.002, margin=0.04,
    )
    assert len(box.plaques) == 9
    assert box.interior() == [4]
    result = empirical_disintegration(box, samples=200000, bins=4, seed=11)
    assert result.counts.shape == (1, 4)
    np.testing.assert_allclose(result.density, 1.0 / 0.2, rtol=0.2)
    compare_disintegration(linear_anosov, box, result)
    np.testing.assert_allclose(result.analytic, 1.0 / 0.2, rtol=1e-6)
    assert max(result.l1_distances()) < 0.2


def test_disintegration_needs_enough_samples(linear_anosov):
    box = build_foliated_box(
        linear_anosov, "u", BASE, R=0.2, disk_radius=0.02, plaque_count=9, spacing=0.002, margin=0.04,
    )
    with pytest.raises(ValueError):
        empirical_disintegration(box, samples=5000, bins=4, seed=11)
    lowered = {"density": {"min_samples": 1000}}
    result = empirical_disintegration(box, samples=5000, bins=4, seed=11, config=lowered)
    assert result.counts.shape[1] == 4


def test_ubd_constant_grows_for_shear_family():
    report = ubd_constant(builtin_map("da_ph", 0.2), "u", [0.5, 4.0], mode="analytic", centers=1, seed=3)
    assert report.constants[1] > report.constants[0]
    assert report.slope > 0.05
    assert report.verdict == "growing"


def test_center_boxes_have_no_analytic_density(linear_anosov):
    box = FoliatedBox("c", BASE, 1.0, 0.02, 1, (), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        compare_disintegration(linear_anosov, box, None)
