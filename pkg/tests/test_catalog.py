"""Tests for the built-in map corpus."""

import pytest

from ph3lab.catalog import CATALOG, builtin_map, builtin_names
from ph3lab.specfile import dump_map_spec, map_spec_from_sections, parse_sections


def test_catalog_covers_each_family():
    names = builtin_names()
    assert len(names) >= 6
    for expected in ("linear_ph", "linear_anosov", "skew_ph", "da_ph", "conjugate_anosov"):
        assert expected in names


def test_zero_epsilon_gives_linear_map():
    for name in builtin_names():
        assert builtin_map(name, 0.0).is_linear


def test_default_epsilon_is_applied():
    spec = builtin_map("da_ph")
    assert [g.epsilon for g in spec.pre_shears] == [0.1, 0.1]
    assert CATALOG["da_ph"].build(0.3).pre_shears[0].epsilon == 0.3


def test_unknown_name_raises():
    with pytest.raises(KeyError):
        builtin_map("no_such_map")


@pytest.mark.parametrize("name", ["da_ph", "conjugate_anosov", "skew_ph"])
def test_dump_then_parse_recovers_spec(name):
    spec = builtin_map(name, 0.137)
    parsed = map_spec_from_sections(parse_sections(dump_map_spec(spec)))
    assert parsed == spec


def test_every_entry_has_a_ph_linearization():
    for name in builtin_names():
        data = builtin_map(name).linearization()
        assert data.moduli[0] < 1.0 < data.moduli[2]
