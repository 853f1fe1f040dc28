"""Shared fixtures for the ph3lab test suite."""

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from ph3lab.catalog import builtin_map  # noqa: E402


@pytest.fixture
def linear_ph():
    return builtin_map("linear_ph")


@pytest.fixture
def linear_anosov():
    return builtin_map("linear_anosov")


@pytest.fixture
def skew_ph():
    return builtin_map("skew_ph")


@pytest.fixture
def da_ph():
    return builtin_map("da_ph")


@pytest.fixture
def conjugate_anosov():
    return builtin_map("conjugate_anosov")


@pytest.fixture
def fast_config():
    """Settings small enough for unit tests."""
    return {
        "cocycle": {"burn_in": 20, "stderr_blocks": 5},
        "experiments": {
            "exceedance": False,
            "closure_leaves": 1,
            "seeds": 2,
            "n": 200,
        },
        "periodic": {"seed_grid": 3},
    }
