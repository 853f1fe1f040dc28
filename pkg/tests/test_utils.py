"""Tests for the shared helpers in ph3lab.utils."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from ph3lab.exceptions import StorageError
from ph3lab.utils import (
    CONFIG_SECTIONS,
    ReportStore,
    derive_seed,
    dumps_report,
    load_config,
    parallel_map,
    resolve_jobs,
    section,
    torus_displacement,
    torus_distance,
    wrap_torus,
)


def _square(x):
    return x * x


def test_wrap_torus_stays_in_unit_cube():
    wrapped = wrap_torus(np.array([[-1e-20, 1.0, 2.25]]))
    assert np.all(wrapped >= 0.0) and np.all(wrapped < 1.0)
    assert wrapped[0, 2] == pytest.approx(0.25)


def test_torus_distance_uses_nearest_translate():
    x = np.array([0.95, 0.5, 0.5])
    y = np.array([0.05, 0.5, 0.5])
    assert torus_distance(x, y) == pytest.approx(0.1)
    np.testing.assert_allclose(torus_displacement(x, y), [0.1, 0.0, 0.0], atol=1e-12)


def test_derive_seed_is_master_plus_index():
    assert derive_seed(7, 3) == 10
    assert derive_seed(2 ** 64 - 1, 1) == 0


def test_parallel_map_keeps_order():
    assert parallel_map(_square, [3, 1, 2], jobs=1) == [9, 1, 4]
    assert parallel_map(_square, [3, 1, 2], jobs=2) == [9, 1, 4]


def test_resolve_jobs_reads_environment(monkeypatch):
    monkeypatch.setenv("PH3LAB_JOBS", "3")
    assert resolve_jobs() == 3
    assert resolve_jobs(5) == 5
    monkeypatch.setenv("PH3LAB_JOBS", "many")
    assert resolve_jobs() == 1


def test_load_config_missing_file_gives_empty(tmp_path):
    assert load_config(str(tmp_path / "absent.json")) == {}
    assert section(None, "cocycle") == {}


def test_load_config_keeps_only_lab_sections(tmp_path, caplog):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({
        "cocycle": {"burn_in": 5},
        "periodic": {"seed_grid": 2},
        "plots": {"dpi": 150},
        "density": 3,
    }))
    config = load_config(str(path))
    assert config == {"cocycle": {"burn_in": 5}, "periodic": {"seed_grid": 2}}
    assert "[plots]" in caplog.text
    assert "[density]" in caplog.text


def test_default_settings_cover_every_section():
    config = load_config()
    assert set(config) == set(CONFIG_SECTIONS)
    assert config["experiments"]["ph_horizon"] == 5
    assert config["density"]["min_samples"] == 10000


def test_dumps_report_is_sorted_and_plain():
    text = dumps_report({"b": np.float64(1.5), "a": np.arange(2)})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [0, 1], "b": 1.5}


def test_report_store_writes_and_refuses_escape(tmp_path):
    store = ReportStore(str(tmp_path / "out"))
    store.write_json("report.json", {"value": 1})
    store.write_csv("table.csv", pd.DataFrame({"x": [0.1, 0.2]}))
    assert store.list_files() == ["report.json", "table.csv"]
    with pytest.raises(StorageError):
        store.write_json("../escape.json", {})


def test_every_requirement_is_imported():
    root = Path(__file__).resolve().parent.parent
    modules = {"python-dotenv": "dotenv"}
    pinned = [
        line.split("==")[0].strip()
        for line in (root / "requirements.txt").read_text().splitlines()
        if line.strip() and not line.startswith("#")
    ]
    sources = "\n".join(
        p.read_text() for folder in ("ph3lab", "cli", "tests") for p in (root / folder).rglob("*.py")
    )
    for name in pinned:
        module = modules.get(name, name)
        assert f"import {module}" in sources or f"from {module}" in sources, name
