"""Tests for the command-line surface and manifest validation."""

import json
import os

import numpy as np
import pytest
from pydantic import ValidationError

from cli import main as cli_main
from cli.models import ExperimentManifest
from ph3lab import experiments
from ph3lab.catalog import builtin_map
from ph3lab.experiments import ExperimentRunner
from ph3lab.specfile import dump_map_spec
from ph3lab.utils import load_config


SPECTRUM = "kind = spectrum\nmap = builtin:linear_ph\nn = 50\nseeds = 2\nburn_in = 60\n"


def _write(tmp_path, text, name="run.manifest"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _load(path):
    return json.loads(path.read_text())


def test_manifest_model_coerces_lists_and_forbids_extras():
    manifest = ExperimentManifest(map="builtin:da_ph", R="1, 5 25", epsilons="-0.1 0 0.1")
    assert manifest.R == [1.0, 5.0, 25.0]
    assert manifest.builtin == "da_ph"
    assert manifest.parameters() == {"R": [1.0, 5.0, 25.0], "epsilons": [-0.1, 0.0, 0.1]}
    with pytest.raises(ValidationError):
        ExperimentManifest(map="builtin:da_ph", colour="blue")
    with pytest.raises(ValidationError):
        ExperimentManifest(map="builtin:da_ph", epsilons="0.1 0.2")
    with pytest.raises(ValidationError):
        ExperimentManifest(map="builtin:da_ph", sigma="x")


def test_list_maps(capsys):
    assert cli_main.main(["list-maps"]) == 0
    listing = json.loads(capsys.readouterr().out)["maps"]
    names = [entry["name"] for entry in listing]
    assert "linear_ph" in names and "da_anosov" in names
    assert names == sorted(names)


def test_spectrum_run_writes_reproducible_report(tmp_path):
    manifest = _write(tmp_path, SPECTRUM)
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli_main.main(["spectrum", "--manifest", manifest, "--out", str(first)]) == 0
    assert cli_main.main(["spectrum", "--manifest", manifest, "--out", str(second)]) == 0
    one, two = _load(first / "spectrum.json"), _load(second / "spectrum.json")
    assert one.pop("generated_at") and two.pop("generated_at")
    assert one == two
    assert one["kind"] == "spectrum"
    assert one["parameters"] == {"n": 50, "seeds": 2, "burn_in": 60}
    assert one["map_spec"] == dump_map_spec(builtin_map("linear_ph"))
    assert (first / "spectrum_per_seed.csv").exists()


def test_map_spec_path_is_relative_to_manifest(tmp_path):
    (tmp_path / "demo.map").write_text(dump_map_spec(builtin_map("da_ph", 0.05)))
    manifest = _write(tmp_path, "map = demo.map\nn = 20\nseeds = 1\nburn_in = 5\n")
    assert cli_main.main(["spectrum", "--manifest", manifest, "--out", str(tmp_path / "out")]) == 0
    report = _load(tmp_path / "out" / "spectrum.json")
    assert report["map"]["shears"][0]["epsilon"] == 0.05


@pytest.mark.parametrize("text, needle", [
    ("kind = spectrum\nn = 10\n", "map"),
    ("map = builtin:linear_ph\ncolour = blue\n", "colour"),
    ("map = builtin:no_such_map\n", "map"),
    ("kind = rigidity\nmap = builtin:linear_ph\n", "kind"),
    ("map = builtin:linear_ph\nn = many\n", "n"),
])
def test_bad_manifests_exit_with_one(tmp_path, capsys, text, needle):
    manifest = _write(tmp_path, text)
    assert cli_main.main(["spectrum", "--manifest", manifest, "--out", str(tmp_path / "out")]) == 1
    assert needle in capsys.readouterr().err


def test_missing_manifest_argument(capsys):
    assert cli_main.main(["spectrum"]) == 1
    assert "--manifest" in capsys.readouterr().err


def test_unreadable_manifest(tmp_path):
    assert cli_main.main(["spectrum", "--manifest", str(tmp_path / "absent.manifest")]) == 1


def test_violation_exits_with_two(tmp_path, monkeypatch):
    linear = np.array(builtin_map("linear_ph").linearization().exponents)

    def shifted_spectra(torus_map, points, n, burn_in=None, jobs=1, config=None):
        per_seed = np.tile(linear + np.array([-0.5, 0.0, 0.5]), (len(points), 1))
        return per_seed, np.full_like(per_seed, 1e-4)

    monkeypatch.setattr(experiments, "seed_spectra", shifted_spectra)
    manifest = _write(tmp_path, "kind = rigidity\nmap = builtin:linear_ph\nn = 50\nseeds = 2\n")
    assert cli_main.main(["rigidity", "--manifest", manifest, "--out", str(tmp_path / "out")]) == 2
    report = _load(tmp_path / "out" / "rigidity.json")
    assert report["verdict"] == "violation"
    assert report["result"]["difference"][2] == pytest.approx(0.5)
    assert (tmp_path / "out" / "rigidity_per_seed.csv").exists()


def test_unverified_map_exits_with_one(tmp_path, capsys):
    manifest = _write(tmp_path, "kind = periodic\nmap = builtin:da_anosov\nepsilon = 0.2\nmax_period = 2\n")
    assert cli_main.main(["periodic", "--manifest", manifest, "--out", str(tmp_path / "out")]) == 1
    err = capsys.readouterr().err
    assert "VerificationFailed" in err
    assert "Rate inequalities" in err
    assert not (tmp_path / "out" / "periodic.json").exists()


def test_shipped_periodic_manifest_verifies():
    path = os.path.join(cli_main.ROOT, "manifests", "periodic_da_anosov.manifest")
    manifest = cli_main.load_manifest(path)
    torus_map, _ = cli_main.resolve_map(manifest, os.path.dirname(path))
    runner = ExperimentRunner(load_config())
    assert runner.require_partial_hyperbolicity(torus_map, manifest.parameters()).passed
