"""End-to-end smoke tests for the Python bindings."""

import json
import math

import pytest

import w2fair


def test_version_string():
    major, minor, patch = w2fair.__version__.split(".")
    assert all(part.isdigit() for part in (major, minor, patch))


def test_distance_of_identical_samples_is_zero():
    samples = [0.1, 0.4, 0.4, 0.9]
    assert w2fair.w2_distance(samples, samples, 40) == 0.0


def test_distance_matches_sorted_matching():
    a = [0.0, 0.5, 1.0, 0.25]
    b = [0.25, 0.75, 0.5, 1.0]
    exact = sum(
        (x - y) ** 2 for x, y in zip(sorted(a), sorted(b))
    ) / len(a)
    got = w2fair.w2_distance(a, b, 10 * len(a))
    assert math.isclose(got, exact, abs_tol=1e-9)


def test_distance_translation_identity():
    a = [0.1, 0.2, 0.3, 0.4]
    shifted = [x + 0.25 for x in a]
    got = w2fair.w2_distance(a, shifted, 4000)
    assert math.isclose(got, 0.25**2, rel_tol=1e-6)


def test_grid_and_cdf_round_trip():
    grid = w2fair.build_grid([0.0, 1.0], 4)
    assert grid.steps == 4
    assert math.isclose(grid.delta, 0.25)
    cdf = w2fair.empirical_cdf([0.1, 0.2, 0.2, 0.9], grid)
    assert cdf.values[-1] == 1.0
    assert w2fair.cdf_value_at(cdf, 0.2) == 0.75
    assert w2fair.inverse_cdf(cdf, 1.0) == grid.point(4)
    with pytest.raises(Exception):
        w2fair.inverse_cdf(cdf, 1.5)


def test_pseudo_grad_signs():
    low = [0.2 + 0.01 * i for i in range(20)]
    high = [0.6 + 0.01 * i for i in range(20)]
    cdfs = w2fair.group_cdfs(low, high, 40)
    assert w2fair.pseudo_grad(0.25, 0, cdfs, 0.025) < 0.0
    assert w2fair.pseudo_grad(0.75, 1, cdfs, 0.025) > 0.0


def test_audit_json_perfect_predictor():
    labels = [1, 1, 2, 2, 1, 2]
    groups = [0, 1, 0, 1, 1, 0]
    report = json.loads(w2fair.audit_json(labels, labels, groups, 2))
    assert report["accuracy"] == 1.0
    assert report["tpr_gap"] == [0.0, 0.0]


def test_cli_round_trip(tmp_path):
    data = str(tmp_path / "data.csv")
    code, out, err = w2fair.run_cli(
        [
            "generate", "--out", data, "--classes", "2", "--features", "3",
            "--count0", "30", "--count1", "30", "--seed", "8",
        ]
    )
    assert code == 0, err
    assert "examples=120" in out

    run_dir = str(tmp_path / "run")
    code, out, err = w2fair.run_cli(
        [
            "train", "--data", data, "--out", run_dir, "--seed", "8",
            "--epochs", "2", "--hidden", "8", "--min-support", "1",
        ]
    )
    assert code == 0, err
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["format"] == "w2fair-run"
    assert manifest["seed"] == 8

    code, out, err = w2fair.run_cli(
        ["report", run_dir, "--out", str(tmp_path / "export")]
    )
    assert code == 0, err
    scores = (tmp_path / "export" / "scores.csv").read_text()
    assert scores.startswith("# run=")


def test_cli_error_codes():
    code, _, err = w2fair.run_cli(["train", "--data", "/nonexistent.csv"])
    assert code == 4
    assert err.startswith("error: data:")
    code, _, _ = w2fair.run_cli(["no-such-command"])
    assert code == 2
