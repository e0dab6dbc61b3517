import json

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from demix.core.config import settings
from demix.main import app
from demix.utils.file_utils import read_matrix, write_cube, write_matrix

runner = CliRunner()


def _invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


def _error(result):
    start = result.stderr.index('{\n  "success"')
    document, _ = json.JSONDecoder().raw_decode(result.stderr[start:])
    return document


@pytest.fixture
def instance(tmp_path):
    result = _invoke(
        "synth", "--n", 20, "--m", 20, "--d", 5, "--r", 1, "--s", 10, "--seed", 3,
        "--out", tmp_path / "inst",
    )
    assert result.exit_code == 0, result.output
    return tmp_path / "inst"


def test_synth_writes_instance(instance):
    for name in ("M.dmx", "D.dmx", "L.dmx", "S.dmx"):
        assert (instance / name).is_file()
    summary = json.loads((instance / "summary.json").read_text())
    assert summary["success"] is True
    assert summary["run_id"].startswith("run_")
    assert (summary["n"], summary["r"], summary["s"]) == (20, 1, 10)
    assert np.count_nonzero(read_matrix(instance / "S.dmx")) == 10


def test_seeded_synth_is_byte_identical(tmp_path):
    args = ("synth", "--n", 12, "--m", 10, "--d", 4, "--r", 2, "--s", 6, "--seed", 5)
    for name in ("a", "b"):
        assert _invoke(*args, "--out", tmp_path / name).exit_code == 0

    for name in ("M.dmx", "D.dmx", "L.dmx", "S.dmx", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert "timestamp" not in summary

    other = _invoke(*args[:-1], 6, "--out", tmp_path / "c")
    assert other.exit_code == 0
    assert json.loads((tmp_path / "c" / "summary.json").read_text())["run_id"] != summary["run_id"]


def test_synth_column_mode_lists_outliers(tmp_path):
    result = _invoke(
        "synth", "--mode", "column", "--n", 10, "--m", 12, "--d", 4, "--r", 2, "--s", 3,
        "--out", tmp_path,
    )
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["outlier_columns"] == [9, 10, 11]


def test_demix_single_lambda(instance, tmp_path):
    out = tmp_path / "run"
    result = _invoke(
        "demix", "--data", instance / "M.dmx", "--dict", instance / "D.dmx",
        "--lambda", 0.1, "--max-iters", 300, "--out", out,
    )
    assert result.exit_code == 0, result.output
    assert read_matrix(out / "L.dmx").shape == (20, 20)
    assert read_matrix(out / "S.dmx").shape == (5, 20)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["lambda"] == 0.1
    assert summary["iterations"] == len(pd.read_csv(out / "trace.csv"))


def test_demix_zero_matrix(tmp_path):
    write_matrix(tmp_path / "M.csv", np.zeros((4, 5)))
    write_matrix(tmp_path / "D.csv", np.eye(4)[:, :2])
    result = _invoke(
        "demix", "--data", tmp_path / "M.csv", "--dict", tmp_path / "D.csv",
        "--lambda", 0.5, "--out", tmp_path / "run",
    )
    assert result.exit_code == 0, result.output
    assert not np.any(read_matrix(tmp_path / "run" / "L.dmx"))
    assert not np.any(read_matrix(tmp_path / "run" / "S.dmx"))
    assert len(pd.read_csv(tmp_path / "run" / "trace.csv")) == 1


def test_demix_lambda_grid(instance, tmp_path):
    out = tmp_path / "grid"
    result = _invoke(
        "demix", "--data", instance / "M.dmx", "--dict", instance / "D.dmx",
        "--lambda-grid", 3, "--max-iters", 100, "--out", out,
    )
    assert result.exit_code == 0, result.output
    grid = pd.read_csv(out / "grid.csv")
    assert grid["index"].tolist() == [0, 1, 2]
    assert grid["lambda"].is_monotonic_increasing
    assert (out / "lambda_002" / "L.dmx").is_file()


def test_demix_needs_exactly_one_lambda_option(instance, tmp_path):
    result = _invoke(
        "demix", "--data", instance / "M.dmx", "--dict", instance / "D.dmx",
        "--lambda", 0.1, "--lambda-grid", 3, "--out", tmp_path / "run",
    )
    assert result.exit_code == 2
    assert _error(result)["error"] == "InputError"


def test_demix_missing_file(tmp_path):
    result = _invoke(
        "demix", "--data", tmp_path / "absent.dmx", "--dict", tmp_path / "absent.dmx",
        "--lambda", 0.1, "--out", tmp_path / "run",
    )
    assert result.exit_code == 2
    assert "not found" in _error(result)["message"]


def test_demix_dimension_mismatch(tmp_path):
    write_matrix(tmp_path / "M.dmx", np.ones((4, 5)))
    write_matrix(tmp_path / "D.dmx", np.eye(5))
    result = _invoke(
        "demix", "--data", tmp_path / "M.dmx", "--dict", tmp_path / "D.dmx",
        "--lambda", 0.1, "--out", tmp_path / "run",
    )
    assert result.exit_code == 2


def test_phase_single_cell(tmp_path):
    out = tmp_path / "phase.csv"
    result = _invoke(
        "phase", "--n", 8, "--m", 8, "--d", 3, "--r-grid", "1", "--s-grid", "2",
        "--trials", 1, "--lambdas", 2, "--max-iters", 50, "--out", out,
    )
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert len(frame) == 1
    assert (frame.loc[0, "r"], frame.loc[0, "s"], frame.loc[0, "trials"]) == (1, 2, 1)


def test_phase_rejects_unknown_method(tmp_path):
    result = _invoke(
        "phase", "--n", 8, "--m", 8, "--d", 3, "--r-grid", "1", "--s-grid", "2",
        "--method", "svd", "--out", tmp_path / "phase.csv",
    )
    assert result.exit_code == 2


def _write_instance(directory, low_rank, sparse, dictionary):
    write_matrix(directory / "L.dmx", low_rank)
    write_matrix(directory / "S.dmx", sparse)
    write_matrix(directory / "D.dmx", dictionary)


def test_diagnose_with_certificate(tmp_path, feasible_instance):
    _write_instance(tmp_path, *feasible_instance)
    result = _invoke(
        "diagnose", "--dict", tmp_path / "D.dmx", "--coeff", tmp_path / "S.dmx",
        "--low-rank", tmp_path / "L.dmx", "--certificate", "--out", tmp_path / "diag",
    )
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "diag" / "report.json").read_text())
    assert report["feasible"] is True
    assert report["incoherence"]["mu"] == pytest.approx(1.0 / np.sqrt(6.0), abs=1e-8)
    assert report["certificate"]["conditions_hold"] is True


def test_diagnose_size_limit(tmp_path, feasible_instance, monkeypatch):
    monkeypatch.setattr(settings, "CERTIFICATE_MAX_SIZE", 10)
    _write_instance(tmp_path, *feasible_instance)
    result = _invoke(
        "diagnose", "--dict", tmp_path / "D.dmx", "--coeff", tmp_path / "S.dmx",
        "--low-rank", tmp_path / "L.dmx", "--certificate", "--out", tmp_path / "diag",
    )
    assert result.exit_code == 2


def test_diagnose_degenerate_geometry(tmp_path, unidentifiable_instance):
    _write_instance(tmp_path, *unidentifiable_instance)
    result = _invoke(
        "diagnose", "--dict", tmp_path / "D.dmx", "--coeff", tmp_path / "S.dmx",
        "--low-rank", tmp_path / "L.dmx", "--certificate", "--lambda", 0.1,
        "--out", tmp_path / "diag",
    )
    assert result.exit_code == 3
    assert _error(result)["error"] == "DegenerateGeometryError"


@pytest.fixture
def scene(tmp_path, separable_cube):
    cube = write_cube(tmp_path / "scene.json", separable_cube)
    labels = write_matrix(tmp_path / "labels.csv", separable_cube.labels)
    return cube, labels


def test_localize(tmp_path, scene):
    cube, labels = scene
    out = tmp_path / "loc"
    result = _invoke(
        "localize", "--cube", cube, "--labels", labels, "--class", 1, "--d", 2,
        "--lambda-count", 3, "--max-iters", 200, "--out", out,
    )
    assert result.exit_code == 0, result.output
    assert read_matrix(out / "scoremap.csv").shape == (6, 5)
    assert len(pd.read_csv(out / "lambdas.csv")) == 3
    assert (out / "roc.csv").is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert 0.0 <= summary["auc"] <= 1.0


def test_localize_unknown_class(tmp_path, scene):
    cube, labels = scene
    result = _invoke(
        "localize", "--cube", cube, "--labels", labels, "--class", 7, "--d", 2,
        "--out", tmp_path / "loc",
    )
    assert result.exit_code == 2


def test_localize_compare(tmp_path, scene):
    cube, labels = scene
    out = tmp_path / "loc"
    result = _invoke(
        "localize", "--cube", cube, "--labels", labels, "--class", 1, "--d", 2,
        "--lambda-count", 3, "--max-iters", 200, "--compare", "--out", out,
    )
    assert result.exit_code == 0, result.output
    comparison = pd.read_csv(out / "comparison.csv")
    assert comparison["method"].tolist() == ["D-RPCA(E)", "RPCA-pinv", "MF", "MF-pinv"]
