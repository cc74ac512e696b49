"""Report directory layout, manifests, and lossless reload."""

import dataclasses
import json
from pathlib import Path

import pytest

from strokelab.errors import ReportError
from strokelab.experiments import ExperimentConfig, run_comparison
from strokelab.neuralnet import NetworkSpec, TrainConfig
from strokelab.reports import (
    FIGURE_FILES,
    MANIFEST_JSON,
    REPORT_JSON,
    TIMING_JSON,
    emit_report,
    load_report,
    read_csv,
    read_json,
    reports_equal,
    sha256_file,
    write_csv,
    write_json,
)

DATA_FILES = (
    "report.json",
    "logistic_roc.csv", "dense_roc.csv", "conv_roc.csv",
    "logistic_confusion.csv", "dense_confusion.csv", "conv_confusion.csv",
    "dense_history.csv", "conv_history.csv",
    "importance.csv",
)


@pytest.fixture(scope="module")
def emitted(tiny_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("report_run")
    config = ExperimentConfig(
        data=str(tiny_csv),
        output_dir=str(out),
        dense_spec=NetworkSpec("dense", hidden_sizes=(8, 6, 4)),
        dense_train=TrainConfig(epochs=2),
        conv_spec=NetworkSpec("conv", conv_channels=(4, 8), dense_hidden=8,
                              batch_norm=False),
        conv_train=TrainConfig(epochs=2),
        bootstrap_iterations=25,
        figures=True,
    )
    report = run_comparison(config)
    return config, report, out


class TestPrimitives:
    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a", "b"), [[1, 2.5], ["x", -3]])
        header, rows = read_csv(path)
        assert header == ["a", "b"]
        assert rows == [["1", "2.5"], ["x", "-3"]]

    def test_csv_uses_newline_terminator(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a",), [[1], [2]])
        assert path.read_bytes() == b"a\n1\n2\n"

    def test_json_sorted_and_stable(self, tmp_path):
        path = tmp_path / "t.json"
        write_json(path, {"b": 1, "a": {"z": 2, "y": 3}})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")
        assert read_json(path) == {"b": 1, "a": {"z": 2, "y": 3}}

    def test_json_rejects_nan(self, tmp_path):
        with pytest.raises(ReportError, match="nan"):
            write_json(tmp_path / "t.json", {"x": float("nan")})

    def test_sha256_known_value(self, tmp_path):
        path = tmp_path / "t.bin"
        path.write_bytes(b"abc")
        assert sha256_file(path) == (
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")


class TestEmit:
    def test_all_data_files_present(self, emitted):
        _, _, out = emitted
        for name in DATA_FILES + (TIMING_JSON, MANIFEST_JSON):
            assert (out / name).exists(), name

    def test_all_figures_present(self, emitted):
        _, _, out = emitted
        for name in FIGURE_FILES:
            path = out / name
            assert path.exists(), name
            assert path.stat().st_size > 1000, name  # a real PNG, not a stub
            assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n", name

    def test_manifest_covers_data_files_only(self, emitted):
        _, _, out = emitted
        manifest = read_json(out / MANIFEST_JSON)
        listed = {entry["name"] for entry in manifest["files"]}
        assert listed == set(DATA_FILES)
        assert manifest["hash_algorithm"] == "sha256"
        figure_names = {entry["name"] for entry in manifest["figures"]}
        assert figure_names == set(FIGURE_FILES)

    def test_manifest_hashes_verify(self, emitted):
        _, _, out = emitted
        manifest = read_json(out / MANIFEST_JSON)
        for entry in manifest["files"] + manifest["figures"]:
            path = out / entry["name"]
            assert sha256_file(path) == entry["sha256"], entry["name"]
            assert path.stat().st_size == entry["bytes"], entry["name"]

    def test_report_json_has_no_timing(self, emitted):
        _, _, out = emitted
        payload = read_json(out / REPORT_JSON)
        assert "timing" not in json.dumps(payload)
        timing = read_json(out / TIMING_JSON)
        assert set(timing) == {"logistic", "dense", "conv", "total"}

    def test_history_csv_column_count(self, emitted):
        _, report, out = emitted
        header, rows = read_csv(out / "dense_history.csv")
        assert header[0] == "epoch"
        assert len(rows) == len(report.dense.history)
        assert all(len(row) == len(header) for row in rows)

    def test_importance_ranked_from_one(self, emitted):
        _, _, out = emitted
        header, rows = read_csv(out / "importance.csv")
        assert header == ["rank", "feature", "weight_magnitude"]
        assert [row[0] for row in rows] == [str(i) for i in range(1, 11)]
        magnitudes = [float(row[2]) for row in rows]
        assert magnitudes == sorted(magnitudes, reverse=True)


class TestReload:
    def test_load_report_round_trip(self, emitted):
        _, report, out = emitted
        loaded = load_report(out)
        assert reports_equal(report, loaded)

    def test_reports_equal_detects_difference(self, emitted):
        _, report, _ = emitted
        tweaked = dataclasses.replace(
            report,
            logistic=dataclasses.replace(
                report.logistic, wall_clock_seconds=report.logistic.wall_clock_seconds + 1.0))
        assert not reports_equal(report, tweaked)

    def test_re_emit_is_byte_identical(self, emitted, tmp_path):
        _, report, out = emitted
        again = tmp_path / "again"
        emit_report(report, again, figures=True)
        for name in DATA_FILES + FIGURE_FILES:
            assert (out / name).read_bytes() == (again / name).read_bytes(), name

    def test_load_missing_directory(self, tmp_path):
        with pytest.raises(ReportError):
            load_report(tmp_path / "never_written")


class TestErrors:
    def test_unwritable_directory(self, emitted, tmp_path):
        _, report, _ = emitted
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        with pytest.raises(ReportError):
            emit_report(report, blocker / "out", figures=False)
