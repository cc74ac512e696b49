"""Report emission: delimited files, JSON, rendered figures, and a manifest.

Everything written here is deterministic for a fixed config and dataset;
wall-clock timing goes to timing.json, which the manifest deliberately
excludes, so every hashed artifact is byte-identical across reruns.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ReportError
from .experiments import ComparisonReport, ExperimentConfig, ModelResult
from .data_pipeline import ClassWeights
from .metrics import (
    ConfidenceInterval,
    ConfusionMatrix,
    EvalReport,
    RocCurve,
    SummaryMetrics,
)
from .neuralnet import TrainingHistory

REPORT_JSON = "report.json"
TIMING_JSON = "timing.json"
MANIFEST_JSON = "manifest.json"

FIGURE_FILES = (
    "roc_curves.png",
    "history_dense.png",
    "history_conv.png",
    "confusion_logistic.png",
    "confusion_dense.png",
    "confusion_conv.png",
    "feature_importance.png",
)


def _cell(value) -> str:
    # str() on floats is the shortest round-tripping form in Python 3.
    return str(value)


def write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from None


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            return header, list(reader)
    except (OSError, StopIteration) as exc:
        raise ReportError(f"cannot read {path}: {exc}") from None


def write_json(path: Path, payload: dict) -> None:
    try:
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ReportError(f"cannot serialize {path}: {exc}") from None


def read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read {path}: {exc}") from None


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _roc_rows(curve: RocCurve):
    return zip(curve.thresholds.tolist(), curve.fpr.tolist(), curve.tpr.tolist())


def emit_report(report: ComparisonReport, directory: str | Path, figures: bool = True) -> dict:
    """Write every report artifact into `directory`; returns the manifest."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except (OSError, FileExistsError) as exc:
        raise ReportError(f"cannot create report directory {directory}: {exc}") from None
    if not directory.is_dir():
        raise ReportError(f"report path {directory} is not a directory")

    write_json(directory / REPORT_JSON, report.to_dict())
    data_files = [REPORT_JSON]

    for name, result in report.models().items():
        roc_name = f"{name}_roc.csv"
        write_csv(directory / roc_name, ("threshold", "fpr", "tpr"),
                  _roc_rows(result.evaluation.roc))
        data_files.append(roc_name)

        confusion_name = f"{name}_confusion.csv"
        cm = result.evaluation.confusion
        write_csv(directory / confusion_name, ("tp", "fp", "tn", "fn"),
                  [(cm.tp, cm.fp, cm.tn, cm.fn)])
        data_files.append(confusion_name)

        if result.history is not None:
            history_name = f"{name}_history.csv"
            write_csv(directory / history_name, TrainingHistory.COLUMNS,
                      result.history.to_rows())
            data_files.append(history_name)

    write_csv(
        directory / "importance.csv",
        ("rank", "feature", "weight_magnitude"),
        [(i + 1, feature, value) for i, (feature, value) in enumerate(report.importance)],
    )
    data_files.append("importance.csv")

    write_json(directory / TIMING_JSON, report.timing())

    figure_files: list = []
    if figures:
        from . import figures as fig  # deferred: pulls in matplotlib

        fig.render_all(report, directory)
        figure_files = list(FIGURE_FILES)

    manifest = {
        "hash_algorithm": "sha256",
        "files": [
            {"name": name, "sha256": sha256_file(directory / name),
             "bytes": (directory / name).stat().st_size}
            for name in sorted(data_files)
        ],
        "figures": [
            {"name": name, "sha256": sha256_file(directory / name),
             "bytes": (directory / name).stat().st_size}
            for name in sorted(figure_files)
        ],
    }
    write_json(directory / MANIFEST_JSON, manifest)
    return manifest


def _history_from_csv(path: Path) -> TrainingHistory:
    header, rows = read_csv(path)
    if tuple(header) != TrainingHistory.COLUMNS:
        raise ReportError(f"{path}: unexpected history columns {header}")
    return TrainingHistory.from_rows(rows)


def _roc_from_csv(path: Path) -> RocCurve:
    header, rows = read_csv(path)
    if tuple(header) != ("threshold", "fpr", "tpr"):
        raise ReportError(f"{path}: unexpected roc columns {header}")
    thresholds = np.array([float(r[0]) for r in rows])
    fpr = np.array([float(r[1]) for r in rows])
    tpr = np.array([float(r[2]) for r in rows])
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def _result_from_parts(name: str, block: dict, roc: RocCurve,
                       history: TrainingHistory | None, seconds: float) -> ModelResult:
    metrics = SummaryMetrics(
        accuracy=block["accuracy"],
        precision=block["precision"],
        recall=block["recall"],
        f1=block["f1"],
        degenerate=tuple(block["degenerate"]),
    )
    evaluation = EvalReport(
        confusion=ConfusionMatrix.from_dict(block["confusion"]),
        metrics=metrics,
        auc=block["auc"],
        roc=roc,
        threshold=block["threshold"],
        intervals={
            key: ConfidenceInterval.from_dict(value)
            for key, value in block["intervals"].items()
        },
    )
    return ModelResult(
        name=name,
        evaluation=evaluation,
        wall_clock_seconds=seconds,
        iterations=block.get("iterations"),
        final_objective=block.get("final_objective"),
        epochs=block.get("epochs"),
        history=history,
    )


def load_report(directory: str | Path) -> ComparisonReport:
    """Reassemble a ComparisonReport from an emitted directory."""
    directory = Path(directory)
    payload = read_json(directory / REPORT_JSON)
    timing = read_json(directory / TIMING_JSON)

    results = {}
    for name in ("logistic", "dense", "conv"):
        block = payload["models"][name]
        roc = _roc_from_csv(directory / f"{name}_roc.csv")
        history_path = directory / f"{name}_history.csv"
        history = _history_from_csv(history_path) if history_path.exists() else None
        results[name] = _result_from_parts(name, block, roc, history, timing[name])

    return ComparisonReport(
        config=ExperimentConfig.from_dict(payload["config"]),
        dataset=payload["dataset"],
        split=payload["split"],
        class_weights=ClassWeights.from_dict(payload["class_weights"]),
        imputation_value=payload["imputation_value"],
        logistic=results["logistic"],
        dense=results["dense"],
        conv=results["conv"],
        importance=[(name, value) for name, value in payload["importance"]],
    )


def reports_equal(a: ComparisonReport, b: ComparisonReport) -> bool:
    """Full-content equality: JSON payloads, curves, histories, timing."""
    if a.to_dict() != b.to_dict():
        return False
    if a.timing() != b.timing():
        return False
    for left, right in zip(a.models().values(), b.models().values()):
        if not np.array_equal(left.evaluation.roc.thresholds, right.evaluation.roc.thresholds):
            return False
        if not np.array_equal(left.evaluation.roc.fpr, right.evaluation.roc.fpr):
            return False
        if not np.array_equal(left.evaluation.roc.tpr, right.evaluation.roc.tpr):
            return False
        if (left.history is None) != (right.history is None):
            return False
        if left.history is not None and left.history.to_dict() != right.history.to_dict():
            return False
    return True
