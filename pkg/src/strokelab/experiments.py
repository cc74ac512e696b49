"""Experiment orchestration: the three-model comparison and the cascade.

All run-to-run randomness derives from the single experiment seed: the
split uses it directly, and each model's initialization, shuffling, and
bootstrap streams use fixed offsets from it, so one integer reproduces the
entire report byte for byte.
"""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data_pipeline import (
    FEATURE_COLUMNS,
    ClassWeights,
    Dataset,
    PatientRecord,
    PreprocessArtifacts,
    PreprocessConfig,
    RawTable,
    class_weights,
    load_dataset,
    preprocess,
    split,
    standardize,
)
from .errors import ConfigError, DataError, StrokeLabError
from .logistic import LogisticModel, LogRegConfig, feature_importance, predict_proba, train_logreg
from .metrics import EvalReport, evaluate_scores
from .neuralnet import Network, NetworkSpec, TrainConfig, TrainingHistory, build_network, train_network

log = logging.getLogger("strokelab")

# Seed offsets from the experiment seed; the split uses the seed itself.
SEED_DENSE_INIT = 11
SEED_DENSE_SHUFFLE = 12
SEED_CONV_INIT = 21
SEED_CONV_SHUFFLE = 22
SEED_BOOTSTRAP_LOGISTIC = 31
SEED_BOOTSTRAP_DENSE = 32
SEED_BOOTSTRAP_CONV = 33

CONFIG_SCHEMA_VERSION = 1
MODEL_NAMES = ("logistic", "dense", "conv")


@dataclass(frozen=True)
class CascadeConfig:
    """Two-threshold triage: a cheap screen, then a confirm/flag pair."""

    screening_threshold: float = 0.3
    assessment_threshold: float = 0.5

    def __post_init__(self) -> None:
        for name in ("screening_threshold", "assessment_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "screening_threshold": self.screening_threshold,
            "assessment_threshold": self.assessment_threshold,
        }


def _require_keys(data: dict, allowed: set[str], context: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(unknown)}")


def _net_blocks_from_dict(data: dict, variant: str) -> tuple[NetworkSpec, TrainConfig]:
    """One config-file block carries both the architecture and its training."""
    allowed = {"dropout_rate", "batch_norm", "learning_rate", "epochs", "batch_size"}
    spec_kwargs: dict = {"variant": variant}
    if variant == "dense":
        allowed |= {"hidden_sizes"}
        if "hidden_sizes" in data:
            spec_kwargs["hidden_sizes"] = tuple(int(h) for h in data["hidden_sizes"])
    else:
        allowed |= {"channels", "kernel_size", "dense_hidden"}
        spec_kwargs["batch_norm"] = False
        if "channels" in data:
            spec_kwargs["conv_channels"] = tuple(int(c) for c in data["channels"])
        if "kernel_size" in data:
            spec_kwargs["kernel_size"] = int(data["kernel_size"])
        if "dense_hidden" in data:
            spec_kwargs["dense_hidden"] = int(data["dense_hidden"])
    _require_keys(data, allowed, f"'{variant}' block")
    if "dropout_rate" in data:
        spec_kwargs["dropout_rate"] = float(data["dropout_rate"])
    if "batch_norm" in data:
        spec_kwargs["batch_norm"] = bool(data["batch_norm"])
    train_kwargs = {}
    if "learning_rate" in data:
        train_kwargs["learning_rate"] = float(data["learning_rate"])
    if "epochs" in data:
        train_kwargs["epochs"] = int(data["epochs"])
    if "batch_size" in data:
        train_kwargs["batch_size"] = int(data["batch_size"])
    try:
        return NetworkSpec(**spec_kwargs), TrainConfig(**train_kwargs)
    except ValueError as exc:
        raise ConfigError(f"'{variant}' block: {exc}") from None


def _net_blocks_to_dict(spec: NetworkSpec, train: TrainConfig) -> dict:
    out: dict = {}
    if spec.variant == "dense":
        out["hidden_sizes"] = list(spec.hidden_sizes)
    else:
        out["channels"] = list(spec.conv_channels)
        out["kernel_size"] = spec.kernel_size
        out["dense_hidden"] = spec.dense_hidden
    out["dropout_rate"] = spec.dropout_rate
    out["batch_norm"] = spec.batch_norm
    out["learning_rate"] = train.learning_rate
    out["epochs"] = train.epochs
    out["batch_size"] = train.batch_size
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings for one comparison run."""

    data: str | None = None
    output_dir: str = "out"
    seed: int = 42
    test_fraction: float = 0.2
    stratified: bool = False
    impute: str = "mean"
    threshold: float = 0.5
    logistic: LogRegConfig = field(default_factory=LogRegConfig)
    dense_spec: NetworkSpec = field(default_factory=lambda: NetworkSpec("dense"))
    dense_train: TrainConfig = field(default_factory=TrainConfig)
    conv_spec: NetworkSpec = field(default_factory=lambda: NetworkSpec("conv", batch_norm=False))
    conv_train: TrainConfig = field(default_factory=TrainConfig)
    bootstrap_iterations: int = 1000
    confidence_level: float = 0.95
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    save_models: bool = True
    figures: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.impute not in ("mean", "drop"):
            raise ConfigError(f"impute must be 'mean' or 'drop', got {self.impute!r}")
        if self.bootstrap_iterations < 1:
            raise ConfigError(f"bootstrap_iterations must be >= 1, got {self.bootstrap_iterations}")
        if not 0.0 < self.confidence_level < 1.0:
            raise ConfigError(f"confidence_level must lie in (0, 1), got {self.confidence_level}")
        if self.dense_spec.variant != "dense" or self.conv_spec.variant != "conv":
            raise ConfigError("dense_spec/conv_spec variants are fixed")

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "data": self.data,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "stratified": self.stratified,
            "impute": self.impute,
            "threshold": self.threshold,
            "logistic": self.logistic.to_dict(),
            "dense": _net_blocks_to_dict(self.dense_spec, self.dense_train),
            "conv": _net_blocks_to_dict(self.conv_spec, self.conv_train),
            "bootstrap": {"iterations": self.bootstrap_iterations, "level": self.confidence_level},
            "cascade": self.cascade.to_dict(),
            "save_models": self.save_models,
            "figures": self.figures,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _require_keys(
            data,
            {
                "schema_version", "data", "output_dir", "seed", "test_fraction",
                "stratified", "impute", "threshold", "logistic", "dense", "conv",
                "bootstrap", "cascade", "save_models", "figures",
            },
            "config",
        )
        version = data.get("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {version}")

        kwargs: dict = {}
        for key in ("data", "output_dir", "impute"):
            if data.get(key) is not None:
                kwargs[key] = str(data[key])
        for key, cast in (("seed", int), ("test_fraction", float), ("threshold", float),
                          ("stratified", bool), ("save_models", bool), ("figures", bool)):
            if key in data:
                kwargs[key] = cast(data[key])

        if "logistic" in data:
            block = data["logistic"]
            _require_keys(block, {"l2_strength", "learning_rate", "max_iterations",
                                  "gradient_tolerance"}, "'logistic' block")
            try:
                kwargs["logistic"] = LogRegConfig(**{k: v for k, v in block.items()})
            except ValueError as exc:
                raise ConfigError(f"'logistic' block: {exc}") from None
        if "dense" in data:
            kwargs["dense_spec"], kwargs["dense_train"] = _net_blocks_from_dict(data["dense"], "dense")
        if "conv" in data:
            kwargs["conv_spec"], kwargs["conv_train"] = _net_blocks_from_dict(data["conv"], "conv")
        if "bootstrap" in data:
            block = data["bootstrap"]
            _require_keys(block, {"iterations", "level"}, "'bootstrap' block")
            if "iterations" in block:
                kwargs["bootstrap_iterations"] = int(block["iterations"])
            if "level" in block:
                kwargs["confidence_level"] = float(block["level"])
        if "cascade" in data:
            block = data["cascade"]
            _require_keys(block, {"screening_threshold", "assessment_threshold"}, "'cascade' block")
            try:
                kwargs["cascade"] = CascadeConfig(**{k: float(v) for k, v in block.items()})
            except ValueError as exc:
                raise ConfigError(f"'cascade' block: {exc}") from None
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class ModelResult:
    """One model's test-set evaluation plus its training cost."""

    name: str
    evaluation: EvalReport
    wall_clock_seconds: float
    iterations: int | None = None
    final_objective: float | None = None
    epochs: int | None = None
    history: TrainingHistory | None = None

    def metrics_dict(self) -> dict:
        out = self.evaluation.to_dict()
        accuracy_ci = self.evaluation.intervals.get("accuracy")
        out["ci_lower"] = None if accuracy_ci is None else accuracy_ci.lower
        out["ci_upper"] = None if accuracy_ci is None else accuracy_ci.upper
        out["n_degenerate_resamples"] = (
            None if accuracy_ci is None else accuracy_ci.n_degenerate
        )
        if self.iterations is not None:
            out["iterations"] = self.iterations
        if self.final_objective is not None:
            out["final_objective"] = self.final_objective
        if self.epochs is not None:
            out["epochs"] = self.epochs
        return out


@dataclass
class ComparisonReport:
    """Everything the report writer persists for one comparison run."""

    config: ExperimentConfig
    dataset: dict
    split: dict
    class_weights: ClassWeights
    imputation_value: float | None
    logistic: ModelResult
    dense: ModelResult
    conv: ModelResult
    importance: list[tuple[str, float]]

    def models(self) -> dict[str, ModelResult]:
        return {"logistic": self.logistic, "dense": self.dense, "conv": self.conv}

    def timing(self) -> dict[str, float]:
        times = {name: result.wall_clock_seconds for name, result in self.models().items()}
        times["total"] = round(sum(times.values()), 2)
        return times

    def to_dict(self) -> dict:
        """The report.json payload; timing and curves live in sibling files."""
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "dataset": self.dataset,
            "split": self.split,
            "class_weights": self.class_weights.to_dict(),
            "imputation_value": self.imputation_value,
            "models": {name: result.metrics_dict() for name, result in self.models().items()},
            "importance": [[name, value] for name, value in self.importance],
        }


@contextmanager
def _stage(name: str):
    """Prefix any package error with the pipeline stage that raised it."""
    try:
        yield
    except StrokeLabError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def prepare_data(
    config: ExperimentConfig,
) -> tuple[RawTable, Dataset, Dataset, PreprocessArtifacts, ClassWeights]:
    """Load, preprocess, split, and standardize per the config."""
    if config.data is None:
        raise ConfigError("no dataset path: set 'data' in the config or pass --data")
    with _stage("load"):
        raw = load_dataset(config.data)
    with _stage("preprocess"):
        full, encoder, imputation_value = preprocess(raw, PreprocessConfig(config.impute))
        train_ds, test_ds = split(full, config.test_fraction, config.seed, config.stratified)
        train_std, test_std, scaler = standardize(train_ds, test_ds)
        weights = class_weights(train_std.labels)
    artifacts = PreprocessArtifacts(
        encoder=encoder,
        scaler=scaler,
        imputation_value=imputation_value,
        impute=config.impute,
        columns=FEATURE_COLUMNS,
        split_seed=config.seed,
        test_fraction=config.test_fraction,
        stratified=config.stratified,
        source=config.data,
    )
    log.info(
        "data: %d rows -> %d train / %d test (stratified=%s), positive weight %.3f",
        len(raw), len(train_std), len(test_std), config.stratified, weights.positive,
    )
    return raw, train_std, test_std, artifacts, weights


def run_comparison(config: ExperimentConfig) -> ComparisonReport:
    """Train and evaluate all three models, then write the report files."""
    raw, train_std, test_std, artifacts, weights = prepare_data(config)

    with _stage("logistic"):
        log.info("training logistic regression")
        started = time.perf_counter()
        logistic_cfg = replace(config.logistic, class_weights=weights)
        model, iterations, final_objective = train_logreg(train_std, logistic_cfg)
        logistic_seconds = time.perf_counter() - started
        model.threshold = config.threshold
        model.artifacts = artifacts
        scores = predict_proba(model, test_std.features)
        logistic_result = ModelResult(
            name="logistic",
            evaluation=evaluate_scores(
                scores, test_std.labels, threshold=config.threshold,
                iterations=config.bootstrap_iterations, level=config.confidence_level,
                seed=config.seed + SEED_BOOTSTRAP_LOGISTIC,
            ),
            wall_clock_seconds=_round_time(logistic_seconds),
            iterations=iterations,
            final_objective=final_objective,
        )
        log.info("logistic: %d iterations, test accuracy %.4f",
                 iterations, logistic_result.evaluation.metrics.accuracy)

    networks: dict[str, Network] = {}
    results: dict[str, ModelResult] = {}
    plans = (
        ("dense", config.dense_spec, config.dense_train, SEED_DENSE_INIT,
         SEED_DENSE_SHUFFLE, SEED_BOOTSTRAP_DENSE),
        ("conv", config.conv_spec, config.conv_train, SEED_CONV_INIT,
         SEED_CONV_SHUFFLE, SEED_BOOTSTRAP_CONV),
    )
    for name, spec, train_cfg, init_off, shuffle_off, boot_off in plans:
        with _stage(name):
            log.info("training %s network (%d epochs)", name, train_cfg.epochs)
            net = build_network(spec, seed=config.seed + init_off)
            run_cfg = replace(train_cfg, seed=config.seed + shuffle_off, class_weights=weights)
            history = train_network(net, train_std, test_std, run_cfg)
            scores = net.predict_proba(test_std.features)
            results[name] = ModelResult(
                name=name,
                evaluation=evaluate_scores(
                    scores, test_std.labels, threshold=config.threshold,
                    iterations=config.bootstrap_iterations, level=config.confidence_level,
                    seed=config.seed + boot_off,
                ),
                wall_clock_seconds=_round_time(history.wall_clock_seconds),
                epochs=run_cfg.epochs,
                history=history,
            )
            networks[name] = net
            log.info("%s: test accuracy %.4f, %.2f s", name,
                     results[name].evaluation.metrics.accuracy,
                     results[name].wall_clock_seconds)

    importance = feature_importance(model)
    report = ComparisonReport(
        config=config,
        dataset={
            "source": config.data,
            "n_rows_loaded": len(raw),
            "n_missing_bmi": raw.n_missing_bmi,
            "n_rows_used": len(train_std) + len(test_std),
            "positive_count": int(train_std.labels.sum() + test_std.labels.sum()),
            "positive_fraction": float(
                (train_std.labels.sum() + test_std.labels.sum())
                / (len(train_std) + len(test_std))
            ),
        },
        split={
            "n_train": len(train_std),
            "n_test": len(test_std),
            "test_fraction": config.test_fraction,
            "seed": config.seed,
            "stratified": config.stratified,
            "test_ids": list(test_std.ids) if test_std.ids is not None else None,
        },
        class_weights=weights,
        imputation_value=artifacts.imputation_value,
        logistic=logistic_result,
        dense=results["dense"],
        conv=results["conv"],
        importance=importance,
    )

    with _stage("report"):
        from .reports import emit_report  # local import keeps the modules acyclic

        out_dir = Path(config.output_dir)
        emit_report(report, out_dir, figures=config.figures)
        if config.save_models:
            models_dir = out_dir / "models"
            models_dir.mkdir(parents=True, exist_ok=True)
            model.save(models_dir / "logistic.json")
            for name, net in networks.items():
                net.save(models_dir / f"{name}.json", extras={
                    "name": name,
                    "threshold": config.threshold,
                    "preprocessing": artifacts.to_dict(),
                })
        log.info("report written to %s", out_dir)
    return report


def _round_time(seconds: float) -> float:
    """Timing granularity is 0.01 s; faster work still reports one tick."""
    return max(0.01, round(seconds, 2))


# cascade ------------------------------------------------------------------

LOW_RISK = "low-risk"
HIGH_RISK_CONFIRMED = "high-risk-confirmed"
HIGH_RISK_FLAGGED = "high-risk-flagged"


@dataclass(frozen=True)
class CascadeModels:
    logistic: LogisticModel
    dense: Network
    conv: Network
    artifacts: PreprocessArtifacts
    threshold_source: str = "models"

    @classmethod
    def load(cls, directory: str | Path) -> "CascadeModels":
        directory = Path(directory)
        logistic = LogisticModel.load(directory / "logistic.json")
        dense, dense_extras = Network.load(directory / "dense.json")
        conv, conv_extras = Network.load(directory / "conv.json")
        if logistic.artifacts is None:
            raise DataError("logistic model carries no preprocessing artifacts")
        artifacts = logistic.artifacts
        for name, extras in (("dense", dense_extras), ("conv", conv_extras)):
            stored = extras.get("preprocessing")
            if stored is None:
                raise DataError(f"{name} model carries no preprocessing artifacts")
            if PreprocessArtifacts.from_dict(stored).to_dict() != artifacts.to_dict():
                raise DataError(
                    f"preprocessing artifacts disagree between the logistic and {name} models"
                )
        return cls(logistic=logistic, dense=dense, conv=conv, artifacts=artifacts)


@dataclass(frozen=True)
class CascadeDecision:
    label: str
    screening_probability: float
    assessment_probability: float | None
    validation_probability: float | None
    stages: tuple[str, ...]
    flags: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "screening_probability": self.screening_probability,
            "assessment_probability": self.assessment_probability,
            "validation_probability": self.validation_probability,
            "stages": list(self.stages),
            "flags": list(self.flags),
        }


def cascade_predict(
    models: CascadeModels,
    record: PatientRecord,
    config: CascadeConfig = CascadeConfig(),
) -> CascadeDecision:
    """Run the staged triage for one patient.

    The cheap screen routes clear negatives out; anyone at or above the
    screening threshold gets the dense assessment, and its verdict is
    cross-checked by the convolutional validator. Disagreements never flip
    a decision, they only raise flags.
    """
    vector = models.artifacts.transform_record(record)
    p_screen = float(predict_proba(models.logistic, vector))
    if p_screen < config.screening_threshold:
        return CascadeDecision(
            label=LOW_RISK,
            screening_probability=p_screen,
            assessment_probability=None,
            validation_probability=None,
            stages=("screening",),
            flags=(),
        )

    p_assess = float(models.dense.predict_proba(vector)[0])
    p_validate = float(models.conv.predict_proba(vector)[0])
    assess_positive = p_assess >= config.assessment_threshold
    validate_positive = p_validate >= config.assessment_threshold

    if assess_positive and validate_positive:
        label, flags = HIGH_RISK_CONFIRMED, ()
    elif assess_positive:
        label, flags = HIGH_RISK_FLAGGED, ("validation-disagrees",)
    elif validate_positive:
        label, flags = LOW_RISK, ("validation-positive",)
    else:
        label, flags = LOW_RISK, ()
    return CascadeDecision(
        label=label,
        screening_probability=p_screen,
        assessment_probability=p_assess,
        validation_probability=p_validate,
        stages=("screening", "assessment", "validation"),
        flags=flags,
    )


# dataset summaries ---------------------------------------------------------

NUMERIC_SUMMARY_COLUMNS = ("age", "hypertension", "heart_disease", "avg_glucose_level", "bmi")
HISTOGRAM_COLUMNS = ("age", "avg_glucose_level", "bmi")


def dataset_summary(raw: RawTable) -> dict:
    """Marginal statistics of a loaded table, label prevalence included."""
    if len(raw) == 0:
        raise DataError(f"{raw.source}: nothing to summarize")
    labels = raw.labels()
    numeric = {}
    for column in NUMERIC_SUMMARY_COLUMNS:
        observed = np.array([v for v in raw.column(column) if v is not None], dtype=np.float64)
        if observed.size == 0:
            numeric[column] = {"count": 0}
            continue
        q25, median, q75 = np.percentile(observed, [25, 50, 75])
        numeric[column] = {
            "count": int(observed.size),
            "mean": float(observed.mean()),
            "std": float(observed.std()),
            "min": float(observed.min()),
            "q25": float(q25),
            "median": float(median),
            "q75": float(q75),
            "max": float(observed.max()),
        }
    categorical = {}
    for column in ("gender", "ever_married", "work_type", "Residence_type", "smoking_status"):
        counts: dict[str, int] = {}
        for value in raw.column(column):
            counts[str(value)] = counts.get(str(value), 0) + 1
        categorical[column] = dict(sorted(counts.items()))
    return {
        "source": raw.source,
        "n_rows": len(raw),
        "n_missing_bmi": raw.n_missing_bmi,
        "label": {
            "positive_count": int(labels.sum()),
            "positive_fraction": float(labels.mean()),
        },
        "numeric": numeric,
        "categorical": categorical,
    }


def binned_counts(raw: RawTable, column: str, bins: int = 20) -> list[tuple[float, float, int]]:
    """Equal-width histogram rows (left, right, count) over observed values."""
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    values = [v for v in raw.column(column) if v is not None]
    try:
        observed = np.array(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise DataError(f"column '{column}' is not numeric") from None
    if observed.size == 0:
        raise DataError(f"column '{column}' has no observed values")
    counts, edges = np.histogram(observed, bins=bins)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i]))
        for i in range(len(counts))
    ]
