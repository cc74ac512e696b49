"""Command line front end.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data or
convergence errors. Progress goes to stderr; machine-readable output goes
to files under --out, except `predict` and `cascade`, which print a single
JSON object to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .data_pipeline import (
    FEATURE_COLUMNS,
    LABEL_COLUMN,
    PatientRecord,
    apply_artifacts,
    load_dataset,
    parse_record,
    split,
)
from .errors import ConfigError, ConvergenceError, DataError, StrokeLabError
from .experiments import (
    CascadeConfig,
    CascadeModels,
    ExperimentConfig,
    binned_counts,
    cascade_predict,
    dataset_summary,
    prepare_data,
    run_comparison,
    HISTOGRAM_COLUMNS,
)
from .logistic import LogisticModel, classify, predict_proba, train_logreg
from .metrics import evaluate_scores
from .neuralnet import (
    Network,
    TrainingHistory,
    build_network,
    gradient_check,
    train_network,
    well_conditioned_instance,
)
from .reports import write_csv, write_json

log = logging.getLogger("strokelab")

MODEL_ALIASES = {
    "logistic": "logistic", "lr": "logistic",
    "dense": "dense", "dnn": "dense",
    "conv": "conv", "cnn": "conv",
}


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value}")
    return value


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _model_name(text: str) -> str:
    key = text.strip().lower()
    if key not in MODEL_ALIASES:
        raise argparse.ArgumentTypeError(
            f"unknown model {text!r}, expected one of logistic/lr, dense/dnn, conv/cnn"
        )
    return MODEL_ALIASES[key]


def _add_data_flags(parser, data_required=False) -> None:
    env_default = os.environ.get("STROKELAB_DATA")
    parser.add_argument(
        "--data", default=env_default, required=data_required and env_default is None,
        help="patient CSV path (default: $STROKELAB_DATA when set)",
    )


def _setup_logging(quiet: bool) -> None:
    log.propagate = False
    log.setLevel(logging.WARNING if quiet else logging.INFO)
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(handler)


def _set_path(config: dict, dotted: str, raw_value: str) -> None:
    """Apply one --set override like dense.epochs=10 onto the config dict."""
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value  # bare strings pass through
    node = config
    parts = dotted.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def _compare_config(args) -> ExperimentConfig:
    payload: dict = {}
    if args.config is not None:
        try:
            payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")

    for override in args.set or ():
        if "=" not in override:
            raise ConfigError(f"--set takes dotted.path=value, got {override!r}")
        dotted, _, value = override.partition("=")
        _set_path(payload, dotted.strip(), value)

    # Named flags win over both the file and --set.
    if args.data is not None:
        payload["data"] = args.data
    if args.out is not None:
        payload["output_dir"] = args.out
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.threshold is not None:
        payload["threshold"] = args.threshold
    if args.test_fraction is not None:
        payload["test_fraction"] = args.test_fraction
    if args.stratify is not None:
        payload["stratified"] = args.stratify
    if args.impute is not None:
        payload["impute"] = args.impute
    if args.figures is not None:
        payload["figures"] = args.figures
    if args.save_models is not None:
        payload["save_models"] = args.save_models
    if args.bootstrap_iterations is not None:
        payload.setdefault("bootstrap", {})["iterations"] = args.bootstrap_iterations
    for network in ("dense", "conv"):
        if args.epochs is not None:
            payload.setdefault(network, {})["epochs"] = args.epochs
        if args.lr is not None:
            payload.setdefault(network, {})["learning_rate"] = args.lr

    config = ExperimentConfig.from_dict(payload)
    if config.data is None:
        raise ConfigError("no dataset path: set 'data' in the config or pass --data")
    return config


def _cmd_compare(args) -> int:
    config = _compare_config(args)
    report = run_comparison(config)
    for name, result in report.models().items():
        metrics = result.evaluation.metrics
        log.info(
            "%s: accuracy %.4f, precision %.4f, recall %.4f, f1 %.4f, auc %.4f",
            name, metrics.accuracy, metrics.precision, metrics.recall,
            metrics.f1, result.evaluation.auc,
        )
    return 0


def _single_model_config(args) -> ExperimentConfig:
    if args.data is None:
        raise ConfigError("no dataset path: pass --data or set $STROKELAB_DATA")
    kwargs: dict = {
        "data": args.data,
        "seed": args.seed,
        "output_dir": args.out,
    }
    if args.test_fraction is not None:
        kwargs["test_fraction"] = args.test_fraction
    if args.stratify is not None:
        kwargs["stratified"] = args.stratify
    if args.impute is not None:
        kwargs["impute"] = args.impute
    if args.threshold is not None:
        kwargs["threshold"] = args.threshold
    return ExperimentConfig(**kwargs)


def _cmd_train(args) -> int:
    config = _single_model_config(args)
    _, train_std, test_std, artifacts, weights = prepare_data(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.model == "logistic":
        logistic_cfg = replace(
            config.logistic,
            class_weights=weights,
            **({"l2_strength": args.l2} if args.l2 is not None else {}),
            **({"learning_rate": args.lr} if args.lr is not None else {}),
            **({"max_iterations": args.max_iterations} if args.max_iterations is not None else {}),
        )
        model, iterations, objective = train_logreg(train_std, logistic_cfg)
        model.threshold = config.threshold
        model.artifacts = artifacts
        model.save(out_dir / "logistic.json")
        log.info("logistic: %d iterations, final objective %.6f -> %s",
                 iterations, objective, out_dir / "logistic.json")
        return 0

    spec = config.dense_spec if args.model == "dense" else config.conv_spec
    base = config.dense_train if args.model == "dense" else config.conv_train
    train_cfg = replace(
        base,
        seed=config.seed + 1,
        class_weights=weights,
        **({"epochs": args.epochs} if args.epochs is not None else {}),
        **({"learning_rate": args.lr} if args.lr is not None else {}),
        **({"batch_size": args.batch_size} if args.batch_size is not None else {}),
    )
    net = build_network(spec, seed=config.seed)
    history = train_network(net, train_std, test_std, train_cfg)
    net.save(out_dir / f"{args.model}.json", extras={
        "name": args.model,
        "threshold": config.threshold,
        "preprocessing": artifacts.to_dict(),
    })
    write_csv(out_dir / f"{args.model}_history.csv", TrainingHistory.COLUMNS, history.to_rows())
    log.info("%s: %d epochs in %.2f s -> %s",
             args.model, train_cfg.epochs, history.wall_clock_seconds,
             out_dir / f"{args.model}.json")
    return 0


def _load_any_model(path: str):
    """(kind, model, artifacts, stored threshold) for either model format."""
    payload_path = Path(path)
    try:
        head = json.loads(payload_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load model from {path}: {exc}") from None
    if head.get("kind") == "logistic":
        model = LogisticModel.load(payload_path)
        if model.artifacts is None:
            raise DataError(f"{path}: model carries no preprocessing artifacts")
        return "logistic", model, model.artifacts, model.threshold
    net, extras = Network.load(payload_path)
    stored = extras.get("preprocessing")
    if stored is None:
        raise DataError(f"{path}: model carries no preprocessing artifacts")
    from .data_pipeline import PreprocessArtifacts

    artifacts = PreprocessArtifacts.from_dict(stored)
    return extras.get("name", net.spec.variant), net, artifacts, float(extras.get("threshold", 0.5))


def _cmd_evaluate(args) -> int:
    if args.data is None:
        raise ConfigError("no dataset path: pass --data or set $STROKELAB_DATA")
    kind, model, artifacts, stored_threshold = _load_any_model(args.model_file)
    threshold = stored_threshold if args.threshold is None else args.threshold

    raw = load_dataset(args.data)
    full = apply_artifacts(raw, artifacts)
    if artifacts.split_seed is None or artifacts.test_fraction is None:
        raise DataError(f"{args.model_file}: model does not record its train/test split")
    _, test_std = split(full, artifacts.test_fraction, artifacts.split_seed, artifacts.stratified)

    if kind == "logistic":
        scores = predict_proba(model, test_std.features)
    else:
        scores = model.predict_proba(test_std.features)
    evaluation = evaluate_scores(
        scores, test_std.labels, threshold=threshold,
        iterations=args.bootstrap_iterations, seed=args.seed,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = evaluation.to_dict()
    accuracy_ci = evaluation.intervals.get("accuracy")
    payload["ci_lower"] = None if accuracy_ci is None else accuracy_ci.lower
    payload["ci_upper"] = None if accuracy_ci is None else accuracy_ci.upper
    payload["n_degenerate_resamples"] = None if accuracy_ci is None else accuracy_ci.n_degenerate
    payload["model"] = kind
    payload["n_test"] = len(test_std)
    write_json(out_dir / "eval.json", payload)
    curve = evaluation.roc
    write_csv(out_dir / "roc.csv", ("threshold", "fpr", "tpr"),
              zip(curve.thresholds.tolist(), curve.fpr.tolist(), curve.tpr.tolist()))
    cm = evaluation.confusion
    write_csv(out_dir / "confusion.csv", ("tp", "fp", "tn", "fn"),
              [(cm.tp, cm.fp, cm.tn, cm.fn)])
    log.info("evaluated %s on %d test rows -> %s", kind, len(test_std), out_dir / "eval.json")
    return 0


def _record_from_json(path: str) -> PatientRecord:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read input {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"input {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise DataError(f"input {path} must hold a JSON object of feature values")
    allowed = set(FEATURE_COLUMNS) | {LABEL_COLUMN, "id"}
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise DataError(f"input {path}: unknown field(s) {', '.join(unknown)}")

    cells = {}
    for key, value in payload.items():
        if value is None:
            cells[key] = "N/A"
        elif isinstance(value, bool):
            cells[key] = str(int(value))
        else:
            cells[key] = str(value)
    return parse_record(cells, row=1, require_label=False)


def _cmd_predict(args) -> int:
    kind, model, artifacts, stored_threshold = _load_any_model(args.model_file)
    threshold = stored_threshold if args.threshold is None else args.threshold
    record = _record_from_json(args.input)
    vector = artifacts.transform_record(record)
    if kind == "logistic":
        probability = float(predict_proba(model, vector))
    else:
        probability = float(model.predict_proba(vector)[0])
    label = classify(probability, threshold)
    print(json.dumps({
        "model": kind,
        "probability": probability,
        "threshold": threshold,
        "label": label,
    }, sort_keys=True))
    return 0


def _cmd_cascade(args) -> int:
    models = CascadeModels.load(args.models)
    config = CascadeConfig(
        screening_threshold=args.screening_threshold,
        assessment_threshold=args.assessment_threshold,
    )
    record = _record_from_json(args.input)
    decision = cascade_predict(models, record, config)
    print(json.dumps(decision.to_dict(), sort_keys=True))
    return 0


def _cmd_summarize(args) -> int:
    if args.data is None:
        raise ConfigError("no dataset path: pass --data or set $STROKELAB_DATA")
    raw = load_dataset(args.data)
    summary = dataset_summary(raw)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "summary.json", summary)
    for column in HISTOGRAM_COLUMNS:
        rows = binned_counts(raw, column, bins=args.bins)
        write_csv(out_dir / f"hist_{column}.csv", ("left", "right", "count"), rows)
    log.info("summary of %d rows -> %s", len(raw), out_dir / "summary.json")
    return 0


def _cmd_gradcheck(args) -> int:
    variants = ("dense", "conv") if args.variant == "both" else (args.variant,)
    results = {}
    failures = []
    for variant in variants:
        worst = 0.0
        worst_seed = None
        failed = []
        for seed in range(args.seeds):
            net, x, labels, weights = well_conditioned_instance(variant, seed)
            error = gradient_check(net, x, labels, weights, epsilon=args.epsilon)
            if error > worst:
                worst, worst_seed = error, seed
            if error >= args.tolerance:
                failed.append({"seed": seed, "relative_error": error})
        results[variant] = {
            "seeds": args.seeds,
            "epsilon": args.epsilon,
            "tolerance": args.tolerance,
            "max_relative_error": worst,
            "worst_seed": worst_seed,
            "failures": failed,
        }
        log.info("%s: %d/%d seeds under %g (max %.3e)",
                 variant, args.seeds - len(failed), args.seeds, args.tolerance, worst)
        failures.extend((variant, f["seed"]) for f in failed)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "gradcheck.json", results)
    if failures:
        raise ConvergenceError(
            "gradient check failed for " +
            ", ".join(f"{variant} seed {seed}" for variant, seed in failures)
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="strokelab",
        description="Stroke-risk prediction laboratory: preprocessing, models, reports.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, help_text: str, func):
        p = sub.add_parser(
            name, help=help_text, description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        p.set_defaults(func=func)
        return p

    p = add("compare", "train and evaluate all three models, writing a full report", _cmd_compare)
    p.add_argument("--config", help="JSON config file")
    _add_data_flags(p)
    p.add_argument("--out", help="report directory (default: config output_dir)")
    p.add_argument("--seed", type=int, help="experiment seed")
    p.add_argument("--epochs", type=_positive_int, help="override epochs for both networks")
    p.add_argument("--lr", type=_positive_float, help="override learning rate for both networks")
    p.add_argument("--threshold", type=_unit_interval, help="classification threshold")
    p.add_argument("--test-fraction", type=_fraction, help="test split fraction")
    p.add_argument("--stratify", action=argparse.BooleanOptionalAction, default=None,
                   help="stratify the split by label")
    p.add_argument("--impute", choices=("mean", "drop"), help="missing-bmi strategy")
    p.add_argument("--bootstrap-iterations", type=_positive_int,
                   help="bootstrap resample count")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None,
                   help="render figure files alongside the delimited output")
    p.add_argument("--save-models", action=argparse.BooleanOptionalAction, default=None,
                   help="save fitted models under <out>/models")
    p.add_argument("--set", action="append", metavar="PATH=VALUE",
                   help="override any config leaf, e.g. --set dense.epochs=50")

    p = add("train", "fit one model and save it with its preprocessing artifacts", _cmd_train)
    p.add_argument("--model", type=_model_name, required=True,
                   help="logistic/lr, dense/dnn, or conv/cnn")
    _add_data_flags(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=42, help="experiment seed")
    p.add_argument("--epochs", type=_positive_int, help="training epochs (networks)")
    p.add_argument("--lr", type=_positive_float, help="learning rate")
    p.add_argument("--batch-size", type=_positive_int, help="mini-batch size (networks)")
    p.add_argument("--l2", type=float, help="L2 strength (logistic)")
    p.add_argument("--max-iterations", type=_positive_int, help="iteration cap (logistic)")
    p.add_argument("--threshold", type=_unit_interval, help="classification threshold")
    p.add_argument("--test-fraction", type=_fraction, help="test split fraction")
    p.add_argument("--stratify", action=argparse.BooleanOptionalAction, default=None,
                   help="stratify the split by label")
    p.add_argument("--impute", choices=("mean", "drop"), help="missing-bmi strategy")

    p = add("evaluate", "re-evaluate a saved model on its recorded test split", _cmd_evaluate)
    p.add_argument("--model-file", required=True, help="saved model JSON")
    _add_data_flags(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threshold", type=_unit_interval,
                   help="classification threshold (default: the model's)")
    p.add_argument("--bootstrap-iterations", type=_positive_int, default=1000,
                   help="bootstrap resample count")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")

    p = add("predict", "score one patient record (JSON) and print the decision", _cmd_predict)
    p.add_argument("--model-file", required=True, help="saved model JSON")
    p.add_argument("--input", required=True, help="patient record JSON file")
    p.add_argument("--threshold", type=_unit_interval,
                   help="classification threshold (default: the model's)")

    p = add("cascade", "run the staged triage over one patient record", _cmd_cascade)
    p.add_argument("--models", required=True,
                   help="directory holding logistic.json, dense.json, conv.json")
    p.add_argument("--input", required=True, help="patient record JSON file")
    p.add_argument("--screening-threshold", type=_unit_interval, default=0.3,
                   help="stage-1 cutoff")
    p.add_argument("--assessment-threshold", type=_unit_interval, default=0.5,
                   help="stage-2/3 cutoff")

    p = add("summarize", "write marginal statistics and histogram tables", _cmd_summarize)
    _add_data_flags(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--bins", type=_positive_int, default=20, help="histogram bins")

    p = add("gradcheck", "verify analytic gradients against central differences", _cmd_gradcheck)
    p.add_argument("--variant", choices=("dense", "conv", "both"), default="both",
                   help="which architecture(s) to probe")
    p.add_argument("--seeds", type=_positive_int, default=100, help="random instances per variant")
    p.add_argument("--epsilon", type=_positive_float, default=1e-5, help="probe step")
    p.add_argument("--tolerance", type=_positive_float, default=1e-6,
                   help="maximum allowed relative error")
    p.add_argument("--out", default="out", help="output directory")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.quiet)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"strokelab: error: {exc}", file=sys.stderr)
        return 1
    except StrokeLabError as exc:
        print(f"strokelab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"strokelab: error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
