"""CSV loading, validation, encoding, splitting, and standardization.

The pipeline is fit/transform split: encoders, the imputation value, and
scaler parameters are fitted once on training-side data and then applied
verbatim everywhere else, so a saved model can reproduce its inputs exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, UnseenCategoryError

ID_COLUMN = "id"
LABEL_COLUMN = "stroke"
FEATURE_COLUMNS = (
    "gender",
    "age",
    "hypertension",
    "heart_disease",
    "ever_married",
    "work_type",
    "Residence_type",
    "avg_glucose_level",
    "bmi",
    "smoking_status",
)
CATEGORICAL_COLUMNS = (
    "gender",
    "ever_married",
    "work_type",
    "Residence_type",
    "smoking_status",
)
ALL_COLUMNS = (ID_COLUMN,) + FEATURE_COLUMNS + (LABEL_COLUMN,)

MISSING_BMI = "N/A"

AGE_RANGE = (0.0, 130.0)          # inclusive
GLUCOSE_RANGE = (0.0, 500.0)      # exclusive
BMI_RANGE = (5.0, 120.0)          # exclusive

# Attribute names differ from CSV headers only where the header is not a
# valid lowercase identifier.
_FIELD_BY_COLUMN = {c: c.lower() for c in FEATURE_COLUMNS}


@dataclass(frozen=True)
class PatientRecord:
    """One validated row, label optional so prediction inputs reuse it."""

    gender: str
    age: float
    hypertension: int
    heart_disease: int
    ever_married: str
    work_type: str
    residence_type: str
    avg_glucose_level: float
    bmi: float | None
    smoking_status: str
    stroke: int | None = None
    patient_id: str | None = None

    def value(self, column: str) -> object:
        return getattr(self, _FIELD_BY_COLUMN[column])


@dataclass(frozen=True)
class RawTable:
    """Validated rows plus where they came from."""

    records: tuple[PatientRecord, ...]
    source: str

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list:
        return [r.value(name) for r in self.records]

    @property
    def n_missing_bmi(self) -> int:
        return sum(1 for r in self.records if r.bmi is None)

    def labels(self) -> np.ndarray:
        out = np.empty(len(self.records), dtype=np.int64)
        for i, r in enumerate(self.records):
            if r.stroke is None:
                raise DataError(f"row {i + 1}: label column '{LABEL_COLUMN}' is missing")
            out[i] = r.stroke
        return out


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column '{column}': cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column '{column}': non-finite value {text!r}")
    return value


def _parse_binary(text: str, row: int, column: str) -> int:
    if text not in ("0", "1"):
        raise DataError(f"row {row}, column '{column}': expected 0 or 1, got {text!r}")
    return int(text)


def _check_range(value: float, lo: float, hi: float, inclusive: bool, row: int, column: str) -> None:
    ok = lo <= value <= hi if inclusive else lo < value < hi
    if not ok:
        raise DataError(f"row {row}, column '{column}': value {value} outside plausible range ({lo}, {hi})")


def parse_record(values: dict[str, str], row: int = 1, require_label: bool = True) -> PatientRecord:
    """Build a validated record from raw string cells keyed by column name."""
    missing = [c for c in FEATURE_COLUMNS if c not in values]
    if require_label and LABEL_COLUMN not in values:
        missing.append(LABEL_COLUMN)
    if missing:
        raise DataError(f"row {row}: missing column(s) {', '.join(sorted(missing))}")

    age = _parse_float(values["age"], row, "age")
    _check_range(age, *AGE_RANGE, inclusive=True, row=row, column="age")
    glucose = _parse_float(values["avg_glucose_level"], row, "avg_glucose_level")
    _check_range(glucose, *GLUCOSE_RANGE, inclusive=False, row=row, column="avg_glucose_level")

    bmi_text = values["bmi"].strip()
    if bmi_text == MISSING_BMI:
        bmi: float | None = None
    else:
        bmi = _parse_float(bmi_text, row, "bmi")
        _check_range(bmi, *BMI_RANGE, inclusive=False, row=row, column="bmi")

    stroke: int | None = None
    if values.get(LABEL_COLUMN, "").strip() != "" or require_label:
        stroke = _parse_binary(values[LABEL_COLUMN].strip(), row, LABEL_COLUMN)

    return PatientRecord(
        gender=values["gender"].strip(),
        age=age,
        hypertension=_parse_binary(values["hypertension"].strip(), row, "hypertension"),
        heart_disease=_parse_binary(values["heart_disease"].strip(), row, "heart_disease"),
        ever_married=values["ever_married"].strip(),
        work_type=values["work_type"].strip(),
        residence_type=values["Residence_type"].strip(),
        avg_glucose_level=glucose,
        bmi=bmi,
        smoking_status=values["smoking_status"].strip(),
        stroke=stroke,
        patient_id=values.get(ID_COLUMN, "").strip() or None,
    )


def load_dataset(path: str | Path) -> RawTable:
    """Read and validate a patient CSV; any schema violation names its row."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty, expected a header row") from None
            header = [h.strip() for h in header]
            unknown = sorted(set(header) - set(ALL_COLUMNS))
            if unknown:
                raise DataError(f"{path}: unknown column(s) {', '.join(unknown)}")
            absent = sorted(set(ALL_COLUMNS) - set(header))
            if absent:
                raise DataError(f"{path}: missing column(s) {', '.join(absent)}")
            if len(header) != len(set(header)):
                raise DataError(f"{path}: duplicated column names in header")

            records = []
            for i, cells in enumerate(reader, start=1):
                if len(cells) != len(header):
                    raise DataError(f"{path}: row {i} has {len(cells)} cells, expected {len(header)}")
                values = dict(zip(header, (c.strip() for c in cells)))
                records.append(parse_record(values, row=i))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None

    return RawTable(records=tuple(records), source=str(path))


@dataclass(frozen=True)
class EncoderMap:
    """Per-column label encoders: lexicographic level order, codes 0..k-1."""

    categories: dict[str, tuple[str, ...]]

    @classmethod
    def fit(cls, table: RawTable) -> "EncoderMap":
        cats = {}
        for column in CATEGORICAL_COLUMNS:
            levels = sorted({str(v) for v in table.column(column)})
            cats[column] = tuple(levels)
        return cls(categories=cats)

    def encode(self, column: str, value: str) -> int:
        levels = self.categories[column]
        try:
            return levels.index(value)
        except ValueError:
            raise UnseenCategoryError(
                f"column '{column}': category {value!r} was not in the fitted levels {list(levels)}"
            ) from None

    def decode(self, column: str, code: int) -> str:
        levels = self.categories[column]
        if not 0 <= code < len(levels):
            raise DataError(f"column '{column}': code {code} out of range for {len(levels)} levels")
        return levels[code]

    def to_dict(self) -> dict:
        return {c: list(v) for c, v in self.categories.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderMap":
        return cls(categories={c: tuple(v) for c, v in data.items()})


@dataclass(frozen=True)
class Provenance:
    source: str
    split: str
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"source": self.source, "split": self.split, "seed": self.seed}


@dataclass(frozen=True)
class Dataset:
    """Fully numeric feature matrix with aligned labels and row ids."""

    features: np.ndarray
    labels: np.ndarray
    columns: tuple[str, ...]
    provenance: Provenance
    ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {self.features.shape}")
        n = self.features.shape[0]
        if n == 0:
            raise DataError(f"dataset '{self.provenance.split}' is empty")
        if self.labels.shape != (n,):
            raise DataError(f"labels shape {self.labels.shape} does not match {n} rows")
        if self.features.shape[1] != len(self.columns):
            raise DataError(
                f"{self.features.shape[1]} feature columns but {len(self.columns)} column names"
            )
        if not np.isfinite(self.features).all():
            raise DataError("feature matrix contains non-finite values after preprocessing")
        if self.ids is not None and len(self.ids) != n:
            raise DataError(f"{len(self.ids)} row ids for {n} rows")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PreprocessConfig:
    impute: str = "mean"  # "mean" fills missing bmi, "drop" removes those rows

    def __post_init__(self) -> None:
        if self.impute not in ("mean", "drop"):
            raise DataError(f"unknown imputation strategy {self.impute!r}, expected 'mean' or 'drop'")


def preprocess(
    raw: RawTable, config: PreprocessConfig = PreprocessConfig()
) -> tuple[Dataset, EncoderMap, float | None]:
    """Encode categoricals, resolve missing bmi, and emit a numeric Dataset.

    Returns the fitted encoder map and the imputation value (None under the
    drop strategy) so the same transform can be replayed on new records.
    """
    if len(raw) == 0:
        raise DataError(f"{raw.source}: no data rows to preprocess")

    encoder = EncoderMap.fit(raw)

    records = raw.records
    if config.impute == "drop":
        records = tuple(r for r in records if r.bmi is not None)
        if not records:
            raise DataError(f"{raw.source}: every row lost to the drop-missing strategy")
        imputation_value: float | None = None
    else:
        observed = [r.bmi for r in raw.records if r.bmi is not None]
        if not observed:
            raise DataError(f"{raw.source}: cannot impute bmi, no observed values")
        imputation_value = float(np.mean(observed))

    features = np.empty((len(records), len(FEATURE_COLUMNS)), dtype=np.float64)
    labels = np.empty(len(records), dtype=np.int64)
    ids = []
    for i, record in enumerate(records):
        features[i] = encode_record(record, encoder, imputation_value)
        if record.stroke is None:
            raise DataError(f"row {i + 1}: label column '{LABEL_COLUMN}' is missing")
        labels[i] = record.stroke
        ids.append(record.patient_id if record.patient_id is not None else str(i))

    dataset = Dataset(
        features=features,
        labels=labels,
        columns=FEATURE_COLUMNS,
        provenance=Provenance(source=raw.source, split="full"),
        ids=tuple(ids),
    )
    return dataset, encoder, imputation_value


def encode_record(
    record: PatientRecord, encoder: EncoderMap, imputation_value: float | None
) -> np.ndarray:
    """Numeric feature vector for one record, in canonical column order."""
    bmi = record.bmi
    if bmi is None:
        if imputation_value is None:
            raise DataError("record has missing bmi and no imputation value is available")
        bmi = imputation_value
    out = np.empty(len(FEATURE_COLUMNS), dtype=np.float64)
    for j, column in enumerate(FEATURE_COLUMNS):
        value = record.value(column) if column != "bmi" else bmi
        if column in encoder.categories:
            out[j] = encoder.encode(column, str(value))
        else:
            out[j] = float(value)
    return out


def apply_artifacts(raw: RawTable, artifacts: "PreprocessArtifacts") -> Dataset:
    """Replay a fitted transform (encode, impute, scale) on a loaded table.

    Nothing is refitted; categories outside the stored encoder levels raise.
    Rows with missing bmi are dropped when the artifacts were fitted with the
    drop strategy, mirroring training.
    """
    if len(raw) == 0:
        raise DataError(f"{raw.source}: no data rows to transform")
    records = raw.records
    if artifacts.impute == "drop":
        records = tuple(r for r in records if r.bmi is not None)
        if not records:
            raise DataError(f"{raw.source}: every row lost to the drop-missing strategy")

    features = np.empty((len(records), len(artifacts.columns)), dtype=np.float64)
    labels = np.empty(len(records), dtype=np.int64)
    ids = []
    for i, record in enumerate(records):
        features[i] = artifacts.transform_record(record)
        if record.stroke is None:
            raise DataError(f"row {i + 1}: label column '{LABEL_COLUMN}' is missing")
        labels[i] = record.stroke
        ids.append(record.patient_id if record.patient_id is not None else str(i))

    return Dataset(
        features=features,
        labels=labels,
        columns=artifacts.columns,
        provenance=Provenance(source=raw.source, split="full"),
        ids=tuple(ids),
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _subset(ds: Dataset, idx: np.ndarray, split: str, seed: int) -> Dataset:
    return Dataset(
        features=ds.features[idx],
        labels=ds.labels[idx],
        columns=ds.columns,
        provenance=Provenance(source=ds.provenance.source, split=split, seed=seed),
        ids=None if ds.ids is None else tuple(ds.ids[i] for i in idx),
    )


def split(
    ds: Dataset, test_fraction: float, seed: int, stratified: bool = False
) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive train/test split; test size rounds half up."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(ds)
    n_test = _round_half_up(test_fraction * n)
    if n_test < 1 or n_test > n - 1:
        raise DataError(
            f"test_fraction {test_fraction} leaves an empty split for {n} rows"
        )

    rng = np.random.default_rng(seed)
    if stratified:
        classes = np.array([0, 1])
        if any((ds.labels == c).sum() == 0 for c in classes):
            raise DataError("stratified split impossible: a class has no members")
        # Largest-remainder allocation keeps per-class test counts within one
        # of the exact proportional share while summing to n_test.
        counts = np.array([(ds.labels == c).sum() for c in classes])
        exact = test_fraction * counts
        alloc = np.floor(exact).astype(int)
        remainder = n_test - alloc.sum()
        if remainder > 0:
            order = np.argsort(-(exact - alloc), kind="stable")
            for k in order[:remainder]:
                alloc[k] += 1
        if (alloc > counts).any() or (alloc < 0).any():
            raise DataError("stratified split impossible: class too small for the requested fraction")
        test_parts = []
        for c, take in zip(classes, alloc):
            members = np.flatnonzero(ds.labels == c)
            perm = rng.permutation(len(members))
            test_parts.append(members[perm[:take]])
        test_idx = np.sort(np.concatenate(test_parts))
    else:
        perm = rng.permutation(n)
        test_idx = np.sort(perm[:n_test])

    mask = np.zeros(n, dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)
    return _subset(ds, train_idx, "train", seed), _subset(ds, test_idx, "test", seed)


@dataclass(frozen=True)
class ScalerParams:
    """Per-column training mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ScalerParams":
        return cls(mean=np.asarray(data["mean"], dtype=np.float64),
                   std=np.asarray(data["std"], dtype=np.float64))

    @classmethod
    def fit(cls, features: np.ndarray) -> "ScalerParams":
        mean = features.mean(axis=0)
        std = features.std(axis=0)  # population form, ddof=0
        std = np.where(std < 1e-12, 1.0, std)  # constant columns pass through
        return cls(mean=mean, std=std)


def standardize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, ScalerParams]:
    """Scale both splits by statistics fitted on the training split only."""
    if train.columns != test.columns:
        raise DataError("train and test column order disagree")
    scaler = ScalerParams.fit(train.features)

    def apply(ds: Dataset) -> Dataset:
        return Dataset(
            features=scaler.transform(ds.features),
            labels=ds.labels,
            columns=ds.columns,
            provenance=ds.provenance,
            ids=ds.ids,
        )

    return apply(train), apply(test), scaler


@dataclass(frozen=True)
class ClassWeights:
    """Balanced weights w_c = n / (2 * n_c) for binary labels."""

    negative: float
    positive: float

    def weight_vector(self, labels: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(labels) == 1, self.positive, self.negative)

    def to_dict(self) -> dict:
        return {"negative": self.negative, "positive": self.positive}

    @classmethod
    def from_dict(cls, data: dict) -> "ClassWeights":
        return cls(negative=float(data["negative"]), positive=float(data["positive"]))


def class_weights(labels: np.ndarray) -> ClassWeights:
    labels = np.asarray(labels)
    n = labels.size
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != n:
        raise DataError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise DataError("class weights need both classes present")
    return ClassWeights(negative=n / (2.0 * n_neg), positive=n / (2.0 * n_pos))


@dataclass(frozen=True)
class PreprocessArtifacts:
    """Everything needed to replay the fitted transform on new records."""

    encoder: EncoderMap
    scaler: ScalerParams
    imputation_value: float | None
    impute: str
    columns: tuple[str, ...] = FEATURE_COLUMNS
    split_seed: int | None = None
    test_fraction: float | None = None
    stratified: bool = False
    source: str | None = None

    def transform_record(self, record: PatientRecord) -> np.ndarray:
        vector = encode_record(record, self.encoder, self.imputation_value)
        return self.scaler.transform(vector)

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder.to_dict(),
            "scaler": self.scaler.to_dict(),
            "imputation_value": self.imputation_value,
            "impute": self.impute,
            "columns": list(self.columns),
            "split_seed": self.split_seed,
            "test_fraction": self.test_fraction,
            "stratified": self.stratified,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PreprocessArtifacts":
        return cls(
            encoder=EncoderMap.from_dict(data["encoder"]),
            scaler=ScalerParams.from_dict(data["scaler"]),
            imputation_value=data["imputation_value"],
            impute=data["impute"],
            columns=tuple(data["columns"]),
            split_seed=data["split_seed"],
            test_fraction=data["test_fraction"],
            stratified=bool(data["stratified"]),
            source=data.get("source"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PreprocessArtifacts":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def matches(self, other: "PreprocessArtifacts") -> bool:
        return self.to_dict() == other.to_dict()
