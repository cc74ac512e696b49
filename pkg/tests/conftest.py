"""Shared fixtures: a small synthetic patient CSV with a learnable signal."""

import csv
from pathlib import Path

import numpy as np
import pytest

HEADER = [
    "id", "gender", "age", "hypertension", "heart_disease", "ever_married",
    "work_type", "Residence_type", "avg_glucose_level", "bmi", "smoking_status",
    "stroke",
]

GENDERS = ["Female", "Male"]
WORK_TYPES = ["Govt_job", "Never_worked", "Private", "Self-employed", "children"]
SMOKING = ["Unknown", "formerly smoked", "never smoked", "smokes"]


def make_rows(n: int, seed: int, missing_bmi: int = 0) -> list[list[str]]:
    """Rows with an age-driven label so tiny models can actually learn."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        age = float(rng.uniform(1, 90))
        glucose = float(rng.uniform(60, 250))
        hypertension = int(rng.random() < 0.15)
        heart = int(rng.random() < 0.08)
        logit = -2.2 + 3.2 * (age - 45) / 45 + 0.8 * (glucose - 150) / 100 + 0.7 * hypertension
        stroke = int(rng.random() < 1.0 / (1.0 + np.exp(-logit)))
        rows.append([
            str(1000 + i),
            GENDERS[int(rng.integers(0, 2))],
            f"{age:.2f}",
            str(hypertension),
            str(heart),
            "Yes" if age >= 20 and rng.random() < 0.7 else "No",
            WORK_TYPES[int(rng.integers(0, 5))],
            "Urban" if rng.random() < 0.5 else "Rural",
            f"{glucose:.2f}",
            f"{rng.uniform(15, 45):.1f}",
            SMOKING[int(rng.integers(0, 4))],
            str(stroke),
        ])
    # Guarantee both classes.
    rows[0][-1] = "1"
    rows[1][-1] = "0"
    for i in range(missing_bmi):
        rows[i][9] = "N/A"
    return rows


def write_csv(path: Path, rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        writer.writerows(rows)


@pytest.fixture(scope="session")
def tiny_csv(tmp_path_factory) -> Path:
    """300 rows, 7 missing bmi, both classes present."""
    path = tmp_path_factory.mktemp("data") / "tiny.csv"
    write_csv(path, make_rows(300, seed=7, missing_bmi=7))
    return path


@pytest.fixture(scope="session")
def bundled_csv() -> Path:
    """The surrogate dataset shipped with the repository."""
    path = Path(__file__).resolve().parent.parent / "data" / "stroke-data.csv"
    if not path.exists():
        pytest.skip("bundled dataset not generated yet")
    return path
