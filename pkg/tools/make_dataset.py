"""Generate the bundled surrogate of the public Kaggle stroke-screening table.

The real file (healthcare-dataset-stroke-data.csv) cannot be redistributed
here, so this script fabricates a stand-in with the same schema, the same
size (5110 rows, 201 missing BMI entries, one "Other" gender), and similar
marginal distributions. Risk is driven by a latent logistic model in which
age dominates, glucose and the two cardiac flags contribute moderately, and
BMI carries no signal at all; the intercept is solved by bisection so the
expected positive count matches the real table's 249.

Everything is drawn from one seeded generator, so the output is byte-stable.
Run from the repository root:

    python3 tools/make_dataset.py --out data/stroke-data.csv
"""

from __future__ import annotations

import argparse
import csv
import pathlib

import numpy as np

SEED = 33
N_ROWS = 5110
N_MISSING_BMI = 201
TARGET_POSITIVES = 249.0

# Latent risk model. Age enters standardized by its population spread so its
# coefficient is directly the dominant standardized effect; BMI is omitted on
# purpose (its fitted weight should be indistinguishable from noise).
AGE_CENTER, AGE_SCALE = 43.0, 23.0
AGE_HINGE = 52.0
GLU_CENTER, GLU_SCALE = 106.0, 45.0
COEF_AGE = 0.72
COEF_AGE_HINGE = 1.05
COEF_GLUCOSE = 0.35
COEF_HYPERTENSION = 0.78
COEF_HEART = 0.80
COEF_SMOKES = 0.46
COEF_FORMERLY = 0.28
COEF_MALE = 0.08

HEADER = [
    "id", "gender", "age", "hypertension", "heart_disease", "ever_married",
    "work_type", "Residence_type", "avg_glucose_level", "bmi",
    "smoking_status", "stroke",
]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _draw_ages(rng: np.random.Generator, n: int) -> np.ndarray:
    """Mixture of children and adults, matching the real table's spread."""
    is_child = rng.random(n) < 0.16
    child = rng.uniform(0.08, 17.99, n)
    adult = 18.0 + 64.0 * rng.beta(1.15, 1.0, n)
    age = np.where(is_child, child, adult)
    # The source data stores ages >= 2 as integers, infant ages fractional.
    return np.where(age >= 2.0, np.round(age), np.round(age, 2))


def _draw_glucose(rng: np.random.Generator, n: int, age: np.ndarray) -> np.ndarray:
    """Right-skewed base population plus an age-linked hyperglycemic mode."""
    p_high = _sigmoid(-3.0 + 0.028 * age)
    high = rng.random(n) < p_high
    base = rng.normal(91.0, 17.0, n)
    spike = rng.normal(196.0, 34.0, n)
    glucose = np.where(high, spike, base)
    return np.round(np.clip(glucose, 55.1, 271.8), 2)


def _draw_bmi(rng: np.random.Generator, n: int, age: np.ndarray) -> np.ndarray:
    child_mean = 16.5 + 0.55 * np.minimum(age, 18.0)
    mean = np.where(age < 18.0, child_mean, 29.2)
    sd = np.where(age < 18.0, 4.0, 7.2)
    return np.round(np.clip(rng.normal(mean, sd), 10.3, 92.0), 1)


def _draw_work_type(rng: np.random.Generator, age: np.ndarray) -> np.ndarray:
    n = age.size
    out = np.empty(n, dtype=object)
    u = rng.random(n)
    child = age < 17.0
    out[child] = np.where(u[child] < 0.96, "children", "Never_worked")
    adult_levels = np.array(["Private", "Self-employed", "Govt_job", "Never_worked"])
    # Self-employment skews older; shift probability mass with age.
    for i in np.flatnonzero(~child):
        p_self = 0.10 + 0.22 * min(max((age[i] - 30.0) / 50.0, 0.0), 1.0)
        probs = np.array([0.825 - p_self, p_self, 0.155, 0.02])
        out[i] = rng.choice(adult_levels, p=probs / probs.sum())
    return out


def _draw_smoking(rng: np.random.Generator, age: np.ndarray) -> np.ndarray:
    n = age.size
    out = np.empty(n, dtype=object)
    child = age < 18.0
    levels = np.array(["never smoked", "Unknown", "formerly smoked", "smokes"])
    for i in range(n):
        if child[i]:
            probs = [0.24, 0.72, 0.01, 0.03]
        else:
            probs = [0.40, 0.20, 0.21, 0.19]
        out[i] = rng.choice(levels, p=probs)
    return out


def _solve_intercept(partial_logit: np.ndarray, target: float) -> float:
    lo, hi = -12.0, 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _sigmoid(partial_logit + mid).sum() > target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def generate_rows(seed: int = SEED) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    n = N_ROWS

    age = _draw_ages(rng, n)
    gender = np.where(rng.random(n) < 0.586, "Female", "Male").astype(object)
    gender[int(rng.integers(0, n))] = "Other"  # the real table has exactly one

    hypertension = (rng.random(n) < _sigmoid(-4.35 + 0.047 * age)).astype(int)
    heart = (rng.random(n) < _sigmoid(-5.6 + 0.055 * age)).astype(int)
    married = np.where(
        (age >= 18.0) & (rng.random(n) < _sigmoid((age - 24.0) / 4.0)), "Yes", "No")
    work = _draw_work_type(rng, age)
    residence = np.where(rng.random(n) < 0.508, "Urban", "Rural")
    glucose = _draw_glucose(rng, n, age)
    bmi = _draw_bmi(rng, n, age)
    smoking = _draw_smoking(rng, age)

    partial = (
        COEF_AGE * (age - AGE_CENTER) / AGE_SCALE
        + COEF_AGE_HINGE * np.maximum(age - AGE_HINGE, 0.0) / AGE_SCALE
        + COEF_GLUCOSE * (glucose - GLU_CENTER) / GLU_SCALE
        + COEF_HYPERTENSION * hypertension
        + COEF_HEART * heart
        + COEF_SMOKES * (smoking == "smokes")
        + COEF_FORMERLY * (smoking == "formerly smoked")
        + COEF_MALE * (gender == "Male")
    )
    intercept = _solve_intercept(partial, TARGET_POSITIVES)
    stroke = (rng.random(n) < _sigmoid(partial + intercept)).astype(int)

    missing = rng.choice(n, size=N_MISSING_BMI, replace=False)
    bmi_text = np.array([f"{v:.1f}" for v in bmi], dtype=object)
    bmi_text[missing] = "N/A"

    ids = rng.choice(np.arange(10, 99999), size=n, replace=False)

    def age_text(a: float) -> str:
        return f"{a:.2f}" if a < 2.0 else str(int(a))

    rows = []
    for i in range(n):
        rows.append([
            str(int(ids[i])), str(gender[i]), age_text(age[i]),
            str(int(hypertension[i])), str(int(heart[i])), str(married[i]),
            str(work[i]), str(residence[i]), f"{glucose[i]:.2f}",
            str(bmi_text[i]), str(smoking[i]), str(int(stroke[i])),
        ])
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/stroke-data.csv")
    parser.add_argument("--seed", type=int, default=SEED)
    args = parser.parse_args()

    rows = generate_rows(args.seed)
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        writer.writerows(rows)
    positives = sum(int(r[-1]) for r in rows)
    print(f"wrote {len(rows)} rows to {out} ({positives} positive)")


if __name__ == "__main__":
    main()
