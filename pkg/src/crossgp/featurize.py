"""Daily feature vectors, glycemic-control labels and next-day pairing."""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, fields, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import FEATURE_NAMES
from .errors import DegenerateFeature, DomainError, EmptyDay, InsufficientCoverage
from .ingest import SubjectDayBundle

log = logging.getLogger(__name__)

TIR_LOW = 70.0
TIR_HIGH = 180.0
GOOD_ABOVE = 0.70
POOR_BELOW = 0.55

# 50% of the 288 readings expected at a 5-minute cadence
MIN_CGM_READINGS = 144


class GlycemicClass(enum.IntEnum):
    Good = 0
    Moderate = 1
    Poor = 2


@dataclass(frozen=True)
class DailyFeatures:
    subject: str
    date: date
    tir: float
    tbr: float
    tar: float
    correction_bolus: float
    meal: float
    meal_bolus: float
    total_bolus: float
    cgm_count: int

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=float)

    def with_vector(self, values: Sequence[float]) -> "DailyFeatures":
        return replace(self, **{name: float(v) for name, v in zip(FEATURE_NAMES, values)})


@dataclass(frozen=True)
class LabeledExample:
    features: DailyFeatures
    label: GlycemicClass
    label_date: date

    @property
    def subject(self) -> str:
        return self.features.subject

    @property
    def feature_date(self) -> date:
        return self.features.date


@dataclass(frozen=True)
class SplitDataset:
    train: list[LabeledExample]
    test: list[LabeledExample]
    mean: np.ndarray
    std: np.ndarray


def compute_ranges(readings: Iterable[float]) -> tuple[float, float, float]:
    """Fractions of readings in range [70, 180], below 70 and above 180 mg/dL."""
    bg = np.asarray(list(readings), dtype=float)
    if bg.size == 0:
        raise EmptyDay("no CGM readings")
    n = bg.size
    below = int(np.count_nonzero(bg < TIR_LOW))
    above = int(np.count_nonzero(bg > TIR_HIGH))
    in_range = n - below - above
    return in_range / n, below / n, above / n


def daily_features(bundle: SubjectDayBundle, min_cgm: int = MIN_CGM_READINGS) -> DailyFeatures:
    """Collapse one subject-day bundle into its feature vector.

    Raises InsufficientCoverage when the day has fewer than ``min_cgm``
    CGM readings (and EmptyDay when it has none at all with ``min_cgm=0``).
    """
    n = len(bundle.cgm)
    if n < max(min_cgm, 1):
        if n == 0 and min_cgm <= 0:
            raise EmptyDay(f"{bundle.subject} {bundle.date}: no CGM readings")
        raise InsufficientCoverage(bundle.subject, bundle.date, n)
    tir, tbr, tar = compute_ranges(r.bg for r in bundle.cgm)
    sums = {"CorrectionBolus": 0.0, "MealBolus": 0.0, "TotalBolus": 0.0}
    for ev in bundle.insulin:
        sums[ev.kind] += ev.units
    return DailyFeatures(
        subject=bundle.subject,
        date=bundle.date,
        tir=tir,
        tbr=tbr,
        tar=tar,
        correction_bolus=sums["CorrectionBolus"],
        meal=math.fsum(m.carbs for m in bundle.meals),
        meal_bolus=sums["MealBolus"],
        total_bolus=sums["TotalBolus"],
        cgm_count=n,
    )


def featurize_bundles(
    bundles: Iterable[SubjectDayBundle], min_cgm: int = MIN_CGM_READINGS
) -> list[DailyFeatures]:
    """Featurize every bundle that meets coverage; skipped days are logged."""
    out = []
    for b in bundles:
        try:
            out.append(daily_features(b, min_cgm))
        except (InsufficientCoverage, EmptyDay) as exc:
            log.info("skipping day: %s", exc)
    out.sort(key=lambda d: (d.subject, d.date))
    return out


def label_of(tir: float) -> GlycemicClass:
    if not (0.0 <= tir <= 1.0):
        raise DomainError(f"tir must lie in [0, 1], got {tir}")
    if tir > GOOD_ABOVE:
        return GlycemicClass.Good
    if tir >= POOR_BELOW:
        return GlycemicClass.Moderate
    return GlycemicClass.Poor


def pair_cross_day(days: Sequence[DailyFeatures]) -> list[LabeledExample]:
    """Pair day-d features with the class of day d+1 for the same subject.

    Gaps in the calendar (including days dropped for coverage) break the chain.
    """
    by_key = {(d.subject, d.date): d for d in days}
    examples = []
    for d in sorted(days, key=lambda d: (d.subject, d.date)):
        nxt = by_key.get((d.subject, d.date + timedelta(days=1)))
        if nxt is not None:
            examples.append(LabeledExample(d, label_of(nxt.tir), nxt.date))
    return examples


def to_arrays(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack examples into an (n, 7) feature matrix and an (n,) label vector."""
    X = np.array([e.features.vector() for e in examples], dtype=float).reshape(-1, len(FEATURE_NAMES))
    y = np.array([int(e.label) for e in examples], dtype=np.int64)
    return X, y


def normalization_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and population std; zero-variance features are rejected."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    for name, s in zip(FEATURE_NAMES, std):
        if not s > 0:
            raise DegenerateFeature(name)
    return mean, std


def split_and_normalize(
    examples: Sequence[LabeledExample], test_fraction: float = 0.2, seed: int = 0
) -> SplitDataset:
    """Per-subject chronological split plus train-only normalization stats.

    For each subject the last ``ceil(test_fraction * n_subject)`` examples by
    feature date go to the test set. The split involves no randomness, so
    ``seed`` is accepted only to keep the call signature uniform.
    """
    if len(examples) < 10:
        raise DomainError(f"need at least 10 examples to split, got {len(examples)}")
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test_fraction must be in (0, 1), got {test_fraction}")
    per_subject: dict[str, list[LabeledExample]] = defaultdict(list)
    for e in examples:
        per_subject[e.subject].append(e)
    train, test = [], []
    for subject in sorted(per_subject):
        rows = sorted(per_subject[subject], key=lambda e: e.feature_date)
        n_test = math.ceil(test_fraction * len(rows))
        train.extend(rows[: len(rows) - n_test])
        test.extend(rows[len(rows) - n_test :])
    if not train:
        raise DomainError("split left no training examples")
    X, _ = to_arrays(train)
    mean, std = normalization_stats(X)
    return SplitDataset(train=train, test=test, mean=mean, std=std)


# -- CSV files --------------------------------------------------------------

FEATURE_COLUMNS = ("subject", "date", *FEATURE_NAMES, "cgm_count")
EXAMPLE_COLUMNS = (*FEATURE_COLUMNS, "label", "label_date")


def _features_row(d: DailyFeatures) -> list:
    return [d.subject, d.date.isoformat(), *(repr(float(getattr(d, n))) for n in FEATURE_NAMES), d.cgm_count]


def _features_from_row(row: dict) -> DailyFeatures:
    return DailyFeatures(
        subject=row["subject"],
        date=date.fromisoformat(row["date"]),
        cgm_count=int(row["cgm_count"]),
        **{n: float(row[n]) for n in FEATURE_NAMES},
    )


def write_features_csv(days: Iterable[DailyFeatures], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_COLUMNS)
        for d in days:
            w.writerow(_features_row(d))


def read_features_csv(path: str | Path) -> list[DailyFeatures]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [_features_from_row(row) for row in csv.DictReader(fh)]


def write_examples_csv(examples: Iterable[LabeledExample], path: str | Path) -> None:
    """Examples CSV: feature columns plus integer ``label`` code and ``label_date``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXAMPLE_COLUMNS)
        for e in examples:
            w.writerow([*_features_row(e.features), int(e.label), e.label_date.isoformat()])


def read_examples_csv(path: str | Path) -> list[LabeledExample]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            LabeledExample(
                _features_from_row(row),
                GlycemicClass(int(row["label"])),
                date.fromisoformat(row["label_date"]),
            )
            for row in csv.DictReader(fh)
        ]


assert tuple(f.name for f in fields(DailyFeatures))[2:9] == FEATURE_NAMES
