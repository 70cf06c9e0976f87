"""Synthetic multi-subject raw event streams with known cross-day structure.

Every subject carries a latent daily control score ``z`` with a standard
normal stationary distribution. Its quantile picks the day's glycemic
class (so the class mix matches ``control_mix``) and a target TIR inside
that class. The next day's score is

    z[d+1] = persistence * z[d] + insulin_coupling * e[d] + noise

where ``w[d]`` is day d's total insulin deviation from the population
mean in standard deviations (before clipping to a plausible range) and
``e[d] = dose_effect(w[d])`` falls with ``|w[d]|``: both under- and
over-dosing worsen the next day. Day-d TIR, TAR and total bolus therefore
carry signal about day d+1's class, part of it nonlinear.

Daily envelopes target the reference population summary: TIR mean ~0.74,
meal ~170 g/day, meal bolus ~15.5 U/day, total bolus ~42.4 U/day.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .errors import ConfigError
from .featurize import GOOD_ABOVE, POOR_BELOW

READINGS_PER_DAY = 288
CGM_STEP_MIN = 5
TOTAL_BOLUS_STEP_MIN = 15
BG_CLIP = (39.0, 401.0)

# target TIR bands per class, kept clear of the class boundaries so that
# rounding to a whole number of readings cannot change the class
GOOD_TIR = (0.71, 1.0)
MODERATE_TIR = (0.56, 0.69)
POOR_TIR = (0.30, 0.54)

MEAN_DAILY_CARBS = 170.0
MEAN_TOTAL_BOLUS = 42.4
SD_TOTAL_BOLUS = 17.0
MEAN_TBR_SHARE = 0.08  # share of out-of-range time spent below range
START_DATE = date(2013, 4, 2)

_PHI = NormalDist()


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 30
    days_per_subject: int = 90
    seed: int = 42
    control_mix: tuple[float, float, float] = (0.6, 0.2, 0.2)
    persistence: float = 0.75
    insulin_coupling: float = 0.6

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise ConfigError("n_subjects must be >= 1")
        if self.days_per_subject < 2:
            raise ConfigError("days_per_subject must be >= 2")
        mix = self.control_mix
        if len(mix) != 3 or any(m < 0 for m in mix) or abs(sum(mix) - 1.0) > 1e-9:
            raise ConfigError(f"control_mix must be three non-negative fractions summing to 1, got {mix}")
        a, b = self.persistence, self.insulin_coupling
        if a < 0 or b < 0 or a * a + b * b > 1.0:
            raise ConfigError("need persistence, insulin_coupling >= 0 with persistence^2 + coupling^2 <= 1")


def target_tir(q: float, mix: tuple[float, float, float]) -> float:
    """Map a control quantile in (0, 1) to a target TIR.

    Quantiles below the Poor share map into the Poor band, then Moderate,
    then Good; position within the share maps linearly into the band.
    """
    good, moderate, poor = mix
    for share, (lo, hi) in ((poor, POOR_TIR), (moderate, MODERATE_TIR), (good, GOOD_TIR)):
        if q < share:
            return lo + (hi - lo) * (q / share)
        q -= share
    return GOOD_TIR[1]


def _ar1_kernel(n: int, keep: float) -> np.ndarray:
    lag = np.arange(n)[:, None] - np.arange(n)[None, :]
    return np.where(lag >= 0, keep ** np.maximum(lag, 0), 0.0)


_KERNEL_KEEP = 0.95
_KERNEL = _ar1_kernel(READINGS_PER_DAY, _KERNEL_KEEP)


def _ou_path(rng: np.random.Generator, n: int = READINGS_PER_DAY) -> np.ndarray:
    """Discrete Ornstein-Uhlenbeck path with a standard normal stationary law."""
    shocks = rng.standard_normal(n) * math.sqrt(1.0 - _KERNEL_KEEP**2)
    shocks[0] = rng.standard_normal()
    return _KERNEL[:n, :n] @ shocks


def cgm_day(
    rng: np.random.Generator, tir: float, tbr_share: float, meal_slots: list[tuple[int, float]]
) -> np.ndarray:
    """288 readings whose in-range fraction is exactly round(tir * 288) / 288.

    A mean-reverting path with post-meal excursions is mapped affinely so
    that the chosen number of lowest values falls below 70 mg/dL and the
    chosen number of highest values above 180 mg/dL.
    """
    n = READINGS_PER_DAY
    x = _ou_path(rng, n)
    t = np.arange(n)
    for slot, carbs in meal_slots:
        after = t >= slot
        x[after] += (carbs / 50.0) * np.exp(-(t[after] - slot) / 18.0)
    k = int(round(tir * n))
    n_out = n - k
    n_below = int(round(tbr_share * n_out))
    order = np.argsort(x, kind="stable")
    xs = x[order]
    span = xs[-1] - xs[0]
    lo_anchor = (xs[n_below - 1] + xs[n_below]) / 2 if n_below > 0 else xs[0] - 0.1 * span
    hi_idx = n_below + k
    hi_anchor = (xs[hi_idx - 1] + xs[hi_idx]) / 2 if hi_idx < n else xs[-1] + 0.1 * span
    # with no in-range readings the anchors coincide; the clamps below still apply
    scale = (180.0 - 70.0) / max(hi_anchor - lo_anchor, 1e-9 * span)
    bg = np.round(70.0 + (x - lo_anchor) * scale, 1)
    category = np.empty(n, dtype=np.int64)
    category[order] = np.repeat([0, 1, 2], [n_below, k, n - hi_idx])
    bg = np.where(category == 0, np.minimum(bg, 69.9), bg)
    bg = np.where(category == 1, np.clip(bg, 70.0, 180.0), bg)
    bg = np.where(category == 2, np.maximum(bg, 180.1), bg)
    return np.clip(bg, *BG_CLIP)


def dose_effect(w: float) -> float:
    """Next-day effect of a day's standardized insulin deviation ``w``.

    Both under- and over-dosing hurt, so the effect decreases in ``|w|``.
    The map ``-Phi^-1(2 Phi(|w|) - 1)`` sends a standard normal ``w`` to a
    standard normal effect, which keeps the latent score's stationary law
    N(0, 1) and the class mix on target.
    """
    u = 2.0 * _PHI.cdf(abs(w)) - 1.0
    return -_PHI.inv_cdf(min(max(u, 1e-12), 1.0 - 1e-12))


def _fmt(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M")


def _subject_rows(cfg: SynthConfig, s: int) -> tuple[list, list, list]:
    rng = np.random.default_rng([cfg.seed, s])
    subject = f"S{s + 1:02d}"
    start = START_DATE + timedelta(days=int(rng.integers(0, 365)))
    icr = rng.uniform(9.0, 13.0)  # grams covered per unit of meal bolus
    a, b = cfg.persistence, cfg.insulin_coupling
    noise_sd = math.sqrt(max(0.0, 1.0 - a * a - b * b))
    z = rng.standard_normal()
    cgm_rows, bolus_rows, meal_rows = [], [], []
    for d in range(cfg.days_per_subject):
        day = datetime.combine(start + timedelta(days=d), datetime.min.time())
        q = min(max(_PHI.cdf(z), 1e-12), 1.0 - 1e-12)
        tir = target_tir(q, cfg.control_mix)
        tbr_share = rng.beta(0.8, 0.8 * (1.0 - MEAN_TBR_SHARE) / MEAN_TBR_SHARE)
        w = rng.standard_normal()

        n_meals = int(rng.integers(2, 6))
        meal_minutes = np.sort(rng.choice(np.arange(6 * 60, 22 * 60), n_meals, replace=False))
        carbs = np.clip(rng.gamma(4.0, MEAN_DAILY_CARBS / 3.5 / 4.0, n_meals), 5.0, 300.0).round(1)
        meal_slots = [(int(m) // CGM_STEP_MIN, float(c)) for m, c in zip(meal_minutes, carbs)]

        bg = cgm_day(rng, tir, tbr_share, meal_slots)
        for i, v in enumerate(bg):
            cgm_rows.append((subject, _fmt(day + timedelta(minutes=CGM_STEP_MIN * i)), f"{v:.1f}"))

        events = []
        for m, c in zip(meal_minutes, carbs):
            ts = day + timedelta(minutes=int(m))
            meal_rows.append((subject, _fmt(ts), f"{c:.1f}"))
            units = c / icr * rng.lognormal(0.0, 0.1)
            events.append((ts, "meal", round(float(units), 2)))

        tar = (READINGS_PER_DAY - round(tir * READINGS_PER_DAY)) / READINGS_PER_DAY * (1 - tbr_share)
        n_corr = min(6, int(rng.poisson(0.5 + 8.0 * tar)))
        for m in np.sort(rng.choice(np.arange(24 * 60), n_corr, replace=False)):
            events.append((day + timedelta(minutes=int(m)), "correction", round(float(rng.gamma(2.0, 1.5)), 2)))

        total = min(max(MEAN_TOTAL_BOLUS + SD_TOTAL_BOLUS * w, 8.0), 150.0)
        n_micro = 24 * 60 // TOTAL_BOLUS_STEP_MIN
        shares = rng.lognormal(0.0, 0.5, n_micro)
        micro = total * shares / shares.sum()
        for i, u in enumerate(micro):
            ts = day + timedelta(minutes=TOTAL_BOLUS_STEP_MIN * i + 7)
            events.append((ts, "total", round(float(u), 3)))

        events.sort(key=lambda e: (e[0], e[1]))
        bolus_rows.extend((subject, _fmt(ts), kind, f"{u:g}") for ts, kind, u in events)

        z = a * z + b * dose_effect(w) + noise_sd * rng.standard_normal()
    return cgm_rows, bolus_rows, meal_rows


def generate(cfg: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write ``cgm.csv``, ``bolus.csv`` and ``meal.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cgm, bolus, meal = [], [], []
    for s in range(cfg.n_subjects):
        c, b, m = _subject_rows(cfg, s)
        cgm += c
        bolus += b
        meal += m
    paths = {}
    for name, header, rows in (
        ("cgm", ("subject", "timestamp", "bg"), cgm),
        ("bolus", ("subject", "timestamp", "kind", "units"), bolus),
        ("meal", ("subject", "timestamp", "carbs"), meal),
    ):
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        paths[name] = path
    return paths


assert POOR_TIR[1] < POOR_BELOW < MODERATE_TIR[0] and MODERATE_TIR[1] < GOOD_ABOVE < GOOD_TIR[0]
