import time
from datetime import date, datetime, timedelta

import numpy as np
import pytest

from crossgp.featurize import DailyFeatures, GlycemicClass, LabeledExample


def make_day(subject="S01", day=date(2013, 4, 2), tir=0.8, tbr=0.05, tar=0.15, **amounts):
    values = dict(correction_bolus=5.0, meal=150.0, meal_bolus=12.0, total_bolus=40.0)
    values.update(amounts)
    return DailyFeatures(subject=subject, date=day, tir=tir, tbr=tbr, tar=tar, cgm_count=288, **values)


def make_examples(n_subjects=2, n_days=10, seed=0):
    """Random but valid labeled examples on consecutive dates."""
    rng = np.random.default_rng(seed)
    out = []
    for s in range(n_subjects):
        for d in range(n_days):
            tri = rng.dirichlet([6.0, 0.5, 2.0])
            feat = make_day(
                f"S{s:02d}",
                date(2013, 4, 2) + timedelta(days=d),
                *tri,
                correction_bolus=float(rng.gamma(2, 3)),
                meal=float(rng.gamma(4, 40)),
                meal_bolus=float(rng.gamma(4, 4)),
                total_bolus=float(rng.gamma(5, 8)),
            )
            out.append(LabeledExample(feat, GlycemicClass(int(rng.integers(0, 3))), feat.date + timedelta(days=1)))
    return out


@pytest.fixture
def examples():
    return make_examples()


def ts(text):
    return datetime.fromisoformat(text)


MODELS = ("lr", "rf", "gbt", "crossgp")


def run(*argv):
    from crossgp.cli import dispatch

    code = dispatch([str(a) for a in argv])
    assert code == 0, f"crossgp {' '.join(map(str, argv))} exited {code}"


@pytest.fixture(scope="session")
def default_raw(tmp_path_factory):
    """``crossgp synth`` with default flags (30 subjects x 90 days, seed 42)."""
    out = tmp_path_factory.mktemp("default_raw")
    t0 = time.perf_counter()
    run("synth", "--seed", 42, "--out", out)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def default_pipeline(default_raw, tmp_path_factory):
    """Featurize, pair, train all four models with default flags, evaluate on the test split."""
    raw, _ = default_raw
    root = tmp_path_factory.mktemp("default_pipeline")
    run("featurize", "--raw", raw, "--out", root / "features.csv")
    run("pair", "--features", root / "features.csv", "--out", root / "examples.csv")
    seconds = {}
    for kind in MODELS:
        t0 = time.perf_counter()
        run("train", "--model", kind, "--examples", root / "examples.csv", "--out", root / f"{kind}.json")
        run("evaluate", "--model", root / f"{kind}.json", "--examples", root / "examples.csv",
            "--report", root / "reports" / f"{kind}.json")
        seconds[kind] = time.perf_counter() - t0
    return root, seconds
