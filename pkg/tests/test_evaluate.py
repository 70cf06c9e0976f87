import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossgp import FEATURE_NAMES
from crossgp.baselines import ForestHyper, LogisticModel, RandomForestModel
from crossgp.baselines.contract import Classifier
from crossgp.errors import EmptyTestSet, Unsupported
from crossgp.evaluate import (
    confusion_matrix,
    evaluate,
    f1_from_pr,
    importance_report,
    native_importance,
    permutation_importance,
    report_from_confusion,
)
from crossgp.net import CrossGPModel, CrossGPNet, TrainConfig

from test_baselines import stump

# (truth, prediction) pairs spelling out [[5,1,0],[1,3,1],[0,1,2]]
FOURTEEN = [(0, 0)] * 5 + [(0, 1)] + [(1, 0)] + [(1, 1)] * 3 + [(1, 2)] + [(2, 1)] + [(2, 2)] * 2

# published per-class (precision, f1, recall) for the four methods
PUBLISHED_METRICS = {
    "LR": [(0.71, 0.81, 0.94), (0.39, 0.25, 0.18), (0.31, 0.08, 0.05)],
    "RF": [(0.69, 0.79, 0.93), (0.30, 0.15, 0.10), (0.45, 0.19, 0.12)],
    "XGBoost": [(0.69, 0.77, 0.88), (0.29, 0.22, 0.17), (0.30, 0.13, 0.09)],
    "CrossGP": [(0.72, 0.82, 0.95), (0.48, 0.29, 0.21), (0.65, 0.25, 0.16)],
}


class FixedPredictor(Classifier):
    kind = "fixed"

    def __init__(self, predictions):
        self.predictions = np.asarray(predictions)

    def predict_proba(self, X):
        return np.eye(3)[self.predictions[: len(X)]]


class Threshold0(Classifier):
    """Class 0 when feature 0 exceeds 0.5, else class 2."""

    kind = "fixed"

    def predict_proba(self, X):
        return np.eye(3)[np.where(np.asarray(X)[:, 0] > 0.5, 0, 2)]


class Constant(Classifier):
    kind = "fixed"

    def predict_proba(self, X):
        return np.tile([0.2, 0.5, 0.3], (len(X), 1))


class TestConfusion:
    def test_fourteen_example_case(self):
        y_true = np.array([t for t, _ in FOURTEEN])
        y_pred = np.array([p for _, p in FOURTEEN])
        brute = np.zeros((3, 3), dtype=int)
        for t, p in FOURTEEN:
            brute[t][p] += 1
        assert brute.tolist() == [[5, 1, 0], [1, 3, 1], [0, 1, 2]]
        report = evaluate(FixedPredictor(y_pred), np.zeros((14, 7)), y_true)
        np.testing.assert_array_equal(report.confusion, brute)
        good = report.per_class["Good"]
        assert good.precision == good.recall == good.f1 == pytest.approx(5 / 6, abs=1e-15)
        assert report.per_class["Moderate"].precision == pytest.approx(3 / 5)
        assert report.per_class["Moderate"].recall == pytest.approx(3 / 5)
        assert report.per_class["Poor"].precision == pytest.approx(2 / 3)
        assert report.accuracy == pytest.approx(10 / 14)
        assert report.n_examples == 14
        assert report.macro_precision == pytest.approx((5 / 6 + 3 / 5 + 2 / 3) / 3)

    def test_perfect(self):
        y = np.array([0, 1, 2, 2, 0])
        report = evaluate(FixedPredictor(y), np.zeros((5, 7)), y)
        assert report.accuracy == 1.0
        for m in report.per_class.values():
            assert m.precision == m.recall == m.f1 == 1.0

    def test_undefined_metrics(self):
        report = report_from_confusion([[3, 1, 0], [2, 0, 0], [0, 0, 0]])
        assert report.per_class["Poor"].precision is None
        assert report.per_class["Poor"].recall is None
        assert report.per_class["Poor"].f1 is None
        # Moderate is in the truth and predicted once, never correctly
        assert report.per_class["Moderate"].precision == 0.0
        assert report.per_class["Moderate"].f1 == 0.0
        d = report.to_dict()
        assert d["classes"]["Poor"] == {"precision": None, "f1": None, "recall": None, "support": 0}

    def test_never_predicted_class(self):
        report = report_from_confusion([[3, 0, 0], [1, 0, 0], [0, 0, 2]])
        m = report.per_class["Moderate"]
        assert m.precision is None and m.recall == 0.0 and m.f1 == 0.0

    def test_empty(self):
        with pytest.raises(EmptyTestSet):
            evaluate(Constant(), np.zeros((0, 7)), np.zeros(0, dtype=int))

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60))
    def test_invariants(self, pairs):
        t, p = map(np.array, zip(*pairs))
        cm = confusion_matrix(t, p)
        report = report_from_confusion(cm)
        assert cm.sum() == len(pairs)
        assert report.accuracy == np.trace(cm) / cm.sum()
        for m in report.per_class.values():
            if m.precision is not None and m.recall is not None:
                assert m.f1 == pytest.approx(f1_from_pr(m.precision, m.recall), abs=1e-9)
        assert report_from_confusion(cm).to_dict() == report.to_dict()


@pytest.mark.parametrize("model", sorted(PUBLISHED_METRICS))
def test_published_f1_regression(model):
    for precision, f1, recall in PUBLISHED_METRICS[model]:
        assert abs(f1_from_pr(precision, recall) - f1) <= 0.01


def test_published_crossgp_good():
    assert f1_from_pr(0.72, 0.95) == pytest.approx(2 * 0.72 * 0.95 / 1.67)
    assert round(f1_from_pr(0.72, 0.95), 2) == 0.82


class TestImportance:
    def test_constant_model_degenerate(self):
        X = np.random.default_rng(0).normal(size=(20, 7))
        rep = permutation_importance(Constant(), X, np.zeros(20, dtype=int), repeats=3)
        assert rep.degenerate
        np.testing.assert_allclose(rep.scores, 1 / 7)
        np.testing.assert_array_equal(rep.raw, 0.0)

    def test_threshold_model(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(40, 7))
        y = np.where(X[:, 0] > 0.5, 0, 2)
        rep = permutation_importance(Threshold0(), X, y, repeats=5, seed=3)
        assert rep.scores[0] == 1.0
        assert rep.top3[0] == "tir"

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(30, 7))
        y = np.where(X[:, 0] > 0.5, 0, 2)
        a = permutation_importance(Threshold0(), X, y, repeats=5, seed=4).to_dict()
        assert a == permutation_importance(Threshold0(), X, y, repeats=5, seed=4).to_dict()

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            permutation_importance(Constant(), np.zeros((5, 7)), np.zeros(5, dtype=int))
        with pytest.raises(EmptyTestSet):
            permutation_importance(Constant(), np.zeros((0, 7)), np.zeros(0, dtype=int))

    def test_floor_and_normalize(self):
        rep = importance_report(np.array([0.2, -0.1, 0.0, 0.2, 0.1, 0.0, 0.0]), "permutation")
        np.testing.assert_allclose(rep.scores, [0.4, 0, 0, 0.4, 0.2, 0, 0])
        assert rep.scores.sum() == pytest.approx(1.0, abs=1e-9)
        # tie between tir and correction_bolus resolves by feature order
        assert rep.top3 == ["tir", "correction_bolus", "meal"]

    def test_top3_ties_all_equal(self):
        rep = importance_report(np.ones(7), "native")
        assert rep.top3 == list(FEATURE_NAMES[:3])

    def test_native_lr_single_feature(self):
        W = np.zeros((3, 7))
        W[:, 0] = [0.5, -1.0, 2.0]
        rep = native_importance(LogisticModel(W, np.zeros(3)))
        np.testing.assert_array_equal(rep.scores, [1, 0, 0, 0, 0, 0, 0])

    def test_native_rf_stumps(self):
        m = RandomForestModel([stump(0, 0.5, [1, 0, 0], [0, 0, 1])] * 3, [0, 1, 2], ForestHyper(n_trees=3))
        np.testing.assert_array_equal(native_importance(m).scores, [1, 0, 0, 0, 0, 0, 0])

    def test_native_unsupported_for_network(self):
        model = CrossGPModel(CrossGPNet(4), np.zeros(7), np.ones(7), TrainConfig(hidden=4))
        with pytest.raises(Unsupported):
            native_importance(model)
