import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_day, make_examples
from crossgp.augment import AugmentConfig, augment, draw_noise, project_features
from crossgp.errors import ConfigError
from crossgp.featurize import GlycemicClass, LabeledExample, to_arrays

STD = np.array([0.17, 0.04, 0.17, 8.48, 86.86, 9.04, 19.39])


def test_zero_sigma_is_identity(examples):
    out = augment(examples, STD, AugmentConfig(0.0, 3, seed=1))
    assert len(out) == 4 * len(examples)
    for k, e in enumerate(out):
        assert e == examples[k % len(examples)]


def test_zero_copies(examples):
    assert augment(examples, STD, AugmentConfig(0.5, 0, seed=1)) == examples


def test_clamp_and_renormalize():
    X = np.array([[1.07, 0.01, 0.01, 1.0, 2.0, -3.0, 4.0]])
    out = project_features(X)[0]
    assert out[:3].sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(out[:3], np.array([1.0, 0.01, 0.01]) / 1.02)
    assert out[5] == 0.0


def test_large_noise_keeps_invariants():
    ex = [LabeledExample(make_day(tir=0.98, tbr=0.01, tar=0.01), GlycemicClass.Poor, make_day().date)]
    out = augment(ex, STD, AugmentConfig(5.0, 200, seed=3))
    X, y = to_arrays(out)
    assert np.all(np.abs(X[:, :3].sum(axis=1) - 1) <= 1e-9)
    assert (X >= 0).all() and (X[:, :3] <= 1).all()
    assert (y == int(GlycemicClass.Poor)).all()


def test_deterministic(examples):
    a = augment(examples, STD, AugmentConfig(0.3, 2, seed=9))
    b = augment(examples, STD, AugmentConfig(0.3, 2, seed=9))
    assert a == b
    assert augment(examples, STD, AugmentConfig(0.3, 2, seed=10)) != a


def test_noise_scale():
    cfg = AugmentConfig(0.05, 10_000, seed=0)
    noise = draw_noise(STD, cfg, 1)
    np.testing.assert_allclose(noise.std(axis=0), 0.05 * STD, rtol=0.05)


def test_config_validation():
    with pytest.raises(ConfigError):
        AugmentConfig(-0.1)
    with pytest.raises(ConfigError):
        AugmentConfig(0.1, -1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 3), st.integers(0, 3), st.integers(0, 2**31))
def test_invariants(sigma, copies, seed):
    ex = make_examples(1, 12, seed % 100)
    out = augment(ex, STD, AugmentConfig(sigma, copies, seed))
    assert len(out) == len(ex) * (1 + copies)
    X, _ = to_arrays(out)
    assert np.all(np.abs(X[:, :3].sum(axis=1) - 1) <= 1e-9)
    assert (X >= 0).all()
