import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from respdistress.functionals import FUNCTIONALS, PITCH_FUNCTIONALS, apply_functionals

import oracles

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_names_and_subset():
    assert len(FUNCTIONALS) == 21
    assert len(PITCH_FUNCTIONALS) == 19
    assert set(FUNCTIONALS) - set(PITCH_FUNCTIONALS) == {"upleveltime75", "upleveltime90"}


def test_random_length_200_matches_oracle():
    x = np.random.default_rng(0).normal(size=200)
    assert_allclose(apply_functionals(x), oracles.functionals(x), rtol=0, atol=1e-9)


@given(arrays(np.float64, st.integers(1, 60), elements=finite))
def test_matches_oracle(x):
    got = apply_functionals(x)
    want = oracles.functionals(x)
    assert_allclose(got, want, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(x).max()))


@given(finite, st.integers(1, 50))
def test_constant_column(c, n):
    v = dict(zip(FUNCTIONALS, apply_functionals(np.full(n, c))))
    assert v["amean"] == pytest.approx(c)
    for name in ("stddev", "skewness", "kurtosis", "iqr1-2", "iqr2-3", "iqr1-3",
                 "pctlrange0-1", "linregc1", "linregerrQ", "linregerrA"):
        assert v[name] == pytest.approx(0.0, abs=1e-9)
    assert v["upleveltime75"] == v["upleveltime90"] == 1.0


@given(arrays(np.float64, st.integers(1, 40), elements=finite))
def test_subset_is_projection(x):
    full = dict(zip(FUNCTIONALS, apply_functionals(x)))
    sub = apply_functionals(x, subset=True)
    assert_allclose(sub, [full[n] for n in PITCH_FUNCTIONALS])


def test_single_value():
    v = dict(zip(FUNCTIONALS, apply_functionals([4.0])))
    assert v["maxPos"] == v["minPos"] == 0.0
    assert v["linregc2"] == 4.0


def test_ramp():
    v = dict(zip(FUNCTIONALS, apply_functionals(np.arange(11.0))))
    assert v["linregc1"] == pytest.approx(1.0)
    assert v["linregc2"] == pytest.approx(0.0, abs=1e-12)
    assert v["linregerrQ"] == pytest.approx(0.0, abs=1e-12)
    assert v["maxPos"] == 1.0 and v["minPos"] == 0.0
    # values 8, 9, 10 lie strictly above 7.5
    assert v["upleveltime75"] == pytest.approx(3 / 11)


def test_empty_rejected():
    with pytest.raises(ValueError):
        apply_functionals([])


@settings(max_examples=30)
@given(arrays(np.float64, st.integers(2, 40), elements=finite), st.floats(0.1, 10.0),
       st.floats(-100, 100))
def test_affine_equivariance(x, a, b):
    v = dict(zip(FUNCTIONALS, apply_functionals(x)))
    w = dict(zip(FUNCTIONALS, apply_functionals(a * x + b)))
    tol = 1e-7 * (1 + a * np.abs(x).max() + abs(b))
    assert w["amean"] == pytest.approx(a * v["amean"] + b, abs=tol)
    assert w["stddev"] == pytest.approx(a * v["stddev"], abs=tol)
    assert w["quartile2"] == pytest.approx(a * v["quartile2"] + b, abs=tol)
