import math

import mpmath
import pytest
from hypothesis import given, strategies as st

from toaqrng.specfun import erfc, normal_cdf, regularized_gamma_q


def test_erfc_reference_values():
    assert erfc(0.0) == 1.0
    assert erfc(1.0) == pytest.approx(0.15729920705028513, rel=1e-15)
    assert erfc(-1.0) == pytest.approx(2 - 0.15729920705028513, rel=1e-15)


@given(st.floats(-6, 26))
def test_erfc_against_mpmath(x):
    assert erfc(x) == pytest.approx(float(mpmath.erfc(x)), rel=1e-13, abs=1e-300)


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959963984540054) == pytest.approx(0.975, rel=1e-12)


def test_gamma_q_reference_values():
    assert regularized_gamma_q(1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert regularized_gamma_q(0.5, 2.0) == pytest.approx(math.erfc(math.sqrt(2.0)), rel=1e-13)
    assert regularized_gamma_q(3.0, 0.0) == 1.0


@given(st.floats(0.5, 500.0), st.floats(0.0, 1500.0))
def test_gamma_q_against_mpmath(a, x):
    want = float(mpmath.gammainc(a, x, mpmath.inf, regularized=True))
    assert regularized_gamma_q(a, x) == pytest.approx(want, rel=1e-9, abs=1e-300)


def test_gamma_q_rejects_bad_arguments():
    with pytest.raises(ValueError):
        regularized_gamma_q(0.0, 1.0)
    with pytest.raises(ValueError):
        regularized_gamma_q(1.0, -1.0)
