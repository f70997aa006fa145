import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fmforge.kernels import SERIES_CUTOFF, moments


def quad_moment(x, p):
    # QAWO: oscillatory weights handled by the integrator itself
    re = quad(lambda u: u**p, 0, 1, weight="cos", wvar=x, epsabs=1e-14, epsrel=1e-13)[0]
    im = quad(lambda u: u**p, 0, 1, weight="sin", wvar=x, epsabs=1e-14, epsrel=1e-13)[0]
    return re - 1j * im


@pytest.mark.parametrize("x", [0.0, 1e-9, -1e-4, 0.3, 1.999, 2.0, -2.5, 7.0, 40.0, -300.0])
def test_moments_match_quadrature(x):
    got = moments(np.array([x]), 3)
    for p in range(4):
        assert abs(got[p][0] - quad_moment(x, p)) < 1e-13


def test_zero_limit():
    m = moments(np.zeros(1), 2)
    assert np.allclose([m[0][0], m[1][0], m[2][0]], [1.0, 0.5, 1.0 / 3.0], atol=0, rtol=1e-15)


def test_branches_agree_at_cutoff():
    x = np.array([SERIES_CUTOFF * (1 - 1e-12), SERIES_CUTOFF])
    m = moments(x, 2)
    for mp in m:
        assert abs(mp[0] - mp[1]) < 1e-11


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 50, allow_nan=False))
def test_derivative_relation(x):
    # d m_p / dx = -i m_{p+1}
    h = 1e-6
    mp = moments(np.array([x - h, x + h]), 1)
    fd = (mp[0][1] - mp[0][0]) / (2 * h)
    assert abs(fd - (-1j) * moments(np.array([x]), 1)[1][0]) < 1e-8


@settings(max_examples=60, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_modulus_bounded(x):
    # |m_p| <= int u^p = 1/(p+1)
    for p, mp in enumerate(moments(np.array([x]), 2)):
        assert abs(mp[0]) <= 1.0 / (p + 1) + 1e-14
