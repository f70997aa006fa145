"""Segment integrals for stepwise-constant detunings.

All kernels are dimensionless functions of ``x = delta * dt``:

    m_p(x) = int_0^1 u**p exp(-i x u) du

Every closed form used in the dynamics reduces to a combination of these
moments. Small ``|x|`` uses the Taylor series (the closed forms cancel
catastrophically there); large ``|x|`` uses the upward recurrence.
"""
from math import factorial

import numpy as np

#: below this |x| the power series is used
SERIES_CUTOFF = 2.0
_N_TERMS = 34


def _series(x, p):
    # sum_m (-i x)^m / (m! (m + p + 1)), Horner form in z = -i x
    z = -1j * x
    acc = np.zeros_like(z)
    for m in range(_N_TERMS - 1, -1, -1):
        acc = acc * z + 1.0 / (factorial(m) * (m + p + 1))
    return acc


def moments(x, order=2):
    """Return ``[m_0(x), ..., m_order(x)]`` for a real array ``x``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_CUTOFF
    out = []
    xs = np.where(small, 0.0, x)
    ix = 1j * np.where(small, 1.0, x)
    ex = np.exp(-1j * xs)
    prev = (1.0 - ex) / ix
    for p in range(order + 1):
        if p > 0:
            prev = (p * prev - ex) / ix
        out.append(np.where(small, _series(np.where(small, x, 0.0), p), prev))
    return out
