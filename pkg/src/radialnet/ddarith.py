"""Double-word ("double-double") arithmetic on numpy arrays.

A value is carried as an unevaluated pair ``(hi, lo)`` with ``|lo| <= ulp(hi)/2``,
giving roughly 106 bits of significand.  Everything is built from the
classical error-free transformations (Knuth two-sum, Dekker split/product),
so no FMA instruction is required.

Only the operations the network evaluator needs are provided: sums,
products, division, ``exp`` and the logistic sigmoid.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1
_LN2_HI = 0.6931471805599453
_LN2_LO = 2.3190468138462996e-17
_EXP_SCALE_BITS = 10
# 1/k! for k = 0..14 as exact double-double pairs.
_INV_FACT = []
for _k in range(15):
    _q = Fraction(1, math.factorial(_k))
    _hi = float(_q)
    _INV_FACT.append((_hi, float(_q - Fraction(_hi))))
del _k, _q, _hi


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def fast_two_sum(a, b):
    """Requires |a| >= |b| (or a == 0)."""
    s = a + b
    err = b - (s - a)
    return s, err


def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def dd_add(ahi, alo, bhi, blo):
    s, e = two_sum(ahi, bhi)
    t, f = two_sum(alo, blo)
    e = e + t
    s, e = fast_two_sum(s, e)
    e = e + f
    return fast_two_sum(s, e)


def dd_add_d(ahi, alo, b):
    s, e = two_sum(ahi, b)
    e = e + alo
    return fast_two_sum(s, e)


def dd_mul(ahi, alo, bhi, blo):
    p, e = two_prod(ahi, bhi)
    e = e + (ahi * blo + alo * bhi)
    return fast_two_sum(p, e)


def dd_mul_d(ahi, alo, b):
    p, e = two_prod(ahi, b)
    e = e + alo * b
    return fast_two_sum(p, e)


def dd_div(ahi, alo, bhi, blo):
    q1 = ahi / bhi
    rhi, rlo = dd_mul_d(bhi, blo, q1)
    rhi, rlo = dd_add(ahi, alo, -rhi, -rlo)
    q2 = rhi / bhi
    rhi2, rlo2 = dd_mul_d(bhi, blo, q2)
    rhi, rlo = dd_add(rhi, rlo, -rhi2, -rlo2)
    q3 = rhi / bhi
    q1, q2 = fast_two_sum(q1, q2)
    return dd_add_d(q1, q2, q3)


def dd_exp(xhi, xlo):
    """exp of a double-double argument; valid for |x| < ~700."""
    xhi = np.asarray(xhi, dtype=np.float64)
    xlo = np.asarray(xlo, dtype=np.float64)
    k = np.rint(xhi / _LN2_HI)
    # r = x - k*ln2, with ln2 carried in two words
    phi, plo = two_prod(k, _LN2_HI)
    plo = plo + k * _LN2_LO
    rhi, rlo = dd_add(xhi, xlo, -phi, -plo)
    scale = 2.0 ** -_EXP_SCALE_BITS
    rhi, rlo = rhi * scale, rlo * scale
    # Taylor series of exp(r) - 1, Horner in double-double
    shi, slo = np.full_like(rhi, _INV_FACT[-1][0]), np.full_like(rhi, _INV_FACT[-1][1])
    for chi, clo in reversed(_INV_FACT[1:-1]):
        shi, slo = dd_mul(shi, slo, rhi, rlo)
        shi, slo = dd_add(shi, slo, np.full_like(rhi, chi), np.full_like(rhi, clo))
    shi, slo = dd_mul(shi, slo, rhi, rlo)
    # (1 + s)^2 - 1 = s*(2 + s), iterated, keeps the small quantity exact
    for _ in range(_EXP_SCALE_BITS):
        thi, tlo = dd_add_d(shi, slo, 2.0)
        shi, slo = dd_mul(shi, slo, thi, tlo)
    ehi, elo = dd_add_d(shi, slo, 1.0)
    return np.ldexp(ehi, k.astype(np.int64)), np.ldexp(elo, k.astype(np.int64))


def dd_sigmoid(xhi, xlo):
    """Logistic function in double-double, branching on sign for stability."""
    xhi = np.asarray(xhi, dtype=np.float64)
    xlo = np.asarray(xlo, dtype=np.float64)
    neg = xhi < 0
    # e = exp(-|x|) in (0, 1]
    ahi = np.where(neg, xhi, -xhi)
    alo = np.where(neg, xlo, -xlo)
    ahi = np.maximum(ahi, -700.0)
    ehi, elo = dd_exp(ahi, alo)
    dhi, dlo = dd_add_d(ehi, elo, 1.0)
    ones = np.ones_like(ehi)
    zeros = np.zeros_like(ehi)
    # x >= 0: 1/(1+e); x < 0: e/(1+e)
    nhi = np.where(neg, ehi, ones)
    nlo = np.where(neg, elo, zeros)
    return dd_div(nhi, nlo, dhi, dlo)


def matvec(w, vh, vl=None):
    """Rows of ``vh (+ vl)`` times ``w.T``, i.e. (m, K) x (D, K) -> (m, D).

    Every product is formed exactly and the K terms are accumulated in
    double-double in a fixed order, so the result is reproducible bit for
    bit.  Returns the (hi, lo) pair.
    """
    w = np.asarray(w, dtype=np.float64)
    vh = np.asarray(vh, dtype=np.float64)
    m, k = vh.shape
    shi = np.zeros((m, w.shape[0]))
    slo = np.zeros((m, w.shape[0]))
    for j in range(k):
        ph, pl = two_prod(vh[:, j : j + 1], w[None, :, j])
        if vl is not None:
            pl = pl + vl[:, j : j + 1] * w[None, :, j]
        shi, slo = dd_add(shi, slo, ph, pl)
    return shi, slo


def dot(w, vh, vl=None):
    """(m, K) . (K,) -> (m,) with exact products and double-double sums."""
    hi, lo = matvec(np.asarray(w, dtype=np.float64)[None, :], vh, vl)
    return hi[:, 0], lo[:, 0]
