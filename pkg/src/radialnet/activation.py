"""Sigmoid activation, its exact higher derivatives, and the bell function.

All functions accept scalars or numpy arrays and return the same shape.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

#: (e^2 - 1) / (2e): constant of the exponential envelope of the bell
#: function and of its derivative (numerically sinh(1)).
ENVELOPE = (math.e**2 - 1.0) / (2.0 * math.e)

DEFAULT_MAX_ORDER = 12


class CapabilityError(ValueError):
    """Requested something outside what a table or network supports."""


def _check_finite(t):
    arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("sigmoid domain error: non-finite input")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def sigmoid(t):
    """Logistic function 1/(1+e^-t), evaluated without overflow."""
    x = _check_finite(t)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _out(out, t)


class SigmoidDerivativeTable:
    """sigma^(j) written as an integer polynomial in sigma.

    Row ``j`` holds coefficients ``c[0..j+1]`` (ascending powers) with
    ``sigma^(j)(t) = sum_i c[i] * sigma(t)**i``.  Rows are generated from
    ``sigma' = sigma - sigma**2`` by the chain rule, so every entry is an
    exact Python int.
    """

    def __init__(self, max_order: int = DEFAULT_MAX_ORDER):
        if max_order < 0:
            raise ValueError("max_order must be nonnegative")
        self.max_order = max_order
        rows = [[0, 1]]
        for _ in range(max_order):
            prev = rows[-1]
            # d/dt P(s) = P'(s) * (s - s^2)
            dp = [i * prev[i] for i in range(1, len(prev))]
            nxt = [0] * (len(prev) + 1)
            for i, c in enumerate(dp):
                nxt[i + 1] += c
                nxt[i + 2] -= c
            rows.append(nxt)
        self.coefficients: tuple[tuple[int, ...], ...] = tuple(tuple(r) for r in rows)

    def row(self, j: int) -> tuple[int, ...]:
        if not 0 <= j <= self.max_order:
            raise CapabilityError(
                f"derivative order {j} outside table range 0..{self.max_order}"
            )
        return self.coefficients[j]

    def eval_poly(self, j: int, s):
        """Evaluate row j at sigma value(s) ``s`` (Horner)."""
        coeffs = self.row(j)
        s = np.asarray(s, dtype=np.float64)
        acc = np.zeros_like(s)
        for c in reversed(coeffs):
            acc = acc * s + float(c)
        return acc

    def eval_exact(self, j: int, s):
        """Evaluate row j at an exact rational/mpmath value ``s``."""
        acc = 0
        for c in reversed(self.row(j)):
            acc = acc * s + c
        return acc

    @lru_cache(maxsize=None)
    def sup_abs(self, j: int) -> float:
        """sup over t in R of |sigma^(j)(t)|, located on a fine grid in sigma."""
        s = np.linspace(0.0, 1.0, 200001)
        vals = np.abs(self.eval_poly(j, s))
        # refine around the discrete maximiser
        i = int(np.argmax(vals))
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
        fine = np.linspace(lo, hi, 2001)
        return float(max(vals[i], np.abs(self.eval_poly(j, fine)).max()))


_DEFAULT_TABLE = SigmoidDerivativeTable()


def default_table() -> SigmoidDerivativeTable:
    return _DEFAULT_TABLE


def sigmoid_derivative(j: int, t, table: SigmoidDerivativeTable | None = None):
    """j-th derivative of the sigmoid at t via the exact polynomial recurrence."""
    table = table or _DEFAULT_TABLE
    table.row(j)  # raises CapabilityError when out of range
    s = sigmoid(np.asarray(t, dtype=np.float64))
    return _out(table.eval_poly(j, s), t)


def bell(t):
    """phi(t) = (sigma(t+1) - sigma(t-1)) / 2.

    Uses the product form (e^2-1) / (2 e^2 (1+e^{t-1})(1+e^{-t-1})), which is
    free of cancellation in the tails.
    """
    x = np.abs(_check_finite(t))
    # (1 + e^{x-1})(1 + e^{-x-1}) with x >= 0; factor e^{x-1} out of the first
    a = np.exp(-(x - 1.0))
    b = np.exp(-x - 1.0)
    out = (math.e**2 - 1.0) / (2.0 * math.e**2) * a / ((1.0 + a) * (1.0 + b))
    return _out(out, t)


def bell_derivative(t):
    """phi'(t) in closed form.

    phi'(t) = -(e^2-1)(e^{t-1} - e^{-t-1}) / (2 e^2 (1+e^{t-1})^2 (1+e^{-t-1})^2),
    rearranged for t >= 0 as a function of e^{1-t} and extended as an odd function.
    """
    x0 = _check_finite(t)
    x = np.abs(x0)
    a = np.exp(1.0 - x)
    b = np.exp(-x - 1.0)
    mag = (
        (math.e**2 - 1.0)
        / (2.0 * math.e**2)
        * (-np.expm1(-2.0 * x))
        * a
        / ((1.0 + a) ** 2 * (1.0 + b) ** 2)
    )
    out = -np.sign(x0) * mag
    return _out(out, t)


def bell_envelope(t):
    """((e^2-1)/(2e)) e^{-|t|}: common majorant of |phi| and |phi'|."""
    x = _check_finite(t)
    return _out(ENVELOPE * np.exp(-np.abs(x)), t)


def partition_sum(t, radius: int = 60):
    """sum_{|i| <= radius} phi(t - i)."""
    x = np.asarray(_check_finite(t))
    i = np.arange(-radius, radius + 1, dtype=np.float64)
    total = bell(x[..., None] - i).sum(axis=-1)
    return _out(total, t)
