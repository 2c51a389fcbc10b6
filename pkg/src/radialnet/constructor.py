"""Closed-form sigmoid network constructions.

Everything here is built without optimisation: shallow nets reproducing a
polynomial to a prescribed accuracy, the square/norm/product nets derived from
them, and the two quasi-interpolation operators built from translates of the
bell function

    G*_n(t)  = sum_k beta_k phi(n t - k + 2n),                k = 0..4n
    G_n(x)   = G*_n(2 N(x) - 1),   N ~ ||x||^2 (the norm net).

The univariate coefficients follow the clamped node layout: beta_k is the
sample at (k - 2n)/n, with the value at -1 repeated for k < n and the value
at 1 repeated for k > 3n.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import mpmath
import numpy as np

from .activation import bell, bell_derivative, default_table, sigmoid
from .netcore import LayeredNetwork, evaluate

#: Below this accuracy the square net is evaluated in double-double.
EXTENDED_PRECISION_BELOW = 1e-3
#: Accuracies at or below this are refused: the readout weights (~eps^-3)
#: leave too few bits even for double-double evaluation of the flattened net.
CONDITIONING_FLOOR = 1e-5
#: Readout weights are rounded to this many significand bits so that scaling
#: them by 2n (n < 2**12) while flattening stays exact.
READOUT_BITS = 40
FEASIBILITY_TOL = 1e-6
BELL_WINDOW = 50

_MP_PREC = 220


class ConstructionError(RuntimeError):
    """A constructed net failed its own accuracy check."""

    def __init__(self, message: str, measured_error: float, tolerance: float):
        super().__init__(f"{message}: measured {measured_error:.3e} > tolerance {tolerance:.3e}")
        self.measured_error = measured_error
        self.tolerance = tolerance


class PreconditionError(ValueError):
    pass


class ConditioningError(PreconditionError):
    """Requested accuracy is beyond what the float representation can carry."""


class DataError(RuntimeError):
    """A sampler failed or returned a non-finite value."""


# --------------------------------------------------------------------------
# polynomial nets
# --------------------------------------------------------------------------


def _round_bits(x, bits: int = READOUT_BITS) -> float:
    m, e = math.frexp(float(x))
    return math.ldexp(round(m * 2**bits), e - bits)


def _sigma_mp(b: float):
    return 1 / (1 + mpmath.exp(-mpmath.mpf(b)))


def _dsigma_mp(j: int, b: float):
    return default_table().eval_exact(j, _sigma_mp(b))


@lru_cache(maxsize=None)
def _sup_dsigma_near(j: int, center: float) -> float:
    """max |sigma^(j)| over [center - 1, center + 1]."""
    t = np.linspace(center - 1.0, center + 1.0, 40001)
    return float(np.abs(default_table().eval_poly(j, sigmoid(t))).max())


def default_expansion_point(k: int) -> float:
    """Bias used for the even-order neurons.

    sigma^(j)(0) vanishes for even j >= 2, so those neurons are shifted to
    the point of [0.1, 2] that maximises min |sigma^(j)| over the even j <= k.
    Odd-order neurons keep the unshifted form sigma(mu t).
    """
    even = [j for j in range(2, k + 1, 2)]
    if not even:
        return 0.0
    grid = np.round(np.arange(0.1, 2.0 + 1e-12, 0.01), 10)
    s = sigmoid(grid)
    table = default_table()
    score = np.min([np.abs(table.eval_poly(j, s)) for j in even], axis=0)
    return float(grid[int(np.argmax(score))])


def _neuron_bias(j: int, t0: float) -> float:
    return 0.0 if j % 2 == 1 else t0


@dataclass(frozen=True)
class PolyNetSpec:
    """Target polynomial sum_i u_i t^i, accuracy eps, expansion point t0."""

    coefficients: tuple
    eps: float
    t0: float | None = None

    def __post_init__(self):
        u = tuple(float(c) for c in self.coefficients)
        if not u:
            raise PreconditionError("polynomial needs at least one coefficient")
        object.__setattr__(self, "coefficients", u)
        if len(u) > 1 and u[-1] == 0.0:
            raise PreconditionError("leading coefficient u_k must be nonzero")
        if not 0.0 < self.eps < 1.0:
            raise PreconditionError(f"eps must lie in (0, 1), got {self.eps}")
        if self.t0 is None:
            object.__setattr__(self, "t0", default_expansion_point(self.degree))
        for j in range(1, self.degree + 1):
            b = _neuron_bias(j, self.t0)
            if abs(float(_dsigma_mp(j, b))) <= FEASIBILITY_TOL:
                raise PreconditionError(
                    f"expansion point {b} infeasible: |sigma^({j})({b})| <= {FEASIBILITY_TOL}"
                )

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coefficients)


def precision_for(eps: float) -> str:
    return "extended" if eps < EXTENDED_PRECISION_BELOW else "standard"


def _check_conditioning(eps: float):
    if eps <= CONDITIONING_FLOOR:
        raise ConditioningError(
            f"eps={eps:g} is at or below the conditioning floor {CONDITIONING_FLOOR:g}"
        )


def _poly_neurons(spec: PolyNetSpec):
    """Run the elimination recursion; returns (mu, bias, readout), constant split."""
    k = spec.degree
    with mpmath.workprec(_MP_PREC):
        u = [mpmath.mpf(c) for c in spec.coefficients]
        mus, biases, readouts = [], [], []
        share = spec.eps / max(k, 1)
        for j in range(k, 0, -1):
            if u[j] == 0:
                continue
            b = _neuron_bias(j, spec.t0)
            dj = _dsigma_mp(j, b)
            mu = min(
                1.0,
                share * (j + 1) * abs(float(dj)) / (abs(float(u[j])) * _sup_dsigma_near(j + 1, b)),
            )
            c = _round_bits(u[j] * math.factorial(j) / (mpmath.mpf(mu) ** j * dj))
            # the rounded readout is what the network holds; eliminate with it
            for i in range(j + 1):
                u[i] -= c * _dsigma_mp(i, b) * mpmath.mpf(mu) ** i / math.factorial(i)
            mus.append(mu)
            biases.append(b)
            readouts.append(c)
        # constant neuron sigma(0) = 1/2 carries the leading part of u_0,
        # the readout constant the remainder
        hi = _round_bits(2 * u[0])
        lo = float(u[0] - mpmath.mpf(hi) / 2)
    mus.append(0.0)
    biases.append(0.0)
    readouts.append(hi)
    return np.array(mus), np.array(biases), np.array(readouts), lo


def verification_points(rng_seed: int = 0, grid: int = 10_000, extra: int = 1_000) -> np.ndarray:
    t = np.linspace(-1.0, 1.0, grid)
    r = np.random.default_rng(rng_seed).uniform(-1.0, 1.0, extra)
    return np.concatenate([t, r])


def construct_poly_net(spec: PolyNetSpec, precision: str | None = None,
                       verify: bool = True) -> LayeredNetwork:
    """Shallow net with at most k+1 neurons and sup error <= eps on [-1, 1]."""
    _check_conditioning(spec.eps)
    mus, biases, readouts, lo = _poly_neurons(spec)
    precision = precision or precision_for(spec.eps)
    net = LayeredNetwork(
        1, ((mus[:, None], biases),), readouts, lo,
        meta={"kind": "poly", "eps": spec.eps, "t0": spec.t0,
              "coefficients": list(spec.coefficients), "precision": precision},
    )
    if verify:
        t = verification_points()
        err = float(np.max(np.abs(evaluate(net, t, precision=precision) - spec(t))))
        net.meta["verified_error"] = err
        if not err <= spec.eps:
            raise ConstructionError("polynomial net", err, spec.eps)
    return net


def square_net(eps: float, precision: str | None = None) -> LayeredNetwork:
    """Three-neuron approximation of t^2 on [-1, 1]."""
    return construct_poly_net(PolyNetSpec((0.0, 0.0, 1.0), eps), precision=precision)


def _stack_blocks(blocks, input_weights):
    """Place 1-D nets side by side; input_weights[b] is the (d,) input row of block b."""
    ws, bs, rs = [], [], []
    const = 0.0
    for net, row in zip(blocks, input_weights):
        (w, b), = net.layers
        ws.append(w[:, :1] * np.asarray(row, dtype=np.float64)[None, :])
        bs.append(b)
        rs.append(net.readout)
        const += net.readout_constant
    return np.vstack(ws), np.concatenate(bs), np.concatenate(rs), const


def ball_points(d: int, count: int, seed: int) -> np.ndarray:
    """Uniform points in the closed unit ball: Gaussian direction times U^(1/d) radius."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = rng.uniform(0.0, 1.0, (count, 1)) ** (1.0 / d)
    return g / norms * r


def norm_net(d: int, eps: float, precision: str | None = None,
             verify: bool = True) -> LayeredNetwork:
    """Width-3d shallow net with |N(x) - ||x||^2| <= d*eps on the unit ball."""
    if d < 1:
        raise PreconditionError("dimension must be >= 1")
    sq = square_net(eps, precision=precision)
    eye = np.eye(d)
    w, b, r, const = _stack_blocks([sq] * d, eye)
    precision = sq.meta["precision"]
    net = LayeredNetwork(d, ((w, b),), r, const,
                         meta={"kind": "norm", "eps": eps, "d": d, "precision": precision})
    if verify:
        x = np.vstack([ball_points(d, 10_000, seed=1), ball_points(d, 1_000, seed=2), np.zeros((1, d))])
        err = float(np.max(np.abs(evaluate(net, x, precision=precision) - np.sum(x * x, axis=1))))
        net.meta["verified_error"] = err
        if not err <= d * eps:
            raise ConstructionError("norm net", err, d * eps)
    return net


def product_gate(eps: float, precision: str | None = None, verify: bool = True) -> LayeredNetwork:
    """Nine-neuron approximation of t*t' on [-1, 1]^2.

    tt' = 2((t+t')/2)^2 - t^2/2 - t'^2/2, each square realised by a square net
    of accuracy eps/3 whose argument stays inside [-1, 1].
    """
    sq = square_net(eps / 3.0, precision=precision)
    precision = sq.meta["precision"]
    w, b, r, const = _stack_blocks([sq, sq, sq], [(0.5, 0.5), (1.0, 0.0), (0.0, 1.0)])
    m = sq.readout.shape[0]
    scale = np.concatenate([np.full(m, 2.0), np.full(m, -0.5), np.full(m, -0.5)])
    c = sq.readout_constant * (2.0 - 0.5 - 0.5)
    net = LayeredNetwork(2, ((w, b),), r * scale, c,
                         meta={"kind": "product", "eps": eps, "precision": precision})
    if verify:
        g = np.linspace(-1.0, 1.0, 201)
        tt, ss = np.meshgrid(g, g)
        pts = np.column_stack([tt.ravel(), ss.ravel()])
        err = float(np.max(np.abs(evaluate(net, pts, precision=precision) - pts[:, 0] * pts[:, 1])))
        net.meta["verified_error"] = err
        if not err <= eps:
            raise ConstructionError("product gate", err, eps)
    return net


# --------------------------------------------------------------------------
# nodes and operators
# --------------------------------------------------------------------------


def node_abscissae(n: int) -> np.ndarray:
    """t_k for k = 0..4n: -1 (k < n), (k-2n)/n (n <= k <= 3n), 1 (k > 3n)."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    k = np.arange(4 * n + 1)
    return np.clip((k - 2 * n) / n, -1.0, 1.0)


def make_nodes(n: int, d: int) -> np.ndarray:
    """The 4n+1 nodes (0, ..., 0, t_k) in R^d, as rows."""
    if d < 1:
        raise PreconditionError("d must be >= 1")
    nodes = np.zeros((4 * n + 1, d))
    nodes[:, -1] = node_abscissae(n)
    return nodes


def sample_points(n: int, d: int) -> np.ndarray:
    """Points on the last axis whose squared norm is (t_k + 1)/2.

    Sampling f here gives g_f((t_k+1)/2) for a radial f = g_f(||x||^2), i.e.
    the values of the rescaled profile g*(t) = g_f((t+1)/2) at the nodes.
    """
    pts = np.zeros((4 * n + 1, d))
    pts[:, -1] = np.sqrt((node_abscissae(n) + 1.0) / 2.0)
    return pts


def bell_series(u, coeffs, derivative: bool = False):
    """sum_k coeffs[k] * phi(u - k) (or phi'), for an array of arguments u.

    Terms with |u - k| > BELL_WINDOW are dropped; they are below 1.2 e^-50
    relative to max |coeffs|.
    """
    u = np.asarray(u, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    kernel = bell_derivative if derivative else bell
    K = coeffs.shape[0]
    flat = u.reshape(-1)
    out = np.zeros_like(flat)
    if K <= 2 * BELL_WINDOW + 1:
        for k in range(K):
            out += coeffs[k] * kernel(flat - k)
    else:
        base = np.floor(flat).astype(np.int64)
        for off in range(-BELL_WINDOW, BELL_WINDOW + 1):
            k = base + off
            ok = (k >= 0) & (k < K)
            kk = np.where(ok, k, 0)
            out += np.where(ok, coeffs[kk] * kernel(flat - kk), 0.0)
    return out.reshape(u.shape)


def _bell_layer(n: int, coeffs, in_weight, in_bias):
    """Hidden layer + readout realising sum_k c_k phi(s - k + 2n) as sigmoid pairs.

    ``s = in_weight . v + in_bias`` for the incoming activations ``v``; the
    neuron pair for node k is sigma(s - k + 2n + 1), sigma(s - k + 2n - 1).
    """
    K = 4 * n + 1
    k = np.arange(K, dtype=np.float64)
    shift = -k + 2 * n
    w = np.repeat(np.atleast_2d(in_weight), 2 * K, axis=0)
    b = np.empty(2 * K)
    b[0::2] = in_bias + shift + 1.0
    b[1::2] = in_bias + shift - 1.0
    r = np.empty(2 * K)
    r[0::2] = 0.5 * np.asarray(coeffs)
    r[1::2] = -0.5 * np.asarray(coeffs)
    return w, b, r


@dataclass(frozen=True)
class UnivariateOperator:
    """G*_n(t) = sum_k beta_k phi(n t - k + 2n) on [-1, 1]."""

    n: int
    beta: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=np.float64, copy=True).reshape(-1)
        if beta.shape[0] != 4 * self.n + 1:
            raise PreconditionError(f"need {4 * self.n + 1} coefficients, got {beta.shape[0]}")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    def __call__(self, t):
        return bell_series(self.n * np.asarray(t, dtype=np.float64) + 2 * self.n, self.beta)

    def derivative(self, t):
        return self.n * bell_series(
            self.n * np.asarray(t, dtype=np.float64) + 2 * self.n, self.beta, derivative=True
        )

    def to_network(self) -> LayeredNetwork:
        w, b, r = _bell_layer(self.n, self.beta, [float(self.n)], 0.0)
        return LayeredNetwork(1, ((w, b),), r, meta={"kind": "univariate", "n": self.n})


def _sample(sampler, points, workers: int = 1) -> np.ndarray:
    def one(k):
        p = points[k]
        try:
            v = float(sampler(p.copy()))
        except Exception as exc:  # noqa: BLE001 - re-raised with the node attached
            raise DataError(f"sampler failed at node {k} = {p.tolist()}: {exc}") from exc
        if not math.isfinite(v):
            raise DataError(f"sampler returned {v} at node {k} = {p.tolist()}")
        return v

    idx = range(points.shape[0])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, idx))
    else:
        vals = [one(k) for k in idx]
    return np.array(vals)


def build_univariate(sampler: Callable[[float], float], n: int, workers: int = 1) -> UnivariateOperator:
    """Coefficients are the sampler at the clamped nodes t_k."""
    t = node_abscissae(n)
    scalar = lambda p: sampler(float(p[0]))  # noqa: E731
    return UnivariateOperator(n, _sample(scalar, t[:, None], workers))


@dataclass(frozen=True)
class DnoOperator:
    """G_{n,eps}(x) = sum_k f_k phi(n (2 N(x) - 1) - k + 2n), N the norm net."""

    n: int
    eps: float
    d: int
    nodes: np.ndarray
    points: np.ndarray
    samples: np.ndarray
    norm_net: LayeredNetwork
    precision: str = "standard"
    meta: dict = field(default_factory=dict, compare=False)

    def norm(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return evaluate(self.norm_net, x, precision=self.precision)

    def univariate(self) -> UnivariateOperator:
        return UnivariateOperator(self.n, self.samples)

    def __call__(self, x):
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1 and self.d > 1 or arr.ndim == 0
        s = 2.0 * self.norm(arr.reshape(-1, self.d)) - 1.0
        out = bell_series(self.n * s + 2 * self.n, self.samples)
        return float(out[0]) if single else out

    def to_network(self) -> LayeredNetwork:
        """Two hidden layers: the 3d norm neurons, then 2(4n+1) bell neurons."""
        (w1, b1), = self.norm_net.layers
        a = self.norm_net.readout
        c = self.norm_net.readout_constant
        two_n = 2.0 * self.n
        w2, b2, r = _bell_layer(self.n, self.samples, two_n * a, two_n * c - self.n)
        return LayeredNetwork(self.d, ((w1, b1), (w2, b2)), r,
                              meta={"kind": "dno", "n": self.n, "eps": self.eps, "d": self.d})

    def record(self) -> dict:
        return {
            "n": self.n, "eps": self.eps, "d": self.d, "precision": self.precision,
            "nodes": self.nodes.tolist(), "sample_points": self.points.tolist(),
            "samples": self.samples.tolist(),
        }


def build_dno(sampler: Callable[[np.ndarray], float], n: int, eps: float, d: int,
              precision: str | None = None, workers: int = 1,
              norm: LayeredNetwork | None = None) -> DnoOperator:
    """Sample f at the 4n+1 node points and wrap the samples around a norm net."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if n >= 2**12:
        raise PreconditionError("n must be < 4096 for exact flattening")
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"eps must lie in (0, 1), got {eps}")
    _check_conditioning(eps)
    pts = sample_points(n, d)
    samples = _sample(sampler, pts, workers)
    nn = norm if norm is not None else norm_net(d, eps, precision=precision)
    return DnoOperator(n, eps, d, make_nodes(n, d), pts, samples, nn,
                       precision=nn.meta.get("precision", "standard"))


def dno_from_record(record: dict, norm: LayeredNetwork) -> DnoOperator:
    return DnoOperator(
        int(record["n"]), float(record["eps"]), int(record["d"]),
        np.array(record["nodes"], dtype=np.float64),
        np.array(record["sample_points"], dtype=np.float64),
        np.array(record["samples"], dtype=np.float64), norm,
        precision=record.get("precision", "standard"),
    )


def poly_weight_bound(coefficients: Sequence[float], eps: float, c0: float = 1.0) -> float:
    """C0' (1 + sum |u_i|)^((k+1)!) eps^-((k+1)!)."""
    k = len(coefficients) - 1
    f = math.factorial(k + 1)
    return c0 * (1.0 + sum(abs(u) for u in coefficients)) ** f * eps ** (-f)
