"""Error measurement, bounds, inequality checks, rate fits and qualification."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.stats import qmc

from .constructor import (
    CONDITIONING_FLOOR,
    DataError,
    UnivariateOperator,
    ball_points,
    build_dno,
    build_univariate,
    norm_net,
)

#: (10 e^2 - 3) / e^2, the coefficient of omega(g, 1/n) in the direct bound.
BOUND_COEFFICIENT = (10.0 * math.e**2 - 3.0) / math.e**2
MODULUS_RESOLUTION = 10_001
MODULUS_MIN_STEPS = 8
RAY_POINTS = 201
REPORT_SCHEMA = "radialnet.report"
REPORT_VERSION = 1


class ConfigurationError(ValueError):
    pass


class UndefinedRatioError(ZeroDivisionError):
    pass


# --------------------------------------------------------------------------
# grids and sup norms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 10_000
    random: int = 1_000
    seed: int = 0

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.resolution, self.random, self.seed)


@dataclass(frozen=True)
class Interval:
    a: float = -1.0
    b: float = 1.0


@dataclass(frozen=True)
class Ball:
    d: int


def _sobol_ball(d: int, count: int) -> np.ndarray:
    if d == 1:
        return np.linspace(-1.0, 1.0, count)[:, None]
    m = max(4, math.ceil(math.log2(count)))
    while True:
        pts = 2.0 * qmc.Sobol(d, scramble=False).random_base2(m) - 1.0
        pts = pts[np.sum(pts * pts, axis=1) <= 1.0]
        if pts.shape[0] >= count or m >= 22:
            break
        m += 1
    if pts.shape[0] < count:  # very high d: top up with seeded uniform points
        pts = np.vstack([pts, ball_points(d, count - pts.shape[0], seed=12345)])
    return pts[:count]


def _rays(d: int) -> np.ndarray:
    r = np.linspace(-1.0, 1.0, RAY_POINTS)[:, None]
    dirs = [np.eye(d)[-1], np.eye(d)[0], np.ones(d) / math.sqrt(d)]
    return np.vstack([r * u[None, :] for u in dirs])


@lru_cache(maxsize=32)
def _grid_cached(domain, grid: GridSpec) -> np.ndarray:
    if isinstance(domain, Interval):
        det = np.linspace(domain.a, domain.b, grid.resolution) if grid.resolution else np.empty(0)
        rnd = np.random.default_rng(grid.seed).uniform(domain.a, domain.b, grid.random)
        pts = np.concatenate([det, rnd])
    elif isinstance(domain, Ball):
        parts = []
        if grid.resolution:
            parts += [_sobol_ball(domain.d, grid.resolution), _rays(domain.d)]
        if grid.random:
            parts.append(ball_points(domain.d, grid.random, grid.seed))
        pts = np.vstack(parts) if parts else np.empty((0, domain.d))
    else:
        raise ConfigurationError(f"unknown domain {domain!r}")
    pts.setflags(write=False)
    return pts


def grid_points(domain, grid: GridSpec = GridSpec()) -> np.ndarray:
    """Deterministic points plus seeded uniform samples.

    Intervals use an even grid.  Balls use unscrambled Sobol points, three
    diameters (last axis, first axis, diagonal) and uniform ball samples.
    """
    if grid.resolution + grid.random <= 0:
        raise ConfigurationError("empty grid: resolution and random count are both zero")
    return _grid_cached(domain, grid)


def _evaluate(fn, pts) -> np.ndarray:
    return np.asarray(fn(pts), dtype=np.float64).reshape(-1)


def sup_error(target, approx, domain, grid: GridSpec = GridSpec(), with_point: bool = False):
    """max |target - approx| over the grid; optionally also the maximiser."""
    pts = grid_points(domain, grid)
    diff = np.abs(_evaluate(target, pts) - _evaluate(approx, pts))
    if not np.all(np.isfinite(diff)):
        raise DataError("non-finite value while measuring sup error")
    i = int(np.argmax(diff))
    value = float(diff[i])
    if with_point:
        return value, np.array(pts[i], copy=True)
    return value


# --------------------------------------------------------------------------
# modulus of continuity and the direct bound
# --------------------------------------------------------------------------


def _window_range(vals: np.ndarray, m: int) -> float:
    if m < 1 or vals.shape[0] < 2:
        return 0.0
    size = min(m + 1, vals.shape[0])
    hi = maximum_filter1d(vals, size=size, mode="nearest")
    lo = minimum_filter1d(vals, size=size, mode="nearest")
    return float(np.max(hi - lo))


def modulus(g: Callable, h: float, domain: tuple[float, float] = (0.0, 1.0),
            resolution: int | None = None) -> float:
    """Empirical sup_{0 < s <= h} sup_x |g(x) - g(x + s)| on [a, b].

    With ``resolution`` given, g is sampled on that even grid and every step
    that is a multiple of the spacing up to h is used, so the result is
    exactly monotone in h.  Without it the spacing is chosen as h/m with
    m >= 8 (and at least the 10^4-interval default density) so h itself is a
    grid step; the grid is laid out from both ends of the interval.
    """
    a, b = map(float, domain)
    if not h > 0:
        raise ValueError(f"modulus needs h > 0, got {h}")
    if h > (b - a) * (1 + 1e-12):
        raise ValueError(f"h={h} exceeds the interval length {b - a}")
    h = min(h, b - a)
    if resolution is not None:
        x = np.linspace(a, b, resolution)
        delta = (b - a) / (resolution - 1)
        m = int(math.floor(h / delta + 1e-9))
        if m < 1:
            raise ConfigurationError(f"h={h} is below the grid spacing {delta}")
        return _window_range(np.asarray(g(x), dtype=np.float64), m)
    m = max(MODULUS_MIN_STEPS, math.ceil(h * (MODULUS_RESOLUTION - 1) / (b - a) - 1e-9))
    delta = h / m
    count = int(math.floor((b - a) / delta + 1e-9)) + 1
    steps = delta * np.arange(count)
    fwd = np.minimum(a + steps, b)
    bwd = np.maximum(b - steps, a)[::-1]
    return max(_window_range(np.asarray(g(fwd), dtype=np.float64), m),
               _window_range(np.asarray(g(bwd), dtype=np.float64), m))


def direct_bound(tau: float, d: int, g_profile: Callable, n: int, eps: float,
                 f_sup: float) -> float:
    """2 tau + 2 d w(g, eps) + (10e^2 - 3)/e^2 w(g, 1/n) + 3 e^-n (f_sup + tau).

    The moduli are taken of the profile g on [0, 1] as the bound is stated.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    w_eps = modulus(g_profile, min(eps, 1.0))
    w_n = modulus(g_profile, 1.0 / n)
    return 2 * tau + 2 * d * w_eps + BOUND_COEFFICIENT * w_n + 3 * math.exp(-n) * (f_sup + tau)


# --------------------------------------------------------------------------
# Bernstein-type ratios and the inverse inequality
# --------------------------------------------------------------------------


def _derivative_sup(op: UnivariateOperator, grid: GridSpec) -> float:
    t = grid_points(Interval(-1.0, 1.0), grid)
    return float(np.max(np.abs(op.derivative(t))))


def bernstein_ratio(op: UnivariateOperator, grid: GridSpec = GridSpec()) -> float:
    """sup |dG*/dt| / (n max_k |beta_k|)."""
    scale = float(np.max(np.abs(op.beta)))
    if scale == 0.0:
        raise UndefinedRatioError("all coefficients are zero")
    return _derivative_sup(op, grid) / (op.n * scale)


def bernstein_smooth_ratio(op: UnivariateOperator, g_deriv_sup: float, g_sup: float,
                           grid: GridSpec = GridSpec()) -> float:
    """sup |dG*/dt| / (||g*'|| + n e^-n ||g*||)."""
    denom = g_deriv_sup + op.n * math.exp(-op.n) * g_sup
    if not denom > 0:
        raise UndefinedRatioError("degenerate denominator")
    return _derivative_sup(op, grid) / denom


def random_sign_coefficients(n: int, rng) -> np.ndarray:
    """Random +-1 values at the 2n+1 distinct nodes, laid out like node samples.

    beta_k for k < n repeats the value at -1 and beta_k for k > 3n the value
    at 1, exactly as when sampling some +-1 valued g* at the clamped nodes.
    """
    values = rng.choice([-1.0, 1.0], 2 * n + 1)
    return values[np.clip(np.arange(4 * n + 1) - n, 0, 2 * n)]


def bernstein_uniformity(n_list: Sequence[int], vectors: int = 20, seed: int = 0,
                         grid: GridSpec = GridSpec()) -> np.ndarray:
    """bernstein_ratio for each seeded random-sign family (rows) and n (columns)."""
    out = np.empty((vectors, len(n_list)))
    for v in range(vectors):
        rng = np.random.default_rng([seed, v])
        for j, n in enumerate(n_list):
            out[v, j] = bernstein_ratio(UnivariateOperator(n, random_sign_coefficients(n, rng)), grid)
    return out


def spread(values: Sequence[float]) -> float:
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0 or np.min(v) <= 0:
        return math.inf
    return float(np.max(v) / np.min(v))


@dataclass
class InverseCheck:
    n: list
    constants: list
    skipped: list
    tau: list = field(repr=False, default_factory=list)

    @property
    def spread(self) -> float:
        return spread(self.constants)


def inverse_check(g_sampler: Callable[[float], float], n_list: Sequence[int],
                  grid: GridSpec = GridSpec()) -> InverseCheck:
    """C_n = [w(g*, 1/n) + ||g*||/n] / [(1/n) sum_{k<=n} ||g* - G*_k||] on [-1, 1]."""
    ns = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])) or not ns or ns[0] < 1:
        raise ConfigurationError("n_list must be increasing positive integers")
    dom = Interval(-1.0, 1.0)
    t = grid_points(dom, grid)
    g_vals = np.array([float(g_sampler(float(x))) for x in t])
    gvec = np.vectorize(lambda x: float(g_sampler(float(x))), otypes=[float])
    g_sup = float(np.max(np.abs(g_vals)))
    taus = []
    for k in range(1, ns[-1] + 1):
        op = build_univariate(g_sampler, k)
        taus.append(float(np.max(np.abs(op(t) - g_vals))))
    cum = np.cumsum(taus)
    constants, skipped = [], []
    for n in ns:
        denom = cum[n - 1] / n
        if denom == 0.0:
            constants.append(None)
            skipped.append(n)
            continue
        num = modulus(gvec, 1.0 / n, (-1.0, 1.0)) + g_sup / n
        constants.append(float(num / denom))
    return InverseCheck(ns, constants, skipped, taus)


# --------------------------------------------------------------------------
# sweeps and rate fits
# --------------------------------------------------------------------------


@dataclass
class SweepResult:
    n: list
    errors: list
    eps: list
    bounds: list | None = None
    grid: tuple = (10_000, 1_000, 0)
    identifier: str = ""
    d: int = 0

    def __post_init__(self):
        k = len(self.n)
        if len(self.errors) != k or len(self.eps) != k or (self.bounds is not None and len(self.bounds) != k):
            raise ValueError("sweep lists must have equal length")
        if any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise ValueError("n values must increase")
        if not all(math.isfinite(e) and e >= 0 for e in self.errors):
            raise ValueError("errors must be finite and nonnegative")

    def rows(self):
        for i, n in enumerate(self.n):
            yield n, self.eps[i], self.errors[i], None if self.bounds is None else self.bounds[i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "eps", "sup_error", "bound"])
        for n, eps, err, bound in self.rows():
            w.writerow([n, repr(float(eps)), repr(float(err)), "" if bound is None else repr(float(bound))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"identifier": self.identifier, "d": self.d, "n": list(self.n),
                "eps": list(self.eps), "error": list(self.errors), "bound": self.bounds,
                "grid": list(self.grid)}

    def violations(self) -> list[int]:
        if self.bounds is None:
            return []
        return [n for n, _, e, b in self.rows() if not e <= b]


@dataclass(frozen=True)
class RateReport:
    alpha_hat: float
    log_constant: float
    r2: float
    n_range: tuple
    stderr: float = 0.0

    def band(self, width: float = 2.0) -> tuple[float, float]:
        return (self.alpha_hat - width * self.stderr, self.alpha_hat + width * self.stderr)


class ExactRepresentation(ValueError):
    """A zero error makes the log-log fit meaningless."""


def rate_fit(sweep, errors: Sequence[float] | None = None, exclude_smallest: int = 0) -> RateReport:
    """Least squares of log(error) on log(n); alpha_hat is minus the slope."""
    if errors is None:
        ns, errs = list(sweep.n), list(sweep.errors)
    else:
        ns, errs = list(sweep), list(errors)
    ns, errs = ns[exclude_smallest:], errs[exclude_smallest:]
    if len(ns) < 4:
        raise ConfigurationError(f"rate fit needs at least 4 n values, got {len(ns)}")
    e = np.asarray(errs, dtype=np.float64)
    if np.any(e <= 0):
        raise ExactRepresentation("zero error in sweep; fit skipped")
    x = np.log(np.asarray(ns, dtype=np.float64))
    res = stats.linregress(x, np.log(e))
    r2 = min(1.0, max(0.0, float(res.rvalue) ** 2))
    return RateReport(-float(res.slope), float(res.intercept), r2, (ns[0], ns[-1]),
                      float(res.stderr))


def _eps_power(p: float):
    return lambda n: float(n) ** (-p)


def run_sweep(tf, n_list: Sequence[int], eps_rule: Callable[[int], float] | None = None,
              grid: GridSpec = GridSpec(), precision: str | None = None,
              with_bound: bool = True) -> SweepResult:
    """Build the DNO of a corpus function for each n and measure its sup error."""
    eps_rule = eps_rule or _eps_power(2.0)
    dom = Ball(tf.d)
    pts = grid_points(dom, grid)
    f_vals = _evaluate(tf, pts)
    meta = tf.metadata
    errors, bounds, epss = [], [], []
    for n in n_list:
        eps = eps_rule(n)
        op = build_dno(tf, n, eps, tf.d, precision=precision, norm=_norm(tf.d, eps, precision))
        errors.append(float(np.max(np.abs(op(pts) - f_vals))))
        epss.append(eps)
        if with_bound and meta.is_radial:
            bounds.append(direct_bound(meta.tau, tf.d, meta.profile, n, eps, meta.sup_norm))
    return SweepResult(list(n_list), errors, epss, bounds if bounds else None, grid.as_tuple(),
                       tf.identifier, tf.d)


@lru_cache(maxsize=64)
def _norm(d: int, eps: float, precision: str | None):
    return norm_net(d, eps, precision=precision)


# --------------------------------------------------------------------------
# qualification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QualifyConfig:
    n_list: tuple = (8, 16, 32, 64, 128, 256)
    grid: GridSpec = GridSpec()
    radial_threshold: float = 0.1
    r2_threshold: float = 0.9
    plateau_ratio: float = 0.5
    alpha_band: float = 0.25
    exclude_smallest: int = 0
    profile_samples: int = 201
    precision: str | None = None

    def thresholds(self) -> dict:
        return {"radial_tau": self.radial_threshold, "r2": self.r2_threshold,
                "plateau_ratio": self.plateau_ratio, "alpha_band": self.alpha_band}


@dataclass
class QualificationReport:
    seed: int
    d: int
    n: list
    eps_pilot: list
    eps: list
    error: list
    radial_error: list
    bound: list
    alpha_guess: float | None
    alpha_hat: float | None
    alpha_band: list | None
    r2: float | None
    tau_hat: float
    tau_point: list
    profile_t: list
    profile_values: list
    plateau: bool
    plateau_measured: float
    verdict_smooth: str
    verdict_radial: str
    thresholds: dict
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"schema": REPORT_SCHEMA, "version": REPORT_VERSION}
        out.update(asdict(self))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        return SweepResult(self.n, self.error, self.eps, self.bound).to_csv()

    @property
    def is_radial(self) -> bool:
        return self.verdict_radial.startswith("radial-within")

    @property
    def is_qualified(self) -> bool:
        return self.verdict_smooth.startswith("qualified")


def _batch_sampler(sampler, d: int):
    """Wrap a pointwise sampler as a batch evaluator that names failing points."""
    if hasattr(sampler, "evaluator"):
        return lambda pts: np.asarray(sampler(np.asarray(pts).reshape(-1, d)), dtype=np.float64)

    def run(pts):
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, d)
        out = np.empty(pts.shape[0])
        for i, p in enumerate(pts):
            try:
                out[i] = float(sampler(p.copy()))
            except Exception as exc:  # noqa: BLE001
                raise DataError(f"sampler failed at point {p.tolist()}: {exc}") from exc
        return out

    return run


def _axis(radii: np.ndarray, d: int) -> np.ndarray:
    pts = np.zeros((radii.shape[0], d))
    pts[:, -1] = radii
    return pts


def qualify(sampler, d: int, config: QualifyConfig = QualifyConfig(),
            seed: int | None = None) -> QualificationReport:
    """Recover the axis profile, estimate the radial defect, and fit the rate.

    The DNO only samples f on the positive last axis, so it approximates the
    radial surrogate r(x) = f(0, ..., 0, ||x||) = g_f(||x||^2).  The rate is
    fitted to ||r - G_n||, the distance f - r is tau_hat, and ||f - G_n||
    feeds the plateau test.
    """
    seed = config.grid.seed if seed is None else seed
    grid = GridSpec(config.grid.resolution, config.grid.random, seed)
    ns = [int(n) for n in config.n_list]
    if min(ns) ** -2.0 <= CONDITIONING_FLOOR or max(ns) ** -2.0 <= CONDITIONING_FLOOR:
        raise ConfigurationError("n too large for the eps floor n^-2")
    f = _batch_sampler(sampler, d)

    def profile(t):
        return f(_axis(np.sqrt(np.clip(np.asarray(t, dtype=np.float64).reshape(-1), 0.0, 1.0)), d))

    pts = grid_points(Ball(d), grid)
    radii = np.linalg.norm(pts, axis=1)
    # negative-axis slice: a radial function has symmetric slices
    neg_t = np.linspace(0.0, 1.0, config.profile_samples)
    probe = np.vstack([pts, _axis(-np.sqrt(neg_t), d)])
    f_vals = f(probe)
    r_vals = f(_axis(np.linalg.norm(probe, axis=1), d))
    if not (np.all(np.isfinite(f_vals)) and np.all(np.isfinite(r_vals))):
        raise DataError("sampler returned a non-finite value")
    defect = np.abs(f_vals - r_vals)
    i = int(np.argmax(defect))
    tau_hat = float(defect[i])
    f_main, r_main = f_vals[: pts.shape[0]], r_vals[: pts.shape[0]]
    f_sup = float(np.max(np.abs(f_vals)))

    cache: dict = {}

    def sweep(eps_of):
        out_f, out_r, epss = [], [], []
        for n in ns:
            eps = eps_of(n)
            key = (n, eps)
            if key not in cache:
                op = build_dno(lambda p: float(f(p[None, :])[0]), n, eps, d,
                               precision=config.precision, norm=_norm(d, eps, config.precision))
                g = op(pts)
                cache[key] = (float(np.max(np.abs(g - f_main))), float(np.max(np.abs(g - r_main))))
            ef, er = cache[key]
            out_f.append(ef)
            out_r.append(er)
            epss.append(eps)
        return out_f, out_r, epss

    def fit(errs):
        try:
            return rate_fit(ns, errs, config.exclude_smallest)
        except ExactRepresentation:
            return None

    _, pilot_r, eps_pilot = sweep(lambda n: float(n) ** -2.0)
    pilot = fit(pilot_r)
    alpha_guess = None if pilot is None else float(min(max(pilot.alpha_hat, 0.05), 1.0))
    expo = 1.0 + (1.0 if alpha_guess is None else alpha_guess)
    err_f, err_r, eps = sweep(lambda n: max(float(n) ** -expo, float(n) ** -2.0))
    main = fit(err_r)

    # bound from the recovered profile, tabulated and linearly interpolated
    tt = np.linspace(0.0, 1.0, 4097)
    gt = profile(tt)
    g_interp = lambda t: np.interp(t, tt, gt)  # noqa: E731
    bounds = [direct_bound(tau_hat, d, g_interp, n, e, f_sup) for n, e in zip(ns, eps)]

    plateau_measured = err_f[-1] / err_f[0] if err_f[0] > 0 else 0.0
    plateau = bool(plateau_measured >= config.plateau_ratio)
    r2 = None if main is None else main.r2
    radial = tau_hat <= config.radial_threshold and r2 is not None and r2 >= config.r2_threshold
    verdict_radial = f"radial-within({tau_hat:.6g})" if radial else "non-radial"
    qualified = (
        main is not None and main.r2 >= config.r2_threshold and main.alpha_hat > 0
        and abs(main.alpha_hat - alpha_guess) <= config.alpha_band
        and main.alpha_hat <= 1.0 + config.alpha_band
    )
    verdict_smooth = f"qualified({main.alpha_hat:.6g})" if qualified else "not-qualified"
    pt = np.linspace(0.0, 1.0, config.profile_samples)
    return QualificationReport(
        seed=seed, d=d, n=ns, eps_pilot=eps_pilot, eps=eps, error=err_f, radial_error=err_r,
        bound=bounds, alpha_guess=alpha_guess,
        alpha_hat=None if main is None else main.alpha_hat,
        alpha_band=None if main is None else list(main.band()),
        r2=r2, tau_hat=tau_hat, tau_point=probe[i].tolist(),
        profile_t=pt.tolist(), profile_values=profile(pt).tolist(),
        plateau=plateau, plateau_measured=float(plateau_measured),
        verdict_smooth=verdict_smooth, verdict_radial=verdict_radial,
        thresholds=config.thresholds(),
        config={"n_list": ns, "grid": list(grid.as_tuple()),
                "exclude_smallest": config.exclude_smallest,
                "profile_samples": config.profile_samples, "precision": config.precision},
    )


# --------------------------------------------------------------------------
# Lipschitz transfer between f and its profile
# --------------------------------------------------------------------------


@dataclass
class TransferEvidence:
    passed: bool
    pairs: int
    f_violations: int
    g_violations: int
    f_constant: float
    slack: float
    max_f_excess: float
    max_g_excess: float
    max_f_excess_without_slack: float


def _pairs_in_ball(d: int, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    half = count // 2
    x = ball_points(d, count, int(rng.integers(2**31)))
    far = ball_points(d, half, int(rng.integers(2**31)))
    # the other half are close pairs, pulled back into the ball
    step = rng.standard_normal((count - half, d)) * 10.0 ** rng.uniform(-4, -1, (count - half, 1))
    near = x[half:] + step
    norms = np.linalg.norm(near, axis=1, keepdims=True)
    near = np.where(norms > 1.0, near / norms, near)
    return x, np.vstack([far, near])


def lip_transfer_check(tf, d: int | None = None, pairs: int = 1_000, seed: int = 0,
                       nu: float | None = None) -> TransferEvidence:
    """Random-pair check of both directions of the f <-> g_f Lipschitz transfer.

    |f(x) - f(x')| <= 2^a d^(a/2) c ||x - x'||^a + 2 tau + nu, and the axis
    profile g(t) = f(0, ..., 0, sqrt t) obeys |g(t) - g(t')| <= c |t - t'|^a + 2 tau + nu.
    """
    meta = getattr(tf, "metadata", None)
    if meta is None or not meta.is_radial or meta.profile is None:
        raise ConfigurationError("lip_transfer_check needs radial profile metadata")
    d = tf.d if d is None else d
    a, c, tau = meta.alpha, meta.c, meta.tau
    nu = meta.nu if nu is None else nu
    slack = 2 * tau + nu
    rng = np.random.default_rng(seed)
    x, y = _pairs_in_ball(d, pairs, rng)
    const = 2.0**a * d ** (a / 2) * c
    lhs = np.abs(tf(x) - tf(y))
    rhs0 = const * np.linalg.norm(x - y, axis=1) ** a
    f_excess = lhs - rhs0 - slack
    t = rng.uniform(0.0, 1.0, (2, pairs))
    t[1, pairs // 2:] = np.clip(t[0, pairs // 2:] + rng.standard_normal(pairs - pairs // 2) * 1e-3, 0.0, 1.0)
    axis = lambda s: _axis(np.sqrt(s), d)  # noqa: E731
    g_lhs = np.abs(tf(axis(t[0])) - tf(axis(t[1])))
    g_excess = g_lhs - c * np.abs(t[0] - t[1]) ** a - slack
    tol = 1e-12
    fv = int(np.sum(f_excess > tol))
    gv = int(np.sum(g_excess > tol))
    return TransferEvidence(fv == 0 and gv == 0, pairs, fv, gv, const, slack,
                            float(f_excess.max()), float(g_excess.max()),
                            float(np.max(lhs - rhs0)))


# --------------------------------------------------------------------------
# sequence recursions
# --------------------------------------------------------------------------


@dataclass
class SequenceCheck:
    kind: str
    form: str
    trials: int
    passed: int
    worst_ratio: float

    @property
    def all_passed(self) -> bool:
        return self.passed == self.trials


def _saturate(prev_terms, forcing, power, length, rng, start):
    """x_n = u_n * min_{k<n} ((k/n)^p x_k + forcing_k), with u_n = 1 half the time."""
    x = np.zeros(length + 1)
    x[1] = start
    shrink = np.where(rng.uniform(size=length + 1) < 0.5, rng.uniform(size=length + 1), 1.0)
    kp = np.arange(length + 1, dtype=np.float64) ** power
    for n in range(2, length + 1):
        x[n] = np.min(kp[1:n] * x[1:n] / kp[n] + forcing[1:n]) * shrink[n]
    return x


def _random_forcing(length, rng):
    scale = 10.0 ** rng.uniform(-3, 3)
    mask = rng.uniform(size=length) < rng.uniform(0.3, 1.0)
    out = np.zeros(length + 1)
    out[1:] = scale * rng.exponential(1.0, length) * mask
    return out


def coupled_constant(r: float, s: float) -> float:
    """4^r + 4^(r+s) C_rs with C_rs = 1 + 1/(s - r) >= sup_j j^(s-r) sum_{k>=j} k^(r-1-s)."""
    return 4.0**r + 4.0 ** (r + s) * (1.0 + 1.0 / (s - r))


def sequence_lemma_check(kind: str, trials: int, seed: int = 0, p: float = 1.0,
                         r: float = 1.0, s: float = 2.0, length: int = 64,
                         form: str = "corrected", zero_start: bool = False) -> SequenceCheck:
    """Generate hypothesis-satisfying sequences and test the conclusion.

    ``form="printed"`` tests the bound as usually stated,
    ``sigma_n <= 4^p n^-p sum k^(p-1) tau_k``, which needs sigma_1 = 0 (use
    ``zero_start``).  ``form="corrected"`` adds the boundary term n^-p sigma_1
    (coupled: n^-r (mu_1 + 4^r C_rs nu_1)) that the telescoping argument
    leaves behind, and holds for every start value.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if kind not in ("single", "coupled"):
        raise ValueError("kind must be 'single' or 'coupled'")
    if form not in ("printed", "corrected"):
        raise ValueError("form must be 'printed' or 'corrected'")
    if kind == "coupled" and not 0 < r < s:
        raise ValueError("coupled check needs 0 < r < s")
    rng = np.random.default_rng(seed)
    n = np.arange(1, length + 1, dtype=np.float64)
    passed = 0
    worst = 0.0
    for _ in range(trials):
        if kind == "single":
            tau = _random_forcing(length, rng)
            s1 = 0.0 if zero_start else 10.0 ** rng.uniform(-3, 3) * rng.uniform()
            seq = _saturate(None, tau, p, length, rng, s1)
            bound = 4.0**p * n**-p * np.cumsum(n ** (p - 1) * tau[1:])
            if form == "corrected":
                bound = bound + n**-p * s1
            lhs = seq[1:]
        else:
            psi = _random_forcing(length, rng)
            mu1, nu1 = (0.0, 0.0) if zero_start else 10.0 ** rng.uniform(-3, 3, 2) * rng.uniform(size=2)
            nu = _saturate(None, psi, s, length, rng, nu1)
            mu = _saturate(None, nu + psi, r, length, rng, mu1)
            bound = coupled_constant(r, s) * n**-r * np.cumsum(n ** (r - 1) * psi[1:])
            if form == "corrected":
                bound = bound + n**-r * (mu1 + 4.0**r * (1.0 + 1.0 / (s - r)) * nu1)
            lhs = mu[1:]
        ok = np.all(lhs <= bound * (1 + 1e-12) + 1e-300)
        passed += bool(ok)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(bound > 0, lhs / bound, np.where(lhs > 0, np.inf, 0.0))
        worst = max(worst, float(np.max(ratio)))
    return SequenceCheck(kind, form, trials, passed, worst)
