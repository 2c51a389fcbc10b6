"""Test functions on the unit ball with known ground truth.

Radial entries are ``f(x) = g(||x||^2) + tau * sin(5 x_1)``.  The perturbation
has sup exactly 1 on the ball (attained at x_1 = pi/10) and is not radial, so
``tau`` is the exact radial defect with respect to ``g``.
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

PROFILES = ("linear", "power", "shifted-abs", "smooth-cos")
NONRADIAL = ("coordinate", "bilinear")
AUDIT_POINTS = 10_000


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Metadata:
    is_radial: bool
    profile: Callable | None
    alpha: float
    c: float
    tau: float = 0.0
    nu: float = 0.0
    sup_norm: float = 1.0
    description: str = ""


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # keep pytest from collecting this class

    identifier: str
    d: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    metadata: Metadata
    audit: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1 and arr.shape[0] == self.d:
            return float(self.evaluator(arr[None, :])[0])
        return self.evaluator(arr.reshape(-1, self.d))


def _profile(kind: str, alpha: float):
    if kind == "linear":
        return (lambda t: np.asarray(t, dtype=np.float64) * 1.0), 1.0, 1.0
    if kind == "power":
        return (lambda t: np.abs(np.asarray(t, dtype=np.float64)) ** alpha), alpha, 1.0
    if kind == "shifted-abs":
        return (lambda t: np.abs(np.asarray(t, dtype=np.float64) - 0.5) ** alpha), alpha, 1.0
    if kind == "smooth-cos":
        return (lambda t: 0.5 * np.cos(np.pi * np.asarray(t, dtype=np.float64))), 1.0, math.pi / 2
    raise CorpusError(f"unknown profile {kind!r}; choose from {PROFILES}")


def perturbation(x: np.ndarray) -> np.ndarray:
    return np.sin(5.0 * x[:, 0])


def _audit_points(d: int, seed: int) -> np.ndarray:
    from .constructor import ball_points

    return ball_points(d, AUDIT_POINTS, seed)


def make_radial(profile: str, d: int, tau: float = 0.0, seed: int = 0,
                alpha: float = 1.0, identifier: str | None = None) -> TestFunction:
    """g(||x||^2) + tau sin(5 x_1) for one of the named profiles."""
    if d < 1:
        raise CorpusError("d must be >= 1")
    if tau < 0:
        raise CorpusError("tau must be nonnegative")
    if profile in ("power", "shifted-abs") and not 0.0 < alpha <= 1.0:
        raise CorpusError(f"alpha must lie in (0, 1], got {alpha}")
    g, a, c = _profile(profile, alpha)

    def f(x, g=g, tau=tau):
        x = np.asarray(x, dtype=np.float64)
        r2 = np.sum(x * x, axis=1)
        out = g(r2)
        if tau:
            out = out + tau * perturbation(x)
        return out

    tgrid = np.linspace(0.0, 1.0, 10001)
    sup_g = float(np.max(np.abs(g(tgrid))))
    meta = Metadata(True, g, a, c, tau, 0.0, sup_g + tau,
                    f"{profile} profile, alpha={a:g}, tau={tau:g}")
    name = identifier or f"{profile}-a{a:g}-d{d}-tau{tau:g}"
    tf = TestFunction(name, d, f, meta)
    _audit_radial(tf, seed)
    return tf


def make_nonradial(kind: str, d: int, identifier: str | None = None) -> TestFunction:
    if d < 2:
        raise CorpusError("non-radial controls need d >= 2")
    if kind == "coordinate":
        f = lambda x: np.asarray(x, dtype=np.float64)[:, 0] * 1.0  # noqa: E731
        meta = Metadata(False, None, 1.0, 1.0, sup_norm=1.0, description="f(x) = x_1")
    elif kind == "bilinear":
        f = lambda x: np.asarray(x)[:, 0] * np.asarray(x)[:, 1]  # noqa: E731
        meta = Metadata(False, None, 1.0, 1.0, sup_norm=0.5, description="f(x) = x_1 x_2")
    else:
        raise CorpusError(f"unknown non-radial kind {kind!r}; choose from {NONRADIAL}")
    return TestFunction(identifier or f"{kind}-d{d}", d, f, meta)


def slice_defect(tf: TestFunction, seed: int = 0) -> float:
    """sup over audit points of |f(x) - f(0,...,0,||x||)|."""
    x = _audit_points(tf.d, seed)
    axis = np.zeros_like(x)
    axis[:, -1] = np.linalg.norm(x, axis=1)
    return float(np.max(np.abs(tf(x) - tf(axis))))


def _audit_radial(tf: TestFunction, seed: int):
    m = tf.metadata
    x = _audit_points(tf.d, seed)
    defect = float(np.max(np.abs(tf(x) - m.profile(np.sum(x * x, axis=1)))))
    if defect > m.tau + 1e-12:
        raise CorpusError(f"{tf.identifier}: radial defect {defect} exceeds tau={m.tau}")
    rng = np.random.default_rng(seed + 1)
    t = rng.uniform(0.0, 1.0, (2, 5000))
    # include the pairs where Holder quotients peak: one end at a kink or at 0
    t = np.hstack([t, np.vstack([np.full(50, 0.5), np.linspace(0, 1, 50)]),
                   np.vstack([np.zeros(50), np.linspace(0, 1, 50)])])
    dt = np.abs(t[0] - t[1])
    keep = dt > 0
    q = np.abs(m.profile(t[0][keep]) - m.profile(t[1][keep])) / dt[keep] ** m.alpha
    quotient = float(q.max())
    if quotient > m.c + 1e-9:
        raise CorpusError(f"{tf.identifier}: Lipschitz quotient {quotient} exceeds c={m.c}")
    tf.audit.update({"tau_defect": defect, "lipschitz_quotient": quotient, "seed": seed})


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------

DEFAULT_MANIFEST = """\
# identifier        fields (key=value)
linear-radial       profile=linear d=2 alpha=1 tau=0 seed=0
power-half          profile=power d=3 alpha=0.5 tau=0 seed=0
power-half-d2       profile=power d=2 alpha=0.5 tau=0 seed=0
power-half-tau      profile=power d=2 alpha=0.5 tau=0.05 seed=0
shifted-abs         profile=shifted-abs d=2 alpha=1 tau=0 seed=0
smooth-cos          profile=smooth-cos d=2 alpha=1 tau=0 seed=0
linear-tau          profile=linear d=2 alpha=1 tau=0.05 seed=0
constant            profile=constant d=2 value=1 seed=0
coordinate          kind=coordinate d=2
bilinear            kind=bilinear d=2
"""


def make_constant(d: int, value: float = 1.0, identifier: str | None = None) -> TestFunction:
    g = lambda t, v=value: np.full(np.shape(t), v, dtype=np.float64)  # noqa: E731
    f = lambda x, v=value: np.full(np.asarray(x).shape[0], v, dtype=np.float64)  # noqa: E731
    meta = Metadata(True, g, 1.0, 0.0, 0.0, 0.0, abs(value), f"constant {value:g}")
    return TestFunction(identifier or f"constant-d{d}", d, f, meta)


def parse_manifest(text: str) -> dict[str, dict[str, str]]:
    entries: dict[str, dict[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        ident, *fields = shlex.split(line)
        spec = {}
        for item in fields:
            if "=" not in item:
                raise CorpusError(f"manifest line {lineno}: expected key=value, got {item!r}")
            key, value = item.split("=", 1)
            spec[key] = value
        if ident in entries:
            raise CorpusError(f"manifest line {lineno}: duplicate identifier {ident!r}")
        entries[ident] = spec
    return entries


def load_manifest(path: str | Path | None = None) -> dict[str, dict[str, str]]:
    text = DEFAULT_MANIFEST if path is None else Path(path).read_text()
    return parse_manifest(text)


def build_entry(identifier: str, spec: dict[str, str], d: int | None = None) -> TestFunction:
    """Instantiate a manifest entry; ``d`` overrides the manifest dimension."""
    dim = int(d if d is not None else spec.get("d", 2))
    if "kind" in spec:
        return make_nonradial(spec["kind"], dim, identifier=identifier)
    profile = spec.get("profile")
    if profile == "constant":
        return make_constant(dim, float(spec.get("value", 1.0)), identifier=identifier)
    return make_radial(
        profile, dim, tau=float(spec.get("tau", 0.0)), seed=int(spec.get("seed", 0)),
        alpha=float(spec.get("alpha", 1.0)), identifier=identifier,
    )


def radial_entries(d: int | None = None) -> list[TestFunction]:
    out = []
    for ident, spec in load_manifest().items():
        if "kind" in spec or spec.get("profile") == "constant":
            continue
        out.append(build_entry(ident, spec, d))
    return out
