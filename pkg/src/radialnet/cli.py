"""Command-line experiment runner: build | sweep | qualify | verify.

Every output embeds the resolved configuration, the seed and the package
version, and contains nothing run-dependent, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import analysis as an
from . import corpus
from .activation import ENVELOPE, bell, bell_derivative
from .constructor import (
    ConstructionError,
    DataError,
    PreconditionError,
    UnivariateOperator,
    build_dno,
    build_univariate,
    node_abscissae,
    norm_net,
    product_gate,
    square_net,
)
from .netcore import evaluate, network_to_dict, parameter_count

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

DEFAULTS = {
    "build": {"corpus": "linear-radial", "d": None, "n": 16, "eps": 1e-3},
    "sweep": {"corpus": "linear-radial", "d": None, "n_list": "8,16,32,64,128,256",
              "eps_rule": "n^-2"},
    "qualify": {"corpus": None, "table": None, "d": None, "n_list": "8,16,32,64,128,256",
                "radial_threshold": 0.1, "r2_threshold": 0.9, "plateau_ratio": 0.5,
                "alpha_band": 0.25, "exclude_smallest": 0},
    "verify": {"suites": "all", "sabotage": None},
}
COMMON = {"grid_res": 10_000, "grid_random": 1_000, "precision": None, "manifest": None, "out": None}
# the output path is not part of what gets embedded, so reruns to another file stay identical
NOT_EMBEDDED = ("out",)


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(value, like):
    if value is None or isinstance(value, (int, float)) and not isinstance(value, str):
        return value
    if isinstance(like, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    defaults = {**COMMON, **DEFAULTS[command], "seed": 0 if command == "verify" else None}
    cfg = dict(defaults)
    if args.config:
        for key, value in read_config(args.config).items():
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r} for {command}")
            cfg[key] = _coerce(value, defaults[key])
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    for key in ("seed", "d", "n", "grid_res", "grid_random", "exclude_smallest"):
        if cfg.get(key) is not None:
            cfg[key] = int(cfg[key])
    for key in ("eps", "radial_threshold", "r2_threshold", "plateau_ratio", "alpha_band"):
        if cfg.get(key) is not None:
            cfg[key] = float(cfg[key])
    if cfg["seed"] is None:
        raise ConfigError("a seed is mandatory (--seed or 'seed' in the config file)")
    return cfg


def parse_n_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (int(v) for v in part.split(".."))
            v = lo
            while v <= hi:
                out.append(v)
                v *= 2
        elif part:
            out.append(int(part))
    return out


def parse_eps_rule(text: str) -> Callable[[int], float]:
    """'n^-p' gives n^(-p); a bare number gives a fixed eps."""
    s = str(text).replace(" ", "")
    if s.startswith("n^"):
        p = -float(s[2:])
        return lambda n: float(n) ** (-p)
    value = float(s)
    return lambda n: value


def _grid(cfg) -> an.GridSpec:
    return an.GridSpec(cfg["grid_res"], cfg["grid_random"], cfg["seed"])


def _entry(cfg) -> corpus.TestFunction:
    entries = corpus.load_manifest(cfg.get("manifest"))
    ident = cfg["corpus"]
    if ident not in entries:
        raise ConfigError(f"unknown corpus entry {ident!r}; known: {', '.join(entries)}")
    return corpus.build_entry(ident, entries[ident], cfg.get("d"))


def _header(command: str, cfg: dict, params: dict) -> dict:
    return {"artifact": "radialnet", "version": __version__, "command": command,
            "seed": cfg["seed"],
            "config": {k: v for k, v in sorted(cfg.items()) if k not in NOT_EMBEDDED},
            "parameters": params}


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _info(msg: str):
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_build(cfg: dict) -> int:
    tf = _entry(cfg)
    n, eps = int(cfg["n"]), float(cfg["eps"])
    op = build_dno(tf, n, eps, tf.d, precision=cfg["precision"])
    net = op.to_network()
    count = parameter_count(net)
    doc = _header("build", cfg, {"n": n, "eps": eps, "d": tf.d})
    doc.update({"corpus": tf.identifier, "node_count": 4 * n + 1, "parameter_count": count,
                "norm_net_error": op.norm_net.meta.get("verified_error"),
                "operator": op.record(), "network": network_to_dict(net)})
    _write(json.dumps(doc, indent=1, allow_nan=False) + "\n", cfg.get("out"))
    _info(f"nodes: {4 * n + 1}")
    _info(f"parameter_count: {count}")
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    tf = _entry(cfg)
    ns = parse_n_list(cfg["n_list"])
    if len(ns) < 2:
        raise ConfigError("a sweep needs at least 2 n values")
    res = an.run_sweep(tf, ns, parse_eps_rule(cfg["eps_rule"]), _grid(cfg), cfg["precision"])
    head = _header("sweep", cfg, {"n": ns, "eps": res.eps, "d": tf.d})
    lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in head.items()]
    _write("\n".join(lines) + "\n" + res.to_csv(), cfg.get("out"))
    bad = res.violations()
    for n in bad:
        _info(f"bound violated at n={n}")
    return EXIT_FAIL if bad else EXIT_OK


class TabulatedFunction:
    """Scattered samples with linear interpolation and nearest-neighbour fallback."""

    method = "linear (Delaunay; np.interp for d=1) with nearest-neighbour fallback outside the hull"

    def __init__(self, points: np.ndarray, values: np.ndarray):
        from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

        self.points = np.asarray(points, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        self.d = self.points.shape[1]
        if self.d == 1:
            order = np.argsort(self.points[:, 0])
            self._x, self._y = self.points[order, 0], self.values[order]
        else:
            self._lin = LinearNDInterpolator(self.points, self.values)
            self._near = NearestNDInterpolator(self.points, self.values)

    @classmethod
    def load(cls, path: str | Path) -> "TabulatedFunction":
        rows = []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.replace(",", " ").split()])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
        if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) < 2:
            raise DataError(f"{path}: expected rows of equal length 'x_1 ... x_d value'")
        arr = np.array(rows)
        if not np.all(np.isfinite(arr)):
            raise DataError(f"{path}: non-finite entry")
        return cls(arr[:, :-1], arr[:, -1])

    def __call__(self, x):
        pts = np.asarray(x, dtype=np.float64).reshape(-1, self.d)
        if self.d == 1:
            return np.interp(pts[:, 0], self._x, self._y)
        out = self._lin(pts)
        miss = np.isnan(out)
        if np.any(miss):
            out[miss] = self._near(pts[miss])
        return out


def cmd_qualify(cfg: dict) -> int:
    interpolation = None
    if cfg.get("table"):
        fn = TabulatedFunction.load(cfg["table"])
        d = fn.d
        sampler = lambda p: float(fn(p)[0])  # noqa: E731
        name = str(cfg["table"])
        interpolation = TabulatedFunction.method
    elif cfg.get("corpus"):
        tf = _entry(cfg)
        sampler, d, name = tf, tf.d, tf.identifier
    else:
        raise ConfigError("qualify needs --corpus or --table")
    qc = an.QualifyConfig(
        n_list=tuple(parse_n_list(cfg["n_list"])), grid=_grid(cfg),
        radial_threshold=cfg["radial_threshold"], r2_threshold=cfg["r2_threshold"],
        plateau_ratio=cfg["plateau_ratio"], alpha_band=cfg["alpha_band"],
        exclude_smallest=cfg["exclude_smallest"], precision=cfg["precision"],
    )
    report = an.qualify(sampler, d, qc, seed=cfg["seed"])
    doc = _header("qualify", cfg, {"n": report.n, "eps": report.eps, "d": d})
    doc.update({"function": name, "interpolation": interpolation})
    doc.update(report.to_dict())
    _write(json.dumps(doc, indent=1, allow_nan=False) + "\n", cfg.get("out"))
    _info(f"{report.verdict_radial} {report.verdict_smooth}")
    return EXIT_OK


# --------------------------------------------------------------------------
# verification suites
# --------------------------------------------------------------------------


def suite_partition(seed: int, sabotage: str | None = None):
    from scipy.integrate import quad

    phi = (lambda t: -bell(t)) if sabotage == "bell-sign" else bell
    t = np.random.default_rng(seed).uniform(-5.0, 5.0, 1_000)
    i = np.arange(-60, 61)
    pou = float(np.max(np.abs(phi(t[:, None] - i).sum(axis=1) - 1.0)))
    integral = sum(quad(phi, a, a + 10.0, epsabs=1e-14, epsrel=1e-14)[0] for a in range(-60, 60, 10))
    grid = np.linspace(-40.0, 40.0, 8001)
    positive = bool(np.all(phi(grid) > 0))
    symmetric = float(np.max(np.abs(phi(grid) - phi(-grid))))
    # the envelope is asymptotically sharp, so allow for rounding in the ratio
    env = ENVELOPE * np.exp(-np.abs(grid)) * (1.0 + 1e-12)
    under = bool(np.all(np.abs(phi(grid)) <= env) and np.all(np.abs(bell_derivative(grid)) <= env))
    ok = pou < 1e-10 and abs(integral - 1.0) <= 1e-8 and positive and symmetric == 0.0 and under
    return ok, f"max|sum-1|={pou:.2e} integral-1={integral - 1:.2e} positive={positive} envelope={under}"


def suite_nets(seed: int, sabotage=None):
    parts, ok = [], True
    t = np.linspace(-1.0, 1.0, 20_001)
    for eps, prec in ((0.1, "standard"), (0.02, "standard"), (0.01, "extended")):
        err = float(np.max(np.abs(evaluate(square_net(eps, prec), t, prec) - t * t)))
        ok &= err <= eps
        parts.append(f"sq({eps})={err:.1e}")
    for d in (1, 2, 5):
        x = an.ball_points(d, 10_000, seed)
        nn = norm_net(d, 0.01)
        err = float(np.max(np.abs(evaluate(nn, x, nn.meta["precision"]) - np.sum(x * x, axis=1))))
        ok &= err <= d * 0.01
        parts.append(f"norm(d={d})={err:.1e}")
    g = np.linspace(-1.0, 1.0, 200)
    tt, ss = np.meshgrid(g, g)
    pts = np.column_stack([tt.ravel(), ss.ravel()])
    gate = product_gate(0.05)
    err = float(np.max(np.abs(evaluate(gate, pts, gate.meta["precision"]) - pts[:, 0] * pts[:, 1])))
    ok &= err <= 0.05
    parts.append(f"product={err:.1e}")
    return bool(ok), " ".join(parts)


def suite_direct(seed: int, sabotage=None):
    tf = corpus.make_radial("linear", 2, 0.0, seed)
    res = an.run_sweep(tf, [8, 16, 32, 64, 128], grid=an.GridSpec(seed=seed))
    worst = max(e / b for _, _, e, b in res.rows())
    return not res.violations(), f"max error/bound={worst:.3f}"


def suite_bernstein(seed: int, sabotage=None):
    ns = [4, 8, 16, 32, 64, 128]
    table = an.bernstein_uniformity(ns, 20, seed)
    rough = float(np.max(table.max(axis=1) / table.min(axis=1)))
    smooth = [an.bernstein_smooth_ratio(build_univariate(lambda s: s, n), 1.0, 1.0) for n in ns]
    sm = an.spread(smooth)
    return rough <= 5 and sm <= 5, f"random-sign spread={rough:.2f} smooth spread={sm:.2f}"


def suite_gradient(seed: int, sabotage=None):
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1.0, 1.0, 1_000)
    worst = 0.0
    for n in (4, 16, 64):
        for beta in (an.random_sign_coefficients(n, rng), np.sin(3 * node_abscissae(n))):
            op = UnivariateOperator(n, beta)
            h = 1e-3 / n
            fd = (-op(t + 2 * h) + 8 * op(t + h) - 8 * op(t - h) + op(t - 2 * h)) / (12 * h)
            exact = op.derivative(t)
            worst = max(worst, float(np.max(np.abs(exact - fd)) / np.max(np.abs(exact))))
    return worst < 1e-6, f"max relative error={worst:.1e}"


INVERSE_FUNCTIONS = {
    "linear": lambda t: (t + 1) / 2,
    "power-half": lambda t: math.sqrt((t + 1) / 2),
    "shifted-abs": lambda t: abs(t / 2),
    "smooth-cos": lambda t: 0.5 * math.cos(math.pi * (t + 1) / 2),
    "constant": lambda t: 1.0,
}


def suite_inverse(seed: int, sabotage=None):
    spreads = {}
    for name, g in INVERSE_FUNCTIONS.items():
        spreads[name] = an.inverse_check(g, [8, 16, 32, 64, 128], an.GridSpec(seed=seed)).spread
    ok = all(s <= 3 for s in spreads.values())
    return ok, " ".join(f"{k}={v:.2f}" for k, v in spreads.items())


def suite_sequences(seed: int, sabotage=None):
    runs = [
        an.sequence_lemma_check("single", 1000, seed, p=1.0),
        an.sequence_lemma_check("single", 1000, seed, p=1.0, form="printed", zero_start=True),
        an.sequence_lemma_check("coupled", 1000, seed, r=1.0, s=2.0),
        an.sequence_lemma_check("coupled", 1000, seed, r=1.0, s=2.0, form="printed", zero_start=True),
    ]
    ok = all(r.all_passed for r in runs)
    return ok, " ".join(f"{r.kind}/{r.form}={r.passed}/{r.trials}" for r in runs)


def suite_transfer(seed: int, sabotage=None):
    results = []
    for tf in corpus.radial_entries():
        results.append((tf.identifier, an.lip_transfer_check(tf, pairs=1_000, seed=seed)))
    ok = all(r.passed for _, r in results)
    bad = [k for k, r in results if not r.passed]
    return ok, f"{len(results) - len(bad)}/{len(results)} entries" + (f" failing: {bad}" if bad else "")


SUITES = {
    "partition": suite_partition,
    "nets": suite_nets,
    "direct": suite_direct,
    "bernstein": suite_bernstein,
    "gradient": suite_gradient,
    "inverse": suite_inverse,
    "sequences": suite_sequences,
    "transfer": suite_transfer,
}


def cmd_verify(cfg: dict) -> int:
    names = list(SUITES) if cfg["suites"] in (None, "all") else [
        s.strip() for s in str(cfg["suites"]).split(",") if s.strip()]
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; choose from {list(SUITES)}")
    rows, failed = [], False
    for name in names:
        start = time.perf_counter()
        ok, detail = SUITES[name](cfg["seed"], cfg.get("sabotage"))
        failed |= not ok
        rows.append(f"{'PASS' if ok else 'FAIL'}  {name:<10} {detail}")
        print(rows[-1], f"({time.perf_counter() - start:.1f}s)", file=sys.stderr)
    text = "\n".join([f"# radialnet {__version__} verify seed={cfg['seed']}"] + rows) + "\n"
    _write(text, cfg.get("out"))
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"build": cmd_build, "sweep": cmd_sweep, "qualify": cmd_qualify, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radialnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"radialnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--grid-res", dest="grid_res", type=int)
        p.add_argument("--grid-random", dest="grid_random", type=int)
        p.add_argument("--precision", choices=("standard", "extended"))
        p.add_argument("--config", help="flat key = value file; explicit flags win")
        p.add_argument("--manifest", help="corpus manifest (default: built-in)")

    p = sub.add_parser("build", help="build a DNO and write it in the network schema")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)

    p = sub.add_parser("sweep", help="sup error and direct bound over n (CSV)")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--d", type=int)
    p.add_argument("--n-list", dest="n_list", help="e.g. 8,16,32 or 8..256")
    p.add_argument("--eps-rule", dest="eps_rule", help="'n^-2' or a fixed value")

    p = sub.add_parser("qualify", help="rate-based smoothness/radialness report (JSON)")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--table", help="file of rows 'x_1 ... x_d value'")
    p.add_argument("--d", type=int)
    p.add_argument("--n-list", dest="n_list")
    p.add_argument("--radial-threshold", dest="radial_threshold", type=float)
    p.add_argument("--r2-threshold", dest="r2_threshold", type=float)
    p.add_argument("--plateau-ratio", dest="plateau_ratio", type=float)
    p.add_argument("--alpha-band", dest="alpha_band", type=float)
    p.add_argument("--exclude-smallest", dest="exclude_smallest", type=int)

    p = sub.add_parser("verify", help="run the property suites")
    common(p)
    p.add_argument("--suites", help=f"comma list from {','.join(SUITES)} (default all)")
    p.add_argument("--sabotage", choices=("bell-sign",), help="negative-control hook")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except ConstructionError as exc:
        print(f"error: construction failed: {exc} (measured {exc.measured_error:.3e})", file=sys.stderr)
    except (PreconditionError, ConfigError, an.ConfigurationError, corpus.CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
