"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line with its measured values and runtime;
the lines are printed together at the end of the run (see conftest.py).
"""

import json
import time

import numpy as np
import pytest
from scipy.integrate import quad

from radialnet import analysis as an
from radialnet import corpus
from radialnet.activation import bell
from radialnet.cli import INVERSE_FUNCTIONS, main
from radialnet.constructor import UnivariateOperator, build_univariate, node_abscissae, norm_net, product_gate, square_net
from radialnet.netcore import evaluate


@pytest.fixture
def record(request):
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])
    start = time.perf_counter()

    def emit(number, title, ok, detail, limit=None, elapsed=None):
        if elapsed is None:
            elapsed = time.perf_counter() - start
        in_time = limit is None or elapsed < limit
        passed = bool(ok) and in_time
        budget = "" if limit is None else f" (limit {limit:g}s)"
        line = f"[{number:2d}] {'PASS' if passed else 'FAIL'}  {title}: {detail}; {elapsed:.2f}s{budget}"
        lines.append((number, line))
        print(line)
        assert passed, line

    return emit


ACCEPTANCE_KEY = pytest.StashKey[list]()


def test_01_partition_of_unity(record):
    t = np.random.default_rng(0).uniform(-5.0, 5.0, 1_000)
    i = np.arange(-60, 61)
    err = float(np.max(np.abs(bell(t[:, None] - i).sum(axis=1) - 1.0)))
    record(1, "partition of unity", err < 1e-10, f"max |sum phi(t-i) - 1| = {err:.2e}", limit=1)


def test_02_normalization(record):
    total = sum(quad(bell, a, a + 10.0, epsabs=1e-14, epsrel=1e-14)[0] for a in range(-60, 60, 10))
    record(2, "normalization", abs(total - 1.0) <= 1e-8, f"integral - 1 = {total - 1:.2e}", limit=1)


def test_03_square_net(record):
    t = np.linspace(-1.0, 1.0, 20_001)
    errs = {}
    for eps, prec in ((0.1, "standard"), (0.02, "standard"), (0.01, "extended")):
        net = square_net(eps, precision=prec)
        assert net.widths == (3,)
        errs[eps] = float(np.max(np.abs(evaluate(net, t, precision=prec) - t * t)))
    ok = all(e <= eps for eps, e in errs.items())
    record(3, "square net", ok, " ".join(f"eps={k}: {v:.2e}" for k, v in errs.items()), limit=5)


def test_04_norm_net(record):
    errs = {}
    for d in (1, 2, 5):
        rng = np.random.default_rng(d)
        g = rng.standard_normal((10_000, d))
        x = g / np.linalg.norm(g, axis=1, keepdims=True) * rng.uniform(0, 1, (10_000, 1)) ** (1 / d)
        net = norm_net(d, 0.01)
        errs[d] = float(np.max(np.abs(evaluate(net, x, precision=net.meta["precision"]) - np.sum(x * x, axis=1))))
    ok = all(e <= d * 0.01 for d, e in errs.items())
    record(4, "norm net", ok, " ".join(f"d={k}: {v:.2e}" for k, v in errs.items()), limit=10)


def test_05_product_gate(record):
    g = np.linspace(-1.0, 1.0, 200)
    tt, ss = np.meshgrid(g, g)
    pts = np.column_stack([tt.ravel(), ss.ravel()])
    gate = product_gate(0.05)
    err = float(np.max(np.abs(evaluate(gate, pts, precision=gate.meta["precision"]) - pts[:, 0] * pts[:, 1])))
    record(5, "product gate", err <= 0.05, f"sup error {err:.2e} on 200x200 grid", limit=5)


def test_06_direct_theorem(record):
    tf = corpus.make_radial("linear", 2)
    res = an.run_sweep(tf, [8, 16, 32, 64, 128], lambda n: float(n) ** -2)
    ratios = [e / b for _, _, e, b in res.rows()]
    detail = "error/bound " + " ".join(f"n={n}:{r:.3f}" for n, r in zip(res.n, ratios))
    record(6, "direct theorem", not res.violations(), detail, limit=120)


def test_07_rate_recovery(record):
    ns = [8, 16, 32, 64, 128, 256]
    manifest = corpus.load_manifest()
    lin = an.rate_fit(an.run_sweep(corpus.build_entry("linear-radial", manifest["linear-radial"]), ns))
    half = an.rate_fit(an.run_sweep(corpus.build_entry("power-half", manifest["power-half"]), ns))
    ok = (0.75 <= lin.alpha_hat <= 1.25 and lin.r2 >= 0.9 and 0.35 <= half.alpha_hat <= 0.65)
    detail = (f"alpha=1: alpha_hat={lin.alpha_hat:.3f} R2={lin.r2:.4f}; "
              f"alpha=1/2: alpha_hat={half.alpha_hat:.3f} R2={half.r2:.4f}")
    record(7, "rate recovery", ok, detail, limit=300)


def test_08_bernstein_uniformity(record):
    ns = [4, 8, 16, 32, 64, 128]
    table = an.bernstein_uniformity(ns, vectors=20, seed=0)
    rough = float(np.max(table.max(axis=1) / table.min(axis=1)))
    smooth = an.spread([an.bernstein_smooth_ratio(build_univariate(lambda s: s, n), 1.0, 1.0) for n in ns])
    detail = f"random-sign spread max {rough:.2f} over 20 vectors; g*(t)=t smooth-ratio spread {smooth:.2f}"
    record(8, "Bernstein uniformity", rough <= 5 and smooth <= 5, detail, limit=60)


def test_09_inverse_inequality(record):
    spreads = {name: an.inverse_check(g, [8, 16, 32, 64, 128]).spread for name, g in INVERSE_FUNCTIONS.items()}
    ok = len(spreads) == 5 and all(s <= 3 for s in spreads.values())
    record(9, "inverse inequality", ok, " ".join(f"{k}={v:.2f}" for k, v in spreads.items()), limit=120)


def test_10_qualification(record):
    manifest = corpus.load_manifest()
    tf = corpus.build_entry("power-half-tau", manifest["power-half-tau"])
    assert tf.metadata.tau == 0.05 and tf.metadata.alpha == 0.5
    rep = an.qualify(tf, tf.d, seed=0)
    ctl = corpus.make_nonradial("coordinate", 2)
    crep = an.qualify(ctl, 2, seed=0)
    radial_ok = 0.025 <= rep.tau_hat <= 0.1 and rep.alpha_hat is not None and 0.35 <= rep.alpha_hat <= 0.65
    plateau = crep.error[-1] >= 0.5 * crep.error[0]
    control_ok = plateau and crep.plateau and not crep.is_radial
    detail = (f"tau_hat={rep.tau_hat:.4f} alpha_hat={rep.alpha_hat:.3f}; control "
              f"error(128)/error(8)={crep.error[crep.n.index(128)] / crep.error[0]:.2f} verdict={crep.verdict_radial}")
    record(10, "qualification", radial_ok and control_ok, detail, limit=300)


def test_11_gradient_consistency(record):
    rng = np.random.default_rng(0)
    t = rng.uniform(-1.0, 1.0, 1_000)
    worst = 0.0
    for n in (4, 16, 64):
        for beta in (an.random_sign_coefficients(n, rng), np.sin(3 * node_abscissae(n))):
            op = UnivariateOperator(n, beta)
            h = 1e-3 / n
            # five-point central difference
            fd = (-op(t + 2 * h) + 8 * op(t + h) - 8 * op(t - h) + op(t - 2 * h)) / (12 * h)
            exact = op.derivative(t)
            worst = max(worst, float(np.max(np.abs(exact - fd) / np.abs(exact))))
    record(11, "gradient consistency", worst < 1e-6, f"max pointwise relative error {worst:.2e}", limit=5)


def test_12_sequence_lemmas(record):
    # corrected conclusions on general instances; printed ones where the first terms vanish
    start = time.perf_counter()
    runs = [
        an.sequence_lemma_check("single", 1000, seed=0),
        an.sequence_lemma_check("coupled", 1000, seed=0),
        an.sequence_lemma_check("single", 1000, seed=0, form="printed", zero_start=True),
        an.sequence_lemma_check("coupled", 1000, seed=0, form="printed", zero_start=True),
    ]
    elapsed = time.perf_counter() - start
    printed_general = [an.sequence_lemma_check(k, 1000, seed=0, form="printed") for k in ("single", "coupled")]
    detail = " ".join(f"{r.kind}/{r.form}{'/zero-start' if i >= 2 else ''}={r.passed}/{r.trials}"
                      for i, r in enumerate(runs))
    detail += "; printed form on general starts (informational): " + " ".join(
        f"{r.kind}={r.passed}/{r.trials}" for r in printed_general)
    record(12, "sequence lemmas", all(r.all_passed for r in runs), detail, limit=10, elapsed=elapsed)


def test_13_lipschitz_transfer(record):
    results = {tf.identifier: an.lip_transfer_check(tf, pairs=1_000, seed=0) for tf in corpus.radial_entries()}
    failing = [k for k, r in results.items() if not r.passed]
    detail = f"{len(results) - len(failing)}/{len(results)} radial entries pass"
    if failing:
        detail += f"; failing {failing}"
    record(13, "Lipschitz transfer", not failing and len(results) == 7, detail, limit=30)


def test_14_determinism(record, tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"q{i}.json"
        code = main(["qualify", "--seed", "7", "--corpus", "power-half-tau", "--out", str(path)])
        assert code == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    same = outs[0] == outs[1]
    seed = json.loads(outs[0])["seed"]
    record(14, "determinism", same and seed == 7,
           f"two qualify runs, {len(outs[0])} bytes each, identical={same}")
