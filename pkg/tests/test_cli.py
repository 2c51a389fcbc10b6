"""Command-line runner: configuration, outputs, exit codes."""

import argparse
import json
import subprocess
import sys

import numpy as np
import pytest

from radialnet import __version__
from radialnet.cli import (
    ConfigError,
    TabulatedFunction,
    main,
    parse_eps_rule,
    parse_n_list,
    read_config,
    resolve_config,
)
from radialnet.netcore import evaluate, network_from_dict

SMALL_GRID = ["--grid-res", "1000", "--grid-random", "100"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestParsing:
    def test_n_list(self):
        assert parse_n_list("8..64") == [8, 16, 32, 64]
        assert parse_n_list("4, 6,9") == [4, 6, 9]
        assert parse_n_list("2..5,100") == [2, 4, 100]

    def test_eps_rule(self):
        assert parse_eps_rule("n^-2")(10) == pytest.approx(0.01)
        assert parse_eps_rule("0.03")(100) == 0.03

    def test_config_file(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# comment\nseed = 4\nn-list = 8,16  # inline\n")
        assert read_config(p) == {"seed": "4", "n_list": "8,16"}
        p.write_text("oops\n")
        with pytest.raises(ConfigError):
            read_config(p)

    def test_precedence(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("seed = 4\nn = 12\neps = 0.02\n")
        ns = argparse.Namespace(config=str(p), seed=None, n=20, eps=None)
        cfg = resolve_config("build", ns)
        assert (cfg["seed"], cfg["n"], cfg["eps"]) == (4, 20, 0.02)

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("seed = 1\nbogus = 2\n")
        with pytest.raises(ConfigError, match="bogus"):
            resolve_config("build", argparse.Namespace(config=str(p)))


class TestBuild:
    def test_writes_network(self, tmp_path, capsys):
        out = tmp_path / "net.json"
        code, _, err = run(["build", "--seed", "0", "--n", "8", "--eps", "0.01", "--out", str(out)], capsys)
        assert code == 0
        assert "nodes: 33" in err and "parameter_count: 546" in err
        doc = json.loads(out.read_text())
        assert doc["version"] == __version__ and doc["seed"] == 0
        net = network_from_dict(doc["network"])
        x = np.array([[0.3, 0.4], [0.0, 0.0]])
        # linear-radial profile: f = ||x||^2
        np.testing.assert_allclose(evaluate(net, x), [0.25, 0.0], atol=0.15)

    def test_seed_is_mandatory(self, capsys):
        code, _, err = run(["build", "--n", "8"], capsys)
        assert code == 2 and "seed" in err

    def test_floor_is_an_error(self, capsys):
        code, _, err = run(["build", "--seed", "0", "--eps", "1e-5"], capsys)
        assert code == 2 and "floor" in err

    def test_unknown_corpus(self, capsys):
        code, _, err = run(["build", "--seed", "0", "--corpus", "nope"], capsys)
        assert code == 2 and "nope" in err


class TestSweep:
    def test_csv(self, capsys):
        code, out, _ = run(["sweep", "--seed", "0", "--n-list", "8,16,32", *SMALL_GRID], capsys)
        assert code == 0
        body = [ln for ln in out.splitlines() if not ln.startswith("#")]
        assert body[0] == "n,eps,sup_error,bound"
        rows = [ln.split(",") for ln in body[1:]]
        assert [int(r[0]) for r in rows] == [8, 16, 32]
        assert all(float(r[2]) <= float(r[3]) for r in rows)
        assert any(ln.startswith("# config") for ln in out.splitlines())

    def test_needs_two_points(self, capsys):
        code, _, _ = run(["sweep", "--seed", "0", "--n-list", "8"], capsys)
        assert code == 2


class TestQualify:
    def test_corpus_report(self, capsys):
        code, out, err = run(["qualify", "--seed", "1", "--corpus", "linear-radial",
                              "--n-list", "8..64", *SMALL_GRID], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["verdict_radial"].startswith("radial-within")
        assert doc["alpha_hat"] == pytest.approx(1.0, abs=0.1)
        assert doc["thresholds"]["radial_tau"] == 0.1
        assert doc["seed"] == 1

    def test_table_input(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (4000, 2))
        x = x[np.linalg.norm(x, axis=1) <= 1]
        # points on the circle so the hull covers the ball
        a = np.linspace(0, 2 * np.pi, 400, endpoint=False)
        x = np.vstack([x, np.column_stack([np.cos(a), np.sin(a)])])
        table = tmp_path / "t.txt"
        np.savetxt(table, np.column_stack([x, np.sum(x * x, axis=1)]))
        code, out, _ = run(["qualify", "--seed", "0", "--table", str(table), "--n-list", "8..64",
                            *SMALL_GRID], capsys)
        assert code == 0
        doc = json.loads(out)
        assert "nearest" in doc["interpolation"]
        assert doc["tau_hat"] < 0.02

    def test_needs_input(self, capsys):
        code, _, err = run(["qualify", "--seed", "0"], capsys)
        assert code == 2 and "--corpus" in err

    def test_bad_table(self, tmp_path, capsys):
        table = tmp_path / "t.txt"
        table.write_text("0.1 0.2 x\n")
        code, _, err = run(["qualify", "--seed", "0", "--table", str(table)], capsys)
        assert code == 2 and "data" in err


class TestTabulated:
    def test_linear_and_fallback(self):
        pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
        fn = TabulatedFunction(pts, pts.sum(axis=1))
        assert fn(np.array([[0.25, 0.5]]))[0] == pytest.approx(0.75)
        assert fn(np.array([[2.0, 2.0]]))[0] == 2.0

    def test_one_dimensional(self):
        fn = TabulatedFunction(np.array([[1.0], [0.0]]), np.array([2.0, 0.0]))
        assert fn(np.array([[0.25]]))[0] == pytest.approx(0.5)


class TestVerify:
    def test_selected_suites_pass(self, tmp_path, capsys):
        out = tmp_path / "v.txt"
        code, _, _ = run(["verify", "--suites", "partition,nets,sequences", "--out", str(out)], capsys)
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# radialnet")
        assert all(ln.startswith("PASS") for ln in lines[1:])

    def test_sabotage_is_caught(self, capsys):
        code, out, _ = run(["verify", "--suites", "partition", "--sabotage", "bell-sign"], capsys)
        assert code == 1
        assert "FAIL  partition" in out

    def test_unknown_suite(self, capsys):
        code, _, _ = run(["verify", "--suites", "nope"], capsys)
        assert code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "radialnet", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
