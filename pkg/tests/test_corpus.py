"""Corpus functions and manifest handling."""

import math

import numpy as np
import pytest

from radialnet.corpus import (
    DEFAULT_MANIFEST,
    CorpusError,
    build_entry,
    load_manifest,
    make_constant,
    make_nonradial,
    make_radial,
    parse_manifest,
    radial_entries,
    slice_defect,
)


def rotation(d, seed):
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, d)))
    return q


class TestRadial:
    @pytest.mark.parametrize("profile,alpha", [("linear", 1), ("power", 0.5), ("shifted-abs", 1),
                                               ("smooth-cos", 1)])
    def test_rotation_invariant_without_tau(self, profile, alpha):
        tf = make_radial(profile, 3, alpha=alpha)
        x = np.random.default_rng(0).uniform(-0.5, 0.5, (200, 3))
        np.testing.assert_allclose(tf(x @ rotation(3, 1).T), tf(x), atol=1e-14)

    def test_values_by_hand(self):
        assert make_radial("linear", 2)([0.6, 0.0]) == pytest.approx(0.36)
        assert make_radial("power", 2, alpha=0.5)([0.3, 0.4]) == pytest.approx(0.5)
        assert make_radial("shifted-abs", 2)([0.0, 0.0]) == pytest.approx(0.5)
        assert make_radial("smooth-cos", 2)([0.0, 1.0]) == pytest.approx(-0.5)

    def test_tau_defect_is_exact(self):
        tf = make_radial("linear", 2, tau=0.05)
        # sin(5 x_1) reaches 1 at x_1 = pi/10
        x = np.array([[math.pi / 10, 0.0]])
        assert tf(x)[0] - x[0, 0] ** 2 == pytest.approx(0.05)
        assert tf.audit["tau_defect"] <= 0.05 + 1e-12
        assert tf.audit["tau_defect"] > 0.04

    def test_audit_lipschitz(self):
        tf = make_radial("power", 2, alpha=0.5)
        assert tf.audit["lipschitz_quotient"] <= tf.metadata.c + 1e-9
        # |t|^1/2 at 0 vs t: quotient 1 is attained
        assert tf.audit["lipschitz_quotient"] == pytest.approx(1.0)

    def test_metadata(self):
        tf = make_radial("smooth-cos", 2)
        assert tf.metadata.is_radial and tf.metadata.c == pytest.approx(math.pi / 2)
        tf = make_radial("linear", 2, tau=0.1)
        assert tf.metadata.sup_norm == pytest.approx(1.1)

    def test_batch_and_point(self):
        tf = make_radial("linear", 3)
        assert isinstance(tf(np.zeros(3)), float)
        assert tf(np.zeros((4, 3))).shape == (4,)

    def test_rejections(self):
        with pytest.raises(CorpusError):
            make_radial("power", 2, alpha=1.5)
        with pytest.raises(CorpusError):
            make_radial("linear", 2, tau=-0.1)
        with pytest.raises(CorpusError):
            make_radial("nope", 2)
        with pytest.raises(CorpusError):
            make_radial("linear", 0)


class TestControls:
    def test_coordinate_not_radial(self):
        tf = make_nonradial("coordinate", 2)
        assert not tf.metadata.is_radial
        # the axis slice of x_1 vanishes, so the defect is sup |x_1| = 1
        assert 0.95 < slice_defect(tf) <= 1.0

    def test_bilinear_values(self):
        tf = make_nonradial("bilinear", 3)
        assert tf([0.5, -0.4, 0.1]) == pytest.approx(-0.2)

    def test_controls_need_two_dims(self):
        with pytest.raises(CorpusError):
            make_nonradial("coordinate", 1)
        with pytest.raises(CorpusError):
            make_nonradial("other", 2)

    def test_constant(self):
        tf = make_constant(4, 2.5)
        assert np.all(tf(np.zeros((3, 4))) == 2.5)
        assert slice_defect(tf) == 0.0

    def test_slice_defect_radial_is_zero(self):
        assert slice_defect(make_radial("linear", 3)) < 1e-15


class TestManifest:
    def test_default_entries(self):
        m = load_manifest()
        assert {"linear-radial", "power-half", "coordinate", "constant"} <= set(m)
        assert m["power-half"]["d"] == "3"

    def test_radial_entries(self):
        entries = radial_entries()
        assert len(entries) == 7
        assert all(e.metadata.is_radial for e in entries)
        assert {e.d for e in radial_entries(d=4)} == {4}

    def test_build_every_entry(self):
        for ident, spec in parse_manifest(DEFAULT_MANIFEST).items():
            tf = build_entry(ident, spec)
            assert tf.identifier == ident

    def test_parse_errors(self):
        with pytest.raises(CorpusError, match="key=value"):
            parse_manifest("a profile")
        with pytest.raises(CorpusError, match="duplicate"):
            parse_manifest("a d=2\na d=3")

    def test_file_and_comments(self, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("# header\nmine profile=linear d=1  # trailing\n\n")
        m = load_manifest(p)
        assert m == {"mine": {"profile": "linear", "d": "1"}}
        assert build_entry("mine", m["mine"])([0.5]) == pytest.approx(0.25)
