import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_ellipsoid
from ellipsoidal_sme.correction import (CaseKind, CorrectionCriterion, Measurement,
                                        MeasurementKind, apply_fusion, beta_sigma, beta_ssal,
                                        beta_volume, classify_case, correct, correct_detailed,
                                        fusion_geometry)
from ellipsoidal_sme.errors import InconsistentMeasurement, InvalidBounds
from ellipsoidal_sme.geometry import Ellipsoid, pseudo_volume, sample, ssal
from ellipsoidal_sme.harness.oracle import containment_fraction, intersection_sampler
from ellipsoidal_sme.numerics import numeric_rank

GRID = np.linspace(0.0, 1.0, 10_001)[:-1]


def scale_after(sigma, alpha, b, gamma, delta):
    return sigma + alpha * b * (gamma ** 2 / (1 - b) - delta ** 2)


def test_measurement_validation():
    assert Measurement([1.0], -math.inf, 5.0).kind is MeasurementKind.UPPER
    assert Measurement([1.0], 2.0, 2.0).kind is MeasurementKind.HYPERPLANE
    assert Measurement([1.0], 1.0, 3.0).kind is MeasurementKind.STRIP
    assert Measurement([1.0], 1.0).kind is MeasurementKind.LOWER
    for args in (([0.0], 0.0, 1.0), ([1.0], 2.0, 1.0), ([1.0], -math.inf, math.inf),
                 ([1.0], math.nan, 1.0)):
        with pytest.raises(InvalidBounds):
            Measurement(*args)


def test_geometry_example():
    E = Ellipsoid.ball([0.0, 0.0])
    g = fusion_geometry(E, Measurement([1.0, 0.0], -math.inf, 0.0))
    assert (g.theta, g.eta, g.rho_bar, g.rho_low) == (1.0, 1.0, 1.0, 1.0)
    assert (g.y_low, g.y_bar, g.delta, g.gamma) == (-1.0, 0.0, -0.5, 0.5)
    g = fusion_geometry(Ellipsoid([0, 0], np.diag([1.0, 0.0]), 1.0), Measurement([0.0, 1.0], 0.0, 1.0))
    assert g.alpha == 0.0


def test_geometry_matches_independent_evaluation(rng):
    for _ in range(50):
        E = random_ellipsoid(rng, 3)
        f = rng.standard_normal(3)
        lo, up = np.sort(rng.normal(f @ E.center, 2.0, size=2))
        g = fusion_geometry(E, Measurement(f, lo, up))
        half = math.sqrt(E.scale * f @ E.shape @ f)
        top, bot = f @ E.center + half, f @ E.center - half
        ylo, yhi = max(lo, bot), min(up, top)
        assert g.gamma == pytest.approx((yhi - ylo) / 2)
        assert g.delta == pytest.approx((ylo + yhi) / 2 - f @ E.center)


def test_case_examples():
    E = Ellipsoid.ball([0.0, 0.0])
    f = [1.0, 0.0]

    def case(lo, up):
        m = Measurement(f, lo, up)
        return classify_case(fusion_geometry(E, m), m, E)
    assert case(-math.inf, -2.0).kind is CaseKind.EMPTY
    assert case(-math.inf, 2.0).kind is CaseKind.NOOP
    lab = case(1.0, 1.0)
    assert lab.kind is CaseKind.POINT
    np.testing.assert_allclose(lab.point, [1.0, 0.0])
    assert case(-0.5, 0.5).kind is CaseKind.FUSE


def test_beta_examples():
    assert beta_sigma(1.0, 2.0) == 0.5
    assert beta_sigma(1.0, 0.5) == 0.0
    assert beta_volume(2, 1.0, 5.0, 0.1, 1.0) == 0.0
    assert beta_volume(2, 1.0, 0.5, 0.0, 1.0) == pytest.approx(2.0 / 3.0)
    assert beta_ssal(2.0, 1.0, 1.0, 5.0, 0.0, 1.0) == 0.0


def random_fusion_inputs(rng):
    n = int(rng.integers(2, 6))
    E = random_ellipsoid(rng, n, int(rng.integers(2, n + 1)))
    f = E.shape @ rng.standard_normal(n)
    width = math.sqrt(E.scale * f @ E.shape @ f)
    c = f @ E.center
    lo, up = np.sort(rng.uniform(c - 1.5 * width, c + 1.5 * width, size=2))
    return E, Measurement(f, lo, up)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_betas_beat_grid(seed):
    rng = np.random.default_rng(seed)
    E, m = random_fusion_inputs(rng)
    g = fusion_geometry(E, m)
    if classify_case(g, m, E).kind is not CaseKind.FUSE:
        return
    s, a = E.scale, g.alpha
    sd = scale_after(s, a, GRID, g.gamma, g.delta)
    step = GRID[1]

    b = beta_sigma(g.gamma, g.delta)
    assert scale_after(s, a, b, g.gamma, g.delta) <= sd.min() + 1e-12 * s

    q = E.rank
    b = beta_volume(q, a, g.gamma, g.delta, s)
    obj = np.where(sd > 0, q * np.log(np.abs(sd)) + np.log1p(-GRID), np.inf)
    val = q * math.log(scale_after(s, a, b, g.gamma, g.delta)) + math.log1p(-b)
    assert val <= obj.min() + 1e-9 or abs(b - GRID[np.argmin(obj)]) <= step

    trP, nu = float(np.trace(E.shape)), float(g.phi @ g.phi)
    b = beta_ssal(trP, nu, a, g.gamma, g.delta, s)
    obj = np.where(sd > 0, sd * (trP - a * GRID * nu), np.inf)
    val = scale_after(s, a, b, g.gamma, g.delta) * (trP - a * b * nu)
    assert val <= obj.min() * (1 + 1e-9) or abs(b - GRID[np.argmin(obj)]) <= step


def test_apply_fusion_examples():
    E = Ellipsoid.ball([0.0, 0.0])
    m = Measurement([1.0, 0.0], 0.0, 0.0)
    g = fusion_geometry(E, m)
    assert apply_fusion(E, g, 0.0) is E
    out = apply_fusion(E, g, 1.0)
    np.testing.assert_allclose(out.center, [0.0, 0.0])
    np.testing.assert_allclose(out.shape, np.diag([0.0, 1.0]))
    assert out.scale == 1.0 and out.rank == 1


def test_correct_trivial(rng):
    E = random_ellipsoid(rng, 3)
    assert correct(E, [])[0] is E
    Ed = Ellipsoid([0, 0], np.diag([1.0, 0.0]), 1.0)
    out, labels = correct(Ed, [Measurement([0.0, 1.0], -0.5, 0.7)])
    assert out is Ed and labels[0].kind is CaseKind.NOOP


def test_policies():
    E = Ellipsoid.ball([0.0, 0.0])
    bad = [Measurement([1.0, 0.0], 5.0, 6.0)]
    out, labels = correct(E, bad, policy="skip")
    assert out is E and labels[0].kind is CaseKind.EMPTY
    with pytest.raises(InconsistentMeasurement):
        correct(E, bad, policy="abort")
    with pytest.raises(ValueError):
        correct(E, bad, policy="other")


def random_batch(rng, E, count, kinds=("strip", "upper", "lower", "hyperplane")):
    x = sample(E, 1, rng)[0]
    out, planes = [], 0
    for _ in range(count):
        f = rng.standard_normal(E.dim)
        y = float(f @ x)
        kind = kinds[rng.integers(len(kinds))]
        if kind == "hyperplane" and planes + 1 >= E.rank:
            kind = "strip"
        w = rng.uniform(0.1, 1.5)
        a = rng.random()
        if kind == "hyperplane":
            planes += 1
            out.append(Measurement(f, y, y))
        elif kind == "strip":
            out.append(Measurement(f, y - a * w, y + (1 - a) * w))
        elif kind == "upper":
            out.append(Measurement(f, -math.inf, y + a * w))
        else:
            out.append(Measurement(f, y - a * w, math.inf))
    return out


@pytest.mark.parametrize("criterion", list(CorrectionCriterion))
def test_correction_contains_intersection(criterion, rng):
    for _ in range(15):
        n = int(rng.integers(2, 6))
        E = random_ellipsoid(rng, n)
        ms = random_batch(rng, E, int(rng.integers(1, 4)))
        out, labels, outcomes = correct_detailed(E, ms, criterion, sweeps=100)
        kept = [m for m, lab in zip(ms, labels) if lab.kind is not CaseKind.EMPTY]
        assert containment_fraction(out, intersection_sampler(E, kept), 2000, rng) == 1.0
        for m, lab in zip(ms, labels):
            if lab.kind is not CaseKind.EMPTY:
                assert m.satisfied_by(out.center, 1e-9)
        if criterion is CorrectionCriterion.SIGMA:
            assert out.scale <= E.scale
        drops = sum(1 for o in outcomes if o.beta == 1.0 and o.alpha != 0.0)
        assert out.rank == E.rank - drops == numeric_rank(out.shape)


def test_strict_improvement_shrinks(rng):
    for _ in range(50):
        E, m = random_fusion_inputs(rng)
        g = fusion_geometry(E, m)
        if classify_case(g, m, E).kind is not CaseKind.FUSE or beta_sigma(g.gamma, g.delta) == 0:
            continue
        out, _ = correct(E, [m], CorrectionCriterion.SIGMA)
        assert pseudo_volume(out) < pseudo_volume(E)
        assert ssal(out) < ssal(E)


@pytest.mark.parametrize("criterion", ["volume", "ssal"])
def test_segment_cut_is_exact(criterion):
    E = Ellipsoid([0.0, 0.0], np.diag([1.0, 0.0]), 4.0, 1)
    out, _ = correct(E, [Measurement([1.0, 0.0], 0.0, 1.0)], criterion)
    np.testing.assert_allclose(out.center, [0.5, 0.0])
    assert out.scale * out.shape[0, 0] == pytest.approx(0.25)
