import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_spsd
from ellipsoidal_sme.errors import DegenerateLeadingCoefficient, NotSpsd
from ellipsoidal_sme.numerics import (numeric_rank, pdet_rank_one, pinv_rank_one, pseudo_det,
                                      pseudo_inverse, solve_cubic, sqrt_spsd, truncate_rank)


def svd_pdet(M, rel=1e-10):
    s = np.linalg.svd(M, compute_uv=False)
    return float(np.prod(s[s > rel * s[0]])) if s[0] > 0 else 1.0


class TestRankPinvPdet:
    def test_rank_examples(self, rng):
        assert numeric_rank(np.eye(3), 1e-10) == 3
        assert numeric_rank(np.diag([2.0, 0.0, 0.0]), 1e-10) == 1
        G = rng.standard_normal((2, 5))
        assert numeric_rank(G.T @ G, 1e-10) == 2
        assert numeric_rank(np.zeros((3, 3))) == 0

    def test_pinv_examples(self, rng):
        np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3))
        np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
        M = random_spsd(rng, 6, 3)
        Mp = pseudo_inverse(M)
        np.testing.assert_allclose(M @ Mp @ M, M, atol=1e-9)
        np.testing.assert_allclose(Mp @ M @ Mp, Mp, atol=1e-9 * np.abs(Mp).max())

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 7), seed=st.integers(0, 2**32 - 1), data=st.data())
    def test_penrose_conditions(self, n, seed, data):
        r = data.draw(st.integers(0, n))
        M = random_spsd(np.random.default_rng(seed), n, r)
        Mp = pseudo_inverse(M)
        scale = max(1.0, np.abs(M).max())
        np.testing.assert_allclose(M @ Mp @ M, M, atol=1e-9 * scale)
        np.testing.assert_allclose(Mp @ M @ Mp, Mp, atol=1e-9 * max(1.0, np.abs(Mp).max()))
        np.testing.assert_allclose(M @ Mp, (M @ Mp).T, atol=1e-9)
        np.testing.assert_allclose(Mp @ M, (Mp @ M).T, atol=1e-9)

    def test_pdet_examples(self, rng):
        assert pseudo_det(np.eye(3)) == 1.0
        assert pseudo_det(np.diag([2.0, 3.0, 0.0])) == pytest.approx(6.0)
        assert pseudo_det(np.zeros((2, 2))) == 1.0
        M = random_spsd(rng, 5, 2)
        assert pseudo_det(M) == pytest.approx(svd_pdet(M), rel=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), b=st.floats(0.1, 10.0))
    def test_pdet_homogeneous_in_rank(self, seed, b):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        M = random_spsd(rng, n, int(rng.integers(1, n + 1)))
        q = numeric_rank(M)
        assert pseudo_det(b * M) == pytest.approx(b ** q * pseudo_det(M), rel=1e-9)

    def test_sqrt_examples(self, rng):
        np.testing.assert_allclose(sqrt_spsd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
        np.testing.assert_array_equal(sqrt_spsd(np.zeros((2, 2))), np.zeros((2, 2)))
        M = random_spsd(rng, 5, 3)
        S = sqrt_spsd(M)
        np.testing.assert_allclose(S @ S, M, atol=1e-10 * np.abs(M).max())
        assert numeric_rank(S, 1e-6) == 3

    def test_sqrt_rejects_indefinite(self):
        with pytest.raises(NotSpsd):
            sqrt_spsd(np.diag([1.0, -0.5]))

    def test_truncate_rank_keeps_top(self):
        M = np.diag([3.0, 1e-17, 2.0])
        Mq, pinv, null = truncate_rank(M, 2)
        np.testing.assert_allclose(Mq, np.diag([3.0, 0.0, 2.0]))
        np.testing.assert_allclose(pinv, np.diag([1 / 3, 0.0, 0.5]))
        assert null.shape == (3, 1) and abs(abs(null[1, 0]) - 1.0) < 1e-12


class TestRankOne:
    def test_examples(self):
        I2 = np.eye(2)
        assert pdet_rank_one(I2, 1.0, 2, [1.0, 0.0], 1.0, 1.0, I2) == (2.0, 2, True)
        Q = np.diag([1.0, 0.0])
        pd, q, vz = pdet_rank_one(Q, 1.0, 1, [0.0, 1.0], 2.0, 1.0, Q)
        assert (pd, q, vz) == (2.0, 2, False)
        np.testing.assert_allclose(pinv_rank_one(I2, I2, [1.0, 0.0], 1.0, 1.0), np.diag([0.5, 1.0]))
        np.testing.assert_allclose(pinv_rank_one(Q, Q, [0.0, 1.0], 1.0, 1.0), I2)

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), in_range=st.booleans())
    def test_matches_recomputation(self, seed, in_range):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 8))
        q = int(rng.integers(1, n + 1))
        Q = random_spsd(rng, n, q, cond=10.0)
        if in_range or q == n:
            r = Q @ rng.standard_normal(n)
        else:
            r = rng.standard_normal(n)
        a, b = rng.uniform(0.1, 3.0, size=2)
        Qp = pseudo_inverse(Q)
        target = b * (Q + a * np.outer(r, r))
        pd, q1, _ = pdet_rank_one(Q, pseudo_det(Q), q, r, a, b, Qp)
        assert q1 == numeric_rank(target, 1e-10)
        assert pd == pytest.approx(svd_pdet(target), rel=1e-8)
        Tp = pinv_rank_one(Q, Qp, r, a, b)
        ref = pseudo_inverse(target, 1e-10)
        np.testing.assert_allclose(Tp, ref, atol=1e-8 * np.abs(ref).max())


def poly_scale(c):
    return float(np.linalg.norm(c))


class TestCubic:
    def test_examples(self):
        r = solve_cubic(1.0, 0.0, 0.0, -1.0)
        assert r.roots == pytest.approx((1.0,)) and r.discriminant < 0
        r = solve_cubic(1.0, -6.0, 11.0, -6.0)
        assert r.roots == pytest.approx((1.0, 2.0, 3.0)) and r.discriminant > 0

    def test_degenerate_leading(self):
        with pytest.raises(DegenerateLeadingCoefficient):
            solve_cubic(0.0, 1.0, 2.0, 3.0)
        with pytest.raises(DegenerateLeadingCoefficient):
            solve_cubic(1e-300, 1.0, 2.0, 3.0)

    def test_repeated_root(self):
        r = solve_cubic(1.0, -3.0, 3.0, -1.0)
        assert all(abs(x - 1.0) < 1e-5 for x in r.roots)

    def test_tiny_leading_coefficient(self):
        # roots 1, 2 and one near -1e9
        c = np.poly([1.0, 2.0, -1e9]) / 1e9
        r = solve_cubic(*c)
        assert len(r.roots) == 3
        assert r.roots[1] == pytest.approx(1.0, rel=1e-9)
        assert r.roots[2] == pytest.approx(2.0, rel=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-100, 100, allow_subnormal=False), min_size=4, max_size=4))
    def test_residual_and_count(self, c):
        if abs(c[0]) < 1e-6:
            return
        r = solve_cubic(*c)
        for x in r.roots:
            res = abs(np.polyval(c, x))
            scale = poly_scale(c) * max(1.0, abs(x)) ** 3
            assert res <= 1e-8 * scale
        if r.discriminant > 0:
            assert len(r.roots) == 3
        elif r.discriminant < 0:
            assert len(r.roots) == 1

    def test_roots_match_numpy(self, rng):
        for _ in range(200):
            roots = np.sort(rng.uniform(-5, 5, size=3))
            c = rng.uniform(0.5, 3.0) * np.poly(roots)
            r = solve_cubic(*c)
            if r.discriminant > 0:
                np.testing.assert_allclose(r.roots, roots, atol=1e-7)
