import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metric_knn_lab.metric_core import (
    Euclidean,
    EuclideanPoint,
    Heisenberg,
    HeisPoint,
    NestedBallSpace,
    NestedPoint,
    PointMismatchError,
    SeqPoint,
    UltrametricSeq,
    distance,
    heis_dilate,
    heis_dilate_batch,
    heis_distance4_exact,
    heis_distance_batch,
    heis_inv,
    heis_mul,
    heis_mul_batch,
    heis_norm,
    heis_norm4_exact,
    heis_norm_batch,
)

# magnitudes below 1e-100 collapse to 0 so that squares stay normal floats
coord = st.floats(-10, 10, allow_nan=False).map(lambda v: 0.0 if abs(v) < 1e-100 else v)
heis_points = st.tuples(coord, coord, coord).map(lambda t: HeisPoint(*t))


class TestPointTypes:
    def test_euclidean_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            EuclideanPoint((1.0, math.inf))

    def test_seq_rejects_empty(self):
        with pytest.raises(ValueError):
            SeqPoint(())

    def test_nested_rejects_negative(self):
        with pytest.raises(ValueError):
            NestedPoint(-1)

    def test_mismatched_variant(self):
        with pytest.raises(PointMismatchError):
            distance(Euclidean(2), EuclideanPoint((0, 0)), SeqPoint((0,)))
        with pytest.raises(PointMismatchError):
            distance(Euclidean(2), EuclideanPoint((0, 0)), EuclideanPoint((0, 0, 0)))
        with pytest.raises(PointMismatchError):
            distance(NestedBallSpace(), NestedPoint(1), HeisPoint(0, 0, 0))


class TestDistanceExamples:
    def test_euclidean_pythagorean(self):
        assert distance(Euclidean(2), EuclideanPoint((0, 0)), EuclideanPoint((3, 4))) == 5.0

    def test_seq_first_difference_at_two(self):
        assert distance(UltrametricSeq(), SeqPoint((0, 1, 1)), SeqPoint((0, 0, 1))) == 0.25

    def test_seq_equal_and_prefix(self):
        s = UltrametricSeq()
        assert s.distance(SeqPoint((1, 0)), SeqPoint((1, 0))) == 0.0
        assert s.distance(SeqPoint((1, 0)), SeqPoint((1, 0, 1))) == 0.125

    def test_heisenberg_identity(self):
        assert distance(Heisenberg(), HeisPoint(1, 0, 0), HeisPoint(1, 0, 0)) == 0.0

    def test_nested_pair(self):
        assert distance(NestedBallSpace(), NestedPoint(2), NestedPoint(5)) == 0.25

    def test_nested_to_limit_point(self):
        s = NestedBallSpace()
        assert s.distance(NestedPoint(0), NestedPoint(3)) == 0.125
        assert s.distance(NestedPoint(0), NestedPoint(0)) == 0.0


class TestHeisenbergGroup:
    def test_product_example(self):
        assert heis_mul(HeisPoint(1, 0, 0), HeisPoint(0, 1, 0)) == (1, 1, -2)

    def test_neutral_and_inverse(self):
        p = HeisPoint(0.3, -1.2, 2.5)
        assert heis_mul(HeisPoint(0, 0, 0), p) == p
        assert heis_mul(p, HeisPoint(-0.3, 1.2, -2.5)) == (0, 0, 0)
        assert heis_inv(HeisPoint(1, 2, 3)) == (-1, -2, -3)
        assert heis_inv(HeisPoint(0, 0, 0)) == (0, 0, 0)
        assert heis_mul(HeisPoint(1, 1, 0), heis_inv(HeisPoint(1, 1, 0))) == (0, 0, 0)

    @pytest.mark.parametrize("p, expected", [((3, 4, 0), 5.0), ((0, 0, 1), 1.0), ((0, 0, 0), 0.0)])
    def test_norm_values(self, p, expected):
        assert heis_norm(HeisPoint(*p)) == pytest.approx(expected, rel=1e-15)

    def test_dilation_examples(self):
        assert heis_dilate(HeisPoint(1, 0, 0), 2) == (2, 0, 0)
        assert heis_dilate(HeisPoint(0, 0, 1), 2) == (0, 0, 4)
        p = HeisPoint(0.1, 0.2, 0.3)
        assert heis_dilate(p, 1) == p

    @pytest.mark.parametrize("t", [0, -1.0])
    def test_dilation_needs_positive_factor(self, t):
        with pytest.raises(ValueError):
            heis_dilate(HeisPoint(1, 0, 0), t)
        with pytest.raises(ValueError):
            heis_dilate_batch(np.zeros((1, 3)), t)

    @given(heis_points, heis_points)
    def test_inverse_law_and_symmetric_norm(self, p, q):
        e = heis_mul(p, heis_inv(p))
        assert max(abs(v) for v in e) <= 1e-12
        assert heis_norm(heis_inv(p)) == heis_norm(p)
        assert Heisenberg().distance(p, q) == pytest.approx(Heisenberg().distance(q, p), rel=1e-12, abs=1e-300)

    @given(heis_points, st.floats(0.01, 100))
    def test_dilation_scales_norm(self, p, t):
        assert heis_norm(heis_dilate(p, t)) == pytest.approx(t * heis_norm(p), rel=1e-12, abs=1e-300)

    @given(heis_points, heis_points, heis_points)
    def test_group_law_is_associative(self, p, q, r):
        a = heis_mul(heis_mul(p, q), r)
        b = heis_mul(p, heis_mul(q, r))
        assert np.allclose(a, b, rtol=1e-12, atol=1e-9)

    def test_batch_versions_match_scalars(self, rng):
        P = rng.uniform(-5, 5, (200, 3))
        Q = rng.uniform(-5, 5, (200, 3))
        for i in range(0, 200, 17):
            p, q = HeisPoint(*P[i]), HeisPoint(*Q[i])
            assert np.allclose(heis_mul_batch(P, Q)[i], heis_mul(p, q))
            assert heis_norm_batch(P)[i] == pytest.approx(heis_norm(p))
            assert np.allclose(heis_dilate_batch(P, 1.7)[i], heis_dilate(p, 1.7))
            assert heis_distance_batch(P, Q)[i] == pytest.approx(Heisenberg().distance(p, q), rel=1e-12)

    def test_exact_fourth_powers(self):
        assert heis_norm4_exact(HeisPoint(3, 4, 0)) == 625
        p, q = HeisPoint(0.5, 0.25, -1.0), HeisPoint(-0.75, 1.0, 2.0)
        assert float(heis_distance4_exact(p, q)) == pytest.approx(Heisenberg().distance(p, q) ** 4, rel=1e-14)


class TestUltrametricSpaces:
    def test_strong_triangle_seq(self, rng):
        s = UltrametricSeq()
        X, Y, Z = (rng.integers(0, 2, (20_000, 12), dtype=np.uint8) for _ in range(3))
        X[:, :4] = Y[:, :4]  # force plenty of shared prefixes
        for i in range(0, 20_000, 997):
            dxz = s.distances_to(X[i : i + 1], Z[i])[0]
            dxy = s.distances_to(X[i : i + 1], Y[i])[0]
            dyz = s.distances_to(Y[i : i + 1], Z[i])[0]
            assert dxz <= max(dxy, dyz)

    @given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
    def test_strong_triangle_nested(self, a, b, c):
        s = NestedBallSpace()
        x, y, z = NestedPoint(a), NestedPoint(b), NestedPoint(c)
        assert s.distance(x, z) <= max(s.distance(x, y), s.distance(y, z))

    def test_nested_rule(self):
        s = NestedBallSpace()
        for n in range(1, 30):
            assert s.distance(NestedPoint(0), NestedPoint(n)) == 2.0**-n
            for m in range(1, 30):
                if m != n:
                    assert s.distance(NestedPoint(n), NestedPoint(m)) == max(2.0**-n, 2.0**-m)

    def test_closed_ball_of_next_point_sits_on_sphere(self):
        # every point of the closed ball around x_{n+1} of radius r_{n+1} is at distance exactly r_n from x_n
        s = NestedBallSpace()
        pts = np.arange(0, 66)
        for n in range(1, 65):
            inside = pts[s.compare_radius(pts, n + 1, s.r(n + 1)) <= 0]
            assert len(inside) > 0
            assert np.all(s.distances_to(inside, n) == s.r(n))

    def test_levels_survive_underflow(self):
        s = NestedBallSpace()
        far = np.array([2000, 3000, 0])
        assert list(s.compare_radius(far, 0, 1e-300)) == [-1, -1, -1]
        assert list(s.distance_keys(far, 2000)) == [-np.inf, -2000.0, -2000.0]

    def test_custom_radii_must_decrease(self):
        with pytest.raises(ValueError):
            NestedBallSpace(radius=lambda n: np.ones_like(n, dtype=float))

    def test_first_level_below(self):
        s = NestedBallSpace()
        assert s.first_level_below(0.25, closed=True) == 2
        assert s.first_level_below(0.25, closed=False) == 3
        assert s.first_level_below(0.3, closed=False) == 2


class TestBatches:
    @settings(max_examples=50)
    @given(st.lists(st.lists(st.integers(0, 3), min_size=6, max_size=6), min_size=1, max_size=10), st.lists(st.integers(0, 3), min_size=6, max_size=6))
    def test_seq_batch_matches_scalar(self, words, q):
        s = UltrametricSeq()
        batch = s.as_batch([SeqPoint(w) for w in words])
        d = s.distances_to(batch, SeqPoint(q))
        for w, v in zip(words, d):
            assert v == s.distance(SeqPoint(w), SeqPoint(q))

    def test_seq_batch_length_mismatch(self):
        s = UltrametricSeq()
        with pytest.raises(ValueError):
            s.as_batch([SeqPoint((0,)), SeqPoint((0, 1))])
        with pytest.raises(ValueError):
            s.distances_to(np.zeros((2, 3), np.uint8), SeqPoint((0, 1)))

    def test_compare_radius_signs(self):
        e = Euclidean(1)
        batch = np.array([[0.0], [1.0], [2.0]])
        assert list(e.compare_radius(batch, EuclideanPoint((0.0,)), 1.0)) == [-1, 0, 1]

    def test_point_roundtrip(self):
        for space, pts in [
            (Euclidean(2), [EuclideanPoint((1, 2)), EuclideanPoint((3, 4))]),
            (UltrametricSeq(), [SeqPoint((0, 1)), SeqPoint((1, 1))]),
            (NestedBallSpace(), [NestedPoint(0), NestedPoint(7)]),
            (Heisenberg(), [HeisPoint(1.0, 2.0, 3.0), HeisPoint(0.0, 0.0, 0.0)]),
        ]:
            batch = space.as_batch(pts)
            assert [space.point_at(batch, i) for i in range(len(pts))] == pts
            assert space.distances_to(batch, pts[0])[1] == pytest.approx(space.distance(pts[1], pts[0]))

    def test_ultrametric_flags(self):
        assert UltrametricSeq().is_ultrametric and NestedBallSpace().is_ultrametric
        assert not Euclidean(1).is_ultrametric and not Heisenberg().is_ultrametric
