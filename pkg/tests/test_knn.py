import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metric_knn_lab.knn import (
    LabeledPoint,
    LabeledSample,
    NeighborSet,
    TieBreakPolicy,
    eta_n,
    eta_n_batch,
    eta_star_extended,
    eta_star_n,
    inside_count_fraction,
    neighbors_batch,
    predict,
    predict_batch,
    r_knn,
    select_neighbors,
    vote,
)
from metric_knn_lab.measure_models import (
    LearningProblem,
    UniformCubeModel,
    constant_eta,
    coordinate_eta,
    dirac_model,
)
from metric_knn_lab.metric_core import Euclidean, EuclideanPoint, Heisenberg, NestedBallSpace, UltrametricSeq

LINE = Euclidean(1)
POLICIES = list(TieBreakPolicy)


def line_sample(xs, y=None, z=None):
    n = len(xs)
    y = [0] * n if y is None else y
    z = [0.5] * n if z is None else z
    return LabeledSample(LINE, np.asarray(xs, float).reshape(-1, 1), y, z)


ORIGIN = EuclideanPoint((0.0,))


class TestSampleTypes:
    def test_labeled_point_validation(self):
        with pytest.raises(ValueError):
            LabeledPoint(ORIGIN, 2, 0.5)
        with pytest.raises(ValueError):
            LabeledPoint(ORIGIN, 1, 1.5)

    def test_sample_validation_and_readonly(self):
        with pytest.raises(ValueError):
            line_sample([0, 1], y=[0])
        with pytest.raises(ValueError):
            line_sample([0, 1], z=[0.1, -0.1])
        s = line_sample([0, 1])
        with pytest.raises(ValueError):
            s.y[0] = 1

    def test_from_points_roundtrip(self):
        pts = [LabeledPoint(EuclideanPoint((v,)), i % 2, v / 10) for i, v in enumerate([1.0, 2.0, 3.0])]
        s = LabeledSample.from_points(LINE, pts)
        assert [s[i] for i in range(3)] == pts
        assert len(s.prefix(2)) == 2

    def test_csv_roundtrip(self, tmp_path, rng):
        s = LabeledSample.draw(LearningProblem(UniformCubeModel(2), coordinate_eta), 20, rng)
        path = tmp_path / "s.csv"
        s.to_csv(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.array_equal(data[:, :2], s.X)
        assert np.array_equal(data[:, 2], s.y)
        assert np.array_equal(data[:, 3], s.z)


class TestRknn:
    def test_order_statistic(self):
        assert r_knn(line_sample([1, 2, 3]), ORIGIN, 2) == 2.0

    def test_total_tie(self):
        s = line_sample([5, -5, 5, -5])
        for k in range(1, 5):
            assert r_knn(s, ORIGIN, k) == 5.0

    def test_query_in_sample(self):
        assert r_knn(line_sample([0.25, 0.0, 1.0]), ORIGIN, 1) == 0.0

    @pytest.mark.parametrize("k", [0, 4])
    def test_k_out_of_range(self, k):
        s = line_sample([1, 2, 3])
        with pytest.raises(ValueError):
            r_knn(s, ORIGIN, k)
        with pytest.raises(ValueError):
            select_neighbors(s, ORIGIN, k)


class TestSelection:
    def test_nearest_without_ties(self):
        s = line_sample([3.0, -0.5, 2.0, 1.0])
        for p in POLICIES:
            assert set(select_neighbors(s, ORIGIN, 2, p, 0.3).indices) == {1, 3}

    def test_by_index_on_tie(self):
        s = line_sample([1, -1, 1])
        assert select_neighbors(s, ORIGIN, 2, TieBreakPolicy.BY_INDEX) == NeighborSet((0, 1), 1.0)

    def test_uniform_random_takes_smallest_z(self):
        s = line_sample([1, 1, 1], z=[0.9, 0.1, 0.5])
        assert set(select_neighbors(s, ORIGIN, 2, TieBreakPolicy.UNIFORM_RANDOM).indices) == {1, 2}

    def test_dgkl_takes_closest_z(self):
        s = line_sample([1, 1, 1, 1], z=[0.9, 0.1, 0.5, 0.45])
        assert select_neighbors(s, ORIGIN, 2, TieBreakPolicy.DGKL, query_z=0.6).indices == (2, 3)
        assert select_neighbors(s, ORIGIN, 2, TieBreakPolicy.DGKL, query_z=0.0).indices == (1, 3)

    def test_dgkl_secondary_key_is_index(self):
        s = line_sample([1, 1, 1], z=[0.75, 0.25, 0.75])
        assert select_neighbors(s, ORIGIN, 2, TieBreakPolicy.DGKL, query_z=0.5).indices == (0, 1)

    def test_policy_strings(self):
        s = line_sample([1, 1], z=[0.9, 0.1])
        assert select_neighbors(s, ORIGIN, 1, "uniform-random").indices == (1,)
        with pytest.raises(ValueError):
            select_neighbors(s, ORIGIN, 1, "random-permutation")

    @settings(max_examples=150)
    @given(
        st.lists(st.integers(0, 4), min_size=1, max_size=40),
        st.integers(1, 40),
        st.sampled_from(POLICIES),
        st.floats(0, 1),
        st.integers(0, 2**32 - 1),
    )
    def test_neighbor_set_contract(self, dists, k, policy, qz, seed):
        # integer distances produce heavy ties
        k = min(k, len(dists))
        z = np.random.default_rng(seed).random(len(dists))
        s = line_sample(dists, z=z)
        nb = select_neighbors(s, ORIGIN, k, policy, qz)
        d = np.asarray(dists, float)
        r = r_knn(s, ORIGIN, k)
        sel = np.array(nb.indices)
        assert len(set(nb.indices)) == k
        assert nb.radius == r and d[sel].max() == r
        assert set(np.flatnonzero(d < r)) <= set(nb.indices)
        tied = np.flatnonzero(d == r)
        chosen = [i for i in sel if d[i] == r]
        key = {TieBreakPolicy.BY_INDEX: lambda i: (0.0, i), TieBreakPolicy.UNIFORM_RANDOM: lambda i: (z[i], i), TieBreakPolicy.DGKL: lambda i: (abs(z[i] - qz), i)}[policy]
        assert sorted(chosen, key=key) == sorted(tied, key=key)[: len(chosen)]

    @settings(max_examples=50)
    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=30, unique=True), st.integers(0, 2**32 - 1))
    def test_policies_agree_off_ties(self, xs, seed):
        s = line_sample([abs(v) + i * 1e-3 for i, v in enumerate(xs)], z=np.random.default_rng(seed).random(len(xs)))
        k = max(1, len(xs) // 2)
        sets = {frozenset(select_neighbors(s, ORIGIN, k, p, 0.7).indices) for p in POLICIES}
        assert len(sets) == 1

    @pytest.mark.parametrize("space_name", ["line", "plane", "seq", "nested", "heis"])
    def test_batch_matches_single(self, space_name, rng):
        n = 60
        if space_name == "line":
            space, X, Q = LINE, rng.integers(0, 5, (n, 1)).astype(float), rng.integers(0, 5, (7, 1)).astype(float)
        elif space_name == "plane":
            space, X, Q = Euclidean(2), rng.integers(0, 3, (n, 2)).astype(float), rng.integers(0, 3, (7, 2)).astype(float)
        elif space_name == "seq":
            space, X, Q = UltrametricSeq(), rng.integers(0, 2, (n, 6), dtype=np.uint8), rng.integers(0, 2, (7, 6), dtype=np.uint8)
        elif space_name == "nested":
            space, X, Q = NestedBallSpace(), rng.integers(0, 8, n), rng.integers(0, 8, 7)
        else:
            space, X, Q = Heisenberg(), rng.integers(-1, 2, (n, 3)).astype(float), rng.integers(-1, 2, (7, 3)).astype(float)
        s = LabeledSample(space, X, rng.integers(0, 2, n), rng.random(n))
        qz = rng.random(len(Q))
        for p in POLICIES:
            for k in (1, 5, 30):
                batch = neighbors_batch(s, Q, k, p, qz)
                for j in range(len(Q)):
                    assert tuple(batch[j]) == select_neighbors(s, Q[j], k, p, qz[j]).indices
                assert list(predict_batch(s, Q, k, p, qz)) == [predict(s, Q[j], k, p, qz[j]) for j in range(len(Q))]
                assert np.allclose(eta_n_batch(s, Q, k, p, qz), [eta_n(s, Q[j], k, p, qz[j]) for j in range(len(Q))])


class TestVote:
    @pytest.mark.parametrize("labels, out", [((1, 1, 0), 1), ((1, 0), 1), ((0, 0, 0), 0), ((0, 1, 0), 0)])
    def test_vote(self, labels, out):
        assert vote(labels) == out

    def test_eta_n_examples(self):
        assert eta_n(line_sample([1, 2, 3, 4], y=[1, 1, 0, 0]), ORIGIN, 4) == 0.5
        assert eta_n(line_sample([1, 2], y=[1, 1]), ORIGIN, 2) == 1.0
        assert eta_n(line_sample([1, 2], y=[0, 1]), ORIGIN, 1) == 0.0
        assert predict(line_sample([1, 2], y=[1, 0]), ORIGIN, 2) == 1


class TestEtaStar:
    def test_empty_ball(self):
        # r_{1/3}(0.5) = 1/6 under the uniform law, far from every sample point
        s = line_sample([10, 11, 12], y=[1, 1, 1])
        assert eta_star_n(s, UniformCubeModel(1), EuclideanPoint((0.5,)), 1) == 0.0

    def test_k_inside_all_ones(self):
        u = UniformCubeModel(1)
        s = line_sample([0.5, 0.51, 0.49, 0.9, 0.1, 0.95, 0.05, 0.8, 0.2, 0.99], y=[1] * 10)
        # r_{0.3}(0.5) = 0.15 so exactly 3 points lie strictly inside
        assert eta_star_n(s, u, EuclideanPoint((0.5,)), 3) == 1.0

    def test_seeded_uniform_example(self):
        u = UniformCubeModel(1)
        s = LabeledSample.draw(LearningProblem(u, coordinate_eta), 100, np.random.default_rng(3))
        x = s.X[:, 0]
        expected = np.sum(s.y[(x > 0.45) & (x < 0.55)]) / 10
        assert eta_star_n(s, u, EuclideanPoint((0.5,)), 10) == pytest.approx(expected)

    def test_extended_reduces_to_plain(self, rng):
        u = UniformCubeModel(1)
        s = LabeledSample.draw(LearningProblem(u, coordinate_eta), 200, rng)
        for x in (0.1, 0.5, 0.77):
            assert eta_star_extended(s, u, EuclideanPoint((x,)), 0.3, 20) == eta_star_n(s, u, EuclideanPoint((x,)), 20)

    def test_extended_on_single_atom(self, rng):
        m = dirac_model(LINE, ORIGIN)
        n, k = 4000, 400
        pr = LearningProblem(m, constant_eta(0.3))
        s = LabeledSample.draw(pr, n, rng)
        z = 0.4
        val = eta_star_extended(s, m, ORIGIN, z, k)
        band = np.abs(s.z - z) <= 0.05
        assert band.sum() == pytest.approx(k, rel=0.15)
        assert val == pytest.approx(s.y[band].sum() / k)

    def test_extended_empty(self):
        s = line_sample([10, 11], y=[1, 1])
        assert eta_star_extended(s, UniformCubeModel(1), EuclideanPoint((0.5,)), 0.5, 1) == 0.0

    def test_eta_bound_identity(self, rng):
        # with exactly k points in the closed kNN ball, |eta* - eta_n| = |inside/k - 1| for all-ones labels
        u = UniformCubeModel(1)
        s = LabeledSample.draw(LearningProblem(u, constant_eta(1.0)), 500, rng)
        for x in rng.random(30):
            q = EuclideanPoint((float(x),))
            k = 25
            lhs = abs(eta_star_n(s, u, q, k) - eta_n(s, q, k))
            assert lhs == pytest.approx(abs(inside_count_fraction(s, u, q, k) - 1))

    def test_mean_inside_deviation_below_inverse_root_k(self):
        u = UniformCubeModel(1)
        pr = LearningProblem(u, constant_eta(1.0))
        n, k, trials = 1000, 25, 300
        vals = []
        for t in range(trials):
            r = np.random.default_rng([7, t])
            s = LabeledSample.draw(pr, n, r)
            x = EuclideanPoint((float(r.random()),))
            vals.append(abs(inside_count_fraction(s, u, x, k) - 1))
        vals = np.asarray(vals)
        assert vals.mean() <= 1 / math.sqrt(k) + 3 * vals.std(ddof=1) / math.sqrt(trials)
