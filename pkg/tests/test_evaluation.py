import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landmark_minsum import (
    Clustering,
    DataError,
    MatrixDistanceSource,
    MetricMatrix,
    ParameterError,
    QueryLedger,
    StabilityParams,
    balanced_k_median,
    brute_force_optimum,
    classify_points,
    clustering_distance,
    embed_kmeans_baseline,
    generate,
    generate_adversarial,
    InstanceSpec,
    min_sum,
    verify_stability,
    verify_structure,
)
from landmark_minsum.evaluation import partitions_upto_k

from conftest import (
    bijection_distance_oracle,
    euclidean_matrix,
    random_metric,
    random_partition,
    random_symmetric,
)


class TestMinSum:
    def test_singletons_zero(self):
        m = random_metric(5, 2, seed=0)
        c = Clustering(n=5, clusters=[[i] for i in range(5)])
        assert min_sum(c, m).value == 0.0

    def test_single_pair(self):
        m = euclidean_matrix([0.0, 2.0])
        c = Clustering(n=2, clusters=[[0, 1]])
        assert min_sum(c, m).value == 2.0

    def test_matches_double_loop_oracle(self):
        m = random_metric(8, 3, seed=1)
        rng = np.random.default_rng(1)
        c = random_partition(8, 3, rng)
        expected = 0.0
        labels = c.labels()
        for i in range(8):
            for j in range(i + 1, 8):
                if labels[i] == labels[j]:
                    expected += m.values[i, j]
        assert min_sum(c, m).value == pytest.approx(expected, rel=1e-12)

    def test_infinite_intra_distance_flagged(self):
        vals = np.zeros((2, 2))
        vals[0, 1] = vals[1, 0] = math.inf
        c = Clustering(n=2, clusters=[[0, 1]])
        assert math.isinf(min_sum(c, MetricMatrix(vals)).value)

    def test_rejects_incomplete_partition(self):
        m = random_metric(3, 2, seed=2)
        c = Clustering(n=3, clusters=[[0]], unassigned=[1, 2])
        with pytest.raises(DataError):
            min_sum(c, m)


class TestBalancedKMedian:
    def test_pair_cluster(self):
        m = euclidean_matrix([0.0, 2.0])
        c = Clustering(n=2, clusters=[[0, 1]])
        got = balanced_k_median(c, m)
        assert got.value == 4.0
        assert got.medians == [0]  # tie resolved to the lowest index

    def test_singletons_zero(self):
        m = random_metric(4, 2, seed=3)
        c = Clustering(n=4, clusters=[[i] for i in range(4)])
        assert balanced_k_median(c, m).value == 0.0

    def test_line_median_is_middle(self):
        m = euclidean_matrix([0.0, 1.0, 2.0])
        c = Clustering(n=3, clusters=[[0, 1, 2]])
        got = balanced_k_median(c, m)
        assert got.medians == [1]
        assert got.value == 6.0

    def test_matches_median_enumeration(self):
        m = random_metric(9, 2, seed=4)
        rng = np.random.default_rng(4)
        c = random_partition(9, 3, rng)
        expected = 0.0
        for members in c.clusters:
            if members:
                best = min(
                    sum(m.values[y, x] for x in members) for y in members
                )
                expected += len(members) * best
        assert balanced_k_median(c, m).value == pytest.approx(expected, rel=1e-12)

    def test_empty_cluster_contributes_zero(self):
        m = euclidean_matrix([0.0, 2.0])
        c = Clustering(n=2, clusters=[[0, 1], []])
        got = balanced_k_median(c, m)
        assert got.value == 4.0
        assert got.medians == [0, None]


class TestClusteringDistance:
    def test_identity(self):
        rng = np.random.default_rng(5)
        c = random_partition(10, 3, rng)
        assert clustering_distance(c, c) == 0.0

    def test_label_permutation_free(self):
        rng = np.random.default_rng(6)
        c = random_partition(12, 4, rng)
        perm = Clustering(n=12, clusters=[c.clusters[i] for i in (2, 0, 3, 1)])
        assert clustering_distance(c, perm) == 0.0

    def test_worked_example(self):
        c1 = Clustering(n=4, clusters=[[0, 1], [2, 3]])
        c2 = Clustering(n=4, clusters=[[0, 1, 2], [3]])
        assert clustering_distance(c1, c2) == 0.25

    def test_unequal_cluster_counts_padded(self):
        c1 = Clustering(n=4, clusters=[[0, 1], [2], [3]])
        c2 = Clustering(n=4, clusters=[[0, 1, 2, 3]])
        assert clustering_distance(c1, c2) == bijection_distance_oracle(c1, c2)

    def test_mismatched_point_sets_rejected(self):
        c1 = Clustering(n=4, clusters=[[0, 1], [2, 3]])
        c2 = Clustering(n=5, clusters=[[0, 1], [2, 3, 4]])
        with pytest.raises(DataError):
            clustering_distance(c1, c2)

    @given(st.integers(0, 2**31 - 1), st.integers(2, 6), st.integers(2, 6))
    @settings(max_examples=60, deadline=None)
    def test_matches_bijection_oracle(self, seed, k1, k2):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 16))
        c1 = random_partition(n, k1, rng)
        c2 = random_partition(n, k2, rng)
        assert clustering_distance(c1, c2) == pytest.approx(
            bijection_distance_oracle(c1, c2), abs=0
        )

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_pseudometric_properties(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        a = random_partition(n, int(rng.integers(1, 5)), rng)
        b = random_partition(n, int(rng.integers(1, 5)), rng)
        c = random_partition(n, int(rng.integers(1, 5)), rng)
        dab = clustering_distance(a, b)
        assert dab == clustering_distance(b, a)
        assert clustering_distance(a, a) == 0.0
        assert dab <= clustering_distance(a, c) + clustering_distance(c, b) + 1e-12


class TestBruteForce:
    def test_k_equals_n_gives_singletons(self):
        m = random_metric(5, 2, seed=7)
        best, val = brute_force_optimum(m, k=5, objective="min_sum")
        assert val.value == 0.0
        assert best.clusters == [[i] for i in range(5)]

    def test_two_tight_pairs(self):
        m = euclidean_matrix([[0.0, 0.0], [0.1, 0.0], [9.0, 0.0], [9.1, 0.0]])
        best, _ = brute_force_optimum(m, k=2, objective="balanced_k_median")
        assert best.clusters == [[0, 1], [2, 3]]

    def test_optimum_bounds_random_clusterings(self):
        m = random_metric(6, 2, seed=8)
        _, val = brute_force_optimum(m, k=3, objective="min_sum")
        rng = np.random.default_rng(8)
        for _ in range(50):
            c = random_partition(6, 3, rng)
            assert val.value <= min_sum(c, m).value + 1e-12

    def test_cap_refusal(self):
        m = random_metric(13, 2, seed=9)
        with pytest.raises(ParameterError):
            brute_force_optimum(m, k=2)

    def test_partition_count(self):
        # Stirling S(5,1)+S(5,2)+S(5,3) = 1 + 15 + 25
        assert sum(1 for _ in partitions_upto_k(5, 3)) == 41


class TestClassifyAndStructure:
    def test_zero_noise_cores_have_no_bad_points(self):
        inst = generate(InstanceSpec(sizes=(30, 20, 15), theta=4.0, seed=0))
        report = classify_points(inst.matrix, inst.target, inst.stability)
        assert report.bad_points == []
        assert verify_structure(report, inst.matrix).all_ok

    def test_bad_points_within_budget_when_verified(self):
        inst = generate(
            InstanceSpec(sizes=(60, 40, 30), theta=6.0, bad_fraction=0.03, seed=1)
        )
        report = classify_points(inst.matrix, inst.target, inst.stability)
        outcome = verify_structure(report, inst.matrix)
        assert outcome.part3
        assert report.b_observed <= report.bad_point_budget

    def test_average_weight_matches_objective(self):
        inst = generate(InstanceSpec(sizes=(25, 20), theta=3.0, seed=2))
        report = classify_points(inst.matrix, inst.target, inst.stability)
        psi = balanced_k_median(inst.target, inst.matrix).value
        assert np.mean(report.weights) == pytest.approx(psi / inst.n, rel=1e-9)
        assert report.w == pytest.approx(psi / inst.n, rel=1e-9)

    def test_partition_of_good_and_bad(self):
        inst = generate(
            InstanceSpec(sizes=(30, 25, 20), theta=5.0, bad_fraction=0.05, seed=3)
        )
        report = classify_points(inst.matrix, inst.target, inst.stability)
        counted = sum(len(x) for x in report.good_sets) + len(report.bad_points)
        assert counted == inst.n
        all_good = set().union(*map(set, report.good_sets))
        assert all_good.isdisjoint(report.bad_points)

    def test_single_cluster_flagged(self):
        inst = generate(InstanceSpec(sizes=(12,), theta=2.0, seed=4))
        report = classify_points(
            inst.matrix, inst.target,
            StabilityParams(alpha=1.0, epsilon=0.01),
        )
        assert report.single_cluster
        assert np.all(np.isinf(report.second_weights))

    def test_part2_violation_witnessed_on_doctored_report(self):
        inst = generate(InstanceSpec(sizes=(20, 15), theta=4.0, seed=5))
        report = classify_points(inst.matrix, inst.target, inst.stability)
        # pretend the separation requirement were much larger than reality
        report.separation_numerator *= 1e9
        outcome = verify_structure(report, inst.matrix)
        assert not outcome.part2
        w = outcome.witnesses["part2"]
        assert w["distance"] <= w["bound"]

    def test_part3_violation_constructed(self):
        inst = generate(InstanceSpec(sizes=(20, 15), theta=4.0, seed=6))
        params = StabilityParams(alpha=1.0, epsilon=1e-9)
        report = classify_points(inst.matrix, inst.target, params)
        # with an absurdly small epsilon every point fails the weight cap
        outcome = verify_structure(report, inst.matrix)
        assert not outcome.part3
        assert outcome.witnesses["part3"]["b_observed"] > 0


class TestVerifyStability:
    def test_two_far_pairs_hold(self):
        m = euclidean_matrix([[0.0, 0], [0.05, 0], [50.0, 0], [50.05, 0]])
        target = Clustering(n=4, clusters=[[0, 1], [2, 3]])
        params = StabilityParams(alpha=1.0, epsilon=0.3)
        assert verify_stability(m, target, k=2, params=params).holds

    def test_uniform_metric_fails_small_epsilon(self):
        inst = generate_adversarial("uniform", n=8, k=2, seed=0)
        params = StabilityParams(alpha=1.0, epsilon=0.2)
        verdict = verify_stability(inst.matrix, inst.target, k=2, params=params)
        assert not verdict.holds
        assert verdict.counterexample is not None
        assert verdict.counterexample_distance >= params.epsilon

    def test_near_one_epsilon_vacuous(self):
        m = random_metric(6, 2, seed=10)
        target = Clustering(n=6, clusters=[[0, 1, 2], [3, 4, 5]])
        params = StabilityParams(alpha=0.5, epsilon=0.999)
        assert verify_stability(m, target, k=2, params=params).holds

    def test_cap_refusal(self):
        m = random_metric(13, 2, seed=11)
        target = Clustering(n=13, clusters=[list(range(13))])
        with pytest.raises(ParameterError):
            verify_stability(m, target, 2, StabilityParams(1.0, 0.1))


class TestObjectiveSandwich:
    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_half_psi_le_phi_le_psi(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        m = random_metric(n, int(rng.integers(1, 4)), seed=seed % 2**16)
        c = random_partition(n, int(rng.integers(1, 5)), rng)
        phi = min_sum(c, m).value
        psi = balanced_k_median(c, m).value
        assert psi / 2.0 <= phi <= psi


class TestEmbedKMeansBaseline:
    def test_exact_query_count(self):
        m = random_metric(30, 2, seed=12)
        src = MatrixDistanceSource(m, QueryLedger())
        embed_kmeans_baseline(src, d_landmarks=5, k=3, seed=0)
        assert src.ledger.queries_issued == 5

    def test_recovers_two_far_cores(self):
        rng = np.random.default_rng(13)
        pts = np.vstack([
            rng.normal(0.0, 0.1, size=(20, 2)),
            rng.normal(50.0, 0.1, size=(20, 2)),
        ])
        m = euclidean_matrix(pts)
        src = MatrixDistanceSource(m)
        got = embed_kmeans_baseline(src, d_landmarks=4, k=2, seed=3)
        target = Clustering(n=40, clusters=[list(range(20)), list(range(20, 40))])
        assert clustering_distance(got, target) == 0.0

    def test_k1_everything_together(self):
        m = random_metric(10, 2, seed=14)
        got = embed_kmeans_baseline(MatrixDistanceSource(m), 3, k=1, seed=0)
        assert got.clusters == [list(range(10))]

    def test_infinite_coordinates_warned_and_assigned(self):
        vals = np.zeros((6, 6))
        pts = [0.0, 0.2, 0.4, 10.0, 10.2, 10.4]
        for i in range(6):
            for j in range(6):
                vals[i, j] = abs(pts[i] - pts[j])
        vals[0, 5] = vals[5, 0] = math.inf
        m = MetricMatrix(vals)
        got = embed_kmeans_baseline(MatrixDistanceSource(m), 6, k=2, seed=1)
        assert got.is_partition()
        assert any("infinite" in w for w in got.warnings)
