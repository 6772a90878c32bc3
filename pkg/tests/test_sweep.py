import numpy as np
import pytest

from landmark_minsum import (
    DataError,
    InstanceSpec,
    MatrixDistanceSource,
    MetricMatrix,
    ParameterError,
    StabilityParams,
    SweepFailure,
    ThresholdCandidates,
    build_landmark_table,
    classify_points,
    cluster_min_sum,
    enumerate_thresholds,
    generate,
    ideal_threshold,
    plant_landmarks,
    sample_landmarks,
    stop_bound_from,
    sweep,
)

from conftest import random_metric


def table_for(m, landmarks):
    return build_landmark_table(MatrixDistanceSource(m), landmarks)


def small_verified_instance(seed=0, bad_fraction=0.0):
    spec = InstanceSpec(sizes=(40, 30, 25), theta=5.0,
                        bad_fraction=bad_fraction, seed=seed)
    return generate(spec)


class TestEnumerate:
    def test_two_points_one_landmark(self):
        vals = np.array([[0.0, 1.0], [1.0, 0.0]])
        t = table_for(MetricMatrix(vals), [0])
        cands = enumerate_thresholds(t, n=2, mode="exact")
        assert cands.values.tolist() == [1.0, 2.0]  # zero products dropped

    def test_product_set(self):
        vals = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
        t = table_for(MetricMatrix(vals), [0])
        cands = enumerate_thresholds(t, n=3, mode="exact")
        assert cands.values.tolist() == [1.0, 2.0, 3.0, 4.0, 6.0]

    def test_geometric_grid_span_and_count(self):
        m = random_metric(20, 2, seed=0)
        t = table_for(m, sample_landmarks(20, 4, seed=0))
        exact = enumerate_thresholds(t, n=20, mode="exact")
        gamma = 0.5
        geo = enumerate_thresholds(t, n=20, mode="geometric", gamma=gamma)
        lo, hi = exact.values[0], exact.values[-1]
        assert geo.values[0] == lo and geo.values[-1] == pytest.approx(hi)
        expected = int(np.ceil(np.log(hi / lo) / np.log(1.0 + gamma))) + 1
        assert len(geo) == expected

    def test_no_finite_distances(self):
        vals = np.zeros((3, 3))
        vals[0, 1] = vals[1, 0] = np.inf
        vals[0, 2] = vals[2, 0] = np.inf
        vals[1, 2] = vals[2, 1] = np.inf
        t = table_for(MetricMatrix(vals), [0])
        with pytest.raises(DataError):
            enumerate_thresholds(t, n=3)


class TestStopBound:
    def test_reference_values(self):
        assert stop_bound_from(StabilityParams(1.0, 0.001), n=10_000) == 1220
        assert stop_bound_from(StabilityParams(120.0, 0.01), n=1_000) == 30

    def test_inconsistent_params_rejected(self):
        with pytest.raises(ParameterError):
            stop_bound_from(StabilityParams(1.0, 0.5), n=100)

    def test_zero_bound_demands_everything(self):
        # the epsilon -> 0 limit: an explicit b=0 makes the sweep stop only
        # on full coverage
        inst = small_verified_instance(seed=1)
        t = table_for(inst.matrix, plant_landmarks(inst, 1, seed=1))
        cands = enumerate_thresholds(t, inst.n)
        res = sweep(t, 3, cands, stop_bound_b=0)
        assert res.points_clustered_at_stop == inst.n


class TestSweep:
    def test_stops_at_or_before_ideal_threshold(self):
        inst = small_verified_instance(seed=2)
        t = table_for(inst.matrix, plant_landmarks(inst, 1, seed=2))
        cands = enumerate_thresholds(t, inst.n)
        b = stop_bound_from(inst.stability, inst.n)
        res = sweep(t, 3, cands, b)
        assert res.chosen_threshold <= ideal_threshold(inst)
        assert res.points_clustered_at_stop >= inst.n - b
        assert res.clustering.is_partition()

    def test_no_queries_after_table_build(self):
        inst = small_verified_instance(seed=3)
        src = MatrixDistanceSource(inst.matrix)
        t = build_landmark_table(src, plant_landmarks(inst, 1, seed=3))
        issued = src.ledger.queries_issued
        cands = enumerate_thresholds(t, inst.n)
        sweep(t, 3, cands, stop_bound_from(inst.stability, inst.n))
        assert src.ledger.queries_issued == issued

    def test_monotone_stop_never_examines_larger(self):
        inst = small_verified_instance(seed=4)
        t = table_for(inst.matrix, plant_landmarks(inst, 1, seed=4))
        cands = enumerate_thresholds(t, inst.n)
        b = stop_bound_from(inst.stability, inst.n)
        res = sweep(t, 3, cands, b)
        assert res.runs_executed <= len(cands)
        tried = [tv for tv, _ in res.coverage_per_candidate]
        assert tried == cands.values[: res.runs_executed].tolist()
        assert all(cov < inst.n - b for _, cov in res.coverage_per_candidate[:-1])

    def test_degenerate_bound_first_candidate_wins(self):
        m = random_metric(20, 2, seed=5)
        t = table_for(m, sample_landmarks(20, 4, seed=5))
        cands = enumerate_thresholds(t, n=20)
        res = sweep(t, 3, cands, stop_bound_b=19)
        assert res.runs_executed == 1
        assert res.points_clustered_at_stop >= 1

    def test_failure_carries_best_run(self):
        m = random_metric(20, 2, seed=6)
        t = table_for(m, sample_landmarks(20, 4, seed=6))
        # truncated candidate list: every run under-covers
        tiny = ThresholdCandidates(
            np.array([1e-9, 2e-9, 3e-9]), "geometric(manual)"
        )
        with pytest.raises(SweepFailure) as exc_info:
            sweep(t, 3, tiny, stop_bound_b=0)
        err = exc_info.value
        assert err.best_clustering is not None
        assert 0 < err.best_coverage < 20
        assert err.best_threshold in (1e-9, 2e-9, 3e-9)

    def test_candidate_sufficiency_between_consecutive_values(self):
        m = random_metric(25, 2, seed=7)
        t = table_for(m, sample_landmarks(25, 5, seed=7))
        cands = enumerate_thresholds(t, n=25).values
        rng = np.random.default_rng(7)
        for _ in range(12):
            idx = int(rng.integers(0, len(cands) - 1))
            lo, hi = cands[idx], cands[idx + 1]
            between = float(rng.uniform(lo, hi))
            if between >= hi:
                continue
            a = cluster_min_sum(t, 3, float(lo))
            b = cluster_min_sum(t, 3, between)
            assert a.clusters == b.clusters
            assert a.unassigned == b.unassigned

    def test_geometric_mode_flagged_in_warnings(self):
        inst = small_verified_instance(seed=9)
        t = table_for(inst.matrix, plant_landmarks(inst, 1, seed=9))
        cands = enumerate_thresholds(t, inst.n, mode="geometric", gamma=0.3)
        res = sweep(t, 3, cands, stop_bound_from(inst.stability, inst.n))
        assert any(w.startswith("candidates:geometric") for w in res.warnings)

    def test_result_dict_shape(self):
        inst = small_verified_instance(seed=8)
        t = table_for(inst.matrix, plant_landmarks(inst, 1, seed=8))
        res = sweep(t, 3, enumerate_thresholds(t, inst.n),
                    stop_bound_from(inst.stability, inst.n))
        d = res.to_dict()
        assert set(d) >= {"chosen_T", "candidates_tried",
                          "coverage_per_candidate", "warnings", "clustering"}
        assert len(d["candidates_tried"]) == res.runs_executed
