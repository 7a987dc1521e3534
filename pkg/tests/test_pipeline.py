import numpy as np
import pytest

from clustering.fcm import FcmConfig
from core.errors import DimensionError, ParameterError
from data.dataset import SyntheticSpec, gen_synthetic, normalize_zscore
from degranulation.reconstruction import reconstruct_scalar, reconstruction_error
from optim.pso import PsoConfig
from pipeline.refine import (
    BaselineModel,
    RefinedModel,
    evaluate_baseline,
    evaluate_model,
    evaluate_refined,
    fit_baseline,
    model_from_dict,
    train_refined,
)

FAST_PSO = PsoConfig(particles=12, max_iter=15, seed=5)


def random_instance(seed: int):
    gen = np.random.default_rng(seed)
    n_rows = int(gen.integers(20, 101))
    n_features = int(gen.integers(1, 6))
    c = int(gen.integers(2, 5))
    return gen.normal(size=(n_rows, n_features)), c


class TestBaseline:
    def test_train_error_is_scalar_degranulation(self, three_blobs):
        model = fit_baseline(three_blobs, 3, 2.0, FcmConfig(seed=0))
        expected = reconstruction_error(reconstruct_scalar(three_blobs, model.prototypes, 2.0), three_blobs).error
        assert model.train_error == expected

    def test_same_sets_same_scores(self, two_blobs):
        scores = evaluate_baseline(two_blobs, two_blobs, 2, 2.0, FcmConfig(seed=0))
        assert scores.train_error == pytest.approx(scores.test_error, abs=1e-12)

    def test_repeated_points_reconstruct_exactly(self):
        X = np.repeat(np.array([[0.0, 1.0], [4.0, -2.0]]), 6, axis=0)
        scores = evaluate_baseline(X, X, 2, 2.0, FcmConfig(seed=0))
        assert scores.train_error == pytest.approx(0.0, abs=1e-12)
        assert scores.test_error == pytest.approx(0.0, abs=1e-12)


class TestRefined:
    def test_zero_iterations_reduce_to_baseline(self):
        for seed in range(20):
            X, c = random_instance(seed)
            fcm_cfg = FcmConfig(seed=seed)
            baseline = fit_baseline(X, c, 2.0, fcm_cfg)
            refined = train_refined(X, c, 2.0, fcm_cfg, PsoConfig(max_iter=0, seed=seed))
            assert refined.train_error == pytest.approx(baseline.train_error, abs=1e-12)
            assert evaluate_model(refined, X) == pytest.approx(evaluate_model(baseline, X), abs=1e-12)

    def test_never_worse_than_baseline(self, three_blobs):
        for m0 in (1.1, 2.1, 4.1):
            baseline = fit_baseline(three_blobs, 3, m0, FcmConfig(seed=2))
            refined = train_refined(three_blobs, 3, m0, FcmConfig(seed=2), FAST_PSO)
            assert refined.train_error <= baseline.train_error

    def test_history_is_non_increasing(self, two_blobs):
        model = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), FAST_PSO)
        assert np.all(np.diff(model.pso_history) <= 0.0)
        assert model.pso_history[-1] / model.n_train == model.train_error

    def test_self_consistent_evaluation(self, two_blobs):
        model = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), FAST_PSO)
        assert evaluate_refined(model, two_blobs) == pytest.approx(model.train_error, abs=1e-12)

    def test_point_on_prototype(self, two_blobs):
        model = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), FAST_PSO)
        assert evaluate_model(model, model.prototypes[:1]) == 0.0

    def test_deterministic(self, two_blobs):
        a = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=1), FAST_PSO)
        b = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=1), FAST_PSO)
        assert a.to_dict() == b.to_dict()

    def test_m0_outside_bounds_is_kept_reachable(self, two_blobs):
        cfg = PsoConfig(particles=6, max_iter=0, bounds_low=1.5, bounds_high=3.0)
        model = train_refined(two_blobs, 2, 4.0, FcmConfig(seed=0), cfg)
        assert model.fuzzifiers.to_list() == [4.0, 4.0]

    def test_bad_m0(self, two_blobs):
        with pytest.raises(ParameterError):
            train_refined(two_blobs, 2, 1.0, FcmConfig(), FAST_PSO)

    @pytest.mark.parametrize("low", [1.0, 0.5, [1.2, 1.0]])
    def test_lower_bound_must_exceed_one(self, two_blobs, low):
        cfg = PsoConfig(particles=6, max_iter=3, bounds_low=low, seed=0)
        with pytest.raises(ParameterError):
            train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), cfg)

    def test_dimension_mismatch(self, two_blobs):
        model = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), FAST_PSO)
        with pytest.raises(DimensionError):
            evaluate_model(model, np.zeros((3, 5)))

    def test_synthetic_nine_blobs_improve(self):
        X, _ = normalize_zscore(gen_synthetic(SyntheticSpec()))
        fcm_cfg = FcmConfig(seed=0)
        baseline = fit_baseline(X, 9, 2.0, fcm_cfg)
        refined = train_refined(X, 9, 2.0, fcm_cfg, PsoConfig(particles=20, max_iter=30, seed=0))
        assert refined.train_error < baseline.train_error
        assert refined.pso_history[-1] < refined.pso_history[0]


class TestModelFiles:
    def test_round_trips(self, two_blobs):
        baseline = fit_baseline(two_blobs, 2, 2.0, FcmConfig(seed=0))
        refined = train_refined(two_blobs, 2, 2.0, FcmConfig(seed=0), FAST_PSO)
        assert isinstance(model_from_dict(baseline.to_dict()), BaselineModel)
        again = model_from_dict(refined.to_dict())
        assert isinstance(again, RefinedModel)
        assert evaluate_model(again, two_blobs) == evaluate_model(refined, two_blobs)

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            model_from_dict({"kind": "kmeans"})
