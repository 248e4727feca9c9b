import numpy as np
import pytest

from autotab.budget import TimeBudget
from autotab.errors import ConfigError, DataError
from autotab.gbm import GBMParams, fit_booster
from autotab.gbm.binning import MISSING_BIN, BinMapper
from autotab.metrics import MetricSpec
from autotab.stopping import early_stop

from conftest import make_binary


def make_xor(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(np.int64)
    return X, y


class TestBinning:
    def test_few_uniques_map_identically(self):
        X = np.array([[1.0], [2.0], [2.0], [5.0]])
        mapper = BinMapper().fit(X)
        codes = mapper.transform(X)
        assert codes[:, 0].tolist() == [0, 1, 1, 2]

    def test_missing_goes_to_reserved_bin(self):
        X = np.array([[1.0], [np.nan], [3.0]])
        mapper = BinMapper().fit(X)
        codes = mapper.transform(X)
        assert codes[1, 0] == MISSING_BIN

    def test_many_uniques_capped(self, rng):
        X = rng.normal(size=(5000, 1))
        mapper = BinMapper().fit(X)
        codes = mapper.transform(X)
        assert codes.max() <= 254
        assert len(np.unique(codes)) > 200

    def test_raw_threshold_consistent_with_codes(self, rng):
        X = rng.normal(size=(300, 1))
        mapper = BinMapper().fit(X)
        codes = mapper.transform(X)
        for t in (3, 17, 40):
            if t >= mapper.n_bins(0) - 1:
                continue
            edge = mapper.raw_threshold(0, t)
            assert np.array_equal(codes[:, 0] <= t, X[:, 0] <= edge)


class TestEarlyStop:
    def test_patience_rule(self):
        history = [0.5, 0.7, 0.6, 0.6]
        assert early_stop(history, patience=2) == 1

    def test_strictly_improving_returns_last(self):
        history = [0.1, 0.2, 0.3, 0.4]
        assert early_stop(history, patience=2) == 3

    def test_plateau_earliest_best(self):
        assert early_stop([0.7, 0.7, 0.7], patience=1) == 0

    def test_empty_history_rejected(self):
        with pytest.raises(ConfigError):
            early_stop([], patience=1)
        with pytest.raises(ConfigError):
            early_stop([0.5], patience=0)


class TestBoosting:
    @pytest.mark.parametrize("flavor", ["leaf_wise", "symmetric_depth_wise"])
    def test_xor_reaches_perfect_train_accuracy(self, flavor):
        X, y = make_xor(400, seed=1)
        params = GBMParams(learning_rate=0.2, max_leaves=8, max_depth=4,
                           min_data_in_leaf=2, n_estimators_cap=300, flavor=flavor)
        res = fit_booster(X, y, params, "binary")
        acc = ((res.estimator.predict(X) > 0.5) == y).mean()
        assert acc == 1.0

    def test_constant_target_regression(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 3))
        y = np.full(100, 7.25)
        params = GBMParams(n_estimators_cap=3)
        res = fit_booster(X, y, params, "regression")
        assert res.estimator.predict(X) == pytest.approx(np.full(100, 7.25))

    def test_full_batch_train_loss_non_increasing(self):
        X, y = make_binary(500, 5, 3, seed=2)
        params = GBMParams(learning_rate=0.1, max_leaves=16, subsample=1.0,
                           colsample=1.0, n_estimators_cap=200)
        res = fit_booster(X, y, params, "binary", track_train_loss=True)
        losses = np.asarray(res.train_loss_history)
        assert len(losses) == 200
        assert np.all(np.diff(losses) <= 1e-12)

    def test_noise_features_collect_little_gain(self):
        rng = np.random.default_rng(3)
        n = 2000
        informative = rng.normal(size=(n, 2))
        noise = rng.normal(size=(n, 3))
        X = np.hstack([informative, noise])
        logits = 3.0 * informative[:, 0] - 2.5 * informative[:, 1]
        y = (rng.random(n) < 1 / (1 + np.exp(-logits))).astype(np.int64)
        params = GBMParams(learning_rate=0.1, max_leaves=16, n_estimators_cap=60)
        res = fit_booster(X, y, params, "binary")
        gain = res.estimator.feature_gain_
        assert gain[2:].sum() < 0.10 * gain.sum()

    def test_multiclass_probabilities_sum_to_one(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(300, 4))
        y = rng.integers(0, 3, size=300)
        params = GBMParams(n_estimators_cap=20, max_leaves=8)
        res = fit_booster(X, y, params, "multiclass", n_classes=3)
        probs = res.estimator.predict(X)
        assert probs.shape == (300, 3)
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9

    def test_early_stopping_truncates_trees(self):
        X, y = make_binary(600, 4, 2, seed=5)
        params = GBMParams(learning_rate=0.3, max_leaves=32,
                           n_estimators_cap=500, min_data_in_leaf=2)
        res = fit_booster(X[:400], y[:400], params, "binary",
                          X_val=X[400:], y_val=y[400:],
                          metric=MetricSpec("roc_auc"), patience=10)
        assert res.estimator.n_iterations < 500
        assert res.estimator.n_iterations == res.best_iteration + 1

    def test_budget_truncation_flags_model(self):
        X, y = make_binary(3000, 8, 4, seed=6)
        params = GBMParams(n_estimators_cap=2000, max_leaves=64)
        res = fit_booster(X, y, params, "binary", budget=TimeBudget(0.15))
        assert res.truncated
        assert res.estimator.n_iterations < 2000

    def test_determinism_given_seed(self):
        X, y = make_binary(400, 6, 3, seed=7)
        params = GBMParams(subsample=0.8, colsample=0.8, n_estimators_cap=30)
        r1 = fit_booster(X, y, params, "binary", seed=11)
        r2 = fit_booster(X, y, params, "binary", seed=11)
        assert np.array_equal(r1.estimator.predict(X), r2.estimator.predict(X))
        r3 = fit_booster(X, y, params, "binary", seed=12)
        assert not np.array_equal(r1.estimator.predict(X), r3.estimator.predict(X))

    def test_missing_values_route_consistently(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(500, 2))
        X[rng.random(500) < 0.3, 0] = np.nan
        y = (np.nan_to_num(X[:, 0], nan=2.0) > 0).astype(np.int64)
        params = GBMParams(n_estimators_cap=50, max_leaves=8)
        res = fit_booster(X, y, params, "binary")
        acc = ((res.estimator.predict(X) > 0.5) == y).mean()
        assert acc > 0.95

    def test_no_features_rejected(self):
        with pytest.raises(DataError):
            fit_booster(np.empty((10, 0)), np.zeros(10), GBMParams(), "regression")

    def test_param_validation(self):
        with pytest.raises(ConfigError):
            GBMParams(learning_rate=0.0)
        with pytest.raises(ConfigError):
            GBMParams(subsample=1.5)
        with pytest.raises(ConfigError):
            GBMParams(flavor="exact")

    def test_oblivious_tree_shares_level_splits(self):
        X, y = make_xor(300, seed=9)
        params = GBMParams(max_depth=3, n_estimators_cap=5,
                           flavor="symmetric_depth_wise", min_data_in_leaf=2)
        res = fit_booster(X, y, params, "binary")
        tree = res.estimator.trees[0]
        assert tree.depth <= 3
        assert len(tree.leaf_values) == 2 ** tree.depth
