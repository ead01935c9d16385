"""Random-search tests: draw distributions (with a KS check for the log
scale), shared folds, failure handling, and tie-breaking."""
import math

import numpy as np
import pytest
from scipy import stats

from enetboost.data import Dataset, kfold_stratified, kfold_random
from enetboost.errors import ConfigError, DataError, SearchError
from enetboost.rng import substream
from enetboost.trees import GbtConfig, fit_gbdt, predict
from enetboost.tuning import (
    LogUniform,
    PowerOfTwo,
    SearchSpace,
    TrialRecord,
    Uniform,
    default_space,
    random_search,
    sample_config,
)


def make_ds(X, y):
    cols = [(f"x{j + 1}", X[:, j]) for j in range(X.shape[1])]
    return Dataset.from_columns(cols, ("y", np.asarray(y, dtype=float)))


class TestDistributions:
    def test_uniform_integer_bounds_inclusive(self):
        dist = Uniform(3, 15)
        assert dist.integer
        rng = substream(0, 1)
        draws = [dist.draw(rng) for _ in range(3000)]
        assert all(isinstance(d, int) for d in draws)
        assert min(draws) == 3
        assert max(draws) == 15

    def test_uniform_float(self):
        dist = Uniform(0.1, 0.9)
        assert not dist.integer
        rng = substream(0, 2)
        draws = np.array([dist.draw(rng) for _ in range(1000)])
        assert np.all((draws >= 0.1) & (draws <= 0.9))
        assert draws.dtype == np.float64

    def test_mixed_bounds_draw_floats(self):
        # one integer bound is not enough to switch to integer draws
        assert not Uniform(1, 2.0).integer

    def test_log_uniform_within_bounds(self):
        dist = LogUniform(0.001, 0.2)
        rng = substream(0, 3)
        draws = np.array([dist.draw(rng) for _ in range(1000)])
        assert np.all((draws >= 0.001) & (draws <= 0.2))

    def test_log_uniform_ks(self):
        # logs of draws must be uniform on [log lo, log hi]
        dist = LogUniform(0.001, 0.2)
        rng = substream(42, 0)
        draws = np.array([dist.draw(rng) for _ in range(10_000)])
        logs = np.log(draws)
        lo, hi = math.log(0.001), math.log(0.2)
        res = stats.kstest(logs, stats.uniform(loc=lo, scale=hi - lo).cdf)
        assert res.pvalue > 0.01

    def test_power_of_two_support(self):
        dist = PowerOfTwo(2, 7)
        rng = substream(0, 4)
        draws = {dist.draw(rng) for _ in range(2000)}
        assert draws == {4, 8, 16, 32, 64, 128}

    def test_validation(self):
        with pytest.raises(ConfigError):
            Uniform(5, 3)
        with pytest.raises(ConfigError):
            LogUniform(0.0, 1.0)
        with pytest.raises(ConfigError):
            LogUniform(2.0, 1.0)
        with pytest.raises(ConfigError):
            PowerOfTwo(5, 2)
        with pytest.raises(ConfigError):
            SearchSpace({})
        with pytest.raises(ConfigError):
            SearchSpace({"depth": 7})


class TestSampleConfig:
    def test_insertion_order_does_not_matter(self):
        a = SearchSpace({"depth": Uniform(3, 15), "rate": LogUniform(0.01, 0.2)})
        b = SearchSpace({"rate": LogUniform(0.01, 0.2), "depth": Uniform(3, 15)})
        assert sample_config(a, substream(7, 0)) == sample_config(b, substream(7, 0))

    def test_default_space_draws(self):
        space = default_space()
        cfg = sample_config(space, substream(0, 0))
        assert set(cfg) == {"max_depth", "num_leaves", "learning_rate", "n_trees"}
        assert 3 <= cfg["max_depth"] <= 15
        assert cfg["num_leaves"] in {4, 8, 16, 32, 64, 128}
        assert 0.001 <= cfg["learning_rate"] <= 0.2
        assert 100 <= cfg["n_trees"] <= 1000
        assert isinstance(cfg["n_trees"], int)


class _NoiseLearner:
    """Predicts the val target plus noise scaled by the drawn parameter.

    Mean fold RMSE then tracks `sigma` directly, so the search winner is
    knowable in advance from the trial log.
    """

    def __init__(self):
        self.train_ids_seen = []

    def __call__(self, train_ds, params, seed):
        self.train_ids_seen.append(tuple(train_ds.row_ids.tolist()))
        sigma = params["sigma"]

        def predict_fn(val_ds):
            rng = np.random.default_rng(seed)
            return val_ds.y + sigma * rng.standard_normal(val_ds.n_rows)

        return predict_fn


class TestRandomSearch:
    def _data(self, n=60, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 3))
        y = rng.normal(size=n)
        return make_ds(X, y)

    def test_best_matches_trial_log(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 3, seed=1)
        space = SearchSpace({"sigma": LogUniform(0.01, 10.0)})
        best, records = random_search(d, space, folds, "rmse", _NoiseLearner(),
                                      n_trials=6, seed=5)
        assert len(records) == 6
        assert all(len(r.per_fold_metric) == 3 for r in records)
        for r in records:
            assert r.mean_metric == pytest.approx(
                sum(r.per_fold_metric) / 3, abs=1e-15)
        winner = min(records, key=lambda r: r.mean_metric)
        assert best == winner.config

    def test_trial_configs_are_position_keyed(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 2, seed=1)
        space = SearchSpace({"sigma": LogUniform(0.01, 10.0)})
        _, records = random_search(d, space, folds, "rmse", _NoiseLearner(),
                                   n_trials=4, seed=9)
        for t, rec in enumerate(records):
            assert rec.config == sample_config(space, substream(9, t))

    def test_folds_shared_across_trials(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 3, seed=2)
        learner = _NoiseLearner()
        random_search(d, SearchSpace({"sigma": Uniform(0.5, 1.5)}), folds,
                      "rmse", learner, n_trials=3, seed=0)
        per_trial = [learner.train_ids_seen[i * 3:(i + 1) * 3] for i in range(3)]
        assert per_trial[0] == per_trial[1] == per_trial[2]

    def test_tie_keeps_earliest_trial(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 2, seed=3)

        def constant_learner(train_ds, params, seed):
            return lambda val_ds: np.zeros(val_ds.n_rows)

        space = SearchSpace({"sigma": Uniform(0.0, 1.0)})
        best, records = random_search(d, space, folds, "rmse", constant_learner,
                                      n_trials=4, seed=2)
        assert best == records[0].config
        assert len({r.mean_metric for r in records}) == 1

    def test_failed_trials_discarded_with_warning(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 2, seed=4)

        def flaky_learner(train_ds, params, seed):
            if params["sigma"] > 1.0:
                raise DataError("unlucky draw")
            return lambda val_ds: val_ds.y + params["sigma"]

        space = SearchSpace({"sigma": LogUniform(0.1, 10.0)})
        with pytest.warns(UserWarning, match="discarded"):
            best, records = random_search(d, space, folds, "rmse", flaky_learner,
                                          n_trials=8, seed=3)
        assert any(r.failed for r in records)
        assert all(r.mean_metric is None for r in records if r.failed)
        survivors = [r for r in records if not r.failed]
        assert survivors
        assert best == min(survivors, key=lambda r: r.mean_metric).config
        assert best["sigma"] <= 1.0

    def test_all_trials_failed_raises(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 2, seed=5)

        def doomed_learner(train_ds, params, seed):
            raise DataError("always fails")

        with pytest.warns(UserWarning):
            with pytest.raises(SearchError):
                random_search(d, SearchSpace({"sigma": Uniform(0.0, 1.0)}), folds,
                              "rmse", doomed_learner, n_trials=3, seed=0)

    def test_auc_maximizes(self):
        rng = np.random.default_rng(8)
        n = 80
        X = rng.normal(size=(n, 2))
        y = (X[:, 0] > 0) * 1.0
        d = make_ds(X, y)
        folds = kfold_stratified(d, 4, seed=0)

        def oriented_learner(train_ds, params, seed):
            sign = 1.0 if params["flip"] >= 0.5 else -1.0
            return lambda val_ds: sign * val_ds.column("x1")

        best, records = random_search(d, SearchSpace({"flip": Uniform(0.0, 1.0)}),
                                      folds, "auc", oriented_learner,
                                      n_trials=6, seed=1)
        assert best["flip"] >= 0.5
        winner = max(records, key=lambda r: r.mean_metric)
        assert best == winner.config

    def test_determinism(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 3, seed=6)
        space = SearchSpace({"sigma": LogUniform(0.05, 5.0)})
        out1 = random_search(d, space, folds, "rmse", _NoiseLearner(), n_trials=4, seed=7)
        out2 = random_search(d, space, folds, "rmse", _NoiseLearner(), n_trials=4, seed=7)
        assert out1[0] == out2[0]
        assert [r.to_json() for r in out1[1]] == [r.to_json() for r in out2[1]]

    def test_validation_errors(self):
        d = self._data()
        folds = kfold_random(d.n_rows, 2, seed=0)
        space = SearchSpace({"sigma": Uniform(0.0, 1.0)})
        with pytest.raises(ConfigError):
            random_search(d, space, folds, "mae", _NoiseLearner())
        with pytest.raises(ConfigError):
            random_search(d, space, folds, "rmse", _NoiseLearner(), n_trials=0)
        no_target = Dataset.from_columns([("x1", np.arange(4.0))])
        with pytest.raises(DataError):
            random_search(no_target, space, kfold_random(4, 2, seed=0), "rmse",
                          _NoiseLearner())

    def test_boosting_learner_integration(self):
        rng = np.random.default_rng(12)
        n = 90
        X = rng.normal(size=(n, 3))
        y = (X[:, 0] - X[:, 1] + 0.5 * rng.normal(size=n) > 0) * 1.0
        d = make_ds(X, y)
        folds = kfold_stratified(d, 3, seed=0)

        def gbt_learner(train_ds, params, seed):
            c = GbtConfig(n_trees=params["n_trees"], max_depth=params["max_depth"],
                          learning_rate=params["learning_rate"], loss="logistic",
                          seed=seed)
            model = fit_gbdt(train_ds, c)
            return lambda val_ds: predict(model, val_ds)

        space = SearchSpace({
            "max_depth": Uniform(2, 4),
            "learning_rate": LogUniform(0.05, 0.3),
            "n_trees": Uniform(10, 30),
        })
        best, records = random_search(d, space, folds, "auc", gbt_learner,
                                      n_trials=3, seed=4)
        assert 2 <= best["max_depth"] <= 4
        assert all(not r.failed for r in records)
        assert all(0.0 <= m <= 1.0 for r in records for m in r.per_fold_metric)


def test_trial_record_json_round_trip():
    rec = TrialRecord(2, {"depth": 5}, (0.8, 0.9), 0.85)
    j = rec.to_json()
    assert j == {"trial": 2, "config": {"depth": 5},
                 "per_fold_metric": [0.8, 0.9], "mean_metric": 0.85,
                 "failed": False}
