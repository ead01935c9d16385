"""Random hyperparameter search over small declarative spaces.

A SearchSpace maps parameter names to draw distributions; random_search
samples n_trials configurations, scores each by k-fold validation with
one shared fold assignment, and returns the winner plus a full trial
log. Every trial and every learner seed comes from its own seed
substream, so results do not depend on evaluation order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .data import Dataset, FoldAssignment
from .errors import ConfigError, DataError, EnetBoostError, SearchError
from .metrics import auc, rmse
from .rng import child_seed, substream


@dataclass(frozen=True)
class Uniform:
    """Uniform on [lo, hi]; integer bounds draw integers (inclusive)."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ConfigError(f"empty range [{self.lo}, {self.hi}]")

    @property
    def integer(self) -> bool:
        return isinstance(self.lo, int) and isinstance(self.hi, int)

    def draw(self, rng):
        if self.integer:
            return int(rng.integers(self.lo, self.hi + 1))
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class LogUniform:
    """exp of a uniform draw on [log lo, log hi]; needs lo > 0."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo <= 0:
            raise ConfigError(f"LogUniform needs lo > 0, got {self.lo}")
        if self.lo > self.hi:
            raise ConfigError(f"empty range [{self.lo}, {self.hi}]")

    def draw(self, rng):
        return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))


@dataclass(frozen=True)
class PowerOfTwo:
    """2**e with the exponent uniform on the integers [lo_exp, hi_exp]."""

    lo_exp: int
    hi_exp: int

    def __post_init__(self):
        if self.lo_exp > self.hi_exp:
            raise ConfigError(f"empty range [{self.lo_exp}, {self.hi_exp}]")

    def draw(self, rng):
        return int(2 ** int(rng.integers(self.lo_exp, self.hi_exp + 1)))


@dataclass(frozen=True)
class SearchSpace:
    """Named draw distributions; sampling iterates names in sorted order."""

    params: dict

    def __post_init__(self):
        if not self.params:
            raise ConfigError("search space has no parameters")
        for name, dist in self.params.items():
            if not hasattr(dist, "draw"):
                raise ConfigError(f"parameter {name!r} has no draw() distribution")


def default_space() -> SearchSpace:
    """Stock space for the boosting learners."""
    return SearchSpace({
        "max_depth": Uniform(3, 15),
        "num_leaves": PowerOfTwo(2, 7),
        "learning_rate": LogUniform(0.001, 0.2),
        "n_trees": Uniform(100, 1000),
    })


def sample_config(space: SearchSpace, rng) -> dict:
    """One independent draw per parameter, in sorted name order."""
    return {name: space.params[name].draw(rng) for name in sorted(space.params)}


@dataclass(frozen=True)
class TrialRecord:
    """One sampled configuration and its per-fold validation metrics.

    failed marks a trial discarded because a fold learner raised; its
    metrics are empty and it never competes for the best config.
    """

    trial: int
    config: dict
    per_fold_metric: tuple
    mean_metric: float | None
    failed: bool = False

    def to_json(self) -> dict:
        return {
            "trial": self.trial,
            "config": dict(self.config),
            "per_fold_metric": list(self.per_fold_metric),
            "mean_metric": self.mean_metric,
            "failed": self.failed,
        }


def _check_disjoint(train_ds: Dataset, val_ds: Dataset):
    # row-id bookkeeping: a shared id means the fold split leaked
    overlap = set(train_ds.row_ids.tolist()) & set(val_ds.row_ids.tolist())
    if overlap:
        raise DataError(f"fold leakage: rows {sorted(overlap)[:5]} appear on both sides")


def random_search(train: Dataset, space: SearchSpace, folds: FoldAssignment,
                  metric: str, learner, n_trials: int = 5,
                  seed: int = 0) -> tuple[dict, list[TrialRecord]]:
    """Sample n_trials configs and keep the best by mean fold metric.

    learner(train_ds, params, seed) must return a predict function
    mapping a Dataset to scores. auc selects the maximum mean, rmse the
    minimum; exact ties keep the earliest trial. A trial whose learner
    raises a library error on any fold is discarded with a warning;
    SearchError if every trial is discarded.
    """
    if metric not in ("auc", "rmse"):
        raise ConfigError(f"metric must be 'auc' or 'rmse', got {metric!r}")
    if n_trials < 1:
        raise ConfigError(f"n_trials must be at least 1, got {n_trials}")
    if train.y is None:
        raise DataError("tuning needs a target column")
    score = auc if metric == "auc" else rmse

    records = []
    best_key = None
    best_config = None
    for t in range(n_trials):
        params = sample_config(space, substream(seed, t))
        fold_metrics = []
        failed = False
        for i in range(folds.k):
            fit_ds = train.take(folds.train_rows(i))
            val_ds = train.take(folds.val_rows(i))
            _check_disjoint(fit_ds, val_ds)
            try:
                predict_fn = learner(fit_ds, params, child_seed(seed, t, i))
                scores = predict_fn(val_ds)
                fold_metrics.append(float(score(val_ds.y, scores)))
            except EnetBoostError as exc:
                warnings.warn(f"trial {t} discarded: fold {i} failed: {exc}")
                failed = True
                break
        if failed:
            records.append(TrialRecord(t, params, (), None, failed=True))
            continue
        mean = sum(fold_metrics) / len(fold_metrics)
        records.append(TrialRecord(t, params, tuple(fold_metrics), mean))
        key = -mean if metric == "rmse" else mean
        if best_key is None or key > best_key:
            best_key = key
            best_config = params
    if best_config is None:
        raise SearchError(f"all {n_trials} trials failed")
    return best_config, records
