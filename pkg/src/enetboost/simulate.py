"""Synthetic regression study over sample-size and dimension grids.

Generates Friedman-style benchmark datasets (five active inputs, the
rest pure noise), runs the same 23-model matrix as the real-data
pipeline with fixed, budget-friendly configurations, and summarizes
test RMSE per model across replicates. Every cell derives its streams
from (seed, n, p, replicate), so cells can run in any order, on any
worker count, with identical output.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, kfold_random
from .enet import PenaltySpec, cv_glmnet, fit_glmnet, predict_glm, select_features
from .errors import ConfigError, EnetBoostError
from .metrics import rmse
from .pipeline import (
    LEARNER_PRESETS,
    PURE_ALPHAS,
    SELECTION_METHODS,
    matrix_plan,
)
from .rng import child_seed, key_of, substream
from .trees import ForestConfig, fit_gbdt, fit_random_forest, predict, preset_config

TEST_ROWS = 1000
SIM_N_TREES = 100
SIM_LEARNING_RATE = 0.12
SIM_GBT_OVERRIDES = {
    "xgb-like": {"max_depth": 4},
    "lgbm-like": {"num_leaves": 16, "max_depth": 12},
    "cat-like": {"max_depth": 5},
    "gbm-like": {"max_depth": 4},
}
SIM_RF = {"n_trees": 60, "max_depth": 14}


@dataclass(frozen=True)
class FriedmanSpec:
    """One synthetic dataset: n rows, p uniform inputs, additive noise."""

    n: int
    p: int
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.p < 5:
            raise ConfigError("p must be at least 5; the response uses five inputs")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be non-negative")


def friedman_response(X: np.ndarray) -> np.ndarray:
    """Noise-free response from the first five columns."""
    X = np.asarray(X, dtype=np.float64)
    return (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
            + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3]
            + 5.0 * X[:, 4])


def friedman1(spec: FriedmanSpec) -> Dataset:
    """Sample a dataset: inputs uniform on [0, 1], Gaussian noise on y."""
    rng = substream(spec.seed)
    X = rng.random((spec.n, spec.p))
    y = friedman_response(X) + spec.noise_sd * rng.standard_normal(spec.n)
    return Dataset.from_columns(
        [(f"x{j + 1}", X[:, j]) for j in range(spec.p)], target=("y", y))


@dataclass(frozen=True)
class SimRecord:
    """One model's result in one grid cell; error is set when the model
    failed and rmse is then None."""

    model_id: str
    n: int
    p: int
    replicate: int
    rmse: float | None
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "n": self.n,
            "p": self.p,
            "replicate": self.replicate,
            "rmse": self.rmse,
            "error": self.error,
        }


def _sim_model(preset: str, seed: int):
    if preset == "rf":
        return ForestConfig(seed=seed, task="regression", **SIM_RF)
    overrides = {"n_trees": SIM_N_TREES, "learning_rate": SIM_LEARNING_RATE,
                 "seed": seed, **SIM_GBT_OVERRIDES[preset]}
    return preset_config(preset, task="regression", **overrides)


def _fit_score(config, train: Dataset, test: Dataset) -> float:
    if isinstance(config, ForestConfig):
        model = fit_random_forest(train, config)
    else:
        model = fit_gbdt(train, config)
    return rmse(test.y, predict(model, test))


def _cell_records(seed: int, noise_sd: float, n: int, p: int, r: int,
                  presets, selections, k: int) -> list[SimRecord]:
    train = friedman1(FriedmanSpec(n, p, noise_sd, child_seed(seed, n, p, r, 0)))
    test = friedman1(FriedmanSpec(TEST_ROWS, p, noise_sd, child_seed(seed, n, p, r, 1)))
    folds = kfold_random(train.n_rows, k, child_seed(seed, n, p, r, 2))
    plan = matrix_plan(presets, selections)

    cv_by_alpha: dict = {}
    full_score: dict[str, float] = {}

    def cv_for(alpha: float):
        if alpha not in cv_by_alpha:
            cv_by_alpha[alpha] = cv_glmnet(train, alpha, folds, "mse")
        return cv_by_alpha[alpha]

    records = []
    for entry in plan:
        def run() -> float:
            if entry.kind == "pure":
                alpha = PURE_ALPHAS[entry.model_id]
                cv = cv_for(alpha)
                fit = fit_glmnet(train, PenaltySpec(alpha, cv.best_lambda), "gaussian")
                return rmse(test.y, predict_glm(fit, test))
            seed_l = child_seed(seed, n, p, r, key_of(entry.preset))
            if entry.kind == "full":
                value = _fit_score(_sim_model(entry.preset, seed_l), train, test)
                full_score[entry.preset] = value
                return value
            alpha = PURE_ALPHAS[entry.selection]
            cv = cv_for(alpha)
            fit = fit_glmnet(train, PenaltySpec(alpha, cv.best_lambda), "gaussian")
            top_m = min(p, 10) if entry.selection == "ridge" else None
            sel = select_features(fit, top_m=top_m)
            keep = set(sel.names)
            ordered = tuple(name for name in train.feature_names if name in keep)
            if ordered == train.feature_names and entry.preset in full_score:
                # a keep-everything selection refits the full model
                # bit for bit, so reuse its score instead
                return full_score[entry.preset]
            return _fit_score(_sim_model(entry.preset, seed_l),
                              train.select_features(ordered),
                              test.select_features(ordered))

        try:
            records.append(SimRecord(entry.model_id, n, p, r, run()))
        except EnetBoostError as exc:
            records.append(SimRecord(entry.model_id, n, p, r, None, str(exc)))
    return records


def _cell_job(args):
    return _cell_records(*args)


def run_simulation_grid(ns, ps, replicates: int, seed: int = 0,
                        noise_sd: float = 1.0, workers: int = 1,
                        presets=LEARNER_PRESETS, selections=SELECTION_METHODS,
                        k: int = 5) -> list[SimRecord]:
    """Run the model matrix on every (n, p, replicate) cell.

    A failed model yields an error-marker record and the grid moves on.
    Records come back grouped by cell in argument order, models in plan
    order within each cell, for any worker count.
    """
    ns, ps = list(ns), list(ps)
    if not ns or not ps:
        raise ConfigError("ns and ps must be non-empty")
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    matrix_plan(presets, selections)  # validate names up front
    jobs = [(seed, noise_sd, n, p, r, tuple(presets), tuple(selections), k)
            for n in ns for p in ps for r in range(replicates)]
    if workers <= 1 or len(jobs) <= 1:
        per_cell = [_cell_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_cell = list(pool.map(_cell_job, jobs))
    return [record for cell in per_cell for record in cell]


@dataclass(frozen=True)
class RmseSummary:
    model_id: str
    mean_rmse: float
    sd_rmse: float
    count: int

    def to_json(self) -> dict:
        return {"model_id": self.model_id, "mean_rmse": self.mean_rmse,
                "sd_rmse": self.sd_rmse, "count": self.count}


def summarize_rmse(records) -> list[RmseSummary]:
    """Per-model mean and sample standard deviation of RMSE across all
    successful records, best mean first. Error markers are skipped."""
    by_model: dict[str, list[float]] = {}
    for record in records:
        if record.rmse is not None:
            by_model.setdefault(record.model_id, []).append(record.rmse)
    rows = []
    for model_id, values in by_model.items():
        arr = np.array(values)
        sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        rows.append(RmseSummary(model_id, float(arr.mean()), sd, arr.size))
    rows.sort(key=lambda s: (s.mean_rmse, s.model_id))
    return rows


def write_sim_csv(records, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("model_id", "n", "p", "replicate", "rmse", "error"))
        for record in records:
            writer.writerow((
                record.model_id, record.n, record.p, record.replicate,
                "" if record.rmse is None else repr(record.rmse),
                record.error or "",
            ))


def write_sim_summary(records, path) -> None:
    rows = [s.to_json() for s in summarize_rmse(records)]
    errors = sum(1 for record in records if record.error is not None)
    payload = {"models": rows, "n_records": len(records), "n_errors": errors}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
