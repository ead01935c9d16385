"""End-to-end experiment orchestration.

Three run shapes share one skeleton: pure regularized baselines (CV
lambda, refit, test metrics), full-variable black-box runs (random
search, refit, test metrics), and hybrids (penalized selection on the
training split, then the black-box run on the kept features). Matrix
mode enumerates 3 pure + 5 full + 5x3 hybrid records.

Seeds: every model derives its stream from (seed, learner-preset key),
deliberately not from the selection method, so a selection that keeps
all variables reproduces the full-variable record bit for bit. Fold
assignments come from (seed, "folds") and are shared by every model in
a matrix.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, FoldAssignment, kfold_random, kfold_stratified
from .enet import (
    FeatureSelection,
    PenaltySpec,
    cv_glmnet,
    fit_glmnet,
    predict_glm,
    select_features,
)
from .errors import ConfigError, DataError, EmptySelectionError, ModelError
from .metrics import MetricBlock, auc, classification_metrics, confusion_at, rmse
from .rng import child_seed, key_of
from .trees import (
    ForestConfig,
    fit_gbdt,
    fit_random_forest,
    predict,
    preset_config,
)
from .tuning import LogUniform, PowerOfTwo, SearchSpace, Uniform, random_search

PURE_ALPHAS = {"ridge": 0.0, "lasso": 1.0, "elasticnet": 0.5}
SELECTION_METHODS = ("ridge", "lasso", "elasticnet")
LEARNER_PRESETS = ("rf", "xgb-like", "lgbm-like", "cat-like", "gbm-like")
RIDGE_TOP_M = 10


@dataclass(frozen=True)
class PlanEntry:
    """One matrix slot: a pure baseline, a full run, or a hybrid."""

    model_id: str
    kind: str  # pure | full | hybrid
    preset: str | None
    selection: str


def matrix_plan(presets=LEARNER_PRESETS,
                selections=SELECTION_METHODS) -> tuple[PlanEntry, ...]:
    """The model enumeration: pure baselines, then per-preset full and
    hybrid slots. Defaults give the 23-entry matrix."""
    entries = [PlanEntry(name, "pure", None, "pure-regularized")
               for name in PURE_ALPHAS]
    for preset in presets:
        if preset not in LEARNER_PRESETS:
            raise ConfigError(f"unknown learner preset {preset!r}")
        entries.append(PlanEntry(f"{preset}-full", "full", preset, "none"))
        for method in selections:
            if method not in SELECTION_METHODS:
                raise ConfigError(f"unknown selection method {method!r}")
            entries.append(PlanEntry(f"{preset}-{method}", "hybrid", preset, method))
    return tuple(entries)


@dataclass(frozen=True)
class EvaluationRecord:
    """One model's held-out evaluation.

    wall_seconds is measured in this process and deliberately left out
    of every serialization, so reruns and worker counts cannot perturb
    the output bytes.
    """

    model_id: str
    learner: str | None
    selection: str
    selected: tuple
    hyperparameters: dict
    metrics: MetricBlock
    wall_seconds: float

    @property
    def n_selected(self) -> int:
        return len(self.selected)

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "learner": self.learner,
            "selection": self.selection,
            "n_selected": self.n_selected,
            "selected": list(self.selected),
            "hyperparameters": dict(self.hyperparameters),
            "metrics": self.metrics.as_dict(),
        }


def audit_disjoint(train: Dataset, test: Dataset) -> None:
    """Structural leakage check on row ids."""
    overlap = set(train.row_ids.tolist()) & set(test.row_ids.tolist())
    if overlap:
        raise DataError(f"train/test leakage: shared row ids {sorted(overlap)[:5]}")


def _family_of(d: Dataset) -> str:
    if d.y is None:
        raise DataError("dataset has no target column")
    return "binomial" if np.isin(d.y, (0.0, 1.0)).all() else "gaussian"


def _folds_for(train: Dataset, k: int, seed: int, family: str) -> FoldAssignment:
    if family == "binomial":
        return kfold_stratified(train, k, seed)
    return kfold_random(train.n_rows, k, seed)


def _evaluate(y, scores, family: str) -> MetricBlock:
    if family == "binomial":
        block = classification_metrics(confusion_at(y, scores, 0.5))
        return replace(block, auc=auc(y, scores))
    return MetricBlock(rmse=rmse(y, scores))


def _method_name(alpha: float) -> str:
    if alpha == 0.0:
        return "ridge"
    if alpha == 1.0:
        return "lasso"
    return "elasticnet"


def run_regularized_baseline(train: Dataset, test: Dataset, alpha: float,
                             k: int = 3, seed: int = 0,
                             lam_override: float | None = None) -> EvaluationRecord:
    """CV-select lambda, refit on the full training split, score the test
    split. An all-zero refit (forced lambda at the path head) is refused."""
    start = time.perf_counter()
    audit_disjoint(train, test)
    family = _family_of(train)
    measure = "auc" if family == "binomial" else "mse"
    folds = _folds_for(train, k, child_seed(seed, key_of("folds")), family)
    cv = cv_glmnet(train, alpha, folds, measure)
    lam = cv.best_lambda if lam_override is None else lam_override
    fit = fit_glmnet(train, PenaltySpec(alpha, lam), family)
    nonzero = tuple(name for name, b in zip(fit.feature_names, fit.beta) if b != 0.0)
    if not nonzero:
        raise EmptySelectionError(
            f"{_method_name(alpha)} baseline at lambda {lam:g} kept no variables")
    scores = predict_glm(fit, test)
    metrics = _evaluate(test.y, scores, family)
    return EvaluationRecord(
        model_id=_method_name(alpha),
        learner=None,
        selection="pure-regularized",
        selected=nonzero,
        hyperparameters={"alpha": alpha, "lambda": lam},
        metrics=metrics,
        wall_seconds=time.perf_counter() - start,
    )


def select_by_regularization(train: Dataset, method: str, k: int = 3, seed: int = 0,
                             top_m: int = RIDGE_TOP_M) -> tuple[FeatureSelection, float]:
    """Penalized selection on the training split: CV lambda, refit, keep."""
    if method not in SELECTION_METHODS:
        raise ConfigError(f"unknown selection method {method!r}")
    alpha = PURE_ALPHAS[method]
    family = _family_of(train)
    measure = "auc" if family == "binomial" else "mse"
    folds = _folds_for(train, k, child_seed(seed, key_of("folds")), family)
    cv = cv_glmnet(train, alpha, folds, measure)
    fit = fit_glmnet(train, PenaltySpec(alpha, cv.best_lambda), family)
    try:
        sel = select_features(fit, top_m=top_m if method == "ridge" else None)
    except EmptySelectionError as exc:
        raise EmptySelectionError(f"{method} selection kept no variables: {exc}") from exc
    return sel, cv.best_lambda


def matrix_space(preset: str, n_features: int) -> SearchSpace:
    """Stock search spaces for matrix mode, sized to finish at desk scale.

    The tuner's own default_space carries the wider study-scale ranges;
    these are the budget-conscious defaults for the full 23-model matrix.
    """
    if preset == "rf":
        hi = min(10, n_features)
        return SearchSpace({
            "mtry": Uniform(min(2, hi), hi),
            "n_trees": Uniform(60, 200),
            "min_samples_leaf": Uniform(1, 5),
        })
    return SearchSpace({
        "max_depth": Uniform(3, 6),
        "num_leaves": PowerOfTwo(2, 5),
        "learning_rate": LogUniform(0.03, 0.3),
        "n_trees": Uniform(60, 200),
    })


def make_learner(preset: str, task: str):
    """Tuner-protocol learner: (train, params, seed) -> predict function.

    Sampled params map onto the preset's config; mtry is clamped to the
    projected feature count so hybrid runs stay valid.
    """
    def learner(train_ds: Dataset, params: dict, seed: int):
        if preset == "rf":
            c = ForestConfig(
                n_trees=params.get("n_trees", 100),
                mtry=min(params["mtry"], train_ds.n_features) if "mtry" in params else None,
                min_samples_leaf=params.get("min_samples_leaf", 1),
                max_depth=params.get("max_depth"),
                seed=seed,
                task=task,
            )
            model = fit_random_forest(train_ds, c)
        else:
            overrides = {"seed": seed}
            for name in ("n_trees", "max_depth", "learning_rate", "min_samples_leaf"):
                if name in params:
                    overrides[name] = params[name]
            if preset == "lgbm-like" and "num_leaves" in params:
                overrides["num_leaves"] = params["num_leaves"]
            model = fit_gbdt(train_ds, preset_config(preset, task=task, **overrides))
        return lambda ds: predict(model, ds)

    return learner


def _run_learner(train: Dataset, test: Dataset, preset: str, model_id: str,
                 selection_label: str, extra_hyper: dict, space: SearchSpace | None,
                 n_trials: int, k: int, seed: int) -> tuple[EvaluationRecord, np.ndarray]:
    start = time.perf_counter()
    audit_disjoint(train, test)
    family = _family_of(train)
    task = "classification" if family == "binomial" else "regression"
    metric = "auc" if family == "binomial" else "rmse"
    folds = _folds_for(train, k, child_seed(seed, key_of("folds")), family)
    if space is None:
        space = matrix_space(preset, train.n_features)
    learner = make_learner(preset, task)
    seed_l = child_seed(seed, key_of(preset))
    best, _trials = random_search(train, space, folds, metric, learner,
                                  n_trials=n_trials, seed=seed_l)
    predict_fn = learner(train, best, child_seed(seed_l, key_of("refit")))
    scores = predict_fn(test)
    metrics = _evaluate(test.y, scores, family)
    record = EvaluationRecord(
        model_id=model_id,
        learner=preset,
        selection=selection_label,
        selected=train.feature_names,
        hyperparameters={**best, **extra_hyper},
        metrics=metrics,
        wall_seconds=time.perf_counter() - start,
    )
    return record, scores


def run_fullvar_blackbox(train: Dataset, test: Dataset, learner_preset: str,
                         space: SearchSpace | None = None, n_trials: int = 2,
                         k: int = 3, seed: int = 0) -> EvaluationRecord:
    record, _ = _run_learner(train, test, learner_preset, f"{learner_preset}-full",
                             "none", {}, space, n_trials, k, seed)
    return record


def run_hybrid(train: Dataset, test: Dataset, selection_alpha: float,
               learner_preset: str, space: SearchSpace | None = None,
               n_trials: int = 2, k: int = 3, seed: int = 0) -> EvaluationRecord:
    """Penalized selection, then the black-box run on the kept features."""
    method = _method_name(selection_alpha)
    sel, lam = select_by_regularization(train, method, k=k, seed=seed)
    # keep original column order so a keep-everything selection reproduces
    # the full-variable run exactly
    keep = set(sel.names)
    ordered = tuple(n for n in train.feature_names if n in keep)
    train_s = train.select_features(ordered)
    test_s = test.select_features(ordered)
    extra = {"selection_alpha": selection_alpha, "selection_lambda": lam}
    record, _ = _run_learner(train_s, test_s, learner_preset,
                             f"{learner_preset}-{method}", method, extra,
                             space, n_trials, k, seed)
    return record


@dataclass(frozen=True)
class FailedRun:
    """Error marker for one matrix slot when failures are recorded
    instead of raised."""

    model_id: str
    error: str

    def to_json(self) -> dict:
        return {"model_id": self.model_id, "error": self.error}


def _matrix_job(args):
    (index, train, test, entry, sel_names, extra, space,
     n_trials, k, seed, record_errors) = args
    if sel_names is not None:
        keep = set(sel_names)
        ordered = tuple(n for n in train.feature_names if n in keep)
        train = train.select_features(ordered)
        test = test.select_features(ordered)
    try:
        record, scores = _run_learner(train, test, entry.preset, entry.model_id,
                                      entry.selection, extra, space, n_trials, k, seed)
    except ModelError as exc:
        if not record_errors:
            raise
        return index, FailedRun(entry.model_id, str(exc)), None
    return index, record, scores


def run_matrix(train: Dataset, test: Dataset, k: int = 3, n_trials: int = 2,
               seed: int = 0, workers: int = 1,
               presets=LEARNER_PRESETS, selections=SELECTION_METHODS,
               include_pure: bool = True, spaces: dict | None = None,
               errors: str = "raise") -> list:
    """Run the model matrix; results come back in plan order.

    Pure baselines and the three penalized selections share one CV curve
    per alpha. Learner slots are independent jobs; any worker count
    produces identical records because every stream is position-keyed.

    spaces maps a preset name to a SearchSpace replacing its stock one.
    With errors="record", a model failure becomes a FailedRun in that
    slot and the rest of the matrix still runs; configuration and data
    problems raise either way.
    """
    if errors not in ("raise", "record"):
        raise ConfigError(f"errors must be 'raise' or 'record', got {errors!r}")
    record_errors = errors == "record"
    audit_disjoint(train, test)
    family = _family_of(train)
    measure = "auc" if family == "binomial" else "mse"
    folds = _folds_for(train, k, child_seed(seed, key_of("folds")), family)
    plan = matrix_plan(presets, selections)
    if not include_pure:
        plan = tuple(e for e in plan if e.kind != "pure")

    cv_by_alpha = {}
    for entry in plan:
        method = entry.model_id if entry.kind == "pure" else entry.selection
        alpha = PURE_ALPHAS.get(method)
        if alpha is not None and alpha not in cv_by_alpha:
            cv_by_alpha[alpha] = cv_glmnet(train, alpha, folds, measure)

    results: list = [None] * len(plan)
    jobs = []
    for index, entry in enumerate(plan):
        if entry.kind == "pure":
            start = time.perf_counter()
            alpha = PURE_ALPHAS[entry.model_id]
            cv = cv_by_alpha[alpha]
            fit = fit_glmnet(train, PenaltySpec(alpha, cv.best_lambda), family)
            nonzero = tuple(n for n, b in zip(fit.feature_names, fit.beta) if b != 0.0)
            if not nonzero:
                exc = EmptySelectionError(
                    f"{entry.model_id} baseline kept no variables")
                if not record_errors:
                    raise exc
                results[index] = (FailedRun(entry.model_id, str(exc)), None)
                continue
            scores = predict_glm(fit, test)
            record = EvaluationRecord(
                model_id=entry.model_id, learner=None,
                selection="pure-regularized", selected=nonzero,
                hyperparameters={"alpha": alpha, "lambda": cv.best_lambda},
                metrics=_evaluate(test.y, scores, family),
                wall_seconds=time.perf_counter() - start,
            )
            results[index] = (record, scores)
            continue
        if entry.kind == "hybrid":
            alpha = PURE_ALPHAS[entry.selection]
            cv = cv_by_alpha[alpha]
            fit = fit_glmnet(train, PenaltySpec(alpha, cv.best_lambda), family)
            try:
                sel = select_features(
                    fit, top_m=RIDGE_TOP_M if entry.selection == "ridge" else None)
            except EmptySelectionError as exc:
                wrapped = EmptySelectionError(
                    f"{entry.selection} selection kept no variables: {exc}")
                if not record_errors:
                    raise wrapped from exc
                results[index] = (FailedRun(entry.model_id, str(wrapped)), None)
                continue
            sel_names = sel.names
            extra = {"selection_alpha": alpha, "selection_lambda": cv.best_lambda}
        else:
            sel_names = None
            extra = {}
        space = None if spaces is None else spaces.get(entry.preset)
        jobs.append((index, train, test, entry, sel_names, extra, space,
                     n_trials, k, seed, record_errors))

    if workers <= 1 or len(jobs) <= 1:
        outputs = [_matrix_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_matrix_job, jobs))
    for index, record, scores in outputs:
        results[index] = (record, scores)
    return results


def auc_by_nvars(train: Dataset, test: Dataset, ranking: FeatureSelection,
                 learner_or_glm, k: int = 3, seed: int = 0) -> list[tuple[int, float]]:
    """AUC on the test split as the top-m ranked variables grow.

    learner_or_glm is either an alpha (penalized GLM refit with lambda
    re-selected by CV at each m) or a (preset, params) pair fitted as-is
    on each projection.
    """
    if not ranking.selected:
        raise ConfigError("empty ranking")
    train.require_binary_target()
    names = ranking.names
    folds = _folds_for(train, k, child_seed(seed, key_of("folds")), "binomial")
    curve = []
    for m in range(1, len(names) + 1):
        sub = names[:m]
        train_m = train.select_features(sub)
        test_m = test.select_features(sub)
        if isinstance(learner_or_glm, (int, float)):
            alpha = float(learner_or_glm)
            cv = cv_glmnet(train_m, alpha, folds, "auc")
            fit = fit_glmnet(train_m, PenaltySpec(alpha, cv.best_lambda), "binomial")
            scores = predict_glm(fit, test_m)
        else:
            preset, params = learner_or_glm
            learner = make_learner(preset, "classification")
            predict_fn = learner(train_m, params, child_seed(seed, key_of("curve"), m))
            scores = predict_fn(test_m)
        curve.append((m, auc(test_m.y, scores)))
    return curve


CSV_COLUMNS = ("model_id", "learner", "selection", "n_selected", "selected",
               "hyperparameters", "accuracy", "precision", "recall",
               "specificity", "f1", "balanced_accuracy", "auc", "rmse")


def write_records_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), sort_keys=True))
            fh.write("\n")


def write_records_csv(records, path) -> None:
    """Flat table: one row per record, metric columns expanded."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            m = record.metrics.as_dict()
            writer.writerow([
                record.model_id,
                record.learner or "",
                record.selection,
                record.n_selected,
                ";".join(record.selected),
                json.dumps(record.hyperparameters, sort_keys=True),
                *(("" if m[name] is None else repr(m[name]))
                  for name in CSV_COLUMNS[6:]),
            ])
