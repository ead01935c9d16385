"""End-to-end acceptance tests, one per shipped guarantee.

Each test pins a promise the package makes: golden metric rows, oracle
agreement, optimizer optimality, split hygiene, boosting invariants, the
simulation ranking, selection recovery, byte-level determinism, and
matrix completeness. Runtime budgets are asserted alongside correctness
so a performance regression fails just as loudly.
"""
import os
import time

import numpy as np

from enetboost.cli import main
from enetboost.data import Dataset, kfold_stratified, split_stratified, write_csv
from enetboost.enet import (
    PenaltySpec,
    fit_enet_binomial,
    fit_enet_gaussian,
    lambda_path,
    soft_threshold,
)
from enetboost.metrics import ConfusionMatrix, auc, classification_metrics
from enetboost.pipeline import (
    audit_disjoint,
    matrix_plan,
    run_matrix,
    select_by_regularization,
)
from enetboost.rng import child_seed
from enetboost.simulate import FriedmanSpec, friedman1, run_simulation_grid, summarize_rmse
from enetboost.trees import GbtConfig, fit_gbdt, predict

from oracles import auc_pairwise, kkt_violation_binomial, kkt_violation_gaussian

WORKERS = min(8, os.cpu_count() or 1)

# Three reference confusion tables as (tp, fn, fp, tn) and the
# four-figure metric rows they are expected to reproduce.
GOLDEN_CLASSIFICATION_ROWS = (
    ("ridge", (187, 97, 39, 216),
     {"accuracy": 0.7477, "recall": 0.6585, "specificity": 0.8471,
      "precision": 0.8274, "f1": 0.7330, "balanced_accuracy": 0.7528}),
    ("lasso", (187, 97, 34, 221),
     {"accuracy": 0.7570, "recall": 0.6585, "specificity": 0.8667,
      "precision": 0.8462, "f1": 0.7402, "balanced_accuracy": 0.7626}),
    ("elasticnet", (187, 97, 37, 218),
     {"accuracy": 0.7514, "recall": 0.6585, "specificity": 0.8549,
      "precision": 0.8348, "f1": 0.7362, "balanced_accuracy": 0.7567}),
)


def _table(X, y):
    X = np.asarray(X, dtype=float)
    cols = [(f"x{j + 1}", X[:, j]) for j in range(X.shape[1])]
    return Dataset.from_columns(cols, ("y", np.asarray(y, dtype=float)))


def _standardized_instance(rng, n, p, family):
    X = rng.normal(size=(n, p))
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    beta = rng.normal(scale=1.0, size=p) * (rng.random(p) < 0.5)
    eta = X @ beta + 0.3 * rng.normal()
    if family == "gaussian":
        return X, eta + rng.normal(size=n)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    if y.min() == y.max():
        y[0] = 1.0 - y[0]
    return X, y


def test_confusion_metrics_match_golden_rows():
    off = []
    for name, (tp, fn, fp, tn), expected in GOLDEN_CLASSIFICATION_ROWS:
        block = classification_metrics(ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn))
        for metric, want in expected.items():
            got = getattr(block, metric)
            if abs(got - want) > 5e-5:
                off.append(f"{name} {metric}: computed {got:.6f} vs tabulated {want}")
    assert not off, "; ".join(off)


def test_auc_equals_pairwise_concordance():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    for trial in range(100):
        n = int(rng.integers(10, 201))
        y = (rng.random(n) < rng.uniform(0.2, 0.8)).astype(float)
        if y.min() == y.max():
            y[0] = 1.0 - y[0]
        scores = rng.normal(size=n)
        if trial % 2:
            scores = np.round(scores, 1)  # quantized draws force ties
        assert abs(auc(y, scores) - auc_pairwise(y, scores)) <= 1e-12, f"trial {trial}"
    assert time.perf_counter() - start < 1.0


def test_elastic_net_kkt_closed_form_and_lambda_max():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    for i in range(50):
        n = int(rng.integers(30, 201))
        p = int(rng.integers(2, 51))
        X, y = _standardized_instance(rng, n, p, "gaussian")
        alpha = (1.0, 0.5, 0.3)[i % 3]
        grid = lambda_path(X, y, alpha, n_lambda=20)
        lam = float(grid[10])
        fit = fit_enet_gaussian(X, y, PenaltySpec(alpha, lam))
        assert fit.converged, f"gaussian instance {i}"
        viol = kkt_violation_gaussian(X, y, fit.intercept, fit.beta, lam, alpha)
        assert viol <= 1e-6, f"gaussian instance {i}: violation {viol}"
    for i in range(20):
        n = int(rng.integers(40, 201))
        p = int(rng.integers(2, 16))
        X, y = _standardized_instance(rng, n, p, "binomial")
        alpha = (1.0, 0.5)[i % 2]
        grid = lambda_path(X, y, alpha, n_lambda=20, family="binomial")
        lam = float(grid[6])
        fit = fit_enet_binomial(X, y, PenaltySpec(alpha, lam))
        assert fit.converged, f"binomial instance {i}"
        viol = kkt_violation_binomial(X, y, fit.intercept, fit.beta, lam, alpha)
        assert viol <= 1e-6, f"binomial instance {i}: violation {viol}"
    # the one-feature problem has an explicit solution
    for seed in range(8):
        r2 = np.random.default_rng(300 + seed)
        n = int(r2.integers(20, 120))
        x = r2.normal(size=n)
        x = (x - x.mean()) / x.std()  # unit second moment makes the form exact
        y = 1.4 * x + r2.normal(size=n) + 0.6
        z = float(x @ y) / n
        for alpha, lam in ((1.0, 0.4), (0.5, 0.8), (0.25, 1.1), (1.0, abs(z) * 1.05)):
            fit = fit_enet_gaussian(x[:, None], y, PenaltySpec(alpha, lam), tol=1e-12)
            want = soft_threshold(z, lam * alpha) / (1.0 + lam * (1.0 - alpha))
            assert abs(fit.beta[0] - want) <= 1e-8, f"seed {seed} alpha {alpha}"
    # at the top of the path every penalized coefficient is exactly zero
    for family, fitter in (("gaussian", fit_enet_gaussian), ("binomial", fit_enet_binomial)):
        for alpha in (0.5, 1.0):
            X, y = _standardized_instance(np.random.default_rng(77), 60, 8, family)
            grid = lambda_path(X, y, alpha, n_lambda=5, family=family)
            fit = fitter(X, y, PenaltySpec(alpha, float(grid[0])))
            assert np.all(fit.beta == 0.0), f"{family} alpha {alpha}"
    assert time.perf_counter() - start < 30.0


def test_stratified_fold_balance_and_split_size():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    for draw in range(200):
        k = int(rng.integers(2, 11))
        n = int(rng.integers(2 * k + 2, 400))
        balance = float(rng.uniform(0.15, 0.85))
        n_pos = int(np.clip(round(balance * n), k, n - k))
        y = np.zeros(n)
        y[:n_pos] = 1.0
        rng.shuffle(y)
        d = Dataset.from_columns([("x1", rng.normal(size=n))], ("y", y))
        folds = kfold_stratified(d, k, int(rng.integers(10_000)))
        for f in range(k):
            got = float(d.y[folds.val_rows(f)].sum())
            assert abs(got - n_pos / k) <= 1.0, f"draw {draw} fold {f}"
    y = np.zeros(2697)
    y[:1070] = 1.0
    rng.shuffle(y)
    d = Dataset.from_columns([("x1", rng.normal(size=2697))], ("y", y))
    train, test = split_stratified(d, 0.2, seed=41)
    assert (train.n_rows, test.n_rows) == (2158, 539)
    assert time.perf_counter() - start < 5.0


def test_boosting_loss_monotone_stump_and_invariance():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    for trial in range(20):
        loss = "squared" if trial % 2 == 0 else "logistic"
        n = int(rng.integers(60, 200))
        p = int(rng.integers(2, 6))
        X = rng.normal(size=(n, p))
        eta = X[:, 0] - 0.6 * X[:, -1] + 0.4 * rng.normal(size=n)
        if loss == "squared":
            y = eta
        else:
            y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
            if y.min() == y.max():
                y[0] = 1.0 - y[0]
        d = _table(X, y)
        model = fit_gbdt(d, GbtConfig(n_trees=20, max_depth=3,
                                      learning_rate=0.25, loss=loss))
        curve = []
        for t in range(21):
            raw = model.raw_scores(d.X, n_trees=t)
            if loss == "squared":
                curve.append(float(np.mean((d.y - raw) ** 2)))
            else:
                prob = np.clip(1.0 / (1.0 + np.exp(-raw)), 1e-12, 1 - 1e-12)
                curve.append(float(-np.mean(
                    d.y * np.log(prob) + (1 - d.y) * np.log(1 - prob))))
        assert np.all(np.diff(curve) <= 1e-12), f"trial {trial}"
    # a single stump at unit learning rate reproduces a step exactly
    d = _table(np.array([[0.0], [1.0], [2.0], [3.0]]), [0.0, 0.0, 1.0, 1.0])
    stump = fit_gbdt(d, GbtConfig(n_trees=1, max_depth=1, learning_rate=1.0,
                                  loss="squared"))
    np.testing.assert_array_equal(predict(stump, d), [0.0, 0.0, 1.0, 1.0])
    # strictly increasing transforms keep every split order, so the
    # fitted ensembles agree on the rows they saw; thresholds live at
    # neighbor midpoints, which only affine maps carry over to new rows
    X = rng.normal(size=(150, 3))
    y = (X[:, 0] + X[:, 1] ** 2 > 0.6).astype(float)
    Xt = np.column_stack([3.0 * X[:, 0] - 1.0, X[:, 1] ** 3, np.exp(X[:, 2])])
    config = GbtConfig(n_trees=10, max_depth=3, learning_rate=0.2, loss="logistic")
    m_raw = fit_gbdt(_table(X, y), config)
    m_mono = fit_gbdt(_table(Xt, y), config)
    np.testing.assert_array_equal(predict(m_raw, X), predict(m_mono, Xt))
    X_aff = 3.0 * X - 1.0
    m_aff = fit_gbdt(_table(X_aff, y), config)
    X_new = rng.normal(size=(60, 3))
    np.testing.assert_array_equal(predict(m_raw, X_new),
                                  predict(m_aff, 3.0 * X_new - 1.0))
    assert time.perf_counter() - start < 30.0


def test_boosted_models_outperform_linear_baselines():
    start = time.perf_counter()
    records = run_simulation_grid([1000], [10], 30, seed=0, workers=WORKERS)
    elapsed = time.perf_counter() - start
    failed = [r.model_id for r in records if r.error is not None]
    assert not failed, f"failed cells: {failed[:5]}"
    summary = summarize_rmse(records)
    assert len(summary) == 23
    assert all(row.count == 30 for row in summary)
    means = {row.model_id: row.mean_rmse for row in summary}
    pure = {m: means.pop(m) for m in ("ridge", "lasso", "elasticnet")}
    # forest slots sit between the two groups and carry no band
    boosted = {m: v for m, v in means.items() if not m.startswith("rf-")}
    assert len(boosted) == 16
    for model_id, value in pure.items():
        assert 2.3 <= value <= 3.1, f"{model_id} mean {value:.3f}"
    for model_id, value in boosted.items():
        assert 1.2 <= value <= 2.3, f"{model_id} mean {value:.3f}"
    assert max(boosted.values()) <= min(pure.values()) - 0.3
    assert elapsed < 600.0, f"grid took {elapsed:.0f}s"


def test_lasso_selection_recovers_true_signal():
    start = time.perf_counter()
    linear_terms = {"x4", "x5"}
    signal = {"x1", "x2", "x3", "x4", "x5"}
    always, kept_signal, kept_noise = True, [], []
    for r in range(30):
        d = friedman1(FriedmanSpec(500, 50, 1.0, child_seed(7, r)))
        sel, _lam = select_by_regularization(d, "lasso", k=5, seed=child_seed(7, r, 1))
        names = set(sel.names)
        always = always and linear_terms <= names
        kept_signal.append(len(names & signal))
        kept_noise.append(len(names - signal))
    assert always, "a strong linear term fell out of some replicate"
    # x3 enters through a centered square and is invisible to a linear
    # fit, so the recovery floor sits at three of five
    assert float(np.mean(kept_signal)) >= 3.0
    assert float(np.mean(kept_noise)) <= 0.2 * 45
    assert time.perf_counter() - start < 300.0


def test_byte_identical_outputs_and_no_leakage(tmp_path):
    parent = friedman1(FriedmanSpec(260, 5, 1.0, seed=81))
    table = tmp_path / "table.csv"
    write_csv(parent, table)
    matrix_args = ["matrix", "--input", str(table), "--target", "y",
                   "--seed", "5", "--k", "2", "--n-trials", "1",
                   "--presets", "xgb-like", "--selections", "lasso"]
    names = ("records.jsonl", "records.csv", "predictions.csv")
    runs = {}
    for tag, workers in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / f"m_{tag}"
        assert main(matrix_args + ["--out", str(out), "--workers", str(workers)]) == 0
        runs[tag] = {name: (out / name).read_bytes() for name in names}
    assert runs["a"] == runs["b"], "matrix rerun changed bytes"
    assert runs["a"] == runs["c"], "matrix worker count changed bytes"
    sim_args = ["simulate", "--ns", "120", "--ps", "5", "--replicates", "2",
                "--seed", "9", "--presets", "gbm-like", "--selections", "ridge"]
    sim_names = ("sim_records.csv", "sim_summary.json")
    sim_runs = {}
    for tag, workers in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / f"s_{tag}"
        assert main(sim_args + ["--out", str(out), "--workers", str(workers)]) == 0
        sim_runs[tag] = {name: (out / name).read_bytes() for name in sim_names}
    assert sim_runs["a"] == sim_runs["b"], "simulate rerun changed bytes"
    assert sim_runs["a"] == sim_runs["c"], "simulate worker count changed bytes"
    # leakage audit: the split shares no row ids, and nothing fitted on
    # the training side moves when the test rows change
    big = friedman1(FriedmanSpec(420, 6, 1.0, seed=82))
    order = np.random.default_rng(83).permutation(420)
    train = big.take(np.sort(order[:300]))
    test_a = big.take(np.sort(order[300:360]))
    test_b = big.take(np.sort(order[360:]))
    audit_disjoint(train, test_a)
    audit_disjoint(train, test_b)
    run_a = run_matrix(train, test_a, k=2, n_trials=1, seed=6,
                       presets=("xgb-like",), selections=("lasso",))
    run_b = run_matrix(train, test_b, k=2, n_trials=1, seed=6,
                       presets=("xgb-like",), selections=("lasso",))
    for (rec_a, _), (rec_b, _) in zip(run_a, run_b):
        assert rec_a.model_id == rec_b.model_id
        assert rec_a.selected == rec_b.selected
        assert rec_a.hyperparameters == rec_b.hyperparameters
    # the comparison is not vacuous: the two test sets score differently
    assert any(a.metrics.rmse != b.metrics.rmse
               for (a, _), (b, _) in zip(run_a, run_b))


def test_full_matrix_emits_every_planned_model():
    start = time.perf_counter()
    parent = friedman1(FriedmanSpec(625, 10, 1.0, child_seed(9, 0)))
    order = np.random.default_rng(child_seed(9, 1)).permutation(625)
    train = parent.take(np.sort(order[:500]))
    test = parent.take(np.sort(order[500:]))
    pairs = run_matrix(train, test, k=3, n_trials=2, seed=17, workers=WORKERS)
    records = [record for record, _ in pairs]
    assert [r.model_id for r in records] == [e.model_id for e in matrix_plan()]
    pure = [r for r in records if r.learner is None]
    full = [r for r in records if r.learner is not None and r.selection == "none"]
    hybrid = [r for r in records if r.learner is not None and r.selection != "none"]
    assert (len(pure), len(full), len(hybrid)) == (3, 5, 15)
    for r in records:
        assert r.metrics.rmse is not None and np.isfinite(r.metrics.rmse), r.model_id
        assert r.selected
    assert time.perf_counter() - start < 300.0
