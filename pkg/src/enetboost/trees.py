"""Tree ensembles from scratch: Newton-step boosting and a bootstrap forest.

One engine covers three growth policies (depth-wise, leaf-wise under a
leaf cap, and symmetric trees whose levels share a single split), with
presets that mimic the usual boosting libraries by configuration rather
than by reimplementation. Split search is exact greedy over midpoints of
consecutive distinct sorted feature values; the same scan drives the
forest's impurity splits with unit hessians.

Split gain is G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - (G_L+G_R)^2/(H_L+H_R+l2)
and a leaf weighs -G/(H + l2); denominators are floored at 1e-12.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError, SchemaError
from .metrics import auc, rmse
from .rng import substream

HESS_FLOOR = 1e-12


@dataclass(frozen=True)
class GbtConfig:
    """Boosting configuration; growth selects the tree-shape policy.

    symmetric grows depth-wise trees whose levels each share one split
    (oblivious trees); first_order replaces hessians with row counts, so
    leaf weights become shrunken mean residuals.
    """

    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    l2_leaf_reg: float = 0.0
    growth: str = "depth_wise"
    num_leaves: int | None = None
    min_samples_leaf: int = 1
    loss: str = "squared"
    seed: int = 0
    symmetric: bool = False
    first_order: bool = False

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be at least 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be at least 1, got {self.max_depth}")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must be in [0, 1], got {self.learning_rate}")
        if self.l2_leaf_reg < 0.0:
            raise ConfigError(f"l2_leaf_reg must be non-negative, got {self.l2_leaf_reg}")
        if self.growth not in ("depth_wise", "leaf_wise"):
            raise ConfigError(f"unknown growth policy {self.growth!r}")
        if self.growth == "leaf_wise" and (self.num_leaves is None or self.num_leaves < 2):
            raise ConfigError("leaf_wise growth needs num_leaves >= 2")
        if self.min_samples_leaf < 1:
            raise ConfigError(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}")
        if self.loss not in ("squared", "logistic"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.symmetric and self.growth != "depth_wise":
            raise ConfigError("symmetric trees use depth_wise growth")

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "l2_leaf_reg": self.l2_leaf_reg,
            "growth": self.growth,
            "num_leaves": self.num_leaves,
            "min_samples_leaf": self.min_samples_leaf,
            "loss": self.loss,
            "seed": self.seed,
            "symmetric": self.symmetric,
            "first_order": self.first_order,
        }


@dataclass(frozen=True)
class ForestConfig:
    """Random-forest configuration; mtry None applies the sqrt(p) rule."""

    n_trees: int = 100
    mtry: int | None = None
    min_samples_leaf: int = 1
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 0
    task: str = "auto"

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be at least 1, got {self.n_trees}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"mtry must be at least 1, got {self.mtry}")
        if self.min_samples_leaf < 1:
            raise ConfigError(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError(f"max_depth must be at least 1, got {self.max_depth}")
        if self.task not in ("auto", "classification", "regression"):
            raise ConfigError(f"unknown task {self.task!r}")

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "mtry": self.mtry,
            "min_samples_leaf": self.min_samples_leaf,
            "max_depth": self.max_depth,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "task": self.task,
        }


@dataclass(frozen=True)
class SplitCandidate:
    threshold: float
    gain: float


@dataclass
class _Tree:
    """Flat node arrays; feature -1 marks a leaf."""

    feature: list = field(default_factory=lambda: [-1])
    threshold: list = field(default_factory=lambda: [0.0])
    left: list = field(default_factory=lambda: [-1])
    right: list = field(default_factory=lambda: [-1])
    gain: list = field(default_factory=lambda: [0.0])
    weight: list = field(default_factory=lambda: [0.0])
    n_rows: list = field(default_factory=lambda: [0])

    def add_node(self, count: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.gain.append(0.0)
        self.weight.append(0.0)
        self.n_rows.append(count)
        return len(self.feature) - 1

    def make_internal(self, node: int, feat: int, thr: float, gain: float,
                      n_left: int, n_right: int) -> tuple[int, int]:
        self.feature[node] = feat
        self.threshold[node] = thr
        self.gain[node] = gain
        l = self.add_node(n_left)
        r = self.add_node(n_right)
        self.left[node] = l
        self.right[node] = r
        return l, r

    def scores(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if self.feature[node] < 0:
                out[rows] = self.weight[node]
                continue
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], rows[go_left]))
            stack.append((self.right[node], rows[~go_left]))
        return out

    def to_json(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": [float(t) for t in self.threshold],
            "left": list(self.left),
            "right": list(self.right),
            "gain": [float(g) for g in self.gain],
            "weight": [float(w) for w in self.weight],
            "n_rows": list(self.n_rows),
        }


def _scan(Xn: np.ndarray, g: np.ndarray, h: np.ndarray, l2: float, min_leaf: int):
    """Best split over the columns of Xn for one node.

    Returns (local_feature, threshold, gain, position_order) or None. Ties
    resolve to the lowest column index, then the lowest threshold, via a
    feature-major argmax.
    """
    m, f = Xn.shape
    if m < 2 * min_leaf:
        return None
    # constant g and h makes every gain <= 0 (x^2/(x*c+l2) is superadditive)
    if g.min() == g.max() and h.min() == h.max():
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    gs = g[order]
    hs = h[order]
    GL = np.cumsum(gs, axis=0)[:-1]
    HL = np.cumsum(hs, axis=0)[:-1]
    G = float(g.sum())
    H = float(h.sum())
    parent = G * G / max(H + l2, HESS_FLOOR)
    gains = (GL * GL / np.maximum(HL + l2, HESS_FLOOR)
             + (G - GL) ** 2 / np.maximum(H - HL + l2, HESS_FLOOR)
             - parent)
    mids = (xs[:-1] + xs[1:]) / 2.0
    counts = np.arange(1, m)[:, None]
    valid = (xs[:-1] < mids) & (mids < xs[1:])
    valid &= (counts >= min_leaf) & (m - counts >= min_leaf)
    gains[~valid] = -np.inf
    flat = np.ravel(gains.T)
    k = int(np.argmax(flat))
    best = flat[k]
    if not best > 0.0:
        return None
    j = k // (m - 1)
    i = k % (m - 1)
    return j, float(mids[i, j]), float(best), order[:, j]


def best_split(node_rows, feature, gradients, hessians, l2: float,
               min_leaf: int) -> SplitCandidate | None:
    """Best threshold for a single feature on the given node rows.

    All array arguments are full-length columns indexed by node_rows.
    Returns None when no candidate has strictly positive gain (constant
    feature, perfectly fit node, or leaf-size floor unsatisfiable).
    """
    rows = np.asarray(node_rows, dtype=np.int64)
    x = np.asarray(feature, dtype=np.float64)[rows]
    g = np.asarray(gradients, dtype=np.float64)[rows]
    h = np.asarray(hessians, dtype=np.float64)[rows]
    hit = _scan(x[:, None], g, h, l2, min_leaf)
    if hit is None:
        return None
    _, thr, gain, _ = hit
    return SplitCandidate(thr, gain)


def _leaf_weight_newton(l2):
    def value(G, H, count):
        return -G / max(H + l2, HESS_FLOOR)
    return value


def _node_feature_subset(p, rng, mtry):
    if mtry is None or mtry >= p:
        return np.arange(p)
    return np.sort(rng.choice(p, size=mtry, replace=False))


def _grow_depth_wise(X, rows0, g, h, l2, min_leaf, max_depth, leaf_value,
                     train_scores, rng=None, mtry=None, gain_scale=1.0) -> _Tree:
    """Breadth-first growth to max_depth (None for unbounded)."""
    tree = _Tree()
    tree.n_rows[0] = rows0.size
    depth_cap = math.inf if max_depth is None else max_depth
    queue = [(0, rows0, 0)]
    p = X.shape[1]
    while queue:
        node, rows, depth = queue.pop(0)
        gr = g[rows]
        hr = h[rows]
        hit = None
        if depth < depth_cap and rows.size >= 2 * min_leaf:
            feat_idx = _node_feature_subset(p, rng, mtry)
            hit = _scan(X[np.ix_(rows, feat_idx)], gr, hr, l2, min_leaf)
        if hit is None:
            tree.weight[node] = leaf_value(float(gr.sum()), float(hr.sum()), rows.size)
            train_scores[rows] = tree.weight[node]
            continue
        j_local, thr, gain, _ = hit
        feat = int(feat_idx[j_local])
        go_left = X[rows, feat] <= thr
        left_rows = rows[go_left]
        right_rows = rows[~go_left]
        l, r = tree.make_internal(node, feat, thr, gain * gain_scale,
                                  left_rows.size, right_rows.size)
        queue.append((l, left_rows, depth + 1))
        queue.append((r, right_rows, depth + 1))
    return tree


def _grow_leaf_wise(X, rows0, g, h, l2, min_leaf, max_depth, num_leaves,
                    leaf_value, train_scores) -> _Tree:
    """Best-first growth: repeatedly split the highest-gain leaf.

    Equal gains across leaves resolve to the earlier-created leaf; the
    within-node feature/threshold tie-break comes from the shared scan.
    """
    tree = _Tree()
    tree.n_rows[0] = rows0.size
    heap = []
    seq = 0
    depth_of = {0: 0}
    rows_of = {0: rows0}

    def consider(node):
        nonlocal seq
        rows = rows_of[node]
        if depth_of[node] >= max_depth or rows.size < 2 * min_leaf:
            return
        hit = _scan(X[rows], g[rows], h[rows], l2, min_leaf)
        if hit is not None:
            j, thr, gain, _ = hit
            heapq.heappush(heap, (-gain, seq, node, j, thr))
            seq += 1

    consider(0)
    n_leaves = 1
    while heap and n_leaves < num_leaves:
        neg_gain, _, node, feat, thr = heapq.heappop(heap)
        rows = rows_of.pop(node)
        go_left = X[rows, feat] <= thr
        left_rows = rows[go_left]
        right_rows = rows[~go_left]
        l, r = tree.make_internal(node, int(feat), thr, -neg_gain,
                                  left_rows.size, right_rows.size)
        depth_of[l] = depth_of[r] = depth_of.pop(node) + 1
        rows_of[l] = left_rows
        rows_of[r] = right_rows
        consider(l)
        consider(r)
        n_leaves += 1
    for node, rows in rows_of.items():
        tree.weight[node] = leaf_value(float(g[rows].sum()), float(h[rows].sum()), rows.size)
        train_scores[rows] = tree.weight[node]
    return tree


def _grow_symmetric(X, g, h, l2, min_leaf, max_depth, leaf_value, train_scores) -> _Tree:
    """Oblivious growth: every level applies one shared (feature, threshold).

    The candidate maximizing the summed gain over all current leaves wins;
    the leaf-size floor applies to the level's total left/right row counts.
    Empty children become zero-weight leaves immediately.
    """
    n, p = X.shape
    tree = _Tree()
    tree.n_rows[0] = n
    presort = np.argsort(X, axis=0, kind="stable")
    assign = np.zeros(n, dtype=np.int64)  # slot in the active-leaf list
    slot_nodes = [0]
    for _ in range(max_depth):
        L = len(slot_nodes)
        G_slot = np.bincount(assign, weights=g, minlength=L)
        H_slot = np.bincount(assign, weights=h, minlength=L)
        parent = G_slot**2 / np.maximum(H_slot + l2, HESS_FLOOR)
        parent_total = float(parent.sum())
        best = None  # (gain, feature, threshold, per-slot contributions)
        for j in range(p):
            order = presort[:, j]
            xs = X[order, j]
            boundary = np.flatnonzero(xs[:-1] != xs[1:])
            if boundary.size == 0:
                continue
            mids = (xs[boundary] + xs[boundary + 1]) / 2.0
            counts = boundary + 1
            ok = (counts >= min_leaf) & (n - counts >= min_leaf)
            ok &= (xs[boundary] < mids) & (mids < xs[boundary + 1])
            boundary, mids = boundary[ok], mids[ok]
            if boundary.size == 0:
                continue
            gmat = np.zeros((n, L))
            hmat = np.zeros((n, L))
            idx = np.arange(n)
            a_sorted = assign[order]
            gmat[idx, a_sorted] = g[order]
            hmat[idx, a_sorted] = h[order]
            GL = np.cumsum(gmat, axis=0)[boundary]
            HL = np.cumsum(hmat, axis=0)[boundary]
            GR = G_slot - GL
            HR = H_slot - HL
            scores = (GL * GL / np.maximum(HL + l2, HESS_FLOOR)
                      + GR * GR / np.maximum(HR + l2, HESS_FLOOR))
            totals = scores.sum(axis=1) - parent_total
            k = int(np.argmax(totals))
            if totals[k] > 0.0 and (best is None or totals[k] > best[0]):
                best = (float(totals[k]), j, float(mids[k]), scores[k] - parent)
        if best is None:
            break
        _, feat, thr, contribs = best
        go_right = X[:, feat] > thr
        new_slot_nodes = []
        new_assign = np.full(n, -1, dtype=np.int64)
        for s, node in enumerate(slot_nodes):
            in_slot = assign == s
            nl = int(np.sum(in_slot & ~go_right))
            nr = int(np.sum(in_slot & go_right))
            l, r = tree.make_internal(node, int(feat), thr, float(contribs[s]), nl, nr)
            for child, child_mask, cnt in ((l, in_slot & ~go_right, nl),
                                           (r, in_slot & go_right, nr)):
                if cnt == 0:
                    continue  # empty child stays a zero-weight leaf
                new_assign[child_mask] = len(new_slot_nodes)
                new_slot_nodes.append(child)
        slot_nodes = new_slot_nodes
        assign = new_assign
    for s, node in enumerate(slot_nodes):
        in_slot = assign == s
        tree.weight[node] = leaf_value(float(g[in_slot].sum()), float(h[in_slot].sum()),
                                       int(np.sum(in_slot)))
        train_scores[in_slot] = tree.weight[node]
    return tree


@dataclass(frozen=True)
class GbtModel:
    """Fitted boosting ensemble; degenerate marks a base-score-only model."""

    config: GbtConfig
    feature_names: tuple[str, ...]
    base_score: float
    trees: tuple
    degenerate: bool = False

    def raw_scores(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        total = np.full(X.shape[0], self.base_score)
        use = self.trees if n_trees is None else self.trees[:n_trees]
        for tree in use:
            total += self.config.learning_rate * tree.scores(X)
        return total

    def to_json(self) -> dict:
        return {
            "kind": "gbt",
            "config": self.config.to_json(),
            "feature_names": list(self.feature_names),
            "base_score": self.base_score,
            "degenerate": self.degenerate,
            "trees": [t.to_json() for t in self.trees],
        }


@dataclass(frozen=True)
class ForestModel:
    config: ForestConfig
    feature_names: tuple[str, ...]
    task: str
    trees: tuple
    bootstrap_indices: tuple

    def to_json(self) -> dict:
        return {
            "kind": "forest",
            "config": self.config.to_json(),
            "feature_names": list(self.feature_names),
            "task": self.task,
            "trees": [t.to_json() for t in self.trees],
            "bootstrap_indices": [idx.tolist() for idx in self.bootstrap_indices],
        }


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit_gbdt(train: Dataset, c: GbtConfig) -> GbtModel:
    """Boost c.n_trees trees against the loss gradient at current scores.

    base_score is mean(y) for squared loss, logit of the clipped mean for
    logistic; each round fits one tree to (g, h) and advances scores by
    learning_rate times its leaf weights. A single-class logistic target
    yields a degenerate base-score-only model.
    """
    if train.y is None:
        raise DataError("training dataset has no target column")
    y = train.y
    X = train.X
    n = train.n_rows
    if n == 0:
        raise DataError("cannot fit on an empty dataset")
    if c.loss == "logistic":
        train.require_binary_target()
        ybar = float(np.mean(y))
        if ybar in (0.0, 1.0):
            clipped = min(max(ybar, 1e-5), 1.0 - 1e-5)
            base = math.log(clipped / (1.0 - clipped))
            return GbtModel(c, train.feature_names, base, (), degenerate=True)
        base = math.log(ybar / (1.0 - ybar))
    else:
        base = float(np.mean(y))

    leaf_value = _leaf_weight_newton(c.l2_leaf_reg)
    F = np.full(n, base)
    trees = []
    rows0 = np.arange(n)
    for _ in range(c.n_trees):
        if c.loss == "logistic":
            prob = _sigmoid(F)
            g = prob - y
            h = np.ones(n) if c.first_order else prob * (1.0 - prob)
        else:
            g = F - y
            h = np.ones(n)
        delta = np.zeros(n)
        if c.symmetric:
            tree = _grow_symmetric(X, g, h, c.l2_leaf_reg, c.min_samples_leaf,
                                   c.max_depth, leaf_value, delta)
        elif c.growth == "leaf_wise":
            tree = _grow_leaf_wise(X, rows0, g, h, c.l2_leaf_reg, c.min_samples_leaf,
                                   c.max_depth, c.num_leaves, leaf_value, delta)
        else:
            tree = _grow_depth_wise(X, rows0, g, h, c.l2_leaf_reg, c.min_samples_leaf,
                                    c.max_depth, leaf_value, delta)
        trees.append(tree)
        F += c.learning_rate * delta
    return GbtModel(c, train.feature_names, base, tuple(trees))


def fit_random_forest(train: Dataset, c: ForestConfig) -> ForestModel:
    """Bagged CART trees: per-tree bootstrap rows, per-node mtry features.

    Classification trees split on gini reduction and leaves hold the
    positive fraction; regression trees split on SSE reduction and leaves
    hold the mean. Both come from the shared scan with unit hessians.
    """
    if train.y is None:
        raise DataError("training dataset has no target column")
    y = train.y
    X = train.X
    n, p = X.shape
    if n == 0:
        raise DataError("cannot fit on an empty dataset")
    task = c.task
    if task == "auto":
        task = "classification" if np.isin(y, (0.0, 1.0)).all() else "regression"
    if task == "classification":
        train.require_binary_target()
    mtry = c.mtry
    if mtry is None:
        mtry = max(1, int(round(math.sqrt(p))))
    if mtry > p:
        raise ConfigError(f"mtry = {mtry} exceeds the feature count {p}")

    def leaf_value(G, H, count):
        return G / count  # mean target: positive fraction or regression mean

    gain_scale = 2.0 if task == "classification" else 1.0  # gini = 2 * variance on 0/1
    h = np.ones(n)
    trees = []
    boots = []
    for t in range(c.n_trees):
        rng = substream(c.seed, t)
        rows = rng.integers(0, n, size=n) if c.bootstrap else np.arange(n)
        scratch = np.zeros(n)
        tree = _grow_depth_wise(X, rows, y, h, 0.0, c.min_samples_leaf, c.max_depth,
                                leaf_value, scratch, rng=rng, mtry=mtry,
                                gain_scale=gain_scale)
        trees.append(tree)
        boots.append(np.array(rows, dtype=np.int64))
    return ForestModel(c, train.feature_names, task, tuple(trees), tuple(boots))


def _feature_matrix(model, X) -> np.ndarray:
    if isinstance(X, Dataset):
        return X.select_features(model.feature_names).X
    Xm = np.asarray(X, dtype=np.float64)
    if Xm.ndim != 2 or Xm.shape[1] != len(model.feature_names):
        raise SchemaError(
            f"expected {len(model.feature_names)} feature columns, got shape {Xm.shape}"
        )
    return Xm


def predict(model, X) -> np.ndarray:
    """Scores for new rows: probabilities for classification models,
    real values for regression ones."""
    Xm = _feature_matrix(model, X)
    if isinstance(model, GbtModel):
        raw = model.raw_scores(Xm)
        return _sigmoid(raw) if model.config.loss == "logistic" else raw
    if isinstance(model, ForestModel):
        total = np.zeros(Xm.shape[0])
        for tree in model.trees:
            total += tree.scores(Xm)
        return total / len(model.trees)
    raise ConfigError(f"cannot predict with {type(model).__name__}")


def importance_gain(model) -> dict:
    """Per-feature sum of split gains over the whole ensemble."""
    out = {name: 0.0 for name in model.feature_names}
    for tree in model.trees:
        for feat, gain in zip(tree.feature, tree.gain):
            if feat >= 0:
                out[model.feature_names[feat]] += gain
    return out


def importance_permutation(model, d: Dataset, metric: str, seed: int,
                           n_repeats: int = 5) -> dict:
    """Mean metric degradation from shuffling one column at a time.

    Each (feature, repeat) pair draws its permutation from its own seed
    substream, so results do not depend on evaluation order. Degradation
    is oriented so that larger means more important for both metrics.
    """
    if metric not in ("auc", "rmse"):
        raise ConfigError(f"metric must be 'auc' or 'rmse', got {metric!r}")
    if d.y is None:
        raise DataError("permutation importance needs a target column")
    if n_repeats < 1:
        raise ConfigError(f"n_repeats must be at least 1, got {n_repeats}")
    Xm = _feature_matrix(model, d)
    score = auc if metric == "auc" else rmse
    base = score(d.y, predict(model, Xm))
    out = {}
    for j, name in enumerate(model.feature_names):
        total = 0.0
        for r in range(n_repeats):
            rng = substream(seed, j, r)
            Xp = np.array(Xm)
            Xp[:, j] = Xp[rng.permutation(d.n_rows), j]
            m = score(d.y, predict(model, Xp))
            total += (base - m) if metric == "auc" else (m - base)
        out[name] = total / n_repeats
    return out


PRESETS = ("rf", "xgb-like", "lgbm-like", "cat-like", "gbm-like")


def preset_config(name: str, task: str = "classification", **overrides):
    """Named configuration mimicking one of the usual learners.

    rf returns a ForestConfig; the other four return GbtConfigs that
    differ in growth policy and regularization emphasis. Keyword
    overrides are applied on top of the preset defaults.
    """
    loss = "logistic" if task == "classification" else "squared"
    if name == "rf":
        base = ForestConfig(task=task if task != "auto" else "auto")
    elif name == "xgb-like":
        base = GbtConfig(loss=loss, growth="depth_wise", l2_leaf_reg=1.0)
    elif name == "lgbm-like":
        base = GbtConfig(loss=loss, growth="leaf_wise", num_leaves=31, max_depth=16)
    elif name == "cat-like":
        base = GbtConfig(loss=loss, growth="depth_wise", symmetric=True, l2_leaf_reg=3.0)
    elif name == "gbm-like":
        base = GbtConfig(loss=loss, growth="depth_wise", first_order=True)
    else:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    if overrides:
        base = replace(base, **overrides)
    return base
