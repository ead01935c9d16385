"""Engineered insurance features: composites, flags, clusters, group means.

fit_features learns every data-dependent statistic (quantile thresholds,
z-score parameters, age-group bounds, k-means centroids, per-group target
rates) from the training split; the returned FeaturePipeline replays them
on any split without touching its target. engineer_features is the
fit-and-apply shorthand for a single dataset.

The derived set expands the eight raw predictors to 34 feature columns.
Composite score weights default to equal weights over z-scored
constituents and are configurable through FeatureRecipe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError, SchemaError
from .rng import substream

RAW_PREDICTORS = (
    "Age", "AnnualIncome", "FamilyMembers", "GraduateOrNot", "Employment.Type",
    "ChronicDiseases", "FrequentFlyer", "EverTravelledAbroad",
)

ENGINEERED_ORDER = RAW_PREDICTORS + (
    "IncomePerCapita", "HighIncome", "AgeNormalized", "HighChronicDiseases",
    "TravelFrequency", "PrivateEmployment", "LowDependence", "IncomeByAge",
    "AgeGroup", "HighIncomeTraveler", "HighIncome90", "IncomePerCapitaNorm",
    "ExperiencedTraveler", "LargeFamily", "ChronicByAge", "InsuranceScore",
    "FinancialDependence", "TravelScore", "WorkExperience", "StableJob",
    "AdjustedTravelIncome", "RiskScore", "RiskScoreNorm", "ClusterScore",
    "ClusterInsuranceRate", "MovingAvgInsurance",
)


def _default_weights() -> dict:
    return {
        "InsuranceScore": {"AnnualIncome": 0.25, "ChronicDiseases": 0.25,
                           "TravelFrequency": 0.25, "WorkExperience": 0.25},
        "RiskScore": {"ChronicDiseases": 1 / 3, "Age": 1 / 3,
                      "TravelFrequency": 1 / 3},
    }


def _default_thresholds() -> dict:
    return {"high_income": 0.75, "high_income90": 0.90, "large_family": 0.75}


@dataclass(frozen=True)
class FeatureRecipe:
    """Configuration for the derived features.

    age_group_bounds None means the training-age quartiles; explicit
    bounds must be strictly increasing. Score weights are renormalized to
    sum to 1 at fit time.
    """

    score_weights: dict = field(default_factory=_default_weights)
    age_group_bounds: tuple | None = None
    kmeans_k: int = 4
    kmeans_seed: int = 0
    percentile_thresholds: dict = field(default_factory=_default_thresholds)

    def __post_init__(self):
        for score, weights in self.score_weights.items():
            for name, w in weights.items():
                if not math.isfinite(w):
                    raise ConfigError(f"{score} weight for {name} is not finite")
        if self.age_group_bounds is not None:
            b = tuple(float(x) for x in self.age_group_bounds)
            if any(lo >= hi for lo, hi in zip(b, b[1:])):
                raise ConfigError(f"age_group_bounds must be strictly increasing, got {b}")
            object.__setattr__(self, "age_group_bounds", b)
        if self.kmeans_k < 1:
            raise ConfigError(f"kmeans_k must be at least 1, got {self.kmeans_k}")
        for key, q in self.percentile_thresholds.items():
            if not 0.0 < q < 1.0:
                raise ConfigError(f"percentile threshold {key} must be in (0, 1), got {q}")

    def to_json(self) -> dict:
        return {
            "score_weights": {k: dict(v) for k, v in self.score_weights.items()},
            "age_group_bounds": (None if self.age_group_bounds is None
                                 else list(self.age_group_bounds)),
            "kmeans_k": self.kmeans_k,
            "kmeans_seed": self.kmeans_seed,
            "percentile_thresholds": dict(self.percentile_thresholds),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureRecipe":
        bounds = obj.get("age_group_bounds")
        return cls(
            score_weights=obj.get("score_weights", _default_weights()),
            age_group_bounds=None if bounds is None else tuple(bounds),
            kmeans_k=obj.get("kmeans_k", 4),
            kmeans_seed=obj.get("kmeans_seed", 0),
            percentile_thresholds=obj.get("percentile_thresholds", _default_thresholds()),
        )


def quantile(values, q: float) -> float:
    """Linear-interpolation empirical quantile."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise DataError("quantile of an empty column")
    return float(np.quantile(v, q))


def percentile_flag(col, q: float) -> np.ndarray:
    """1 where the value strictly exceeds the column's q-quantile."""
    if not 0.0 < q < 1.0:
        raise ConfigError(f"quantile must be in (0, 1), got {q}")
    v = np.asarray(col, dtype=np.float64)
    return (v > quantile(v, q)).astype(np.float64)


@dataclass(frozen=True)
class KMeansModel:
    """Fitted centroids plus training assignments and the inertia trace."""

    centroids: np.ndarray
    assignments: np.ndarray
    inertia_path: tuple

    def assign(self, points: np.ndarray) -> np.ndarray:
        """Nearest-centroid labels; ties go to the lowest cluster index."""
        d = ((points[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return d.argmin(axis=1)

    @property
    def inertia(self) -> float:
        return self.inertia_path[-1]


def kmeans(points, k: int, seed: int) -> KMeansModel:
    """Lloyd's algorithm with seeded distinct-row initialization.

    Runs until assignments stop changing or 100 iterations. A cluster
    that loses all its points is re-seeded at the point farthest from its
    previous centroid.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if n < k:
        raise DataError(f"need at least k = {k} points, got {n}")
    if not np.all(np.isfinite(X)):
        raise DataError("k-means input has non-finite coordinates")

    rng = substream(seed, 0)
    centroids = X[np.sort(rng.choice(n, size=k, replace=False))].copy()
    labels = np.full(n, -1, dtype=np.int64)
    inertia_path = []
    for _ in range(100):
        d = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d.argmin(axis=1)
        for c in range(k):
            members = new_labels == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(((X - centroids[c]) ** 2).sum(axis=1)))
                centroids[c] = X[far]
        d = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        inertia_path.append(float(d.min(axis=1).sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return KMeansModel(centroids, labels, tuple(inertia_path))


@dataclass(frozen=True)
class GroupMeans:
    """Per-group means of a value column, with a global-mean fallback."""

    means: dict
    global_mean: float

    def lookup(self, labels) -> np.ndarray:
        return np.array([self.means.get(float(g), self.global_mean) for g in labels])


def group_means(group_col, value_col) -> GroupMeans:
    g = np.asarray(group_col, dtype=np.float64)
    v = np.asarray(value_col, dtype=np.float64)
    means = {}
    for label in np.unique(g):
        means[float(label)] = float(v[g == label].mean())
    return GroupMeans(means, float(v.mean()))


def moving_avg_by_group(d: Dataset, group: str, value: str) -> np.ndarray:
    """Each row's mean of `value` over all rows sharing its `group` label."""
    gm = group_means(d.column(group), d.column(value))
    return gm.lookup(d.column(group))


@dataclass(frozen=True)
class _ZScore:
    mean: float
    sd: float

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (v - self.mean) / self.sd


def _zfit(values) -> _ZScore:
    v = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(v))
    sd = 1.0 if v.size < 2 else float(np.std(v, ddof=1))
    if sd == 0.0:
        sd = 1.0  # constant column: centered but not scaled
    return _ZScore(mean, sd)


def _normalized(weights: dict) -> dict:
    total = sum(weights.values())
    if total == 0:
        raise ConfigError("score weights sum to zero")
    return {k: w / total for k, w in weights.items()}


@dataclass(frozen=True)
class FeaturePipeline:
    """Fitted feature stage: every threshold and statistic came from the
    training split and is replayed verbatim by transform."""

    recipe: FeatureRecipe
    target_name: str
    income_hi: float
    income_hi90: float
    family_hi: float
    chronic_median: float
    age_bounds: tuple
    age_z: _ZScore
    ipc_z: _ZScore
    income_z: _ZScore
    chronic_z: _ZScore
    travel_z: _ZScore
    work_z: _ZScore
    ati_z: _ZScore
    insurance_weights: dict
    risk_weights: dict
    risk_min: float
    risk_max: float
    cluster_z: tuple
    cluster_model: KMeansModel
    cluster_rates: GroupMeans
    age_group_rates: GroupMeans

    def transform(self, raw: Dataset) -> Dataset:
        cols = _base_columns(raw)
        out = _derive(cols, self)
        features = [(name, out[name]) for name in ENGINEERED_ORDER]
        target = None
        if raw.target_name is not None:
            target = (raw.target_name, raw.y)
        return Dataset.from_columns(features, target, row_ids=raw.row_ids)


def _base_columns(raw: Dataset) -> dict:
    missing = [name for name in RAW_PREDICTORS if not raw.has_column(name)]
    if missing:
        raise SchemaError(f"missing raw predictor columns: {missing}")
    return {name: raw.column(name) for name in RAW_PREDICTORS}


def _derive(cols: dict, p: "FeaturePipeline") -> dict:
    """All 26 derived columns from the raw eight plus fitted state."""
    age = cols["Age"]
    income = cols["AnnualIncome"]
    family = cols["FamilyMembers"]
    grad = cols["GraduateOrNot"]
    employ = cols["Employment.Type"]  # 1 = private/self-employed (later level)
    chronic = cols["ChronicDiseases"]
    flyer = cols["FrequentFlyer"]
    abroad = cols["EverTravelledAbroad"]

    fam_safe = np.maximum(family, 1.0)
    age_safe = np.maximum(age, 1.0)
    out = dict(cols)
    out["IncomePerCapita"] = income / fam_safe
    out["HighIncome"] = (income > p.income_hi).astype(np.float64)
    out["AgeNormalized"] = p.age_z.apply(age)
    out["HighChronicDiseases"] = (chronic > p.chronic_median).astype(np.float64)
    travel = np.maximum(flyer, abroad)
    out["TravelFrequency"] = travel
    out["PrivateEmployment"] = employ
    out["LowDependence"] = (family <= 3).astype(np.float64)
    out["IncomeByAge"] = income / age_safe
    out["AgeGroup"] = np.digitize(age, p.age_bounds, right=True).astype(np.float64)
    out["HighIncomeTraveler"] = out["HighIncome"] * travel
    out["HighIncome90"] = (income > p.income_hi90).astype(np.float64)
    out["IncomePerCapitaNorm"] = p.ipc_z.apply(out["IncomePerCapita"])
    out["ExperiencedTraveler"] = abroad
    out["LargeFamily"] = (family > p.family_hi).astype(np.float64)
    out["ChronicByAge"] = chronic / age_safe
    out["WorkExperience"] = np.where(grad >= 0.5,
                                     np.maximum(age - 22.0, 0.0),
                                     np.maximum(age - 18.0, 0.0))
    zs = {
        "AnnualIncome": p.income_z.apply(income),
        "ChronicDiseases": p.chronic_z.apply(chronic),
        "TravelFrequency": p.travel_z.apply(travel),
        "WorkExperience": p.work_z.apply(out["WorkExperience"]),
        "Age": p.age_z.apply(age),
    }
    out["InsuranceScore"] = sum(w * zs[name] for name, w in p.insurance_weights.items())
    out["FinancialDependence"] = np.log(fam_safe / np.maximum(income, 1.0))
    out["TravelScore"] = travel + abroad
    out["StableJob"] = 1.0 - employ
    out["AdjustedTravelIncome"] = p.ati_z.apply(income * (1.0 + travel))
    risk = sum(w * zs[name] for name, w in p.risk_weights.items())
    out["RiskScore"] = risk
    span = p.risk_max - p.risk_min
    if span == 0.0:
        out["RiskScoreNorm"] = np.zeros_like(risk)
    else:
        out["RiskScoreNorm"] = np.clip((risk - p.risk_min) / span, 0.0, 1.0)
    space = np.column_stack([z.apply(c) for z, c in
                             zip(p.cluster_z, (income, age, employ))])
    labels = p.cluster_model.assign(space).astype(np.float64)
    out["ClusterScore"] = labels
    out["ClusterInsuranceRate"] = p.cluster_rates.lookup(labels)
    out["MovingAvgInsurance"] = p.age_group_rates.lookup(out["AgeGroup"])
    return out


def fit_features(train_raw: Dataset, r: FeatureRecipe | None = None) -> FeaturePipeline:
    """Learn every derived-feature statistic from the training split."""
    if r is None:
        r = FeatureRecipe()
    if train_raw.target_name is None:
        raise DataError("feature fitting needs a target column for the group-rate features")
    cols = _base_columns(train_raw)
    y = train_raw.y
    age, income, family = cols["Age"], cols["AnnualIncome"], cols["FamilyMembers"]
    employ, chronic = cols["Employment.Type"], cols["ChronicDiseases"]
    travel = np.maximum(cols["FrequentFlyer"], cols["EverTravelledAbroad"])
    work = np.where(cols["GraduateOrNot"] >= 0.5,
                    np.maximum(age - 22.0, 0.0), np.maximum(age - 18.0, 0.0))

    thresholds = r.percentile_thresholds
    if r.age_group_bounds is not None:
        age_bounds = r.age_group_bounds
    else:
        # training-age quartiles; duplicate cut points collapse to fewer groups
        qs = [quantile(age, q) for q in (0.25, 0.5, 0.75)]
        age_bounds = tuple(sorted(set(qs)))

    weights = {name: _normalized(w) for name, w in r.score_weights.items()}
    insurance_w = weights.get("InsuranceScore", _normalized(_default_weights()["InsuranceScore"]))
    risk_w = weights.get("RiskScore", _normalized(_default_weights()["RiskScore"]))
    known = {"AnnualIncome", "ChronicDiseases", "TravelFrequency", "WorkExperience", "Age"}
    for score_name, w in (("InsuranceScore", insurance_w), ("RiskScore", risk_w)):
        unknown = set(w) - known
        if unknown:
            raise ConfigError(f"{score_name} weights name unknown constituents: {sorted(unknown)}")

    age_z = _zfit(age)
    income_z = _zfit(income)
    chronic_z = _zfit(chronic)
    travel_z = _zfit(travel)
    work_z = _zfit(work)
    zs = {"AnnualIncome": income_z.apply(income), "ChronicDiseases": chronic_z.apply(chronic),
          "TravelFrequency": travel_z.apply(travel), "WorkExperience": work_z.apply(work),
          "Age": age_z.apply(age)}
    risk_train = sum(w * zs[name] for name, w in risk_w.items())

    cluster_z = tuple(_zfit(c) for c in (income, age, employ))
    space = np.column_stack([z.apply(c) for z, c in zip(cluster_z, (income, age, employ))])
    cluster_model = kmeans(space, r.kmeans_k, r.kmeans_seed)
    cluster_labels = cluster_model.assign(space).astype(np.float64)

    fam_safe = np.maximum(family, 1.0)
    ipc = income / fam_safe
    age_groups = np.digitize(age, age_bounds, right=True).astype(np.float64)

    return FeaturePipeline(
        recipe=r,
        target_name=train_raw.target_name,
        income_hi=quantile(income, thresholds.get("high_income", 0.75)),
        income_hi90=quantile(income, thresholds.get("high_income90", 0.90)),
        family_hi=quantile(family, thresholds.get("large_family", 0.75)),
        chronic_median=quantile(chronic, 0.5),
        age_bounds=age_bounds,
        age_z=age_z,
        ipc_z=_zfit(ipc),
        income_z=income_z,
        chronic_z=chronic_z,
        travel_z=travel_z,
        work_z=work_z,
        ati_z=_zfit(income * (1.0 + travel)),
        insurance_weights=insurance_w,
        risk_weights=risk_w,
        risk_min=float(np.min(risk_train)),
        risk_max=float(np.max(risk_train)),
        cluster_z=cluster_z,
        cluster_model=cluster_model,
        cluster_rates=group_means(cluster_labels, y),
        age_group_rates=group_means(age_groups, y),
    )


def engineer_features(raw: Dataset, r: FeatureRecipe | None = None) -> Dataset:
    """Fit on `raw` and transform it in one step."""
    return fit_features(raw, r).transform(raw)
