"""Batch command-line front end.

Four subcommands: engineer (raw CSV to the engineered table), matrix
(the pure/full/hybrid comparison), simulate (the synthetic grid), and
report (render a finished run directory). Every command is a pure
function of its resolved configuration and input files, so rerunning
one writes identical bytes.

Configuration resolves in three layers: built-in defaults, then a JSON
config file (--config), then explicit flags. ENETBOOST_OUT stands in
for --out when the flag is absent; no other environment variable is
consulted. Exit codes: 0 success, 1 configuration, 2 data, 3 model.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from .data import Schema, ingest_csv, split_stratified, write_csv
from .errors import ConfigError, DataError, EnetBoostError, SchemaError
from .features import FeatureRecipe, fit_features
from .metrics import roc_points
from .pipeline import (
    FailedRun,
    LEARNER_PRESETS,
    PURE_ALPHAS,
    SELECTION_METHODS,
    auc_by_nvars,
    matrix_space,
    run_matrix,
    select_by_regularization,
    write_records_csv,
    write_records_jsonl,
)
from .report import write_report
from .rng import child_seed, key_of
from .simulate import run_simulation_grid, write_sim_csv, write_sim_summary
from .tuning import LogUniform, PowerOfTwo, SearchSpace, Uniform


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: defaults, then config file, then flags."""

    command: str
    out: str = "."
    seed: int | None = None
    workers: int = 1
    # engineer / matrix raw mode
    raw: str | None = None
    schema: str | None = None
    recipe: str | None = None
    strict: bool = False
    # matrix engineered mode
    input: str | None = None
    target: str | None = None
    # matrix
    test_fraction: float = 0.2
    k: int = 3
    n_trials: int = 2
    selections: tuple = SELECTION_METHODS
    presets: tuple = LEARNER_PRESETS
    space_overrides: dict = None
    curves: bool = False
    # simulate
    ns: tuple = (200, 500, 1000)
    ps: tuple = (5, 10, 50)
    replicates: int = 30
    noise_sd: float = 1.0
    # report
    run_dir: str | None = None

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    def validate(self) -> None:
        if self.command != "report" and self.seed is None:
            raise ConfigError("seed is required; there is no wall-clock fallback")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for name in ("raw", "schema", "recipe", "input"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"{name} path does not exist: {path}")
        if self.command == "engineer":
            if self.raw is None or self.schema is None:
                raise ConfigError("engineer needs --raw and --schema")
        if self.command == "matrix":
            engineered = self.input is not None
            from_raw = self.raw is not None
            if engineered == from_raw:
                raise ConfigError(
                    "matrix needs exactly one input mode: --input/--target "
                    "(engineered table) or --raw/--schema (split then engineer)")
            if engineered and self.target is None:
                raise ConfigError("--input needs --target")
            if from_raw and self.schema is None:
                raise ConfigError("--raw needs --schema")
            if not 0.0 < self.test_fraction < 1.0:
                raise ConfigError("test_fraction must be in (0, 1)")
            if self.k < 2:
                raise ConfigError("k must be at least 2")
            if self.n_trials < 1:
                raise ConfigError("n_trials must be at least 1")
        if self.command == "simulate":
            if not self.ns or not self.ps:
                raise ConfigError("ns and ps must be non-empty")
            if self.replicates < 1:
                raise ConfigError("replicates must be at least 1")
        if self.command == "report":
            if self.run_dir is None:
                raise ConfigError("report needs --run-dir")
            if not os.path.isdir(self.run_dir):
                raise ConfigError(f"run_dir does not exist: {self.run_dir}")


def _int_tuple(value) -> tuple:
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    return tuple(int(v) for v in value)


def _str_tuple(value) -> tuple:
    if isinstance(value, str):
        value = [part.strip() for part in value.split(",") if part.strip()]
    return tuple(str(v) for v in value)


_CASTS = {
    "selections": _str_tuple,
    "presets": _str_tuple,
    "ns": _int_tuple,
    "ps": _int_tuple,
    "seed": int,
    "workers": int,
    "k": int,
    "n_trials": int,
    "replicates": int,
    "test_fraction": float,
    "noise_sd": float,
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config-file values, and flags into one RunConfig."""
    known = {f.name for f in fields(RunConfig)} - {"command"}
    merged: dict = {"space_overrides": {}}
    if getattr(args, "config", None) is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        for name, value in file_cfg.items():
            if name not in known:
                raise ConfigError(f"unknown config key {name!r}")
            merged[name] = value
    for name in known:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    if "out" not in merged and os.environ.get("ENETBOOST_OUT"):
        merged["out"] = os.environ["ENETBOOST_OUT"]
    for name, cast in _CASTS.items():
        if merged.get(name) is not None:
            try:
                merged[name] = cast(merged[name])
            except ValueError as exc:
                raise ConfigError(f"bad value for {name!r}: {exc}") from exc
    cfg = RunConfig(command=args.command, **merged)
    cfg.validate()
    return cfg


def _write_run_config(cfg: RunConfig) -> str:
    path = os.path.join(cfg.out, "run_config.json")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(cfg.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_recipe(cfg: RunConfig) -> FeatureRecipe | None:
    if cfg.recipe is None:
        return None
    with open(cfg.recipe, "r", encoding="utf-8") as fh:
        return FeatureRecipe.from_json(json.load(fh))


def _ingest_raw(cfg: RunConfig):
    schema = Schema.from_json(cfg.schema)
    return ingest_csv(cfg.raw, schema, strict=cfg.strict)


def cmd_engineer(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    raw, report = _ingest_raw(cfg)
    recipe = _load_recipe(cfg)
    pipe = fit_features(raw, recipe)
    engineered = pipe.transform(raw)
    out_csv = os.path.join(cfg.out, "engineered.csv")
    write_csv(engineered, out_csv)
    report_path = os.path.join(cfg.out, "ingest_report.json")
    payload = {
        "rows_read": report.n_rows_read,
        "rows_kept": report.n_rows_kept,
        "rejected_missing": report.n_rejected_missing,
        "rejected_unparseable": report.n_rejected_unparseable,
        "rejections": [list(r) for r in report.rejections],
        "recipe": pipe.recipe.to_json(),
    }
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for path in (out_csv, report_path, _write_run_config(cfg)):
        print(f"wrote {path}")
    return 0


def _load_engineered(cfg: RunConfig):
    with open(cfg.input, "r", encoding="utf-8", newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise DataError(f"{cfg.input} has no header row")
    if cfg.target not in header:
        raise SchemaError(f"target {cfg.target!r} not in {cfg.input} header")
    schema = Schema(columns={name: "numeric" for name in header}, target=cfg.target)
    d, _ = ingest_csv(cfg.input, schema, strict=True)
    return d


def _split(d, test_fraction: float, seed: int):
    if d.y is not None and np.isin(d.y, (0.0, 1.0)).all():
        return split_stratified(d, test_fraction, seed)
    rng = np.random.default_rng(seed)
    n_test = int(math.floor(d.n_rows * test_fraction))
    perm = rng.permutation(d.n_rows)
    return d.take(np.sort(perm[n_test:])), d.take(np.sort(perm[:n_test]))


def _distribution(spec, name: str):
    if isinstance(spec, (list, tuple)) and len(spec) == 2:
        return Uniform(spec[0], spec[1])
    if isinstance(spec, dict) and {"kind", "lo", "hi"} <= set(spec):
        kind = spec["kind"]
        if kind == "uniform":
            return Uniform(spec["lo"], spec["hi"])
        if kind == "loguniform":
            return LogUniform(spec["lo"], spec["hi"])
        if kind == "pow2":
            return PowerOfTwo(spec["lo"], spec["hi"])
    raise ConfigError(f"bad search-space spec for {name!r}: {spec!r}")


def _spaces_from_overrides(overrides: dict, n_features: int) -> dict | None:
    if not overrides:
        return None
    spaces = {}
    for preset, params in overrides.items():
        if preset not in LEARNER_PRESETS:
            raise ConfigError(f"space override for unknown preset {preset!r}")
        merged = dict(matrix_space(preset, n_features).params)
        for name, spec in params.items():
            merged[name] = _distribution(spec, name)
        spaces[preset] = SearchSpace(merged)
    return spaces


def cmd_matrix(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    split_seed = child_seed(cfg.seed, key_of("split"))
    if cfg.input is not None:
        d = _load_engineered(cfg)
        train, test = _split(d, cfg.test_fraction, split_seed)
    else:
        raw, _report = _ingest_raw(cfg)
        train_raw, test_raw = _split(raw, cfg.test_fraction, split_seed)
        pipe = fit_features(train_raw, _load_recipe(cfg))
        train, test = pipe.transform(train_raw), pipe.transform(test_raw)

    spaces = _spaces_from_overrides(cfg.space_overrides or {}, train.n_features)
    results = run_matrix(train, test, k=cfg.k, n_trials=cfg.n_trials,
                         seed=cfg.seed, workers=cfg.workers,
                         presets=cfg.presets, selections=cfg.selections,
                         spaces=spaces, errors="record")
    records = [item for item, _ in results if not isinstance(item, FailedRun)]
    failures = [item for item, _ in results if isinstance(item, FailedRun)]

    jsonl_path = os.path.join(cfg.out, "records.jsonl")
    csv_path = os.path.join(cfg.out, "records.csv")
    write_records_jsonl(records, jsonl_path)
    write_records_csv(records, csv_path)
    written = [jsonl_path, csv_path]

    binomial = bool(np.isin(test.y, (0.0, 1.0)).all())
    if binomial:
        path = os.path.join(cfg.out, "roc_points.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("model_id", "fpr", "tpr"))
            for item, scores in results:
                if isinstance(item, FailedRun):
                    continue
                fpr, tpr = roc_points(test.y, scores)
                for f, t in zip(fpr, tpr):
                    writer.writerow((item.model_id, repr(float(f)), repr(float(t))))
        written.append(path)
    else:
        path = os.path.join(cfg.out, "predictions.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("model_id", "row_id", "y", "score"))
            for item, scores in results:
                if isinstance(item, FailedRun):
                    continue
                for rid, y_i, s_i in zip(test.row_ids, test.y, scores):
                    writer.writerow((item.model_id, int(rid),
                                     repr(float(y_i)), repr(float(s_i))))
        written.append(path)

    if cfg.curves:
        if not binomial:
            raise ConfigError("--curves needs a binary target")
        path = os.path.join(cfg.out, "auc_by_nvars.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("method", "m", "auc"))
            for method in cfg.selections:
                sel, _lam = select_by_regularization(train, method,
                                                     k=cfg.k, seed=cfg.seed)
                curve = auc_by_nvars(train, test, sel, PURE_ALPHAS[method],
                                     k=cfg.k, seed=cfg.seed)
                for m, value in curve:
                    writer.writerow((method, m, repr(value)))
        written.append(path)

    if failures:
        path = os.path.join(cfg.out, "failures.jsonl")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for failed in failures:
                fh.write(json.dumps(failed.to_json(), sort_keys=True))
                fh.write("\n")
        written.append(path)

    written.append(_write_run_config(cfg))
    for path in written:
        print(f"wrote {path}")
    print(f"{len(records)} records, {len(failures)} failed")
    return 3 if failures else 0


def cmd_simulate(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    records = run_simulation_grid(cfg.ns, cfg.ps, cfg.replicates, seed=cfg.seed,
                                  noise_sd=cfg.noise_sd, workers=cfg.workers,
                                  presets=cfg.presets, selections=cfg.selections)
    csv_path = os.path.join(cfg.out, "sim_records.csv")
    summary_path = os.path.join(cfg.out, "sim_summary.json")
    write_sim_csv(records, csv_path)
    write_sim_summary(records, summary_path)
    for path in (csv_path, summary_path, _write_run_config(cfg)):
        print(f"wrote {path}")
    n_errors = sum(1 for r in records if r.error is not None)
    print(f"{len(records)} records, {n_errors} failed")
    return 3 if n_errors else 0


def cmd_report(cfg: RunConfig) -> int:
    written = write_report(cfg.run_dir, cfg.out if cfg.out != "." else None)
    for path in written:
        print(f"wrote {path}")
    return 0


COMMANDS = {
    "engineer": cmd_engineer,
    "matrix": cmd_matrix,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep codes stable
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="enetboost",
                     description="Regularized selection feeding boosted trees: "
                                 "batch experiments and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out", help="output directory (or ENETBOOST_OUT)")
        p.add_argument("--seed", type=int, help="run seed; required")
        p.add_argument("--workers", type=int, help="parallel workers")

    p = sub.add_parser("engineer", help="raw CSV to the engineered table")
    common(p)
    p.add_argument("--raw", help="raw CSV file")
    p.add_argument("--schema", help="schema JSON for the raw CSV")
    p.add_argument("--recipe", help="feature recipe JSON")
    p.add_argument("--strict", action="store_true", default=None,
                   help="fail on the first malformed row instead of quarantining")

    p = sub.add_parser("matrix", help="pure, full, and hybrid model comparison")
    common(p)
    p.add_argument("--input", help="engineered CSV (one numeric column per feature)")
    p.add_argument("--target", help="target column name in --input")
    p.add_argument("--raw", help="raw CSV; split first, then engineer on train")
    p.add_argument("--schema", help="schema JSON for --raw")
    p.add_argument("--recipe", help="feature recipe JSON for --raw")
    p.add_argument("--strict", action="store_true", default=None,
                   help="fail on the first malformed raw row")
    p.add_argument("--test-fraction", dest="test_fraction", type=float,
                   help="held-out share (default 0.2)")
    p.add_argument("--k", type=int, help="cross-validation folds")
    p.add_argument("--n-trials", dest="n_trials", type=int,
                   help="random-search trials per learner")
    p.add_argument("--selections", help="comma list from ridge,lasso,elasticnet")
    p.add_argument("--presets", help="comma list of learner presets")
    p.add_argument("--curves", action="store_true", default=None,
                   help="also emit AUC-vs-number-of-variables curves")

    p = sub.add_parser("simulate", help="synthetic grid study")
    common(p)
    p.add_argument("--ns", help="comma list of training sizes")
    p.add_argument("--ps", help="comma list of dimensions")
    p.add_argument("--replicates", type=int, help="replicates per cell")
    p.add_argument("--noise-sd", dest="noise_sd", type=float,
                   help="noise standard deviation")
    p.add_argument("--selections", help="comma list from ridge,lasso,elasticnet")
    p.add_argument("--presets", help="comma list of learner presets")

    p = sub.add_parser("report", help="render tables and figures for a run")
    common(p)
    p.add_argument("--run-dir", dest="run_dir", help="directory of a finished run")

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except EnetBoostError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
