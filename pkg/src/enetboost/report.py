"""Rendering of finished runs: text tables, summary CSVs, and figures.

Everything here is a pure transform of files an earlier run wrote;
nothing refits a model. Figures go through the Agg backend with pinned
dpi and metadata so a rerun reproduces every output byte for byte.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import DataError
from .simulate import SimRecord, summarize_rmse

FIG_DPI = 120
FIG_METADATA = {"Software": "enetboost"}

METRIC_COLUMNS = ("auc", "accuracy", "precision", "recall", "specificity",
                  "f1", "balanced_accuracy", "rmse")


def read_records(path) -> list[dict]:
    """EvaluationRecords back from a JSON-lines file, as dicts."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def read_sim_records(path) -> list[SimRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(SimRecord(
                model_id=row["model_id"],
                n=int(row["n"]),
                p=int(row["p"]),
                replicate=int(row["replicate"]),
                rmse=float(row["rmse"]) if row["rmse"] else None,
                error=row["error"] or None,
            ))
    return records


def _fmt(value, width: int) -> str:
    if value is None:
        return "-".rjust(width)
    if isinstance(value, float):
        return f"{value:.4f}".rjust(width)
    return str(value).rjust(width)


def render_matrix_table(records: list[dict]) -> str:
    """One row per record; metric columns that no record carries are
    dropped (a regression matrix has no ROC block and vice versa)."""
    cols = [name for name in METRIC_COLUMNS
            if any(r["metrics"].get(name) is not None for r in records)]
    id_w = max([len("model")] + [len(r["model_id"]) for r in records]) + 2
    sel_w = max([len("selection")] + [len(r["selection"]) for r in records]) + 2
    header = ("model".ljust(id_w) + "selection".ljust(sel_w) + "vars".rjust(5)
              + "".join(name.rjust(max(len(name) + 2, 10)) for name in cols))
    lines = [header, "-" * len(header)]
    for r in records:
        line = (r["model_id"].ljust(id_w) + r["selection"].ljust(sel_w)
                + str(r["n_selected"]).rjust(5))
        for name in cols:
            line += _fmt(r["metrics"].get(name), max(len(name) + 2, 10))
        lines.append(line)
    return "\n".join(lines) + "\n"


def render_sim_table(records) -> str:
    summaries = summarize_rmse(records)
    errors = sum(1 for r in records if r.error is not None)
    id_w = max([len("model")] + [len(s.model_id) for s in summaries]) + 2
    header = ("model".ljust(id_w) + "mean_rmse".rjust(11)
              + "sd_rmse".rjust(10) + "runs".rjust(6))
    lines = [header, "-" * len(header)]
    for s in summaries:
        lines.append(s.model_id.ljust(id_w) + f"{s.mean_rmse:.4f}".rjust(11)
                     + f"{s.sd_rmse:.4f}".rjust(10) + str(s.count).rjust(6))
    lines.append("")
    lines.append(f"{len(records)} records, {errors} failed")
    return "\n".join(lines) + "\n"


def _save_figure(fig, path) -> None:
    fig.savefig(path, dpi=FIG_DPI, metadata=FIG_METADATA)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_roc_figure(roc_csv, path) -> None:
    """One ROC polyline per model from a (model_id, fpr, tpr) table."""
    curves: dict[str, list[tuple[float, float]]] = {}
    with open(roc_csv, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["model_id"], []).append(
                (float(row["fpr"]), float(row["tpr"])))
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 6))
    for model_id, points in curves.items():
        fpr, tpr = zip(*points)
        ax.plot(fpr, tpr, lw=1.2, label=model_id)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="grey")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("ROC on the test split")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    _save_figure(fig, path)
    plt.close(fig)


def render_curve_figure(curve_csv, path) -> None:
    """AUC against number of kept variables, one line per method."""
    curves: dict[str, list[tuple[int, float]]] = {}
    with open(curve_csv, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["method"], []).append(
                (int(row["m"]), float(row["auc"])))
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, points in curves.items():
        m, aucs = zip(*points)
        ax.plot(m, aucs, marker="o", ms=3, lw=1.2, label=method)
    ax.set_xlabel("number of selected variables")
    ax.set_ylabel("test AUC")
    ax.set_title("AUC as the selection grows")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_figure(fig, path)
    plt.close(fig)


def render_metric_bars(records: list[dict], path) -> None:
    """Headline metric per model: AUC when present, otherwise RMSE."""
    use_auc = any(r["metrics"].get("auc") is not None for r in records)
    name = "auc" if use_auc else "rmse"
    pairs = [(r["model_id"], r["metrics"].get(name)) for r in records
             if r["metrics"].get(name) is not None]
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 0.32 * len(pairs) + 1.2))
    labels = [p[0] for p in pairs][::-1]
    values = [p[1] for p in pairs][::-1]
    ax.barh(labels, values, color="#4878b0")
    ax.set_xlabel(f"test {name}")
    ax.tick_params(labelsize=7)
    fig.tight_layout()
    _save_figure(fig, path)
    plt.close(fig)


def render_rmse_figure(records, path) -> None:
    """RMSE distribution per model across replicates, best mean first."""
    summaries = summarize_rmse(records)
    order = [s.model_id for s in summaries]
    values = {model_id: [] for model_id in order}
    for r in records:
        if r.rmse is not None:
            values[r.model_id].append(r.rmse)
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 0.32 * len(order) + 1.2))
    ax.boxplot([values[m] for m in order][::-1], orientation="horizontal",
               tick_labels=order[::-1], widths=0.6)
    ax.set_xlabel("test RMSE")
    ax.tick_params(labelsize=7)
    fig.tight_layout()
    _save_figure(fig, path)
    plt.close(fig)


def write_rmse_summary_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("model_id", "mean_rmse", "sd_rmse", "count"))
        for s in summarize_rmse(records):
            writer.writerow((s.model_id, repr(s.mean_rmse), repr(s.sd_rmse), s.count))


def write_report(run_dir, out_dir=None) -> list[str]:
    """Render everything a run directory supports; returns written paths.

    A directory with records.jsonl is treated as a matrix run, one with
    sim_records.csv as a simulation run. Neither present is an error
    naming both missing files.
    """
    out_dir = run_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    matrix_path = os.path.join(run_dir, "records.jsonl")
    sim_path = os.path.join(run_dir, "sim_records.csv")
    written = []

    if os.path.exists(matrix_path):
        records = read_records(matrix_path)
        report_path = os.path.join(out_dir, "report.txt")
        with open(report_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"Model evaluation matrix: {len(records)} records\n\n")
            fh.write(render_matrix_table(records))
        written.append(report_path)
        bars = os.path.join(out_dir, "metrics_by_model.png")
        render_metric_bars(records, bars)
        written.append(bars)
        roc_csv = os.path.join(run_dir, "roc_points.csv")
        if os.path.exists(roc_csv):
            fig_path = os.path.join(out_dir, "roc_curves.png")
            render_roc_figure(roc_csv, fig_path)
            written.append(fig_path)
        curve_csv = os.path.join(run_dir, "auc_by_nvars.csv")
        if os.path.exists(curve_csv):
            fig_path = os.path.join(out_dir, "auc_by_nvars.png")
            render_curve_figure(curve_csv, fig_path)
            written.append(fig_path)
        return written

    if os.path.exists(sim_path):
        records = read_sim_records(sim_path)
        report_path = os.path.join(out_dir, "report.txt")
        with open(report_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("Simulation study summary\n\n")
            fh.write(render_sim_table(records))
        written.append(report_path)
        summary_csv = os.path.join(out_dir, "rmse_summary.csv")
        write_rmse_summary_csv(records, summary_csv)
        written.append(summary_csv)
        fig_path = os.path.join(out_dir, "rmse_by_model.png")
        render_rmse_figure(records, fig_path)
        written.append(fig_path)
        return written

    raise DataError(
        "nothing to report: expected one of "
        f"{matrix_path} or {sim_path}, found neither")
