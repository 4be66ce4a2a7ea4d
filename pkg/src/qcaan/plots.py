"""Figure emission for a finished run: box plots, HDI interval plots, metric
diff bars, ROC curves, and training curves.

Every figure is rendered from (and saved next to) a CSV twin holding exactly
the plotted numbers, so `csv-only` mode loses nothing but the pictures.
SVG output is pinned deterministic (fixed hash salt, no embedded date).
"""

from __future__ import annotations

import csv
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "qcaan"

from .runner import METRICS, write_csv  # noqa: E402

PLOT_FORMATS = ("svg", "csv-only")

STRATEGY_COLORS = {"none": "magenta", "random": "gray", "smote": "tab:blue",
                   "qcaan": "teal", "gan": "tab:orange"}


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path_base, fmt):
    if fmt == "svg":
        fig.savefig(path_base + ".svg", metadata={"Date": None})
    plt.close(fig)


def _twin(path_base, fieldnames, rows):
    write_csv(path_base + ".csv", fieldnames, rows)


def plot_metric_boxes(analysis_dir, plots_dir, fmt):
    rows = _read_csv(os.path.join(analysis_dir, "metric_values.csv"))
    if not rows:
        return
    base = os.path.join(plots_dir, "metrics_boxplot")
    _twin(base, ["metric", "strategy", "dataset", "value"], rows)
    if fmt == "csv-only":
        return
    strategies = sorted({r["strategy"] for r in rows},
                        key=lambda s: list(STRATEGY_COLORS).index(s)
                        if s in STRATEGY_COLORS else 99)
    fig, axes = plt.subplots(1, len(METRICS), figsize=(4 * len(METRICS), 4), sharey=True)
    for ax, metric in zip(axes, METRICS):
        data = [[float(r["value"]) for r in rows
                 if r["metric"] == metric and r["strategy"] == s] for s in strategies]
        box = ax.boxplot(data, tick_labels=strategies, patch_artist=True)
        for patch, s in zip(box["boxes"], strategies):
            patch.set_facecolor(STRATEGY_COLORS.get(s, "lightgray"))
            patch.set_alpha(0.6)
        ax.set_title(metric)
        ax.tick_params(axis="x", rotation=45)
    axes[0].set_ylabel("metric value across data sets")
    fig.tight_layout()
    _save(fig, base, fmt)


def plot_hdi_intervals(analysis_dir, plots_dir, fmt):
    rows = _read_csv(os.path.join(analysis_dir, "hdi.csv"))
    if not rows:
        return
    base = os.path.join(plots_dir, "hdi_intervals")
    _twin(base, ["metric", "strategy", "mean", "lo", "hi", "mass"], rows)
    if fmt == "csv-only":
        return
    strategies = list(dict.fromkeys(r["strategy"] for r in rows))
    fig, axes = plt.subplots(1, len(METRICS), figsize=(4 * len(METRICS), 3.5))
    for ax, metric in zip(axes, METRICS):
        for i, s in enumerate(strategies):
            match = [r for r in rows if r["metric"] == metric and r["strategy"] == s]
            if not match:
                continue
            r = match[0]
            color = STRATEGY_COLORS.get(s, "black")
            ax.plot([float(r["lo"]), float(r["hi"])], [i, i], color=color, lw=3)
            ax.plot(float(r["mean"]), i, "o", color=color)
        ax.set_yticks(range(len(strategies)))
        ax.set_yticklabels(strategies)
        ax.set_title(f"{metric} (bootstrapped mean, HDI)")
    fig.tight_layout()
    _save(fig, base, fmt)


def plot_diff_bars(analysis_dir, plots_dir, fmt):
    rows = _read_csv(os.path.join(analysis_dir, "diff_table.csv"))
    if not rows:
        return
    diff_cols = [c for c in rows[0] if c.startswith("diff_")]
    base = os.path.join(plots_dir, "metric_diffs")
    _twin(base, ["dataset"] + diff_cols, [{k: r[k] for k in ["dataset"] + diff_cols}
                                          for r in rows])
    if fmt == "csv-only":
        return
    fig, axes = plt.subplots(len(diff_cols), 1, figsize=(8, 2.6 * len(diff_cols)),
                             sharex=True)
    names = [r["dataset"] for r in rows]
    for ax, col in zip(axes, diff_cols):
        values = [float(r[col]) for r in rows]
        ax.bar(range(len(names)), values, color="teal", alpha=0.7)
        ax.axhline(0.0, color="black", lw=0.8)
        ax.set_ylabel(col.replace("diff_", ""))
    axes[-1].set_xticks(range(len(names)))
    axes[-1].set_xticklabels(names, rotation=60, ha="right")
    fig.suptitle("metric diffs (generative minus interpolation baseline)")
    fig.tight_layout()
    _save(fig, base, fmt)


def plot_roc_curves(exp2_dir, plots_dir, fmt):
    paths = sorted(glob.glob(os.path.join(exp2_dir, "roc_*.csv")))
    if not paths:
        return
    rows = []
    for path in paths:
        regime = os.path.basename(path)[len("roc_"):-len(".csv")]
        for r in _read_csv(path):
            rows.append({"regime": regime, **r})
    base = os.path.join(plots_dir, "roc_curves")
    _twin(base, ["regime", "fpr", "tpr", "threshold"], rows)
    if fmt == "csv-only":
        return
    fig, ax = plt.subplots(figsize=(5, 5))
    for regime in dict.fromkeys(r["regime"] for r in rows):
        pts = [r for r in rows if r["regime"] == regime]
        ax.plot([float(p["fpr"]) for p in pts], [float(p["tpr"]) for p in pts],
                label=regime)
    ax.plot([0, 1], [0, 1], ":", color="gray", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend()
    fig.tight_layout()
    _save(fig, base, fmt)


def plot_training_curves(run_dir, plots_dir, fmt):
    # adversarial histories (epoch, d_loss, g_loss)
    for path in sorted(glob.glob(os.path.join(run_dir, "histories", "*.csv"))):
        stem = os.path.basename(path)[:-len(".csv")]
        if stem.endswith("_qcbm"):
            continue
        rows = _read_csv(path)
        base = os.path.join(plots_dir, f"training_{stem}")
        _twin(base, ["epoch", "d_loss", "g_loss"], rows)
        if fmt == "csv-only":
            continue
        fig, ax = plt.subplots(figsize=(6, 3.5))
        epochs = [int(r["epoch"]) for r in rows]
        ax.plot(epochs, [float(r["d_loss"]) for r in rows], label="discriminator")
        ax.plot(epochs, [float(r["g_loss"]) for r in rows], label="generator")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.set_title(stem)
        ax.legend()
        fig.tight_layout()
        _save(fig, base, fmt)
    # classifier histories from the second experiment
    exp2_dir = os.path.join(run_dir, "exp2")
    for path in sorted(glob.glob(os.path.join(exp2_dir, "history_*.csv"))):
        regime = os.path.basename(path)[len("history_"):-len(".csv")]
        rows = _read_csv(path)
        base = os.path.join(plots_dir, f"mlp_training_{regime}")
        _twin(base, list(rows[0]) if rows else ["epoch"], rows)
        if fmt == "csv-only" or not rows:
            continue
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
        epochs = [int(r["epoch"]) for r in rows]
        axes[0].plot(epochs, [float(r["loss"]) for r in rows], color="black")
        axes[0].set_xlabel("epoch")
        axes[0].set_ylabel("training loss")
        for metric in ("accuracy", "precision", "recall", "auc"):
            if metric in rows[0]:
                axes[1].plot(epochs, [float(r[metric]) for r in rows], label=metric)
        axes[1].set_xlabel("epoch")
        axes[1].legend()
        fig.suptitle(f"classifier training: {regime}")
        fig.tight_layout()
        _save(fig, base, fmt)


def emit_plots(run_dir: str, fmt: str = "svg") -> str:
    """Render every report in the run directory; returns the plots directory."""
    if fmt not in PLOT_FORMATS:
        raise ValueError(f"format must be one of {PLOT_FORMATS}")
    plots_dir = os.path.join(run_dir, "plots")
    os.makedirs(plots_dir, exist_ok=True)
    analysis_dir = os.path.join(run_dir, "analysis")
    if os.path.isdir(analysis_dir):
        plot_metric_boxes(analysis_dir, plots_dir, fmt)
        plot_hdi_intervals(analysis_dir, plots_dir, fmt)
        plot_diff_bars(analysis_dir, plots_dir, fmt)
    plot_roc_curves(os.path.join(run_dir, "exp2"), plots_dir, fmt)
    plot_training_curves(run_dir, plots_dir, fmt)
    return plots_dir
