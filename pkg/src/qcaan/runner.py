"""Experiment orchestration: the dataset x strategy x seed matrix, the
bankruptcy-style second experiment, analysis, and result persistence.

Results live under <output_dir>/<config_hash>/.  Cells append to a crash-safe
log as they finish; the canonical results.csv is rewritten in configured
order at the end of a run, so repeated runs of one config are byte-identical
(wall-clock timings go to the manifest only, for that reason).
"""

from __future__ import annotations

import csv
import json
import os
import time

import numpy as np

from . import catalog
from .aan import (QcAanConfig, distinguishability_report, generate_synthetic,
                  make_noise_source, train)
from .classify import evaluate, fit_logistic, fit_mlp_classifier, predict_proba
from .config import DatasetSpec, ExperimentConfig
from .data import (DatasetMetadata, TabularDataset, compute_metadata,
                   load_dataset, minmax_scale, pca_project, train_test_split)
from .explain import build_diff_table, ceteris_paribus, fit_gbt, permutation_importance
from .resample import AugmentationStrategy, apply_strategy, audit_test_isolation
from .stats import bayesian_bootstrap_mean, dunn_test, hdi, kruskal_wallis

METRICS = ("accuracy", "precision", "recall", "auc")

RESULT_FIELDS = [
    "dataset", "strategy", "seed", "status", "tn", "fp", "fn", "tp",
    "accuracy", "precision", "recall", "auc", "threshold",
    "precision_defined", "recall_defined", "auc_defined",
    "n_train", "n_test", "n_synthetic", "test_isolation",
    "architecture_rule", "q", "config_hash", "error",
]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row.get(name)) for name in fieldnames])


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _seed_from(*parts) -> int:
    import zlib
    return zlib.crc32("|".join(str(p) for p in parts).encode())


class ResultsStore:
    """Append-only cell log plus the canonical, ordering-stable results.csv."""

    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        os.makedirs(run_dir, exist_ok=True)
        os.makedirs(os.path.join(run_dir, "histories"), exist_ok=True)
        self.log_path = os.path.join(run_dir, "results.log.csv")
        self.csv_path = os.path.join(run_dir, "results.csv")
        self.records: dict = {}
        if os.path.exists(self.log_path):
            with open(self.log_path, newline="") as fh:
                for row in csv.DictReader(fh):
                    self.records[(row["dataset"], row["strategy"], int(row["seed"]))] = row

    def has(self, dataset, strategy, seed) -> bool:
        return (dataset, strategy, int(seed)) in self.records

    def append(self, record: dict):
        fresh = not os.path.exists(self.log_path)
        with open(self.log_path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if fresh:
                writer.writerow(RESULT_FIELDS)
            writer.writerow([_fmt(record.get(name)) for name in RESULT_FIELDS])
        self.records[(record["dataset"], record["strategy"], int(record["seed"]))] = {
            name: _fmt(record.get(name)) for name in RESULT_FIELDS}

    def finalize(self, cell_order):
        rows = [self.records[key] for key in cell_order if key in self.records]
        write_csv(self.csv_path, RESULT_FIELDS, rows)


def read_results(run_dir: str) -> list:
    """Typed result rows from a finished run directory."""
    path = os.path.join(run_dir, "results.csv")
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = dict(raw)
            row["seed"] = int(raw["seed"])
            for key in ("tn", "fp", "fn", "tp", "n_train", "n_test", "n_synthetic", "q"):
                row[key] = int(raw[key]) if raw[key] else 0
            for key in ("accuracy", "precision", "recall", "auc", "threshold"):
                row[key] = float(raw[key]) if raw[key] else float("nan")
            for key in ("precision_defined", "recall_defined", "auc_defined", "test_isolation"):
                row[key] = raw[key] == "true"
            rows.append(row)
    return rows


def load_and_scale(spec: DatasetSpec) -> TabularDataset:
    ds = load_dataset(spec.path, spec.label_column, spec.positive_label,
                      name=spec.name, delimiter=spec.delimiter)
    return minmax_scale(ds)


def prepare_datasets(config: ExperimentConfig):
    """Ingest every configured dataset, validate against the catalog registry,
    and apply the minimum-features admission predicate."""
    datasets, reports = [], []
    for spec in config.datasets:
        ds = load_and_scale(spec)
        problems = catalog.check_counts(ds.name, ds.f, ds.n, ds.n_neg, ds.n_pos)
        admitted = ds.f >= config.min_features
        if not admitted:
            problems.append(f"{ds.name}: {ds.f} features is below the "
                            f"{config.min_features}-feature admission rule")
        reports.append({
            "name": ds.name, "f": ds.f, "n_samples": ds.n, "n_neg": ds.n_neg,
            "n_pos": ds.n_pos, "ratio": ds.n_neg / ds.n_pos,
            "admitted": admitted, "catalog_issues": "; ".join(problems),
        })
        if admitted:
            datasets.append(ds)
    return datasets, reports


def _write_history(run_dir, dataset, seed, kind, history):
    path = os.path.join(run_dir, "histories", f"{dataset}__s{seed}__{kind}.csv")
    rows = [{"epoch": i, "d_loss": d, "g_loss": g}
            for i, (d, g) in enumerate(zip(history.d_losses, history.g_losses))]
    write_csv(path, ["epoch", "d_loss", "g_loss"], rows)
    if history.qcbm_refreshes:
        rows = []
        for epoch, trace in history.qcbm_refreshes:
            for i, loss in enumerate(trace):
                rows.append({"epoch": epoch, "iteration": i, "loss": loss})
        write_csv(os.path.join(run_dir, "histories",
                               f"{dataset}__s{seed}__{kind}_qcbm.csv"),
                  ["epoch", "iteration", "loss"], rows)


def _train_generative(kind, dataset_name, minority, config: ExperimentConfig, seed: int):
    noise = make_noise_source("qcbm" if kind == "qcaan" else "gaussian",
                              q=config.q, layers=config.qcbm_layers,
                              seed=_seed_from("noise", dataset_name, kind, seed))
    aan_config = QcAanConfig(
        epochs=config.epochs, batch_size=config.batch_size,
        refresh_period=config.refresh_period, qcbm_iters=config.qcbm_iters,
        qcbm_batch=config.qcbm_batch, sinkhorn_epsilon=config.sinkhorn_epsilon,
        sinkhorn_max_iters=config.sinkhorn_max_iters,
        qcbm_step_size=config.qcbm_step_size,
        qcbm_perturbation=config.qcbm_perturbation,
        qcbm_stability=config.qcbm_stability, lr=config.lr,
        seed=_seed_from("aan", dataset_name, kind, seed),
        architecture_rule=config.architecture_rule)
    return train(minority, noise, aan_config)


def run_experiment1(config: ExperimentConfig):
    """The full matrix: per dataset, scale -> split -> augment per strategy ->
    logistic regression -> holdout evaluation.  Cell failures are recorded
    and the run continues."""
    run_dir = config.run_dir()
    store = ResultsStore(run_dir)
    datasets, prepare_reports = prepare_datasets(config)
    write_csv(os.path.join(run_dir, "prepare.csv"),
              ["name", "f", "n_samples", "n_neg", "n_pos", "ratio", "admitted",
               "catalog_issues"], prepare_reports)

    cell_order = [(ds.name, strategy, seed)
                  for ds in datasets for seed in config.seeds
                  for strategy in config.strategies]
    started = time.time()
    timings = {}
    for ds in datasets:
        for seed in config.seeds:
            pending = [s for s in config.strategies if not store.has(ds.name, s, seed)]
            if not pending:
                continue
            # the split is fixed per dataset; cell seeds drive augmentation and
            # model training, so deterministic strategies repeat exactly
            split = train_test_split(ds, config.train_fraction,
                                     seed=_seed_from("split", ds.name))
            models = {}
            for kind in ("qcaan", "gan"):
                if kind in pending:
                    t0 = time.time()
                    try:
                        models[kind] = _train_generative(
                            kind, ds.name, split.train.minority_rows(), config, seed)
                        _write_history(run_dir, ds.name, seed, kind, models[kind].history)
                    except Exception as exc:  # recorded per cell below
                        models[kind] = exc
                    timings[f"{ds.name}/s{seed}/{kind}_train"] = time.time() - t0
            for strategy_name in pending:
                t0 = time.time()
                record = {name: None for name in RESULT_FIELDS}
                record.update(dataset=ds.name, strategy=strategy_name, seed=seed,
                              architecture_rule=config.architecture_rule, q=config.q,
                              config_hash=config.config_hash(), error="")
                try:
                    model = models.get(strategy_name)
                    if isinstance(model, Exception):
                        raise model
                    strategy = AugmentationStrategy(
                        kind=strategy_name, k=config.smote_k, model=model,
                        target_ratio=config.target_ratio)
                    augmented = apply_strategy(split, strategy,
                                               seed=_seed_from("aug", ds.name, strategy_name, seed))
                    isolated = audit_test_isolation(split, augmented)
                    classifier = fit_logistic(augmented.features, augmented.labels,
                                              l2=config.l2,
                                              max_iters=config.logistic_max_iters,
                                              tol=config.logistic_tol)
                    scores = predict_proba(classifier, split.test.features)
                    report = evaluate(split.test.labels, scores)
                    record.update(report.as_dict())
                    record.update(status="ok", n_train=augmented.n, n_test=split.test.n,
                                  n_synthetic=augmented.n - split.train.n,
                                  test_isolation=isolated)
                except Exception as exc:
                    record.update(status="error", error=f"{type(exc).__name__}: {exc}")
                store.append(record)
                timings[f"{ds.name}/s{seed}/{strategy_name}"] = time.time() - t0

    store.finalize(cell_order)
    rows = [store.records[key] for key in cell_order if key in store.records]
    ok = all(store.records.get(key, {}).get("status") == "ok" for key in cell_order)
    write_json(os.path.join(run_dir, "manifest.json"), {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "experiment": "exp1",
        "cells": len(cell_order),
        "completed_ok": ok,
        "seconds": {k: round(v, 3) for k, v in sorted(timings.items())},
        "total_seconds": round(time.time() - started, 3),
    })
    return rows, ok


def _roc_points(y_true, scores):
    """ROC curve as (fpr, tpr, threshold) rows from (0,0) to (1,1)."""
    y = np.asarray(y_true, dtype=int).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    order = np.argsort(-s, kind="stable")
    y = y[order]
    s = s[order]
    n_pos = max(int(y.sum()), 1)
    n_neg = max(int((1 - y).sum()), 1)
    points = [{"fpr": 0.0, "tpr": 0.0, "threshold": float("inf")}]
    tp = fp = 0
    for i in range(y.size):
        tp += int(y[i] == 1)
        fp += int(y[i] == 0)
        if i + 1 < y.size and s[i + 1] == s[i]:
            continue  # only emit once per distinct threshold
        points.append({"fpr": fp / n_neg, "tpr": tp / n_pos, "threshold": float(s[i])})
    if points[-1]["fpr"] != 1.0 or points[-1]["tpr"] != 1.0:
        points.append({"fpr": 1.0, "tpr": 1.0, "threshold": float("-inf")})
    return points


def run_experiment2(config: ExperimentConfig):
    """PCA the configured dataset down to f = q, train GAN and QC-AAN twins
    with the simple single-layer architectures, then compare three MLP
    training regimes and the two generators' sample distinguishability."""
    run_dir = config.run_dir()
    out = os.path.join(run_dir, "exp2")
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(run_dir, "histories"), exist_ok=True)
    name = config.exp2_dataset or (config.datasets[0].name if config.datasets else "")
    spec = next((d for d in config.datasets if d.name == name), None)
    if spec is None:
        raise ValueError(f"exp2 dataset {name!r} is not configured")

    ds = load_and_scale(spec)
    reduced = pca_project(ds, config.q)
    # principal scores are signed; rescale so the relu-output generators can
    # reach the whole feature box
    reduced = minmax_scale(reduced)
    assert reduced.f == config.q
    split = train_test_split(reduced, config.train_fraction,
                             seed=_seed_from("exp2-split", name))

    epochs = config.exp2_epochs or config.epochs
    minority = split.train.minority_rows()
    models = {}
    for kind in ("gan", "qcaan"):
        noise = make_noise_source("qcbm" if kind == "qcaan" else "gaussian",
                                  q=config.q, layers=config.qcbm_layers,
                                  seed=_seed_from("exp2-noise", kind))
        aan_config = QcAanConfig(
            epochs=epochs, batch_size=config.batch_size,
            refresh_period=config.refresh_period, qcbm_iters=config.qcbm_iters,
            qcbm_batch=config.qcbm_batch, sinkhorn_epsilon=config.sinkhorn_epsilon,
            sinkhorn_max_iters=config.sinkhorn_max_iters,
            qcbm_step_size=config.qcbm_step_size,
            qcbm_perturbation=config.qcbm_perturbation,
            qcbm_stability=config.qcbm_stability, lr=config.lr,
            seed=_seed_from("exp2-aan", kind),
            simple_architecture=True, architecture_rule=config.architecture_rule)
        models[kind] = train(minority, noise, aan_config)
        _write_history(run_dir, f"exp2_{name}", 0, kind, models[kind].history)

    regimes = {"original": None, "gan": models["gan"], "qcaan": models["qcaan"]}
    summary_rows = []
    for regime, model in regimes.items():
        if model is None:
            train_ds = split.train
        else:
            strategy = AugmentationStrategy(kind="gan" if regime == "gan" else "qcaan",
                                            model=model, target_ratio=config.target_ratio)
            train_ds = apply_strategy(split, strategy, seed=_seed_from("exp2-aug", regime))
        classifier = fit_mlp_classifier(train_ds.features, train_ds.labels,
                                        seed=_seed_from("exp2-mlp", regime),
                                        epochs=config.mlp_epochs, lr=config.mlp_lr,
                                        batch_size=config.mlp_batch_size)
        write_csv(os.path.join(out, f"history_{regime}.csv"),
                  ["epoch", "loss", "accuracy", "precision", "recall", "auc"],
                  [{"epoch": i, **rec} for i, rec in enumerate(classifier.history)])
        scores = classifier.predict_proba(split.test.features)
        report = evaluate(split.test.labels, scores)
        write_json(os.path.join(out, f"confusion_{regime}.json"), report.as_dict())
        write_csv(os.path.join(out, f"roc_{regime}.csv"),
                  ["fpr", "tpr", "threshold"], _roc_points(split.test.labels, scores))
        summary_rows.append({"regime": regime, **report.as_dict()})
    write_csv(os.path.join(out, "summary.csv"),
              ["regime"] + list(summary_rows[0])[1:], summary_rows)

    gan_samples = generate_synthetic(models["gan"], config.exp2_samples,
                                     seed=_seed_from("exp2-sample", "gan"))
    qcaan_samples = generate_synthetic(models["qcaan"], config.exp2_samples,
                                       seed=_seed_from("exp2-sample", "qcaan"))
    distinguish = distinguishability_report(gan_samples, qcaan_samples,
                                            seed=_seed_from("exp2-distinguish"))
    write_json(os.path.join(out, "distinguishability.json"), distinguish.as_dict())
    return {"summary": summary_rows, "distinguishability": distinguish,
            "histories": {r: os.path.join(out, f"history_{r}.csv") for r in regimes}}


def compute_all_metadata(config: ExperimentConfig, run_dir: str | None = None):
    """DatasetMetadata per configured dataset, checked against the registry.

    Writes the consolidated CSV, one JSON record per dataset, and a
    discrepancy report (computed-vs-registry differences are reported, never
    silently dropped)."""
    run_dir = run_dir or config.run_dir()
    out = os.path.join(run_dir, "metadata")
    os.makedirs(out, exist_ok=True)
    records, discrepancies = [], []
    metadata = {}
    for spec in config.datasets:
        ds = load_and_scale(spec)
        meta = compute_metadata(ds, cap=config.metadata_cap,
                                seed=_seed_from("metadata", ds.name))
        metadata[ds.name] = meta
        rec = meta.as_dict()
        records.append(rec)
        write_json(os.path.join(out, f"{ds.name}.json"), rec)
        for problem in (catalog.check_counts(ds.name, ds.f, ds.n, ds.n_neg, ds.n_pos)
                        + catalog.check_distances(ds.name, meta)):
            discrepancies.append({"dataset": ds.name, "issue": problem})
    fields = list(records[0]) if records else ["name"]
    write_csv(os.path.join(run_dir, "metadata.csv"), fields, records)
    write_csv(os.path.join(run_dir, "metadata_discrepancies.csv"),
              ["dataset", "issue"], discrepancies)
    return metadata, discrepancies


def _load_metadata_csv(path) -> dict:
    metadata = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            triples = {}
            for key in ("dn", "dp", "dnp"):
                vals = [row[f"{stat}_{key}"] for stat in ("min", "med", "max")]
                triples[key] = tuple(float(v) for v in vals) if all(vals) else None
            metadata[row["name"]] = DatasetMetadata(
                name=row["name"], f=int(row["f"]), n_samples=int(row["n_samples"]),
                n_neg=int(row["n_neg"]), n_pos=int(row["n_pos"]),
                ratio=float(row["ratio"]), dn=triples["dn"], dp=triples["dp"],
                dnp=triples["dnp"], subsampled=row["subsampled"] == "true")
    return metadata


def run_analysis(config: ExperimentConfig, run_dir: str | None = None):
    """Statistics and explainability over a finished experiment-1 matrix.

    Pure function of the results store and config: re-running overwrites the
    analysis directory with byte-identical files."""
    run_dir = run_dir or config.run_dir()
    rows = read_results(run_dir)
    ok_rows = [r for r in rows if r["status"] == "ok"]
    strategies = [s for s in config.strategies
                  if any(r["strategy"] == s for r in ok_rows)]
    if len(strategies) < 2:
        raise ValueError("analysis needs results for at least 2 strategies")
    out = os.path.join(run_dir, "analysis")
    os.makedirs(out, exist_ok=True)

    # one value per (dataset, strategy): metrics averaged over seeds
    datasets = sorted({r["dataset"] for r in ok_rows})
    per_cell = {}
    for r in ok_rows:
        per_cell.setdefault((r["dataset"], r["strategy"]), []).append(r)
    cell_means = {}
    for (ds, strat), cell in per_cell.items():
        cell_means[(ds, strat)] = {m: float(np.mean([c[m] for c in cell])) for m in METRICS}

    box_rows = [{"metric": m, "strategy": s, "dataset": ds,
                 "value": cell_means[(ds, s)][m]}
                for m in METRICS for s in strategies for ds in datasets
                if (ds, s) in cell_means]
    write_csv(os.path.join(out, "metric_values.csv"),
              ["metric", "strategy", "dataset", "value"], box_rows)

    stats_report = {"strategies": strategies, "metrics": {}}
    hdi_rows = []
    for metric in METRICS:
        groups = [[cell_means[(ds, s)][metric] for ds in datasets if (ds, s) in cell_means]
                  for s in strategies]
        kw = kruskal_wallis(groups)
        dunn = dunn_test(groups, p_adjust=config.p_adjust, names=strategies)
        write_csv(os.path.join(out, f"dunn_{metric}.csv"),
                  ["strategy"] + strategies,
                  [{"strategy": si, **{sj: dunn.p[i, j] for j, sj in enumerate(strategies)}}
                   for i, si in enumerate(strategies)])
        stats_report["metrics"][metric] = {
            "kruskal_h": kw.h, "kruskal_p": kw.p_value,
            "dunn_z": dunn.z.tolist(), "dunn_p": dunn.p.tolist(),
            "p_adjust": config.p_adjust,
        }
        for i, s in enumerate(strategies):
            replicates = bayesian_bootstrap_mean(
                groups[i], replications=config.bootstrap_replications,
                seed=_seed_from("bootstrap", metric, s))
            interval = hdi(replicates, mass=config.hdi_mass)
            hdi_rows.append({"metric": metric, "strategy": s,
                             "mean": float(np.mean(replicates)),
                             "lo": interval.lo, "hi": interval.hi,
                             "mass": config.hdi_mass})
    write_json(os.path.join(out, "stats_report.json"), stats_report)
    write_csv(os.path.join(out, "hdi.csv"),
              ["metric", "strategy", "mean", "lo", "hi", "mass"], hdi_rows)

    metadata_path = os.path.join(run_dir, "metadata.csv")
    if os.path.exists(metadata_path):
        metadata = _load_metadata_csv(metadata_path)
    else:
        metadata, _ = compute_all_metadata(config, run_dir)

    diffs = build_diff_table(ok_rows, metadata, baseline=config.analysis_baseline,
                             contender=config.analysis_contender)
    diff_rows = []
    for i, ds in enumerate(diffs.dataset_names):
        row = {"dataset": ds}
        row.update({f"diff_{m}": diffs.diffs[m][i] for m in diffs.diffs})
        row.update({name: diffs.features[i, j] for j, name in enumerate(diffs.feature_names)})
        diff_rows.append(row)
    write_csv(os.path.join(out, "diff_table.csv"),
              ["dataset"] + [f"diff_{m}" for m in diffs.diffs] + diffs.feature_names,
              diff_rows)

    for metric in diffs.diffs:
        y = diffs.target(metric)
        model = fit_gbt(diffs.features, y, rounds=config.gbt_rounds,
                        max_depth=config.gbt_max_depth,
                        learning_rate=config.gbt_learning_rate,
                        feature_names=diffs.feature_names)
        importances = permutation_importance(
            model, diffs.features, y, repeats=config.importance_repeats,
            seed=_seed_from("importance", metric))
        order = np.argsort(-importances, kind="stable")
        write_csv(os.path.join(out, f"importance_{metric}.csv"),
                  ["feature", "importance"],
                  [{"feature": diffs.feature_names[j], "importance": importances[j]}
                   for j in order])
        anchor = np.median(diffs.features, axis=0)
        for j in order[: config.cp_top_features]:
            profile = ceteris_paribus(model, diffs.features, anchor, int(j),
                                      grid_size=config.cp_grid_size)
            write_csv(os.path.join(out, f"cp_{metric}__{diffs.feature_names[j]}.csv"),
                      ["grid", "prediction"],
                      [{"grid": g, "prediction": p}
                       for g, p in zip(profile.grid, profile.predictions)])
    return out
