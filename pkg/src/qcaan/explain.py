"""Surrogate-model explainability over the experiment matrix: per-dataset
metric differences as regression targets, a gradient-boosted-tree regressor
on dataset metadata, permutation importance, and ceteris paribus profiles.

The boosted trees use plain squared-error residual fitting with exhaustive
split search; at ~20 training rows anything fancier just memorizes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

DIFF_METRICS = ("accuracy", "precision", "recall")

METADATA_FEATURES = ("f", "n_samples", "n_neg", "n_pos", "ratio",
                     "min_dn", "med_dn", "max_dn",
                     "min_dp", "med_dp", "max_dp",
                     "min_dnp", "med_dnp", "max_dnp")


class ExplainError(ValueError):
    pass


@dataclass
class MetricDiffTable:
    """One row per dataset: metric diffs (contender minus baseline) joined
    with the dataset's metadata features."""

    dataset_names: list
    feature_names: list
    features: np.ndarray
    diffs: dict  # metric name -> vector aligned with dataset_names
    baseline: str
    contender: str

    def target(self, metric: str) -> np.ndarray:
        if metric not in self.diffs:
            raise ExplainError(f"no diff column for metric {metric!r}")
        return self.diffs[metric]


def build_diff_table(rows, metadata, baseline: str = "smote",
                     contender: str = "qcaan") -> MetricDiffTable:
    """Aggregate result rows into per-dataset diffs joined with metadata.

    ``rows`` are result records (dicts) with dataset/strategy/metric keys;
    multiple seeds per cell are averaged.  ``metadata`` maps dataset name to
    its DatasetMetadata.  A dataset missing either strategy cell is an error.
    """
    cells: dict = {}
    for row in rows:
        if row.get("status", "ok") != "ok":
            continue
        key = (row["dataset"], row["strategy"])
        cells.setdefault(key, []).append(row)

    names = sorted({ds for (ds, _) in cells})
    dataset_names, feature_rows, diff_cols = [], [], {m: [] for m in DIFF_METRICS}
    for ds in names:
        base_rows = cells.get((ds, baseline))
        cont_rows = cells.get((ds, contender))
        if not base_rows or not cont_rows:
            raise ExplainError(f"dataset {ds!r} lacks a {baseline!r} or {contender!r} cell")
        if ds not in metadata:
            raise ExplainError(f"no metadata for dataset {ds!r}")
        meta = metadata[ds].as_dict()
        feats = [meta[name] for name in METADATA_FEATURES]
        if any(v is None or not np.isfinite(v) for v in feats):
            raise ExplainError(f"dataset {ds!r} has undefined metadata features")
        for metric in DIFF_METRICS:
            base = float(np.mean([float(r[metric]) for r in base_rows]))
            cont = float(np.mean([float(r[metric]) for r in cont_rows]))
            diff_cols[metric].append(cont - base)
        dataset_names.append(ds)
        feature_rows.append(feats)

    return MetricDiffTable(
        dataset_names=dataset_names,
        feature_names=list(METADATA_FEATURES),
        features=np.asarray(feature_rows, dtype=float),
        diffs={m: np.asarray(v) for m, v in diff_cols.items()},
        baseline=baseline, contender=contender)


@dataclass
class TreeNode:
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _sse(y):
    return float(np.sum((y - y.mean()) ** 2)) if y.size else 0.0


def _best_split(X, y):
    """Exhaustive search over midpoints of sorted unique values per feature.

    Returns (feature, threshold, sse) of the best split, or None when no
    split strictly improves on the node's own SSE.  Ties keep the first
    (lowest feature index, then lowest threshold).
    """
    best = None
    best_sse = _sse(y)
    for j in range(X.shape[1]):
        column = X[:, j]
        levels = np.unique(column)
        for a, b in zip(levels, levels[1:]):
            thr = 0.5 * (a + b)
            mask = column <= thr
            total = _sse(y[mask]) + _sse(y[~mask])
            if total < best_sse - 1e-15:
                best = (j, float(thr), total)
                best_sse = total
    return best


def _grow(X, y, depth, max_depth, min_samples_leaf):
    node = TreeNode(value=float(y.mean()))
    if depth >= max_depth or y.size <= min_samples_leaf or np.all(y == y[0]):
        return node
    split = _best_split(X, y)
    if split is None:
        return node
    j, thr, _ = split
    mask = X[:, j] <= thr
    if mask.sum() < min_samples_leaf or (~mask).sum() < min_samples_leaf:
        return node
    node.feature = j
    node.threshold = thr
    node.left = _grow(X[mask], y[mask], depth + 1, max_depth, min_samples_leaf)
    node.right = _grow(X[~mask], y[~mask], depth + 1, max_depth, min_samples_leaf)
    return node


def _predict_node(node, row):
    while not node.is_leaf:
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.value


def fit_regression_tree(X, y, max_depth: int = 3, min_samples_leaf: int = 1) -> TreeNode:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    return _grow(X, y, 0, max_depth, min_samples_leaf)


def tree_predict(node: TreeNode, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([_predict_node(node, row) for row in X])


@dataclass
class GbtModel:
    base_prediction: float
    learning_rate: float
    trees: list = field(default_factory=list)
    train_mse_trace: list = field(default_factory=list)
    feature_names: list | None = None

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.base_prediction)
        for tree in self.trees:
            out += self.learning_rate * tree_predict(tree, X)
        return out

    def thresholds_for_feature(self, feature: int) -> list:
        found = set()

        def walk(node):
            if node is None or node.is_leaf:
                return
            if node.feature == feature:
                found.add(node.threshold)
            walk(node.left)
            walk(node.right)

        for tree in self.trees:
            walk(tree)
        return sorted(found)


def fit_gbt(X, y, rounds: int = 200, max_depth: int = 3, learning_rate: float = 0.1,
            seed: int | None = None, min_samples_leaf: int = 1,
            feature_names=None) -> GbtModel:
    """Squared-error gradient boosting from the mean prediction.

    Each round fits a depth-limited tree to the current residuals, so the
    training MSE is non-increasing.  Fitting is deterministic (``seed`` is
    accepted for interface symmetry only).  Emits a warning when the model
    has effectively memorized the training rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ExplainError("need at least 2 rows")
    if X.shape[0] != y.size:
        raise ExplainError("X and y length mismatch")
    model = GbtModel(base_prediction=float(y.mean()), learning_rate=learning_rate,
                     feature_names=list(feature_names) if feature_names else None)
    residuals = y - model.base_prediction
    model.train_mse_trace.append(float(np.mean(residuals ** 2)))
    for _ in range(rounds):
        tree = fit_regression_tree(X, residuals, max_depth, min_samples_leaf)
        model.trees.append(tree)
        residuals = residuals - learning_rate * tree_predict(tree, X)
        model.train_mse_trace.append(float(np.mean(residuals ** 2)))
    if model.train_mse_trace[-1] < 1e-6:
        warnings.warn("training MSE below 1e-6: the surrogate has memorized "
                      "the training rows", RuntimeWarning)
    return model


def permutation_importance(model, X, y, repeats: int = 20, seed: int = 0) -> np.ndarray:
    """Mean MSE increase when one column is shuffled, per feature.

    A feature no tree ever splits on scores exactly zero, since shuffling it
    cannot change any prediction.  The seeded shuffles are applied in a
    canonical (lexicographic) row order, so jointly reordering the rows of
    X and y cannot change the scores.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    canonical = np.lexsort(np.column_stack([y, X]).T)
    baseline = float(np.mean((model.predict(X) - y) ** 2))
    importances = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        increases = np.empty(repeats)
        for r in range(repeats):
            shuffled = X.copy()
            shuffled[canonical, j] = X[canonical, j][rng.permutation(X.shape[0])]
            increases[r] = float(np.mean((model.predict(shuffled) - y) ** 2)) - baseline
        importances[j] = increases.mean()
    return importances


@dataclass
class CeterisParibusProfile:
    feature: int
    feature_name: str
    grid: np.ndarray
    predictions: np.ndarray
    anchor_row: np.ndarray


def ceteris_paribus(model, X, anchor_row, feature: int,
                    grid_size: int = 50) -> CeterisParibusProfile:
    """Model predictions as one feature sweeps its observed [min, max] with
    every other feature pinned at the anchor instance's values."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not 0 <= feature < X.shape[1]:
        raise ExplainError(f"feature index {feature} out of range")
    anchor = np.asarray(anchor_row, dtype=float).ravel()
    if anchor.size != X.shape[1]:
        raise ExplainError("anchor row width mismatch")
    grid = np.linspace(X[:, feature].min(), X[:, feature].max(), grid_size)
    sweep = np.tile(anchor, (grid_size, 1))
    sweep[:, feature] = grid
    name = (model.feature_names[feature]
            if getattr(model, "feature_names", None) else f"x{feature}")
    return CeterisParibusProfile(feature=feature, feature_name=name, grid=grid,
                                 predictions=model.predict(sweep), anchor_row=anchor)
