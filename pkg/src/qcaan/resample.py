"""Minority-class augmentation: random oversampling, SMOTE, and the strategy
interface that also wraps the generative models.

Strategies only ever touch the training half of a split; the test set is
passed through untouched and synthetic rows are provenance-tagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import TabularDataset, TrainTestSplit

STRATEGY_KINDS = ("none", "random", "smote", "qcaan", "gan")


class ResampleError(ValueError):
    pass


@dataclass
class AugmentationStrategy:
    kind: str
    k: int = 5                     # SMOTE neighbor count
    model: object = None           # TrainedGenerator handle for qcaan/gan
    target_ratio: float = 1.0      # desired pos:neg ratio after augmentation

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ResampleError(f"unknown strategy kind {self.kind!r}")
        if self.kind in ("qcaan", "gan") and self.model is None:
            raise ResampleError(f"strategy {self.kind!r} needs a trained model")
        if self.kind == "smote" and self.k < 1:
            raise ResampleError("SMOTE needs k >= 1")


def random_oversample(minority: np.ndarray, n_new: int, seed: int = 0) -> np.ndarray:
    """Draw n_new rows uniformly with replacement from the minority matrix."""
    minority = np.atleast_2d(np.asarray(minority, dtype=float))
    if minority.shape[0] == 0:
        raise ResampleError("empty minority class")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, minority.shape[0], size=n_new)
    return minority[picks].copy()


def smote(minority: np.ndarray, k: int, n_new: int, seed: int = 0) -> np.ndarray:
    """Interpolated minority oversampling.

    Each synthetic row is x + u * (x_nn - x) with u ~ U[0, 1], x a uniformly
    chosen minority row, and x_nn one of its k nearest minority neighbors by
    Euclidean distance (self excluded, ties broken by lowest row index).
    k is capped at |minority| - 1.
    """
    minority = np.atleast_2d(np.asarray(minority, dtype=float))
    n = minority.shape[0]
    if n < 2:
        raise ResampleError("SMOTE needs at least 2 minority rows")
    k = min(k, n - 1)
    rng = np.random.default_rng(seed)

    distances = cdist(minority, minority)
    np.fill_diagonal(distances, np.inf)  # exclude self even among duplicates
    neighbors = np.argsort(distances, axis=1, kind="stable")[:, :k]

    out = np.empty((n_new, minority.shape[1]))
    for row in range(n_new):
        i = int(rng.integers(0, n))
        j = int(neighbors[i, rng.integers(0, k)])
        u = rng.random()
        out[row] = minority[i] + u * (minority[j] - minority[i])
    return out


def synthetic_count(n_neg: int, n_pos: int, target_ratio: float = 1.0) -> int:
    """Positive rows to append so that pos:neg reaches target_ratio (never negative)."""
    return max(0, int(round(target_ratio * n_neg)) - n_pos)


def apply_strategy(split: TrainTestSplit, strategy: AugmentationStrategy,
                   seed: int = 0) -> TabularDataset:
    """Augment the training set with synthetic positive rows; the test set is
    never read or written."""
    train = split.train
    if strategy.kind == "none":
        return train
    n_new = synthetic_count(train.n_neg, train.n_pos, strategy.target_ratio)
    if n_new == 0:
        return train
    minority = train.minority_rows()
    if strategy.kind == "random":
        synthetic = random_oversample(minority, n_new, seed)
    elif strategy.kind == "smote":
        synthetic = smote(minority, strategy.k, n_new, seed)
    else:
        from .aan import generate_synthetic
        synthetic = generate_synthetic(strategy.model, n_new, seed)
        if synthetic.shape[1] != train.f:
            raise ResampleError(
                f"model emits {synthetic.shape[1]}-wide rows, training data is {train.f}-wide")
    features = np.vstack([train.features, synthetic])
    labels = np.concatenate([train.labels, np.ones(n_new, dtype=int)])
    provenance = np.concatenate([
        train.provenance,
        np.full(n_new, f"synthetic:{strategy.kind}", dtype=object),
    ])
    return TabularDataset(train.name, features, labels, provenance)


def audit_test_isolation(split: TrainTestSplit, augmented: TabularDataset) -> bool:
    """True when no synthetic row's byte image coincides with a test row.

    On data with duplicate rows straddling the split (some catalog sets have
    them) a collision can be a benign duplicate rather than leakage; the
    audit is still reported so it can be inspected.
    """
    test_hashes = {row.tobytes() for row in split.test.features}
    synthetic = augmented.features[augmented.provenance != "original"]
    return not any(row.tobytes() in test_hashes for row in synthetic)
