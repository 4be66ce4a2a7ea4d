"""Dataset ingestion, preprocessing, splitting, PCA, and distance metadata."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist


class DataError(ValueError):
    """Raised for malformed input files or degenerate datasets."""


@dataclass
class TabularDataset:
    """A feature matrix with binary labels (1 = positive/minority class).

    ``provenance`` tags every row as ``original`` or ``synthetic:<kind>`` so
    augmented rows stay identifiable through CSV export.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise DataError(f"{self.name}: features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError(f"{self.name}: label count does not match row count")
        if not np.isin(self.labels, (0, 1)).all():
            raise DataError(f"{self.name}: labels must be 0 or 1")
        if self.n_pos == 0 or self.n_neg == 0:
            raise DataError(f"{self.name}: single-class dataset")
        if self.provenance is None:
            self.provenance = np.full(self.features.shape[0], "original", dtype=object)
        else:
            self.provenance = np.asarray(self.provenance, dtype=object)
            if self.provenance.shape != (self.features.shape[0],):
                raise DataError(f"{self.name}: provenance length mismatch")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def f(self) -> int:
        return self.features.shape[1]

    @property
    def n_pos(self) -> int:
        return int((self.labels == 1).sum())

    @property
    def n_neg(self) -> int:
        return int((self.labels == 0).sum())

    def minority_rows(self) -> np.ndarray:
        return self.features[self.labels == 1]


@dataclass
class TrainTestSplit:
    train: TabularDataset
    test: TabularDataset
    train_fraction: float
    seed: int


@dataclass
class DatasetMetadata:
    """Class counts, imbalance ratio, and pairwise-distance summaries.

    Distance triples are (min, median, max) of Euclidean distances over the
    scaled features: ``dn`` within the negative class, ``dp`` within the
    positive class, ``dnp`` between the classes.  A within-class triple is
    None when the class has a single member.  ``subsampled`` flags rows where
    a class exceeded the exact-computation cap.
    """

    name: str
    f: int
    n_samples: int
    n_neg: int
    n_pos: int
    ratio: float
    dn: tuple | None
    dp: tuple | None
    dnp: tuple
    subsampled: bool = False

    def as_dict(self) -> dict:
        rec = {
            "name": self.name,
            "f": self.f,
            "n_samples": self.n_samples,
            "n_neg": self.n_neg,
            "n_pos": self.n_pos,
            "ratio": self.ratio,
            "subsampled": self.subsampled,
        }
        for key, triple in (("dn", self.dn), ("dp", self.dp), ("dnp", self.dnp)):
            for stat, value in zip(("min", "med", "max"), triple or (None, None, None)):
                rec[f"{stat}_{key}"] = value
        return rec


def load_dataset(path, label_column: str, positive_label, name: str | None = None,
                 delimiter: str = ",") -> TabularDataset:
    """Read a delimited numeric table with a header row into a TabularDataset.

    The label column may hold arbitrary strings; rows matching
    ``positive_label`` (compared as text) map to 1, everything else to 0.
    All remaining cells must parse as numbers.
    """
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]

        rows, labels = [], []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
            raw_label = cells[label_idx].strip()
            labels.append(1 if raw_label == str(positive_label) else 0)
            feats = []
            for i, cell in enumerate(cells):
                if i == label_idx:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric value {cell.strip()!r} "
                        f"in column {header[i]!r}") from None
            rows.append(feats)

    if not rows:
        raise DataError(f"{path}: no data rows")
    labels_arr = np.array(labels, dtype=int)
    if labels_arr.min() == labels_arr.max():
        raise DataError(f"{path}: single-class dataset (positive_label={positive_label!r})")
    ds_name = name if name is not None else str(path)
    ds = TabularDataset(ds_name, np.array(rows, dtype=float), labels_arr)
    ds.feature_names = feature_names  # kept for reports; not part of the core contract
    return ds


def minmax_scale(ds: TabularDataset) -> TabularDataset:
    """Map each column to [0, 1] via (x - min) / (max - min); constant columns map to 0."""
    x = ds.features
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    scaled = np.zeros_like(x)
    live = span > 0
    scaled[:, live] = (x[:, live] - lo[live]) / span[live]
    return TabularDataset(ds.name, scaled, ds.labels.copy(), ds.provenance.copy())


def train_test_split(ds: TabularDataset, fraction: float = 0.75, seed: int = 0) -> TrainTestSplit:
    """Stratified split; |train| = round(fraction * N) with per-class counts
    within one sample of proportionality and neither side losing a class."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"fraction must be in (0, 1), got {fraction}")
    counts = {0: ds.n_neg, 1: ds.n_pos}
    for cls, n_c in counts.items():
        if n_c < 2:
            raise DataError(f"{ds.name}: class {cls} has {n_c} sample(s); need >= 2 to split")

    n_train = int(round(fraction * ds.n))
    targets = {cls: int(np.floor(fraction * n_c)) for cls, n_c in counts.items()}
    for cls in targets:
        targets[cls] = min(max(targets[cls], 1), counts[cls] - 1)
    # distribute the remainder by largest fractional part, negatives first on ties
    order = sorted(targets, key=lambda c: (-(fraction * counts[c] - np.floor(fraction * counts[c])), c))
    spare = n_train - sum(targets.values())
    while spare > 0:
        moved = False
        for cls in order:
            if spare and targets[cls] < counts[cls] - 1:
                targets[cls] += 1
                spare -= 1
                moved = True
        if not moved:
            break
    while spare < 0:
        moved = False
        for cls in reversed(order):
            if spare and targets[cls] > 1:
                targets[cls] -= 1
                spare += 1
                moved = True
        if not moved:
            break

    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(ds.labels == cls)
        idx = idx[rng.permutation(idx.size)]
        train_idx.append(idx[: targets[cls]])
        test_idx.append(idx[targets[cls]:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))

    def subset(which, idx):
        return TabularDataset(f"{ds.name}/{which}", ds.features[idx],
                              ds.labels[idx], ds.provenance[idx])

    return TrainTestSplit(subset("train", train_idx), subset("test", test_idx),
                          fraction, seed)


def _distance_triple(values: np.ndarray) -> tuple:
    # median of an even-length list is the mean of the two central values,
    # which is numpy's default
    return (float(values.min()), float(np.median(values)), float(values.max()))


def compute_metadata(ds: TabularDataset, cap: int = 20000, seed: int = 0) -> DatasetMetadata:
    """Distance-based metadata over scaled features.

    Pairwise distances are exact up to ``cap`` rows per class; larger classes
    are uniformly subsampled to the cap (seeded, flagged in the output).
    Memory for the exact path grows as O(n^2): lower the cap when that bites.
    """
    rng = np.random.default_rng(seed)
    subsampled = False
    groups = {}
    for cls, key in ((0, "neg"), (1, "pos")):
        rows = ds.features[ds.labels == cls]
        if rows.shape[0] > cap:
            keep = np.sort(rng.choice(rows.shape[0], size=cap, replace=False))
            rows = rows[keep]
            subsampled = True
        groups[key] = rows

    dn = _distance_triple(pdist(groups["neg"])) if groups["neg"].shape[0] >= 2 else None
    dp = _distance_triple(pdist(groups["pos"])) if groups["pos"].shape[0] >= 2 else None
    dnp = _distance_triple(cdist(groups["neg"], groups["pos"]).ravel())

    return DatasetMetadata(
        name=ds.name, f=ds.f, n_samples=ds.n, n_neg=ds.n_neg, n_pos=ds.n_pos,
        ratio=ds.n_neg / ds.n_pos, dn=dn, dp=dp, dnp=dnp, subsampled=subsampled)


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # (k, f), rows ordered by descending eigenvalue
    eigenvalues: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) @ self.components.T

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return z @ self.components + self.mean


def pca_fit(features: np.ndarray, k: int) -> PcaBasis:
    """Top-k eigenvectors of the sample covariance (ddof=1).

    Sign convention: the largest-magnitude entry of each component is made
    positive, which pins down the otherwise arbitrary eigenvector signs.
    """
    x = np.asarray(features, dtype=float)
    n, f = x.shape
    if not 1 <= k <= f:
        raise DataError(f"k must be in [1, {f}], got {k}")
    if n < 2:
        raise DataError("PCA needs at least 2 rows")
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return PcaBasis(mean, components, eigvals[order].copy())


def pca_project(ds: TabularDataset, k: int) -> TabularDataset:
    """Project onto the k leading principal components; output has f = k."""
    basis = pca_fit(ds.features, k)
    return TabularDataset(ds.name, basis.transform(ds.features),
                          ds.labels.copy(), ds.provenance.copy())
