"""Follow-on classifiers and holdout-set quality metrics.

Logistic regression is fit by iteratively reweighted least squares on the
mean cross-entropy plus an L2 penalty (intercept unpenalized), so the fitted
model is invariant to duplicating every row.  AUC uses the rank-statistic
(Mann-Whitney) formulation with ties contributing one half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .neuralnet import (AdamState, DenseNetworkSpec, LayerSpec, NetParams,
                        adam_step, backprop, forward)

MLP_HIDDEN_DIMS = (64, 32, 16, 4)


class ClassifierError(ValueError):
    pass


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2: float
    converged: bool = True
    iterations: int = 0


def _check_xy(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ClassifierError("X and y length mismatch")
    if X.size == 0:
        raise ClassifierError("empty feature matrix")
    if not np.isfinite(X).all():
        raise ClassifierError("non-finite features")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ClassifierError("labels must be 0 or 1")
    return X, y


def fit_logistic(X, y, l2: float = 1.0, max_iters: int = 100, tol: float = 1e-8,
                 seed: int | None = None) -> LogisticModel:
    """Minimize mean binary cross-entropy + (l2/2)*||w||^2 by Newton/IRLS.

    Deterministic: ``seed`` is accepted for interface symmetry with the other
    trainers but the solver does not draw randomness.
    """
    X, y = _check_xy(X, y)
    if y.min() == y.max():
        raise ClassifierError("single-class labels")
    n, f = X.shape
    beta = np.zeros(f + 1)  # [w..., b]
    design = np.hstack([X, np.ones((n, 1))])
    penalty = np.full(f + 1, l2)
    penalty[-1] = 0.0  # intercept unregularized
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        p = expit(design @ beta)
        grad = design.T @ (p - y) / n + penalty * beta
        s = np.maximum(p * (1.0 - p), 1e-12)
        hessian = (design.T * s) @ design / n + np.diag(penalty)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hessian, grad, rcond=None)[0]
        beta = beta - step
        if np.linalg.norm(step) < tol:
            converged = True
            break
    return LogisticModel(weights=beta[:-1], bias=float(beta[-1]), l2=l2,
                         converged=converged, iterations=iterations)


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.weights.size:
        raise ClassifierError(f"feature width {X.shape[1]} != model width {model.weights.size}")
    return expit(X @ model.weights + model.bias)


def logistic_gradient_norm(model: LogisticModel, X, y) -> float:
    """Norm of the penalized-loss gradient at the fitted parameters."""
    X, y = _check_xy(X, y)
    p = predict_proba(model, X)
    n = X.shape[0]
    grad_w = X.T @ (p - y) / n + model.l2 * model.weights
    grad_b = float(np.sum(p - y) / n)
    return float(np.sqrt(np.sum(grad_w ** 2) + grad_b ** 2))


@dataclass
class ClassificationReport:
    tn: int
    fp: int
    fn: int
    tp: int
    accuracy: float
    precision: float
    recall: float
    auc: float
    threshold: float
    precision_defined: bool = True
    recall_defined: bool = True
    auc_defined: bool = True

    def as_dict(self) -> dict:
        return {
            "tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "auc": self.auc, "threshold": self.threshold,
            "precision_defined": self.precision_defined,
            "recall_defined": self.recall_defined,
            "auc_defined": self.auc_defined,
        }


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney AUC: mean rank of positives, ties counted as one half."""
    y = np.asarray(y_true, dtype=int).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ClassifierError("AUC needs both classes present")
    ranks = rankdata(s)
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(y_true, scores, threshold: float = 0.5) -> ClassificationReport:
    """Confusion counts at the threshold plus accuracy/precision/recall/AUC.

    Zero-denominator precision or recall is reported as 0.0 with the matching
    ``*_defined`` flag cleared; same for AUC on single-class truth.
    """
    y = np.asarray(y_true, dtype=int).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    if y.size != s.size:
        raise ClassifierError("y_true and scores length mismatch")
    if not np.isin(y, (0, 1)).all():
        raise ClassifierError("y_true must be binary")
    pred = (s >= threshold).astype(int)
    tp = int(((pred == 1) & (y == 1)).sum())
    tn = int(((pred == 0) & (y == 0)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    total = y.size
    accuracy = (tp + tn) / total
    precision_defined = (tp + fp) > 0
    recall_defined = (tp + fn) > 0
    precision = tp / (tp + fp) if precision_defined else 0.0
    recall = tp / (tp + fn) if recall_defined else 0.0
    auc_defined = bool(0 < int(y.sum()) < total)
    auc = roc_auc(y, s) if auc_defined else 0.5
    return ClassificationReport(tn=tn, fp=fp, fn=fn, tp=tp, accuracy=accuracy,
                                precision=precision, recall=recall, auc=auc,
                                threshold=threshold,
                                precision_defined=precision_defined,
                                recall_defined=recall_defined,
                                auc_defined=auc_defined)


def mlp_classifier_spec(f: int) -> DenseNetworkSpec:
    dims = (f,) + MLP_HIDDEN_DIMS
    layers = [LayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:])]
    layers.append(LayerSpec(MLP_HIDDEN_DIMS[-1], 1, "sigmoid"))
    return DenseNetworkSpec(tuple(layers), penultimate=len(layers) - 2)


@dataclass
class MlpClassifier:
    spec: DenseNetworkSpec
    params: NetParams
    history: list  # one record per epoch: loss + training metrics

    def predict_proba(self, X) -> np.ndarray:
        return forward(self.spec, self.params, X).output.ravel()


def fit_mlp_classifier(X, y, seed: int = 0, epochs: int = 100, lr: float = 0.001,
                       batch_size: int = 32, track_metrics: bool = True) -> MlpClassifier:
    """Train the fixed 64/32/16/4 relu stack (sigmoid head) with Adam on BCE.

    The history records per-epoch training loss and, when ``track_metrics``,
    the four classification metrics on the training data.
    """
    X, y = _check_xy(X, y)
    if y.min() == y.max():
        raise ClassifierError("single-class labels")
    spec = mlp_classifier_spec(X.shape[1])
    params = NetParams.initialize(spec, seed=seed)
    state = AdamState.initialize(params, lr=lr)
    rng = np.random.default_rng(seed)
    history = []
    for _ in range(epochs):
        order = rng.permutation(X.shape[0])
        losses = []
        for start in range(0, X.shape[0], batch_size):
            idx = order[start:start + batch_size]
            grads = backprop(spec, params, X[idx], "bce_on_labels", y[idx])
            params, state = adam_step(params, grads, state)
            losses.append(grads.loss)
        record = {"loss": float(np.mean(losses))}
        if track_metrics:
            scores = forward(spec, params, X).output.ravel()
            report = evaluate(y, scores)
            record.update(accuracy=report.accuracy, precision=report.precision,
                          recall=report.recall, auc=report.auc)
        history.append(record)
    return MlpClassifier(spec, params, history)
