"""Discriminative classifiers over embedding rows, metrics, and tuple-level folds."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .errors import ConfigError, DGMWarning


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.y = np.asarray(self.y, dtype=np.int64)
        self.groups = (np.arange(len(self.y)) if self.groups is None
                       else np.asarray(self.groups, dtype=np.int64))
        if not (len(self.X) == len(self.y) == len(self.groups)):
            raise ValueError("X, y and groups must have the same length")

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return len(self.y)

    def subset(self, mask) -> Dataset:
        return Dataset(self.X[mask], self.y[mask], self.groups[mask])


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# --------------------------------------------------------------------------
# logistic regression
# --------------------------------------------------------------------------

def logistic_loss_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * |w|^2``; ``params`` is ``[w..., b]``."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (sigmoid(z) - y) / len(y)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return float(loss), grad


@dataclass
class LogisticModel:
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: float

    kind = "lr"

    def decision_function(self, X):
        Xs = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Xs @ self.weights + self.bias

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def to_dict(self):
        return {"kind": "lr", "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "weights": self.weights.tolist(), "bias": self.bias}


def _standardize(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # constant columns map to 0
    scale = np.where(std > 0, std, np.inf)
    return mean, scale


def _prior_logit(y):
    p = float(np.mean(y)) if len(y) else 0.5
    p = min(max(p, 1e-12), 1 - 1e-12)
    return math.log(p / (1 - p))


def train_logistic(ds: Dataset, lr: float = 0.1, epochs: int = 500, l2: float = 1e-4,
                   seed: int = 0) -> LogisticModel:
    """Full-batch gradient descent on standardized features, starting from zero weights.

    ``seed`` is accepted for interface symmetry; the optimizer is deterministic.
    """
    if len(ds) == 0:
        raise ConfigError("empty training set")
    mean, scale = _standardize(ds.X)
    if len(np.unique(ds.y)) < 2:
        warnings.warn("single-class training set; model predicts the class prior",
                      DGMWarning, stacklevel=2)
        return LogisticModel(mean, scale, np.zeros(ds.feature_dim), _prior_logit(ds.y))
    Xs = (ds.X - mean) / scale
    params = np.zeros(ds.feature_dim + 1)
    params[-1] = _prior_logit(ds.y)
    for _ in range(epochs):
        _, g = logistic_loss_grad(params, Xs, ds.y, l2)
        params -= lr * g
    return LogisticModel(mean, scale, params[:-1].copy(), float(params[-1]))


# --------------------------------------------------------------------------
# gradient boosting
# --------------------------------------------------------------------------

@dataclass
class RegressionTree:
    # flat arrays; feature -1 marks a leaf
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        out = np.empty(len(X))
        for i, x in enumerate(X):
            n = 0
            while self.feature[n] >= 0:
                n = self.left[n] if x[self.feature[n]] <= self.threshold[n] else self.right[n]
            out[i] = self.value[n]
        return out

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}


def _fit_tree(X, grad, hess, depth, reg_lambda, min_child_weight):
    feature, threshold, left, right, value = [], [], [], [], []

    def build(rows, d):
        nid = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-grad[rows].sum() / (hess[rows].sum() + reg_lambda))
        if d >= depth or len(rows) < 2:
            return nid
        f, thr, gain = kernels.best_split(X, grad, hess, rows, reg_lambda, min_child_weight)
        if f < 0 or gain <= 0:
            return nid
        go = X[rows, f] <= thr
        feature[nid] = int(f)
        threshold[nid] = float(thr)
        left[nid] = build(rows[go], d + 1)
        right[nid] = build(rows[~go], d + 1)
        return nid

    build(np.arange(len(X), dtype=np.int64), 0)
    return RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                          np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                          np.array(value))


@dataclass
class BoostedModel:
    base: float
    shrinkage: float
    trees: list[RegressionTree]

    kind = "gb"

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        f = np.full(len(X), self.base)
        for t in self.trees:
            f += self.shrinkage * t.predict(X)
        return f

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def to_dict(self):
        return {"kind": "gb", "base": self.base, "shrinkage": self.shrinkage,
                "trees": [t.to_dict() for t in self.trees]}


def train_gbt(ds: Dataset, n_rounds: int = 100, depth: int = 3, shrinkage: float = 0.1,
              seed: int = 0, reg_lambda: float = 1.0, min_child_weight: float = 1e-3) -> BoostedModel:
    """Gradient boosting with logistic loss and second-order (Newton) leaf values.

    No subsampling is done, so ``seed`` does not change the result.
    """
    if len(ds) == 0:
        raise ConfigError("empty training set")
    base = _prior_logit(ds.y)
    model = BoostedModel(base, shrinkage, [])
    if len(np.unique(ds.y)) < 2:
        warnings.warn("single-class training set; model predicts the class prior",
                      DGMWarning, stacklevel=2)
        return model
    if shrinkage == 0:
        return model
    y = ds.y.astype(np.float64)
    f = np.full(len(y), base)
    for _ in range(n_rounds):
        p = sigmoid(f)
        grad = p - y
        hess = p * (1 - p)
        tree = _fit_tree(ds.X, grad, hess, depth, reg_lambda, min_child_weight)
        model.trees.append(tree)
        f += shrinkage * tree.predict(ds.X)
    return model


def model_from_dict(d: dict):
    if d["kind"] == "lr":
        return LogisticModel(np.array(d["mean"]), np.array(d["scale"]), np.array(d["weights"]),
                             float(d["bias"]))
    trees = [RegressionTree(np.array(t["feature"], dtype=np.int64), np.array(t["threshold"]),
                            np.array(t["left"], dtype=np.int64), np.array(t["right"], dtype=np.int64),
                            np.array(t["value"])) for t in d["trees"]]
    return BoostedModel(float(d["base"]), float(d["shrinkage"]), trees)


def dump_model(model) -> str:
    d = model.to_dict()

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, list):
            return [clean(x) for x in o]
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        return o
    return json.dumps(clean(d), sort_keys=True, indent=1) + "\n"


def load_model(text: str):
    def restore(o):
        if o in ("inf", "-inf", "nan"):
            return float(o)
        if isinstance(o, list):
            return [restore(x) for x in o]
        if isinstance(o, dict):
            return {k: restore(v) for k, v in o.items()}
        return o
    return model_from_dict(restore(json.loads(text)))


def train(ds: Dataset, classifier: str = "gb", seed: int = 0, **kwargs):
    if classifier == "lr":
        return train_logistic(ds, seed=seed, **kwargs)
    if classifier == "gb":
        return train_gbt(ds, seed=seed, **kwargs)
    raise ConfigError(f"unknown classifier {classifier!r}")


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc_roc: float
    auc_pr: float

    def as_dict(self):
        return asdict(self)


def auc_roc(y, scores) -> float:
    """Mann-Whitney rank statistic; tied scores get their average rank."""
    y = np.asarray(y)
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = rankdata(scores, method="average")
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc_pr(y, scores) -> float:
    """Area under the step-interpolated precision-recall curve (average precision)."""
    y = np.asarray(y)
    n_pos = int((y == 1).sum())
    if n_pos == 0 or n_pos == len(y):
        return math.nan
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="mergesort")
    s, t = scores[order], y[order]
    tp = np.cumsum(t == 1)
    fp = np.cumsum(t != 1)
    # evaluate only at the last index of each block of tied scores
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    precision = tp[last] / (tp[last] + fp[last])
    recall = tp[last] / n_pos
    prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev) * precision))


def compute_metrics(y, scores, threshold: float = 0.5) -> Metrics:
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    pred = (scores >= threshold).astype(int)
    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    acc = float((pred == y).mean()) if len(y) else math.nan
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    roc, pr = auc_roc(y, scores), auc_pr(y, scores)
    if math.isnan(roc):
        warnings.warn("single-class evaluation set; AUCs undefined", DGMWarning, stacklevel=2)
    return Metrics(acc, prec, rec, f1, roc, pr)


def aggregate_scores(scores, y, groups):
    """Average row scores per group; returns (group scores, group labels) in group order."""
    uniq, inv = np.unique(groups, return_inverse=True)
    sums = np.bincount(inv, weights=scores, minlength=len(uniq))
    counts = np.bincount(inv, minlength=len(uniq))
    labels = np.zeros(len(uniq), dtype=np.int64)
    labels[inv] = y
    return sums / counts, labels


def evaluate(model, ds: Dataset, aggregate: str = "per_tuple_mean") -> Metrics:
    if len(ds) == 0:
        raise ConfigError("empty evaluation set")
    scores = model.predict_proba(ds.X)
    if aggregate == "per_tuple_mean":
        scores, y = aggregate_scores(scores, ds.y, ds.groups)
    elif aggregate == "per_row":
        y = ds.y
    else:
        raise ConfigError(f"unknown aggregation {aggregate!r}")
    return compute_metrics(y, scores)


def mean_metrics(ms: Sequence[Metrics]) -> Metrics:
    keys = Metrics.__dataclass_fields__.keys()
    return Metrics(**{k: float(np.mean([getattr(m, k) for m in ms])) for k in keys})


# --------------------------------------------------------------------------
# folds
# --------------------------------------------------------------------------

def tuple_folds(pos: Sequence, neg: Sequence, folds: int = 5, seed: int = 0):
    """Stratified fold ids: shuffle positives and negatives separately, deal round-robin.

    Returns ``(pos_fold, neg_fold)`` integer arrays.
    """
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    if len(pos) < folds:
        raise ConfigError(f"{len(pos)} positive tuples cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    pf = np.empty(len(pos), dtype=np.int64)
    pf[rng.permutation(len(pos))] = np.arange(len(pos)) % folds
    nf = np.empty(len(neg), dtype=np.int64)
    # continue dealing where the positives stopped so fold sizes stay balanced
    nf[rng.permutation(len(neg))] = (np.arange(len(neg)) + len(pos)) % folds
    return pf, nf
