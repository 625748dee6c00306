"""Accuracy and fairness metrics, source-only estimators of target risks,
density-ratio weights, and the subset-choice loss decomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import expit
from scipy.stats import rankdata

from ._logistic import fit_logistic
from .data import Dataset

WEIGHT_CLIP = (0.05, 20.0)
KNN_K = 25


class MetricError(ValueError):
    pass


@dataclass
class MetricsReport:
    accuracy: float
    tpr_by_group: dict
    deo: float
    auprc: float
    auroc: float
    identified_target_risk: float | None = None
    group_class_risks: dict | None = field(default=None)

    def flat(self) -> dict:
        out = {
            "accuracy": self.accuracy,
            "tpr_a": self.tpr_by_group.get(1.0, float("nan")),
            "tpr_d": self.tpr_by_group.get(-1.0, float("nan")),
            "deo": self.deo,
            "auprc": self.auprc,
            "auroc": self.auroc,
            "identified_target_risk": self.identified_target_risk,
        }
        for (y, d), v in sorted((self.group_class_risks or {}).items()):
            out[f"risk_y{int(y):+d}_{'a' if d > 0 else 'd'}"] = v
        return out


def _arrays(*xs):
    xs = [np.asarray(x, dtype=float) for x in xs]
    if len({x.shape for x in xs}) != 1 or xs[0].ndim != 1:
        raise MetricError("inputs must be 1-d and of equal length")
    return xs


def accuracy(labels, predictions) -> float:
    labels, predictions = _arrays(labels, predictions)
    return float(np.mean(labels == predictions))


def group_tpr(labels, predictions, groups) -> dict:
    labels, predictions, groups = _arrays(labels, predictions, groups)
    out = {}
    for g in np.unique(groups):
        pos = (groups == g) & (labels > 0)
        if not pos.any():
            raise MetricError(f"group {g!r} has no positive examples")
        out[float(g)] = float(np.mean(predictions[pos] > 0))
    return out


def deo(labels, predictions, groups) -> float:
    """Absolute gap between the two groups' true positive rates."""
    tprs = group_tpr(labels, predictions, groups)
    if len(tprs) != 2:
        raise MetricError(f"DEO needs exactly two groups, got {len(tprs)}")
    a, b = tprs.values()
    return abs(a - b)


def _check_binary(labels, scores):
    labels, scores = _arrays(labels, scores)
    pos = labels > 0
    if pos.all() or not pos.any():
        raise MetricError("both classes must be present")
    if not np.all(np.isfinite(scores)):
        raise MetricError("scores must be finite")
    return pos, scores


def auprc(labels, scores) -> float:
    """Average precision: sum over descending unique thresholds of
    (recall step) * precision."""
    pos, scores = _check_binary(labels, scores)
    order = np.argsort(-scores, kind="mergesort")
    s, p = scores[order], pos[order]
    tp = np.cumsum(p)
    fp = np.cumsum(~p)
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp, fp = tp[last], fp[last]
    recall = tp / pos.sum()
    precision = tp / (tp + fp)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def auroc(labels, scores) -> float:
    """Area under the ROC curve; ties count one half (average ranks)."""
    pos, scores = _check_binary(labels, scores)
    ranks = rankdata(scores)
    n1, n0 = pos.sum(), (~pos).sum()
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def zero_one_loss(model, ds: Dataset) -> np.ndarray:
    if ds.mask[:, ds.index(ds.outcome)].any():
        raise MetricError("outcome labels are missing")
    return (model.predict_dataset(ds) != ds.labels).astype(float)


def evaluate(model, ds: Dataset) -> MetricsReport:
    """Metrics of ``model`` on labelled data ``ds``."""
    scores = model.decision_function(ds)
    pred = np.where(scores > 0, 1.0, -1.0)
    y, d = ds.labels, ds.groups
    return MetricsReport(
        accuracy=accuracy(y, pred),
        tpr_by_group=group_tpr(y, pred, d),
        deo=deo(y, pred, d),
        auprc=auprc(y, scores),
        auroc=auroc(y, scores),
    )


def estimate_target_risk(source: Dataset, target_covariates: Dataset, model, weights=None, k: int = KNN_K) -> float:
    """Target 0-1 risk from labelled source data and unlabelled target rows.

    The source conditional risk E[loss | S=s] is a k-nearest-neighbour
    average (Euclidean on S standardised by source statistics), optionally
    weighted; it is then averaged over the target rows.
    """
    if target_covariates.n == 0:
        raise MetricError("empty target covariates")
    loss = zero_one_loss(model, source)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (source.n,):
            raise MetricError("weights must have one entry per source row")
    cols = list(model.feature_subset)
    xs = source.matrix(cols)
    xt = target_covariates.matrix(cols)
    mu, sd = xs.mean(axis=0), xs.std(axis=0)
    sd[sd == 0] = 1.0
    k = min(k, source.n)
    _, idx = cKDTree((xs - mu) / sd).query((xt - mu) / sd, k=k)
    idx = idx.reshape(len(xt), k)
    if weights is None:
        local = loss[idx].mean(axis=1)
    else:
        w = weights[idx]
        local = (w * loss[idx]).sum(axis=1) / w.sum(axis=1)
    return float(local.mean())


def estimate_group_class_risk(source: Dataset, model, y: int, d) -> float:
    """Mean 0-1 loss over source rows with outcome ``y`` and group ``d``."""
    stratum = (source.labels == y) & (source.groups == d)
    if not stratum.any():
        raise MetricError(f"no source rows with Y={y}, D={d}")
    return float(zero_one_loss(model, source)[stratum].mean())


def density_ratio_weights(source_s: Dataset, target_s: Dataset, features, l2: float = 1e-3) -> np.ndarray:
    """p(target | s) / p(source | s) * n_source / n_target for source rows,
    from a logistic domain discriminator, clipped to ``WEIGHT_CLIP``."""
    xs, xt = source_s.matrix(features), target_s.matrix(features)
    if len(xs) == 0 or len(xt) == 0:
        raise MetricError("both domains need rows")
    x = np.vstack([xs, xt])
    mu, sd = x.mean(axis=0), x.std(axis=0)
    sd[sd == 0] = 1.0
    t = np.r_[np.zeros(len(xs)), np.ones(len(xt))]
    beta, c, _ = fit_logistic((x - mu) / sd, t, l2=l2)
    p = expit(((xs - mu) / sd) @ beta + c)
    ratio = p / (1 - p) * (len(xs) / len(xt))
    return np.clip(ratio, *WEIGHT_CLIP)


def risk(model, ds: Dataset) -> float:
    return float(zero_one_loss(model, ds).mean())


def decomposition_diagnostic(full_model_target, subset_model_source, subset_model_target, target_labeled: Dataset):
    """Split the excess risk of the deployed subset model over the ideal
    full-feature target model into (domain gap, feature-omission gap).

    term1 = R(subset, source-trained) - R(subset, target-trained)
    term2 = R(subset, target-trained) - R(full, target-trained)
    """
    r_full_t = risk(full_model_target, target_labeled)
    r_sub_s = risk(subset_model_source, target_labeled)
    r_sub_t = risk(subset_model_target, target_labeled)
    return r_sub_s - r_sub_t, r_sub_t - r_full_t
