"""Linear classifiers trained by regularised hinge-loss minimisation, with an
optional equal-opportunity constraint at zero tolerance.

The constraint asks the mean score of positive examples to be equal in the
two protected groups.  For a linear score this is ``<w, u> = 0`` where ``u``
is the difference of the groups' positive-class feature means, and it is
enforced exactly by reparametrising the inputs: the coordinate with the
largest ``|u|`` is eliminated and the rest are shifted along ``u``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    regularization: float = 0.01
    iterations: int = 2000
    step0: float = 1.0
    step_decay: float = 100.0
    constraint: str = "none"
    standardize: bool = True

    def __post_init__(self):
        if self.regularization <= 0 or self.iterations < 1 or self.step0 <= 0 or self.step_decay <= 0:
            raise ValueError("regularization, iterations, step0 and step_decay must be positive")
        if self.constraint not in ("none", "eo_zero"):
            raise ValueError(f"unknown constraint {self.constraint!r}")

    def step(self, t: int) -> float:
        return self.step0 / (1.0 + t / self.step_decay)


@dataclass(frozen=True)
class FairProjection:
    u: np.ndarray
    pivot_index: int

    @classmethod
    def from_direction(cls, u) -> "FairProjection":
        u = np.asarray(u, dtype=float)
        if u.size == 0:
            raise TrainingError("empty group direction")
        return cls(u, int(np.argmax(np.abs(u))))

    @property
    def degenerate(self) -> bool:
        return not np.abs(self.u[self.pivot_index]) > 1e-12

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Project rows of ``x`` (1-d or 2-d) onto the constraint surface."""
        if self.degenerate:
            raise TrainingError("degenerate fairness direction (u[pivot] == 0)")
        x = np.asarray(x, dtype=float)
        p, u = self.pivot_index, self.u
        out = x - x[..., p:p + 1] * (u / u[p])
        return np.delete(out, p, axis=-1)

    def lift(self, v: np.ndarray) -> np.ndarray:
        """Original-space weights equivalent to weights ``v`` on projected inputs."""
        p, u = self.pivot_index, self.u
        w = np.insert(np.asarray(v, dtype=float), p, 0.0)
        w[p] = -np.dot(np.delete(w, p), np.delete(u, p)) / u[p]
        return w


def apply_fair_projection(x, p: FairProjection) -> np.ndarray:
    return p.apply(x)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Score ``w . z + b`` where ``z`` are the standardised bound features.

    When ``fairness`` is set, ``projected_weights`` act on the projected
    inputs and ``weights`` holds the equivalent original-space vector.
    """

    feature_subset: tuple[str, ...]
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    fairness: FairProjection | None = None
    projected_weights: np.ndarray | None = None
    constraint_degenerate: bool = False
    objective_history: np.ndarray = field(default=None, repr=False)

    def standardized(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def score_matrix(self, x: np.ndarray) -> np.ndarray:
        z = self.standardized(x)
        if self.fairness is not None:
            return self.fairness.apply(z) @ self.projected_weights + self.bias
        return z @ self.weights + self.bias

    def decision_function(self, ds: Dataset) -> np.ndarray:
        try:
            idx = [ds.index(c) for c in self.feature_subset]
        except ValueError as exc:
            raise TrainingError(str(exc)) from None
        return self.score_matrix(ds.values[:, idx])

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        return np.where(self.decision_function(ds) > 0, 1.0, -1.0)

    @property
    def objective(self) -> float:
        return float(self.objective_history[-1])


def _row_vector(m: LinearModel, x) -> np.ndarray:
    if isinstance(x, dict):
        missing = [f for f in m.feature_subset if f not in x]
        if missing:
            raise TrainingError(f"missing bound features {missing}")
        x = [x[f] for f in m.feature_subset]
    x = np.asarray(x, dtype=float)
    if x.shape != (len(m.feature_subset),):
        raise TrainingError(f"expected {len(m.feature_subset)} features, got shape {x.shape}")
    return x


def decision_score(m: LinearModel, x) -> float:
    """Score of one row given as a sequence or a name -> value mapping."""
    return float(m.score_matrix(_row_vector(m, x)[None, :])[0])


def predict(m: LinearModel, x) -> int:
    return 1 if decision_score(m, x) > 0 else -1


def _direction(z: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    pos_a = (y > 0) & (d > 0)
    pos_d = (y > 0) & (d < 0)
    if not pos_a.any() or not pos_d.any():
        raise TrainingError("each protected group needs at least one positive example")
    return z[pos_a].mean(axis=0) - z[pos_d].mean(axis=0)


def compute_group_direction(ds: Dataset, features) -> np.ndarray:
    """Positive-class mean of group a (D=+1) minus that of group d (D=-1)."""
    return _direction(ds.matrix(features), ds.labels, ds.groups)


def hinge_objective(w, b, x, y, reg) -> float:
    margins = y * (x @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + reg * np.dot(w, w))


def _subgradient_descent(x: np.ndarray, y: np.ndarray, cfg: TrainConfig):
    """Full-batch subgradient descent; returns the best iterate seen."""
    n, k = x.shape
    w, b = np.zeros(k), 0.0
    best = (w.copy(), b, hinge_objective(w, b, x, y, cfg.regularization))
    history = np.empty(cfg.iterations + 1)
    history[0] = best[2]
    for t in range(cfg.iterations):
        active = y * (x @ w + b) < 1.0
        gw = -(y[active] @ x[active]) / n + 2.0 * cfg.regularization * w
        gb = -y[active].sum() / n
        eta = cfg.step(t)
        w = w - eta * gw
        b = b - eta * gb
        obj = hinge_objective(w, b, x, y, cfg.regularization)
        if obj < best[2]:
            best = (w.copy(), b, obj)
        history[t + 1] = best[2]
    return best[0], best[1], history


def train(ds: Dataset, features, cfg: TrainConfig = TrainConfig()) -> LinearModel:
    features = tuple(ds.expand(features))
    if not features:
        raise TrainingError("no features to train on")
    if ds.mask[:, [ds.index(c) for c in (*features, ds.outcome)]].any():
        raise TrainingError("dataset has masked cells; impute first")
    x = ds.matrix(features)
    y = ds.labels
    if not np.all(np.isfinite(x)):
        raise TrainingError("non-finite feature values")
    if np.unique(y).size < 2:
        raise TrainingError("training data has a single class")

    if cfg.standardize:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        mean, scale = np.zeros(len(features)), np.ones(len(features))
    z = (x - mean) / scale

    fairness, degenerate = None, False
    if cfg.constraint == "eo_zero":
        proj = FairProjection.from_direction(_direction(z, y, ds.groups))
        if proj.degenerate:
            warnings.warn("fairness direction is zero; training unconstrained", RuntimeWarning)
            degenerate = True
        else:
            fairness = proj

    if fairness is None:
        w, b, history = _subgradient_descent(z, y, cfg)
        return LinearModel(features, w, float(b), mean, scale, None, None, degenerate, history)
    v, b, history = _subgradient_descent(fairness.apply(z), y, cfg)
    return LinearModel(features, fairness.lift(v), float(b), mean, scale, fairness, v, False, history)


def model_to_dict(m: LinearModel) -> dict:
    out = {
        "features": list(m.feature_subset),
        "mean": m.mean.tolist(),
        "scale": m.scale.tolist(),
        "weights": m.weights.tolist(),
        "bias": m.bias,
        "constraint_degenerate": m.constraint_degenerate,
        "projection": None,
    }
    if m.fairness is not None:
        out["projection"] = {
            "u": m.fairness.u.tolist(),
            "pivot_index": m.fairness.pivot_index,
            "projected_weights": m.projected_weights.tolist(),
        }
    return out


def model_from_dict(d: dict) -> LinearModel:
    fairness = pw = None
    if d.get("projection"):
        p = d["projection"]
        fairness = FairProjection(np.array(p["u"], dtype=float), int(p["pivot_index"]))
        pw = np.array(p["projected_weights"], dtype=float)
    return LinearModel(
        tuple(d["features"]),
        np.array(d["weights"], dtype=float),
        float(d["bias"]),
        np.array(d["mean"], dtype=float),
        np.array(d["scale"], dtype=float),
        fairness,
        pw,
        bool(d.get("constraint_degenerate", False)),
    )


def save_model(m: LinearModel, path) -> None:
    # json writes floats with repr, which round-trips exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh, indent=2)


def load_model(path) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
