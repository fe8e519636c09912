"""Linear soft-margin SVM for normal-vs-deep classification.

The trainer minimizes 0.5*||w||^2 + C * sum hinge(y_k (w.x_k + b)) on
internally standardized features. Optimization runs on the dual with
deterministic maximal-violating-pair updates; the bias is recovered as the
exact minimizer of the hinge sum given w, and training stops once the
primal-dual gap is below tolerance, so the result carries an optimality
certificate. No randomness is involved: identical input gives identical
models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data_io import read_json, write_json
from .errors import ParameterError, TrainingError
from .features import FEATURE_NAMES

POSITIVE_LABEL = "deep"
NEGATIVE_LABEL = "normal"


@dataclass
class TrainedModel:
    """Weights, bias and the train-set standardization statistics."""

    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    C: float
    seed: int | None = None
    feature_names: tuple = FEATURE_NAMES
    extras: dict = field(default_factory=dict)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.feature_mean) / self.feature_std

    def decision_value(self, x: np.ndarray) -> float:
        return float(self.weights @ self.standardize(x) + self.bias)

    def to_dict(self) -> dict:
        d = {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "feature_mean": [float(v) for v in self.feature_mean],
            "feature_std": [float(v) for v in self.feature_std],
            "C": float(self.C),
            "seed": self.seed,
            "feature_names": list(self.feature_names),
        }
        d.update(self.extras)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        try:
            model = cls(
                weights=np.asarray(d["weights"], dtype=float),
                bias=float(d["bias"]),
                feature_mean=np.asarray(d["feature_mean"], dtype=float),
                feature_std=np.asarray(d["feature_std"], dtype=float),
                C=float(d["C"]),
                seed=d.get("seed"),
                feature_names=tuple(d.get("feature_names", FEATURE_NAMES)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParameterError(f"model dictionary missing or malformed field: {e}") from e
        if not (model.feature_std > 0).all():
            raise ParameterError("model feature_std entries must be positive")
        return model


def save_model(model: TrainedModel, path) -> None:
    write_json(path, model.to_dict())


def load_model(path) -> TrainedModel:
    return TrainedModel.from_dict(read_json(path))


def _to_signs(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.dtype.kind in "UO":
        unknown = set(labels.tolist()) - {POSITIVE_LABEL, NEGATIVE_LABEL}
        if unknown:
            raise ParameterError(f"unknown labels {sorted(unknown)}")
        return np.where(labels == POSITIVE_LABEL, 1.0, -1.0)
    signs = labels.astype(float)
    if not np.isin(signs, (-1.0, 1.0)).all():
        raise ParameterError("numeric labels must be +1/-1")
    return signs


def _optimal_bias(margins: np.ndarray, y: np.ndarray, c: float) -> tuple[float, float]:
    """Exact minimizer of the hinge sum over the bias, given fixed weights.

    The sum is convex piecewise linear, so a minimum sits on a breakpoint;
    flat stretches resolve to the midpoint of the tied breakpoints.
    """
    breakpoints = y - margins
    losses = np.array(
        [c * np.sum(np.maximum(0.0, 1.0 - y * (margins + b))) for b in breakpoints]
    )
    best = losses.min()
    tied = breakpoints[losses <= best * (1 + 1e-12) + 1e-15]
    b = float((tied.min() + tied.max()) / 2.0)
    return b, float(c * np.sum(np.maximum(0.0, 1.0 - y * (margins + b))))


def train_svm(
    X,
    labels,
    C: float = 1.0,
    tol: float = 1e-4,
    max_iter: int = 200_000,
    seed: int | None = None,
) -> TrainedModel:
    """Fit the linear SVM; raises :class:`TrainingError` on one-class input.

    ``seed`` is stored on the model for provenance only; the solver is
    deterministic regardless.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ParameterError(f"X must be 2-D (n_samples, n_features), got shape {X.shape}")
    y = _to_signs(labels)
    if y.shape[0] != X.shape[0]:
        raise ParameterError("X and labels length mismatch")
    if not ((y > 0).any() and (y < 0).any()):
        raise TrainingError("training needs both classes present")
    if C <= 0:
        raise ParameterError(f"C must be positive, got {C}")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Z = (X - mean) / std

    n = Z.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(Z.shape[1])
    G = -np.ones(n)  # gradient of 0.5 a'Qa - sum(a): G_k = y_k (w.z_k) - 1

    def duality_gap() -> tuple[float, float, float]:
        margins = Z @ w
        b, hinge = _optimal_bias(margins, y, C)
        primal = 0.5 * float(w @ w) + hinge
        dual = float(alpha.sum()) - 0.5 * float(w @ w)
        return primal - dual, primal, b

    gap, primal, bias = duality_gap()
    it = 0
    while gap > tol * max(1.0, abs(primal)):
        if it >= max_iter:
            raise TrainingError(
                f"SVM did not converge: duality gap {gap:.3e} after {max_iter} iterations"
            )
        score = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] <= 1e-14:
            break  # KKT satisfied to machine precision

        dz = Z[i] - Z[j]
        curvature = max(float(dz @ dz), 1e-12)
        lam = -(y[i] * G[i] - y[j] * G[j]) / curvature
        lo, hi = _step_bounds(alpha[i], y[i], alpha[j], y[j], C)
        lam = min(max(lam, lo), hi)
        if lam == 0.0:
            break

        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        w += lam * dz
        G += lam * y * (Z @ dz)
        it += 1
        if it % 10 == 0 or it < 10:
            gap, primal, bias = duality_gap()

    gap, primal, bias = duality_gap()
    if gap > tol * max(1.0, abs(primal)) * 10:
        raise TrainingError(f"SVM stopped with duality gap {gap:.3e} above tolerance")

    return TrainedModel(
        weights=w,
        bias=bias,
        feature_mean=mean,
        feature_std=std,
        C=C,
        seed=seed,
        extras={"duality_gap": float(gap), "iterations": it},
    )


def _step_bounds(a_i: float, y_i: float, a_j: float, y_j: float, c: float) -> tuple[float, float]:
    if y_i > 0:
        lo, hi = -a_i, c - a_i
    else:
        lo, hi = a_i - c, a_i
    if y_j > 0:
        lo, hi = max(lo, a_j - c), min(hi, a_j)
    else:
        lo, hi = max(lo, -a_j), min(hi, c - a_j)
    return lo, hi


def predict(model: TrainedModel, x) -> tuple[str, float]:
    """Classify one feature vector; a zero margin resolves to 'normal'."""
    margin = model.decision_value(np.asarray(x, dtype=float))
    label = POSITIVE_LABEL if margin > 0 else NEGATIVE_LABEL
    return label, margin


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    flags: tuple = ()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "flags": list(self.flags),
        }


def evaluate(predictions, labels) -> Metrics:
    """Accuracy/precision/recall/F1 with 'deep' as the positive class.

    Zero-denominator metrics come back as 0.0 with a flag naming them.
    """
    pred = _to_signs(predictions)
    true = _to_signs(labels)
    if pred.shape != true.shape:
        raise ParameterError(f"predictions ({pred.shape}) and labels ({true.shape}) length mismatch")
    if pred.size == 0:
        raise ParameterError("cannot evaluate empty prediction lists")

    tp = float(np.sum((pred > 0) & (true > 0)))
    fp = float(np.sum((pred > 0) & (true < 0)))
    fn = float(np.sum((pred < 0) & (true > 0)))
    tn = float(np.sum((pred < 0) & (true < 0)))

    flags = []
    accuracy = (tp + tn) / pred.size
    precision = recall = f1 = 0.0
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        flags.append("precision_zero_denominator")
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        flags.append("recall_zero_denominator")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        flags.append("f1_zero_denominator")
    return Metrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1, flags=tuple(flags))


class LinearHingeSVC(ClassifierMixin, BaseEstimator):
    """Sklearn-style classifier front end over :func:`train_svm`."""

    def __init__(self, C=1.0, tol=1e-4, max_iter=200_000, seed=None):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y):
        self.model_ = train_svm(X, y, C=self.C, tol=self.tol, max_iter=self.max_iter, seed=self.seed)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self._string_labels = y.dtype.kind in "UO"
        self.coef_ = self.model_.weights[np.newaxis, :]
        self.intercept_ = np.array([self.model_.bias])
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        return (X - self.model_.feature_mean) / self.model_.feature_std @ self.model_.weights + self.model_.bias

    def predict(self, X):
        margins = self.decision_function(X)
        if self._string_labels:
            return np.where(margins > 0, POSITIVE_LABEL, NEGATIVE_LABEL)
        return np.where(margins > 0, 1, -1)
