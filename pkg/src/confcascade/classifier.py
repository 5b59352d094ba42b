"""L2-regularized multinomial logistic regression over embedding rows.

The point of this classifier is not raw accuracy but *trustworthy*
probabilities: the router reads the max class probability as confidence, so
the optimizer is deterministic (full-batch gradient descent with Armijo
backtracking) and preprocessing is frozen into the model (per-dimension
standardization with the train-set scaler stored alongside the weights).
Training minimizes

    mean cross-entropy + (lambda/2) * ||W||^2

and stops when the gradient infinity-norm drops below `tol` or `max_iter`
accepted steps have run. Expected calibration error with equal-width
confidence bins is provided as the calibration diagnostic; no post-hoc
recalibration is applied.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MODEL_MAGIC = b"CGLR"
MODEL_VERSION = 1

_ARMIJO_C = 1e-4
_BACKTRACK = 0.5
_STD_FLOOR = 1e-8
_MIN_STEP = 1e-20


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingMeta:
    iterations: int
    final_objective: float
    lam: float
    converged: bool


@dataclass(frozen=True)
class ProbabilityVector:
    probs: tuple[float, ...]
    argmax: int
    confidence: float


@dataclass(frozen=True)
class CalibratedModel:
    weights: np.ndarray       # (C, d)
    bias: np.ndarray          # (C,)
    scaler_mean: np.ndarray   # (d,)
    scaler_std: np.ndarray    # (d,)
    training_meta: TrainingMeta

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _objective(W: np.ndarray, b: np.ndarray, Xs: np.ndarray, Y: np.ndarray, lam: float) -> float:
    """Regularized mean cross-entropy at (W, b) on standardized features Xs."""
    z = Xs @ W.T + b
    z = z - z.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    nll = -float((Y * log_probs).sum()) / Xs.shape[0]
    return nll + 0.5 * lam * float((W * W).sum())


def _objective_grad(W: np.ndarray, b: np.ndarray, Xs: np.ndarray, Y: np.ndarray,
                    lam: float) -> tuple[float, np.ndarray, np.ndarray]:
    n = Xs.shape[0]
    z = Xs @ W.T + b
    zs = z - z.max(axis=1, keepdims=True)
    expz = np.exp(zs)
    P = expz / expz.sum(axis=1, keepdims=True)
    log_probs = zs - np.log(expz.sum(axis=1, keepdims=True))
    obj = -float((Y * log_probs).sum()) / n + 0.5 * lam * float((W * W).sum())
    diff = P - Y
    grad_W = diff.T @ Xs / n + lam * W
    grad_b = diff.sum(axis=0) / n
    return obj, grad_W, grad_b


def train(X: np.ndarray, y: list[int] | np.ndarray, lam: float = 1e-2, tol: float = 1e-6,
          max_iter: int = 5000, n_classes: int | None = None) -> CalibratedModel:
    """Fit the model by deterministic full-batch descent from zero weights."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ClassifierError(f"X shape {X.shape} does not align with {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise ClassifierError("training features contain non-finite values")
    if lam < 0:
        raise ClassifierError("regularization strength must be >= 0")
    present = np.unique(y)
    if present.size < 2:
        raise ClassifierError("training set contains a single class")
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= C:
        raise ClassifierError(f"labels out of range for {C} classes")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.maximum(std, _STD_FLOOR)
    Xs = (X - mean) / std
    Y = np.zeros((X.shape[0], C))
    Y[np.arange(X.shape[0]), y] = 1.0

    W = np.zeros((C, X.shape[1]))
    b = np.zeros(C)
    obj, gW, gb = _objective_grad(W, b, Xs, Y, lam)
    step = 1.0
    iterations = 0
    converged = False
    for _ in range(max_iter):
        grad_inf = max(np.abs(gW).max(), np.abs(gb).max())
        if grad_inf < tol:
            converged = True
            break
        gsq = float((gW * gW).sum() + (gb * gb).sum())
        t = step * 2.0
        while t >= _MIN_STEP:
            W_new = W - t * gW
            b_new = b - t * gb
            if _objective(W_new, b_new, Xs, Y, lam) <= obj - _ARMIJO_C * t * gsq:
                break
            t *= _BACKTRACK
        if t < _MIN_STEP:
            break  # no admissible step; gradient is numerically exhausted
        W, b, step = W_new, b_new, t
        iterations += 1
        obj, gW, gb = _objective_grad(W, b, Xs, Y, lam)
    else:
        converged = bool(max(np.abs(gW).max(), np.abs(gb).max()) < tol)

    return CalibratedModel(
        weights=W, bias=b, scaler_mean=mean, scaler_std=std,
        training_meta=TrainingMeta(
            iterations=iterations, final_objective=obj, lam=lam, converged=converged
        ),
    )


def predict_proba_matrix(model: CalibratedModel, X: np.ndarray) -> np.ndarray:
    """Per-row class probabilities as an (n, C) array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ClassifierError(
            f"feature dimension {X.shape[1] if X.ndim == 2 else X.shape} "
            f"does not match model dim {model.dim}"
        )
    Xs = (X - model.scaler_mean) / model.scaler_std
    return _softmax(Xs @ model.weights.T + model.bias)


def predict_proba(model: CalibratedModel, X: np.ndarray) -> list[ProbabilityVector]:
    P = predict_proba_matrix(model, X)
    out = []
    for row in P:
        arg = int(np.argmax(row))  # ties break to the lowest class index
        out.append(ProbabilityVector(probs=tuple(float(p) for p in row),
                                     argmax=arg, confidence=float(row[arg])))
    return out


def expected_calibration_error(probs: list[ProbabilityVector], y: list[int] | np.ndarray,
                               bins: int = 10) -> float:
    """Bin-weighted |accuracy - confidence| gap over equal-width confidence bins."""
    if bins < 1:
        raise ClassifierError("bins must be >= 1")
    y = list(y)
    if len(probs) != len(y):
        raise ClassifierError(f"length mismatch: {len(probs)} predictions vs {len(y)} labels")
    n = len(probs)
    conf_sum = [0.0] * bins
    hit_sum = [0] * bins
    count = [0] * bins
    for pv, label in zip(probs, y):
        idx = min(bins - 1, int(pv.confidence * bins))
        conf_sum[idx] += pv.confidence
        hit_sum[idx] += 1 if pv.argmax == label else 0
        count[idx] += 1
    ece = 0.0
    for idx in range(bins):
        if count[idx]:
            ece += (count[idx] / n) * abs(hit_sum[idx] / count[idx] - conf_sum[idx] / count[idx])
    return ece


def save_model(model: CalibratedModel, path: str | Path) -> None:
    C, d = model.weights.shape
    meta = model.training_meta
    body = bytearray()
    body += struct.pack("<III", MODEL_VERSION, C, d)
    for arr in (model.scaler_mean, model.scaler_std, model.weights, model.bias):
        body += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    body += struct.pack("<IBdd", meta.iterations, 1 if meta.converged else 0,
                        meta.final_objective, meta.lam)
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    Path(path).write_bytes(MODEL_MAGIC + bytes(body) + struct.pack("<I", crc))


def load_model(path: str | Path) -> CalibratedModel:
    blob = Path(path).read_bytes()
    if len(blob) < 4 + 12 + 4 or blob[:4] != MODEL_MAGIC:
        raise ClassifierError(f"{path}: bad magic, not a CGLR model file")
    body, crc_stored = blob[4:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise ClassifierError(f"{path}: CRC mismatch, file is corrupt")
    version, C, d = struct.unpack("<III", body[:12])
    if version != MODEL_VERSION:
        raise ClassifierError(f"{path}: unsupported model version {version}")
    off = 12

    def take_f64(count: int) -> np.ndarray:
        nonlocal off
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=off).copy()
        off += count * 8
        return arr

    mean = take_f64(d)
    std = take_f64(d)
    W = take_f64(C * d).reshape(C, d)
    b = take_f64(C)
    iterations, conv, final_obj, lam = struct.unpack_from("<IBdd", body, off)
    return CalibratedModel(
        weights=W, bias=b, scaler_mean=mean, scaler_std=std,
        training_meta=TrainingMeta(
            iterations=iterations, final_objective=final_obj, lam=lam, converged=bool(conv)
        ),
    )
