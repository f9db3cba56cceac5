"""Nystrom approximation of a Gaussian kernel from a landmark set.

The kernel is evaluated through its inner-product form
``k(x, y) = f(x) f(y) g(x.y)`` with ``f(x) = exp(-gamma |x|^2)`` and
``g(s) = exp(2 gamma s)``, so the expensive part of a kernel row is one
landmark-matrix product. When the landmarks are rows of a factorized
operator that product runs through the sparse chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLandmarks, DimensionMismatch
from .sparse import FastOperator, OpCounter, fast_apply, materialize

__all__ = [
    "KernelSpec",
    "NystromModel",
    "default_gamma",
    "gaussian_kernel",
    "fit_nystrom",
    "kernel_row",
    "approx_kernel_row",
    "reconstruction_error",
    "feature_map",
    "transform",
    "LinearHead",
    "linear_head_fit",
    "linear_head_predict",
]

_EIG_CLIP = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel ``exp(-gamma |x - y|^2)``."""

    gamma: float
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


def default_gamma(X) -> float:
    """1 over (dimension times variance), a standard bandwidth default."""
    X = np.asarray(X, dtype=np.float64)
    var = float(X.var())
    if var == 0.0:
        raise ValueError("data has zero variance, pick gamma explicitly")
    return 1.0 / (X.shape[1] * var)


def gaussian_kernel(X, Y, spec: KernelSpec) -> np.ndarray:
    """Dense kernel block between two point sets.

    Evaluated from inner products with a single exponential at the end,
    which matches the per-row path in :func:`kernel_row` exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch("point sets disagree on dimension")
    sx = np.sum(X * X, axis=1)
    sy = np.sum(Y * Y, axis=1)
    return np.exp(spec.gamma * (2.0 * (X @ Y.T) - sx[:, None] - sy[None, :]))


@dataclass
class NystromModel:
    landmarks: object
    landmarks_dense: np.ndarray
    landmark_sq_norms: np.ndarray
    kernel: KernelSpec
    eigvecs: np.ndarray
    inv_eigvals: np.ndarray
    reference: np.ndarray


def fit_nystrom(X, landmarks, kernel: KernelSpec | None = None) -> NystromModel:
    """Build the approximation ``K ~ C W^+ C^T`` for the rows of X.

    ``landmarks`` is a dense matrix or a factorized operator whose rows
    are the landmark points. The landmark block W is pseudo-inverted
    through a symmetric eigendecomposition with small eigenvalues
    clipped to zero.
    """
    X = np.asarray(X, dtype=np.float64)
    dense = (
        materialize(landmarks) if isinstance(landmarks, FastOperator) else np.asarray(landmarks, dtype=np.float64)
    )
    if dense.shape[1] != X.shape[1]:
        raise DimensionMismatch("landmarks and data disagree on dimension")
    spec = kernel if kernel is not None else KernelSpec(default_gamma(X))
    W = gaussian_kernel(dense, dense, spec)
    eigvals, eigvecs = np.linalg.eigh(W)
    top = float(eigvals.max(initial=0.0))
    if top <= 0.0:
        raise DegenerateLandmarks("landmark kernel block has no positive eigenvalue")
    keep = eigvals > _EIG_CLIP * top
    inv = np.where(keep, 1.0 / np.where(keep, eigvals, 1.0), 0.0)
    reference = gaussian_kernel(X, dense, spec)
    return NystromModel(
        landmarks=landmarks,
        landmarks_dense=dense,
        landmark_sq_norms=np.sum(dense * dense, axis=1),
        kernel=spec,
        eigvecs=eigvecs,
        inv_eigvals=inv,
        reference=reference,
    )


def kernel_row(model: NystromModel, x, counter: OpCounter | None = None) -> np.ndarray:
    """Kernel values between one point and every landmark.

    The landmark product is the counted part: the factor chain cost for
    a factorized landmark operator, K*D for dense landmarks.
    """
    x = np.asarray(x, dtype=np.float64)
    if isinstance(model.landmarks, FastOperator):
        z = fast_apply(model.landmarks, x, counter)
    else:
        if counter is not None:
            counter.add(model.landmarks_dense.size)
        z = model.landmarks_dense @ x
    g = model.kernel.gamma
    return np.exp(g * (2.0 * z - float(x @ x) - model.landmark_sq_norms))


def _winv_apply(model: NystromModel, r: np.ndarray, counter: OpCounter | None) -> np.ndarray:
    k = len(r)
    if counter is not None:
        counter.add(2 * k * k)
    return model.eigvecs @ (model.inv_eigvals * (model.eigvecs.T @ r))


def approx_kernel_row(model: NystromModel, x, counter: OpCounter | None = None) -> np.ndarray:
    """Approximate kernel values between one point and the reference set."""
    r = kernel_row(model, x, counter)
    w = _winv_apply(model, r, counter)
    if counter is not None:
        counter.add(model.reference.shape[0] * model.reference.shape[1])
    return model.reference @ w


def reconstruction_error(model: NystromModel, X) -> float:
    """Relative Frobenius error of the approximation on the full block."""
    X = np.asarray(X, dtype=np.float64)
    full = gaussian_kernel(X, X, model.kernel)
    winv = model.eigvecs @ (model.inv_eigvals[:, None] * model.eigvecs.T)
    approx = model.reference @ winv @ model.reference.T
    return float(np.linalg.norm(full - approx) / np.linalg.norm(full))


def feature_map(model: NystromModel) -> np.ndarray:
    """Features F for the reference set with F F^T equal to the approximation."""
    return model.reference @ (model.eigvecs * np.sqrt(model.inv_eigvals))


def transform(model: NystromModel, X, counter: OpCounter | None = None) -> np.ndarray:
    """Features for new points in the same map as :func:`feature_map`."""
    X = np.asarray(X, dtype=np.float64)
    rows = np.stack([kernel_row(model, x, counter) for x in X])
    return rows @ (model.eigvecs * np.sqrt(model.inv_eigvals))


@dataclass
class LinearHead:
    weights: np.ndarray
    classes: np.ndarray


def linear_head_fit(features, labels, reg: float = 1e-3) -> LinearHead:
    """One-vs-rest ridge regression on a bias-augmented feature matrix."""
    F = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    onehot = (labels[:, None] == classes[None, :]).astype(np.float64)
    F1 = np.hstack([F, np.ones((len(F), 1))])
    gram = F1.T @ F1 + reg * np.eye(F1.shape[1])
    weights = np.linalg.solve(gram, F1.T @ onehot)
    return LinearHead(weights=weights, classes=classes)


def linear_head_predict(head: LinearHead, features) -> np.ndarray:
    F = np.asarray(features, dtype=np.float64)
    F1 = np.hstack([F, np.ones((len(F), 1))])
    scores = F1 @ head.weights
    return head.classes[np.argmax(scores, axis=1)]
