"""Classifiers for judging recovered images: KNN, SRC and a PCA baseline."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class ConvergenceWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# k-nearest neighbours

def _knn_vote(order, dist, labels, k):
    near = order[:k]
    near_labels = labels[near]
    classes, counts = np.unique(near_labels, return_counts=True)
    tied = classes[counts == counts.max()]
    if tied.size == 1:
        return int(tied[0])
    # vote tie: class of the nearest member among the tied classes
    for idx in near:
        if labels[idx] in tied:
            return int(labels[idx])
    raise AssertionError("unreachable")


def knn_classify(train, labels, query, k: int = 1) -> int:
    """Majority label among the ``k`` Euclidean nearest training columns.

    Distance ties go to the lower column index; vote ties go to the class
    of the nearest neighbour among the tied classes.
    """
    return int(knn_predict(train, labels, np.asarray(query, dtype=np.float64)[:, None], k)[0])


def knn_predict(train, labels, queries, k: int = 1) -> np.ndarray:
    """Vectorized :func:`knn_classify` over the columns of ``queries``."""
    train = np.asarray(train, dtype=np.float64)
    labels = np.asarray(labels)
    queries = np.asarray(queries, dtype=np.float64)
    n = train.shape[1]
    if n == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    out = np.empty(queries.shape[1], dtype=np.int64)
    for j in range(queries.shape[1]):
        diff = train - queries[:, j:j + 1]
        dist = np.einsum("ij,ij->j", diff, diff)
        order = np.argsort(dist, kind="stable")
        out[j] = _knn_vote(order, dist, labels, k)
    return out


# --------------------------------------------------------------------------
# sparse representation classification

@dataclass(frozen=True)
class SrcSolution:
    coefficients: np.ndarray
    residuals_per_class: np.ndarray
    predicted: int


def normalize_columns(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    norms = np.linalg.norm(d, axis=0)
    norms[norms == 0] = 1.0
    return d / norms


def default_gamma(dictionary, y) -> float:
    """``1e-3 * max |D^T y|`` over the column-normalized dictionary."""
    return 1e-3 * float(np.max(np.abs(normalize_columns(dictionary).T @ np.asarray(y))))


def lasso_objective(d, y, alpha, gamma) -> float:
    r = y - d @ alpha
    return 0.5 * float(r @ r) + gamma * float(np.sum(np.abs(alpha)))


def lasso_optimality(d, y, alpha, gamma) -> float:
    """Largest violation of the lasso subgradient conditions."""
    return _violation(d.T @ (y - d @ alpha), alpha, gamma)


def _violation(g, alpha, gamma) -> float:
    # g is the negative smooth gradient D^T (y - D a)
    viol = np.where(alpha != 0, np.abs(g - gamma * np.sign(alpha)), np.maximum(np.abs(g) - gamma, 0.0))
    return float(viol.max()) if viol.size else 0.0


def src_fit(
    dictionary, y, gamma: float | None = None, max_iter: int = 5000, tol: float = 1e-7, history: list | None = None
) -> np.ndarray:
    """Sparse code of ``y`` over the unit-normalized dictionary columns.

    Minimizes ``0.5 ||y - D a||^2 + gamma ||a||_1`` with monotone FISTA and
    step ``1/L``, ``L = ||D||_2^2``. Stops when the subgradient optimality
    residual drops below ``tol``; warns with :class:`ConvergenceWarning`
    if ``max_iter`` is reached first. If ``history`` is a list, the
    objective after every iteration is appended to it.
    """
    d = normalize_columns(dictionary)
    y = np.asarray(y, dtype=np.float64)
    alpha = np.zeros(d.shape[1])
    if not np.any(y):
        return alpha
    if gamma is None:
        gamma = 1e-3 * float(np.max(np.abs(d.T @ y)))
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    gram = d.T @ d
    dty = d.T @ y
    L = float(np.linalg.norm(d, 2) ** 2)
    step = 1.0 / L

    def f(a):
        return 0.5 * float(y @ y) - float(dty @ a) + 0.5 * float(a @ gram @ a) + gamma * float(np.abs(a).sum())

    v = alpha.copy()
    t = 1.0
    obj = f(alpha)
    for _ in range(int(max_iter)):
        grad = gram @ v - dty
        u = v - step * grad
        z = np.sign(u) * np.maximum(np.abs(u) - gamma * step, 0.0)
        fz = f(z)
        prev = alpha
        if fz <= obj:
            alpha, obj = z, fz
        if history is not None:
            history.append(obj)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        v = alpha + (t / t_next) * (z - alpha) + ((t - 1.0) / t_next) * (alpha - prev)
        t = t_next
        if _violation(dty - gram @ alpha, alpha, gamma) <= tol:
            return alpha
    warnings.warn(f"src_fit did not reach tol={tol} in {max_iter} iterations", ConvergenceWarning)
    return alpha


def src_identity(dictionary, labels, y, alpha) -> SrcSolution:
    """Class with the smallest class-restricted reconstruction residual.

    Uses the same column normalization as :func:`src_fit`. Ties go to the
    lowest class id.
    """
    d = normalize_columns(dictionary)
    labels = np.asarray(labels)
    y = np.asarray(y, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (d.shape[1],):
        raise ValueError(f"alpha must have length {d.shape[1]}")
    n_classes = int(labels.max()) + 1
    resid = np.empty(n_classes)
    for c in range(n_classes):
        cols = labels == c
        resid[c] = np.linalg.norm(y - d[:, cols] @ alpha[cols])
    return SrcSolution(alpha, resid, int(np.argmin(resid)))


def src_classify(dictionary, labels, y, gamma: float | None = None, max_iter: int = 5000) -> SrcSolution:
    alpha = src_fit(dictionary, y, gamma, max_iter)
    return src_identity(dictionary, labels, y, alpha)


def src_predict(dictionary, labels, queries, gamma: float | None = None, max_iter: int = 5000) -> np.ndarray:
    queries = np.asarray(queries, dtype=np.float64)
    return np.array(
        [src_classify(dictionary, labels, queries[:, j], gamma, max_iter).predicted for j in range(queries.shape[1])],
        dtype=np.int64,
    )


# --------------------------------------------------------------------------
# PCA baseline

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray

    @property
    def d(self) -> int:
        return self.components.shape[1]


def pca_fit(train, d: int) -> PcaModel:
    """Top-``d`` left singular vectors of the mean-centred training columns."""
    from .prox import svd

    train = np.asarray(train, dtype=np.float64)
    p, n = train.shape
    if not 1 <= d <= min(p, n):
        raise ValueError(f"d={d} too large for {p}x{n} training data")
    mean = train.mean(axis=1)
    U, _, _ = svd(train - mean[:, None])
    return PcaModel(mean, U[:, :d].copy())


def pca_project(model: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return model.components.T @ (x - model.mean)
    return model.components.T @ (x - model.mean[:, None])


def pca_reconstruct(model: PcaModel, x) -> np.ndarray:
    coded = pca_project(model, x)
    if coded.ndim == 1:
        return model.mean + model.components @ coded
    return model.mean[:, None] + model.components @ coded
