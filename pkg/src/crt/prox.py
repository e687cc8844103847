r"""Matrix norms and the proximal operators used by the ALM solvers.

Every prox takes its threshold ``tau`` directly, so callers pass
``lam / mu`` for singular value thresholding and ``1 / mu`` for the
column-wise :math:`\ell_{2,1}` shrinkage.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class SvdFactors(NamedTuple):
    """Thin SVD ``m = U @ diag(sigma) @ V.T`` with a fixed sign convention."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def svd(m) -> SvdFactors:
    """Thin SVD with deterministic signs.

    The sign of each singular pair is chosen so that the largest-magnitude
    entry of the corresponding column of ``U`` is nonnegative (first such
    entry on ties).
    """
    m = np.asarray(m, dtype=np.float64)
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    if U.size:
        pivot = np.argmax(np.abs(U), axis=0)
        signs = np.sign(U[pivot, np.arange(U.shape[1])])
        signs[signs == 0] = 1.0
        U = U * signs
        Vt = Vt * signs[:, None]
    return SvdFactors(U, s, Vt.T)


def norm_l21(m) -> float:
    r"""Sum of the Euclidean norms of the columns, :math:`\|M\|_{2,1}`."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    return float(np.sum(np.sqrt(np.sum(m * m, axis=0))))


def norm_nuclear(m) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(np.asarray(m, dtype=np.float64), compute_uv=False)))


def norm_l1(m) -> float:
    return float(np.sum(np.abs(m)))


def prox_nuclear(m, tau: float, return_sigma: bool = False):
    r"""Singular value thresholding.

    Returns the minimizer of :math:`\tau\|F\|_* + \tfrac12\|F - M\|_F^2`,
    i.e. ``U (Sigma - tau)_+ V^T``. With ``return_sigma`` the thresholded
    singular values are returned as well.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    if tau == 0 and not return_sigma:
        return m.copy()
    U, s, V = svd(m)
    s = np.maximum(s - tau, 0.0)
    if tau == 0:
        out = m.copy()
    else:
        keep = s > 0
        out = (U[:, keep] * s[keep]) @ V[:, keep].T if keep.any() else np.zeros_like(m)
    return (out, s) if return_sigma else out


def prox_l21_columns(p, tau: float) -> np.ndarray:
    """Column-wise group shrinkage: column ``j`` becomes
    ``max(1 - tau / ||p_j||, 0) * p_j``; zero columns stay zero."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    p = np.asarray(p, dtype=np.float64)
    norms = np.sqrt(np.sum(p * p, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    return p * scale


def soft_threshold(m, tau: float) -> np.ndarray:
    """Entrywise prox of ``tau * |x|``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    return np.sign(m) * np.maximum(np.abs(m) - tau, 0.0)
