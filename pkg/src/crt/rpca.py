"""Robust PCA used to synthesize approximately clean training data.

Splits ``X = Y + S`` into a low-rank part ``Y`` and a sparse part ``S`` by
solving ``min ||Y||_* + lam * ||S||_1  s.t.  X = Y + S`` with the inexact
ALM scheme and penalty schedule of :class:`~crt.solver.SolverConfig`.

``lam`` weights the sparse term, so the usual ``1/sqrt(max(rows, cols))``
is the sensible default. The equivalent form
``||X - Y||_1 + (1/lam) ||Y||_*`` has the same minimizer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .matrix_io import LabeledDataset
from .prox import norm_l1, norm_nuclear, prox_nuclear, soft_threshold
from .solver import SolverConfig, SolverReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RpcaResult:
    low_rank: np.ndarray
    sparse: np.ndarray
    report: SolverReport


def rpca_default_lambda(rows: int, cols: int) -> float:
    if rows <= 0 or cols <= 0:
        raise ValueError("dimensions must be positive")
    return 1.0 / math.sqrt(max(rows, cols))


def rpca_objective(x, y, lam: float) -> float:
    return norm_nuclear(y) + lam * norm_l1(np.asarray(x) - y)


def rpca_decompose(x, lam: float | None = None, config: SolverConfig | None = None) -> RpcaResult:
    """Low-rank plus sparse decomposition of ``x``.

    Each iteration thresholds the singular values of ``X - S + M/mu`` at
    ``1/mu``, soft-thresholds ``X - Y + M/mu`` at ``lam/mu`` and takes a dual
    step on ``M``. On return ``sparse`` is recomputed as ``X - low_rank``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be 2-D")
    if lam is None or lam <= 0:
        lam = rpca_default_lambda(*x.shape)
    config = config or SolverConfig()

    y = np.zeros_like(x)
    s = np.zeros_like(x)
    mult = np.zeros_like(x)
    x_norm = float(np.linalg.norm(x))
    report = SolverReport()
    if x_norm == 0.0:
        report.record(0.0, 0.0, 0.0, config.mu_at(0))
        report.converged = True
        return RpcaResult(y, s, report)

    for k in range(int(config.max_iter)):
        mu = config.mu_at(k)
        y = prox_nuclear(x - s + mult / mu, 1.0 / mu)
        s = soft_threshold(x - y + mult / mu, lam / mu)
        resid = x - y - s
        mult = mult + mu * resid
        r = float(np.linalg.norm(resid))
        report.record(rpca_objective(x, y, lam), 0.0, r, mu)
        if r / x_norm <= config.tol:
            report.converged = True
            break
    if not report.converged:
        log.warning("RPCA stopped after %d iterations without converging", report.iterations)
    return RpcaResult(y, x - y, report)


def synthesize_ground_truth(
    dataset: LabeledDataset | np.ndarray,
    lam: float | None = None,
    config: SolverConfig | None = None,
    per_class: bool = False,
) -> np.ndarray:
    """Approximate clean training columns as the low-rank RPCA component.

    With ``per_class`` each class is decomposed on its own; otherwise the
    whole matrix at once. ``lam <= 0`` or None selects the default weight.
    """
    if isinstance(dataset, LabeledDataset):
        data, labels = dataset.data, dataset.labels
    else:
        data, labels = np.asarray(dataset, dtype=np.float64), None
    if not per_class or labels is None:
        return rpca_decompose(data, lam, config).low_rank
    out = np.empty_like(data)
    for c in np.unique(labels):
        cols = labels == c
        out[:, cols] = rpca_decompose(data[:, cols], lam, config).low_rank
    return out
