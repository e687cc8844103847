r"""Learning the corruption recovery transformation (CRT).

Given clean training columns ``Z0`` and their corrupted versions ``Z`` (both
``p x m``) the CRT is a single ``p x p`` matrix ``A`` with ``Z0 ~= A @ Z``.
Three estimators are provided:

* ``ridge``: least squares, :math:`A = Z^0 Z^T (Z Z^T + \epsilon I)^{-1}`.
* ``frobenius``: :math:`\min_A \|Z^0 - AZ\|_F^2 + \lambda\|A\|_*`.
* ``l21``: :math:`\min_A \|Z^0 - AZ\|_{2,1} + \lambda\|A\|_*` (robust CRT).

The last two are solved by an inexact augmented Lagrange multiplier scheme
on the split problem

.. math::

    \min_{A,F,E} \ \mathrm{loss}(E) + \lambda\|F\|_*
    \quad \text{s.t.}\quad F = A,\ E = Z^0 - AZ,

alternating closed-form updates of ``F`` (singular value thresholding),
``E`` (column shrinkage) and ``A`` (a linear solve against ``I + Z Z^T``)
followed by dual ascent on the multipliers and a geometric increase of the
penalty ``mu``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .matrix_io import (
    export_image_pgm,
    load_matrix,
    parse_key_values,
    save_matrix,
    write_key_values,
)
from .prox import norm_l21, norm_nuclear, prox_l21_columns, prox_nuclear

log = logging.getLogger(__name__)

LOSS_MODES = ("l21", "frobenius", "ridge")


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when ``Z Z^T`` is singular and no jitter was requested."""


@dataclass(frozen=True)
class SolverConfig:
    """Penalty schedule and stopping rule shared by the ALM solvers.

    ``mu`` starts at ``mu0`` and is multiplied by ``rho`` after every
    iteration until it reaches ``mu_max``. Iteration stops once both
    relative primal residuals are at most ``tol``.
    """

    mu0: float = 1e-6
    rho: float = 1.2
    mu_max: float = 1e10
    tol: float = 1e-7
    max_iter: int = 1000

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if not self.mu_max >= self.mu0:
            raise ValueError("mu_max must be at least mu0")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")

    def mu_at(self, k: int) -> float:
        """Penalty used in iteration ``k`` (0-based)."""
        if k * math.log(self.rho) > math.log(self.mu_max / self.mu0) + 1.0:
            return self.mu_max
        return min(self.mu0 * self.rho**k, self.mu_max)


@dataclass
class SolverReport:
    """Per-iteration trace of an ALM run.

    ``residual_1`` and ``residual_2`` are the absolute Frobenius norms of
    the two constraint violations; ``mu`` is the penalty used in that
    iteration.
    """

    objective: list = field(default_factory=list)
    residual_1: list = field(default_factory=list)
    residual_2: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.mu)

    def record(self, objective, r1, r2, mu):
        self.objective.append(float(objective))
        self.residual_1.append(float(r1))
        self.residual_2.append(float(r2))
        self.mu.append(float(mu))


@dataclass(frozen=True)
class CrtModel:
    """A learned transformation plus the settings that produced it."""

    a: np.ndarray
    lam: float
    loss_mode: str
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"CRT must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("CRT contains non-finite entries")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")
        object.__setattr__(self, "a", a)

    @property
    def p(self) -> int:
        return self.a.shape[0]


def _check_pair(z0, z):
    z0 = np.asarray(z0, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z0.ndim != 2 or z0.shape != z.shape:
        raise ValueError(f"Z0 and Z must have equal 2-D shapes, got {z0.shape} and {z.shape}")
    return z0, z


def _loss(r, loss_mode):
    if loss_mode == "l21":
        return norm_l21(r)
    if loss_mode == "frobenius":
        return float(np.sum(r * r))
    raise ValueError(f"unknown loss mode {loss_mode!r}")


def objective(z0, z, a, lam: float, loss_mode: str = "l21") -> float:
    """Training objective of ``a``.

    ``loss(Z0 - A Z) + lam * ||A||_*`` where the loss is the l2,1 norm or the
    squared Frobenius norm; ``ridge`` returns the plain squared residual.
    """
    r = np.asarray(z0) - np.asarray(a) @ np.asarray(z)
    if loss_mode == "ridge":
        return _loss(r, "frobenius")
    loss = _loss(r, loss_mode)
    return loss + lam * norm_nuclear(a) if lam else loss


def fit_ridge(z0, z, epsilon: float = 0.0) -> CrtModel:
    """Closed-form least-squares CRT ``Z0 Z^T (Z Z^T + epsilon I)^{-1}``."""
    z0, z = _check_pair(z0, z)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    p = z.shape[0]
    gram = z @ z.T
    if epsilon == 0 and np.linalg.matrix_rank(z) < p:
        raise SingularSystemError(
            "Z Z^T is singular (rank(Z) < p); pass epsilon > 0 to regularize"
        )
    gram[np.diag_indices(p)] += epsilon
    # A gram = z0 z^T  <=>  gram A^T = z z0^T  (gram is symmetric)
    a = linalg.solve(gram, z @ z0.T, assume_a="pos").T
    return CrtModel(a, 0.0, "ridge")


def step_F(a, lambda_e, mu: float, lam: float, return_sigma: bool = False):
    """F-update: singular value thresholding of ``A + Lambda/mu`` at ``lam/mu``."""
    return prox_nuclear(a + lambda_e / mu, lam / mu, return_sigma)


def step_E(z0, z, a, omega, mu: float, loss_mode: str = "l21") -> np.ndarray:
    """E-update on ``P = Z0 - A Z + Omega/mu``.

    l21 mode shrinks each column of ``P`` by ``1/mu``; frobenius mode is the
    prox of ``||E||_F^2``, i.e. ``mu P / (2 + mu)``.
    """
    p = z0 - a @ z + omega / mu
    if loss_mode == "l21":
        return prox_l21_columns(p, 1.0 / mu)
    if loss_mode == "frobenius":
        return (mu / (2.0 + mu)) * p
    raise ValueError(f"unknown loss mode {loss_mode!r}")


def factor_system(z):
    """Cholesky factor of ``I + Z Z^T``; reused by every A-update."""
    z = np.asarray(z, dtype=np.float64)
    m = z @ z.T
    m[np.diag_indices_from(m)] += 1.0
    return linalg.cho_factor(m)


def step_A(z0, z, e, f, lambda_e, omega, mu: float, factor=None) -> np.ndarray:
    """A-update ``[F + (Z0 - E + Omega/mu) Z^T - Lambda/mu] (I + Z Z^T)^{-1}``."""
    if factor is None:
        factor = factor_system(z)
    rhs = f + (z0 - e + omega / mu) @ z.T - lambda_e / mu
    return linalg.cho_solve(factor, rhs.T).T


def alm_lagrangian_a(a, z0, z, e, f, lambda_e, omega, mu: float) -> float:
    """The part of the augmented Lagrangian that depends on ``A``.

    ``step_A`` returns its exact minimizer; exposed for gradient checks.
    """
    d1 = a - f
    d2 = z0 - a @ z - e
    return float(
        np.sum(lambda_e * d1)
        + np.sum(omega * d2)
        + 0.5 * mu * np.sum(d1 * d1)
        + 0.5 * mu * np.sum(d2 * d2)
    )


def fit_robust(z0, z, lam: float, loss_mode: str = "l21", config: SolverConfig | None = None):
    """Learn the CRT by the inexact ALM iteration.

    Parameters
    ----------
    z0, z : ndarray, shape (p, m)
        Clean and corrupted training columns.
    lam : float
        Weight of the nuclear norm on ``A``.
    loss_mode : {"l21", "frobenius"}
    config : SolverConfig, optional

    Returns
    -------
    model : CrtModel
    report : SolverReport
        The traced objective is evaluated at the low-rank iterate ``F``. If
        the residuals never reach ``config.tol`` the model holds the ``F``
        iterate with the lowest objective and ``report.converged`` is False.
    """
    z0, z = _check_pair(z0, z)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if loss_mode not in ("l21", "frobenius"):
        raise ValueError(f"fit_robust supports l21 and frobenius losses, not {loss_mode!r}")
    config = config or SolverConfig()

    p, m = z.shape
    a = np.zeros((p, p))
    f = np.zeros((p, p))
    e = np.zeros((p, m))
    lambda_e = np.zeros((p, p))
    omega = np.zeros((p, m))
    factor = factor_system(z)
    z0_norm = max(1.0, float(np.linalg.norm(z0)))

    report = SolverReport()
    best_f, best_obj = f, np.inf
    for k in range(int(config.max_iter)):
        mu = config.mu_at(k)
        f, sigma = step_F(a, lambda_e, mu, lam, return_sigma=True)
        e = step_E(z0, z, a, omega, mu, loss_mode)
        a = step_A(z0, z, e, f, lambda_e, omega, mu, factor)

        d1 = a - f
        d2 = z0 - a @ z - e
        lambda_e = lambda_e + mu * d1
        omega = omega + mu * d2

        r1 = float(np.linalg.norm(d1))
        r2 = float(np.linalg.norm(d2))
        # objective at the low-rank iterate F: its singular values are known
        obj = _loss(z0 - f @ z, loss_mode) + lam * float(sigma.sum())
        report.record(obj, r1, r2, mu)
        if obj < best_obj:
            best_f, best_obj = f, obj
        if r1 / max(1.0, float(np.linalg.norm(f))) <= config.tol and r2 / z0_norm <= config.tol:
            report.converged = True
            break

    if not report.converged:
        log.warning("ALM stopped after %d iterations without converging", report.iterations)
        a = best_f
    model = CrtModel(a, float(lam), loss_mode, report.iterations, report.converged)
    return model, report


def fit(z0, z, lam: float = 0.12, loss_mode: str = "l21", config=None, epsilon: float = 1e-8):
    """Dispatch on ``loss_mode``; ridge ignores ``lam`` and uses ``epsilon``."""
    if loss_mode == "ridge":
        return fit_ridge(z0, z, epsilon), None
    return fit_robust(z0, z, lam, loss_mode, config)


def recover(model: CrtModel | np.ndarray, x) -> np.ndarray:
    """Apply the CRT to corrupted columns (or a single vector)."""
    a = model.a if isinstance(model, CrtModel) else np.asarray(model, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != a.shape[1]:
        raise ValueError(f"dimension mismatch: model is {a.shape[0]}-dimensional, input has {x.shape[0]} rows")
    return a @ x


def export_basis(model: CrtModel, height: int, width: int, directory, count: int = 32) -> list[Path]:
    """Write the first ``count`` columns of ``A`` as PGM images."""
    if height * width != model.p:
        raise ValueError(f"geometry {height}x{width} does not match p={model.p}")
    count = min(int(count), model.p)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(count):
        path = directory / f"basis_{k:03d}.pgm"
        export_image_pgm(model.a[:, k], height, width, path)
        paths.append(path)
    return paths


def save_model(model: CrtModel, directory) -> None:
    """Persist as ``a.crtm`` plus a ``model.txt`` key=value sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(model.a, directory / "a.crtm")
    write_key_values(
        {
            "lambda": repr(model.lam),
            "loss_mode": model.loss_mode,
            "p": model.p,
            "iterations": model.iterations,
            "converged": str(model.converged).lower(),
        },
        directory / "model.txt",
    )


def load_model(directory) -> CrtModel:
    directory = Path(directory)
    meta = parse_key_values(directory / "model.txt")
    a = load_matrix(directory / "a.crtm")
    if int(meta.get("p", a.shape[0])) != a.shape[0]:
        raise ValueError(f"{directory}: sidecar p={meta['p']} disagrees with matrix {a.shape}")
    return CrtModel(
        a,
        float(meta.get("lambda", 0.0)),
        meta.get("loss_mode", "l21"),
        int(meta.get("iterations", 0)),
        meta.get("converged", "true") == "true",
    )
