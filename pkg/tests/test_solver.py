import numpy as np
import pytest

from crt.matrix_io import read_pgm
from crt.prox import norm_l21, norm_nuclear
from crt.solver import (
    CrtModel,
    SingularSystemError,
    SolverConfig,
    alm_lagrangian_a,
    export_basis,
    factor_system,
    fit_ridge,
    fit_robust,
    load_model,
    objective,
    recover,
    save_model,
    step_A,
    step_E,
    step_F,
)

import oracles


def tiny_instance(seed, p=5, m=8):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((p, m)), rng.standard_normal((p, m))


# ---------------------------------------------------------------- config

def test_config_defaults():
    cfg = SolverConfig()
    assert (cfg.mu0, cfg.rho, cfg.mu_max, cfg.tol, cfg.max_iter) == (1e-6, 1.2, 1e10, 1e-7, 1000)


@pytest.mark.parametrize(
    "kwargs", [dict(mu0=0), dict(rho=1.0), dict(mu_max=1e-9), dict(tol=0), dict(max_iter=0)]
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_mu_schedule_exact():
    cfg = SolverConfig()
    for k in range(400):
        assert cfg.mu_at(k) == min(1e-6 * 1.2**k, 1e10)


# ---------------------------------------------------------------- ridge

def test_ridge_scalar():
    assert fit_ridge([[6.0]], [[2.0]]).a[0, 0] == pytest.approx(3.0)


def test_ridge_identity_input():
    m = np.random.default_rng(0).standard_normal((3, 3))
    np.testing.assert_allclose(fit_ridge(m, np.eye(3)).a, m, atol=1e-12)


def test_ridge_normal_equations():
    z0, z = tiny_instance(1, 4, 10)
    a = fit_ridge(z0, z).a
    assert np.linalg.norm((z0 - a @ z) @ z.T) < 1e-8


def test_ridge_singular():
    z = np.ones((3, 5))
    with pytest.raises(SingularSystemError, match="epsilon"):
        fit_ridge(z, z)
    model = fit_ridge(z, z, epsilon=1e-6)
    assert np.all(np.isfinite(model.a))


# ---------------------------------------------------------------- steps

def test_step_F_examples():
    np.testing.assert_allclose(step_F(np.diag([3.0, 1.0]), np.zeros((2, 2)), 1.0, 2.0), np.diag([1.0, 0.0]), atol=1e-12)
    rng = np.random.default_rng(2)
    a, lam_e = rng.standard_normal((2, 4, 4))
    np.testing.assert_allclose(step_F(a, lam_e, 2.0, 0.0), a + lam_e / 2.0, atol=1e-12)


def test_step_F_minimizes_subproblem():
    rng = np.random.default_rng(3)
    a, lam_e = rng.standard_normal((2, 5, 5))
    mu, lam = 1.7, 0.9
    f = step_F(a, lam_e, mu, lam)
    target = a + lam_e / mu
    obj = lambda x: lam * norm_nuclear(x) + 0.5 * mu * np.sum((x - target) ** 2)
    assert obj(f) <= oracles.perturbation_search(obj, f, rng) + 1e-12


def test_step_E_examples():
    z0 = np.array([[3.0], [4.0]])
    z = np.zeros((2, 1))
    a = np.zeros((2, 2))
    np.testing.assert_allclose(step_E(z0, z, a, np.zeros((2, 1)), 1.0), [[2.4], [3.2]])
    np.testing.assert_array_equal(step_E(np.zeros((2, 1)), z, a, np.zeros((2, 1)), 1.0), 0.0)


def test_step_E_golden():
    rng = np.random.default_rng(4)
    z0, z = rng.standard_normal((2, 4, 6))
    a = rng.standard_normal((4, 4)) * 0.3
    omega = rng.standard_normal((4, 6))
    mu = 0.8
    p = z0 - a @ z + omega / mu
    np.testing.assert_allclose(step_E(z0, z, a, omega, mu), oracles.group_shrink_golden(p, 1 / mu), atol=1e-8)


def test_step_E_frobenius_closed_form():
    rng = np.random.default_rng(5)
    z0, z = rng.standard_normal((2, 3, 4))
    a = np.zeros((3, 3))
    e = step_E(z0, z, a, np.zeros((3, 4)), 2.0, "frobenius")
    np.testing.assert_allclose(e, 0.5 * z0)


def test_step_A_examples():
    rng = np.random.default_rng(6)
    z0 = rng.standard_normal((3, 5))
    f = rng.standard_normal((3, 3))
    zeros = np.zeros((3, 5))
    out = step_A(z0, zeros, zeros, f, np.zeros((3, 3)), zeros, 1.0)
    np.testing.assert_allclose(out, f, atol=1e-12)
    z = rng.standard_normal((3, 5))
    out = step_A(z0, z, zeros, np.zeros((3, 3)), np.zeros((3, 3)), zeros, 1.0)
    expect = z0 @ z.T @ np.linalg.inv(np.eye(3) + z @ z.T)
    np.testing.assert_allclose(out, expect, atol=1e-12)


def _random_step_problem(seed, p=5, m=8):
    rng = np.random.default_rng(seed)
    z0, z, e, omega = rng.standard_normal((4, p, m))
    f, lam_e = rng.standard_normal((2, p, p))
    return z0, z, e, f, lam_e, omega, float(rng.uniform(0.5, 3.0))


@pytest.mark.parametrize("seed", range(3))
def test_step_A_finite_difference_gradient(seed):
    z0, z, e, f, lam_e, omega, mu = _random_step_problem(seed)
    a = step_A(z0, z, e, f, lam_e, omega, mu)
    h = 1e-5
    grad = np.zeros_like(a)
    for idx in np.ndindex(a.shape):
        d = np.zeros_like(a)
        d[idx] = h
        grad[idx] = (alm_lagrangian_a(a + d, z0, z, e, f, lam_e, omega, mu)
                     - alm_lagrangian_a(a - d, z0, z, e, f, lam_e, omega, mu)) / (2 * h)
    assert np.abs(grad).max() < 1e-5


def test_step_A_algebraic_identity():
    z0, z, e, f, lam_e, omega, mu = _random_step_problem(9, 6, 11)
    a = step_A(z0, z, e, f, lam_e, omega, mu, factor_system(z))
    numer = f + (z0 - e + omega / mu) @ z.T - lam_e / mu
    back = a @ (np.eye(6) + z @ z.T)
    assert np.linalg.norm(back - numer) <= 1e-10 * np.linalg.norm(numer)


# ---------------------------------------------------------------- objective

def test_objective_examples():
    z0, z = tiny_instance(7)
    assert objective(z0, z, np.zeros((5, 5)), 0.3) == pytest.approx(norm_l21(z0))
    a = np.random.default_rng(8).standard_normal((5, 5))
    assert objective(a @ z, z, a, 0.3) == pytest.approx(0.3 * norm_nuclear(a))
    r = z0 - a @ z
    assert objective(z0, z, a, 0.3, "frobenius") == pytest.approx(np.sum(r**2) + 0.3 * oracles.nuclear_via_eigh(a))
    assert objective(z0, z, a, 0.3, "ridge") == pytest.approx(np.sum(r**2))
    assert objective(z0, z, a, 0.3) == pytest.approx(oracles.l21_loop(r) + 0.3 * oracles.nuclear_via_eigh(a))


# ---------------------------------------------------------------- ALM

def test_fit_robust_zero_target():
    _, z = tiny_instance(10)
    model, report = fit_robust(np.zeros_like(z), z, 0.1)
    assert report.converged
    assert np.abs(model.a).max() < 1e-6


def test_fit_robust_large_lambda_shuts_down():
    z0, z = tiny_instance(11)
    lam = 1e3 * np.linalg.norm(z0 @ z.T, 2)
    model, _ = fit_robust(z0, z, lam)
    assert np.abs(model.a).max() < 1e-6
    assert norm_l21(z0 - model.a @ z) == pytest.approx(norm_l21(z0), rel=1e-6)
    assert objective(z0, z, model.a, lam) == pytest.approx(norm_l21(z0), rel=1e-3)


@pytest.mark.parametrize("seed", range(3))
def test_fit_robust_matches_global_optimum(seed):
    pytest.importorskip("cvxpy")
    z0, z = tiny_instance(100 + seed)
    cfg = SolverConfig(rho=1.05, tol=1e-9, max_iter=5000)
    model, report = fit_robust(z0, z, 0.12, config=cfg)
    assert report.converged
    got = objective(z0, z, model.a, 0.12)
    best = oracles.crt_objective_cvx(z0, z, 0.12)
    assert abs(got - best) <= 1e-4 * best


def test_fit_robust_beats_subgradient_descent():
    z0, z = tiny_instance(20)
    model, _ = fit_robust(z0, z, 0.12, config=SolverConfig(rho=1.05, tol=1e-9, max_iter=5000))
    sub = oracles.crt_subgradient(z0, z, 0.12, iters=20000)
    assert objective(z0, z, model.a, 0.12) <= sub + 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_fit_robust_never_worse_than_ridge(seed):
    z0, z = tiny_instance(30 + seed)
    for lam in (0.12, 0.16, 0.2):
        model, report = fit_robust(z0, z, lam)
        ridge = fit_ridge(z0, z).a
        assert objective(z0, z, model.a, lam) <= objective(z0, z, ridge, lam) + 1e-6


def test_frobenius_mode_optimum():
    cp = pytest.importorskip("cvxpy")
    z0, z = tiny_instance(40)
    model, report = fit_robust(z0, z, 0.2, "frobenius", SolverConfig(rho=1.05, tol=1e-9, max_iter=5000))
    assert report.converged
    a = cp.Variable((5, 5))
    prob = cp.Problem(cp.Minimize(cp.sum_squares(z0 - a @ z) + 0.2 * cp.normNuc(a)))
    prob.solve(solver=cp.CLARABEL)
    assert objective(z0, z, model.a, 0.2, "frobenius") == pytest.approx(prob.value, rel=1e-4)


def test_trace_invariants():
    z0, z = tiny_instance(50, 8, 20)
    cfg = SolverConfig()
    model, report = fit_robust(z0, z, 0.12, config=cfg)
    assert report.converged and model.converged
    assert report.iterations == len(report.objective) == len(report.residual_1) == model.iterations
    mus = np.array(report.mu)
    assert np.all(np.diff(mus) >= 0) and mus.max() <= cfg.mu_max
    assert all(report.mu[k] == min(1e-6 * 1.2**k, 1e10) for k in range(report.iterations))
    assert report.residual_1[-1] / max(1.0, np.linalg.norm(model.a)) <= 1.01 * cfg.tol
    assert report.residual_2[-1] / max(1.0, np.linalg.norm(z0)) <= cfg.tol
    assert np.all(np.isfinite(report.objective))


def test_fit_robust_deterministic():
    z0, z = tiny_instance(51, 6, 12)
    m1, r1 = fit_robust(z0, z, 0.16)
    m2, r2 = fit_robust(z0, z, 0.16)
    assert m1.a.tobytes() == m2.a.tobytes()
    assert r1.objective == r2.objective and r1.residual_2 == r2.residual_2


def test_non_convergence_returns_best_iterate():
    z0, z = tiny_instance(52)
    model, report = fit_robust(z0, z, 0.12, config=SolverConfig(max_iter=5))
    assert not report.converged and not model.converged
    assert report.iterations == 5
    assert objective(z0, z, model.a, 0.12) == pytest.approx(min(report.objective))


def test_fit_robust_input_validation():
    z0, z = tiny_instance(53)
    with pytest.raises(ValueError):
        fit_robust(z0, z[:, :3], 0.1)
    with pytest.raises(ValueError):
        fit_robust(z0, z, -1.0)
    with pytest.raises(ValueError):
        fit_robust(z0, z, 0.1, "ridge")


# ---------------------------------------------------------------- recover / basis / persistence

def test_recover_identity_and_linearity():
    rng = np.random.default_rng(60)
    x, y = rng.standard_normal((2, 6, 4))
    eye = CrtModel(np.eye(6), 0.1, "l21")
    np.testing.assert_array_equal(recover(eye, x), x)
    model = CrtModel(rng.standard_normal((6, 6)), 0.1, "l21")
    lhs = recover(model, 2.5 * x - 0.7 * y)
    rhs = 2.5 * recover(model, x) - 0.7 * recover(model, y)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)
    with pytest.raises(ValueError, match="dimension mismatch"):
        recover(model, np.zeros((5, 2)))


def test_recover_self_consistency():
    z = np.random.default_rng(61).standard_normal((4, 4))
    np.testing.assert_allclose(recover(fit_ridge(z, z), z), z, atol=1e-8)


def test_export_basis(tmp_path):
    model = CrtModel(np.eye(64), 0.1, "l21")
    paths = export_basis(model, 8, 8, tmp_path, count=32)
    assert len(paths) == 32 and all(p.exists() for p in paths)
    img = read_pgm(paths[0]).ravel()
    assert img[0] == 255 and np.all(img[1:] == 0)


def test_export_basis_round_trip(tmp_path):
    model = CrtModel(np.random.default_rng(62).standard_normal((12, 12)), 0.1, "l21")
    export_basis(model, 3, 4, tmp_path, count=1)
    a1 = model.a[:, 0]
    mapped = (a1 - a1.min()) / (a1.max() - a1.min())
    img = read_pgm(tmp_path / "basis_000.pgm").ravel() / 255.0
    assert np.abs(img - mapped).max() <= 1 / 255
    with pytest.raises(ValueError, match="geometry"):
        export_basis(model, 5, 5, tmp_path)


def test_model_round_trip(tmp_path):
    z0, z = tiny_instance(63)
    model, _ = fit_robust(z0, z, 0.2)
    save_model(model, tmp_path / "m")
    back = load_model(tmp_path / "m")
    assert back.a.tobytes() == model.a.tobytes()
    assert (back.lam, back.loss_mode, back.p, back.iterations, back.converged) == (
        0.2, "l21", 5, model.iterations, True)
