"""Dense Levenberg-Marquardt with finite-difference Jacobians.

Small and boring on purpose: both the camera refinement and the shot
fitter need damped Gauss-Newton over a handful of parameters, nothing
scipy-shaped (box projection hooks, custom batched Jacobians, exact
iteration accounting for the tests).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

ResidualFn = Callable[[np.ndarray], np.ndarray]
BatchResidualFn = Callable[[np.ndarray], np.ndarray]  # (B, n) params -> (B, m) residuals


GRAD_COSINE_TOL = 1e-6


def gradient_test_passed(jac: np.ndarray, r: np.ndarray, grad_tol: float) -> bool:
    """First-order optimality at (jac, r), robust to residual scale.

    Passes when the gradient inf-norm falls below grad_tol scaled by the
    cost, or when every Jacobian column is numerically orthogonal to the
    residual (the MINPACK-style cosine test): a finite-difference
    gradient of a sum of squares cannot be measured much below
    eps_machine * cost / step, so a purely absolute test would never
    pass at large residual scales.
    """
    g = jac.T @ r
    cost = float(r @ r)
    if float(np.linalg.norm(g, ord=np.inf)) < grad_tol * max(1.0, cost):
        return True
    col_norms = np.linalg.norm(jac, axis=0)
    denom = col_norms * math.sqrt(cost) + 1e-300
    return bool(np.max(np.abs(g) / denom) < GRAD_COSINE_TOL)


@dataclass
class LMResult:
    x: np.ndarray
    cost: float          # sum of squared residuals
    grad_norm: float     # inf-norm of J^T r at x
    iterations: int
    converged: bool      # gradient_test_passed at the returned point


def central_jacobian(
    residual_batch: BatchResidualFn, x: np.ndarray, rel_step: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian, all 2n perturbed points in one batch call."""
    n = x.size
    h = rel_step * (1.0 + np.abs(x))
    pts = np.repeat(x[None, :], 2 * n, axis=0)
    for j in range(n):
        pts[2 * j, j] += h[j]
        pts[2 * j + 1, j] -= h[j]
    res = residual_batch(pts)
    jac = np.empty((res.shape[1], n))
    for j in range(n):
        jac[:, j] = (res[2 * j] - res[2 * j + 1]) / (2.0 * h[j])
    return jac


def levenberg_marquardt(
    residual: ResidualFn,
    x0: np.ndarray,
    *,
    residual_batch: BatchResidualFn | None = None,
    max_iter: int = 100,
    grad_tol: float = 1e-8,
    step_tol: float = 1e-10,
    cost_tol: float = 0.0,
    lam0: float = 1e-3,
    lam_max: float = 1e12,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    jac_rel_step: float = 1e-4,
) -> LMResult:
    """Minimize ||residual(x)||^2 from x0.

    Damping follows the classic schedule: lambda x10 on a rejected step,
    /10 on an accepted one, scaling the diagonal of J^T J. An optional
    `project` maps trial points back into the feasible box before they
    are evaluated, so accepted iterates always satisfy the constraints.
    Accepted steps never increase the cost; the loop stops on small
    gradient, small step, damping exhaustion, or the iteration cap.

    The gradient test scales with the cost: the finite-difference
    gradient of a sum of squares cannot be measured much below
    eps_machine * cost / step, so an absolute test would never pass at
    large residual scales.
    """
    if residual_batch is None:
        residual_batch = lambda pts: np.stack([residual(p) for p in pts])  # noqa: E731

    x = np.asarray(x0, dtype=float).copy()
    if project is not None:
        x = project(x)
    r = residual(x)
    cost = float(r @ r)
    lam = lam0
    it = 0
    grad_norm = np.inf
    grad_is_current = False
    converged_flag = False

    while it < max_iter:
        it += 1
        jac = central_jacobian(residual_batch, x, jac_rel_step)
        g = jac.T @ r
        grad_norm = float(np.linalg.norm(g, ord=np.inf))
        grad_is_current = True
        if gradient_test_passed(jac, r, grad_tol):
            converged_flag = True
            break
        jtj = jac.T @ jac
        diag = np.maximum(np.diag(jtj), 1e-12)

        stepped = False
        step_size = np.inf
        improvement = 0.0
        while lam <= lam_max:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + delta
            if project is not None:
                x_new = project(x_new)
            r_new = residual(x_new)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                step_size = float(np.linalg.norm(x_new - x))
                improvement = cost - cost_new
                x, r, cost = x_new, r_new, cost_new
                grad_is_current = False
                lam = max(lam / 10.0, 1e-12)
                stepped = True
                break
            lam *= 10.0
        # a tiny damped step only means "done" when damping is low;
        # with lambda high it just reflects a shrunken trust region
        if not stepped or (step_size < step_tol and lam <= 1.0):
            break
        if cost_tol > 0.0 and improvement < cost_tol * max(cost, 1e-30):
            break

    if not grad_is_current:
        jac = central_jacobian(residual_batch, x, jac_rel_step)
        grad_norm = float(np.linalg.norm(jac.T @ r, ord=np.inf))
        converged_flag = gradient_test_passed(jac, r, grad_tol)

    return LMResult(
        x=x, cost=cost, grad_norm=grad_norm, iterations=it, converged=converged_flag
    )
