"""Newton continuation and parabolic flow for Σ a_jk f^{jk} = c on the torus."""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from jflow.errors import ContinuationError, DivergenceError, DomainError, SingularityError, StepSizeError
from jflow.torus.problem import DEGENERATE_EIG, TorusProblem, TorusSolution

log = logging.getLogger(__name__)


def residual_field(problem: TorusProblem, u: np.ndarray, c: float, a_values: np.ndarray | None = None) -> np.ndarray:
    """ρ(u, c) = c - Σ a_jk f^{jk}; the flow is ∂u/∂t = ρ and ∂ρ/∂u = L."""
    return c - problem.trace(u, a_values)


def residual(problem: TorusProblem, solution: TorusSolution) -> float:
    """sup over nodes of |Σ a_jk f^{jk} - c|."""
    if solution.u.shape != problem.shape:
        raise DomainError(f"u has shape {solution.u.shape}, grid is {problem.shape}")
    return float(np.max(np.abs(residual_field(problem, solution.u, solution.c))))


def _coefficients(problem: TorusProblem, u: np.ndarray, a_values=None, require_convex=True) -> np.ndarray:
    """M = H⁻¹ A H⁻¹, the coefficient matrix of the linearized operator."""
    a = problem.a_values if a_values is None else a_values
    Hinv = problem.inverse_hessian(u, require_convex=require_convex)
    return Hinv @ a @ Hinv


def linearized_apply(problem: TorusProblem, u: np.ndarray, v: np.ndarray, a_values=None) -> np.ndarray:
    """L v = Σ a_pq f^{jp} f^{qk} ∂²v/∂x_j∂x_k at the convex potential f = ½ xᵀBx + u.

    L is the derivative of -Σ a_jk f^{jk} with respect to u, so L annihilates
    constants and is elliptic but not self-adjoint.
    """
    u = getattr(u, "u", u)
    M = _coefficients(problem, u, a_values)
    out = np.zeros(problem.shape)
    for j in range(problem.n):
        for k in range(problem.n):
            out += M[..., j, k] * problem.second_difference(v, j, k)
    return out


def jacobian(problem: TorusProblem, u: np.ndarray, a_values=None) -> sp.csr_matrix:
    """Sparse matrix of :func:`linearized_apply`."""
    M = _coefficients(problem, u, a_values)
    J = None
    for (j, k), D in problem.second_difference_matrices.items():
        weight = M[..., j, k].ravel() * (1.0 if j == k else 2.0)
        term = sp.diags(weight) @ D
        J = term if J is None else J + term
    return J.tocsr()


def c_bounds(problem: TorusProblem) -> tuple[float, float]:
    """Range of tr(a(x) B⁻¹) over the grid; c of any solution lies inside.

    At a maximum of u the Hessian of f is at most B, so Σ a_jk f^{jk} ≥
    tr(a B⁻¹) there; the minimum gives the other side.
    """
    t = np.einsum("...jk,kj->...", problem.a_values, problem.B_inv)
    return float(t.min()), float(t.max())


class _NewtonFailure(Exception):
    pass


def _newton(
    problem: TorusProblem,
    a_values: np.ndarray,
    u: np.ndarray,
    c: float,
    tol: float,
    maxiter: int,
    freeze_c: bool = False,
    forcing: float = 0.0,
):
    """Newton on the augmented unknown (u, c) with mean(u) = 0.

    The bordered system [[L, 1], [1ᵀ/|grid|, 0]] is non-singular because
    L has constants as its kernel and they are not in its image. With
    ``freeze_c`` the border still absorbs the constant part of the update
    but c is not changed; a non-zero ``forcing`` then has no solution.
    """
    size = u.size
    border = sp.csr_matrix(np.ones((size, 1)))
    mean_row = sp.csr_matrix(np.full((1, size), 1.0 / size))

    def rho(u_, c_):
        return residual_field(problem, u_, c_, a_values) - forcing

    r = rho(u, c)
    res = float(np.max(np.abs(r)))
    for it in range(maxiter + 1):
        if res <= tol:
            return u, c, it, res
        if it == maxiter:
            break
        J = jacobian(problem, u, a_values)
        K = sp.bmat([[J, border], [mean_row, None]], format="csc")
        rhs = np.concatenate([-r.ravel(), [0.0]])
        try:
            delta = splu(K).solve(rhs)
        except RuntimeError as exc:
            raise _NewtonFailure(f"singular Newton system: {exc}") from exc
        du = delta[:-1].reshape(problem.shape)
        dc = 0.0 if freeze_c else delta[-1]
        step = 1.0
        while step >= 1.0 / 64:
            u_try = u + step * du
            u_try -= u_try.mean()
            c_try = c + step * dc
            try:
                if problem.min_hessian_eig(u_try) <= DEGENERATE_EIG:
                    raise SingularityError("convexity lost")
                r_try = rho(u_try, c_try)
            except SingularityError:
                step /= 2
                continue
            res_try = float(np.max(np.abs(r_try)))
            if res_try < res or res_try <= tol:
                break
            step /= 2
        else:
            raise _NewtonFailure(f"line search failed at residual {res:.3e}")
        u, c, r, res = u_try, c_try, r_try, res_try
    raise DivergenceError(f"Newton did not converge in {maxiter} iterations (residual {res:.3e})", res)


def solve(
    problem: TorusProblem,
    tol: float = 1e-10,
    maxiter: int = 15,
    start_matrix=None,
    initial_step: float = 1.0,
    min_step: float = 1e-4,
) -> TorusSolution:
    """Continuation from a constant coefficient matrix to a_field.

    Along a_t = (1 - t) Ā + t a(x) the start t = 0 is solved exactly by
    u = 0, c = tr(Ā B⁻¹) (Ā defaults to the grid mean of a). Each stage runs
    Newton from the previous solution; the t-step halves on failure and the
    run aborts below ``min_step``.
    """
    A0 = problem.mean_matrix() if start_matrix is None else np.asarray(start_matrix, dtype=float)
    if A0.shape != (problem.n, problem.n) or np.linalg.eigvalsh(A0).min() <= 0:
        raise DomainError("start matrix must be symmetric positive definite")
    u = np.zeros(problem.shape)
    c = float(problem.trace(u, np.broadcast_to(A0, problem.a_values.shape)).mean())
    t = 0.0
    step = initial_step
    iters: list[int] = []
    stages: list[float] = []
    while t < 1.0:
        t_next = min(1.0, t + step)
        a_t = (1.0 - t_next) * A0 + t_next * problem.a_values
        try:
            u_new, c_new, it, res = _newton(problem, a_t, u, c, tol, maxiter)
        except (_NewtonFailure, DivergenceError) as exc:
            step /= 2
            log.debug("continuation step to t=%.4g failed (%s); halving to %.3g", t_next, exc, step)
            if step < min_step:
                raise ContinuationError(f"continuation stalled at t = {t:.6g}: {exc}") from exc
            continue
        u, c, t = u_new, c_new, t_next
        iters.append(it)
        stages.append(t)
        step = min(2 * step, 1.0)
    return TorusSolution(
        u=u,
        c=c,
        residual_sup=float(np.max(np.abs(residual_field(problem, u, c)))),
        min_hessian_eig=problem.min_hessian_eig(u),
        newton_iters=tuple(iters),
        continuation_steps=tuple(stages),
    )


def forced_newton(problem: TorusProblem, solution: TorusSolution, forcing: float, tol: float = 1e-10, maxiter: int = 15):
    """Newton on Σ a_jk f^{jk} = c + forcing with c frozen at ``solution.c``.

    Non-zero constants are not in the image of L, so any ``forcing`` ≠ 0
    ends in :class:`DivergenceError`; ``forcing = 0`` returns at once.
    """
    try:
        u, _, _, res = _newton(problem, problem.a_values, solution.u, solution.c, tol, maxiter, freeze_c=True, forcing=-forcing)
    except _NewtonFailure as exc:
        raise DivergenceError(f"forced Newton stalled: {exc}", None) from exc
    return u, res


def stable_step(problem: TorusProblem, u: np.ndarray, Hinv: np.ndarray | None = None) -> float:
    """2 / Gershgorin bound of the discrete L at u."""
    if Hinv is None:
        M = _coefficients(problem, u)
    else:
        M = Hinv @ problem.a_values @ Hinv
    diag = sum(M[..., j, j] for j in range(problem.n))
    off = sum(np.abs(M[..., j, k]) for j in range(problem.n) for k in range(problem.n) if j != k)
    radius = (4 * diag + (off if problem.n > 1 else 0)) / problem.h**2
    return float(2.0 / np.max(radius))


def flow(
    problem: TorusProblem,
    dt: float | None = None,
    horizon: float = 50.0,
    tol: float = 1e-9,
    cfl: float = 0.9,
    u0: np.ndarray | None = None,
    bound_every: int = 10,
) -> TorusSolution:
    """∂u/∂t = c(t) - Σ a_jk f^{jk}, c(t) the spatial mean of the trace.

    The right-hand side has zero mean, so mean(u) is preserved. Stops once
    the sup residual is at most ``tol``; ``history`` holds it per step. The
    stability bound is refreshed every ``bound_every`` steps.
    """
    u = np.zeros(problem.shape) if u0 is None else np.array(u0, dtype=float)
    u -= u.mean()
    t = 0.0
    history = []
    bound = None
    steps = 0
    while True:
        try:
            Hinv = problem.inverse_hessian(u, require_convex=True)
        except SingularityError as exc:
            raise SingularityError(f"{exc} at t = {t:g}", time=t) from exc
        T = problem.trace(u, Hinv=Hinv)
        c = float(T.mean())
        rho = c - T
        res = float(np.max(np.abs(rho)))
        history.append(res)
        if res <= tol:
            break
        if t >= horizon:
            raise DivergenceError(f"flow did not reach tol {tol:g} by t = {horizon:g}", res)
        if bound is None or steps % bound_every == 0:
            bound = stable_step(problem, u, Hinv)
        if dt is None:
            step = cfl * bound
        elif dt > bound:
            raise StepSizeError(f"dt = {dt:g} exceeds the stability bound {bound:g}")
        else:
            step = dt
        u = u + step * rho
        u -= u.mean()
        t += step
        steps += 1
    return TorusSolution(
        u=u,
        c=c,
        residual_sup=res,
        min_hessian_eig=problem.min_hessian_eig(u),
        history=tuple(history),
    )
