"""Discrete Legendre transform of a torus solution and the dual equation.

With f = ½ xᵀBx + u and y = Bη, the transform g(y) = sup_x (x·y - f(x))
splits as g(Bη) = ½ ηᵀBη + ĝ(η) with ĝ 1-periodic. On the grid x = h m,
η = h j the discrete maximum is an inf-convolution

    ĝ(j) = -min_d [½ h² dᵀBd + u(j + d)],

so the transform and its inverse are the same periodic operation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from jflow.errors import PreconditionError
from jflow.torus.problem import DEGENERATE_EIG, TorusProblem, TorusSolution


@dataclass(frozen=True)
class LegendreResult:
    g_hat: np.ndarray
    gradient: np.ndarray
    residual: float
    double_transform_error: float
    max_hessian_eig: float
    hessian_bound: float


def _offsets(problem: TorusProblem, oscillation: float) -> np.ndarray:
    # ½ h² dᵀBd > osc(P) can never win against d = 0.
    lam = float(np.linalg.eigvalsh(problem.B).min())
    radius = min(int(math.ceil(math.sqrt(2 * oscillation / lam) / problem.h)) + 1, problem.N // 2)
    r = range(-radius, radius + 1)
    return np.array(list(itertools.product(r, repeat=problem.n)), dtype=int)


def inf_convolution(problem: TorusProblem, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Periodic part of the discrete conjugate and the maximizing offset per node."""
    offsets = _offsets(problem, float(P.max() - P.min()))
    best = np.full(problem.shape, np.inf)
    arg = np.zeros(problem.shape + (problem.n,), dtype=int)
    h2 = problem.h**2
    axes = tuple(range(problem.n))
    for d in offsets:
        cost = 0.5 * h2 * float(d @ problem.B @ d)
        cand = cost + np.roll(P, tuple(-d), axis=axes)
        better = cand < best
        best = np.where(better, cand, best)
        arg[better] = d
    return -best, arg


def _gradient(problem: TorusProblem, u: np.ndarray) -> np.ndarray:
    """Fourth-order centered gradient; its error multiplies the O(h) polish step."""
    out = np.empty(problem.shape + (problem.n,))
    for j in range(problem.n):
        def at(k):
            return problem._shift(u, tuple(k if i == j else 0 for i in range(problem.n)))

        out[..., j] = (8 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12 * problem.h)
    return out


def _third_derivatives(problem: TorusProblem, u: np.ndarray) -> np.ndarray:
    """Centered differences of the discrete Hessian, symmetrized."""
    H = problem.hessian(u)
    T = np.empty(problem.shape + (problem.n,) * 3)
    for k in range(problem.n):
        e = tuple(1 if i == k else 0 for i in range(problem.n))
        T[..., k] = (np.roll(H, tuple(-o for o in e), axis=tuple(range(problem.n))) - np.roll(H, e, axis=tuple(range(problem.n)))) / (2 * problem.h)
    return (T + T.transpose(*range(problem.n), problem.n + 1, problem.n + 2, problem.n) + T.transpose(*range(problem.n), problem.n + 2, problem.n, problem.n + 1)) / 3


def transform(problem: TorusProblem, u: np.ndarray):
    """ĝ on the η-grid and ∇g(y) = argmax x, after one polish step.

    The discrete maximizer x_m is refined by one Newton step on the local
    model of f built from centered differences at x_m, with the cubic Taylor
    term folded in to first order.
    """
    n = problem.n
    g_hat, d = inf_convolution(problem, u)
    d = d.reshape(-1, n)
    nodes = np.indices(problem.shape).reshape(n, -1).T
    flat = np.ravel_multi_index(tuple(((nodes + d) % problem.N).T), problem.shape)
    grad_u = _gradient(problem, u).reshape(-1, n)[flat]
    H = problem.hessian(u).reshape(-1, n, n)[flat]
    T = _third_derivatives(problem, u).reshape(-1, n, n, n)[flat]
    # r = y - ∇f(x_m) with y - B x_m = -B h d.
    r = -problem.h * d @ problem.B - grad_u
    step = np.linalg.solve(H, r[..., None])[..., 0]
    Tss = np.einsum("pijk,pj,pk->pi", T, step, step)
    gain = 0.5 * np.einsum("pi,pi->p", r, step) - np.einsum("pi,pi->p", Tss, step) / 6
    step = step - 0.5 * np.linalg.solve(H, Tss[..., None])[..., 0]
    x_star = problem.h * (nodes + d) + step
    return g_hat + gain.reshape(problem.shape), x_star.reshape(problem.shape + (n,))


def legendre_analysis(problem: TorusProblem, solution: TorusSolution) -> LegendreResult:
    """Transform, dual-equation residual, double-transform error and Hessian bound.

    The dual equation is Σ a_jk(∇g(y)) ∂²g/∂y_j∂y_k = c with
    Hess g = B⁻¹ + B⁻¹ (D²ĝ) B⁻¹. A bare discrete max would leave an O(h)
    sawtooth in ĝ; the Newton polish in :func:`transform` brings the
    residual to O(h²). The double transform uses the plain discrete max,
    whose error is also O(h²).
    """
    u = solution.u
    if u.shape != problem.shape:
        raise PreconditionError(f"u has shape {u.shape}, grid is {problem.shape}")
    lowest = problem.min_hessian_eig(u)
    if lowest <= DEGENERATE_EIG:
        raise PreconditionError(f"f is not convex (min Hessian eigenvalue {lowest:.3e})")
    g_hat, x_star = transform(problem, u)
    Hg = problem.B_inv + problem.B_inv @ (problem.hessian(g_hat) - problem.B) @ problem.B_inv
    a = np.asarray(problem.a_field(x_star.reshape(-1, problem.n)), dtype=float).reshape(Hg.shape)
    trace = np.einsum("...jk,...jk->...", a, Hg)
    back, _ = inf_convolution(problem, g_hat)
    lam_a = float(np.linalg.eigvalsh(problem.a_values).min())
    return LegendreResult(
        g_hat=g_hat,
        gradient=x_star,
        residual=float(np.max(np.abs(trace - solution.c))),
        double_transform_error=float(np.max(np.abs(back - u))),
        max_hessian_eig=float(np.linalg.eigvalsh(Hg).max()),
        hessian_bound=solution.c / lam_a,
    )


def legendre_check(problem: TorusProblem, solution: TorusSolution) -> float:
    """Sup residual of the dual equation Σ a_jk(∇g) g_jk = c on the η-grid."""
    return legendre_analysis(problem, solution).residual
