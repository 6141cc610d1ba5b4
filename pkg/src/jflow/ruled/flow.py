"""The J-flow inside the Calabi ansatz, written in the moment coordinate τ.

The potential flow ∂g/∂t = c - Λ at fixed s is equivalent, through the
Legendre transform u(τ) = sτ - g(s), to ∂u/∂t = Λ - c at fixed τ. We evolve
s(τ) = u'(τ), the inverse function of g', so that

    ∂s/∂t = ∂/∂τ Λ,    Λ = τ⁻² (τ² F)',    F(τ) = f'(s(τ)).

On [1, b] the volume form τ²/2 dτ does not move, F(1) = 1 and F(b) = a hold
for every t, and convexity of g is the strict monotonicity of s in τ.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from jflow.errors import DomainError, SingularityError, StepSizeError
from jflow.ruled.analysis import Profile, RuledParams


@dataclass(frozen=True)
class FlowResult:
    times: np.ndarray
    defect: np.ndarray
    profile: Profile
    s: np.ndarray
    steps: int
    final_time: float

    @property
    def final_defect(self) -> float:
        return float(self.defect[-1])


class _Ansatz:
    """Discrete cell-average trace on a uniform τ-grid."""

    def __init__(self, params: RuledParams, cells: int, f_steepness: float):
        if cells < 4:
            raise DomainError("need at least 4 cells")
        self.a = float(params.a)
        self.b = float(params.b)
        self.c = float(params.c)
        self.k = f_steepness
        self.tau = np.linspace(1.0, self.b, cells + 1)
        self.h = self.tau[1] - self.tau[0]
        # Exact cell integrals of τ²/2, so Σ w Λ = (ab²-1)/2 and Σ w = (b³-1)/6.
        self.w = (self.tau[1:] ** 3 - self.tau[:-1] ** 3) / 6
        self.t2 = self.tau**2

    def fprime(self, s):
        return 1.0 + (self.a - 1.0) * expit(self.k * s)

    def fsecond(self, s):
        sig = expit(self.k * s)
        return (self.a - 1.0) * self.k * sig * (1.0 - sig)

    def F(self, s):
        return np.concatenate([[1.0], self.fprime(s), [self.a]])

    def trace(self, s):
        F = self.F(s)
        return (self.t2[1:] * F[1:] - self.t2[:-1] * F[:-1]) / (2 * self.w)

    def rhs(self, lam_cells):
        return (lam_cells[1:] - lam_cells[:-1]) / self.h

    def defect(self, lam_cells) -> float:
        return float(np.sqrt(np.sum(self.w * (lam_cells - self.c) ** 2)))

    def stable_step(self, s) -> float:
        """2 / (Gershgorin bound of the Jacobian of the right-hand side)."""
        d = self.t2[1:-1] * self.fsecond(s) / (2 * self.h)
        inv_w = 1.0 / self.w
        diag = d * (inv_w[:-1] + inv_w[1:])
        lower = np.zeros_like(diag)
        upper = np.zeros_like(diag)
        lower[1:] = d[:-1] * inv_w[1:-1]
        upper[:-1] = d[1:] * inv_w[1:-1]
        radius = float(np.max(diag + lower + upper))
        return np.inf if radius == 0 else 2.0 / radius


def initial_s(params: RuledParams, tau_inner: np.ndarray, g_steepness: float) -> np.ndarray:
    """s(τ) for the initial g' = 1 + (b - 1) / (1 + exp(-g_steepness · s))."""
    b = float(params.b)
    return np.log((tau_inner - 1.0) / (b - tau_inner)) / g_steepness


def flow(
    params: RuledParams,
    cells: int = 128,
    horizon: float = 40.0,
    dt: float | None = None,
    cfl: float = 0.8,
    f_steepness: float = 2.0,
    g_steepness: float = 1.0,
    record_every: int = 1,
    steady_tol: float | None = None,
) -> FlowResult:
    """Run the reduced J-flow and record the L² defect ‖Λ - c‖ over time.

    f' = 1 + (a - 1)/(1 + exp(-f_steepness · s)) is fixed; the limiting
    F-profile does not depend on this choice. With ``dt=None`` the explicit
    step adapts to ``cfl`` times the stability bound; a fixed ``dt`` above the
    bound raises :class:`StepSizeError`. Loss of strict convexity raises
    :class:`SingularityError` carrying the time.
    """
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    model = _Ansatz(params, cells, f_steepness)
    s = initial_s(params, model.tau[1:-1], g_steepness)
    t = 0.0
    steps = 0
    times, defects = [], []
    lam_cells = model.trace(s)
    while True:
        if steps % record_every == 0:
            times.append(t)
            defects.append(model.defect(lam_cells))
        if t >= horizon:
            break
        rate = model.rhs(lam_cells)
        if steady_tol is not None and np.max(np.abs(rate)) < steady_tol:
            break
        bound = model.stable_step(s)
        if dt is None:
            step = cfl * bound
        else:
            if dt > bound:
                raise StepSizeError(f"dt = {dt:g} exceeds the stability bound {bound:g} at t = {t:g}")
            step = dt
        step = min(step, horizon - t)
        s = s + step * rate
        t += step
        steps += 1
        if not np.all(np.isfinite(s)) or np.any(np.diff(s) <= 0):
            raise SingularityError(f"g lost strict convexity at t = {t:g}", time=t)
        lam_cells = model.trace(s)
    if times[-1] != t:
        times.append(t)
        defects.append(model.defect(lam_cells))
    return FlowResult(
        times=np.array(times),
        defect=np.array(defects),
        profile=Profile(tau=model.tau.copy(), F=model.F(s)),
        s=s,
        steps=steps,
        final_time=t,
    )
