"""Calabi-ansatz analysis of the J-equation on Bl_p P^3.

With ω ∈ b[E_∞] - [E_0] and α ∈ a[E_∞] - [E_0] (a, b > 1) and the moment
coordinate τ = g'(s) ∈ [1, b], the trace becomes Λ_ω α = F'(τ) + 2F(τ)/τ where
F(g'(s)) = f'(s), and the volume form of ω is τ²/2 dτ.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from jflow.cohomology import as_fraction
from jflow.errors import DomainError, NoDestabilizerError

SMOOTH = "smooth"
CONICAL = "conical"
CURRENT = "current"

THRESHOLD = Fraction(2, 3)


def _coerce(value):
    if isinstance(value, float):
        return value
    return as_fraction(value)


@dataclass(frozen=True)
class RuledParams:
    """Kähler class parameters a, b > 1.

    Rationals (ints, Fractions, "p/q") keep the exact operations available;
    floats are accepted for the numerical analysis only.
    """

    a: Fraction | float
    b: Fraction | float

    def __post_init__(self):
        a, b = _coerce(self.a), _coerce(self.b)
        if not a > 1:
            raise DomainError(f"the ruled example requires a > 1, got a = {a}")
        if not b > 1:
            raise DomainError(f"the ruled example requires b > 1, got b = {b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def exact(self) -> bool:
        return isinstance(self.a, Fraction) and isinstance(self.b, Fraction)

    def require_exact(self):
        if not self.exact:
            raise TypeError("this operation needs rational a and b")

    @property
    def ratio(self):
        a, b = self.a, self.b
        return (a * b * b - 1) / (b**3 - 1)

    @property
    def c(self):
        return 3 * self.ratio

    @property
    def volume(self):
        """∫_M ω^3/3! = (b^3 - 1)/6."""
        return (self.b**3 - 1) / 6


@dataclass(frozen=True)
class RuledAnalysis:
    params: RuledParams
    c: Fraction | float
    ratio: Fraction | float
    case: str
    lam: float | None = None
    defect_l2: float | None = None


def _case_of(ratio) -> str:
    if ratio > THRESHOLD:
        return SMOOTH
    if ratio == THRESHOLD:
        return CONICAL
    return CURRENT


def classify(params: RuledParams) -> RuledAnalysis:
    """Exact c, ratio (ab²-1)/(b³-1) and case; λ and the defect are left empty."""
    ratio = params.ratio
    return RuledAnalysis(params=params, c=3 * ratio, ratio=ratio, case=_case_of(ratio))


def analyze(params: RuledParams) -> RuledAnalysis:
    base = classify(params)
    lam = solve_lambda(params) if base.case == CURRENT else None
    return RuledAnalysis(
        params=params, c=base.c, ratio=base.ratio, case=base.case, lam=lam, defect_l2=defect_l2(params)
    )


@dataclass(frozen=True)
class RemarkCheck:
    margin_e0: Fraction
    critical_class: tuple[Fraction, Fraction]
    kahler: bool


def remark_check(params: RuledParams) -> RemarkCheck:
    """Slope margin of E_0 versus the Kähler property of [cω - α].

    cω - α = (cb - a)H - (c - 1)E, and xH - yE is Kähler on Bl_p P^3 iff
    x > y > 0. For (a, b) = (5, 10) the class is Kähler while E_0
    destabilizes.
    """
    params.require_exact()
    c = params.c
    x, y = c * params.b - params.a, c - 1
    return RemarkCheck(margin_e0=c - 2, critical_class=(x, y), kahler=x > y > 0)


def lambda_cubic(lam, params: RuledParams):
    """λ³ - 3ab²λ + 2b³: zero exactly when G(λ) = 1, G'(λ) = 0 and G(b) = a."""
    a, b = float(params.a), float(params.b)
    return lam**3 - 3 * a * b * b * lam + 2 * b**3


def shoot(lam: float, params: RuledParams, rtol: float = 1e-13) -> float:
    """G(b) - a for the solution of G' + 2G/τ = 2/λ with G(λ) = 1."""
    b = float(params.b)
    if lam >= b:
        return 1.0 - float(params.a)
    sol = solve_ivp(
        lambda t, y: 2.0 / lam - 2.0 * y / t,
        (lam, b),
        [1.0],
        method="DOP853",
        rtol=rtol,
        atol=1e-15,
    )
    return float(sol.y[0, -1]) - float(params.a)


def solve_lambda(params: RuledParams, xtol: float = 1e-13) -> float:
    """Left edge λ of the non-flat part of the limiting profile F_∞.

    Found by bracketing the shooting mismatch on (1, b); the mismatch is
    positive at 1 in the current case and equals 1 - a < 0 at b.
    """
    case = classify(params).case
    if case == CONICAL:
        return 1.0
    if case != CURRENT:
        raise NoDestabilizerError(f"case {case}: the flow converges and there is no λ")
    b = float(params.b)
    return brentq(shoot, 1.0, b, args=(params,), xtol=xtol, rtol=4 * np.finfo(float).eps)


def lambda_closed_form(params: RuledParams) -> float:
    """Root of the cubic on [1, b] by bisection; an independent validator for :func:`solve_lambda`."""
    b = float(params.b)
    return brentq(lambda x: lambda_cubic(x, params), 1.0, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class Profile:
    """Samples of F on an increasing τ-grid inside [1, b]."""

    tau: np.ndarray
    F: np.ndarray

    def trace(self) -> np.ndarray:
        """Λ = F' + 2F/τ by second-order finite differences."""
        return np.gradient(self.F, self.tau, edge_order=2) + 2 * self.F / self.tau


def _check_grid(grid, b: float) -> np.ndarray:
    tau = np.asarray(grid, dtype=float)
    if tau.ndim != 1 or tau.size < 2:
        raise DomainError("grid must be a 1-d array with at least two points")
    if np.any(np.diff(tau) <= 0):
        raise DomainError("grid must be strictly increasing")
    if tau[0] < 1 - 1e-12 or tau[-1] > b + 1e-12:
        raise DomainError(f"grid must lie inside [1, {b}]")
    return tau


def limit_profile(params: RuledParams, grid=None, num: int = 401) -> Profile:
    """The limit of F_t along the J-flow.

    Current case: F_∞ = 1 on [1, λ] and G(τ) = λ²/(3τ²) + 2τ/(3λ) on [λ, b].
    Otherwise the smooth (or conical) critical profile F = cτ/3 + C/τ², which
    solves F' + 2F/τ = c with F(b) = a (and automatically F(1) = 1).
    """
    b = float(params.b)
    tau = _check_grid(np.linspace(1.0, b, num) if grid is None else grid, b)
    info = classify(params)
    if info.case == CURRENT:
        lam = solve_lambda(params)
        F = np.where(tau <= lam, 1.0, lam**2 / (3 * tau**2) + 2 * tau / (3 * lam))
    else:
        c, a = float(info.c), float(params.a)
        C = a * b * b - c * b**3 / 3
        F = c * tau / 3 + C / tau**2
    return Profile(tau=tau, F=F)


@dataclass(frozen=True)
class Destabilizer:
    """h = F_∞' + 2F_∞/τ - c: 2/τ - c on [1, λ], 2/λ - c on [λ, b].

    Convex, non-increasing and constant on [λ, b]; its τ²/2-weighted mean is
    zero because c is the average trace.
    """

    params: RuledParams
    lam: float
    c: Fraction | float

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        c = float(self.c)
        return np.where(tau <= self.lam, 2 / tau - c, 2 / self.lam - c)

    def weighted_mean(self) -> float:
        return weighted_integral(self, self.params, power=2, points=[self.lam]) / float(self.params.volume)

    def rational_knots(self, max_denominator: int = 10**9) -> Fraction:
        """A rational stand-in for λ, used to build exact PL approximations."""
        if self.lam == 1.0:
            return Fraction(1)
        return Fraction(self.lam).limit_denominator(max_denominator)

    def pl_approximation(self, level: int):
        """Rational PL interpolant with 2**level segments on [1, λ_q] and a flat tail.

        Nodes lie on the convex curve 2/τ - c, so the interpolant is exactly
        convex; the tail [λ_q, b] carries the value at λ_q.
        """
        from jflow.ruled.plfunction import PLFunction

        self.params.require_exact()
        b, c = self.params.b, Fraction(self.c)
        lam_q = self.rational_knots()
        if lam_q == 1:
            return PLFunction((Fraction(1), b), (2 - c, 2 - c))
        m = 2**level
        knots = [1 + (lam_q - 1) * Fraction(i, m) for i in range(m + 1)]
        values = [2 / t - c for t in knots]
        if lam_q < b:
            knots.append(b)
            values.append(values[-1])
        return PLFunction(tuple(knots), tuple(values))


def destabilizer(params: RuledParams) -> Destabilizer:
    case = classify(params).case
    if case == SMOOTH:
        raise NoDestabilizerError("smooth case: no destabilizing profile")
    return Destabilizer(params=params, lam=solve_lambda(params), c=params.c)


def weighted_integral(fn: Callable, params: RuledParams, power: int, points=()) -> float:
    """∫_1^b fn(τ) τ^power (1/2 if power == 2 else 1) dτ by adaptive quadrature."""
    b = float(params.b)
    scale = 0.5 if power == 2 else 1.0
    cuts = [1.0] + sorted(p for p in points if 1.0 < p < b) + [b]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = quad(lambda t: float(fn(t)) * t**power * scale, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)
        total += val
    return total


def futaki_smooth(params: RuledParams, fn: Callable, points=()) -> float:
    """F_α = b0' - c b0 for a profile h given as a function, by quadrature.

    b0 = -∫ h τ²/2, b0' = -∫ h τ - (a - 1) b²/2 h(b).
    """
    a, b, c = float(params.a), float(params.b), float(params.c)
    b0 = -weighted_integral(fn, params, 2, points)
    b0p = -weighted_integral(fn, params, 1, points) - (a - 1) * b * b / 2 * float(fn(b))
    return b0p - c * b0


def defect_l2(params: RuledParams) -> float:
    """(∫_1^b [F_∞' + 2F_∞/τ - c]² τ²/2 dτ)^(1/2); zero unless the case is current."""
    if classify(params).case != CURRENT:
        return 0.0
    lam = solve_lambda(params)
    c, b = float(params.c), float(params.b)

    def primitive(t):
        # ∫ (2/t - c)² t²/2 dt
        return 2 * t - c * t * t + c * c * t**3 / 6

    head = primitive(lam) - primitive(1.0)
    tail = (2 / lam - c) ** 2 * (b**3 - lam**3) / 6
    return math.sqrt(head + tail)
