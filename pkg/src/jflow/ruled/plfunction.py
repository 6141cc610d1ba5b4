"""Piecewise-linear test-configurations on the moment interval [1, b].

A convex, non-increasing rational PL function h that is constant near b
defines a test-configuration χ_h (deformation to the normal cone of a scheme
supported on E_0). Its invariants are exact piecewise-polynomial integrals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from scipy.linalg import cholesky_banded

from jflow.cohomology import as_fraction
from jflow.errors import ConstraintError, DomainError
from jflow.ruled.analysis import RuledParams


def _power_diff(t0: Fraction, t1: Fraction, m: int) -> Fraction:
    return (t1**m - t0**m) / m


def _integrate_poly(coeffs: Sequence[Fraction], t0: Fraction, t1: Fraction) -> Fraction:
    """∫_{t0}^{t1} Σ coeffs[j] τ^j dτ."""
    return sum((c * _power_diff(t0, t1, j + 1) for j, c in enumerate(coeffs) if c), Fraction(0))


@dataclass(frozen=True)
class PLFunction:
    """Rational PL profile given by its values at increasing breakpoints.

    Construction asserts the three admissibility flags: convex (slopes
    non-decreasing), non-increasing (slopes ≤ 0) and constant near b (last
    slope exactly 0).
    """

    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]

    def __post_init__(self):
        knots = tuple(as_fraction(t) for t in self.breakpoints)
        vals = tuple(as_fraction(v) for v in self.values)
        if len(knots) != len(vals):
            raise DomainError("breakpoints and values differ in length")
        if len(knots) < 2:
            raise DomainError("a PL function needs at least two breakpoints")
        if any(t1 <= t0 for t0, t1 in zip(knots, knots[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", knots)
        object.__setattr__(self, "values", vals)
        slopes = self.slopes
        if any(s1 < s0 for s0, s1 in zip(slopes, slopes[1:])):
            raise ConstraintError("h is not convex")
        if any(s > 0 for s in slopes):
            raise ConstraintError("h is not non-increasing")
        if slopes[-1] != 0:
            raise ConstraintError("h is not constant-near-b")

    @property
    def slopes(self) -> tuple[Fraction, ...]:
        t, v = self.breakpoints, self.values
        return tuple((v[i + 1] - v[i]) / (t[i + 1] - t[i]) for i in range(len(t) - 1))

    def segments(self) -> Iterable[tuple[Fraction, Fraction, Fraction, Fraction]]:
        """Yield (t0, t1, A, S) with h = A + S τ on [t0, t1]."""
        t, v = self.breakpoints, self.values
        for i, s in enumerate(self.slopes):
            yield t[i], t[i + 1], v[i] - s * t[i], s

    def shifted(self, constant) -> "PLFunction":
        k = as_fraction(constant)
        return PLFunction(self.breakpoints, tuple(v + k for v in self.values))

    def __call__(self, tau):
        return np.interp(tau, [float(t) for t in self.breakpoints], [float(v) for v in self.values])


@dataclass(frozen=True)
class PLInvariants:
    b0: Fraction
    b0_prime: Fraction
    norm_sq: Fraction
    futaki: Fraction
    mean: Fraction

    @property
    def ratio(self) -> float:
        """-F_α / ‖χ‖, or 0 for a trivial (constant) profile."""
        if self.norm_sq == 0:
            return 0.0
        return float(-self.futaki) / math.sqrt(self.norm_sq)


def pl_invariants(params: RuledParams, h: PLFunction) -> PLInvariants:
    """Exact b0, b0', ‖χ‖² and F_α = b0' - c b0 of the test-configuration χ_h.

    b0 = -∫ h τ²/2, b0' = -∫ h τ - (a-1) b²/2 h(b), and ‖χ‖² = ∫ h̄² τ²/2 with
    h̄ the τ²/2-weighted mean-zero part of h.
    """
    params.require_exact()
    a, b, c = params.a, params.b, params.c
    if h.breakpoints[0] != 1 or h.breakpoints[-1] != b:
        raise DomainError(f"h must be defined on [1, {b}]")
    int_h_w = Fraction(0)
    int_h_tau = Fraction(0)
    int_h2_w = Fraction(0)
    for t0, t1, A, S in h.segments():
        int_h_w += _integrate_poly((0, 0, A / 2, S / 2), t0, t1)
        int_h_tau += _integrate_poly((0, A, S), t0, t1)
        int_h2_w += _integrate_poly((0, 0, A * A / 2, A * S, S * S / 2), t0, t1)
    volume = params.volume
    mean = int_h_w / volume
    b0 = -int_h_w
    b0_prime = -int_h_tau - (a - 1) * b * b / 2 * h.values[-1]
    return PLInvariants(
        b0=b0,
        b0_prime=b0_prime,
        norm_sq=int_h2_w - mean * int_h_w,
        futaki=b0_prime - c * b0,
        mean=mean,
    )


def dyadic_knots(params: RuledParams, level: int) -> list[Fraction]:
    params.require_exact()
    m = 2**level
    return [1 + (params.b - 1) * Fraction(i, m) for i in range(m + 1)]


def _hat_system(params: RuledParams, knots: Sequence[Fraction]):
    """Exact linear form -F_α and weighted Gram matrix in the hat basis."""
    a, b, c = params.a, params.b, params.c
    n = len(knots)
    lin = [Fraction(0)] * n
    wsum = [Fraction(0)] * n
    diag = [Fraction(0)] * n
    off = [Fraction(0)] * (n - 1)
    for i in range(n - 1):
        t0, t1 = knots[i], knots[i + 1]
        d = t1 - t0
        left = (t1 / d, -1 / d)
        right = (-t0 / d, 1 / d)
        for j, (A, S) in ((i, left), (i + 1, right)):
            lin[j] += _integrate_poly((0, A, S), t0, t1) - c * _integrate_poly((0, 0, A / 2, S / 2), t0, t1)
            wsum[j] += _integrate_poly((0, 0, A / 2, S / 2), t0, t1)
        (A1, S1), (A2, S2) = left, right
        diag[i] += _integrate_poly((0, 0, A1 * A1 / 2, A1 * S1, S1 * S1 / 2), t0, t1)
        diag[i + 1] += _integrate_poly((0, 0, A2 * A2 / 2, A2 * S2, S2 * S2 / 2), t0, t1)
        off[i] += _integrate_poly((0, 0, A1 * A2 / 2, (A1 * S2 + A2 * S1) / 2, S1 * S2 / 2), t0, t1)
    lin[-1] += (a - 1) * b * b / 2
    to_f = lambda xs: np.array([float(x) for x in xs])
    return to_f(lin), to_f(wsum), to_f(diag), to_f(off)


def _float_ratio(v: np.ndarray, lin, wsum, diag, off) -> float:
    vb = v - (wsum @ v) / wsum.sum()
    quad_form = diag @ (vb * vb) + 2 * off @ (vb[:-1] * vb[1:])
    if quad_form <= 0:
        return 0.0
    return float(lin @ v) / math.sqrt(quad_form)


def _admissible_from(v: np.ndarray) -> np.ndarray:
    """Clip second differences at zero and rebuild with a flat last cell."""
    curvature = np.clip(v[:-2] - 2 * v[1:-1] + v[2:], 0.0, None)
    steps = np.zeros(len(v) - 1)
    steps[:-1] = -np.cumsum(curvature[::-1])[::-1]
    return np.concatenate([[0.0], np.cumsum(steps)])


def _optimize_level(lin, wsum, diag, off, spacing: float) -> np.ndarray:
    n = len(lin)
    # W = Rᵀ R with R upper bidiagonal.
    banded = np.zeros((2, n))
    banded[0, 1:] = off
    banded[1] = diag
    chol = cholesky_banded(banded)
    R = sp.diags([chol[1], chol[0, 1:]], [0, 1], format="csc")
    v = cp.Variable(n)
    shift = cp.Variable()
    constraints = [
        cp.norm(R @ (v - shift)) <= 1,
        v[n - 1] == v[n - 2],
        (v[:-2] - 2 * v[1:-1] + v[2:]) / spacing**2 >= 0,
    ]
    cp.Problem(cp.Maximize(lin @ v), constraints).solve(solver="CLARABEL")
    if v.value is None:
        return np.zeros(n)
    return _admissible_from(np.asarray(v.value))


def sup_ratio(params: RuledParams, levels: Iterable[int]) -> list[float]:
    """Lower bounds sup -F_α(χ_h)/‖χ_h‖ over nested dyadic PL families.

    Level L ranges over admissible h with breakpoints 1 + (b-1) i / 2^L.
    Every reported value is the ratio of an exactly admissible profile, and
    the optimum of the previous level is carried to the next (the families
    are nested), so the sequence is non-decreasing. Constant profiles give
    the trivial bound 0.
    """
    params.require_exact()
    results: list[float] = []
    best = 0.0
    previous: tuple[list[Fraction], np.ndarray] | None = None
    for level in sorted(levels):
        knots = dyadic_knots(params, level)
        lin, wsum, diag, off = _hat_system(params, knots)
        v = _optimize_level(lin, wsum, diag, off, float(knots[1] - knots[0]))
        value = _float_ratio(v, lin, wsum, diag, off)
        if previous is not None:
            coarse_knots, coarse_v = previous
            carried = np.interp([float(t) for t in knots], [float(t) for t in coarse_knots], coarse_v)
            carried_value = _float_ratio(carried, lin, wsum, diag, off)
            if carried_value > value:
                value, v = carried_value, carried
        best = max(best, value)
        results.append(best)
        previous = (knots, v)
    return results
