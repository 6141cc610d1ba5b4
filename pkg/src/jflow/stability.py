"""Slope margins, normal-cone invariants and existence verdicts."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Sequence

from jflow.cohomology import (
    ClassVector,
    IntersectionSpace,
    SubvarietyClass,
    as_fraction,
    average_constant,
    integrate,
    surface_is_kahler,
)
from jflow.errors import DimensionError, DomainError, UnsupportedDimensionError

ALL_POSITIVE = "all-positive"
DESTABILIZED = "destabilized"


@dataclass(frozen=True)
class SlopeRecord:
    name: str
    dim: int
    margin: Fraction


@dataclass(frozen=True)
class SlopeReport:
    """Margins of one (ω, α) pair against a list of subvarieties.

    A margin of exactly zero counts as destabilizing (strict positivity is
    required) and is also listed in ``boundary``.
    """

    c: Fraction
    dimension: int
    k: int
    records: tuple[SlopeRecord, ...] = ()
    verdict: str = ALL_POSITIVE
    worst_subvariety: str | None = None
    boundary: tuple[str, ...] = field(default=())

    @property
    def worst_margin(self) -> Fraction | None:
        for r in self.records:
            if r.name == self.worst_subvariety:
                return r.margin
        return None

    def summary(self) -> str:
        if self.verdict == DESTABILIZED:
            text = f"destabilized by {self.worst_subvariety} (margin {self.worst_margin})"
            if self.boundary:
                text += "; semistable boundary: " + ", ".join(self.boundary)
            return text
        # Outside surfaces a positive list is not known to imply existence.
        return "no destabilizer found among supplied subvarieties"


@dataclass(frozen=True)
class NormalConeParams:
    kappa: Fraction
    subvariety: SubvarietyClass

    def __post_init__(self):
        kappa = as_fraction(self.kappa)
        if kappa <= 0:
            raise DomainError("κ must be positive")
        object.__setattr__(self, "kappa", kappa)


@dataclass(frozen=True)
class NormalConeNumbers:
    """Leading coefficients a0, a0', b0, b0' of deformation to the normal cone."""

    a0: Fraction
    a0_prime: Fraction
    b0: Fraction
    b0_prime: Fraction

    @property
    def c(self) -> Fraction:
        return self.a0_prime / self.a0

    @property
    def futaki(self) -> Fraction:
        return self.b0_prime - self.c * self.b0


def slope_margin(
    space: IntersectionSpace,
    omega: ClassVector,
    alpha: ClassVector,
    subvariety: SubvarietyClass,
    k: int = 1,
) -> Fraction:
    """∫_V c ω^p - binom(p, k) ω^(p-k) ∧ α^k with c = average_constant(α, ω, k)."""
    space.check(omega)
    space.check(alpha)
    p = subvariety.dim
    n = space.dimension
    if subvariety.size != space.size:
        raise DimensionError(f"{subvariety.name} lives over a basis of size {subvariety.size}")
    if p > n:
        raise DimensionError(f"{subvariety.name} has dimension {p} > {n}")
    if p < k:
        raise DomainError(
            f"{subvariety.name} has dimension {p} < k = {k}; it misses a generic intersection of "
            f"{k} divisors in the class of α, so no slope condition applies"
        )
    c = average_constant(space, alpha, omega, k)
    return c * subvariety.pair([omega] * p) - comb(p, k) * subvariety.pair([omega] * (p - k) + [alpha] * k)


def check_stability(
    space: IntersectionSpace,
    omega: ClassVector,
    alpha: ClassVector,
    subvarieties: Sequence[SubvarietyClass],
    k: int = 1,
) -> SlopeReport:
    c = average_constant(space, alpha, omega, k)
    if k == space.dimension:
        # Prescribed volume form: no slope condition at all.
        return SlopeReport(c=c, dimension=space.dimension, k=k)
    if not subvarieties:
        raise DomainError("need at least one subvariety")
    records = tuple(
        SlopeRecord(V.name, V.dim, slope_margin(space, omega, alpha, V, k)) for V in subvarieties
    )
    worst = min(records, key=lambda r: r.margin)
    destabilized = worst.margin <= 0
    return SlopeReport(
        c=c,
        dimension=space.dimension,
        k=k,
        records=records,
        verdict=DESTABILIZED if destabilized else ALL_POSITIVE,
        worst_subvariety=worst.name if destabilized else None,
        boundary=tuple(r.name for r in records if r.margin == 0),
    )


def normal_cone_numbers(
    space: IntersectionSpace, omega: ClassVector, alpha: ClassVector, params: NormalConeParams
) -> NormalConeNumbers:
    """a0, a0', b0, b0' for χ_{V,κ}, from the Hilbert-function expansion."""
    n = space.dimension
    V = params.subvariety
    p = V.dim
    if not 1 <= p < n:
        raise DomainError("deformation to the normal cone needs 0 < dim V < n")
    kappa = params.kappa
    weight = kappa ** (n - p + 1) / factorial(n - p + 1)
    a0 = integrate(space, [omega] * n) / factorial(n)
    a0_prime = integrate(space, [alpha] + [omega] * (n - 1)) / factorial(n - 1)
    b0 = -weight * V.pair([omega] * p) / factorial(p)
    b0_prime = -weight * V.pair([alpha] + [omega] * (p - 1)) / factorial(p - 1)
    return NormalConeNumbers(a0, a0_prime, b0, b0_prime)


def normal_cone_invariant(
    space: IntersectionSpace, omega: ClassVector, alpha: ClassVector, params: NormalConeParams
) -> Fraction:
    """F_α(χ_{V,κ}) = κ^(n-p+1) / (p! (n-p+1)!) · slope margin of V."""
    n = space.dimension
    p = params.subvariety.dim
    if not 1 <= p < n:
        raise DomainError("deformation to the normal cone needs 0 < dim V < n")
    margin = slope_margin(space, omega, alpha, params.subvariety, 1)
    return params.kappa ** (n - p + 1) / (factorial(p) * factorial(n - p + 1)) * margin


@dataclass(frozen=True)
class SurfaceVerdict:
    exists: bool
    report: SlopeReport
    critical_class: ClassVector
    critical_square: Fraction
    alpha_square: Fraction

    def summary(self) -> str:
        if self.exists:
            return "solution exists: [cω - α] is Kähler"
        return f"no solution: {self.report.summary()}"


def surface_existence(
    space: IntersectionSpace,
    omega: ClassVector,
    alpha: ClassVector,
    curve_generators: Sequence[SubvarietyClass],
) -> SurfaceVerdict:
    """Existence on a surface: a solution exists iff [cω - α] is Kähler.

    The per-curve margins ∫_C cω - α are reported alongside; with a
    generating curve list the two verdicts coincide, because
    (cω - α)^2 = α^2 > 0 always.
    """
    if space.dimension != 2:
        raise UnsupportedDimensionError("surface_existence needs n = 2")
    report = check_stability(space, omega, alpha, curve_generators, 1)
    critical = report.c * omega - alpha
    return SurfaceVerdict(
        exists=surface_is_kahler(space, critical, curve_generators),
        report=report,
        critical_class=critical,
        critical_square=integrate(space, [critical, critical]),
        alpha_square=integrate(space, [alpha, alpha]),
    )
