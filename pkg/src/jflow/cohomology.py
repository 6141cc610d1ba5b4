"""Exact intersection theory on a finite basis of (1,1)-classes.

Everything here works over :class:`fractions.Fraction`; slope verdicts are sign
decisions and must not be exposed to rounding.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from numbers import Rational
from typing import Iterable, Mapping, Sequence

from jflow.errors import DegeneracyError, DimensionError, DomainError, UnsupportedDimensionError

__all__ = [
    "as_fraction",
    "IntersectionSpace",
    "ClassVector",
    "SubvarietyClass",
    "integrate",
    "average_constant",
    "surface_is_kahler",
    "blowup_p3",
    "blowup_p2",
]


def as_fraction(value) -> Fraction:
    """Convert an int, Fraction or ``"p/q"`` string to a Fraction.

    Floats are refused: a binary float silently turns ``0.1`` into a huge
    dyadic rational, which is never what an exact computation wants.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {value!r}") from exc
    raise TypeError(f"exact arithmetic needs an int, Fraction or 'p/q' string, got {type(value).__name__}")


def _sorted_key(index: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(index))


@dataclass(frozen=True)
class ClassVector:
    """Rational coordinates of a (1,1)-class in a fixed basis."""

    coefficients: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(as_fraction(c) for c in self.coefficients))
        if not self.coefficients:
            raise DimensionError("a class vector needs at least one coefficient")

    def __len__(self):
        return len(self.coefficients)

    def __iter__(self):
        return iter(self.coefficients)

    def __getitem__(self, i):
        return self.coefficients[i]

    def _check(self, other: "ClassVector"):
        if len(other) != len(self):
            raise DimensionError(f"class vectors of length {len(self)} and {len(other)}")

    def __add__(self, other: "ClassVector") -> "ClassVector":
        self._check(other)
        return ClassVector(tuple(x + y for x, y in zip(self, other)))

    def __sub__(self, other: "ClassVector") -> "ClassVector":
        self._check(other)
        return ClassVector(tuple(x - y for x, y in zip(self, other)))

    def __neg__(self) -> "ClassVector":
        return ClassVector(tuple(-x for x in self))

    def __mul__(self, scalar) -> "ClassVector":
        s = as_fraction(scalar)
        return ClassVector(tuple(s * x for x in self))

    __rmul__ = __mul__

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.coefficients) + ")"


def _multilinear(tensor: Mapping[tuple[int, ...], Fraction], classes: Sequence[ClassVector], size: int) -> Fraction:
    # Skip zero coefficients; the basis is tiny so the full product is cheap.
    supports = [[(i, c) for i, c in enumerate(v) if c] for v in classes]
    total = Fraction(0)
    for combo in itertools.product(*supports):
        value = tensor.get(_sorted_key(i for i, _ in combo))
        if not value:
            continue
        prod = value
        for _, c in combo:
            prod *= c
        total += prod
    return total


def _normalize_tensor(entries: Mapping, order: int, size: int, what: str) -> dict[tuple[int, ...], Fraction]:
    tensor: dict[tuple[int, ...], Fraction] = {}
    for raw_key, raw_value in entries.items():
        key = _sorted_key(raw_key)
        if len(key) != order:
            raise DimensionError(f"{what} entry {raw_key} has {len(key)} indices, expected {order}")
        if any(i < 0 or i >= size for i in key):
            raise DimensionError(f"{what} entry {raw_key} refers to a basis index outside 0..{size - 1}")
        value = as_fraction(raw_value)
        if key in tensor and tensor[key] != value:
            raise DimensionError(f"{what} entry {key} given twice with different values")
        if value:
            tensor[key] = value
    return tensor


@dataclass(frozen=True)
class IntersectionSpace:
    """Basis of (1,1)-classes with a fully symmetric intersection tensor.

    ``tensor`` maps index tuples (any order) to rationals; entries are stored
    under their sorted key so symmetry holds by construction. Missing entries
    are zero.
    """

    dimension: int
    basis_labels: tuple[str, ...]
    tensor: Mapping[tuple[int, ...], Fraction] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise DimensionError("dimension must be a positive integer")
        labels = tuple(self.basis_labels)
        if not labels:
            raise DimensionError("basis must be non-empty")
        if len(set(labels)) != len(labels):
            raise DimensionError("basis labels must be distinct")
        object.__setattr__(self, "basis_labels", labels)
        object.__setattr__(
            self, "tensor", _normalize_tensor(self.tensor, self.dimension, len(labels), "intersection tensor")
        )

    @property
    def size(self) -> int:
        return len(self.basis_labels)

    def entry(self, *index: int) -> Fraction:
        return self.tensor.get(_sorted_key(index), Fraction(0))

    def vector(self, *coefficients) -> ClassVector:
        if len(coefficients) != self.size:
            raise DimensionError(f"expected {self.size} coefficients, got {len(coefficients)}")
        return ClassVector(tuple(coefficients))

    def basis_vector(self, label: str) -> ClassVector:
        i = self.basis_labels.index(label)
        return ClassVector(tuple(Fraction(int(j == i)) for j in range(self.size)))

    def check(self, v: ClassVector) -> None:
        if len(v) != self.size:
            raise DimensionError(f"class has {len(v)} coefficients but the basis has {self.size}")


@dataclass(frozen=True)
class SubvarietyClass:
    """A p-dimensional cycle, seen only through its pairing with (1,1)-classes.

    The caller is responsible for the cycle being represented by an actual
    subvariety; nothing here certifies that.
    """

    name: str
    dim: int
    size: int
    tensor: Mapping[tuple[int, ...], Fraction] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 0:
            raise DimensionError("subvariety dimension must be non-negative")
        object.__setattr__(self, "tensor", _normalize_tensor(self.tensor, self.dim, self.size, f"pairing of {self.name}"))

    def pair(self, classes: Sequence[ClassVector]) -> Fraction:
        """Return ∫_V c_1 ∧ ... ∧ c_p."""
        if len(classes) != self.dim:
            raise DimensionError(f"{self.name} has dimension {self.dim}, got {len(classes)} classes")
        for v in classes:
            if len(v) != self.size:
                raise DimensionError(f"class has {len(v)} coefficients but the basis has {self.size}")
        if self.dim == 0:
            return self.tensor.get((), Fraction(0))
        return _multilinear(self.tensor, classes, self.size)

    @classmethod
    def complete_intersection(cls, space: IntersectionSpace, divisors: Sequence[ClassVector], name: str) -> "SubvarietyClass":
        """Cycle class of D_1 ∩ ... ∩ D_r, pairing through the ambient tensor."""
        for d in divisors:
            space.check(d)
        p = space.dimension - len(divisors)
        if p < 0:
            raise DimensionError("more divisors than the ambient dimension")
        entries = {}
        for idx in itertools.combinations_with_replacement(range(space.size), p):
            basis = [space.basis_vector(space.basis_labels[i]) for i in idx]
            value = integrate(space, list(divisors) + basis)
            if value:
                entries[idx] = value
        return cls(name=name, dim=p, size=space.size, tensor=entries)

    @classmethod
    def divisor(cls, space: IntersectionSpace, divisor: ClassVector, name: str) -> "SubvarietyClass":
        return cls.complete_intersection(space, [divisor], name)

    @classmethod
    def whole(cls, space: IntersectionSpace, name: str = "M") -> "SubvarietyClass":
        return cls(name=name, dim=space.dimension, size=space.size, tensor=dict(space.tensor))


def integrate(space: IntersectionSpace, classes: Sequence[ClassVector]) -> Fraction:
    """Exact intersection number ∫_M c_1 ∧ ... ∧ c_n.

    >>> X = blowup_p3()
    >>> w = X.vector(10, -1)
    >>> integrate(X, [w, w, w])
    Fraction(999, 1)
    """
    if len(classes) != space.dimension:
        raise DimensionError(f"need {space.dimension} classes, got {len(classes)}")
    for v in classes:
        space.check(v)
    return _multilinear(space.tensor, classes, space.size)


def average_constant(space: IntersectionSpace, alpha: ClassVector, omega: ClassVector, k: int = 1) -> Fraction:
    """The constant c = binom(n,k) ∫ α^k ∧ ω^(n-k) / ∫ ω^n.

    For k = 1 this is the average of Λ_ω α over M.
    """
    n = space.dimension
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in 1..{n}, got {k}")
    volume = integrate(space, [omega] * n)
    if volume == 0:
        raise DegeneracyError("∫ ω^n vanishes; the average is undefined")
    return comb(n, k) * integrate(space, [alpha] * k + [omega] * (n - k)) / volume


def surface_is_kahler(space: IntersectionSpace, cls: ClassVector, curve_generators: Sequence[SubvarietyClass]) -> bool:
    """Nakai-Moishezon on a surface, relative to a supplied set of curves.

    True iff ``cls`` has positive square and pairs positively with every
    generator. The verdict is only as good as the generator list: the caller
    asserts it generates the cone of curves.
    """
    if space.dimension != 2:
        raise UnsupportedDimensionError("Kähler test is only implemented for surfaces (n = 2)")
    if not curve_generators:
        raise DomainError("need at least one curve generator")
    space.check(cls)
    if integrate(space, [cls, cls]) <= 0:
        return False
    for curve in curve_generators:
        if curve.dim != 1:
            raise DimensionError(f"{curve.name} is not a curve")
        if curve.pair([cls]) <= 0:
            return False
    return True


def blowup_p3() -> IntersectionSpace:
    """Bl_p P^3 in the basis (H, E).

    H is the pullback of a hyperplane (the class of the infinity section
    E_∞) and E the exceptional divisor E_0. Non-zero entries: H^3 = 1,
    E^3 = 1. These are the values for which (bH - E)^3 = b^3 - 1 and
    (aH - E)(bH - E)^2 = ab^2 - 1, so that c = 3(ab^2-1)/(b^3-1), and for
    which restriction to E_0 ≅ P^2 gives ∫_{E_0} cω^2 - 2ω∧α = c - 2.
    """
    return IntersectionSpace(3, ("H", "E"), {(0, 0, 0): 1, (1, 1, 1): 1}, name="Bl_p P^3")


def blowup_p2() -> IntersectionSpace:
    """Bl_p P^2 in the basis (H, E) with H^2 = 1, E^2 = -1, H.E = 0."""
    return IntersectionSpace(2, ("H", "E"), {(0, 0): 1, (1, 1): -1}, name="Bl_p P^2")
