"""Periodic, symmetric positive-definite coefficient fields a(x) on [0,1)^n."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2 * np.pi


def _matrix(m, n: int) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(m, dtype=float))
    if arr.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got shape {arr.shape}")
    if not np.allclose(arr, arr.T, rtol=0, atol=1e-14):
        raise ValueError("matrix must be symmetric")
    return arr


def _phase(kind: str, wave: np.ndarray, x: np.ndarray) -> np.ndarray:
    arg = TWO_PI * (x @ wave)
    if kind == "cos":
        return np.cos(arg)
    if kind == "sin":
        return np.sin(arg)
    raise ValueError(f"mode kind must be 'cos' or 'sin', got {kind!r}")


@dataclass(frozen=True)
class ConstantField:
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.broadcast_to(self.matrix, (x.shape[0], self.n, self.n)).copy()

    def scaled(self, amplitude: float) -> "ConstantField":
        return self


@dataclass(frozen=True)
class FourierMode:
    entry: tuple[int, int]
    kind: str
    wave: tuple[int, ...]
    amplitude: float


@dataclass(frozen=True)
class FourierField:
    """a(x) = base + Σ amplitude · trig(2π k·x) on the listed entries.

    Off-diagonal modes are written to both (j, k) and (k, j).
    """

    base: np.ndarray
    modes: Sequence[FourierMode] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.base.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.broadcast_to(self.base, (x.shape[0], self.n, self.n)).copy()
        for mode in self.modes:
            j, k = mode.entry
            value = _phase(mode.kind, np.asarray(mode.wave, dtype=float), x)
            out[:, j, k] += mode.amplitude * value
            if j != k:
                out[:, k, j] += mode.amplitude * value
        return out

    def scaled(self, amplitude: float) -> "FourierField":
        return FourierField(
            self.base, tuple(FourierMode(m.entry, m.kind, m.wave, amplitude * m.amplitude) for m in self.modes)
        )


@dataclass(frozen=True)
class PotentialMode:
    kind: str
    wave: tuple[int, ...]
    amplitude: float


@dataclass(frozen=True)
class HessianField:
    """a(x) = base + Hess φ(x) for a periodic trigonometric potential φ."""

    base: np.ndarray
    modes: Sequence[PotentialMode] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return self.base.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.broadcast_to(self.base, (x.shape[0], self.n, self.n)).copy()
        for mode in self.modes:
            k = np.asarray(mode.wave, dtype=float)
            value = _phase(mode.kind, k, x)
            # Second derivative of cos/sin(2π k·x) is -(2π)² k kᵀ times itself.
            out -= mode.amplitude * TWO_PI**2 * value[:, None, None] * np.outer(k, k)[None]
        return out

    def scaled(self, amplitude: float) -> "HessianField":
        return HessianField(self.base, tuple(PotentialMode(m.kind, m.wave, amplitude * m.amplitude) for m in self.modes))


@dataclass(frozen=True)
class ShiftedField:
    """x ↦ inner(x + shift)."""

    inner: object
    shift: tuple[float, ...]

    @property
    def n(self) -> int:
        return self.inner.n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.inner(np.atleast_2d(np.asarray(x, dtype=float)) + np.asarray(self.shift, dtype=float))

    def scaled(self, amplitude: float) -> "ShiftedField":
        return ShiftedField(self.inner.scaled(amplitude), self.shift)


def constant(matrix) -> ConstantField:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    return ConstantField(_matrix(m, m.shape[0]))


def fourier(base, modes: Sequence[dict | FourierMode]) -> FourierField:
    b = np.atleast_2d(np.asarray(base, dtype=float))
    n = b.shape[0]
    parsed = []
    for m in modes:
        if isinstance(m, dict):
            m = FourierMode(tuple(m["entry"]), m["kind"], tuple(m["wave"]), float(m["amplitude"]))
        if len(m.wave) != n or not all(0 <= i < n for i in m.entry):
            raise ValueError(f"mode {m} does not fit dimension {n}")
        parsed.append(m)
    return FourierField(_matrix(b, n), tuple(parsed))


def hessian_of(base, modes: Sequence[dict | PotentialMode]) -> HessianField:
    b = np.atleast_2d(np.asarray(base, dtype=float))
    n = b.shape[0]
    parsed = []
    for m in modes:
        if isinstance(m, dict):
            m = PotentialMode(m["kind"], tuple(m["wave"]), float(m["amplitude"]))
        if len(m.wave) != n:
            raise ValueError(f"mode {m} does not fit dimension {n}")
        parsed.append(m)
    return HessianField(_matrix(b, n), tuple(parsed))


def sinusoidal(n: int = 2, amplitude: float = 0.3) -> FourierField:
    """(1 + amplitude · sin 2πx₁) · I, the standard non-constant test field."""
    wave = tuple(int(i == 0) for i in range(n))
    return fourier(np.eye(n), [FourierMode((i, i), "sin", wave, amplitude) for i in range(n)])
