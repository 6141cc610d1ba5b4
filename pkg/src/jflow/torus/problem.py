"""Grid, coefficient samples and finite-difference operators on the flat torus."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from jflow.errors import DomainError, SingularityError

DEGENERATE_EIG = 1e-10


def _det_adjugate(H: np.ndarray):
    """Determinant and adjugate of a stack of 1x1, 2x2 or 3x3 matrices."""
    n = H.shape[-1]
    if n == 1:
        return H[..., 0, 0], np.ones_like(H)
    if n == 2:
        a, b, c, d = H[..., 0, 0], H[..., 0, 1], H[..., 1, 0], H[..., 1, 1]
        adj = np.empty_like(H)
        adj[..., 0, 0], adj[..., 0, 1], adj[..., 1, 0], adj[..., 1, 1] = d, -b, -c, a
        return a * d - b * c, adj
    adj = np.empty_like(H)
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != j]
            s = [k for k in range(3) if k != i]
            minor = H[..., r[0], s[0]] * H[..., r[1], s[1]] - H[..., r[0], s[1]] * H[..., r[1], s[0]]
            adj[..., i, j] = (-1) ** (i + j) * minor
    det = np.einsum("...j,...j->...", H[..., 0, :], adj[..., :, 0])
    return det, adj


@dataclass(frozen=True)
class TorusSolution:
    """Periodic u (mean zero) and constant c with f = ½ xᵀBx + u convex."""

    u: np.ndarray
    c: float
    residual_sup: float
    min_hessian_eig: float
    newton_iters: tuple[int, ...] = ()
    continuation_steps: tuple[float, ...] = ()
    legendre_residual: float | None = None
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def diagnostics(self) -> dict:
        return {
            "residual_sup": self.residual_sup,
            "min_hessian_eig": self.min_hessian_eig,
            "legendre_residual": self.legendre_residual,
            "newton_iters": list(self.newton_iters),
        }


class TorusProblem:
    """Σ a_jk(x) f^{jk}(x) = c on [0,1)^n with f = ½ xᵀBx + u, u periodic.

    Second-order central differences on a uniform N^n grid: the three-point
    stencil on the diagonal of the Hessian and the four-point diagonal
    stencil for mixed entries.
    """

    def __init__(self, n: int, N: int, a_field, B):
        if n not in (1, 2, 3):
            raise DomainError("only n = 1, 2, 3 are supported")
        if N < 4:
            raise DomainError("need at least 4 grid points per axis")
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if B.shape != (n, n) or not np.allclose(B, B.T, rtol=0, atol=1e-14):
            raise DomainError("B must be a symmetric n x n matrix")
        if np.linalg.eigvalsh(B).min() <= 0:
            raise DomainError("B must be positive definite")
        self.n = n
        self.N = N
        self.h = 1.0 / N
        self.B = B
        self.B_inv = np.linalg.inv(B)
        self.a_field = a_field
        self.shape = (N,) * n
        axes = np.meshgrid(*[np.arange(N) * self.h] * n, indexing="ij")
        self.points = np.stack([ax.ravel() for ax in axes], axis=-1)
        self.a_values = np.asarray(a_field(self.points), dtype=float).reshape(self.shape + (n, n))
        self._validate_field()

    def _validate_field(self):
        a = self.a_values
        if not np.allclose(a, np.swapaxes(a, -1, -2), rtol=0, atol=1e-12):
            raise DomainError("a_field is not symmetric at some node")
        if np.linalg.eigvalsh(a).min() <= 0:
            raise DomainError("a_field is not positive definite at some node")
        for i in range(self.n):
            shifted = self.points.copy()
            shifted[:, i] += 1.0
            wrapped = np.asarray(self.a_field(shifted), dtype=float).reshape(a.shape)
            if not np.allclose(wrapped, a, rtol=0, atol=1e-10):
                raise DomainError(f"a_field is not 1-periodic in x_{i + 1}")

    def mean_matrix(self) -> np.ndarray:
        return self.a_values.reshape(-1, self.n, self.n).mean(axis=0)

    # finite differences -------------------------------------------------
    def _shift(self, u: np.ndarray, offset) -> np.ndarray:
        # u evaluated at x + offset·h
        return np.roll(u, tuple(-o for o in offset), axis=tuple(range(self.n)))

    def _unit(self, j: int, sign: int = 1):
        return tuple(sign if i == j else 0 for i in range(self.n))

    def second_difference(self, u: np.ndarray, j: int, k: int) -> np.ndarray:
        h2 = self.h * self.h
        if j == k:
            return (self._shift(u, self._unit(j)) - 2 * u + self._shift(u, self._unit(j, -1))) / h2
        pp = tuple(a + b for a, b in zip(self._unit(j), self._unit(k)))
        pm = tuple(a - b for a, b in zip(self._unit(j), self._unit(k)))
        return (
            self._shift(u, pp) - self._shift(u, pm) - self._shift(u, tuple(-o for o in pm)) + self._shift(u, tuple(-o for o in pp))
        ) / (4 * h2)

    def hessian(self, u: np.ndarray) -> np.ndarray:
        """Hess f = B + D²u at every node, shape grid + (n, n)."""
        H = np.empty(self.shape + (self.n, self.n))
        for j in range(self.n):
            for k in range(j, self.n):
                d = self.second_difference(u, j, k)
                H[..., j, k] = self.B[j, k] + d
                H[..., k, j] = H[..., j, k]
        return H

    def inverse_hessian(self, u: np.ndarray, require_convex: bool = False) -> np.ndarray:
        H = self.hessian(u)
        det, adj = _det_adjugate(H)
        scale = np.abs(H).max()
        if np.any(np.abs(det) <= 1e-14 * scale**self.n):
            raise SingularityError("Hessian of f is singular at some node")
        if require_convex and not self.is_convex(H):
            lowest = float(np.linalg.eigvalsh(H).min())
            raise SingularityError(f"Hessian of f lost positivity (min eigenvalue {lowest:.3e})")
        return adj / det[..., None, None]

    def is_convex(self, H: np.ndarray) -> bool:
        """Sylvester's criterion at every node, minors above DEGENERATE_EIG^m."""
        for m in range(1, self.n + 1):
            if _det_adjugate(H[..., :m, :m])[0].min() <= DEGENERATE_EIG**m:
                return False
        return True

    def min_hessian_eig(self, u: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(self.hessian(u)).min())

    def trace(self, u: np.ndarray, a_values: np.ndarray | None = None, Hinv: np.ndarray | None = None) -> np.ndarray:
        """Σ a_jk f^{jk} at every node."""
        a = self.a_values if a_values is None else a_values
        Hinv = self.inverse_hessian(u) if Hinv is None else Hinv
        return np.einsum("...jk,...jk->...", a, Hinv)

    # sparse operators ---------------------------------------------------
    @cached_property
    def _index(self) -> np.ndarray:
        return np.arange(self.N**self.n).reshape(self.shape)

    def _perm(self, offset) -> sp.csr_matrix:
        size = self.N**self.n
        cols = self._shift(self._index, offset).ravel()
        return sp.csr_matrix((np.ones(size), (np.arange(size), cols)), shape=(size, size))

    @cached_property
    def second_difference_matrices(self) -> dict:
        """Sparse D²_jk (j ≤ k) acting on flattened grid functions."""
        size = self.N**self.n
        h2 = self.h * self.h
        eye = sp.identity(size, format="csr")
        ops = {}
        for j in range(self.n):
            for k in range(j, self.n):
                if j == k:
                    ops[j, k] = (self._perm(self._unit(j)) - 2 * eye + self._perm(self._unit(j, -1))) / h2
                else:
                    pp = tuple(a + b for a, b in zip(self._unit(j), self._unit(k)))
                    pm = tuple(a - b for a, b in zip(self._unit(j), self._unit(k)))
                    ops[j, k] = (
                        self._perm(pp) - self._perm(pm) - self._perm(tuple(-o for o in pm)) + self._perm(tuple(-o for o in pp))
                    ) / (4 * h2)
        return ops
