"""Dense operators on the tensor square of N x N matrices.

A :class:`TensorOperator` stores ``sum A[i, j, k, l] E_ij (x) E_kl`` as the
``N**2 x N**2`` Kronecker-layout matrix ``M[i*N + k, j*N + l]``, so that
``np.kron(A, B)`` is the operator ``A (x) B`` and ordinary matrix products
compose operators.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

#: tensor operations allocate N**4 complex entries; refuse beyond this
MAX_TENSOR_N = 64


@dataclass(frozen=True, eq=False)
class TensorOperator:
    n: int
    entries: np.ndarray

    # make numpy defer to the reflected operators (ndarray @ TensorOperator)
    __array_ufunc__ = None

    def __post_init__(self):
        shape = (self.n * self.n, self.n * self.n)
        if self.entries.shape != shape:
            raise DimensionError(f"expected entries of shape {shape}, got {self.entries.shape}")

    @classmethod
    def from_components(cls, comp):
        """Build from a 4-index array ``comp[i, j, k, l]`` (coefficient of E_ij (x) E_kl)."""
        comp = np.asarray(comp)
        n = comp.shape[0]
        if comp.shape != (n, n, n, n):
            raise DimensionError(f"components must have shape (n, n, n, n), got {comp.shape}")
        m = comp.transpose(0, 2, 1, 3).reshape(n * n, n * n)
        return cls(n, m.astype(complex))

    @classmethod
    def kron(cls, a, b):
        a = np.asarray(a)
        return cls(a.shape[0], np.kron(a, b).astype(complex))

    @classmethod
    def zeros(cls, n):
        return cls(n, np.zeros((n * n, n * n), dtype=complex))

    def components(self):
        n = self.n
        return self.entries.reshape(n, n, n, n).transpose(0, 2, 1, 3)

    def swap(self):
        """Exchange the two tensor slots (r_12 -> r_21)."""
        return TensorOperator.from_components(self.components().transpose(2, 3, 0, 1))

    def partial_trace(self, slot=2):
        """Trace out slot 1 or 2, returning an N x N matrix."""
        t = self.entries.reshape(self.n, self.n, self.n, self.n)  # [i, k, j, l]
        if slot == 2:
            return np.einsum("ikjk->ij", t)
        if slot == 1:
            return np.einsum("ikil->kl", t)
        raise ValueError("slot must be 1 or 2")

    def max_abs(self):
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0

    def _coerce(self, other):
        if isinstance(other, TensorOperator):
            if other.n != self.n:
                raise DimensionError(f"tensor size mismatch: {self.n} vs {other.n}")
            return other.entries
        return np.asarray(other)

    def __add__(self, other):
        return TensorOperator(self.n, self.entries + self._coerce(other))

    def __sub__(self, other):
        return TensorOperator(self.n, self.entries - self._coerce(other))

    def __neg__(self):
        return TensorOperator(self.n, -self.entries)

    def __mul__(self, scalar):
        return TensorOperator(self.n, self.entries * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return TensorOperator(self.n, self.entries / scalar)

    def __matmul__(self, other):
        return TensorOperator(self.n, self.entries @ self._coerce(other))

    def __rmatmul__(self, other):
        return TensorOperator(self.n, np.asarray(other) @ self.entries)


def slot1(a):
    """``A (x) 1``."""
    a = np.asarray(a)
    return TensorOperator.kron(a, np.eye(a.shape[0]))


def slot2(a):
    """``1 (x) A``."""
    a = np.asarray(a)
    return TensorOperator.kron(np.eye(a.shape[0]), a)


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def transposition(n):
    """``sum_{k,l} E_kl (x) E_lk``, the operator exchanging the two factors of C^n (x) C^n."""
    comp = np.zeros((n, n, n, n))
    k, l = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    comp[k, l, l, k] = 1.0
    return TensorOperator.from_components(comp)


def diagonal_coincidence(n):
    """``sum_k E_kk (x) E_kk``."""
    comp = np.zeros((n, n, n, n))
    k = np.arange(n)
    comp[k, k, k, k] = 1.0
    return TensorOperator.from_components(comp)
