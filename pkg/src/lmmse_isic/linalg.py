"""Small dense complex linear algebra with operation counting.

Every kernel works on arrays with arbitrary leading batch axes: a Hermitian
matrix is an ``(..., n, n)`` complex array, a vector is ``(..., n)``. The
arithmetic each kernel performs is tallied *per problem instance* (batch axes
do not multiply the counts) into whatever :class:`FlopCounter` objects are
active in the current thread, see :func:`counting`.

Counting convention: one complex multiply is 6 real flops, one complex add
is 2. Real-by-complex products, real divisions, square roots and the like are
tallied directly as real flops (a real-by-complex product costs 2).
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class SingularMatrixError(ArithmeticError):
    """Cholesky pivot or Schur complement was not positive."""


class PositiveDefinitenessLost(ArithmeticError):
    """A quantity that must stay positive (a diagonal of an inverse) did not."""


class DegenerateUpdateError(ArithmeticError):
    """A recursive update hit a (near) zero denominator."""


DENOMINATOR_FLOOR = 1e-14


@dataclass
class FlopCounter:
    cmul: int = 0
    cadd: int = 0
    rflop: int = 0

    def flops(self) -> int:
        return 6 * self.cmul + 2 * self.cadd + self.rflop

    def merge(self, other: "FlopCounter") -> "FlopCounter":
        self.cmul += other.cmul
        self.cadd += other.cadd
        self.rflop += other.rflop
        return self

    def __add__(self, other: "FlopCounter") -> "FlopCounter":
        return FlopCounter(self.cmul, self.cadd, self.rflop).merge(other)


_active: contextvars.ContextVar[tuple[FlopCounter, ...]] = contextvars.ContextVar(
    "lmmse_isic_flop_counters", default=()
)


@contextlib.contextmanager
def counting(counter: FlopCounter | None = None):
    """Tally kernel arithmetic into ``counter`` for the duration of the block.

    Counters nest: an outer counter also sees everything tallied inside an
    inner block. The stack is a context variable, so each thread accumulates
    independently and results are merged explicitly by the caller.
    """
    counter = FlopCounter() if counter is None else counter
    token = _active.set(_active.get() + (counter,))
    try:
        yield counter
    finally:
        _active.reset(token)


def tally(cmul: int = 0, cadd: int = 0, rflop: int = 0) -> None:
    for c in _active.get():
        c.cmul += cmul
        c.cadd += cadd
        c.rflop += rflop


def _check_square(A):
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected (..., n, n) matrix, got shape {A.shape}")
    if A.shape[-1] == 0:
        raise ValueError("matrix dimension must be positive")


@lru_cache(maxsize=None)
def _triu(n: int, k: int = 0):
    return np.triu_indices(n, k)


def mirror_upper(A: np.ndarray) -> np.ndarray:
    """Overwrite the strict lower triangle with the conjugate of the upper one
    and zero the imaginary part of the diagonal. Returns ``A``."""
    n = A.shape[-1]
    i, j = _triu(n, 1)
    A[..., j, i] = A[..., i, j].conj()
    d = np.arange(n)
    A[..., d, d] = A[..., d, d].real
    return A


def gram(H: np.ndarray) -> np.ndarray:
    """Return ``H^H H`` built from its upper triangle and mirrored."""
    if H.ndim < 2 or 0 in H.shape[-2:]:
        raise ValueError(f"gram needs a non-empty (..., M, N) matrix, got {H.shape}")
    M, N = H.shape[-2:]
    i, j = _triu(N)
    upper = np.einsum("...ki,...ki->...i", H[..., :, i].conj(), H[..., :, j])
    W = np.empty(H.shape[:-2] + (N, N), dtype=complex)
    W[..., i, j] = upper
    tally(cmul=len(i) * M, cadd=len(i) * (M - 1))
    return mirror_upper(W)


def cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor ``L`` with ``A = L L^H``.

    Raises :class:`SingularMatrixError` if any pivot is not positive.
    """
    _check_square(A)
    n = A.shape[-1]
    L = np.zeros_like(A, dtype=complex)
    for j in range(n):
        d = A[..., j, j].real - np.sum(np.abs(L[..., j, :j]) ** 2, axis=-1)
        if not np.all(d > 0):
            raise SingularMatrixError(f"non-positive Cholesky pivot at column {j}")
        ljj = np.sqrt(d)
        L[..., j, j] = ljj
        if j + 1 < n:
            s = A[..., j + 1:, j] - np.einsum(
                "...rk,...k->...r", L[..., j + 1:, :j], L[..., j, :j].conj()
            )
            L[..., j + 1:, j] = s / ljj[..., None]
        rows = n - j - 1
        tally(cmul=rows * j, cadd=rows * j, rflop=3 * j + 1 + 2 * rows)
    return L


def hermitian_inverse(A: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Return ``(A + ridge*I)^{-1}`` via Cholesky, exactly Hermitian."""
    _check_square(A)
    n = A.shape[-1]
    R = np.array(A, dtype=complex)
    if ridge:
        d = np.arange(n)
        R[..., d, d] += ridge
        tally(rflop=n)
    L = cholesky(R)
    # X = L^{-1}, row by row
    X = np.zeros_like(L)
    for i in range(n):
        lii = L[..., i, i].real
        X[..., i, i] = 1.0 / lii
        if i:
            row = L[..., i, None, :i] @ X[..., :i, :i]
            X[..., i, :i] = -row[..., 0, :] / lii[..., None]
        tally(cmul=i * (i + 1) // 2, cadd=i * (i - 1) // 2, rflop=1 + 2 * i)
    inv = X.conj().swapaxes(-1, -2) @ X
    tally(
        cmul=sum((j + 1) * (n - j) for j in range(n)),
        cadd=sum((j + 1) * (n - j - 1) for j in range(n)),
    )
    return mirror_upper(inv)


@lru_cache(maxsize=None)
def _sub_triu(n: int, skip: int | None):
    """Upper-triangle index pairs of the block obtained by deleting ``skip``,
    as (positions into the reduced vector, positions into the full matrix)."""
    keep = np.arange(n) if skip is None else np.delete(np.arange(n), skip)
    a, b = np.triu_indices(len(keep))
    return a, b, keep[a], keep[b]


def rank1_update(A: np.ndarray, c, q: np.ndarray, skip: int | None = None) -> None:
    """In place ``A <- A + c q q^H`` on one triangle, then mirrored.

    With ``skip`` the update is applied to the block of ``A`` with row and
    column ``skip`` removed and ``q`` has one entry fewer than ``A``.
    ``c`` is a real scalar or an array over the batch axes.
    """
    n = A.shape[-1]
    m = n if skip is None else n - 1
    if q.shape[-1] != m:
        raise ValueError(f"rank-1 vector has length {q.shape[-1]}, expected {m}")
    a, b, i, j = _sub_triu(n, skip)
    cq = np.asarray(c)[..., None] * q
    A[..., i, j] += cq[..., a] * q[..., b].conj()
    A[..., j, i] = A[..., i, j].conj()
    diag = i[i == j]
    A[..., diag, diag] = A[..., diag, diag].real
    tally(cmul=len(a), cadd=len(a), rflop=2 * m)


def matvec(A: np.ndarray, x: np.ndarray, conjugate_transpose: bool = False) -> np.ndarray:
    """``A x`` or ``A^H x`` for a general or Hermitian matrix."""
    rows, cols = A.shape[-2:]
    if conjugate_transpose:
        rows, cols = cols, rows
    if x.shape[-1] != cols:
        raise ValueError(f"matvec dimension mismatch: {A.shape} vs {x.shape}")
    if conjugate_transpose:
        out = np.einsum("...ki,...k->...i", A.conj(), x)
    else:
        out = np.einsum("...ik,...k->...i", A, x)
    tally(cmul=rows * cols, cadd=rows * (cols - 1))
    return out


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a^H b`` along the last axis."""
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("dot length mismatch")
    n = a.shape[-1]
    tally(cmul=n, cadd=n - 1)
    return np.einsum("...k,...k->...", a.conj(), b)


def outer_subtract(G: np.ndarray, u: np.ndarray, w: np.ndarray) -> None:
    """In place ``G <- G - u w^T`` for a general matrix."""
    G -= u[..., :, None] * w[..., None, :]
    r, c = G.shape[-2:]
    tally(cmul=r * c, cadd=r * c)
