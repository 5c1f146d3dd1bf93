"""Dense matrix algebra in 64-bit floating point and in exact rationals.

Floating matrices are plain ``numpy.ndarray`` objects; exact matrices are
:class:`RationalMatrix` values holding :class:`fractions.Fraction` entries.
Row and column selections use :class:`IndexSet`, which is 1-based so that
index sums in sign factors such as ``(-1)**(sum(I) + sum(J))`` read the
same as in the written formulas.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import DimensionError, SingularMatrixError

# relative to the max-norm of the matrix being factored
SINGULARITY_THRESHOLD = 1e-12


@dataclass(frozen=True)
class IndexSet:
    """A strictly increasing set of 1-based indices drawn from ``{1..universe}``."""

    indices: tuple
    universe: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.universe < 0:
            raise DimensionError(f"negative universe size {self.universe}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DimensionError(f"indices {idx} are not strictly increasing")
        if idx and (idx[0] < 1 or idx[-1] > self.universe):
            raise DimensionError(f"indices {idx} outside [1, {self.universe}]")

    @classmethod
    def full(cls, universe: int) -> "IndexSet":
        return cls(tuple(range(1, universe + 1)), universe)

    @classmethod
    def from_zero_based(cls, indices: Sequence[int], universe: int) -> "IndexSet":
        return cls(tuple(int(i) + 1 for i in indices), universe)

    @property
    def zero_based(self) -> tuple:
        return tuple(i - 1 for i in self.indices)

    @property
    def total(self) -> int:
        return sum(self.indices)

    def complement(self) -> "IndexSet":
        present = set(self.indices)
        return IndexSet(
            tuple(i for i in range(1, self.universe + 1) if i not in present),
            self.universe,
        )

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.indices) + "}"


def index_subsets(universe: int, m: int) -> Iterator[IndexSet]:
    """All m-subsets of ``{1..universe}`` in lexicographic order."""
    for combo in itertools.combinations(range(1, universe + 1), m):
        yield IndexSet(combo, universe)


@dataclass(frozen=True)
class RationalMatrix:
    """Immutable matrix of exact rationals (entries are reduced ``Fraction``s)."""

    entries: tuple

    def __post_init__(self):
        rows = tuple(tuple(Fraction(x) for x in row) for row in self.entries)
        if not rows or not rows[0]:
            raise DimensionError("a rational matrix needs at least one row and column")
        if any(len(r) != len(rows[0]) for r in rows):
            raise DimensionError("ragged rows")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def from_rows(cls, rows) -> "RationalMatrix":
        return cls(tuple(tuple(r) for r in rows))

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @classmethod
    def from_array(cls, a) -> "RationalMatrix":
        a = np.asarray(a)
        if a.ndim == 1:
            a = a[:, None]
        return cls(tuple(tuple(Fraction(x) for x in row) for row in a.tolist()))

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    @property
    def shape(self) -> tuple:
        return (self.rows, self.cols)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        cols = list(zip(*other.entries))
        return RationalMatrix(
            tuple(tuple(sum(a * b for a, b in zip(row, col)) for col in cols) for row in self.entries)
        )

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix(tuple(zip(*self.entries)))

    def to_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])


Matrix = Union[np.ndarray, RationalMatrix]


def as_matrix(a) -> np.ndarray:
    """Validate and convert to a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix has non-finite entries")
    return m


def _require_square(shape):
    if len(shape) < 2 or shape[-1] != shape[-2]:
        raise DimensionError(f"expected a square matrix, got shape {tuple(shape)}")


# --- floating point: batched LU with partial pivoting -------------------------


def lu_batch(a: np.ndarray):
    """LU-factor a stack of square matrices with partial pivoting.

    Returns ``(lu, perm, sign)`` where ``lu[b]`` packs unit-lower ``L`` and
    ``U``, ``perm[b]`` is the row permutation (``PA = LU`` with
    ``(PA)[i] = A[perm[i]]``) and ``sign[b]`` its parity.
    """
    lu = np.array(a, dtype=float, copy=True)
    _require_square(lu.shape)
    batch, n, _ = lu.shape
    perm = np.tile(np.arange(n), (batch, 1))
    sign = np.ones(batch)
    rows = np.arange(batch)
    for k in range(n):
        p = k + np.argmax(np.abs(lu[:, k:, k]), axis=1)
        swap = p != k
        if swap.any():
            b, pk = rows[swap], p[swap]
            tmp = lu[b, k, :].copy()
            lu[b, k, :] = lu[b, pk, :]
            lu[b, pk, :] = tmp
            tmp = perm[b, k].copy()
            perm[b, k] = perm[b, pk]
            perm[b, pk] = tmp
            sign[swap] = -sign[swap]
        piv = lu[:, k, k]
        # an all-zero column below a zero pivot needs no elimination
        safe = np.where(piv == 0.0, 1.0, piv)
        lu[:, k + 1 :, k] /= safe[:, None]
        lu[:, k + 1 :, k + 1 :] -= lu[:, k + 1 :, k, None] * lu[:, k, None, k + 1 :]
    return lu, perm, sign


def det_batch(a) -> np.ndarray:
    """Determinants of a stack ``(..., n, n)``; a ``(..., 0, 0)`` stack gives ones."""
    a = np.asarray(a, dtype=float)
    _require_square(a.shape)
    lead = a.shape[:-2]
    n = a.shape[-1]
    if n == 0:
        return np.ones(lead)
    lu, _, sign = lu_batch(a.reshape(-1, n, n))
    return (sign * np.prod(np.diagonal(lu, axis1=1, axis2=2), axis=1)).reshape(lead)


def solve_batch(m, f, threshold: float = SINGULARITY_THRESHOLD):
    """Solve ``M[b] A[b] = F[b]`` for a stack of systems.

    Returns ``(A, singular, pivot_ratio)``: ``singular[b]`` flags systems whose
    smallest pivot is below ``threshold`` times the max-norm of ``M[b]`` (their
    rows of ``A`` are NaN), and ``pivot_ratio[b]`` is that smallest relative pivot.
    """
    m = np.asarray(m, dtype=float)
    f = np.asarray(f, dtype=float)
    _require_square(m.shape)
    batch, n, _ = m.shape
    if f.shape[:2] != (batch, n):
        raise DimensionError(f"right-hand side shape {f.shape} does not match {m.shape}")
    lu, perm, _ = lu_batch(m)
    pivots = np.abs(np.diagonal(lu, axis1=1, axis2=2))
    scale = np.abs(m).reshape(batch, -1).max(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(scale > 0, pivots.min(axis=1) / np.where(scale > 0, scale, 1.0), 0.0)
    singular = ~(ratio >= threshold)

    x = np.take_along_axis(f, perm[:, :, None], axis=1).copy()
    for k in range(n):
        x[:, k + 1 :, :] -= lu[:, k + 1 :, k, None] * x[:, k, None, :]
    diag = np.diagonal(lu, axis1=1, axis2=2).copy()
    diag[singular] = 1.0
    for k in range(n - 1, -1, -1):
        x[:, k, :] -= np.einsum("bj,bjc->bc", lu[:, k, k + 1 :], x[:, k + 1 :, :])
        x[:, k, :] /= diag[:, k, None]
    x[singular] = np.nan
    return x, singular, ratio


# --- public operations, dispatching on the matrix kind -----------------------


def determinant(M: Matrix):
    """Determinant by LU with partial pivoting, or exactly by Bareiss elimination."""
    if isinstance(M, RationalMatrix):
        if M.rows != M.cols:
            raise DimensionError(f"determinant of non-square matrix {M.shape}")
        return _bareiss_det(M.entries)
    a = as_matrix(M)
    _require_square(a.shape)
    return float(det_batch(a[None])[0])


def _bareiss_det(rows) -> Fraction:
    a = [list(r) for r in rows]
    n = len(a)
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return Fraction(0)
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) / prev
        prev = akk
    return sign * a[n - 1][n - 1]


def solve(M: Matrix, F: Matrix, threshold: float = SINGULARITY_THRESHOLD):
    """Return ``A`` with ``M A = F``.

    Float inputs go through LU with partial pivoting and raise
    :class:`SingularMatrixError` if a pivot falls below ``threshold`` times the
    max-norm of ``M``. A 1-D ``F`` is treated as a single column and a 1-D
    result is returned. Rational inputs are solved exactly.
    """
    if isinstance(M, RationalMatrix):
        if not isinstance(F, RationalMatrix):
            F = RationalMatrix.from_array(F)
        return _rational_solve(M, F)
    a = as_matrix(M)
    _require_square(a.shape)
    f = np.asarray(F, dtype=float)
    vector = f.ndim == 1
    if vector:
        f = f[:, None]
    f = as_matrix(f)
    if f.shape[0] != a.shape[0]:
        raise DimensionError(f"cannot solve {a.shape} system with right-hand side {f.shape}")
    x, singular, ratio = solve_batch(a[None], f[None], threshold)
    if singular[0]:
        raise SingularMatrixError(
            f"matrix is singular to working precision (relative pivot {ratio[0]:.3e})",
            pivot=float(ratio[0]),
        )
    return x[0, :, 0] if vector else x[0]


def _rational_solve(M: RationalMatrix, F: RationalMatrix) -> RationalMatrix:
    n = M.rows
    if M.cols != n:
        raise DimensionError(f"cannot solve with non-square matrix {M.shape}")
    if F.rows != n:
        raise DimensionError(f"right-hand side {F.shape} does not match {M.shape}")
    aug = [list(M.entries[i]) + list(F.entries[i]) for i in range(n)]
    width = len(aug[0])
    for k in range(n):
        p = next((i for i in range(k, n) if aug[i][k] != 0), None)
        if p is None:
            raise SingularMatrixError("matrix is exactly singular", pivot=Fraction(0))
        aug[k], aug[p] = aug[p], aug[k]
        inv = 1 / aug[k][k]
        aug[k] = [x * inv for x in aug[k]]
        for i in range(n):
            if i != k and aug[i][k] != 0:
                c = aug[i][k]
                row_k = aug[k]
                aug[i] = [aug[i][j] - c * row_k[j] for j in range(width)]
    return RationalMatrix(tuple(tuple(row[n:]) for row in aug))


def inverse(M: Matrix):
    if isinstance(M, RationalMatrix):
        return _rational_solve(M, RationalMatrix.identity(M.rows))
    a = as_matrix(M)
    return solve(a, np.eye(a.shape[0]))


def _check_indices(I: IndexSet, size: int, what: str):
    if I.universe != size:
        raise DimensionError(f"{what} index set {I} lives in [1,{I.universe}] but the matrix has {size} {what}s")


def submatrix(M: Matrix, I: IndexSet, J: IndexSet | None = None) -> Matrix:
    """Rows ``I`` and columns ``J`` of ``M`` in increasing order; ``J=None`` keeps every column."""
    rows, cols = M.shape
    _check_indices(I, rows, "row")
    if J is None:
        J = IndexSet.full(cols)
    _check_indices(J, cols, "column")
    if isinstance(M, RationalMatrix):
        return RationalMatrix(tuple(tuple(M.entries[i][j] for j in J.zero_based) for i in I.zero_based))
    return np.asarray(M)[np.ix_(I.zero_based, J.zero_based)]


def minor(M: Matrix, I: IndexSet, J: IndexSet | None = None):
    """``det M^I_J``; the empty minor is 1."""
    if J is None:
        J = IndexSet.full(M.shape[1])
    if len(I) != len(J):
        raise DimensionError(f"minor needs |I| = |J|, got {len(I)} and {len(J)}")
    if len(I) == 0:
        return Fraction(1) if isinstance(M, RationalMatrix) else 1.0
    return determinant(submatrix(M, I, J))


def replace_columns(M: Matrix, I: IndexSet, F: Matrix) -> Matrix:
    """``M`` with column ``i_k`` replaced by column ``k`` of ``F``, for ``I = {i_1 < ... < i_m}``."""
    n, ncols = M.shape
    if n != ncols:
        raise DimensionError(f"column replacement needs a square matrix, got {M.shape}")
    _check_indices(I, n, "column")
    if F.shape[0] != n or F.shape[1] != len(I):
        raise DimensionError(f"replacement block {F.shape} does not fit {len(I)} columns of {M.shape}")
    if isinstance(M, RationalMatrix):
        F = F if isinstance(F, RationalMatrix) else RationalMatrix.from_array(F)
        where = {j: k for k, j in enumerate(I.zero_based)}
        return RationalMatrix(
            tuple(
                tuple(F.entries[i][where[j]] if j in where else M.entries[i][j] for j in range(n))
                for i in range(n)
            )
        )
    out = np.array(M, dtype=float, copy=True)
    out[:, list(I.zero_based)] = np.asarray(F, dtype=float)
    return out


def to_json_rows(M: Matrix) -> list:
    """Row-major nested lists; rationals become ``"p/q"`` strings."""
    if isinstance(M, RationalMatrix):
        return [[str(x) for x in row] for row in M.entries]
    return np.asarray(M, dtype=float).tolist()
