"""Exact checks of the determinantal identities behind Cramer's rule for minors.

Each checker evaluates both sides of one identity in exact rational
arithmetic and returns an :class:`IdentityReport`; ``holds`` is an exact
equality test, never a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionError, SingularMatrixError
from .matrix_core import (
    IndexSet,
    RationalMatrix,
    determinant,
    index_subsets,
    minor,
    replace_columns,
    solve,
    inverse,
)

ENTRY_RANGE = (-9, 9)


@dataclass(frozen=True)
class IdentityReport:
    identity: str
    instance: str
    left: Fraction
    right: Fraction
    holds: bool
    redraws: int = 0

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "instance": self.instance,
            "left": str(self.left),
            "right": str(self.right),
            "holds": self.holds,
            "redraws": self.redraws,
        }


def _report(name, instance, left, right, redraws=0) -> IdentityReport:
    return IdentityReport(name, instance, Fraction(left), Fraction(right), left == right, redraws)


def _nonsingular(M: RationalMatrix) -> Fraction:
    if M.rows != M.cols:
        raise DimensionError(f"expected a square matrix, got {M.shape}")
    d = determinant(M)
    if d == 0:
        raise SingularMatrixError("matrix is exactly singular", pivot=Fraction(0))
    return d


def cramer_minor(M: RationalMatrix, F: RationalMatrix, I: IndexSet, *, redraws: int = 0) -> IdentityReport:
    """det A^I == det M[I <- F] / det M, where A solves M A = F."""
    det_m = _nonsingular(M)
    if F.rows != M.rows or F.cols != len(I):
        raise DimensionError(f"F is {F.shape}, expected ({M.rows}, {len(I)})")
    A = solve(M, F)
    left = minor(A, I)
    right = determinant(replace_columns(M, I, F)) / det_m
    return _report("cramer_minor", f"n={M.rows} m={len(I)} I={I}", left, right, redraws)


def jacobi_complementary(M: RationalMatrix, I: IndexSet, J: IndexSet, *, redraws: int = 0) -> IdentityReport:
    """det (M^-1)^I_J == (-1)^(sum I + sum J) det M^{J^c}_{I^c} / det M."""
    det_m = _nonsingular(M)
    if len(I) != len(J):
        raise DimensionError(f"|I| = {len(I)} but |J| = {len(J)}")
    left = minor(inverse(M), I, J)
    sign = -1 if (I.total + J.total) % 2 else 1
    right = sign * minor(M, J.complement(), I.complement()) / det_m
    return _report("jacobi_complementary", f"n={M.rows} I={I} J={J}", left, right, redraws)


def cauchy_binet(B: RationalMatrix, C: RationalMatrix, I: IndexSet, J: IndexSet) -> IdentityReport:
    """det (BC)^I_J == sum over m-subsets L of det B^I_L det C^L_J."""
    if B.cols != C.rows:
        raise DimensionError(f"cannot multiply {B.shape} by {C.shape}")
    m = len(I)
    if len(J) != m or m > min(B.rows, B.cols, C.cols):
        raise DimensionError(f"need |I| = |J| <= min{(B.rows, B.cols, C.cols)}")
    left = minor(B @ C, I, J)
    right = sum(
        (minor(B, I, L) * minor(C, L, J) for L in index_subsets(B.cols, m)),
        Fraction(0),
    )
    return _report(
        "cauchy_binet", f"B={B.rows}x{B.cols} C={C.rows}x{C.cols} I={I} J={J}", left, right
    )


def laplace_multicolumn(M: RationalMatrix, I: IndexSet) -> IdentityReport:
    """det M == sum over |I|-subsets J of (-1)^(sum I + sum J) det M^J_I det M^{J^c}_{I^c}."""
    if M.rows != M.cols:
        raise DimensionError(f"expected a square matrix, got {M.shape}")
    Ic = I.complement()
    right = Fraction(0)
    for J in index_subsets(M.rows, len(I)):
        sign = -1 if (I.total + J.total) % 2 else 1
        right += sign * minor(M, J, I) * minor(M, J.complement(), Ic)
    return _report("laplace_multicolumn", f"n={M.rows} I={I}", determinant(M), right)


# --- fuzzing -----------------------------------------------------------------


def _random_matrix(rng, rows, cols) -> RationalMatrix:
    lo, hi = ENTRY_RANGE
    return RationalMatrix.from_array(rng.integers(lo, hi + 1, size=(rows, cols)))


def _random_invertible(rng, n):
    redraws = 0
    while True:
        M = _random_matrix(rng, n, n)
        if determinant(M) != 0:
            return M, redraws
        redraws += 1


def _random_subset(rng, universe, m) -> IndexSet:
    return IndexSet.from_zero_based(sorted(rng.choice(universe, size=m, replace=False)), universe)


def _trial(seed, trial, max_n):
    rng = np.random.default_rng([seed, trial])
    n = int(rng.integers(min(2, max_n), max_n + 1))

    M, redraws = _random_invertible(rng, n)
    m = int(rng.integers(1, n + 1))
    F = _random_matrix(rng, n, m)
    reports = [cramer_minor(M, F, _random_subset(rng, n, m), redraws=redraws)]

    M, redraws = _random_invertible(rng, n)
    m = int(rng.integers(1, n + 1))
    reports.append(
        jacobi_complementary(M, _random_subset(rng, n, m), _random_subset(rng, n, m), redraws=redraws)
    )

    p, q = (int(x) for x in rng.integers(1, max_n + 1, size=2))
    m = int(rng.integers(1, min(p, n, q) + 1))
    B, C = _random_matrix(rng, p, n), _random_matrix(rng, n, q)
    reports.append(cauchy_binet(B, C, _random_subset(rng, p, m), _random_subset(rng, q, m)))

    m = int(rng.integers(1, n + 1))
    reports.append(laplace_multicolumn(_random_matrix(rng, n, n), _random_subset(rng, n, m)))
    return reports


def fuzz_identities(seed: int, trials: int, max_n: int) -> list:
    """Run all four checkers on ``trials`` random integer instances.

    Trial ``t`` draws from its own generator seeded by ``(seed, t)``, with
    size ``n`` uniform in ``[2, max_n]``; output is four reports per trial,
    ordered by trial index.
    """
    if max_n < 1:
        raise DimensionError("max_n must be at least 1")
    reports = []
    for t in range(trials):
        reports.extend(_trial(seed, t, max_n))
    return reports


__all__ = [
    "IdentityReport",
    "cramer_minor",
    "jacobi_complementary",
    "cauchy_binet",
    "laplace_multicolumn",
    "fuzz_identities",
]
