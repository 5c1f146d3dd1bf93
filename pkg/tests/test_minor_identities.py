from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanproj.errors import SingularMatrixError
from meanproj.matrix_core import IndexSet, RationalMatrix, determinant, minor
from meanproj.minor_identities import (
    cauchy_binet,
    cramer_minor,
    fuzz_identities,
    jacobi_complementary,
    laplace_multicolumn,
)

from oracles import cofactor_det


def R(rows):
    return RationalMatrix.from_rows(rows)


def random_int(rng, rows, cols):
    return RationalMatrix.from_array(rng.integers(-9, 10, size=(rows, cols)))


def random_invertible(rng, n):
    while True:
        M = random_int(rng, n, n)
        if cofactor_det(M.entries) != 0:
            return M


class TestCramer:
    def test_identity_matrix_gives_minor_of_F(self):
        F = R([[1, 2], [3, 4], [5, 7]])
        I = IndexSet((1, 3), 3)
        rep = cramer_minor(RationalMatrix.identity(3), F, I)
        assert rep.holds and rep.left == minor(F, I) == Fraction(-3)

    def test_scalar(self):
        rep = cramer_minor(R([[5]]), R([[10]]), IndexSet((1,), 1))
        assert rep.holds and rep.left == rep.right == 2

    def test_random_instance(self):
        rng = np.random.default_rng(4)
        rep = cramer_minor(random_invertible(rng, 4), random_int(rng, 4, 2), IndexSet((2, 4), 4))
        assert rep.holds

    def test_full_order_is_ratio_of_determinants(self):
        rng = np.random.default_rng(9)
        M, F = random_invertible(rng, 3), random_int(rng, 3, 3)
        rep = cramer_minor(M, F, IndexSet.full(3))
        assert rep.holds and rep.left == cofactor_det(F.entries) / cofactor_det(M.entries)

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            cramer_minor(R([[1, 2], [2, 4]]), R([[1], [1]]), IndexSet((1,), 2))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_property(self, seed, n):
        rng = np.random.default_rng(seed)
        M = random_invertible(rng, n)
        m = int(rng.integers(1, n + 1))
        I = IndexSet.from_zero_based(sorted(rng.choice(n, m, replace=False)), n)
        assert cramer_minor(M, random_int(rng, n, m), I).holds


class TestJacobi:
    def test_identity(self):
        I = IndexSet((1, 3), 4)
        rep = jacobi_complementary(RationalMatrix.identity(4), I, I)
        assert rep.holds and rep.left == 1

    def test_adjugate(self):
        a, b, c, d = 3, 1, 4, 2
        rep = jacobi_complementary(R([[a, b], [c, d]]), IndexSet((1,), 2), IndexSet((1,), 2))
        assert rep.holds and rep.left == Fraction(d, a * d - b * c)

    def test_random_distinct_sets(self):
        rng = np.random.default_rng(12)
        rep = jacobi_complementary(random_invertible(rng, 5), IndexSet((1, 4), 5), IndexSet((2, 3), 5))
        assert rep.holds


class TestCauchyBinet:
    def test_identity(self):
        I3 = RationalMatrix.identity(3)
        assert cauchy_binet(I3, I3, IndexSet((1, 2), 3), IndexSet((1, 2), 3)).left == 1
        rep = cauchy_binet(I3, I3, IndexSet((1, 2), 3), IndexSet((1, 3), 3))
        assert rep.holds and rep.left == 0

    def test_full_order_is_multiplicativity(self):
        rng = np.random.default_rng(1)
        B, C = random_int(rng, 3, 3), random_int(rng, 3, 3)
        rep = cauchy_binet(B, C, IndexSet.full(3), IndexSet.full(3))
        assert rep.holds and rep.right == determinant(B) * determinant(C)

    def test_rectangular(self):
        rng = np.random.default_rng(2)
        B, C = random_int(rng, 3, 5), random_int(rng, 5, 4)
        rep = cauchy_binet(B, C, IndexSet((1, 3), 3), IndexSet((2, 4), 4))
        assert rep.holds
        # independent: sum of the 10 summands computed with the cofactor oracle
        from itertools import combinations

        total = Fraction(0)
        for L in combinations(range(5), 2):
            b = [[B[i, l] for l in L] for i in (0, 2)]
            c = [[C[l, j] for j in (1, 3)] for l in L]
            total += cofactor_det(b) * cofactor_det(c)
        assert rep.right == total


class TestLaplace:
    def test_single_column(self):
        rng = np.random.default_rng(3)
        M = random_int(rng, 4, 4)
        rep = laplace_multicolumn(M, IndexSet((2,), 4))
        assert rep.holds and rep.left == cofactor_det(M.entries)

    def test_all_columns(self):
        M = R([[2, 1], [7, 5]])
        rep = laplace_multicolumn(M, IndexSet.full(2))
        assert rep.holds and rep.right == 3

    def test_two_columns(self):
        rng = np.random.default_rng(6)
        assert laplace_multicolumn(random_int(rng, 5, 5), IndexSet((1, 4), 5)).holds


class TestFuzz:
    def test_small(self):
        reports = fuzz_identities(seed=1, trials=1, max_n=2)
        assert len(reports) == 4 and all(r.holds for r in reports)
        assert [r.identity for r in reports] == [
            "cramer_minor", "jacobi_complementary", "cauchy_binet", "laplace_multicolumn"
        ]

    def test_empty(self):
        assert fuzz_identities(seed=3, trials=0, max_n=4) == []

    def test_deterministic(self):
        assert fuzz_identities(7, 20, 5) == fuzz_identities(7, 20, 5)

    def test_every_report_holds(self):
        reports = fuzz_identities(seed=5, trials=100, max_n=6)
        failed = [r for r in reports if not r.holds]
        assert not failed, failed[:3]
