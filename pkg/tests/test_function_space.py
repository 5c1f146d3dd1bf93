import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanproj.errors import DimensionError, EvaluationError, ParameterError, RankError
from meanproj.function_space import (
    FunctionHandle,
    apply_dt,
    constant,
    exponential,
    graded_project,
    gram_matrix,
    inner,
    make_ground_space,
    monomial,
    orthonormal_basis,
    pi_k_norm_sq,
    project_h,
    project_perp,
    runge,
    wedge_eval,
    wedge_inner,
    wedge_inner_tensor,
    wedge_norm_sq,
)

from oracles import random_polynomial


def poly(coeffs, name="p"):
    return FunctionHandle(lambda x: np.polynomial.polynomial.polyval(x, coeffs), name)


class TestGroundSpace:
    def test_lebesgue_mass(self):
        S = make_ground_space("interval", a=-1, b=1, quadrature=64)
        assert abs(S.mass - 2.0) <= 1e-14

    def test_second_moment(self):
        S = make_ground_space("interval", a=-1, b=1, quadrature=64)
        assert abs(inner(S, constant(1.0), monomial(2)) - 2 / 3) <= 1e-13

    def test_counting_measure(self):
        S = make_ground_space("discrete", points=[1, 2, 3])
        assert S.mass == 3.0

    @pytest.mark.parametrize("weight,a,b", [("lebesgue", 0.0, 3.0), ("chebyshev", -1.0, 1.0), ("chebyshev", 2.0, 5.0), ("gaussian", None, None)])
    def test_mass_matches_closed_form(self, weight, a, b):
        kw = {} if a is None else {"a": a, "b": b}
        S = make_ground_space("interval", weight=weight, quadrature=40, **kw)
        assert abs(S.mass - S.exact_mass) <= 1e-10 * S.exact_mass
        assert np.all(np.diff(S.nodes) > 0) and np.all(S.weights > 0)

    @pytest.mark.parametrize("params", [
        {"a": 1.0, "b": 1.0},
        {"a": 0.0, "b": 1.0, "quadrature": 0},
        {"a": 0.0, "b": 1.0, "weight": "laplace"},
    ])
    def test_invalid_interval(self, params):
        with pytest.raises(ParameterError):
            make_ground_space("interval", **params)

    def test_invalid_discrete(self):
        with pytest.raises(ParameterError):
            make_ground_space("discrete", points=[1, 2], weights=[1.0, 0.0])
        with pytest.raises(ParameterError):
            make_ground_space("discrete", points=[1, 1])


class TestBasis:
    def test_legendre_n2(self, legendre2):
        x = np.array([-0.3, 0.0, 0.8])
        np.testing.assert_allclose(legendre2.evaluate(x)[:, 0], 1 / math.sqrt(2), rtol=1e-15)
        np.testing.assert_allclose(legendre2.evaluate(x)[:, 1], math.sqrt(1.5) * x, rtol=1e-15)
        assert legendre2.constant == pytest.approx(1 / math.sqrt(2))

    def test_coordinate_basis_unchanged(self):
        S = make_ground_space("discrete", points=[0.0, 1.0, 2.0])
        B = orthonormal_basis(S, 3, "coordinate")
        np.testing.assert_array_equal(B.evaluate(S.nodes), np.eye(3))

    def test_custom_seeds_match_legendre(self, lebesgue, legendre3):
        B = orthonormal_basis(lebesgue, 3, "gram_schmidt_custom", seeds=[monomial(0), monomial(1), monomial(2)])
        x = np.linspace(-1, 1, 11)
        # Gram-Schmidt of 1, x, x^2 has positive leading coefficients, as do the Legendre polynomials
        np.testing.assert_allclose(B.evaluate(x), legendre3.evaluate(x), atol=1e-12)
        np.testing.assert_allclose(B.gram(), np.eye(3), atol=1e-12)

    def test_dependent_seeds(self, lebesgue):
        twice = FunctionHandle(lambda x: 2 * x, "2x")
        with pytest.raises(RankError):
            orthonormal_basis(lebesgue, 3, "gram_schmidt_custom", seeds=[monomial(0), monomial(1), twice])

    @pytest.mark.parametrize("family,weight,n", [
        ("legendre", "lebesgue", 9), ("chebyshev", "chebyshev", 9), ("hermite", "gaussian", 9), ("fourier", "lebesgue", 7),
    ])
    def test_gram_identity(self, family, weight, n):
        kw = {} if weight == "gaussian" else {"a": 0.5, "b": 2.5}
        S = make_ground_space("interval", weight=weight, quadrature=128, **kw)
        B = orthonormal_basis(S, n, family)
        np.testing.assert_allclose(B.gram(), np.eye(n), atol=1e-10)

    def test_family_weight_mismatch(self, lebesgue):
        with pytest.raises(ParameterError):
            orthonormal_basis(lebesgue, 3, "hermite")

    def test_too_coarse_quadrature_detected(self):
        S = make_ground_space("interval", a=-1, b=1, quadrature=3)
        with pytest.raises(ParameterError):
            orthonormal_basis(S, 5, "legendre")


class TestInner:
    def test_orthonormality(self, legendre3, lebesgue):
        phis = legendre3.functions()
        np.testing.assert_allclose(gram_matrix(lebesgue, phis), np.eye(3), atol=1e-10)

    def test_polynomial_moment(self, lebesgue):
        assert inner(lebesgue, constant(1.0), monomial(2)) == pytest.approx(2 / 3, abs=1e-13)

    def test_discrete_weighted_dot(self):
        S = make_ground_space("discrete", points=[1.0, 2.0, 4.0], weights=[0.5, 1.0, 2.0])
        assert inner(S, monomial(1), monomial(2)) == pytest.approx(0.5 * 1 + 1.0 * 8 + 2.0 * 64)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_names_node(self, lebesgue):
        with pytest.raises(EvaluationError) as info:
            inner(lebesgue, FunctionHandle(np.log, "log"), constant(1.0))
        assert info.value.node < 0 and "x=" in str(info.value)


class TestWedge:
    def test_order_one(self):
        assert wedge_eval([exponential()], [0.3]) == pytest.approx(math.exp(0.3))

    def test_repeated_point(self):
        assert wedge_eval([monomial(1), exponential()], [0.4, 0.4]) == 0.0

    def test_swap_flips_sign(self):
        fs = [monomial(1), exponential()]
        assert wedge_eval(fs, [0.1, 0.7]) == pytest.approx(-wedge_eval(fs, [0.7, 0.1]), rel=1e-14)

    def test_batch_evaluation(self):
        fs = [monomial(1), exponential()]
        ys = np.array([[0.1, 0.7], [0.2, -0.5]])
        np.testing.assert_allclose(wedge_eval(fs, ys), [wedge_eval(fs, y) for y in ys], rtol=1e-15)

    def test_orthonormal_family(self, legendre3, lebesgue):
        phis = legendre3.functions()
        assert wedge_inner([phis[0], phis[2]], [phis[0], phis[2]], lebesgue) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_families(self, lebesgue):
        B = orthonormal_basis(lebesgue, 4, "legendre")
        phis = B.functions()
        assert abs(wedge_inner(phis[:2], phis[2:], lebesgue)) <= 1e-14

    def test_gram_path_vs_tensor_path(self, lebesgue):
        rng = np.random.default_rng(17)
        for _ in range(5):
            gs = [poly(rng.standard_normal(6)) for _ in range(2)]
            hs = [poly(rng.standard_normal(6)) for _ in range(2)]
            gram = wedge_inner(gs, hs, lebesgue)
            tensor = wedge_inner_tensor(gs, hs, lebesgue)
            assert abs(gram - tensor) <= 1e-10 * abs(gram)

    def test_tensor_order_limit(self, lebesgue):
        with pytest.raises(DimensionError):
            wedge_inner_tensor([monomial(0)] * 4, [monomial(0)] * 4, lebesgue)


class TestGraded:
    def test_functions_in_h_have_no_perp_component(self, legendre3):
        fs = [monomial(0), monomial(2)]
        assert graded_project(legendre3, fs, 1).is_zero
        assert graded_project(legendre3, fs, 2).is_zero
        assert pi_k_norm_sq(legendre3, fs, 1) == 0.0

    def test_grade_zero_is_wedge_of_projections(self, legendre2):
        fs = [monomial(2), exponential()]
        ys = np.array([-0.2, 0.9])
        expected = wedge_eval([project_h(legendre2, f) for f in fs], ys)
        assert graded_project(legendre2, fs, 0)(ys) == pytest.approx(expected, rel=1e-13)

    def test_single_replacement(self, legendre2):
        g = graded_project(legendre2, [monomial(2)], 1)
        x = np.linspace(-1, 1, 7)
        np.testing.assert_allclose([g([xi]) for xi in x], project_perp(legendre2, monomial(2))(x), atol=1e-14)

    def test_perp_norm_of_x_squared(self, legendre2):
        # ||x^2||^2 = 2/5 and ||P_H x^2||^2 = <phi_1, x^2>^2 = 2/9
        assert pi_k_norm_sq(legendre2, [monomial(2)], 1) == pytest.approx(8 / 45, rel=1e-12)

    def test_pythagoras(self, legendre3, lebesgue):
        fs = [monomial(3), exponential(), runge()]
        total = sum(pi_k_norm_sq(legendre3, fs, k) for k in range(4))
        assert total == pytest.approx(wedge_norm_sq(fs, lebesgue), rel=1e-9)

    def test_grades_orthogonal(self, legendre3, lebesgue):
        fs = [monomial(3), exponential()]
        grades = [graded_project(legendre3, fs, k) for k in range(3)]
        for k in range(3):
            for l in range(3):
                if k != l:
                    assert abs(grades[k].inner(grades[l], lebesgue)) <= 1e-9

    def test_k_out_of_range(self, legendre2):
        with pytest.raises(DimensionError):
            graded_project(legendre2, [monomial(2)], 2)

    def test_projection_idempotent(self, legendre3):
        f = exponential()
        c = legendre3.coefficients(f)
        np.testing.assert_allclose(legendre3.coefficients(project_h(legendre3, f)), c, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([-1.0, 0.0, 0.5, 1.0, 2.0]), st.integers(1, 3))
    def test_dt_expansion(self, legendre3, seed, t, m):
        rng = np.random.default_rng(seed)
        fs = [FunctionHandle(random_polynomial(rng, 6)) for _ in range(m)]
        ys = rng.uniform(-1, 1, size=(4, m))
        lhs = wedge_eval([apply_dt(legendre3, f, t) for f in fs], ys)
        rhs = sum(t**k * graded_project(legendre3, fs, k)(ys) for k in range(m + 1))
        assert np.all(np.abs(lhs - rhs) <= 1e-9 * (1 + np.abs(lhs)))
