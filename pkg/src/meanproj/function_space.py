"""Ground spaces, orthonormal bases, wedge functions and graded projections.

A :class:`GroundSpace` is a measure space ``(S, lambda)`` carried by a fixed
quadrature rule; every inner product in the package is that quadrature.
An :class:`OrthonormalBasis` spans the finite-dimensional subspace ``H`` and
induces the projections onto ``H`` and its orthogonal complement.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev, hermite_e, legendre

from .errors import DimensionError, EvaluationError, ParameterError, RankError
from .matrix_core import det_batch, determinant

DEFAULT_QUADRATURE = 128
GRAM_TOLERANCE = 1e-10
# a factor whose norm is below this fraction of its source is treated as zero
_ZERO_FACTOR = 1e-12

H_PART = "H"
PERP_PART = "H_perp"


@dataclass(frozen=True, eq=False)
class FunctionHandle:
    """A pure, vectorized real function on S."""

    fn: Callable
    name: str = "f"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.asarray(self.fn(x), dtype=float)
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape).copy()
        return y

    def __repr__(self):
        return f"FunctionHandle({self.name})"


def monomial(k: int) -> FunctionHandle:
    return FunctionHandle(lambda x: x**k, f"x^{k}")


def exponential() -> FunctionHandle:
    return FunctionHandle(np.exp, "exp")


def runge() -> FunctionHandle:
    return FunctionHandle(lambda x: 1.0 / (1.0 + 25.0 * x**2), "runge")


def constant(c: float) -> FunctionHandle:
    return FunctionHandle(lambda x: np.full_like(x, c), f"{c}")


def linear_combination(coefficients, handles: Sequence[FunctionHandle], name: str | None = None) -> FunctionHandle:
    coefficients = np.asarray(coefficients, dtype=float)
    handles = tuple(handles)

    def fn(x):
        return sum(c * h(x) for c, h in zip(coefficients, handles))

    return FunctionHandle(fn, name or "lincomb")


@dataclass(frozen=True, eq=False)
class GroundSpace:
    """The pair ``(S, lambda)`` with its quadrature nodes and weights.

    ``kind`` is ``"interval"`` or ``"discrete"``. For discrete spaces the nodes
    are the atoms and the weights their masses, so quadrature is exact.
    """

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    a: float = -math.inf
    b: float = math.inf
    weight: str = "lebesgue"
    exact_mass: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.kind not in ("interval", "discrete"):
            raise ParameterError(f"unknown space kind {self.kind!r}")
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise ParameterError("nodes and weights must be matching non-empty 1-D arrays")
        if not np.all(weights > 0):
            raise ParameterError("quadrature weights / atom masses must be positive")
        if np.any(np.diff(nodes) <= 0):
            raise ParameterError("nodes must be distinct and strictly increasing")
        if self.kind == "interval":
            if not self.a < self.b:
                raise ParameterError(f"invalid interval [{self.a}, {self.b}]")
            if nodes[0] <= self.a or nodes[-1] >= self.b:
                raise ParameterError("quadrature nodes must lie strictly inside the interval")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def mass(self) -> float:
        """``lambda(S)`` as integrated by the quadrature."""
        return math.fsum(self.weights)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def values(self, f: FunctionHandle) -> np.ndarray:
        """``f`` on the nodes; non-finite values raise :class:`EvaluationError`."""
        v = f(self.nodes)
        bad = ~np.isfinite(v)
        if bad.any():
            node = float(self.nodes[np.argmax(bad)])
            raise EvaluationError(f"{getattr(f, 'name', f)} is not finite at node x={node!r}", node=node)
        return v

    def to_config(self) -> dict:
        if self.kind == "discrete":
            return {"kind": "discrete", "points": self.nodes.tolist(), "weights": self.weights.tolist()}
        return {"kind": "interval", "a": self.a, "b": self.b, "weight": self.weight, "quadrature": self.size}


def make_ground_space(kind: str, **params) -> GroundSpace:
    """Build an interval space with Gauss quadrature adapted to its weight, or a discrete space.

    Interval parameters: ``a``, ``b``, ``weight`` (``lebesgue``, ``chebyshev``
    or ``gaussian``) and ``quadrature`` (node count). The Chebyshev weight is
    ``1/sqrt(1-t^2)`` after mapping ``[a, b]`` onto ``[-1, 1]``; the Gaussian
    weight is the standard normal law on the real line. Discrete parameters:
    ``points`` and optional positive ``weights`` (default counting measure).
    """
    if kind == "discrete":
        points = np.asarray(params["points"], dtype=float)
        weights = np.asarray(params.get("weights", np.ones_like(points)), dtype=float)
        if points.shape != weights.shape:
            raise ParameterError("points and weights differ in length")
        if len(np.unique(points)) != points.size:
            raise ParameterError("discrete atoms must be distinct")
        order = np.argsort(points)
        return GroundSpace("discrete", points[order], weights[order], weight="discrete",
                           exact_mass=math.fsum(weights))
    if kind != "interval":
        raise ParameterError(f"unknown space kind {kind!r}")

    weight = params.get("weight", "lebesgue")
    q = int(params.get("quadrature", DEFAULT_QUADRATURE))
    if q < 1:
        raise ParameterError("quadrature needs at least one node")
    if weight == "gaussian":
        t, w = hermite_e.hermegauss(q)
        w = w / math.sqrt(2 * math.pi)
        return GroundSpace("interval", t, w, -math.inf, math.inf, "gaussian", exact_mass=1.0)

    a, b = float(params.get("a", -1.0)), float(params.get("b", 1.0))
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ParameterError(f"invalid interval [{a}, {b}]")
    center, half = (a + b) / 2, (b - a) / 2
    if weight == "lebesgue":
        t, w = legendre.leggauss(q)
        mass = b - a
    elif weight == "chebyshev":
        t = np.sort(np.cos((2 * np.arange(1, q + 1) - 1) * math.pi / (2 * q)))
        w = np.full(q, math.pi / q)
        mass = math.pi * half
    else:
        raise ParameterError(f"unknown weight {weight!r}")
    return GroundSpace("interval", center + half * t, half * w, a, b, weight, exact_mass=mass)


def inner(space: GroundSpace, f: FunctionHandle, g: FunctionHandle) -> float:
    """Quadrature approximation of the L2(lambda) pairing of ``f`` and ``g``."""
    return space.integrate(space.values(f) * space.values(g))


def gram_matrix(space: GroundSpace, fs: Sequence[FunctionHandle], gs: Sequence[FunctionHandle] | None = None) -> np.ndarray:
    """``(<f_i, g_j>)_{ij}``."""
    F = np.array([space.values(f) for f in fs])
    G = F if gs is None else np.array([space.values(g) for g in gs])
    return (F * space.weights) @ G.T


# --- orthonormal bases -------------------------------------------------------

FAMILIES = ("legendre", "chebyshev", "hermite", "fourier", "coordinate", "gram_schmidt_custom")


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """An orthonormal family ``phi_1..phi_n`` spanning ``H``.

    ``evaluator`` maps an array of points of shape ``(k,)`` to the ``(k, n)``
    matrix of basis values. ``constant`` is the value of ``phi_1`` when that
    element is constant, else ``None``.
    """

    space: GroundSpace
    n: int
    family: str
    evaluator: Callable
    constant: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("the basis needs n >= 1")
        deviation = np.max(np.abs(self.gram() - np.eye(self.n)))
        if not deviation <= GRAM_TOLERANCE:
            raise ParameterError(
                f"{self.family} basis with n={self.n} is not orthonormal under this quadrature "
                f"(max Gram deviation {deviation:.2e})"
            )

    def evaluate(self, x) -> np.ndarray:
        """Basis values with shape ``x.shape + (n,)``."""
        x = np.asarray(x, dtype=float)
        return np.asarray(self.evaluator(x.reshape(-1)), dtype=float).reshape(x.shape + (self.n,))

    @cached_property
    def node_values(self) -> np.ndarray:
        """``(Q, n)`` basis values at the quadrature nodes."""
        return self.evaluate(self.space.nodes)

    def gram(self) -> np.ndarray:
        V = self.node_values
        return (V.T * self.space.weights) @ V

    def function(self, j: int) -> FunctionHandle:
        """``phi_j`` with 1-based ``j``."""
        if not 1 <= j <= self.n:
            raise DimensionError(f"basis index {j} outside [1, {self.n}]")
        return FunctionHandle(lambda x: self.evaluate(x)[..., j - 1], f"phi_{j}")

    def functions(self) -> list:
        return [self.function(j) for j in range(1, self.n + 1)]

    def coefficients(self, f: FunctionHandle) -> np.ndarray:
        """``(<phi_j, f>)_j``, the coordinates of ``P_H f``."""
        return (self.node_values.T * self.space.weights) @ self.space.values(f)

    def combination(self, coefficients, name: str = "h") -> FunctionHandle:
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (self.n,):
            raise DimensionError(f"expected {self.n} coefficients, got shape {c.shape}")
        return FunctionHandle(lambda x: self.evaluate(x) @ c, name)


def _legendre(space, n):
    center, half = (space.a + space.b) / 2, (space.b - space.a) / 2
    scale = np.sqrt((2 * np.arange(n) + 1) / (2 * half))
    return (lambda x: legendre.legvander((x - center) / half, n - 1) * scale), scale[0]


def _chebyshev(space, n):
    center, half = (space.a + space.b) / 2, (space.b - space.a) / 2
    scale = np.full(n, math.sqrt(2 / (math.pi * half)))
    scale[0] = math.sqrt(1 / (math.pi * half))
    return (lambda x: chebyshev.chebvander((x - center) / half, n - 1) * scale), scale[0]


def _hermite(space, n):
    scale = 1 / np.sqrt([math.factorial(j) for j in range(n)])
    return (lambda x: hermite_e.hermevander(x, n - 1) * scale), 1.0


def _fourier(space, n):
    length = space.b - space.a
    freqs = np.array([(j + 1) // 2 for j in range(n)])
    is_sin = np.array([j % 2 == 0 and j > 0 for j in range(n)])
    scale = np.where(freqs == 0, math.sqrt(1 / length), math.sqrt(2 / length))

    def fn(x):
        phase = 2 * math.pi * np.outer((x - space.a) / length, freqs)
        return np.where(is_sin, np.sin(phase), np.cos(phase)) * scale

    return fn, scale[0]


def _coordinate(space, n):
    atoms = space.nodes
    scale = 1 / np.sqrt(space.weights[:n])

    def fn(x):
        idx = np.clip(np.searchsorted(atoms, x), 0, atoms.size - 1)
        out = np.zeros((x.size, n))
        hit = (atoms[idx] == x) & (idx < n)
        out[np.nonzero(hit)[0], idx[hit]] = scale[idx[hit]]
        return out

    return fn, None


def _gram_schmidt(space, seeds):
    """Modified Gram-Schmidt with one reorthogonalization pass, kept in coefficient form."""
    n = len(seeds)
    V = np.array([space.values(s) for s in seeds]).T * np.sqrt(space.weights)[:, None]
    leading = max(np.linalg.norm(V, axis=0).max(), np.finfo(float).tiny)
    Q = np.zeros_like(V)
    C = np.zeros((n, n))
    for j in range(n):
        v = V[:, j].copy()
        c = np.zeros(n)
        c[j] = 1.0
        for _ in range(2):
            for i in range(j):
                r = Q[:, i] @ v
                v -= r * Q[:, i]
                c -= r * C[:, i]
        norm = np.linalg.norm(v)
        if norm < 1e-10 * leading:
            raise RankError(f"seed function {j + 1} is numerically dependent on the previous ones")
        Q[:, j] = v / norm
        C[:, j] = c / norm

    def fn(x):
        return np.column_stack([s(x) for s in seeds]) @ C

    return fn


def orthonormal_basis(space: GroundSpace, n: int, family: str = "legendre",
                      seeds: Sequence[FunctionHandle] | None = None) -> OrthonormalBasis:
    """Orthonormal basis of dimension ``n`` of a classical family, or of ``span(seeds)``.

    ``legendre`` and ``fourier`` need the Lebesgue weight on a bounded
    interval, ``chebyshev`` the Chebyshev weight, ``hermite`` the Gaussian
    weight, and ``coordinate`` (normalized indicators of the first ``n`` atoms)
    a discrete space. ``gram_schmidt_custom`` orthonormalizes ``seeds``.
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    required = {"legendre": "lebesgue", "fourier": "lebesgue", "chebyshev": "chebyshev",
                "hermite": "gaussian", "coordinate": "discrete"}
    if family == "gram_schmidt_custom":
        if seeds is None or len(seeds) != n:
            raise ParameterError(f"gram_schmidt_custom needs exactly n={n} seed functions")
        return OrthonormalBasis(space, n, family, _gram_schmidt(space, list(seeds)))
    if family not in required:
        raise ParameterError(f"unknown basis family {family!r}")
    if space.weight != required[family]:
        raise ParameterError(f"{family} basis needs a {required[family]} space, got {space.weight}")
    if space.kind == "discrete" and n > space.size:
        raise ParameterError(f"n={n} exceeds the {space.size} atoms of the space")
    builder = {"legendre": _legendre, "chebyshev": _chebyshev, "hermite": _hermite,
               "fourier": _fourier, "coordinate": _coordinate}[family]
    fn, const = builder(space, n)
    return OrthonormalBasis(space, n, family, fn, None if const is None else float(const))


# --- projections -------------------------------------------------------------


def project_h(basis: OrthonormalBasis, f: FunctionHandle) -> FunctionHandle:
    """``P_H f = sum_j <phi_j, f> phi_j``."""
    return basis.combination(basis.coefficients(f), f"P_H[{f.name}]")


def project_perp(basis: OrthonormalBasis, f: FunctionHandle) -> FunctionHandle:
    """``P_{H^perp} f = f - P_H f``, kept as a closure so it is exact at any point."""
    c = basis.coefficients(f)
    return FunctionHandle(lambda x: f(x) - basis.evaluate(x) @ c, f"P_perp[{f.name}]")


def apply_dt(basis: OrthonormalBasis, f: FunctionHandle, t: float) -> FunctionHandle:
    """``D_t f = P_H f + t P_{H^perp} f``."""
    c = basis.coefficients(f)
    return FunctionHandle(
        lambda x: t * f(x) + (1 - t) * (basis.evaluate(x) @ c), f"D_{t}[{f.name}]"
    )


# --- wedge functions ---------------------------------------------------------


def evaluation_matrix(fs: Sequence[FunctionHandle], ys) -> np.ndarray:
    """``(f_j(y_i))``; a leading batch axis on ``ys`` is carried through."""
    ys = np.asarray(ys, dtype=float)
    return np.stack([f(ys) for f in fs], axis=-1)


def wedge_eval(fs: Sequence[FunctionHandle], ys):
    """``(f_1 ^ ... ^ f_m)(y_1..y_m) = det(f_j(y_i))``.

    ``ys`` of shape ``(m,)`` gives a scalar; shape ``(B, m)`` gives ``B`` values.
    """
    ys = np.asarray(ys, dtype=float)
    m = len(fs)
    if m < 1 or ys.shape[-1] != m:
        raise DimensionError(f"{m} functions evaluated at points of shape {ys.shape}")
    E = evaluation_matrix(fs, ys)
    if ys.ndim == 1:
        return determinant(E)
    return det_batch(E)


def wedge_inner(gs: Sequence[FunctionHandle], hs: Sequence[FunctionHandle], space: GroundSpace) -> float:
    """Wedge pairing in ``L2(S^m, lambda^m / m!)`` through the Gram determinant ``det(<g_i, h_j>)``."""
    if len(gs) != len(hs) or not gs:
        raise DimensionError("wedges of different or zero order")
    return determinant(gram_matrix(space, gs, hs))


def wedge_norm_sq(fs: Sequence[FunctionHandle], space: GroundSpace) -> float:
    return wedge_inner(fs, fs, space)


def _det_tensor(values: np.ndarray) -> np.ndarray:
    """Tensor ``D[a_1..a_m] = det(g_j(x_{a_i}))`` over the node grid (Leibniz expansion)."""
    m = values.shape[0]
    out = 0.0
    for perm in itertools.permutations(range(m)):
        sign = np.linalg.det(np.eye(m)[list(perm)])
        term = values[perm[0]]
        for i in range(1, m):
            term = np.multiply.outer(term, values[perm[i]])
        out = out + sign * term
    return out


def wedge_inner_tensor(gs: Sequence[FunctionHandle], hs: Sequence[FunctionHandle], space: GroundSpace) -> float:
    """Diagnostic: the wedge pairing by m-fold tensor quadrature over ``S^m`` (m <= 3)."""
    m = len(gs)
    if m != len(hs) or not 1 <= m <= 3:
        raise DimensionError("tensor quadrature is limited to equal orders 1 <= m <= 3")
    G = np.array([space.values(g) for g in gs])
    H = np.array([space.values(h) for h in hs])
    W = space.weights
    for _ in range(m - 1):
        W = np.multiply.outer(W, space.weights)
    return float(np.sum(W * _det_tensor(G) * _det_tensor(H))) / math.factorial(m)


# --- graded projections ------------------------------------------------------


@dataclass(frozen=True)
class WedgeTerm:
    coefficient: float
    factors: tuple
    parts: tuple


@dataclass(frozen=True)
class GradedWedge:
    """A sum of wedge terms of order ``m`` with exactly ``k`` factors in ``H^perp`` each."""

    m: int
    k: int
    terms: tuple

    def __post_init__(self):
        for t in self.terms:
            if len(t.factors) != self.m or sum(p == PERP_PART for p in t.parts) != self.k:
                raise DimensionError("term does not belong to this grade")

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __call__(self, ys):
        ys = np.asarray(ys, dtype=float)
        total = np.zeros(ys.shape[:-1])
        for t in self.terms:
            total = total + t.coefficient * wedge_eval(t.factors, ys)
        return float(total) if ys.ndim == 1 else total

    def _term_values(self, space):
        return [np.array([space.values(f) for f in t.factors]) for t in self.terms]

    def inner(self, other: "GradedWedge", space: GroundSpace) -> float:
        """Wedge pairing, expanded term by term into Gram determinants."""
        if self.m != other.m:
            raise DimensionError("wedges of different order")
        mine, theirs = self._term_values(space), other._term_values(space)
        total = []
        for s, vs in zip(self.terms, mine):
            for t, vt in zip(other.terms, theirs):
                total.append(s.coefficient * t.coefficient * determinant((vs * space.weights) @ vt.T))
        return math.fsum(total)

    def norm_sq(self, space: GroundSpace) -> float:
        return self.inner(self, space)


def _is_negligible(space, part: FunctionHandle, source_norm: float) -> bool:
    v = space.values(part)
    return math.sqrt(max(space.integrate(v * v), 0.0)) <= _ZERO_FACTOR * source_norm


def graded_project(basis: OrthonormalBasis, fs: Sequence[FunctionHandle], k: int) -> GradedWedge:
    """Component of ``f_1 ^ ... ^ f_m`` sending exactly ``k`` factors to ``H^perp``.

    Sum over k-subsets ``B`` of factor positions of the wedge whose factor ``p``
    is ``P_{H^perp} f_p`` for ``p`` in ``B`` and ``P_H f_p`` otherwise. Terms with
    a numerically vanishing factor are dropped, so e.g. ``k >= 1`` on
    functions of ``H`` yields the empty (zero) wedge.
    """
    m = len(fs)
    if not 0 <= k <= m:
        raise DimensionError(f"grade k={k} outside [0, {m}]")
    space = basis.space
    norms = [math.sqrt(max(inner(space, f, f), 0.0)) for f in fs]
    ph = [project_h(basis, f) for f in fs]
    pp = [project_perp(basis, f) for f in fs]
    zero_h = [_is_negligible(space, g, s) for g, s in zip(ph, norms)]
    zero_p = [_is_negligible(space, g, s) for g, s in zip(pp, norms)]
    terms = []
    for B in itertools.combinations(range(m), k):
        chosen = set(B)
        if any(zero_p[p] if p in chosen else zero_h[p] for p in range(m)):
            continue
        terms.append(WedgeTerm(
            1.0,
            tuple(pp[p] if p in chosen else ph[p] for p in range(m)),
            tuple(PERP_PART if p in chosen else H_PART for p in range(m)),
        ))
    return GradedWedge(m, k, tuple(terms))


def pi_k_norm_sq(basis: OrthonormalBasis, fs: Sequence[FunctionHandle], k: int) -> float:
    """Squared wedge norm of the grade-``k`` component, by Gram determinants only."""
    return max(graded_project(basis, fs, k).norm_sq(basis.space), 0.0)
