"""Random interpolation projections and unbiased estimation of their minors.

For a configuration ``X = (x_1..x_n)`` the interpolation projection ``P_X``
maps ``f`` to the unique element of ``H`` agreeing with ``f`` on ``X``. In the
basis ``phi`` this is the coefficient matrix ``A`` solving ``M A = F`` with
``M = (phi_j(x_i))`` and ``F = (f_j(x_i))``; the minors ``det A^I`` are the
coordinates of ``P_X f_1 ^ ... ^ P_X f_m`` in the orthonormal family
``phi_I``. Their expectations under the projection DPP are the Gram minors
``det G^I`` with ``G = (<phi_i, f_j>)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dpp_sampler import (
    KernelMatrix,
    PointConfiguration,
    RngStream,
    discretize,
    enumerate_discrete,
    sample_points,
)
from .errors import (
    CrossCheckError,
    DegeneracyError,
    DimensionError,
    InternalContradictionError,
    ParameterError,
    SingularMatrixError,
)
from .function_space import (
    FunctionHandle,
    OrthonormalBasis,
    gram_matrix,
    pi_k_norm_sq,
)
from .matrix_core import (
    IndexSet,
    det_batch,
    determinant,
    index_subsets,
    solve,
    solve_batch,
)

MAX_REDRAWS = 100
BLOCK_SIZE = 4096
CROSS_CHECK_TOLERANCE = 1e-9
# statistics constant to this relative level carry no sampling information
ROUNDOFF_FLOOR = 1e-12


def _points(X) -> np.ndarray:
    if isinstance(X, PointConfiguration):
        return np.asarray(X.points, dtype=float)
    return np.asarray(X, dtype=float)


def _check_order(basis: OrthonormalBasis, fs):
    m = len(fs)
    if not 1 <= m <= basis.n:
        raise DimensionError(f"need 1 <= m <= n, got m={m}, n={basis.n}")
    return m


def _check_subset(I: IndexSet, basis: OrthonormalBasis, m: int):
    if I.universe != basis.n or len(I) != m:
        raise DimensionError(f"index set {I} is not an {m}-subset of [1, {basis.n}]")


# --- interpolation -----------------------------------------------------------


@dataclass(frozen=True)
class InterpolationResult:
    """``P_X f = sum_j coefficients[j] phi_j`` for the configuration ``X``."""

    coefficients: np.ndarray
    configuration: PointConfiguration
    abs_det: float

    def function(self, basis: OrthonormalBasis) -> FunctionHandle:
        return basis.combination(self.coefficients, "P_X f")


def interpolate(basis: OrthonormalBasis, X, f: FunctionHandle) -> InterpolationResult:
    """Solve ``sum_j alpha_j phi_j(x_i) = f(x_i)`` for the element of ``H`` matching ``f`` on ``X``."""
    pts = _points(X)
    if pts.shape != (basis.n,):
        raise DimensionError(f"configuration has shape {pts.shape}, expected ({basis.n},)")
    M = basis.evaluate(pts)
    rhs = f(pts)
    try:
        alpha = solve(M, rhs)
    except SingularMatrixError as exc:
        raise DegeneracyError(f"configuration is not a uniqueness set for H: {exc}") from exc
    scale = max(1.0, float(np.max(np.abs(rhs))))
    residual = float(np.max(np.abs(M @ alpha - rhs)))
    if residual > 1e-9 * scale:
        raise DegeneracyError(f"interpolation residual {residual:.2e} too large (ill-conditioned X)")
    config = X if isinstance(X, PointConfiguration) else PointConfiguration(tuple(pts))
    return InterpolationResult(alpha, config, abs(determinant(M)))


# --- wedge coefficients and minor statistics ---------------------------------


@dataclass(frozen=True)
class WedgeCoefficients:
    """Coordinates of an element of the m-th exterior power of ``H`` in the family ``phi_I``."""

    m: int
    n: int
    values: dict

    def __post_init__(self):
        if len(self.values) != math.comb(self.n, self.m):
            raise DimensionError(f"expected C({self.n},{self.m}) coefficients, got {len(self.values)}")

    def norm_sq(self) -> float:
        return math.fsum(v * v for v in self.values.values())

    def distance_sq(self, other: "WedgeCoefficients") -> float:
        return math.fsum((self.values[I] - other.values[I]) ** 2 for I in self.values)


def wedge_coefficients(A) -> WedgeCoefficients:
    """All maximal-column minors ``det A^I`` of an ``n x m`` matrix."""
    A = np.asarray(A, dtype=float)
    n, m = A.shape
    subsets = list(index_subsets(n, m))
    rows = np.array([I.zero_based for I in subsets])
    dets = det_batch(A[rows])
    return WedgeCoefficients(m, n, dict(zip(subsets, dets.tolist())))


def target_matrix(basis: OrthonormalBasis, fs: Sequence[FunctionHandle]) -> np.ndarray:
    """``G = (<phi_i, f_j>)``, shape ``(n, m)``."""
    return np.column_stack([basis.coefficients(f) for f in fs])


def _subset_rows(n, m):
    subsets = list(index_subsets(n, m))
    return subsets, np.array([I.zero_based for I in subsets], dtype=int).reshape(len(subsets), m)


def _statistics(basis, fs, points, rows):
    """Minors ``det A^I`` for a batch of configurations, by two independent routes.

    Returns ``(stats, singular)`` with ``stats`` of shape ``(B, #I)``; rows of
    degenerate configurations are NaN. Route one solves ``M A = F`` and takes
    minors; route two is Cramer's rule for minors,
    ``det M[I <- F] / det M``. Disagreement raises :class:`CrossCheckError`.
    """
    points = np.asarray(points, dtype=float)
    batch, n = points.shape
    M = basis.evaluate(points)
    F = np.stack([f(points) for f in fs], axis=-1)
    A, singular, _ = solve_batch(M, F)
    direct = det_batch(A[:, rows, :])

    ok = ~singular
    replaced = np.repeat(M[:, None, :, :], len(rows), axis=1)
    for s, cols in enumerate(rows):
        replaced[:, s][:, :, cols] = F
    det_m = det_batch(M)
    with np.errstate(divide="ignore", invalid="ignore"):
        cramer = det_batch(replaced) / det_m[:, None]
    # Hadamard bound on every m x m minor of A
    scale = np.prod(np.linalg.norm(np.where(ok[:, None, None], A, 0.0), axis=1), axis=1)
    gap = np.abs(direct - cramer)
    bad = ok[:, None] & ~(gap <= CROSS_CHECK_TOLERANCE * np.maximum(scale[:, None], np.abs(direct)))
    if bad.any():
        b = int(np.nonzero(bad.any(axis=1))[0][0])
        raise CrossCheckError(
            f"solve and Cramer routes disagree at X={points[b].tolist()}: "
            f"{direct[b].tolist()} vs {cramer[b].tolist()}"
        )
    direct[singular] = np.nan
    return direct, singular


def minor_statistic(basis: OrthonormalBasis, X, fs: Sequence[FunctionHandle], I: IndexSet) -> float:
    """``det A^I`` for one configuration, cross-checked against Cramer's rule for minors."""
    m = _check_order(basis, fs)
    _check_subset(I, basis, m)
    pts = _points(X)
    if pts.shape != (basis.n,):
        raise DimensionError(f"configuration has shape {pts.shape}, expected ({basis.n},)")
    rows = np.array([I.zero_based])
    stats, singular = _statistics(basis, fs, pts[None], rows)
    if singular[0]:
        raise DegeneracyError("configuration is not a uniqueness set for H")
    return float(stats[0, 0])


def minor_statistics(basis: OrthonormalBasis, points, fs: Sequence[FunctionHandle]) -> np.ndarray:
    """``det A^I`` for every m-subset ``I`` and every configuration in ``points`` (shape ``(B, n)``).

    Returns a ``(B, C(n, m))`` array with subsets in lexicographic order.
    """
    m = _check_order(basis, fs)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != basis.n:
        raise DimensionError(f"configurations have shape {pts.shape}, expected (B, {basis.n})")
    _, rows = _subset_rows(basis.n, m)
    stats, singular = _statistics(basis, fs, pts, rows)
    if singular.any():
        raise DegeneracyError(f"{int(singular.sum())} configurations are not uniqueness sets for H")
    return stats


def target_minor(basis: OrthonormalBasis, fs: Sequence[FunctionHandle], I: IndexSet) -> float:
    """``det G^I``."""
    m = _check_order(basis, fs)
    _check_subset(I, basis, m)
    return determinant(target_matrix(basis, fs)[list(I.zero_based)])


# --- Monte Carlo driver ------------------------------------------------------


def _as_stream(rng) -> RngStream:
    return rng if isinstance(rng, RngStream) else RngStream(int(rng))


def _simulate(basis, fs, N, rng, rows, *, kernel=None, block_size=BLOCK_SIZE, workers=1):
    """Per-replicate statistics ``(N, #I)`` and the number of redraws.

    Replicates are cut into fixed blocks; block ``b`` draws from substream
    ``b`` of ``rng``, so results do not depend on ``workers``.
    """
    if N < 1:
        raise ParameterError("need at least one replicate")
    stream = _as_stream(rng)
    if kernel is None:
        kernel, _ = discretize(basis.space, basis)
    starts = list(range(0, N, block_size))

    def run(b):
        gen = stream.substream(b).generator()
        size = min(block_size, N - starts[b])
        pts, _ = sample_points(basis, size, gen, kernel)
        stats, singular = _statistics(basis, fs, pts, rows)
        attempts = np.zeros(size, dtype=int)
        while singular.any():
            where = np.nonzero(singular)[0]
            attempts[where] += 1
            if attempts.max() > MAX_REDRAWS:
                raise DegeneracyError(f"replicate needed more than {MAX_REDRAWS} redraws")
            new_pts, _ = sample_points(basis, where.size, gen, kernel)
            new_stats, new_singular = _statistics(basis, fs, new_pts, rows)
            stats[where] = new_stats
            singular[where] = new_singular
        return stats, int(attempts.sum())

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(starts))))
    else:
        results = [run(b) for b in range(len(starts))]
    return np.concatenate([r[0] for r in results]), sum(r[1] for r in results)


def _mean_var(x: np.ndarray):
    n = x.size
    mean = math.fsum(x.tolist()) / n
    var = math.fsum(((x - mean) ** 2).tolist()) / (n - 1) if n > 1 else 0.0
    return mean, var


def z_score(mean: float, target: float, stderr: float) -> float:
    """``(mean - target) / stderr``; statistics constant up to roundoff give 0 when on target."""
    floor = ROUNDOFF_FLOOR * (1.0 + abs(target))
    diff = mean - target
    if stderr <= floor:
        return 0.0 if abs(diff) <= floor else math.copysign(math.inf, diff)
    return diff / stderr


@dataclass(frozen=True)
class MinorEstimate:
    index_set: IndexSet
    mean: float
    variance: float
    stderr: float
    target: float
    z: float


@dataclass(frozen=True)
class MomentReport:
    m: int
    n: int
    replicates: int
    seed: int
    redraws: int
    estimates: tuple

    @property
    def max_abs_z(self) -> float:
        return max(abs(e.z) for e in self.estimates)


def estimate_mean_minors(basis: OrthonormalBasis, fs: Sequence[FunctionHandle], N: int, rng, *,
                         block_size: int = BLOCK_SIZE, workers: int = 1) -> MomentReport:
    """Monte Carlo means of ``det A^I`` for every m-subset ``I``, scored against ``det G^I``."""
    m = _check_order(basis, fs)
    if N < 2:
        raise ParameterError("need N >= 2 replicates for a standard error")
    subsets, rows = _subset_rows(basis.n, m)
    stats, redraws = _simulate(basis, fs, N, rng, rows, block_size=block_size, workers=workers)
    G = target_matrix(basis, fs)
    targets = det_batch(G[rows])
    estimates = []
    for s, I in enumerate(subsets):
        mean, var = _mean_var(stats[:, s])
        stderr = math.sqrt(var / N)
        target = float(targets[s])
        estimates.append(MinorEstimate(I, mean, var, stderr, target, z_score(mean, target, stderr)))
    return MomentReport(m, basis.n, N, _as_stream(rng).seed, redraws, tuple(estimates))


# --- variance ----------------------------------------------------------------


@dataclass(frozen=True)
class GradeContribution:
    k: int
    binomial: int
    norm_sq: float
    contribution: float


@dataclass(frozen=True)
class VarianceReport:
    """Closed-form and/or empirical variance of the random wedge ``P_X f_1 ^ ... ^ P_X f_m``."""

    m: int
    n: int
    closed_form: float | None = None
    contributions: tuple = ()
    second_moments: tuple = ()
    empirical: float | None = None
    empirical_stderr: float | None = None
    replicates: int = 0
    seed: int | None = None
    redraws: int = 0

    def within(self, rel: float = 0.05, sigmas: float = 4.0) -> bool:
        """Empirical within ``rel`` relative or ``sigmas`` standard errors of the closed form, whichever is looser.

        Gaps below the roundoff floor always pass, so an exactly zero variance is not failed on roundoff.
        """
        floor = ROUNDOFF_FLOOR * (1.0 + abs(self.closed_form))
        allowed = max(rel * abs(self.closed_form), sigmas * self.empirical_stderr, floor)
        return abs(self.empirical - self.closed_form) <= allowed


def second_moment_oracle(basis: OrthonormalBasis, fs: Sequence[FunctionHandle], I: IndexSet) -> float:
    """``E[(det A^I)^2] = det(<f_i, (P_{H^perp} + P_{H_I}) f_j>)``.

    Evaluated as ``det(<f_i, f_j> - sum_{b not in I} <phi_b, f_i><phi_b, f_j>)``.
    """
    m = _check_order(basis, fs)
    _check_subset(I, basis, m)
    G = target_matrix(basis, fs)
    Gc = G[list(I.complement().zero_based)]
    return determinant(gram_matrix(basis.space, fs) - Gc.T @ Gc)


def closed_form_variance(basis: OrthonormalBasis, fs: Sequence[FunctionHandle]) -> VarianceReport:
    """``sum_{k=1}^m C(n-m+k, k) ||Pi_k(f_1 ^ ... ^ f_m)||^2``, with the per-``I`` second-moment oracle values."""
    m = _check_order(basis, fs)
    n = basis.n
    parts = []
    for k in range(1, m + 1):
        c = math.comb(n - m + k, k)
        nsq = pi_k_norm_sq(basis, fs, k)
        parts.append(GradeContribution(k, c, nsq, c * nsq))
    moments = tuple((I, second_moment_oracle(basis, fs, I)) for I in index_subsets(n, m))
    return VarianceReport(
        m, n,
        closed_form=math.fsum(p.contribution for p in parts),
        contributions=tuple(parts),
        second_moments=moments,
    )


def empirical_variance(basis: OrthonormalBasis, fs: Sequence[FunctionHandle], N: int, rng, *,
                       block_size: int = BLOCK_SIZE, workers: int = 1) -> VarianceReport:
    """Monte Carlo estimate of ``E || P_X f ^ ... - P_H f ^ ... ||^2`` as ``E sum_I (det A^I - det G^I)^2``."""
    m = _check_order(basis, fs)
    if N < 2:
        raise ParameterError("need N >= 2 replicates for a standard error")
    _, rows = _subset_rows(basis.n, m)
    stats, redraws = _simulate(basis, fs, N, rng, rows, block_size=block_size, workers=workers)
    targets = det_batch(target_matrix(basis, fs)[rows])
    sq = np.sum((stats - targets) ** 2, axis=1)
    mean, var = _mean_var(sq)
    return VarianceReport(
        m, basis.n,
        empirical=mean,
        empirical_stderr=math.sqrt(var / N),
        replicates=N,
        seed=_as_stream(rng).seed,
        redraws=redraws,
    )


def variance_report(basis: OrthonormalBasis, fs: Sequence[FunctionHandle], N: int, rng, **kw) -> VarianceReport:
    """Closed form and empirical side in one report."""
    emp = empirical_variance(basis, fs, N, rng, **kw)
    closed = closed_form_variance(basis, fs)
    return replace(closed, empirical=emp.empirical, empirical_stderr=emp.empirical_stderr,
                   replicates=emp.replicates, seed=emp.seed, redraws=emp.redraws)


# --- m = 1 -------------------------------------------------------------------


@dataclass(frozen=True)
class EZEstimate:
    """Interpolation coefficients of one configuration; ``integral`` estimates ``int f d lambda``."""

    coefficients: np.ndarray
    integral: float | None


def ez_estimate(basis: OrthonormalBasis, f: FunctionHandle, X) -> EZEstimate:
    """Unbiased estimate of ``(<phi_j, f>)_j`` from one configuration.

    When ``phi_1`` is the constant ``c``, ``alpha_1 / c`` is an unbiased
    estimate of ``int f d lambda``.
    """
    alpha = interpolate(basis, X, f).coefficients
    integral = None if basis.constant is None else float(alpha[0] / basis.constant)
    return EZEstimate(alpha, integral)


# --- discrete check by enumeration -------------------------------------------


@dataclass(frozen=True)
class DiscreteTheoremReport:
    d: int
    n: int
    subsets: int
    max_deviation: float
    by_order: dict = field(default_factory=dict)
    max_projection_error: float = 0.0


def _oblique_projection(frame, X):
    """Projection onto ``range(frame)`` along the coordinate axes outside ``X``."""
    d, n = frame.shape
    inv, singular, _ = solve_batch(frame[list(X)][None], np.eye(n)[None], threshold=1e-14)
    if singular[0]:
        return None
    P = np.zeros((d, d))
    P[:, list(X)] = frame @ inv[0]
    return P


def verify_discrete_theorem(K: KernelMatrix, m: int | None = None) -> DiscreteTheoremReport:
    """Average every ``m x m`` minor of ``P_X`` over the DPP by exhaustive enumeration.

    ``m=None`` checks all orders ``1..n``. The report holds the largest
    absolute gap between the averaged minors and the minors of ``K``, and the
    largest deviation of any ``P_X`` from being a projection onto ``H``.
    """
    d, n = K.size, K.rank
    if d > 12:
        raise ParameterError(f"enumeration guard: d={d} > 12")
    orders = range(1, n + 1) if m is None else [m]
    if any(not 1 <= o <= n for o in orders):
        raise DimensionError(f"order m={m} outside [1, {n}]")
    frame, Kmat = K.frame, K.matrix
    sums = {o: np.zeros((math.comb(d, o), math.comb(d, o))) for o in orders}
    proj_err = 0.0
    count = 0
    for S, p in enumerate_discrete(K):
        if p <= 1e-24:
            continue
        P = _oblique_projection(frame, S.zero_based)
        if P is None:
            raise InternalContradictionError(f"subset {S} has probability {p:.3e} but a singular frame block")
        count += 1
        proj_err = max(proj_err, float(np.max(np.abs(P @ P - P))), float(np.max(np.abs(Kmat @ P - P))))
        for o in orders:
            _, all_rows = _subset_rows(d, o)
            # only column sets inside X give nonzero minors
            for C in index_subsets(n, o):
                cols = [S.zero_based[c] for c in C.zero_based]
                col_pos = _subset_position(cols, d)
                block = P[:, cols][all_rows]
                sums[o][:, col_pos] += p * det_batch(block)
    by_order = {}
    for o in orders:
        _, all_rows = _subset_rows(d, o)
        exact = det_batch(Kmat[all_rows[:, None, :, None], all_rows[None, :, None, :]])
        by_order[o] = float(np.max(np.abs(sums[o] - exact)))
    return DiscreteTheoremReport(d, n, count, max(by_order.values()), by_order, proj_err)


def _subset_position(cols, d) -> int:
    """Lexicographic rank of a sorted 0-based subset among subsets of the same size."""
    pos, prev, k = 0, -1, len(cols)
    for i, c in enumerate(cols):
        for skipped in range(prev + 1, c):
            pos += math.comb(d - skipped - 1, k - i - 1)
        prev = c
    return pos
