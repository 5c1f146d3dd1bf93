"""Projection DPPs: kernels, exact enumeration, chain-rule sampling, densities.

Continuous spaces are handled by restricting the process to the quadrature
nodes: the kernel ``sqrt(w_a w_b) sum_j phi_j(x_a) phi_j(x_b)`` is again a
projection whenever the quadrature integrates ``phi_i phi_j`` exactly, and its
DPP is the projection DPP of the quadrature measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import (
    DegeneracyError,
    DiscretizationError,
    EnumerationSizeError,
    ParameterError,
    RankError,
)
from .function_space import GroundSpace, OrthonormalBasis
from .matrix_core import IndexSet, det_batch, determinant, index_subsets

MAX_ENUMERATION_SIZE = 20
_ENUMERATION_CHUNK = 16384


@dataclass(frozen=True)
class RngStream:
    """Counter-based (Philox) random stream addressed by ``(seed, stream, counter)``."""

    seed: int
    stream: int = 0
    counter: int = 0

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(self.stream,)))
        if self.counter:
            bitgen.advance(self.counter)
        return np.random.Generator(bitgen)

    def substream(self, stream: int) -> "RngStream":
        return replace(self, stream=stream, counter=0)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Rank-``n`` orthogonal projection ``K = Phi Phi^T`` on ``R^d``, stored through its frame ``Phi``."""

    frame: np.ndarray

    def __post_init__(self):
        frame = np.asarray(self.frame, dtype=float)
        if frame.ndim != 2 or frame.shape[1] < 1 or frame.shape[0] < frame.shape[1]:
            raise ParameterError(f"frame must be d x n with d >= n >= 1, got {frame.shape}")
        object.__setattr__(self, "frame", frame)
        K = self.matrix
        if np.max(np.abs(K - K.T)) > 1e-10:
            raise ParameterError("kernel is not symmetric")
        if np.max(np.abs(K @ K - K)) > 1e-8:
            raise ParameterError("kernel is not idempotent")
        if abs(np.trace(K) - self.rank) > 1e-8:
            raise ParameterError("kernel trace differs from its rank")

    @classmethod
    def from_matrix(cls, K, rank: int | None = None) -> "KernelMatrix":
        K = np.asarray(K, dtype=float)
        vals, vecs = np.linalg.eigh((K + K.T) / 2)
        if rank is None:
            rank = int(round(np.trace(K)))
        return cls(vecs[:, ::-1][:, :rank])

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.frame @ self.frame.T

    @property
    def rank(self) -> int:
        return self.frame.shape[1]

    @property
    def size(self) -> int:
        return self.frame.shape[0]


@dataclass(frozen=True)
class PointConfiguration:
    """A sample of ``n`` points; ``nodes`` records quadrature-node indices when discretized."""

    points: tuple
    nodes: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))
        if self.nodes is not None:
            object.__setattr__(self, "nodes", tuple(int(i) for i in self.nodes))

    @property
    def distinct(self) -> bool:
        return len(set(self.points)) == len(self.points)

    def __len__(self):
        return len(self.points)


def projection_kernel(vectors) -> KernelMatrix:
    """Kernel of the orthogonal projection onto the span of the columns of ``vectors`` (d x n)."""
    V = np.asarray(vectors, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    if s.size == 0 or s[-1] <= 1e-10 * s[0]:
        raise RankError("spanning vectors are linearly dependent")
    return KernelMatrix(U)


def enumerate_discrete(K: KernelMatrix) -> list:
    """Every n-subset with its probability ``det K_S`` (computed as ``det(Phi_S)^2``)."""
    d, n = K.size, K.rank
    if d > MAX_ENUMERATION_SIZE:
        raise EnumerationSizeError(f"refusing to enumerate subsets of a ground set of size {d}")
    subsets = list(index_subsets(d, n))
    rows = np.array([S.zero_based for S in subsets], dtype=int).reshape(len(subsets), n)
    probs = np.empty(len(subsets))
    for lo in range(0, len(subsets), _ENUMERATION_CHUNK):
        chunk = rows[lo : lo + _ENUMERATION_CHUNK]
        probs[lo : lo + len(chunk)] = det_batch(K.frame[chunk]) ** 2
    return list(zip(subsets, probs.tolist()))


def sample_indices(K: KernelMatrix, size: int, generator: np.random.Generator) -> np.ndarray:
    """``size`` independent samples as a ``(size, n)`` array of 0-based indices in draw order.

    Chain rule: each point is drawn from the residual intensity
    ``|phi_a|^2 - sum_l <phi_a, u_l>^2``, where ``u_l`` orthonormalize (with one
    reorthogonalization pass) the frame rows of the points already drawn.
    """
    frame = K.frame
    d, n = frame.shape
    resid = np.tile(np.einsum("ij,ij->i", frame, frame), (size, 1))
    U = np.zeros((size, n, n))
    picks = np.empty((size, n), dtype=int)
    rows = np.arange(size)
    for k in range(n):
        cdf = np.cumsum(resid, axis=1)
        total = cdf[:, -1]
        if np.any(total < 1e-8 * (n - k)):
            raise DegeneracyError(f"residual intensity vanished after {k} of {n} points")
        # u in (0, total] so zero-mass indices are never selected
        u = (1.0 - generator.random(size)) * total
        idx = np.minimum(np.sum(cdf < u[:, None], axis=1), d - 1)
        picks[:, k] = idx
        v = frame[idx]
        for _ in range(2):
            coef = np.einsum("bjn,bn->bj", U[:, :k], v)
            v = v - np.einsum("bj,bjn->bn", coef, U[:, :k])
        v /= np.linalg.norm(v, axis=1)[:, None]
        U[:, k] = v
        resid -= (v @ frame.T) ** 2
        resid[rows[:, None], picks[:, : k + 1]] = 0.0
        np.maximum(resid, 0.0, out=resid)
    return picks


def sample_discrete(K: KernelMatrix, rng: RngStream) -> IndexSet:
    """One draw of the projection DPP with kernel ``K``, as a 1-based index set."""
    picks = sample_indices(K, 1, rng.generator())[0]
    return IndexSet.from_zero_based(sorted(picks.tolist()), K.size)


def discretize(space: GroundSpace, basis: OrthonormalBasis):
    """Restrict the continuous process to quadrature nodes; returns ``(kernel, nodes)``."""
    if space.kind == "interval" and space.size < 4 * basis.n:
        raise ParameterError(f"quadrature with {space.size} nodes is too coarse for n={basis.n} (need >= 4n)")
    frame = np.sqrt(space.weights)[:, None] * basis.evaluate(space.nodes)
    deviation = np.max(np.abs(frame.T @ frame - np.eye(basis.n)))
    if deviation > 1e-6:
        raise DiscretizationError(f"Gram matrix deviates from identity by {deviation:.2e} on the nodes")
    return KernelMatrix(frame), space.nodes


def sample_points(basis: OrthonormalBasis, size: int, generator: np.random.Generator,
                  kernel: KernelMatrix | None = None):
    """``size`` configurations as ``(points, node_indices)``, both shaped ``(size, n)``."""
    if kernel is None:
        kernel, _ = discretize(basis.space, basis)
    idx = sample_indices(kernel, size, generator)
    return basis.space.nodes[idx], idx


def sample_continuous(space: GroundSpace, basis: OrthonormalBasis, rng: RngStream,
                      kernel: KernelMatrix | None = None) -> PointConfiguration:
    if basis.space is not space:
        raise ParameterError("basis lives on a different ground space")
    points, idx = sample_points(basis, 1, rng.generator(), kernel)
    return PointConfiguration(tuple(points[0]), tuple(idx[0]))


def log_density(basis: OrthonormalBasis, X: PointConfiguration) -> float:
    """``log |det(phi_j(x_i))|^2``; ``-inf`` when the determinant vanishes."""
    if len(X) != basis.n:
        raise ParameterError(f"configuration has {len(X)} points, expected {basis.n}")
    d = determinant(basis.evaluate(np.asarray(X.points)))
    if d == 0.0:
        return -math.inf
    return 2.0 * math.log(abs(d))


def one_point_intensity(basis: OrthonormalBasis, x) -> np.ndarray:
    """``K(x, x) = sum_j phi_j(x)^2``."""
    return np.sum(basis.evaluate(x) ** 2, axis=-1)
