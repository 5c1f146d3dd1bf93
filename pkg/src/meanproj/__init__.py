"""Interpolation at the points of a projection DPP and the statistics of its minors."""

from .dpp_sampler import (
    KernelMatrix,
    PointConfiguration,
    RngStream,
    discretize,
    enumerate_discrete,
    log_density,
    projection_kernel,
    sample_continuous,
    sample_discrete,
)
from .estimator import (
    closed_form_variance,
    empirical_variance,
    estimate_mean_minors,
    ez_estimate,
    interpolate,
    minor_statistic,
    second_moment_oracle,
    target_minor,
    variance_report,
    verify_discrete_theorem,
)
from .function_space import (
    FunctionHandle,
    GroundSpace,
    OrthonormalBasis,
    graded_project,
    inner,
    make_ground_space,
    orthonormal_basis,
    pi_k_norm_sq,
    wedge_eval,
    wedge_inner,
)
from .matrix_core import IndexSet, RationalMatrix, determinant, replace_columns, solve, submatrix
from .minor_identities import fuzz_identities

__version__ = "0.1.0"
