"""Nonstationary spatial modelling by elastic alignment of regional variograms."""

__version__ = "0.1.0"

from .deformation import (
    DeformedEmbedding,
    WarpedDistanceMatrix,
    cmds,
    embed,
    embedding_nmse,
    global_distance,
    select_dimension,
    warped_distance_matrix,
)
from .estimators import DeformationKriging, RegionalDeformation, StationaryKriging
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateVariogramError,
    DomainError,
    NotPositiveDefiniteError,
    NumericalError,
    ParameterError,
    PipelineError,
    VgwarpError,
)
from .geometry import Partition, region_of, segment_lengths, weights
from .gp import KernelField, build_cov_matrix, ns_matern_cov, simulate
from .kriging import DeformedCovModel, correlation_map, fit_deformed, krige, ns_cov
from .registration import WarpingFunction, dp_align, register_set, smooth_and_extend, standardize, to_srvf
from .scoring import ScoreReport, crps_gaussian, logs_gaussian, mae, mspe
from .variogram import (
    VariogramModel,
    determine_ht,
    empirical_variogram,
    fit_matern_mle,
    matern_covariance,
    matern_semivariance,
    sample_on_grid,
)
