"""Multivariate Chebyshev coverage bounds for Mahalanobis ellipsoids."""

from mvcheb.chebyshev import (
    Ellipsoid,
    Whitener,
    chebyshev_coverage_bound,
    conditional_coverage_bound,
    ellipsoid_contains,
    gaussian_exact_coverage,
    mahalanobis_sq,
    make_whitener,
    markov_tail_bound,
    regularized_gamma_p,
)
from mvcheb.errors import (
    DegenerateModel,
    InvalidInput,
    InvalidSpec,
    MvchebError,
    NoConvergence,
    SingularBlock,
)
from mvcheb.linalg import SpectralDecomp, jacobi_eigendecompose, reconstruct, sym_matrix
from mvcheb.moments import ConditionalMoments, MomentModel, fit_moments, from_moments, schur_conditional

__version__ = "0.1.0"
