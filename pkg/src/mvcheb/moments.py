"""Mean/covariance estimation and Gaussian-linear conditioning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mvcheb.errors import InvalidInput, SingularBlock
from mvcheb.linalg import SpectralDecomp, _frozen, jacobi_eigendecompose, sym_matrix

POPULATION = "population"
SAMPLE = "sample"
DIVISOR_MODES = (POPULATION, SAMPLE)

DEFAULT_RANK_TOL = 1e-12
# eigenvalues below -PSD_SLACK * lam_1 mean the matrix is not a covariance
PSD_SLACK = 1e-9


def as_samples(data) -> np.ndarray:
    """Coerce ``data`` into a finite read-only (N, n) float array with N, n >= 1.

    A 1-d input is read as N scalar observations.
    """
    x = np.array(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InvalidInput(f"expected an (N, n) sample matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("sample contains non-finite values")
    return _frozen(x)


@dataclass(frozen=True)
class MomentModel:
    """Mean vector and covariance matrix with a cached spectral decomposition.

    ``spectral`` holds the eigenpairs of ``cov`` with roundoff negatives
    clamped to zero; ``rank`` counts eigenvalues above ``rank_tol * lam_1``.
    """

    mean: np.ndarray
    cov: np.ndarray
    spectral: SpectralDecomp
    rank: int
    rank_tol: float = DEFAULT_RANK_TOL
    divisor: str = POPULATION

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def numerical_rank(eigenvalues: np.ndarray, rank_tol: float) -> int:
    lam1 = float(eigenvalues[0])
    if lam1 <= 0.0:
        return 0
    return int(np.count_nonzero(eigenvalues > rank_tol * lam1))


def from_moments(mean, cov, rank_tol: float = DEFAULT_RANK_TOL, divisor: str = POPULATION) -> MomentModel:
    """Build a model from known moments, decomposing ``cov`` once."""
    mu = np.array(mean, dtype=np.float64).reshape(-1)
    v = sym_matrix(cov)
    if v.shape[0] != mu.shape[0]:
        raise InvalidInput(f"mean has length {mu.shape[0]} but covariance is {v.shape[0]}x{v.shape[0]}")
    if not np.all(np.isfinite(mu)):
        raise InvalidInput("mean has non-finite entries")
    if not (rank_tol >= 0.0 and np.isfinite(rank_tol)):
        raise InvalidInput(f"rank_tol must be a finite non-negative number, got {rank_tol}")
    if divisor not in DIVISOR_MODES:
        raise InvalidInput(f"unknown divisor mode {divisor!r}")

    d = jacobi_eigendecompose(v)
    lam = np.array(d.eigenvalues)
    scale = max(float(lam[0]), 0.0)
    if lam[-1] < -PSD_SLACK * scale or (scale == 0.0 and lam[-1] < 0.0):
        raise InvalidInput(f"covariance is not positive semidefinite (min eigenvalue {lam[-1]:.3g})")
    lam = np.maximum(lam, 0.0)
    spectral = SpectralDecomp(_frozen(lam), d.eigenvectors)
    return MomentModel(
        mean=_frozen(mu),
        cov=v,
        spectral=spectral,
        rank=numerical_rank(lam, rank_tol),
        rank_tol=float(rank_tol),
        divisor=divisor,
    )


def fit_moments(data, divisor: str = POPULATION, rank_tol: float = DEFAULT_RANK_TOL) -> MomentModel:
    """Fit mean and covariance to the rows of ``data``.

    Two passes: the mean first, then the centred cross-products divided by
    N (``"population"``) or N - 1 (``"sample"``).

    Raises:
        InvalidInput: non-finite data, unknown divisor, or N = 1 with the
            sample divisor.
    """
    x = as_samples(data)
    n_obs = x.shape[0]
    if divisor not in DIVISOR_MODES:
        raise InvalidInput(f"unknown divisor mode {divisor!r}")
    if divisor == SAMPLE and n_obs < 2:
        raise InvalidInput("sample divisor needs at least 2 observations")

    mu = x.mean(axis=0)
    dev = x - mu
    cov = dev.T @ dev / (n_obs if divisor == POPULATION else n_obs - 1)
    cov = 0.5 * (cov + cov.T)
    return from_moments(mu, cov, rank_tol=rank_tol, divisor=divisor)


@dataclass(frozen=True)
class ConditionalMoments:
    """Moments of the trailing n - k coordinates given the leading k."""

    observed_dim: int
    mu_cond: np.ndarray
    cov_cond: np.ndarray


def schur_conditional(model: MomentModel, k: int, x_obs) -> ConditionalMoments:
    """Condition on the first ``k`` coordinates being ``x_obs``.

    Uses the Gaussian/linear formulas::

        mu(x) = mu_Y + V_YX V_XX^{-1} (x - mu_X)
        V(x)  = V_YY - V_YX V_XX^{-1} V_XY

    These are exact for jointly Gaussian vectors (and any model whose
    regression is linear with homoscedastic residuals); for other
    distributions they give the best linear predictor and its residual
    covariance, not the true conditional moments.

    Raises:
        InvalidInput: ``k`` outside ``1..n-1`` or ``x_obs`` of wrong length.
        SingularBlock: ``V_XX`` has an eigenvalue at or below the model's
            rank tolerance (relative to the largest eigenvalue of ``V``).
    """
    n = model.dim
    if not (isinstance(k, (int, np.integer)) and 1 <= k < n):
        raise InvalidInput(f"k must be an integer in [1, {n - 1}], got {k!r}")
    x = np.array(x_obs, dtype=np.float64).reshape(-1)
    if x.shape[0] != k:
        raise InvalidInput(f"x_obs has length {x.shape[0]}, expected {k}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("x_obs has non-finite entries")

    v = model.cov
    vxx = v[:k, :k]
    vyx = v[k:, :k]
    d = jacobi_eigendecompose(vxx)
    floor = model.rank_tol * max(float(model.spectral.eigenvalues[0]), 0.0)
    if d.eigenvalues[-1] <= floor:
        raise SingularBlock(
            f"conditioning block is singular (smallest eigenvalue {d.eigenvalues[-1]:.3g})"
        )
    t = d.eigenvectors
    vxx_inv = (t / d.eigenvalues) @ t.T
    gain = vyx @ vxx_inv

    mu = model.mean
    mu_cond = mu[k:] + gain @ (x - mu[:k])
    cov_cond = v[k:, k:] - gain @ vyx.T
    cov_cond = 0.5 * (cov_cond + cov_cond.T)
    return ConditionalMoments(k, _frozen(mu_cond), sym_matrix(cov_cond))
