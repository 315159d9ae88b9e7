"""Whitening, Mahalanobis distance and the multivariate Chebyshev bounds.

For a random vector with mean ``mu`` and covariance ``V = T D T'`` the
standardized principal components ``Y = D^{-1/2} T' (X - mu)`` have zero mean
and identity covariance, so ``Z = Y'Y`` has expectation equal to the number of
retained components ``r``. Markov's inequality then gives

    Pr(Z >= eps) <= r / eps,    Pr(Z < eps) >= 1 - r / eps.

A singular ``V`` keeps only the ``r`` positive eigenvalues; conditioning on
``k`` coordinates leaves ``r = n - k``. Under normality ``Z`` is chi-squared
with ``r`` degrees of freedom, which gives the exact coverage for comparison.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from mvcheb.errors import DegenerateModel, InvalidInput, NoConvergence
from mvcheb.linalg import _frozen, sym_matrix
from mvcheb.moments import DEFAULT_RANK_TOL, MomentModel, from_moments

GAMMA_REL_TOL = 1e-15
GAMMA_MAX_ITER = 500


@dataclass(frozen=True)
class Whitener:
    """The map ``x -> W (x - center)`` onto the standardized principal components.

    ``map`` has shape (rank, source_dim); row i is the i-th retained
    eigenvector scaled by ``1 / sqrt(lam_i)``. Null directions of the
    covariance are dropped rather than stored as zero rows.
    """

    center: np.ndarray
    map: np.ndarray
    rank: int
    source_dim: int

    def transform(self, x) -> np.ndarray:
        """Whitened coordinates; ``x`` is one point (n,) or a batch (N, n)."""
        x = _check_points(x, self.source_dim)
        return (x - self.center) @ self.map.T

    @property
    def pseudo_inverse(self) -> np.ndarray:
        """``W'W``, the generalized inverse ``T diag(1/lam_1..1/lam_r, 0..0) T'``."""
        return self.map.T @ self.map


def _check_points(x, dim: int) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim not in (1, 2) or a.shape[-1] != dim:
        raise InvalidInput(f"points of shape {a.shape} do not match dimension {dim}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("points have non-finite entries")
    return a


def make_whitener(model: MomentModel, rank_tol: float | None = None) -> Whitener:
    """Whitener keeping eigenvalues ``lam_i > rank_tol * lam_1``.

    ``rank_tol`` defaults to the model's own tolerance.

    Raises:
        DegenerateModel: no eigenvalue survives the tolerance (point mass).
    """
    tol = model.rank_tol if rank_tol is None else float(rank_tol)
    if not (tol >= 0.0 and math.isfinite(tol)):
        raise InvalidInput(f"rank_tol must be finite and non-negative, got {rank_tol}")
    lam = model.spectral.eigenvalues
    lam1 = float(lam[0])
    r = int(np.count_nonzero(lam > tol * lam1)) if lam1 > 0.0 else 0
    if r == 0:
        raise DegenerateModel("covariance has no eigenvalue above the rank tolerance")
    t = model.spectral.eigenvectors[:, :r]
    w = (t / np.sqrt(lam[:r])).T
    return Whitener(center=model.mean, map=_frozen(np.ascontiguousarray(w)), rank=r, source_dim=model.dim)


def mahalanobis_sq(w: Whitener, x):
    """Squared Mahalanobis distance ``||W (x - mu)||^2``.

    Returns a float for a single point and an (N,) array for a batch.
    """
    y = w.transform(x)
    z = np.einsum("...i,...i->...", y, y)
    return float(z) if np.ndim(z) == 0 else z


@dataclass(frozen=True)
class Ellipsoid:
    """``{x : (x - center)' V^+ (x - center) < eps}``, open."""

    center: np.ndarray
    shape: np.ndarray
    eps: float
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        if not (self.eps > 0.0):
            raise InvalidInput(f"eps must be positive, got {self.eps}")

    @cached_property
    def whitener(self) -> Whitener:
        return make_whitener(from_moments(self.center, sym_matrix(self.shape), rank_tol=self.rank_tol))

    def __contains__(self, x) -> bool:
        return ellipsoid_contains(self, x)


def ellipsoid_contains(e: Ellipsoid, x):
    """Strict membership ``Z < eps``; vectorized over a batch of points."""
    z = mahalanobis_sq(e.whitener, x)
    return bool(z < e.eps) if isinstance(z, float) else z < e.eps


def _check_eps(eps, strict: bool = True) -> float:
    try:
        e = float(eps)
    except (TypeError, ValueError):
        raise InvalidInput(f"eps must be a number, got {eps!r}") from None
    if math.isnan(e) or (e <= 0.0 if strict else e < 0.0):
        raise InvalidInput(f"eps must be {'positive' if strict else 'non-negative'}, got {eps!r}")
    return e


def _check_dim(r, name: str = "effective_dim") -> int:
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or r < 1:
        raise InvalidInput(f"{name} must be a positive integer, got {r!r}")
    return int(r)


def markov_tail_bound(mean_z: float, eps: float) -> float:
    """Markov's inequality for non-negative Z: ``Pr(Z >= eps) <= min(1, E[Z]/eps)``."""
    e = _check_eps(eps)
    m = float(mean_z)
    if not (m >= 0.0):
        raise InvalidInput(f"mean_z must be non-negative, got {mean_z!r}")
    return min(1.0, m / e)


def chebyshev_coverage_bound(effective_dim: int, eps: float) -> float:
    """Distribution-free lower bound ``max(0, 1 - r/eps)`` on ``Pr(Z < eps)``."""
    r = _check_dim(effective_dim)
    e = _check_eps(eps)
    return max(0.0, 1.0 - r / e)


def conditional_coverage_bound(n: int, k: int, eps: float) -> float:
    """Coverage bound around the regression of the last n - k coordinates on the first k."""
    n = _check_dim(n, "n")
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k < n:
        raise InvalidInput(f"k must be an integer in [1, {n - 1}], got {k!r}")
    return chebyshev_coverage_bound(n - int(k), eps)


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * GAMMA_REL_TOL:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NoConvergence(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_cont_frac(a: float, x: float) -> float:
    """Upper tail Q(a, x) by the modified Lentz continued fraction."""
    tiny = sys.float_info.min / sys.float_info.epsilon
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < GAMMA_REL_TOL:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise NoConvergence(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if not (a > 0.0) or math.isinf(a):
        raise InvalidInput(f"a must be positive and finite, got {a!r}")
    if math.isnan(x) or x < 0.0:
        raise InvalidInput(f"x must be non-negative, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cont_frac(a, x))


def gaussian_exact_coverage(n: int, eps: float) -> float:
    """``Pr(chi2_n < eps) = P(n/2, eps/2)``, the exact Gaussian coverage."""
    n = _check_dim(n, "n")
    e = _check_eps(eps, strict=False)
    return regularized_gamma_p(0.5 * n, 0.5 * e)
