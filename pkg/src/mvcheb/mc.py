"""Samplers with analytic moments and the Monte Carlo bound-verification harness."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from mvcheb.chebyshev import (
    Whitener,
    chebyshev_coverage_bound,
    gaussian_exact_coverage,
    mahalanobis_sq,
    make_whitener,
)
from mvcheb.errors import InvalidInput, InvalidSpec
from mvcheb.linalg import _frozen, jacobi_eigendecompose, sym_matrix
from mvcheb.moments import DEFAULT_RANK_TOL, MomentModel, as_samples, fit_moments, from_moments, schur_conditional
from mvcheb.rng import standard_normal, stream

FAMILIES = ("gaussian", "uniform_box", "student_t", "gaussian_mixture")
MOMENTS_MODES = ("true", "fitted")


def mc_slack(count: int) -> float:
    """Three binomial standard deviations at the worst case p = 1/2."""
    return 3.0 * math.sqrt(0.25 / count)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """``T diag(sqrt(lam))`` so that ``F F' = cov``; roundoff negatives clamped."""
    d = jacobi_eigendecompose(cov)
    lam = np.array(d.eigenvalues)
    if lam[-1] < -1e-9 * max(lam[0], 0.0) or (lam[0] <= 0.0 and lam[-1] < 0.0):
        raise InvalidSpec(f"covariance is not positive semidefinite (min eigenvalue {lam[-1]:.3g})")
    return _frozen(d.eigenvectors * np.sqrt(np.maximum(lam, 0.0)))


def _vector(v, name: str, dim: int | None = None) -> np.ndarray:
    a = np.array(v, dtype=np.float64).reshape(-1)
    if dim is not None and a.shape[0] != dim:
        raise InvalidSpec(f"{name} has length {a.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(a)):
        raise InvalidSpec(f"{name} has non-finite entries")
    return _frozen(a)


def _cov(v, name: str, dim: int) -> np.ndarray:
    try:
        c = sym_matrix(v)
    except InvalidInput as exc:
        raise InvalidSpec(f"{name}: {exc}") from None
    if c.shape[0] != dim:
        raise InvalidSpec(f"{name} is {c.shape[0]}x{c.shape[0]}, expected {dim}x{dim}")
    return c


@dataclass(frozen=True)
class SamplerSpec:
    """A distribution we can draw from whose mean and covariance are known exactly.

    Build instances with :func:`gaussian`, :func:`uniform_box`,
    :func:`student_t`, :func:`gaussian_mixture`, optionally wrapped by
    :func:`embedded`. ``dim`` is the dimension of the emitted vectors.
    """

    family: str
    dim: int
    params: dict[str, Any]
    true_mean: np.ndarray
    true_cov: np.ndarray
    embedding: np.ndarray | None = None

    def model(self, rank_tol: float = DEFAULT_RANK_TOL) -> MomentModel:
        return from_moments(self.true_mean, self.true_cov, rank_tol=rank_tol)


def gaussian(mean, cov) -> SamplerSpec:
    mu = _vector(mean, "mean")
    v = _cov(cov, "cov", mu.shape[0])
    return SamplerSpec("gaussian", mu.shape[0], {"mean": mu, "cov": v, "factor": _psd_factor(v)}, mu, v)


def uniform_box(half_widths, center=None) -> SamplerSpec:
    h = _vector(half_widths, "half_widths")
    if np.any(h < 0.0):
        raise InvalidSpec("half-widths must be non-negative")
    c = _vector(np.zeros_like(h) if center is None else center, "center", h.shape[0])
    return SamplerSpec("uniform_box", h.shape[0], {"half_widths": h, "center": c}, c, _frozen(np.diag(h * h / 3.0)))


def student_t(nu: float, scale, mean=None) -> SamplerSpec:
    """Multivariate t; its covariance ``nu/(nu-2) * scale`` exists only for nu > 2."""
    nu = float(nu)
    if not (nu > 2.0) or math.isinf(nu):
        raise InvalidSpec(f"student_t needs finite nu > 2 for a finite covariance, got {nu}")
    s = sym_matrix(scale) if np.ndim(scale) else sym_matrix([[scale]])
    mu = _vector(np.zeros(s.shape[0]) if mean is None else mean, "mean", s.shape[0])
    cov = _frozen(s * (nu / (nu - 2.0)))
    return SamplerSpec("student_t", s.shape[0], {"nu": nu, "scale": s, "mean": mu, "factor": _psd_factor(s)}, mu, cov)


def gaussian_mixture(means, weights, cov) -> SamplerSpec:
    """Mixture of Gaussians sharing one covariance; total covariance adds the spread of the means."""
    m = np.array(means, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise InvalidSpec(f"means must be a (components, dim) array, got shape {m.shape}")
    w = _vector(weights, "weights", m.shape[0])
    if np.any(w <= 0.0) or abs(float(w.sum()) - 1.0) > 1e-12:
        raise InvalidSpec("weights must be positive and sum to 1")
    if not np.all(np.isfinite(m)):
        raise InvalidSpec("means have non-finite entries")
    v = _cov(cov, "cov", m.shape[1])
    mu = w @ m
    dev = m - mu
    total = v + (dev.T * w) @ dev
    total = 0.5 * (total + total.T)
    params = {"means": _frozen(m), "weights": w, "cov": v, "factor": _psd_factor(v)}
    return SamplerSpec("gaussian_mixture", m.shape[1], params, _frozen(mu), _frozen(total))


def embedded(spec: SamplerSpec, matrix) -> SamplerSpec:
    """Push ``spec`` through the linear map ``x -> A x`` (A of shape (n, spec.dim))."""
    if spec.embedding is not None:
        raise InvalidSpec("spec is already embedded")
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != spec.dim or not np.all(np.isfinite(a)):
        raise InvalidSpec(f"embedding must be finite with {spec.dim} columns, got shape {a.shape}")
    cov = a @ spec.true_cov @ a.T
    return SamplerSpec(
        spec.family,
        a.shape[0],
        spec.params,
        _frozen(a @ spec.true_mean),
        _frozen(0.5 * (cov + cov.T)),
        _frozen(a),
    )


def _ar1(dim: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(dim)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def default_spec(family: str, dim: int, nu: float = 5.0, half_width: float = math.sqrt(3.0)) -> SamplerSpec:
    """The parameterization the CLI uses for ``--family`` at a given dimension.

    gaussian: mean (0, 1, ..., n-1), covariance ``0.5^|i-j|``.
    uniform_box: centred at 0 with every half-width ``half_width``.
    student_t: location 0, scale ``0.5^|i-j|``, ``nu`` degrees of freedom.
    gaussian_mixture: weights (0.3, 0.7), means -1.5 and +1.5 along the
    all-ones direction, shared covariance ``0.5 * 0.5^|i-j|``.
    """
    if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidSpec(f"dim must be a positive integer, got {dim!r}")
    if family == "gaussian":
        return gaussian(np.arange(dim, dtype=np.float64), _ar1(dim))
    if family == "uniform_box":
        return uniform_box(np.full(dim, half_width))
    if family == "student_t":
        return student_t(nu, _ar1(dim))
    if family == "gaussian_mixture":
        ones = np.ones(dim)
        return gaussian_mixture([-1.5 * ones, 1.5 * ones], [0.3, 0.7], 0.5 * _ar1(dim))
    raise InvalidSpec(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


def _draw_base(spec: SamplerSpec, count: int, gen: np.random.Generator) -> np.ndarray:
    p = spec.params
    d = p["factor"].shape[0] if "factor" in p else p["half_widths"].shape[0]
    if spec.family == "gaussian":
        return p["mean"] + standard_normal(gen, (count, d)) @ p["factor"].T
    if spec.family == "uniform_box":
        u = gen.random((count, d))
        return p["center"] + p["half_widths"] * (2.0 * u - 1.0)
    if spec.family == "student_t":
        z = standard_normal(gen, (count, d)) @ p["factor"].T
        chi2 = 2.0 * gen.standard_gamma(0.5 * p["nu"], count)
        return p["mean"] + z * np.sqrt(p["nu"] / chi2)[:, None]
    if spec.family == "gaussian_mixture":
        cum = np.cumsum(p["weights"])
        comp = np.minimum(np.searchsorted(cum, gen.random(count), side="right"), cum.shape[0] - 1)
        return p["means"][comp] + standard_normal(gen, (count, d)) @ p["factor"].T
    raise InvalidSpec(f"unknown family {spec.family!r}")


def sample(spec: SamplerSpec, count: int, seed: int, substream: int | str | None = None) -> np.ndarray:
    """Draw ``count`` rows from ``spec``; bitwise deterministic in (spec, count, seed, substream)."""
    if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 1:
        raise InvalidInput(f"count must be a positive integer, got {count!r}")
    path = ("sample",) if substream is None else ("sample", substream)
    x = _draw_base(spec, int(count), stream(seed, *path))
    if spec.embedding is not None:
        x = x @ spec.embedding.T
    return as_samples(x)


def _as_whitener(model_or_whitener) -> Whitener:
    if isinstance(model_or_whitener, Whitener):
        return model_or_whitener
    if isinstance(model_or_whitener, MomentModel):
        return make_whitener(model_or_whitener)
    raise InvalidInput(f"expected a MomentModel or Whitener, got {type(model_or_whitener).__name__}")


def empirical_coverage(model_or_whitener, data, eps: float) -> float:
    """Fraction of rows strictly inside the eps-ellipsoid."""
    w = _as_whitener(model_or_whitener)
    if not (eps > 0.0):
        raise InvalidInput(f"eps must be positive, got {eps!r}")
    x = as_samples(data)
    if x.shape[1] != w.source_dim:
        raise InvalidInput(f"data has {x.shape[1]} columns, model has dimension {w.source_dim}")
    z = mahalanobis_sq(w, x)
    return int(np.count_nonzero(z < eps)) / x.shape[0]


@dataclass(frozen=True)
class BoundRow:
    dim: int
    rank: int
    eps: float
    chebyshev_lower: float
    empirical_coverage: float
    gaussian_exact: float | None
    sample_count: int
    seed: int
    slack: float
    violated: bool


@dataclass(frozen=True)
class BoundReport:
    family: str
    dim: int
    moments_mode: str
    seed: int
    sample_count: int
    rows: tuple[BoundRow, ...] = field(default_factory=tuple)

    @property
    def violations(self) -> list[BoundRow]:
        return [r for r in self.rows if r.violated]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _verify_row(spec, eps, index, count, seed, moments_mode, rank_tol) -> BoundRow:
    data = sample(spec, count, seed, substream=index)
    model = spec.model(rank_tol) if moments_mode == "true" else fit_moments(data, rank_tol=rank_tol)
    w = make_whitener(model)
    lower = chebyshev_coverage_bound(w.rank, eps)
    emp = empirical_coverage(w, data, eps)
    exact = gaussian_exact_coverage(w.rank, eps) if spec.family == "gaussian" else None
    return BoundRow(
        dim=spec.dim,
        rank=w.rank,
        eps=float(eps),
        chebyshev_lower=lower,
        empirical_coverage=emp,
        gaussian_exact=exact,
        sample_count=count,
        seed=seed,
        slack=emp - lower,
        violated=emp < lower - mc_slack(count),
    )


def verify_bound(
    spec: SamplerSpec,
    eps_list: Sequence[float],
    count: int,
    seed: int,
    moments_mode: str = "true",
    rank_tol: float = DEFAULT_RANK_TOL,
    workers: int | None = None,
) -> BoundReport:
    """Check ``Pr(Z < eps) >= 1 - r/eps`` empirically for every eps.

    Row i draws its own ``count`` points from the substream ``(seed, i)``, so
    rows are independent and the report does not depend on ``workers``.
    With ``moments_mode="fitted"`` each row fits mean and covariance to its
    own sample instead of using the analytic moments.
    """
    if moments_mode not in MOMENTS_MODES:
        raise InvalidInput(f"moments_mode must be one of {MOMENTS_MODES}, got {moments_mode!r}")
    eps_values = [float(e) for e in eps_list]
    if not eps_values or any(not (e > 0.0) or math.isinf(e) for e in eps_values):
        raise InvalidInput("eps_list must be a non-empty list of positive finite values")

    def run(item):
        i, e = item
        return _verify_row(spec, e, i, count, seed, moments_mode, rank_tol)

    items = list(enumerate(eps_values))
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(run, items))
    else:
        rows = tuple(map(run, items))
    return BoundReport(spec.family, spec.dim, moments_mode, seed, count, rows)


@dataclass(frozen=True)
class ConditionalRow:
    x_obs: tuple[float, ...]
    rank: int
    eps: float
    chebyshev_lower: float
    empirical_coverage: float
    gaussian_exact: float
    sample_count: int
    slack: float


def conditional_coverage(spec: SamplerSpec, k: int, x_obs, eps: float, count: int, seed: int) -> ConditionalRow:
    """Coverage of the conditional ellipsoid around the regression at ``X_1..k = x_obs``.

    Only for the (unembedded) gaussian family. Conditional draws come from the
    joint sample by the residual construction ``Y - B (X - x)`` with the
    regression matrix ``B`` solved directly from the covariance blocks; the
    ellipsoid itself uses the Schur-complement moments.
    """
    if spec.family != "gaussian" or spec.embedding is not None:
        raise InvalidSpec("conditional coverage needs the gaussian family, where conditioning is exact")
    x = np.array(x_obs, dtype=np.float64).reshape(-1)
    cm = schur_conditional(spec.model(), k, x)
    w = make_whitener(from_moments(cm.mu_cond, cm.cov_cond))

    joint = sample(spec, count, seed, substream=f"conditional-{x.tobytes().hex()}")
    v = spec.true_cov
    regression = np.linalg.solve(v[:k, :k], v[:k, k:]).T
    y = joint[:, k:] - (joint[:, :k] - x) @ regression.T

    emp = empirical_coverage(w, y, eps)
    lower = chebyshev_coverage_bound(w.rank, eps)
    return ConditionalRow(
        x_obs=tuple(float(t) for t in x),
        rank=w.rank,
        eps=float(eps),
        chebyshev_lower=lower,
        empirical_coverage=emp,
        gaussian_exact=gaussian_exact_coverage(w.rank, eps),
        sample_count=count,
        slack=emp - lower,
    )
