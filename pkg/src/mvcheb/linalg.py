"""Dense symmetric eigendecomposition by cyclic Jacobi rotations.

Only what the rest of the package needs: a validated symmetric matrix
constructor, the decomposition ``S = T diag(lam) T'`` with eigenvalues sorted
non-increasing, and its inverse operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mvcheb.errors import InvalidInput, NoConvergence

ASYMMETRY_TOL = 1e-9
CONVERGENCE_TOL = 1e-12
MAX_SWEEPS = 100


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def sym_matrix(a) -> np.ndarray:
    """Validate ``a`` as a finite square symmetric matrix.

    Near-symmetric input (max asymmetry within ``1e-9`` times the largest
    absolute entry) is symmetrized as ``(a + a') / 2``; anything further off
    is rejected. The returned array is a read-only float64 copy.
    """
    s = np.array(a, dtype=np.float64)
    if s.ndim == 0:
        s = s.reshape(1, 1)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
        raise InvalidInput(f"expected a non-empty square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInput("matrix has non-finite entries")
    asym = float(np.max(np.abs(s - s.T)))
    if asym > 0.0:
        scale = float(np.max(np.abs(s)))
        if asym > ASYMMETRY_TOL * scale:
            raise InvalidInput(f"matrix is not symmetric (max asymmetry {asym:.3g})")
        s = 0.5 * (s + s.T)
    return _frozen(s)


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenpairs of a symmetric matrix.

    Attributes:
        eigenvalues: shape (n,), sorted non-increasing.
        eigenvectors: shape (n, n) orthogonal; column i pairs with eigenvalue i.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def order(self) -> int:
        return self.eigenvalues.shape[0]


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def _sweep(a: np.ndarray, v: np.ndarray) -> None:
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = float(a[p, q])
            if apq == 0.0:
                continue
            app = float(a[p, p])
            aqq = float(a[q, q])
            h = aqq - app
            if abs(apq) < abs(h) * 1e-36:
                t = apq / h
            else:
                theta = h / (2.0 * apq)
                # smaller root of t^2 + 2 theta t - 1 = 0, |angle| <= pi/4
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c

            colp = a[:, p].copy()
            colq = a[:, q]
            a[:, p] = c * colp - s * colq
            a[:, q] = s * colp + c * colq
            a[p, :] = a[:, p]
            a[q, :] = a[:, q]
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp = v[:, p].copy()
            vq = v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq


def jacobi_eigendecompose(s) -> SpectralDecomp:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Iterates until the off-diagonal Frobenius norm falls to
    ``1e-12 * (1 + ||S||_F)``. Eigenvalue ties keep their original column
    order; degenerate eigenspaces are returned in whatever orthonormal basis
    the rotations produced.

    Raises:
        InvalidInput: non-finite, non-square or asymmetric input.
        NoConvergence: still not diagonal after 100 sweeps.
    """
    a = np.array(sym_matrix(s))
    n = a.shape[0]
    v = np.eye(n)
    tol = CONVERGENCE_TOL * (1.0 + float(np.linalg.norm(a)))

    for _ in range(MAX_SWEEPS + 1):
        if _off_norm(a) <= tol:
            break
        _sweep(a, v)
    else:
        raise NoConvergence(f"Jacobi did not converge in {MAX_SWEEPS} sweeps (n={n})")

    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    return SpectralDecomp(_frozen(lam[order]), _frozen(v[:, order].copy()))


def reconstruct(d: SpectralDecomp) -> np.ndarray:
    """Return ``T diag(lam) T'`` as a symmetric matrix."""
    lam = np.asarray(d.eigenvalues, dtype=np.float64)
    t = np.asarray(d.eigenvectors, dtype=np.float64)
    if lam.ndim != 1 or t.shape != (lam.shape[0], lam.shape[0]):
        raise InvalidInput("eigenvalue/eigenvector shapes do not match")
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(t))):
        raise InvalidInput("decomposition has non-finite entries")
    m = (t * lam) @ t.T
    return _frozen(0.5 * (m + m.T))
