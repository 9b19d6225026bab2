"""Dense linear-algebra kernels used by every synthesis formula.

Everything here routes to LAPACK via numpy/scipy; the functions add the
input checking, failure detection and result shapes the rest of the
package relies on. All matrices are dense float64 and small (a few
hundred rows at most), so no sparse paths exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericsError, RankDeficient, SingularSystem

# Reciprocal-condition estimate below which a solve fails loudly instead
# of returning garbage.
SINGULARITY_RCOND = 1e-12

# Relative residual above which a least-squares solution is flagged as
# lying outside the image of the matrix (infeasibility, not round-off).
IMAGE_RESIDUAL_TOL = 1e-6


def _as_matrix(a, name: str, square: bool = False) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _as_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d array, got ndim={v.ndim}")
    if not np.isfinite(v).all():
        raise ValueError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class SolveResult:
    """Solution of a square linear system plus its conditioning estimate."""

    x: np.ndarray
    rcond: float


@dataclass(frozen=True)
class LeastNormResult:
    """Minimum-norm least-squares solution of ``B u = y``.

    ``not_in_image`` is set when the relative residual exceeds
    IMAGE_RESIDUAL_TOL, i.e. the right-hand side is not (numerically) in
    the column space of ``B``. This is feasibility information, never an
    exception.
    """

    u: np.ndarray
    residual: float
    not_in_image: bool


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal basis of the null space of a full-row-rank matrix."""

    ambient_dim: int
    basis: np.ndarray  # ambient_dim x nullity, orthonormal columns


def matexp(a, t: float = 1.0) -> np.ndarray:
    """Matrix exponential e^{tA} by scaling-and-squaring (degree-13 Pade).

    Exact identity for t == 0.
    """
    a = _as_matrix(a, "A", square=True)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    if t == 0.0:
        return np.eye(a.shape[0])
    return scipy.linalg.expm(t * a)


def eigenvalues(a) -> np.ndarray:
    """All eigenvalues of a real square matrix, with multiplicity."""
    a = _as_matrix(a, "A", square=True)
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # QR iteration failed to converge
        raise NumericsError(f"eigenvalue iteration did not converge: {exc}") from exc


def solve(a, y, scale: float | None = None) -> SolveResult:
    """Solve A X = Y for square A, failing loudly near singularity.

    The reciprocal condition number is estimated from the LU factors
    (1-norm); estimates below SINGULARITY_RCOND raise SingularSystem.

    ``scale`` is the natural magnitude of the computation that produced
    A. When A is the difference of two O(scale) matrices that nearly
    cancel (e.g. e^{TA} - Id at a full rotation period), the surviving
    entries are pure round-off: they can look well conditioned on their
    own, so the estimate is deflated by ||A|| / scale to catch this.
    """
    a = _as_matrix(a, "A", square=True)
    y_arr = np.asarray(y, dtype=float)
    if y_arr.shape[0] != a.shape[0]:
        raise ValueError(
            f"row mismatch: A has {a.shape[0]} rows, Y has {y_arr.shape[0]}"
        )
    if not np.isfinite(y_arr).all():
        raise ValueError("Y contains non-finite entries")

    anorm = np.linalg.norm(a, 1)
    lu, piv, info = scipy.linalg.lapack.dgetrf(a)
    if info > 0:  # exact zero pivot
        raise SingularSystem(
            f"matrix is singular (zero pivot at position {info})", rcond=0.0
        )
    rcond, info = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")
    rcond = float(rcond)
    if scale is not None and scale > 0.0:
        rcond *= min(1.0, anorm / scale)
    if not np.isfinite(rcond) or rcond < SINGULARITY_RCOND:
        raise SingularSystem(
            f"matrix is numerically singular (rcond estimate {rcond:.3e})",
            rcond=rcond,
        )
    x = scipy.linalg.lu_solve((lu, piv), y_arr)
    return SolveResult(x=x, rcond=rcond)


def pseudo_inverse_apply(b, y, image_tol: float = IMAGE_RESIDUAL_TOL) -> LeastNormResult:
    """Minimum-norm least-squares solution u of B u = y.

    Rank decisions use the conventional SVD cutoff
    max(rows, cols) * eps * sigma_max. When y is not in the image of B,
    the relative residual is reported and ``not_in_image`` is set; no
    exception is raised (the pseudo-inverse is always defined).
    """
    b = _as_matrix(b, "B")
    y = _as_vector(y, "y")
    if y.shape[0] != b.shape[0]:
        raise ValueError(f"length mismatch: B has {b.shape[0]} rows, y has {len(y)}")
    cutoff = max(b.shape) * np.finfo(float).eps
    u, _, _, _ = np.linalg.lstsq(b, y, rcond=cutoff)
    ynorm = np.linalg.norm(y)
    abs_res = np.linalg.norm(b @ u - y)
    residual = abs_res / ynorm if ynorm > 0.0 else abs_res
    return LeastNormResult(u=u, residual=float(residual), not_in_image=bool(residual > image_tol))


def kernel_basis(m) -> KernelBasis:
    """Orthonormal null-space basis of a full-row-rank (d-k) x d matrix.

    Computed from the full pivoted QR factorization of m^T: the trailing
    k columns of Q span ker(m). Rank deficiency is detected from the
    R-factor diagonal and raises RankDeficient.
    """
    m = _as_matrix(m, "M")
    rows, dim = m.shape
    if rows >= dim:
        raise ValueError(f"need strictly fewer rows than columns, got {m.shape}")
    q, r, _ = scipy.linalg.qr(m.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(r))
    threshold = max(m.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    if diag.size < rows or np.any(diag < max(threshold, np.finfo(float).tiny)):
        raise RankDeficient(
            f"matrix of shape {m.shape} is not full row rank "
            f"(min |R_ii| = {diag.min() if diag.size else 0.0:.3e})"
        )
    return KernelBasis(ambient_dim=dim, basis=q[:, rows:].copy())


def spectral_norm(a) -> float:
    """Largest singular value of a (possibly rectangular) matrix."""
    a = _as_matrix(a, "A")
    return float(np.linalg.norm(a, 2))
