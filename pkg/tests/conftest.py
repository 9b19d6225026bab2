"""Shared fixtures and independent numerical oracles for the test suite.

The oracle implementations here deliberately avoid the code paths they
check: the series exponential never calls scipy.linalg.expm, the RK4
reference integrator is fixed-step, the null-space oracle goes through
the SVD while the library uses QR, and so on.
"""

import numpy as np
import pytest

from rnn_constctl.model import (
    NetworkModel,
    linear_activation,
    mindy_activation,
    tanh_activation,
)


# ---------------------------------------------------------------------------
# oracles


def series_matexp(a: np.ndarray, t: float, terms: int = 60) -> np.ndarray:
    """Truncated power series for e^{tA}, argument scaled to norm < 1/2.

    Scaling-and-squaring with a plain Taylor sum: independent of the
    rational-approximant route used by the library.
    """
    z = t * np.asarray(a, dtype=float)
    norm = np.linalg.norm(z, np.inf)
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-300) / 0.5))))
    z = z / (2.0**squarings)
    out = np.eye(z.shape[0])
    term = np.eye(z.shape[0])
    for n in range(1, terms + 1):
        term = term @ z / n
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def charpoly_coefficients(a: np.ndarray) -> np.ndarray:
    """Characteristic polynomial coefficients via the Faddeev-LeVerrier
    recurrence (monic, highest power first)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(a @ m) / k
    return coeffs


def power_iteration_norm(a: np.ndarray, iters: int = 20000, tol: float = 1e-15) -> float:
    """Largest singular value via power iteration on A^T A."""
    a = np.asarray(a, dtype=float)
    ata = a.T @ a
    v = np.ones(ata.shape[0]) / np.sqrt(ata.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = ata @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (ata @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(lam))


def svd_nullspace(m: np.ndarray) -> np.ndarray:
    """Orthonormal null-space basis from the SVD (columns)."""
    m = np.asarray(m, dtype=float)
    _, s, vt = np.linalg.svd(m)
    rank = int(np.sum(s > max(m.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)))
    return vt[rank:].T


def subspace_angle(q1: np.ndarray, q2: np.ndarray) -> float:
    """Largest principal angle between two orthonormal column spans.

    Sine-based form: accurate for tiny angles, where the cosine form
    saturates at sqrt(eps).
    """
    residual = q2 - q1 @ (q1.T @ q2)
    sv = np.linalg.svd(residual, compute_uv=False)
    return float(np.arcsin(np.clip(sv.max(), 0.0, 1.0)))


def rk4_fixed_step(rhs, x0: np.ndarray, T: float, h: float) -> np.ndarray:
    """Classical fixed-step RK4 reference integration."""
    n = max(1, int(round(T / h)))
    h = T / n
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(n):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def central_difference_jacobian(fun, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h))
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# model factories


def random_linear_model(rng, d: int, coupling: float = 0.3) -> NetworkModel:
    return NetworkModel(
        decay=rng.uniform(0.8, 1.5, size=d),
        W=rng.normal(0.0, coupling / np.sqrt(d), size=(d, d)),
        B=np.eye(d),
        activation=linear_activation(),
    )


def random_tanh_model(rng, d: int, coupling: float = 1.0) -> NetworkModel:
    return NetworkModel(
        decay=np.ones(d),
        W=rng.normal(0.0, coupling / np.sqrt(d), size=(d, d)),
        B=np.eye(d),
        activation=tanh_activation(),
    )


def random_mindy_model(rng, d: int, coupling: float = 0.5) -> NetworkModel:
    return NetworkModel(
        decay=np.ones(d),
        W=rng.normal(0.0, coupling / np.sqrt(d), size=(d, d)),
        B=np.eye(d),
        activation=mindy_activation(rng.uniform(0.5, 1.5, size=d)),
    )


def contracting_tanh_model(rng, d: int, margin: float = 0.4) -> NetworkModel:
    """Tanh model with ||W|| strictly below min(decay)."""
    w = rng.normal(size=(d, d))
    w *= (1.0 - margin) / np.linalg.norm(w, 2)
    return NetworkModel(decay=np.ones(d), W=w, B=np.eye(d), activation=tanh_activation())


def rotation_model(omega: float = 4.0) -> NetworkModel:
    """Planar rotation with angular velocity omega as the linear part."""
    a = np.array([[0.0, -omega], [omega, 0.0]])
    return NetworkModel(decay=np.ones(2), W=a + np.eye(2), B=np.eye(2),
                        activation=linear_activation())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
