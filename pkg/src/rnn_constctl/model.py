"""Hopfield-type network model: activations, drift, Jacobian, margins.

The plant is ``x' = -D x + W f(x) + B u`` with diagonal positive decay D,
dense connectivity W, input coupling B and an elementwise activation f
that vanishes at the origin. Three activation families are supported:

* ``linear``  -- f(s) = s
* ``tanh``    -- f(s) = tanh(s)
* ``mindy``   -- f(s) = sqrt(a^2 + (b s + 1/2)^2) - sqrt(a^2 + (b s - 1/2)^2)
                 with fixed slope b = 20/3 and one positive shape
                 parameter a per unit.

All derivatives are analytic; nothing here is differentiated numerically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .linalg import spectral_norm

ACT_LINEAR = "linear"
ACT_TANH = "tanh"
ACT_MINDY = "mindy"

MINDY_SLOPE = 20.0 / 3.0

# Grid used to bound sup |f''| numerically for the non-linear families.
_FPP_GRID_HALF_WIDTH = 10.0
_FPP_GRID_POINTS = 100_001


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Activation:
    """Per-unit scalar nonlinearity with analytic first/second derivatives."""

    kind: str
    alpha: Optional[np.ndarray] = None  # mindy only, one entry per unit
    slope: float = MINDY_SLOPE  # mindy only

    def __post_init__(self):
        if self.kind not in (ACT_LINEAR, ACT_TANH, ACT_MINDY):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == ACT_MINDY:
            if self.alpha is None:
                raise ValueError("mindy activation requires alpha")
            alpha = np.asarray(self.alpha, dtype=float)
            if alpha.ndim != 1 or alpha.size == 0:
                raise ValueError("alpha must be a non-empty 1-d array")
            if not np.isfinite(alpha).all() or np.any(alpha <= 0.0):
                raise ValueError("alpha entries must be finite and > 0")
            if not (np.isfinite(self.slope) and self.slope > 0.0):
                raise ValueError("slope must be finite and > 0")
            object.__setattr__(self, "alpha", _freeze(alpha))
        elif self.alpha is not None:
            raise ValueError(f"{self.kind} activation takes no alpha")


def linear_activation() -> Activation:
    return Activation(kind=ACT_LINEAR)


def tanh_activation() -> Activation:
    return Activation(kind=ACT_TANH)


def mindy_activation(alpha, slope: float = MINDY_SLOPE) -> Activation:
    return Activation(kind=ACT_MINDY, alpha=np.asarray(alpha, dtype=float), slope=slope)


def activation_eval(act: Activation, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Componentwise (f(x), f'(x), f''(x)) for one activation family."""
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("x contains non-finite entries")
    if act.kind == ACT_LINEAR:
        return x.copy(), np.ones_like(x), np.zeros_like(x)
    if act.kind == ACT_TANH:
        th = np.tanh(x)
        sech2 = 1.0 - th * th
        return th, sech2, -2.0 * th * sech2
    alpha = act.alpha
    if alpha.shape != x.shape:
        raise ValueError(f"alpha has shape {alpha.shape}, x has shape {x.shape}")
    b = act.slope
    up = b * x + 0.5
    um = b * x - 0.5
    rp = np.sqrt(alpha * alpha + up * up)
    rm = np.sqrt(alpha * alpha + um * um)
    f = rp - rm
    fp = b * (up / rp - um / rm)
    fpp = b * b * alpha * alpha * (1.0 / rp**3 - 1.0 / rm**3)
    return f, fp, fpp


@dataclass(frozen=True)
class NetworkModel:
    """Immutable network definition: decay, connectivity, input coupling.

    ``decay`` holds the diagonal of the (strictly positive) decay matrix.
    Validation happens here, once; the numerical routines assume a valid
    model afterwards.
    """

    decay: np.ndarray  # length d, diagonal of D, all > 0
    W: np.ndarray  # d x d
    B: np.ndarray  # d x k, 1 <= k <= d
    activation: Activation = field(default_factory=linear_activation)

    def __post_init__(self):
        decay = np.asarray(self.decay, dtype=float)
        w = np.asarray(self.W, dtype=float)
        b = np.asarray(self.B, dtype=float)
        if decay.ndim != 1 or decay.size == 0:
            raise ValueError("decay must be a non-empty 1-d array")
        d = decay.size
        if not np.isfinite(decay).all() or np.any(decay <= 0.0):
            raise ValueError("decay entries must be finite and strictly positive")
        if w.shape != (d, d):
            raise ValueError(f"W must be {d}x{d}, got {w.shape}")
        if b.ndim != 2 or b.shape[0] != d or not (1 <= b.shape[1] <= d):
            raise ValueError(f"B must be {d}xk with 1 <= k <= {d}, got {b.shape}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("W and B must be finite")
        if self.activation.kind == ACT_MINDY and self.activation.alpha.size != d:
            raise ValueError(
                f"mindy alpha has {self.activation.alpha.size} entries, model has {d} units"
            )
        object.__setattr__(self, "decay", _freeze(decay))
        object.__setattr__(self, "W", _freeze(w))
        object.__setattr__(self, "B", _freeze(b))

    @property
    def dim(self) -> int:
        return self.decay.size

    @property
    def k(self) -> int:
        return self.B.shape[1]

    def with_input_matrix(self, b_new) -> "NetworkModel":
        return replace(self, B=np.asarray(b_new, dtype=float))


@dataclass(frozen=True)
class ContractionMargins:
    """Spectral bounds of the drift.

    gamma = min(decay) - ||W||      (contraction margin; > 0 means the
                                     uncontrolled flow is a contraction)
    lam   = max(decay) + ||W||      (Lipschitz/Jacobian bound, valid for
                                     unit-slope activations)
    lam1  = ||W|| * sup |f''|
    """

    gamma: float
    lam: float
    lam1: float


def drift(model: NetworkModel, x) -> np.ndarray:
    """Uncontrolled vector field -D x + W f(x).

    The linear family goes through the assembled matrix (-D + W) @ x so
    that the reduction to the linear-systems theory is exact, not merely
    close to round-off.
    """
    x = np.asarray(x, dtype=float)
    if model.activation.kind == ACT_LINEAR:
        return (-np.diag(model.decay) + model.W) @ x
    f, _, _ = activation_eval(model.activation, x)
    return -model.decay * x + model.W @ f


def drift_jacobian(model: NetworkModel, x) -> np.ndarray:
    """Jacobian of the drift, -D + W diag(f'(x))."""
    x = np.asarray(x, dtype=float)
    _, fp, _ = activation_eval(model.activation, x)
    return -np.diag(model.decay) + model.W * fp[np.newaxis, :]


def second_derivative_bound(act: Activation, dim: int) -> float:
    """Numerical bound on sup |f''| over a wide interval.

    Linear activations are exactly 0; tanh and mindy are maximized on a
    dense grid over [-10, 10] (their second derivatives decay far from
    the origin, so the window is conservative).
    """
    if act.kind == ACT_LINEAR:
        return 0.0
    grid = np.linspace(-_FPP_GRID_HALF_WIDTH, _FPP_GRID_HALF_WIDTH, _FPP_GRID_POINTS)
    if act.kind == ACT_TANH:
        th = np.tanh(grid)
        return float(np.max(np.abs(-2.0 * th * (1.0 - th * th))))
    best = 0.0
    b = act.slope
    for a in np.unique(act.alpha):
        up = b * grid + 0.5
        um = b * grid - 0.5
        rp = np.sqrt(a * a + up * up)
        rm = np.sqrt(a * a + um * um)
        fpp = b * b * a * a * (1.0 / rp**3 - 1.0 / rm**3)
        best = max(best, float(np.max(np.abs(fpp))))
    return best


def contraction_margins(model: NetworkModel) -> ContractionMargins:
    """Contraction margin, Lipschitz bound and curvature bound of the drift."""
    wnorm = spectral_norm(model.W)
    return ContractionMargins(
        gamma=float(model.decay.min() - wnorm),
        lam=float(model.decay.max() + wnorm),
        lam1=float(wnorm * second_derivative_bound(model.activation, model.dim)),
    )


def canonical_input_matrix(dim: int, k: int) -> np.ndarray:
    """Input matrix [e_1 ... e_k]: direct actuation of the first k units."""
    if not (1 <= k <= dim):
        raise ValueError(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    return np.eye(dim)[:, :k].copy()


def save_model(model: NetworkModel, path) -> None:
    """Write a model as a JSON document (the on-disk interchange format)."""
    doc = {
        "dim": model.dim,
        "k": model.k,
        "decay": model.decay.tolist(),
        "W": model.W.tolist(),
        "B": model.B.tolist(),
        "activation": {"kind": model.activation.kind},
    }
    if model.activation.kind == ACT_MINDY:
        doc["activation"]["alpha"] = model.activation.alpha.tolist()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> NetworkModel:
    """Read a model from its JSON document form."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("dim", "k", "decay", "W", "B", "activation"):
        if key not in doc:
            raise ValueError(f"model file is missing field {key!r}")
    act_doc = doc["activation"]
    kind = act_doc.get("kind")
    if kind == ACT_MINDY:
        act = mindy_activation(act_doc["alpha"], slope=act_doc.get("slope", MINDY_SLOPE))
    elif kind == ACT_TANH:
        act = tanh_activation()
    elif kind == ACT_LINEAR:
        act = linear_activation()
    else:
        raise ValueError(f"unknown activation kind {kind!r}")
    model = NetworkModel(
        decay=np.asarray(doc["decay"], dtype=float),
        W=np.asarray(doc["W"], dtype=float),
        B=np.asarray(doc["B"], dtype=float),
        activation=act,
    )
    if model.dim != int(doc["dim"]) or model.k != int(doc["k"]):
        raise ValueError("dim/k fields disagree with array shapes")
    return model
