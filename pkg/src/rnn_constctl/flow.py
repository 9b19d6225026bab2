"""Flow maps of the uncontrolled network and controlled simulations.

``flow_forward`` integrates x' = N(x), ``flow_backward`` integrates
x' = -N(x) (the inverse flow), and ``simulate_controlled`` integrates
x' = N(x) + B u for a constant input or a two-segment step schedule.
Step schedules are integrated segment by segment with a hard restart at
the switch time, so no step straddles the input discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _stepper
from .errors import Divergence, IntegrationBudgetExceeded, NumericsError
from .model import ACT_LINEAR, ACT_MINDY, ACT_TANH, NetworkModel

_KIND_CODE = {
    ACT_LINEAR: _stepper.KIND_LINEAR,
    ACT_TANH: _stepper.KIND_TANH,
    ACT_MINDY: _stepper.KIND_MINDY,
}


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and budget of the adaptive embedded Runge-Kutta pair.

    A step is accepted when RMS(err) < abs_tol + rel_tol * RMS(x).
    """

    rel_tol: float = 1e-13
    abs_tol: float = 1e-14
    max_steps: int = 10**6
    method: str = "dopri5"

    def __post_init__(self):
        if not (0.0 < self.abs_tol <= self.rel_tol < 1e-3):
            raise ValueError(
                f"need 0 < abs_tol <= rel_tol < 1e-3, got "
                f"abs_tol={self.abs_tol}, rel_tol={self.rel_tol}"
            )
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.method != "dopri5":
            raise ValueError(f"unknown integrator method {self.method!r}")


@dataclass(frozen=True)
class FlowResult:
    """Terminal state of an integration plus its work statistics."""

    terminal_state: np.ndarray
    steps_accepted: int
    steps_rejected: int
    rhs_evaluations: int


@dataclass(frozen=True)
class StepSchedule:
    """Two-segment piecewise-constant input on [0, horizon].

    ``values[0]`` applies on [0, switch_time], ``values[1]`` on
    (switch_time, horizon]. The synthesis routines emit the zero-then-u
    shape; degenerate schedules (equal segments, switch at 0 or horizon)
    are allowed.
    """

    horizon: float
    switch_time: float
    values: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon >= 0.0):
            raise ValueError("horizon must be finite and >= 0")
        if not (0.0 <= self.switch_time <= self.horizon):
            raise ValueError(
                f"need 0 <= switch_time <= horizon, got "
                f"switch_time={self.switch_time}, horizon={self.horizon}"
            )
        first = np.asarray(self.values[0], dtype=float)
        second = np.asarray(self.values[1], dtype=float)
        if first.shape != second.shape or first.ndim != 1:
            raise ValueError("segment values must be 1-d arrays of equal length")
        if not (np.isfinite(first).all() and np.isfinite(second).all()):
            raise ValueError("segment values must be finite")
        object.__setattr__(self, "values", (first, second))


def _check_state(x, dim: int, name: str) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"{name} must have length {dim}, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError(f"{name} contains non-finite entries")
    return x


def _core_params(model: NetworkModel):
    kind = _KIND_CODE[model.activation.kind]
    if kind == _stepper.KIND_MINDY:
        alpha = np.ascontiguousarray(model.activation.alpha, dtype=float)
        slope = float(model.activation.slope)
    else:
        alpha = np.ones(model.dim)
        slope = 0.0
    return (
        np.ascontiguousarray(model.decay, dtype=float),
        np.ascontiguousarray(model.W, dtype=float),
        kind,
        alpha,
        slope,
    )


def _run_segments(model, x0, segments, sign, cfg: IntegratorConfig) -> FlowResult:
    """Integrate consecutive (t0, t1, forcing) segments of one trajectory."""
    ddiag, w, kind, alpha, slope = _core_params(model)
    y = x0.copy()
    nacc = nrej = nfev = 0
    for t0, t1, c in segments:
        if t1 <= t0:
            continue
        y, na, nr, nf, status = _stepper.integrate_segment(
            ddiag, w, kind, alpha, slope, sign,
            np.ascontiguousarray(c, dtype=float), y,
            float(t0), float(t1), cfg.rel_tol, cfg.abs_tol, cfg.max_steps,
        )
        nacc += na
        nrej += nr
        nfev += nf
        if status == _stepper.STATUS_DIVERGED:
            raise Divergence(
                f"state magnitude exceeded {_stepper.DIVERGENCE_LIMIT:.0e} "
                f"during integration (t in [{t0}, {t1}])"
            )
        if status == _stepper.STATUS_BUDGET:
            raise IntegrationBudgetExceeded(
                f"step budget {cfg.max_steps} exhausted "
                f"({nacc} accepted, {nrej} rejected)"
            )
        if status == _stepper.STATUS_UNDERFLOW:
            raise IntegrationBudgetExceeded(
                f"step size underflow near t={t0} (state scale "
                f"{np.max(np.abs(y)):.3e})"
            )
        if status != _stepper.STATUS_OK:
            raise NumericsError(f"integrator returned unknown status {status}")
    return FlowResult(
        terminal_state=y,
        steps_accepted=nacc,
        steps_rejected=nrej,
        rhs_evaluations=nfev,
    )


def flow_forward(model: NetworkModel, x0, T: float,
                 cfg: IntegratorConfig = IntegratorConfig()) -> FlowResult:
    """Uncontrolled flow: solve x' = N(x) from x0 over [0, T]."""
    if not (np.isfinite(T) and T >= 0.0):
        raise ValueError(f"T must be finite and >= 0, got {T}")
    x0 = _check_state(x0, model.dim, "x0")
    zero = np.zeros(model.dim)
    return _run_segments(model, x0, [(0.0, T, zero)], 1.0, cfg)


def flow_backward(model: NetworkModel, x1, T: float,
                  cfg: IntegratorConfig = IntegratorConfig()) -> FlowResult:
    """Inverse flow: solve x' = -N(x) from x1 over [0, T].

    The backward flow of a contracting system is expansive, so Divergence
    is a legitimate outcome for large T.
    """
    if not (np.isfinite(T) and T >= 0.0):
        raise ValueError(f"T must be finite and >= 0, got {T}")
    x1 = _check_state(x1, model.dim, "x1")
    zero = np.zeros(model.dim)
    return _run_segments(model, x1, [(0.0, T, zero)], -1.0, cfg)


def simulate_controlled(model: NetworkModel, x0,
                        u: Union[np.ndarray, StepSchedule, list, tuple],
                        T: float,
                        cfg: IntegratorConfig = IntegratorConfig()) -> FlowResult:
    """Controlled trajectory: solve x' = N(x) + B u over [0, T].

    ``u`` is either a constant input of length k, or a StepSchedule whose
    horizon equals T. Schedules restart the integrator exactly at the
    switch time.
    """
    if not (np.isfinite(T) and T >= 0.0):
        raise ValueError(f"T must be finite and >= 0, got {T}")
    x0 = _check_state(x0, model.dim, "x0")
    if isinstance(u, StepSchedule):
        if abs(u.horizon - T) > 1e-12 * max(1.0, abs(T)):
            raise ValueError(
                f"schedule horizon {u.horizon} does not match T={T}"
            )
        if u.values[0].shape != (model.k,):
            raise ValueError(
                f"schedule values must have length k={model.k}, "
                f"got {u.values[0].shape}"
            )
        c_first = model.B @ u.values[0]
        c_second = model.B @ u.values[1]
        segments = [(0.0, u.switch_time, c_first), (u.switch_time, T, c_second)]
    else:
        u = np.asarray(u, dtype=float)
        if u.shape != (model.k,):
            raise ValueError(f"u must have length k={model.k}, got shape {u.shape}")
        if not np.isfinite(u).all():
            raise ValueError("u contains non-finite entries")
        segments = [(0.0, T, model.B @ u)]
    return _run_segments(model, x0, segments, 1.0, cfg)


def flow_jacobian_fd(model: NetworkModel, x0, T: float,
                     cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Central finite-difference estimate of the flow differential at x0.

    Column j is (phi_T(x0 + h e_j) - phi_T(x0 - h e_j)) / (2 h) with
    h = 1e-6 * max(1, |x0|). Intended for property checks, not synthesis.
    """
    x0 = _check_state(x0, model.dim, "x0")
    d = model.dim
    h = 1e-6 * max(1.0, float(np.linalg.norm(x0)))
    jac = np.empty((d, d))
    for j in range(d):
        xp = x0.copy()
        xm = x0.copy()
        xp[j] += h
        xm[j] -= h
        fp = flow_forward(model, xp, T, cfg).terminal_state
        fm = flow_forward(model, xm, T, cfg).terminal_state
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac
