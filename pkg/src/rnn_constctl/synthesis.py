"""Constant and step-function input synthesis for the network model.

Every routine here reduces the two-point boundary problem
``steer x0 to x1 in time T`` to one linear solve:

* ``synthesize_linear``      exact for linear activations, any horizon:
                             B u = (e^{TA} - Id)^{-1} A (x1 - e^{TA} x0)
* ``synthesize_forward``     Jacobian taken at the free-flow endpoint
                             phi_T(x0); endpoint error shrinks
                             quadratically with the (effective) horizon.
* ``synthesize_backward``    Jacobian taken at the pulled-back target
                             psi_T(x1); same quadratic error order.
* ``synthesize_linearized``  baseline obtained by linearizing at x0
                             (fully actuated case only).

With ``tau`` set, the forward/backward syntheses return a two-segment
schedule (zero input, then the computed value on the final window of
length tau), which extends the small-horizon formulas to long horizons.

``reachable_chart`` specializes the forward formula to input matrices
that directly actuate the first k coordinates: the constant-input
reachable set is, to leading order, an affine subspace through
phi_T(x0), and its orthonormal basis comes out of one QR factorization.

All inversions go through ``linalg.solve`` (never an explicit inverse);
for tiny effective horizons the solve switches to a power series in
T*Jacobian that avoids the catastrophic cancellation in e^{TJ} - Id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.integrate

from .errors import SingularSystem, TargetOffChart
from .flow import IntegratorConfig, StepSchedule, flow_backward, flow_forward
from .linalg import (
    KernelBasis,
    eigenvalues,
    kernel_basis,
    matexp,
    pseudo_inverse_apply,
    solve,
    spectral_norm,
)
from .model import ACT_LINEAR, NetworkModel, canonical_input_matrix, drift, drift_jacobian

METHOD_LINEAR = "LinearExact"
METHOD_FORWARD = "ForwardNominal"
METHOD_BACKWARD = "BackwardNominal"
METHOD_LINEARIZED = "LinearizedAtX0"
METHODS = (METHOD_LINEAR, METHOD_FORWARD, METHOD_BACKWARD, METHOD_LINEARIZED)

# Below this value of horizon * ||J|| the e^{TJ} - Id solve switches to
# the series path (the direct difference loses all significant digits).
_SERIES_THRESHOLD = 1e-4

# Spectral margins below this emit a warning diagnostic on the result.
_MARGIN_WARN = 1e-6


@dataclass(frozen=True)
class SynthesisRequest:
    """One steering problem: model, endpoint pair, horizon, method.

    ``tau`` selects step-function mode: the input is zero on
    [0, T - tau] and constant on the final window of length tau. Absent
    tau means a constant input over the whole horizon.
    """

    model: NetworkModel
    x0: np.ndarray
    x1: np.ndarray
    T: float
    method: str = METHOD_FORWARD
    tau: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (np.isfinite(self.T) and self.T > 0.0):
            raise ValueError(f"T must be finite and > 0, got {self.T}")
        if self.tau is not None and not (0.0 < self.tau <= self.T):
            raise ValueError(f"need 0 < tau <= T, got tau={self.tau}, T={self.T}")
        x0 = np.asarray(self.x0, dtype=float)
        x1 = np.asarray(self.x1, dtype=float)
        d = self.model.dim
        if x0.shape != (d,) or x1.shape != (d,):
            raise ValueError(f"x0 and x1 must have length {d}")
        if not (np.isfinite(x0).all() and np.isfinite(x1).all()):
            raise ValueError("x0 and x1 must be finite")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1", x1)

    @property
    def effective_horizon(self) -> float:
        return self.T if self.tau is None else self.tau


@dataclass(frozen=True)
class SynthesisResult:
    """Synthesized input plus feasibility and conditioning diagnostics."""

    input: Union[np.ndarray, StepSchedule]
    not_in_image: bool
    residual: float
    spectral_margin: float
    predicted_rhs: np.ndarray  # the value B u must take
    diagnostics: dict

    @property
    def u(self) -> np.ndarray:
        """The constant input value (active-segment value for schedules)."""
        if isinstance(self.input, StepSchedule):
            return self.input.values[1]
        return self.input


@dataclass(frozen=True)
class ReachableSetChart:
    """Affine chart of the constant-input reachable set at horizon T.

    ``anchor + basis.basis @ xi`` enumerates reachable targets to leading
    order; ``v_block`` maps a reachable displacement to its input.
    """

    anchor: np.ndarray
    basis: KernelBasis
    v_block: np.ndarray  # first k rows of the inverted-flow matrix
    m_block: np.ndarray  # remaining d - k rows (constraint rows)
    spectral_margin: float


@dataclass(frozen=True)
class GramianControl:
    """Minimum-energy time-varying control of the linear network."""

    times: np.ndarray
    samples: np.ndarray  # n_eval x k
    energy: float
    gramian: np.ndarray
    _a: np.ndarray
    _b: np.ndarray
    _p: np.ndarray
    _horizon: float

    def control_at(self, t: float) -> np.ndarray:
        """Exact control value B^T e^{(T-t) A^T} p at one time point."""
        return self._b.T @ matexp(self._a.T, self._horizon - t) @ self._p


def spectral_condition(a, T: float, tol: Optional[float] = None) -> tuple[bool, float]:
    """Distance of the spectrum to the invertibility-breaking set.

    e^{TA} - Id is invertible iff no eigenvalue of A equals i*2*pi*l/T
    for an integer l. Returns (ok, margin) where margin is the smallest
    distance from an eigenvalue to that lattice on the imaginary axis;
    ok is margin > tol. Never raises: a violated condition is a result,
    not an error.
    """
    a = np.asarray(a, dtype=float)
    if not (np.isfinite(T) and T > 0.0):
        raise ValueError(f"T must be finite and > 0, got {T}")
    if tol is None:
        tol = 1e-8 * (1.0 + spectral_norm(a))
    eigs = eigenvalues(a)
    step = 2.0 * np.pi / T
    nearest = step * np.round(eigs.imag / step)
    margin = float(np.min(np.hypot(eigs.real, eigs.imag - nearest)))
    return margin > tol, margin


def _require_spectral(jac: np.ndarray, t_eff: float, what: str) -> float:
    """Gate an inversion on the spectral condition; returns the margin.

    Violations raise SingularSystem up front: when e^{tJ} - Id is
    mathematically singular its floating-point image is pure round-off
    noise, which a condition estimate on the computed difference cannot
    be trusted to flag.
    """
    ok, margin = spectral_condition(jac, t_eff)
    if not ok:
        raise SingularSystem(
            f"{what} is numerically singular: an eigenvalue lies within "
            f"{margin:.3e} of the lattice i*2*pi*l/{t_eff:g}",
            rcond=0.0,
        )
    return margin


def _phi1(z: np.ndarray) -> np.ndarray:
    """Series sum_{n>=0} z^n / (n+1)!  (equals (e^z - Id) z^{-1})."""
    d = z.shape[0]
    out = np.eye(d)
    term = np.eye(d)
    for n in range(1, 60):
        term = term @ z / (n + 1.0)
        out = out + term
        if np.linalg.norm(term, 1) <= np.finfo(float).eps * np.linalg.norm(out, 1):
            break
    return out


def _exp_inverse_apply(jac: np.ndarray, t: float, rhs: np.ndarray,
                       backward: bool) -> tuple[np.ndarray, float]:
    """Apply [e^{tJ} - Id]^{-1} J (forward) or [Id - e^{-tJ}]^{-1} J
    (backward) to ``rhs`` (vector or matrix).

    For t * ||J|| below the series threshold both reduce to solving
    phi1(+-tJ) z = rhs / t, which stays well conditioned as t -> 0.
    Returns (result, rcond of the solved system).
    """
    arg = t * spectral_norm(jac)
    if arg < _SERIES_THRESHOLD:
        res = solve(_phi1((-t if backward else t) * jac), rhs)
        return res.x / t, res.rcond
    d = jac.shape[0]
    if backward:
        expm_part = matexp(jac, -t)
        lhs = np.eye(d) - expm_part
    else:
        expm_part = matexp(jac, t)
        lhs = expm_part - np.eye(d)
    # scale hint: lhs is the difference of two matrices of this size
    cancel_scale = np.linalg.norm(expm_part, 1) + 1.0
    res = solve(lhs, jac @ rhs, scale=cancel_scale)
    return res.x, res.rcond


def _package_result(req: SynthesisRequest, rhs_vec: np.ndarray, margin: float,
                    rcond: float, extra: Optional[dict] = None) -> SynthesisResult:
    lsq = pseudo_inverse_apply(req.model.B, rhs_vec)
    if req.tau is None:
        inp: Union[np.ndarray, StepSchedule] = lsq.u
    else:
        inp = StepSchedule(
            horizon=req.T,
            switch_time=req.T - req.tau,
            values=(np.zeros(req.model.k), lsq.u),
        )
    diagnostics = {"rcond": rcond, "warnings": []}
    if margin < _MARGIN_WARN:
        diagnostics["warnings"].append(
            f"spectral margin {margin:.3e} below {_MARGIN_WARN:.0e}; "
            "the inverted system is close to singular"
        )
    if extra:
        diagnostics.update(extra)
    return SynthesisResult(
        input=inp,
        not_in_image=lsq.not_in_image,
        residual=lsq.residual,
        spectral_margin=margin,
        predicted_rhs=rhs_vec,
        diagnostics=diagnostics,
    )


def synthesize_linear(req: SynthesisRequest) -> SynthesisResult:
    """Constant input steering the linear network exactly.

    Requires a linear activation. B u = (e^{TA} - Id)^{-1} A (x1 - e^{TA} x0);
    the least-norm u is returned, with the not-in-image flag set when the
    required value leaves the column space of B. Valid for any horizon
    satisfying the spectral condition, short or long.
    """
    if req.model.activation.kind != ACT_LINEAR:
        raise ValueError("synthesize_linear requires a linear activation")
    if req.tau is not None:
        t_eff = req.tau
    else:
        t_eff = req.T
    a = -np.diag(req.model.decay) + req.model.W
    margin = _require_spectral(a, t_eff, "e^{TA} - Id")
    target_gap = req.x1 - matexp(a, req.T) @ req.x0
    rhs_vec, rcond = _exp_inverse_apply(a, t_eff, target_gap, backward=False)
    return _package_result(req, rhs_vec, margin, rcond)


def synthesize_forward(req: SynthesisRequest,
                       cfg: IntegratorConfig = IntegratorConfig()) -> SynthesisResult:
    """Constant or step input from the Jacobian at the free-flow endpoint.

    B u = [e^{tau J} - Id]^{-1} J (x1 - phi_T(x0)) with
    J = drift Jacobian at phi_T(x0) and tau the effective horizon
    (tau = T in constant mode). The simulated endpoint error is of
    second order in the effective horizon.
    """
    anchor = flow_forward(req.model, req.x0, req.T, cfg).terminal_state
    jac = drift_jacobian(req.model, anchor)
    t_eff = req.effective_horizon
    margin = _require_spectral(jac, t_eff, "the endpoint-Jacobian system")
    rhs_vec, rcond = _exp_inverse_apply(jac, t_eff, req.x1 - anchor, backward=False)
    return _package_result(req, rhs_vec, margin, rcond, extra={"anchor": anchor})


def synthesize_backward(req: SynthesisRequest,
                        cfg: IntegratorConfig = IntegratorConfig()) -> SynthesisResult:
    """Constant or step input from the Jacobian at the pulled-back target.

    B u = [Id - e^{-tau J}]^{-1} J (psi_T(x1) - x0) with J the drift
    Jacobian at psi_T(x1). The inverse flow may diverge for long
    horizons on expansive directions; that Divergence propagates.
    """
    pullback = flow_backward(req.model, req.x1, req.T, cfg).terminal_state
    jac = drift_jacobian(req.model, pullback)
    t_eff = req.effective_horizon
    margin = _require_spectral(jac, t_eff, "the pullback-Jacobian system")
    rhs_vec, rcond = _exp_inverse_apply(jac, t_eff, pullback - req.x0, backward=True)
    return _package_result(req, rhs_vec, margin, rcond, extra={"pullback": pullback})


def synthesize_linearized(req: SynthesisRequest) -> SynthesisResult:
    """Baseline: exact input for the system linearized at x0.

    u = (e^{TA} - Id)^{-1} A (x1 - e^{TA} x0) - N(x0) with A the drift
    Jacobian at x0. Only defined for full actuation (B = Id); carries no
    endpoint guarantee on the nonlinear plant.
    """
    d = req.model.dim
    if req.model.B.shape != (d, d) or not np.array_equal(req.model.B, np.eye(d)):
        raise ValueError("the linearized baseline requires B = Id")
    a = drift_jacobian(req.model, req.x0)
    t_eff = req.effective_horizon
    margin = _require_spectral(a, t_eff, "the linearization system")
    target_gap = req.x1 - matexp(a, req.T) @ req.x0
    rhs_vec, rcond = _exp_inverse_apply(a, t_eff, target_gap, backward=False)
    rhs_vec = rhs_vec - drift(req.model, req.x0)
    return _package_result(req, rhs_vec, margin, rcond)


def synthesize(req: SynthesisRequest,
               cfg: IntegratorConfig = IntegratorConfig()) -> SynthesisResult:
    """Dispatch on the request's method."""
    if req.method == METHOD_LINEAR:
        return synthesize_linear(req)
    if req.method == METHOD_FORWARD:
        return synthesize_forward(req, cfg)
    if req.method == METHOD_BACKWARD:
        return synthesize_backward(req, cfg)
    return synthesize_linearized(req)


def gramian_control_linear(model: NetworkModel, x0, x1, T: float,
                           n_eval: int = 1001,
                           quad_tol: float = 1e-10) -> GramianControl:
    """Minimum-L2-energy time-varying control of the linear network.

    Computes the controllability Gramian W_c = int_0^T e^{sA} B B^T e^{sA^T} ds
    by adaptive quadrature and returns samples of
    u(t) = B^T e^{(T-t) A^T} W_c^{-1} (x1 - e^{TA} x0) on a uniform grid,
    together with the control energy <W_c^{-1} eta, eta>. This succeeds
    whenever the pair (A, B) is controllable, including horizons where no
    constant input exists.
    """
    if model.activation.kind != ACT_LINEAR:
        raise ValueError("gramian_control_linear requires a linear activation")
    if not (np.isfinite(T) and T > 0.0):
        raise ValueError(f"T must be finite and > 0, got {T}")
    if n_eval < 2:
        raise ValueError("n_eval must be >= 2")
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    a = -np.diag(model.decay) + model.W
    b = np.asarray(model.B, dtype=float)
    bbt = b @ b.T

    def integrand(s):
        e = matexp(a, s)
        return e @ bbt @ e.T

    gram, _ = scipy.integrate.quad_vec(integrand, 0.0, T, epsabs=quad_tol, epsrel=quad_tol)
    eta = x1 - matexp(a, T) @ x0
    try:
        p = solve(gram, eta).x
    except SingularSystem as exc:
        raise SingularSystem(
            f"controllability Gramian is numerically singular "
            f"(rcond {exc.rcond:.3e}); the pair (A, B) is not controllable",
            rcond=exc.rcond,
        ) from exc
    energy = float(eta @ p)
    times = np.linspace(0.0, T, n_eval)
    samples = np.empty((n_eval, b.shape[1]))
    for i, t in enumerate(times):
        samples[i] = b.T @ matexp(a.T, T - t) @ p
    return GramianControl(
        times=times, samples=samples, energy=energy, gramian=gram,
        _a=a, _b=b, _p=p, _horizon=float(T),
    )


def reachable_chart(model: NetworkModel, x0, T: float,
                    cfg: IntegratorConfig = IntegratorConfig()) -> ReachableSetChart:
    """Affine chart of the constant-input reachable set, canonical actuation.

    Requires B = [e_1 ... e_k] with k < d. Forms the full matrix
    G = [e^{TJ} - Id]^{-1} J at the free-flow endpoint, splits it into
    its first k rows (input map) and last d-k rows (constraints), and
    returns the orthonormal kernel basis of the constraint block. To
    leading order, reachable targets are anchor + span(basis).
    """
    d, k = model.dim, model.k
    if k >= d:
        raise ValueError(f"reachable_chart requires k < d, got k={k}, d={d}")
    if not np.array_equal(model.B, canonical_input_matrix(d, k)):
        raise ValueError("reachable_chart requires the canonical input matrix [e_1 ... e_k]")
    x0 = np.asarray(x0, dtype=float)
    anchor = flow_forward(model, x0, T, cfg).terminal_state
    jac = drift_jacobian(model, anchor)
    margin = _require_spectral(jac, T, "the endpoint-Jacobian system")
    gmat, _ = _exp_inverse_apply(jac, T, np.eye(d), backward=False)
    v_block = gmat[:k, :].copy()
    m_block = gmat[k:, :].copy()
    basis = kernel_basis(m_block)
    return ReachableSetChart(
        anchor=anchor, basis=basis, v_block=v_block, m_block=m_block,
        spectral_margin=margin,
    )


def reachable_control(chart: ReachableSetChart, x1,
                      chart_tol: float = 1e-6) -> np.ndarray:
    """Constant input reaching a target on the chart: u = V (x1 - anchor).

    The displacement must lie in the chart's subspace; a projection
    residual (relative to the displacement size) above ``chart_tol``
    raises TargetOffChart.
    """
    x1 = np.asarray(x1, dtype=float)
    delta = x1 - chart.anchor
    q = chart.basis.basis
    off = delta - q @ (q.T @ delta)
    dnorm = float(np.linalg.norm(delta))
    residual = float(np.linalg.norm(off)) / dnorm if dnorm > 0.0 else 0.0
    if residual > chart_tol:
        raise TargetOffChart(
            f"target lies off the reachable chart "
            f"(relative projection residual {residual:.3e})",
            residual=residual,
        )
    return chart.v_block @ delta
