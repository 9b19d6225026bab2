"""Acceptance suite: one test per release criterion, one printed verdict
line each. Tolerances are fixed here, not configurable."""

import math
import time

import numpy as np
import scipy.integrate
import scipy.interpolate

from rnn_constctl.errors import SingularSystem
from rnn_constctl.flow import (
    flow_backward,
    flow_forward,
    flow_jacobian_fd,
    simulate_controlled,
)
from rnn_constctl.harness import (
    FAMILY_BISTABLE_TANH,
    FAMILY_MINDY_LIKE,
    FAMILY_MONOSTABLE_TANH,
    FAMILY_SMALL_NORM_TANH,
    STATUS_OK,
    ModelSpec,
    SweepConfig,
    derive_seed,
    desk_config_experiment1,
    desk_config_experiment2,
    generate_model,
    run_experiment_1,
    run_experiment_2,
    stream,
    write_csv,
)
from rnn_constctl.linalg import matexp, spectral_norm
from rnn_constctl.model import (
    NetworkModel,
    contraction_margins,
    drift,
    drift_jacobian,
    linear_activation,
    mindy_activation,
    tanh_activation,
)
from rnn_constctl.synthesis import (
    METHOD_BACKWARD,
    METHOD_FORWARD,
    METHOD_LINEAR,
    METHOD_LINEARIZED,
    SynthesisRequest,
    gramian_control_linear,
    reachable_chart,
    synthesize_backward,
    synthesize_forward,
    synthesize_linear,
)

from conftest import central_difference_jacobian


def _verdict(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num}] {'PASS' if ok else 'FAIL'} - {detail}")


def _rel_err(model, x0, u, T, x1):
    sim = simulate_controlled(model, x0, u, T)
    return float(np.linalg.norm(sim.terminal_state - x1) / np.linalg.norm(x1 - x0))


def test_criterion_1_linear_exactness():
    """Constant inputs steer random linear networks exactly at any horizon."""
    start = time.perf_counter()
    worst = 0.0
    n_trials = 0
    for family in ("StableLinear", "UnstableLinear"):
        for model_idx in range(5):
            model = generate_model(
                ModelSpec(family=family, d=16, seed=derive_seed(7, family, model_idx)))
            rng = stream(derive_seed(7, "pairs", family, model_idx))
            for _ in range(10):
                x0, x1 = rng.normal(size=16), rng.normal(size=16)
                for T in (0.25, 1.0, 4.0, 16.0, 64.0):
                    res = synthesize_linear(SynthesisRequest(
                        model=model, x0=x0, x1=x1, T=T, method=METHOD_LINEAR))
                    worst = max(worst, _rel_err(model, x0, res.input, T, x1))
                    n_trials += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 30.0
    _verdict(1, ok, f"{n_trials} trials, worst rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst < 1e-6
    assert elapsed < 30.0


def test_criterion_2_counterexample_and_gramian():
    """At a full rotation period no constant input exists, but the
    minimum-energy time-varying control still steers with the predicted
    energy."""
    start = time.perf_counter()
    omega = 4.0
    T = 2.0 * np.pi / omega
    a = np.array([[0.0, -omega], [omega, 0.0]])
    model = NetworkModel(decay=np.ones(2), W=a + np.eye(2), B=np.eye(2),
                         activation=linear_activation())
    x1 = np.array([1.0, 0.0])

    raised = False
    try:
        synthesize_linear(SynthesisRequest(model=model, x0=np.zeros(2), x1=x1, T=T,
                                           method=METHOD_LINEAR))
    except SingularSystem:
        raised = True

    ctl = gramian_control_linear(model, np.zeros(2), x1, T, n_eval=2001)
    u_spline = scipy.interpolate.CubicSpline(ctl.times, ctl.samples, axis=0)
    sol = scipy.integrate.solve_ivp(lambda t, x: a @ x + u_spline(t), (0.0, T),
                                    np.zeros(2), rtol=1e-12, atol=1e-12)
    endpoint_err = float(np.linalg.norm(sol.y[:, -1] - x1))
    energy_ref = float(x1 @ x1) / T
    energy_gap = abs(ctl.energy - energy_ref) / energy_ref
    elapsed = time.perf_counter() - start

    ok = raised and endpoint_err < 1e-6 and energy_gap < 0.01 and elapsed < 5.0
    _verdict(2, ok, f"singular={raised}, endpoint err {endpoint_err:.2e}, "
                    f"energy gap {energy_gap:.2e}, {elapsed:.1f}s")
    assert raised
    assert endpoint_err < 1e-6
    assert energy_gap < 0.01
    assert elapsed < 5.0


def test_criterion_3_quadratic_endpoint_order():
    """Relative endpoint error of both nominal-state syntheses shrinks
    quadratically when targets sit at distance T off the free flow."""
    start = time.perf_counter()
    horizons = (0.5, 0.25, 0.125)
    slopes = {}
    for synth, name in ((synthesize_forward, "forward"),
                        (synthesize_backward, "backward")):
        errs = {T: [] for T in horizons}
        for d in (2, 8):
            rng = np.random.default_rng((7, d))
            for _ in range(4):
                w = rng.normal(0.0, 0.5 / np.sqrt(d), size=(d, d))
                model = NetworkModel(decay=np.full(d, 0.5), W=w, B=np.eye(d),
                                     activation=tanh_activation())
                for _ in range(10):
                    x0 = rng.normal(size=d) * 3.0
                    v = rng.normal(size=d)
                    v /= np.linalg.norm(v)
                    for T in horizons:
                        anchor = flow_forward(model, x0, T).terminal_state
                        x1 = anchor + T * v
                        res = synth(SynthesisRequest(model=model, x0=x0, x1=x1, T=T,
                                                     method=METHOD_BACKWARD
                                                     if name == "backward"
                                                     else METHOD_FORWARD))
                        errs[T].append(_rel_err(model, x0, res.input, T, x1))
        medians = [float(np.median(errs[T])) for T in horizons]
        slopes[name] = float(np.polyfit(np.log(horizons), np.log(medians), 1)[0])
    elapsed = time.perf_counter() - start
    ok = all(1.7 <= s <= 2.3 for s in slopes.values()) and elapsed < 120.0
    _verdict(3, ok, f"slopes forward {slopes['forward']:.2f}, "
                    f"backward {slopes['backward']:.2f}, {elapsed:.1f}s")
    for name, slope in slopes.items():
        assert 1.7 <= slope <= 2.3, f"{name} slope {slope}"
    assert elapsed < 120.0


def test_criterion_4_method_ordering():
    """Forward nominal-state synthesis beats backward, which beats the
    linearization baseline, on desk-scale nonlinear sweeps."""
    start = time.perf_counter()
    cfg = SweepConfig(
        families=(FAMILY_SMALL_NORM_TANH, FAMILY_MONOSTABLE_TANH,
                  FAMILY_BISTABLE_TANH, FAMILY_MINDY_LIKE),
        dims=(16,), horizons=(2.0, 4.0, 8.0), deviation_sigma2=(0.1,),
        n_models=3, n_states=10, seed=20240,
    )
    records = run_experiment_1(cfg, workers=1)
    by_key = {}
    for r in records:
        if r.status == STATUS_OK and r.rel_endpoint_error > 0:
            by_key.setdefault(
                (r.family, r.T, r.model_seed, r.state_seed), {})[r.method] = \
                r.rel_endpoint_error

    results = {}
    for better, worse in ((METHOD_FORWARD, METHOD_BACKWARD),
                          (METHOD_BACKWARD, METHOD_LINEARIZED)):
        pairs = [(v[better], v[worse]) for v in by_key.values()
                 if better in v and worse in v]
        win_frac = np.mean([a <= b for a, b in pairs])
        mean_better = np.mean([math.log10(a) for a, _ in pairs])
        mean_worse = np.mean([math.log10(b) for _, b in pairs])
        results[(better, worse)] = (len(pairs), win_frac, mean_better, mean_worse)

    elapsed = time.perf_counter() - start
    ok = elapsed < 300.0
    detail = []
    for (better, worse), (n, frac, mb, mw) in results.items():
        ok = ok and n >= 30 and frac >= 0.6 and mb <= mw
        detail.append(f"{better}<={worse}: {n} pairs, win {frac:.2f}, "
                      f"log10 {mb:.2f} vs {mw:.2f}")
    _verdict(4, ok, "; ".join(detail) + f", {elapsed:.1f}s")
    for (better, worse), (n, frac, mb, mw) in results.items():
        assert n >= 30
        assert frac >= 0.6, f"{better} vs {worse}: win fraction {frac}"
        assert mb <= mw, f"{better} vs {worse}: mean log10 {mb} vs {mw}"
    assert elapsed < 300.0


def test_criterion_5_reachable_set_structure():
    """Partial-actuation charts are exact subspaces and on-chart targets
    are reached about as accurately as under full actuation."""
    start = time.perf_counter()
    k_values = (8, 16, 31)
    horizons = (0.25, 0.5)

    # structural part: constraint rows annihilate the basis
    worst_residual = 0.0
    for k in k_values:
        for T in horizons:
            model = generate_model(
                ModelSpec(family=FAMILY_SMALL_NORM_TANH, d=32,
                          seed=derive_seed(5, "chart", k)))
            from rnn_constctl.model import canonical_input_matrix

            chart_model = model.with_input_matrix(canonical_input_matrix(32, k))
            x0 = stream(derive_seed(5, "x0", k, T)).normal(size=32)
            chart = reachable_chart(chart_model, x0, T)
            assert chart.basis.basis.shape == (32, k)
            worst_residual = max(
                worst_residual,
                float(np.max(np.abs(chart.m_block @ chart.basis.basis))))

    # statistical part: accuracy across actuation ranks
    cfg = SweepConfig(families=(FAMILY_SMALL_NORM_TANH,), dims=(32,),
                      horizons=horizons, k_values=k_values + (32,),
                      n_models=3, n_states=10, seed=20240)
    records = run_experiment_2(cfg, workers=1)
    worst_ratio = 0.0
    for T in horizons:
        meds = {}
        for k in k_values + (32,):
            errs = [r.rel_endpoint_error for r in records
                    if r.method == METHOD_FORWARD and r.status == STATUS_OK
                    and r.k == k and r.T == T]
            meds[k] = float(np.median(errs))
        ref = meds[32]
        for k in k_values:
            worst_ratio = max(worst_ratio, meds[k] / ref, ref / meds[k])

    elapsed = time.perf_counter() - start
    ok = worst_residual < 1e-9 and worst_ratio < 10.0 and elapsed < 180.0
    _verdict(5, ok, f"max |M Q2| {worst_residual:.2e}, "
                    f"max median ratio vs full actuation {worst_ratio:.2f}, "
                    f"{elapsed:.1f}s")
    assert worst_residual < 1e-9
    assert worst_ratio < 10.0
    assert elapsed < 180.0


def test_criterion_6_analytic_consistency():
    """Jacobians, flow group law, linear closed forms and contraction
    bounds all agree with the analytic predictions."""
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    d = 5

    # drift Jacobian vs finite differences, all activation families
    worst_jac = 0.0
    for act in (linear_activation(), tanh_activation(),
                mindy_activation(rng.uniform(0.5, 1.5, size=d))):
        model = NetworkModel(decay=rng.uniform(0.8, 1.4, size=d),
                             W=rng.normal(0.0, 0.4, size=(d, d)),
                             B=np.eye(d), activation=act)
        for _ in range(3):
            x = rng.normal(size=d)
            jac = drift_jacobian(model, x)
            fd = central_difference_jacobian(lambda z: drift(model, z), x)
            worst_jac = max(worst_jac,
                            float(np.max(np.abs(jac - fd)) / max(1.0, np.max(np.abs(fd)))))

    # flow group law on a contracting tanh model
    w = rng.normal(size=(d, d))
    w *= 0.6 / np.linalg.norm(w, 2)
    tanh_model = NetworkModel(decay=np.ones(d), W=w, B=np.eye(d),
                              activation=tanh_activation())
    worst_group = 0.0
    for _ in range(3):
        x0 = rng.normal(size=d)
        fw = flow_forward(tanh_model, x0, 1.5).terminal_state
        back = flow_backward(tanh_model, fw, 1.5).terminal_state
        worst_group = max(worst_group, float(np.linalg.norm(back - x0)))

    # linear flows vs matrix-exponential closed forms
    lin_model = NetworkModel(decay=rng.uniform(0.8, 1.4, size=d),
                             W=rng.normal(0.0, 0.3, size=(d, d)), B=np.eye(d))
    a = -np.diag(lin_model.decay) + lin_model.W
    worst_lin = 0.0
    for T in (0.5, 1.5):
        x0 = rng.normal(size=d)
        u = rng.normal(size=d)
        free = flow_forward(lin_model, x0, T).terminal_state
        ref_free = matexp(a, T) @ x0
        forced = simulate_controlled(lin_model, x0, u, T).terminal_state
        ref_forced = ref_free + np.linalg.solve(a, (matexp(a, T) - np.eye(d)) @ u)
        scale = max(1.0, float(np.linalg.norm(ref_forced)))
        worst_lin = max(worst_lin,
                        float(np.linalg.norm(free - ref_free)) / scale,
                        float(np.linalg.norm(forced - ref_forced)) / scale)

    # contraction bounds on a positive-margin model
    margins = contraction_margins(tanh_model)
    assert margins.gamma > 0
    contracting_part = -np.diag(tanh_model.decay) + tanh_model.W
    worst_sg = 0.0
    worst_dflow = 0.0
    for t in (0.1, 1.0, 10.0):
        worst_sg = max(worst_sg, spectral_norm(matexp(contracting_part, t)) - 1.0)
    for T in (0.5, 1.0):
        x0 = rng.normal(size=d)
        jac = flow_jacobian_fd(tanh_model, x0, T)
        worst_dflow = max(worst_dflow,
                          spectral_norm(jac) / (np.exp(-margins.gamma * T) * (1 + 1e-3)))

    elapsed = time.perf_counter() - start
    ok = (worst_jac < 1e-6 and worst_group < 1e-7 and worst_lin < 1e-9
          and worst_sg <= 1e-9 and worst_dflow <= 1.0 and elapsed < 60.0)
    _verdict(6, ok, f"jacobian fd {worst_jac:.1e}, group law {worst_group:.1e}, "
                    f"linear flows {worst_lin:.1e}, semigroup excess {worst_sg:.1e}, "
                    f"flow-contraction quotient {worst_dflow:.3f}, {elapsed:.1f}s")
    assert worst_jac < 1e-6
    assert worst_group < 1e-7
    assert worst_lin < 1e-9
    assert worst_sg <= 1e-9
    assert worst_dflow <= 1.0
    assert elapsed < 60.0


def test_criterion_7_sweep_determinism(tmp_path):
    """The desk-scale sweep replays byte-identically at different
    worker-pool sizes."""
    start = time.perf_counter()
    cfg1 = desk_config_experiment1()
    cfg2 = desk_config_experiment2()
    outputs = {}
    for workers in (1, 2):
        run_dir = tmp_path / f"workers{workers}"
        run_dir.mkdir()
        write_csv(run_experiment_1(cfg1, workers=workers), run_dir / "experiment1.csv")
        write_csv(run_experiment_2(cfg2, workers=workers), run_dir / "experiment2.csv")
        outputs[workers] = (
            (run_dir / "experiment1.csv").read_bytes(),
            (run_dir / "experiment2.csv").read_bytes(),
        )
    identical1 = outputs[1][0] == outputs[2][0]
    identical2 = outputs[1][1] == outputs[2][1]
    elapsed = time.perf_counter() - start
    ok = identical1 and identical2 and elapsed < 600.0
    _verdict(7, ok, f"experiment1 identical={identical1}, "
                    f"experiment2 identical={identical2}, "
                    f"{len(outputs[1][0])} + {len(outputs[1][1])} bytes, {elapsed:.1f}s")
    assert identical1 and identical2
    assert elapsed < 600.0
