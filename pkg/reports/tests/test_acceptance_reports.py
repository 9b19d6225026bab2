"""Acceptance for the figure package: panel fidelity on desk-scale CSVs."""

import math
from pathlib import Path

import numpy as np

from constctl_reports import (
    ReportSpec,
    aggregate_experiment2,
    load_trials,
    render_experiment1,
    render_experiment2,
)

DATA = Path(__file__).parent / "data"


def test_criterion_8_plot_fidelity(tmp_path):
    """Panels per (family, deviation) and per method, exact aggregates,
    and a constructed quarter-per-halving CSV rendering at slope 2."""
    rows1 = load_trials(DATA / "experiment1.csv")
    rows2 = load_trials(DATA / "experiment2.csv")
    spec = ReportSpec(exp1_csv=str(DATA / "experiment1.csv"),
                      exp2_csv=str(DATA / "experiment2.csv"),
                      out_dir=str(tmp_path / "figs"))
    res1 = render_experiment1(spec)
    res2 = render_experiment2(spec)

    expected_panels1 = {(r.family, r.sigma2) for r in rows1}
    expected_panels2 = {(r.method,) for r in rows2}
    panels_ok = (len(res1.figures) == len(expected_panels1)
                 and {p.key for p in res1.panels} == expected_panels1
                 and len(res2.figures) == len(expected_panels2)
                 and {p.key for p in res2.panels} == expected_panels2)

    # plotted means vs an independent grouping pass, exact equality
    ref1: dict = {}
    for r in rows1:
        if r.status == "Ok" and math.isfinite(r.rel_endpoint_error) \
                and r.rel_endpoint_error > 0:
            ref1.setdefault((r.family, r.sigma2, r.method, r.T), []).append(
                math.log10(r.rel_endpoint_error))
    exact1 = all(
        p.mean_log10 == float(np.mean(ref1[(panel.key[0], panel.key[1], method, p.x)]))
        for panel in res1.panels
        for method, points in panel.series.items()
        for p in points
    )
    ref2: dict = {}
    for r in rows2:
        if r.status == "Ok" and math.isfinite(r.rel_endpoint_error) \
                and r.rel_endpoint_error > 0:
            ref2.setdefault((r.method, r.T, r.k), []).append(
                math.log10(r.rel_endpoint_error))
    exact2 = all(
        p.mean_log10 == float(np.mean(ref2[(panel.key[0], t, int(p.x))]))
        for panel in aggregate_experiment2(rows2)
        for t, points in panel.series.items()
        for p in points
    )

    # constructed input: errors exactly quartering per halving of T
    header = ("family,d,k,T,tau,method,model_seed,state_seed,sigma2,"
              "rel_endpoint_error,status,wall_time_ms")
    lines = [header]
    for t, err in ((0.125, 2e-5), (0.25, 8e-5), (0.5, 32e-5)):
        for s in range(4):
            lines.append(f"SmallNormTanh,8,8,{t},,ForwardNominal,1,{s},0.1,{err},Ok,0")
    constructed = tmp_path / "constructed.csv"
    constructed.write_text("\n".join(lines) + "\n")
    cres = render_experiment1(ReportSpec(exp1_csv=str(constructed),
                                         out_dir=str(tmp_path / "cfigs")))
    points = cres.panels[0].series["ForwardNominal"]
    slope = float(np.polyfit(np.log10([p.x for p in points]),
                             [p.mean_log10 for p in points], 1)[0])
    slope_ok = abs(slope - 2.0) < 1e-9

    ok = panels_ok and exact1 and exact2 and slope_ok
    print(f"[criterion 8] {'PASS' if ok else 'FAIL'} - "
          f"{len(res1.figures)}+{len(res2.figures)} panels, "
          f"exact aggregates={exact1 and exact2}, constructed slope {slope:.3f}")
    assert panels_ok
    assert exact1 and exact2
    assert slope_ok
