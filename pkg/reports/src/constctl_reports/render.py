"""Figure rendering for the two sweep experiments.

Horizon panels: log2 horizon on x, mean log10 relative error per method
with a 95% confidence band. Actuation panels: ordinal actuation rank on
x, mean log10 relative error with one-standard-deviation bars, one
colour per horizon. Output is deterministic: fixed style, fixed SVG id
salt, no timestamps embedded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .aggregate import Panel, aggregate_experiment1, aggregate_experiment2
from .loader import load_trials

FORMAT_VECTOR = "vector"
FORMAT_RASTER = "raster"
_EXTENSIONS = {FORMAT_VECTOR: "svg", FORMAT_RASTER: "png"}

_METHOD_COLORS = {
    "LinearizedAtX0": "tab:red",
    "ForwardNominal": "tab:blue",
    "BackwardNominal": "tab:green",
    "LinearExact": "tab:purple",
}
_FALLBACK_COLORS = ("tab:orange", "tab:brown", "tab:pink", "tab:gray")


@dataclass(frozen=True)
class ReportSpec:
    """What to render: input CSVs, destination, panel selection, format."""

    exp1_csv: Optional[str] = None
    exp2_csv: Optional[str] = None
    out_dir: str = "."
    figure_format: str = FORMAT_VECTOR

    def __post_init__(self):
        if self.figure_format not in _EXTENSIONS:
            raise ValueError(
                f"figure_format must be one of {sorted(_EXTENSIONS)}, "
                f"got {self.figure_format!r}"
            )
        if self.exp1_csv is None and self.exp2_csv is None:
            raise ValueError("at least one input CSV is required")


@dataclass
class RenderResult:
    """Figure files written, the aggregates they plot, warning count."""

    figures: list[str] = field(default_factory=list)
    panels: list[Panel] = field(default_factory=list)
    warnings: int = 0


def _style():
    return plt.rc_context({
        "svg.hashsalt": "constctl-reports",
        "figure.figsize": (5.0, 3.6),
        "figure.dpi": 100,
        "savefig.dpi": 100,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
    })


def _save(fig, path: Path) -> None:
    # Date metadata would make byte-level reproducibility impossible
    if path.suffix == ".svg":
        fig.savefig(path, metadata={"Date": None})
    else:
        fig.savefig(path)
    plt.close(fig)


def _color_for(label, index: int) -> str:
    return _METHOD_COLORS.get(label, _FALLBACK_COLORS[index % len(_FALLBACK_COLORS)])


def _annotate_exclusions(ax, panel: Panel) -> None:
    if panel.excluded:
        ax.text(0.99, 0.01, f"excluded trials: {panel.excluded}",
                transform=ax.transAxes, ha="right", va="bottom", fontsize=7,
                color="dimgray")


def _no_data_marker(ax) -> None:
    ax.text(0.5, 0.5, "no data", transform=ax.transAxes, ha="center",
            va="center", fontsize=14, color="crimson")


def render_experiment1(spec: ReportSpec) -> RenderResult:
    """One panel per (family, deviation variance): error vs horizon."""
    if spec.exp1_csv is None:
        raise ValueError("spec.exp1_csv is required for horizon panels")
    rows = load_trials(spec.exp1_csv)
    panels = aggregate_experiment1(rows)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = _EXTENSIONS[spec.figure_format]
    result = RenderResult(panels=panels)

    with _style():
        for panel in panels:
            family, sigma2 = panel.key
            fig, ax = plt.subplots()
            if panel.empty:
                _no_data_marker(ax)
                result.warnings += 1
            all_ts = sorted({p.x for pts in panel.series.values() for p in pts})
            for idx, (method, points) in enumerate(sorted(panel.series.items())):
                if not points:
                    continue
                # NaN at horizons this method has no usable trials for:
                # the line breaks instead of bridging the gap
                by_t = {p.x: p for p in points}
                x = np.log2(all_ts)
                y = np.array([by_t[t].mean_log10 if t in by_t else np.nan
                              for t in all_ts])
                band = np.array([by_t[t].half_band if t in by_t else 0.0
                                 for t in all_ts])
                color = _color_for(method, idx)
                ax.plot(x, y, marker="o", markersize=3, label=method, color=color)
                ax.fill_between(x, y - band, y + band, alpha=0.2, color=color,
                                linewidth=0)
            ax.set_xlabel("log2 horizon")
            ax.set_ylabel("log10 relative endpoint error")
            ax.set_title(f"{family}, deviation variance {sigma2:g}")
            if not panel.empty:
                ax.legend(fontsize=7)
            _annotate_exclusions(ax, panel)
            path = out_dir / f"experiment1_{family}_sigma{sigma2:g}.{ext}"
            _save(fig, path)
            result.figures.append(str(path))
    return result


def render_experiment2(spec: ReportSpec) -> RenderResult:
    """One panel per method: error vs actuation rank, colour per horizon."""
    if spec.exp2_csv is None:
        raise ValueError("spec.exp2_csv is required for actuation panels")
    rows = load_trials(spec.exp2_csv)
    panels = aggregate_experiment2(rows)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = _EXTENSIONS[spec.figure_format]
    result = RenderResult(panels=panels)

    with _style():
        for panel in panels:
            (method,) = panel.key
            fig, ax = plt.subplots()
            if panel.empty:
                _no_data_marker(ax)
                result.warnings += 1
            all_ks: list[float] = sorted({p.x for pts in panel.series.values()
                                          for p in pts})
            positions = {k: i for i, k in enumerate(all_ks)}
            cmap = plt.get_cmap("viridis")
            horizons = sorted(panel.series)
            for idx, t in enumerate(horizons):
                points = panel.series[t]
                if not points:
                    continue
                by_k = {p.x: p for p in points}
                x = [positions[k] for k in all_ks]
                y = [by_k[k].mean_log10 if k in by_k else np.nan for k in all_ks]
                band = [by_k[k].half_band if k in by_k else 0.0 for k in all_ks]
                color = cmap(idx / max(1, len(horizons) - 1))
                ax.errorbar(x, y, yerr=band, marker="o", markersize=3,
                            capsize=2, label=f"T = {t:g}", color=color)
            ax.set_xticks(list(range(len(all_ks))))
            ax.set_xticklabels([f"{int(k)}" for k in all_ks])
            ax.set_xlabel("actuated coordinates k")
            ax.set_ylabel("log10 relative endpoint error")
            ax.set_title(f"{method}")
            if not panel.empty:
                ax.legend(fontsize=7)
            _annotate_exclusions(ax, panel)
            path = out_dir / f"experiment2_{method}.{ext}"
            _save(fig, path)
            result.figures.append(str(path))
    return result


def render_all(spec: ReportSpec) -> RenderResult:
    """Render whichever experiments the spec provides inputs for."""
    combined = RenderResult()
    if spec.exp1_csv is not None:
        r1 = render_experiment1(spec)
        combined.figures += r1.figures
        combined.panels += r1.panels
        combined.warnings += r1.warnings
    if spec.exp2_csv is not None:
        r2 = render_experiment2(spec)
        combined.figures += r2.figures
        combined.panels += r2.panels
        combined.warnings += r2.warnings
    return combined
