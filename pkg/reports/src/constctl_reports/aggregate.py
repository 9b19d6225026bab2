"""Aggregation of trial rows into the plotted statistics.

Only successful trials enter the statistics; everything else is counted
so the figures can annotate how much data was dropped. All statistics
are computed on log10 of the relative endpoint error, matching the
figure axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .loader import STATUS_OK, TrialRow


@dataclass(frozen=True)
class SeriesPoint:
    """One plotted aggregate: mean of log10 errors plus its spread."""

    x: float  # T for horizon sweeps, k for actuation sweeps
    mean_log10: float
    half_band: float  # 1.96 SE (horizon panels) or 1 SD (actuation panels)
    n: int


@dataclass
class Panel:
    """One figure panel: a set of labelled series plus exclusion counts."""

    key: tuple
    series: dict = field(default_factory=dict)  # label -> list[SeriesPoint]
    excluded: int = 0

    @property
    def empty(self) -> bool:
        return all(len(pts) == 0 for pts in self.series.values())


def _usable(row: TrialRow) -> bool:
    return (row.status == STATUS_OK
            and math.isfinite(row.rel_endpoint_error)
            and row.rel_endpoint_error > 0.0)


def _mean_and_se_band(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values)
    mean = float(np.mean(arr))
    if arr.size < 2:
        return mean, 0.0
    se = float(np.std(arr, ddof=1)) / math.sqrt(arr.size)
    return mean, 1.96 * se


def _mean_and_sd_band(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values)
    mean = float(np.mean(arr))
    if arr.size < 2:
        return mean, 0.0
    return mean, float(np.std(arr, ddof=1))


def aggregate_experiment1(rows: list[TrialRow]) -> list[Panel]:
    """Panels keyed (family, sigma2); one series per method over T.

    Band: 95% confidence interval of the mean of log10 errors.
    """
    panels: dict[tuple, Panel] = {}
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        pkey = (row.family, row.sigma2)
        panel = panels.setdefault(pkey, Panel(key=pkey))
        if not _usable(row):
            panel.excluded += 1
            continue
        groups.setdefault((pkey, row.method, row.T), []).append(
            math.log10(row.rel_endpoint_error))
    for (pkey, method, t), values in groups.items():
        mean, band = _mean_and_se_band(values)
        panels[pkey].series.setdefault(method, []).append(
            SeriesPoint(x=t, mean_log10=mean, half_band=band, n=len(values)))
    for panel in panels.values():
        for pts in panel.series.values():
            pts.sort(key=lambda p: p.x)
    return [panels[k] for k in sorted(panels)]


def aggregate_experiment2(rows: list[TrialRow]) -> list[Panel]:
    """Panels keyed (method,); one series per horizon T over ordinal k.

    Band: one standard deviation of the log10 errors.
    """
    panels: dict[tuple, Panel] = {}
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        pkey = (row.method,)
        panel = panels.setdefault(pkey, Panel(key=pkey))
        if not _usable(row):
            panel.excluded += 1
            continue
        groups.setdefault((pkey, row.T, row.k), []).append(
            math.log10(row.rel_endpoint_error))
    for (pkey, t, k), values in groups.items():
        mean, band = _mean_and_sd_band(values)
        panels[pkey].series.setdefault(t, []).append(
            SeriesPoint(x=float(k), mean_log10=mean, half_band=band, n=len(values)))
    for panel in panels.values():
        for pts in panel.series.values():
            pts.sort(key=lambda p: p.x)
    return [panels[k] for k in sorted(panels)]
