"""Reading and validating the sweep CSVs.

The schema is owned by the sweep harness; this package only consumes the
files. Validation is strict: an unexpected header fails before any
plotting happens.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass


EXPECTED_HEADER = [
    "family", "d", "k", "T", "tau", "method", "model_seed", "state_seed",
    "sigma2", "rel_endpoint_error", "status", "wall_time_ms",
]

STATUS_OK = "Ok"


@dataclass(frozen=True)
class TrialRow:
    """One parsed sweep row (types coerced, no aggregation)."""

    family: str
    d: int
    k: int
    T: float
    tau: float | None
    method: str
    model_seed: int
    state_seed: int
    sigma2: float
    rel_endpoint_error: float
    status: str
    wall_time_ms: float


def load_trials(path) -> list[TrialRow]:
    """Parse one sweep CSV, enforcing the exact schema."""
    rows: list[TrialRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header") from None
        if header != EXPECTED_HEADER:
            raise ValueError(
                f"{path}: header does not match the sweep schema; "
                f"got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(EXPECTED_HEADER):
                raise ValueError(f"{path}:{lineno}: expected 12 fields, got {len(row)}")
            try:
                rows.append(TrialRow(
                    family=row[0], d=int(row[1]), k=int(row[2]), T=float(row[3]),
                    tau=None if row[4] == "" else float(row[4]), method=row[5],
                    model_seed=int(row[6]), state_seed=int(row[7]),
                    sigma2=float(row[8]), rel_endpoint_error=float(row[9]),
                    status=row[10], wall_time_ms=float(row[11]),
                ))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row: {exc}") from exc
    return rows
