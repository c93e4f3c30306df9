"""CSV and JSON serialisation of experiment results.

A report is one experiment invocation: its kind, the full input
configuration (``config_echo``), and a nonempty list of row dicts whose
columns are fixed per kind. CSV renders floats with 6 significant digits;
JSON keeps every float in round-trip-exact ``repr`` form.

JSON layout (keys are sorted on output)::

    {
      "kind": "bias_table" | "superadd" | "convergence" | "scaling_fit"
              | "correlation" | "mixture_bias",
      "columns": [...],          # same order as the CSV header
      "config_echo": {...},      # everything needed to re-run, incl. master_seed
      "rows": [{column: value}, ...],
      "created_at": "YYYY-MM-DDTHH:MM:SSZ",
      "tool_version": "x.y.z"
    }

``created_at`` honours ``SOURCE_DATE_EPOCH`` so that reruns can produce
byte-identical files.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .errors import DomainError
from .montecarlo import (
    ConvergenceRecord,
    CorrRecord,
    McSummary,
    MixtureBiasRecord,
    ScalingFit,
    SuperAddRecord,
)

__all__ = [
    "ReportKind",
    "COLUMNS",
    "ExperimentReport",
    "timestamp_now",
    "to_csv",
    "to_json",
    "from_json",
    "parse_csv",
    "default_filename",
    "write_report",
    "bias_table_report",
    "superadd_report",
    "convergence_report",
    "scaling_fit_report",
    "correlation_report",
    "mixture_bias_report",
]


class ReportKind(str, enum.Enum):
    BIAS_TABLE = "bias_table"
    SUPER_ADD = "superadd"
    CONVERGENCE = "convergence"
    SCALING_FIT = "scaling_fit"
    CORRELATION = "correlation"
    MIXTURE_BIAS = "mixture_bias"


COLUMNS: dict[ReportKind, tuple[str, ...]] = {
    ReportKind.BIAS_TABLE: ("n", "mean", "median", "std", "runs", "q", "kappa", "bias", "frozen_mean"),
    ReportKind.SUPER_ADD: (
        "sizes", "q", "runs", "e_kappa_full", "weighted_avg_parts", "gap", "std_error", "z_score",
    ),
    ReportKind.CONVERGENCE: ("n", "runs", "h", "mean", "std_error", "kappa_h"),
    ReportKind.SCALING_FIT: ("n", "bias", "fitted_bias", "c_hat", "exponent_hat", "r_squared"),
    ReportKind.CORRELATION: (
        "bucket", "sum_low", "sum_high", "mean_kappa", "count", "pearson", "spearman", "spearman_z", "degenerate",
    ),
    ReportKind.MIXTURE_BIAS: (
        "n", "q", "runs", "mc_mean", "mc_std_error", "population_mixture_kappa",
        "weighted_component_kappa", "mean_alpha_kappa",
    ),
}


def timestamp_now() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class ExperimentReport:
    kind: ReportKind
    config_echo: dict[str, Any]
    rows: list[dict[str, Any]]
    created_at: str = field(default_factory=timestamp_now)
    tool_version: str = __version__

    def __post_init__(self):
        self.kind = ReportKind(self.kind)
        if not self.rows:
            raise DomainError(f"{self.kind.value} report has no rows")
        cols = set(COLUMNS[self.kind])
        for i, row in enumerate(self.rows):
            extra = set(row) - cols
            if extra:
                raise DomainError(f"row {i} has unknown columns {sorted(extra)}")

    @property
    def columns(self) -> tuple[str, ...]:
        return COLUMNS[self.kind]


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def to_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([_cell(row.get(c)) for c in report.columns])
    return buf.getvalue()


def _parse_cell(s: str) -> Any:
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    if ";" in s:
        return [_parse_cell(p) for p in s.split(";")]
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def parse_csv(text: str) -> tuple[list[str], list[dict[str, Any]]]:
    """Header and typed rows of a CSV produced by :func:`to_csv`."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for rec in reader:
        rows.append({c: v for c, v in zip(header, map(_parse_cell, rec)) if v is not None})
    return header, rows


def _jsonable(v: Any) -> Any:
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item") and callable(v.item):  # numpy scalar
        return v.item()
    return v


def to_json(report: ExperimentReport) -> str:
    doc = {
        "kind": report.kind.value,
        "columns": list(report.columns),
        "config_echo": _jsonable(report.config_echo),
        "rows": [_jsonable(r) for r in report.rows],
        "created_at": report.created_at,
        "tool_version": report.tool_version,
    }
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def from_json(text: str) -> ExperimentReport:
    doc = json.loads(text)
    return ExperimentReport(
        kind=ReportKind(doc["kind"]),
        config_echo=doc["config_echo"],
        rows=doc["rows"],
        created_at=doc["created_at"],
        tool_version=doc["tool_version"],
    )


_SLUGS = {
    ReportKind.BIAS_TABLE: "bias-table",
    ReportKind.SUPER_ADD: "superadd",
    ReportKind.CONVERGENCE: "convergence",
    ReportKind.SCALING_FIT: "scaling-fit",
    ReportKind.CORRELATION: "correlation",
    ReportKind.MIXTURE_BIAS: "mixture-bias",
}


def default_filename(report: ExperimentReport, fmt: str) -> str:
    seed = report.config_echo.get("master_seed", 0)
    return f"{_SLUGS[report.kind]}-{seed}.{fmt}"


def write_report(report: ExperimentReport, path: str | Path, fmt: str = "csv") -> Path:
    """Write one file; a directory ``path`` gets the default file name."""
    path = Path(path)
    if path.is_dir():
        path = path / default_filename(report, fmt)
    text = to_csv(report) if fmt == "csv" else to_json(report)
    path.write_text(text, encoding="utf-8")
    return path


# builders from montecarlo records ------------------------------------------


def bias_table_report(summaries: list[McSummary], config: dict, kappa: float | None = None) -> ExperimentReport:
    rows = []
    for s in summaries:
        rows.append({
            "n": s.n, "mean": s.mean, "median": s.median, "std": s.std, "runs": s.runs, "q": s.q,
            "kappa": kappa,
            "bias": None if kappa is None else kappa - s.mean,
            "frozen_mean": s.frozen_mean,
        })
    return ExperimentReport(ReportKind.BIAS_TABLE, config, rows)


def superadd_report(rec: SuperAddRecord, config: dict) -> ExperimentReport:
    row = {
        "sizes": list(rec.sizes), "q": rec.q, "runs": rec.runs,
        "e_kappa_full": rec.e_kappa_full, "weighted_avg_parts": rec.weighted_avg_parts,
        "gap": rec.gap, "std_error": rec.std_error, "z_score": rec.z_score,
    }
    return ExperimentReport(ReportKind.SUPER_ADD, config, [row])


def convergence_report(rec: ConvergenceRecord, config: dict) -> ExperimentReport:
    rows = [
        {"n": n, "runs": rec.runs, "h": rec.h, "mean": m, "std_error": se, "kappa_h": rec.kappa_h}
        for n, m, se in rec.points
    ]
    return ExperimentReport(ReportKind.CONVERGENCE, config, rows)


def scaling_fit_report(fit: ScalingFit, config: dict) -> ExperimentReport:
    rows = []
    for n, b in fit.points:
        rows.append({
            "n": int(n) if float(n).is_integer() else n, "bias": b, "fitted_bias": fit.predict(n),
            "c_hat": fit.c_hat, "exponent_hat": fit.exponent_hat, "r_squared": fit.r_squared,
        })
    return ExperimentReport(ReportKind.SCALING_FIT, config, rows)


def correlation_report(rec: CorrRecord, config: dict) -> ExperimentReport:
    rows = [
        {"bucket": b, "sum_low": lo, "sum_high": hi, "mean_kappa": m, "count": c,
         "pearson": rec.pearson, "spearman": rec.spearman, "spearman_z": rec.spearman_z,
         "degenerate": rec.degenerate}
        for b, lo, hi, m, c in rec.bucket_means
    ]
    return ExperimentReport(ReportKind.CORRELATION, config, rows)


def mixture_bias_report(rec: MixtureBiasRecord, config: dict) -> ExperimentReport:
    row = {
        "n": rec.n, "q": rec.q, "runs": rec.runs, "mc_mean": rec.mc_mean, "mc_std_error": rec.mc_std_error,
        "population_mixture_kappa": rec.population_mixture_kappa,
        "weighted_component_kappa": rec.weighted_component_kappa,
        "mean_alpha_kappa": rec.mean_alpha_kappa,
    }
    return ExperimentReport(ReportKind.MIXTURE_BIAS, config, [row])

