"""Evaluation reports and their two serializations.

The table form is comma-separated with the fixed header

    id,category,corruption,noise_fraction,input_error,lowres_error,hybrid_error,lrcn_error

where `lrcn_error` is empty when no LRCN-only model was scored and floats
carry nine decimals.
"""
import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from vinp.enums import ReportFormat
from vinp.errors import ContractError, DatasetError

TABLE_HEADER = ("id", "category", "corruption", "noise_fraction",
                "input_error", "lowres_error", "hybrid_error", "lrcn_error")
ERROR_COLUMNS = ("input_error", "lowres_error", "hybrid_error", "lrcn_error")


@dataclass(frozen=True)
class SampleScore:
    id: str
    category: str
    corruption: str
    noise_fraction: float | None
    input_error: float
    lowres_error: float
    hybrid_error: float
    lrcn_error: float | None = None

    def __post_init__(self):
        for name in ERROR_COLUMNS:
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ContractError("SampleScore", f"{name}={value} outside [0, 1]")


def _noise_key(item) -> tuple:
    return (item[0] is None, item[0] or 0.0)


@dataclass
class EvalReport:
    scores: list[SampleScore] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scores)

    def column(self, name: str) -> list[float]:
        return [getattr(s, name) for s in self.scores if getattr(s, name) is not None]

    def mean(self, name: str) -> float:
        values = self.column(name)
        return float(np.mean(values)) if values else float("nan")

    def _grouped(self, name: str, key) -> dict:
        groups = defaultdict(list)
        for s in self.scores:
            if getattr(s, name) is not None:
                groups[key(s)].append(getattr(s, name))
        return {k: float(np.mean(v)) for k, v in sorted(groups.items(), key=lambda kv: str(kv[0]))}

    def by_category(self, name: str = "hybrid_error") -> dict[str, float]:
        return self._grouped(name, lambda s: s.category)

    def by_noise(self, name: str = "hybrid_error") -> dict[float, float]:
        groups = self._grouped(name, lambda s: s.noise_fraction)
        return dict(sorted(groups.items(), key=_noise_key))

    def standard_errors(self, name: str = "hybrid_error") -> dict[float, float]:
        groups = defaultdict(list)
        for s in self.scores:
            groups[s.noise_fraction].append(getattr(s, name))
        return {k: float(np.std(v, ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
                for k, v in sorted(groups.items(), key=_noise_key)}

    def win_rate(self, better: str = "hybrid_error", worse: str = "input_error") -> float:
        if not self.scores:
            raise DatasetError("empty report")
        wins = sum(getattr(s, better) <= getattr(s, worse) for s in self.scores)
        return wins / len(self.scores)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9f}"
    return str(value)


def format_table(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for s in report.scores:
        writer.writerow([_fmt(getattr(s, col)) for col in TABLE_HEADER])
    return buf.getvalue()


def format_text(report: EvalReport) -> str:
    lines = [f"samples {len(report)}"]
    for col in ERROR_COLUMNS:
        if report.column(col):
            lines.append(f"mean {col} {_fmt(report.mean(col))}")
    for col in ERROR_COLUMNS:
        for cat, value in report.by_category(col).items():
            lines.append(f"category {cat} {col} {_fmt(value)}")
    noise = report.by_noise("hybrid_error")
    if any(k is not None for k in noise):
        errors = report.standard_errors("hybrid_error")
        for p, value in noise.items():
            lines.append(f"noise {_fmt(p)} hybrid_error {_fmt(value)} stderr {_fmt(errors[p])}")
    for s in report.scores:
        lines.append(" ".join(["sample", s.id, s.category, s.corruption] +
                              [f"{col}={_fmt(getattr(s, col))}" for col in ERROR_COLUMNS if getattr(s, col) is not None]))
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, fmt: ReportFormat = ReportFormat.TABLE, path: str | Path = None) -> str:
    """Serializes a report, writing it to `path` when given.

    Output depends only on the report, so equal reports give equal bytes.

    Raises:
        DatasetError: If the path cannot be written.
    """
    text = format_table(report) if ReportFormat(fmt) == ReportFormat.TABLE else format_text(report)
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as e:
            raise DatasetError("cannot write report", str(path), e)
        logging.info(f"vinp: wrote {ReportFormat(fmt).value} report {path} ({len(report)} rows)")
    return text
