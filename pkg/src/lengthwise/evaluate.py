"""Confusion matrices, fold-statistics aggregation, and delimited-text
report emission. Pure computation plus plain file writes; no plotting.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import VOCABULARY

SUMMARY_FILE = "summary.csv"


def format_number(x: float) -> str:
    """Fixed decimal rendering with trailing zeros stripped: 59.47 stays
    "59.47", 62.0 becomes "62". Deterministic for identical inputs."""
    s = f"{float(x):.4f}".rstrip("0").rstrip(".")
    return s if s not in ("", "-", "-0") else "0"


@dataclass
class ConfusionMatrix:
    """Row = true class, column = predicted class, vocabulary order."""

    labels: tuple
    counts: np.ndarray      # integer tallies
    normalized: np.ndarray  # rows divided by their sums; zero rows stay zero

    @classmethod
    def from_counts(cls, counts) -> "ConfusionMatrix":
        counts = np.asarray(counts, dtype=np.int64)
        n = len(VOCABULARY)
        if counts.shape != (n, n):
            raise ValueError(f"confusion counts must be {n}x{n}, got {counts.shape}")
        sums = counts.sum(axis=1, keepdims=True)
        normalized = np.divide(counts, sums, out=np.zeros((n, n)), where=sums > 0)
        return cls(tuple(VOCABULARY), counts, normalized)

    @classmethod
    def from_pairs(cls, pairs) -> "ConfusionMatrix":
        n = len(VOCABULARY)
        counts = np.zeros((n, n), dtype=np.int64)
        for true, pred in pairs:
            counts[true.value, pred.value] += 1
        return cls.from_counts(counts)

    @classmethod
    def combine(cls, matrices) -> "ConfusionMatrix":
        total = np.zeros((len(VOCABULARY), len(VOCABULARY)), dtype=np.int64)
        for m in matrices:
            total += m.counts
        return cls.from_counts(total)

    def accuracy_percent(self) -> float:
        total = int(self.counts.sum())
        if total == 0:
            return 0.0
        return 100.0 * float(np.trace(self.counts)) / total


@dataclass
class SummaryStats:
    """Fold-accuracy aggregates, all in percent."""

    mean: float
    std: float
    median: float
    max: float
    min: float


def summarize_folds(accuracies) -> SummaryStats:
    """Mean, population standard deviation, median, max, min."""
    if len(accuracies) == 0:
        raise ValueError("summarize_folds needs at least one accuracy")
    a = np.asarray(accuracies, dtype=np.float64)
    return SummaryStats(mean=float(a.mean()), std=float(a.std()),
                        median=float(np.median(a)), max=float(a.max()),
                        min=float(a.min()))


def _confusion_text(cm: ConfusionMatrix) -> str:
    names = [label.name for label in cm.labels]
    header = "," + ",".join(names)
    lines = ["counts", header]
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(str(int(v)) for v in cm.counts[i]))
    lines.append("row_normalized")
    lines.append(header)
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(format_number(v) for v in cm.normalized[i]))
    return "\n".join(lines) + "\n"


def emit_report(results, path) -> list:
    """Write summary.csv plus one confusion_<model>.csv per entry.

    results: (model_name, SummaryStats, ConfusionMatrix) triples, row
    order preserved. Returns the written paths. Byte output is a pure
    function of the inputs.
    """
    if len(results) == 0:
        raise ValueError("emit_report needs at least one result")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    rows = ["model,mean,std,median,max,min"]
    written = []
    for name, stats, _ in results:
        rows.append(",".join([name, format_number(stats.mean), format_number(stats.std),
                              format_number(stats.median), format_number(stats.max),
                              format_number(stats.min)]))
    summary = path / SUMMARY_FILE
    summary.write_text("\n".join(rows) + "\n")
    written.append(summary)
    for name, _, cm in results:
        out = path / f"confusion_{name}.csv"
        out.write_text(_confusion_text(cm))
        written.append(out)
    return written


def write_fold_accuracies(path, model_name: str, accuracies) -> Path:
    """Per-fold accuracies as folds_<model>.csv, the report's raw input."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    out = path / f"folds_{model_name}.csv"
    lines = ["fold,accuracy"]
    for i, acc in enumerate(accuracies):
        lines.append(f"{i},{format_number(acc)}")
    out.write_text("\n".join(lines) + "\n")
    return out
