"""Evaluation metrics (CPE, MPE, visibility) and report emission.

Rows are long-format (run, step, agent, metric, value); pair-level metrics
use agent = -1.  CPE rows exist only for steps where the agent's bounding
box was non-empty.  Report files are byte-stable for identical inputs:
floats are serialized with repr and all orderings are fixed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PERCENTILES = (5, 25, 50, 75, 95)
PAIR_AGENT = -1

METRIC_CPE = "cpe"
METRIC_MPE_MONO = "mpe_mono"
METRIC_MPE_MULTI = "mpe_multi"
METRIC_VISIBLE = "visible"
METRIC_ANY_VISIBLE = "any_visible"
METRIC_INTER_MAV = "inter_mav_distance"


@dataclass
class MetricRow:
    run: int
    step: int
    agent: int
    metric: str
    value: float


def percentile_summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    summary = {"count": int(arr.size)}
    if arr.size == 0:
        summary.update({f"p{p}": None for p in PERCENTILES})
        summary["mean"] = None
        return summary
    qs = np.percentile(arr, PERCENTILES)
    summary.update({f"p{p}": float(q) for p, q in zip(PERCENTILES, qs)})
    summary["mean"] = float(arr.mean())
    return summary


@dataclass
class MetricsReport:
    rows: list[MetricRow] = field(default_factory=list)

    def add(self, run: int, step: int, agent: int, metric: str, value: float):
        self.rows.append(MetricRow(run, step, agent, metric, float(value)))

    def extend(self, rows):
        self.rows.extend(rows)

    def values(self, metric: str, run: int | None = None) -> np.ndarray:
        out = [r.value for r in self.rows
               if r.metric == metric and (run is None or r.run == run)]
        return np.asarray(out, dtype=float)

    def runs(self) -> list[int]:
        return sorted({r.run for r in self.rows})

    def metrics(self) -> list[str]:
        return sorted({r.metric for r in self.rows})

    def visibility_fraction(self, run: int | None = None, any_view: bool = False) -> float:
        metric = METRIC_ANY_VISIBLE if any_view else METRIC_VISIBLE
        vals = self.values(metric, run)
        return float(vals.mean()) if vals.size else 0.0

    def min_inter_mav_distance(self) -> float | None:
        vals = self.values(METRIC_INTER_MAV)
        return float(vals.min()) if vals.size else None

    def summary(self) -> dict:
        pooled = {m: percentile_summary(self.values(m)) for m in self.metrics()}
        per_run = {run: {m: percentile_summary(self.values(m, run))
                         for m in self.metrics()}
                   for run in self.runs()}
        visibility = {
            "pooled": {"per_agent": self.visibility_fraction(),
                       "any_view": self.visibility_fraction(any_view=True)},
            "per_run": {run: {"per_agent": self.visibility_fraction(run),
                              "any_view": self.visibility_fraction(run, any_view=True)}
                        for run in self.runs()},
        }
        return {"pooled": pooled, "per_run": per_run, "visibility": visibility,
                "min_inter_mav_distance": self.min_inter_mav_distance()}


def emit_reports(report: MetricsReport, replay_paths, out_dir) -> dict:
    """Write metrics.csv, summary.json and per-metric box-plot quantiles.

    Returns the paths written.  Raises OSError on IO failure.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "step", "agent", "metric", "value"])
        for row in report.rows:
            writer.writerow([row.run, row.step, row.agent, row.metric, row.value])

    summary = report.summary()
    summary["replays"] = [str(p) for p in replay_paths]
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    plot_dir = out_dir / "plotdata"
    plot_dir.mkdir(exist_ok=True)
    plot_paths = []
    quantile_cols = [f"p{p}" for p in PERCENTILES]
    for metric in report.metrics():
        path = plot_dir / f"{metric}_quantiles.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run"] + quantile_cols)
            for run in report.runs():
                s = percentile_summary(report.values(metric, run))
                writer.writerow([run] + [s[c] for c in quantile_cols])
            pooled = percentile_summary(report.values(metric))
            writer.writerow(["pooled"] + [pooled[c] for c in quantile_cols])
        plot_paths.append(path)

    return {"metrics": metrics_path, "summary": summary_path, "plotdata": plot_paths}
