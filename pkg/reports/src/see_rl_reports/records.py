"""Loading and summarizing training run directories.

A run directory is whatever the training CLI wrote: a ``config.json`` echo
and a ``metrics.csv`` with one row per evaluation. This package only ever
reads those two files.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np


class ReportError(Exception):
    pass


REQUIRED_COLUMNS = ("step", "eval_return_mean", "eval_return_stderr")


@dataclass
class RunRecord:
    path: str
    config: dict
    steps: np.ndarray
    returns: np.ndarray
    stderrs: np.ndarray
    rows: list = field(default_factory=list)

    @property
    def env_id(self) -> str:
        return self.config["env_id"]

    @property
    def variant(self) -> str:
        return self.config["variant"]


def method_label(config: dict) -> str:
    """Short legend label: algorithm, exploration flag, active ablations."""
    label = config["algo"]
    if config.get("see_enabled"):
        label += "+see"
        ablation = config.get("ablation") or {}
        for name, on in sorted(ablation.items()):
            if on:
                label += "/" + name.replace("_", "-")
    return label


def load_run(path: str) -> RunRecord:
    config_path = os.path.join(path, "config.json")
    metrics_path = os.path.join(path, "metrics.csv")
    if not os.path.isfile(config_path):
        raise ReportError(f"missing config echo: {config_path}")
    if not os.path.isfile(metrics_path):
        raise ReportError(f"missing metrics file: {metrics_path}")
    with open(config_path) as fh:
        config = json.load(fh)
    with open(metrics_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise ReportError(f"{metrics_path} lacks columns {missing}")
        rows = list(reader)
    if not rows:
        raise ReportError(f"{metrics_path} has no data rows")
    rows.sort(key=lambda r: int(r["step"]))
    steps = np.array([int(r["step"]) for r in rows], dtype=np.int64)
    returns = np.array([float(r["eval_return_mean"]) for r in rows])
    stderrs = np.array([float(r["eval_return_stderr"]) for r in rows])
    return RunRecord(path=path, config=config, steps=steps, returns=returns,
                     stderrs=stderrs, rows=rows)


def load_runs(paths) -> list:
    return [load_run(p) for p in paths]


def final_window_mean(record: RunRecord) -> float:
    """Mean evaluation return over the last 10% of rows (at least one)."""
    n = len(record.returns)
    window = max(1, int(np.ceil(0.1 * n)))
    return float(record.returns[-window:].mean())


def group_statistics(records):
    """Mean curve and standard error of the mean across runs of one group.

    Runs with unequal step grids are linearly interpolated onto the grid of
    the overlapping step range. Returns (steps, mean, stderr).
    """
    if not records:
        raise ReportError("empty group")
    grids = [r.steps for r in records]
    if all(np.array_equal(g, grids[0]) for g in grids):
        grid = grids[0]
        curves = np.stack([r.returns for r in records])
    else:
        lo = max(int(g[0]) for g in grids)
        hi = min(int(g[-1]) for g in grids)
        if hi < lo:
            raise ReportError("run step ranges do not overlap")
        grid = np.unique(np.concatenate(grids))
        grid = grid[(grid >= lo) & (grid <= hi)]
        curves = np.stack([np.interp(grid, r.steps, r.returns)
                           for r in records])
    mean = curves.mean(axis=0)
    if len(records) > 1:
        stderr = curves.std(axis=0, ddof=1) / np.sqrt(len(records))
    else:
        stderr = np.zeros_like(mean)
    return grid, mean, stderr


def normalize_scores(scores):
    """Min-max normalize: worst run to 0, best to 1.

    If best == worst the scale is undefined; everything maps to 0 and the
    degenerate flag is set.
    """
    scores = np.asarray(scores, dtype=float)
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return np.zeros_like(scores), True
    return (scores - lo) / (hi - lo), False
