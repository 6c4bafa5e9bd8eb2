"""Figure generation: learning curves and normalized profiles."""

import csv
import os
import warnings
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .records import (ReportError, final_window_mean, group_statistics,
                      method_label, normalize_scores)

VARIANT_ORDER = ("dense", "sparse", "adverse")


def _save_svg(fig, path):
    # fixed hash salt and no date stamp so identical inputs give identical
    # bytes
    with plt.rc_context({"svg.hashsalt": "see-rl-reports"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _panel_key(record):
    return record.env_id, record.variant


def learning_curves(records, out_dir) -> list:
    """One figure per environment x reward variant, legend by method.

    Curves show the across-run mean evaluation return with a standard-error
    band. Returns the written figure paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    panels = defaultdict(lambda: defaultdict(list))
    for rec in records:
        panels[_panel_key(rec)][method_label(rec.config)].append(rec)

    written = []
    for (env_id, variant) in sorted(panels):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label in sorted(panels[(env_id, variant)]):
            group = panels[(env_id, variant)][label]
            if not group:
                warnings.warn(f"empty group {label} in {env_id}/{variant}")
                continue
            steps, mean, stderr = group_statistics(group)
            ax.plot(steps, mean, label=f"{label} ({len(group)} runs)")
            ax.fill_between(steps, mean - stderr, mean + stderr, alpha=0.25)
        ax.set_xlabel("environment steps")
        ax.set_ylabel("evaluation return")
        ax.set_title(f"{env_id} ({variant})")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"curves_{env_id}_{variant}.svg")
        _save_svg(fig, path)
        written.append(path)
    return written


def profile_table(records):
    """Per-run normalized scores, min-max scaled within each env x variant.

    Returns a list of dict rows with the raw final-window score, the
    normalized value and the degenerate flag of its variant group.
    """
    groups = defaultdict(list)
    for rec in records:
        groups[_panel_key(rec)].append(rec)

    table = []
    for key in sorted(groups):
        group = groups[key]
        scores = [final_window_mean(r) for r in group]
        normalized, degenerate = normalize_scores(scores)
        if degenerate:
            warnings.warn(f"degenerate normalization in {key[0]}/{key[1]}: "
                          "best == worst, all runs mapped to 0")
        for rec, score, norm in zip(group, scores, normalized):
            table.append({
                "env_id": key[0],
                "variant": key[1],
                "method": method_label(rec.config),
                "seed": rec.config.get("seed", ""),
                "score": score,
                "normalized": float(norm),
                "degenerate": degenerate,
            })
    return table


def normalized_profile(records, out_dir):
    """Bar chart of mean normalized performance, grouped by reward variant.

    Writes the figure plus the underlying table in the same comma-separated
    format the harness uses. Returns (figure_path, table_path).
    """
    os.makedirs(out_dir, exist_ok=True)
    table = profile_table(records)
    if not table:
        raise ReportError("no runs to profile")

    table_path = os.path.join(out_dir, "profile.csv")
    columns = ["env_id", "variant", "method", "seed", "score", "normalized",
               "degenerate"]
    with open(table_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(table)

    by_bar = defaultdict(list)
    for row in table:
        by_bar[(row["variant"], row["method"])].append(row["normalized"])
    variants = [v for v in VARIANT_ORDER
                if any(k[0] == v for k in by_bar)]
    variants += sorted({k[0] for k in by_bar} - set(VARIANT_ORDER))
    methods = sorted({k[1] for k in by_bar})

    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(1, len(methods))
    x = np.arange(len(variants))
    for i, method in enumerate(methods):
        heights = [float(np.mean(by_bar[(v, method)]))
                   if (v, method) in by_bar else 0.0 for v in variants]
        ax.bar(x + i * width, heights, width, label=method)
    ax.set_xticks(x + width * (len(methods) - 1) / 2)
    ax.set_xticklabels(variants)
    ax.set_xlabel("reward setting")
    ax.set_ylabel("mean normalized return")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    figure_path = os.path.join(out_dir, "profile.svg")
    _save_svg(fig, figure_path)
    return figure_path, table_path
