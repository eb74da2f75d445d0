"""File renderings of evaluation and comparison reports.

The CLI prints machine-readable JSON on stdout; when asked for a report
directory it additionally writes the same data as CSV plus matplotlib
figures, so a run leaves plottable artifacts next to the numbers.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .retrieval import RecallReport  # noqa: E402


def write_recall_report(report: RecallReport, out_dir: str | Path) -> list[Path]:
    """Write recall.json, recall.csv, per_query.csv and a recall curve figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / "recall.json"
    json_path.write_text(json.dumps(report.to_json_dict(), indent=2) + "\n",
                         encoding="utf-8")
    written.append(json_path)

    csv_path = out / "recall.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "recall"])
        for k in report.ks:
            writer.writerow([k, f"{report.recalls[k]:.6f}"])
    written.append(csv_path)

    per_query_path = out / "per_query.csv"
    with open(per_query_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["query_id", "first_positive_rank"])
        for qid, rank in report.per_query.items():
            writer.writerow([qid, "" if rank is None else rank])
    written.append(per_query_path)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ks = list(report.ks)
    ax.plot(ks, [report.recalls[k] for k in ks], marker="o")
    ax.set_xlabel("k")
    ax.set_ylabel("recall@k")
    ax.set_ylim(0.0, 1.05)
    ax.set_xticks(ks)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig_path = out / "recall.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    written.append(fig_path)
    return written


def write_compare_report(comparison: dict, plan_asym: np.ndarray,
                         plan_baseline: np.ndarray, out_dir: str | Path) -> list[Path]:
    """Write compare.json, compare.csv, a residual bar chart and a plan-diff map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / "compare.json"
    json_path.write_text(json.dumps(comparison, indent=2) + "\n", encoding="utf-8")
    written.append(json_path)

    csv_path = out / "compare.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["solver", "row_linf", "col_linf", "entropy"])
        for name in ("asymmetric", "baseline"):
            row = comparison[name]
            writer.writerow([name, f"{row['row_linf']:.9e}",
                             f"{row['col_linf']:.9e}", f"{row['entropy']:.9f}"])
        writer.writerow(["max_plan_diff", f"{comparison['max_plan_diff']:.9e}", "", ""])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    labels = ["row_linf", "col_linf"]
    x = np.arange(len(labels))
    width = 0.35
    asym = [comparison["asymmetric"][k] for k in labels]
    base = [comparison["baseline"][k] for k in labels]
    floor = 1e-18  # log axis cannot show exact zeros
    ax.bar(x - width / 2, np.maximum(asym, floor), width, label="asymmetric")
    ax.bar(x + width / 2, np.maximum(base, floor), width, label="baseline")
    ax.set_yscale("log")
    ax.set_xticks(x, labels)
    ax.set_ylabel("marginal residual (L-inf)")
    ax.legend()
    fig.tight_layout()
    residual_path = out / "residuals.png"
    fig.savefig(residual_path, dpi=150)
    plt.close(fig)
    written.append(residual_path)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    diff = np.abs(np.exp(plan_asym) - np.exp(plan_baseline))
    im = ax.imshow(diff, aspect="auto", cmap="magma")
    ax.set_xlabel("token")
    ax.set_ylabel("cluster")
    fig.colorbar(im, ax=ax, label="|plan difference|")
    fig.tight_layout()
    diff_path = out / "plan_diff.png"
    fig.savefig(diff_path, dpi=150)
    plt.close(fig)
    written.append(diff_path)
    return written
