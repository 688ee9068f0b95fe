"""Figure rendering for report commands. Uses the Agg backend only."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

from matplotlib import pyplot as plt  # noqa: E402

from .metrics import MetricReport  # noqa: E402

__all__ = ["render_bar_figure", "render_report_figures"]


def render_bar_figure(values: dict[str, float], path: Path, title: str) -> Path:
    labels = list(values)
    heights = [float(values[k]) for k in labels]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(labels) + 1.5), 3.2))
    ax.bar(range(len(labels)), heights, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_title(title, fontsize=10)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _numeric_groups(report: dict[str, Any], prefix: str = "") -> list[tuple[str, dict[str, float]]]:
    groups = []
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict) and value and all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in value.values()
        ):
            groups.append((name, {k: float(v) for k, v in value.items()}))
        elif isinstance(value, dict):
            groups.extend(_numeric_groups(value, f"{name}."))
    return groups


def render_report_figures(report: Any, outdir: str | Path,
                          prefix: str) -> list[Path]:
    """One bar chart per flat numeric sub-dict of the report."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if isinstance(report, MetricReport):
        body: dict[str, Any] = {"metrics": report.metrics}
        if report.counts:
            body["counts"] = {k: v for k, v in report.counts.items()
                              if isinstance(v, (int, float))}
        report = body
    if not isinstance(report, dict):
        return []
    written = []
    for name, values in _numeric_groups(report):
        slug = name.replace(".", "_").replace("/", "_")
        path = outdir / f"{prefix}_{slug}.png"
        render_bar_figure(values, path, name)
        written.append(path)
    return written
