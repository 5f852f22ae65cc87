"""Figure rendering for the report path: heatmap grid and risk-score lines.

Figures are rendered from the emitted delimited files so a finished run
directory can be re-rendered without replaying the scenario.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .outputs import HEATMAP_FILE, RISKS_FILE

HEATMAP_FIGURE = "heatmap.png"
RISKS_FIGURE = "risks.png"


def _pyplot():
    # deferred so `run --no-figures` never pays the matplotlib import
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _read_rows(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def render_heatmap_figure(out_dir: str | Path) -> Path | None:
    out = Path(out_dir)
    rows = _read_rows(out / HEATMAP_FILE)
    target = out / HEATMAP_FIGURE
    if not rows:
        return None
    cell_names = [k for k in rows[0] if k.startswith("cell_")]
    grid = [[int(row[c]) for c in cell_names] for row in rows]
    ticks = [row["tick"] for row in rows]

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 0.8 + 0.5 * len(rows)))
    im = ax.imshow(grid, aspect="auto", cmap="inferno")
    ax.set_xticks(range(len(cell_names)), cell_names)
    ax.set_yticks(range(len(rows)), [f"tick {t}" for t in ticks])
    ax.set_xlabel("location cell")
    ax.set_title("Aggregated infected hours per cell")
    for r, row in enumerate(grid):
        for c, value in enumerate(row):
            ax.text(c, r, str(value), ha="center", va="center", color="tab:gray", fontsize=8)
    fig.colorbar(im, ax=ax, label="hours")
    fig.tight_layout()
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return target


def render_risks_figure(out_dir: str | Path) -> Path | None:
    out = Path(out_dir)
    rows = _read_rows(out / RISKS_FILE)
    target = out / RISKS_FIGURE
    if not rows:
        return None
    by_user: dict[str, list[tuple[int, int]]] = {}
    for row in rows:
        by_user.setdefault(row["user"], []).append((int(row["tick"]), int(row["score"])))

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    for user in sorted(by_user):
        points = sorted(by_user[user])
        ax.plot([t for t, _ in points], [s for _, s in points], marker="o", label=user)
    ax.set_xlabel("tick")
    ax.set_ylabel("risk score")
    ax.set_title("Exposure risk checks")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return target


def render_figures(out_dir: str | Path) -> list[Path]:
    """Render all figures next to the delimited outputs; skips empty tables."""
    written = []
    for renderer in (render_heatmap_figure, render_risks_figure):
        path = renderer(out_dir)
        if path is not None:
            written.append(path)
    return written
