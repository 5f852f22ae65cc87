"""Transcript emission: one JSONL event log plus three delimited tables.

Output bytes are a pure function of the transcript, so identical runs
produce identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .counters import OpCounters
from .driver import Transcript

EVENTS_FILE = "events.jsonl"
HEATMAP_FILE = "heatmap.csv"
RISKS_FILE = "risks.csv"
OPCOUNTS_FILE = "opcounts.csv"

OUTPUT_FILES = (EVENTS_FILE, HEATMAP_FILE, RISKS_FILE, OPCOUNTS_FILE)


def render_events(transcript: Transcript) -> str:
    lines = [json.dumps(e, sort_keys=True, default=_jsonable) for e in transcript.events]
    if transcript.equivalence is not None:
        closing = {"op": "equivalence", "outcome": transcript.equivalence}
        if transcript.divergence is not None:
            closing["divergence"] = transcript.divergence
        lines.append(json.dumps(closing, sort_keys=True, default=_jsonable))
    return "\n".join(lines) + ("\n" if lines else "")


def _jsonable(value: object) -> object:
    if isinstance(value, bytes):
        return value.hex()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def render_heatmap_csv(transcript: Transcript, cells: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tick"] + [f"cell_{i}" for i in range(cells)])
    for row in transcript.heatmap_rows:
        writer.writerow([row["tick"]] + list(row["cells"]))
    return buf.getvalue()


def render_risks_csv(transcript: Transcript) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tick", "user", "score"])
    for row in transcript.risk_rows:
        writer.writerow([row["tick"], row["user"], row["score"]])
    return buf.getvalue()


def render_opcounts_csv(transcript: Transcript) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tick", "actor", "op"] + list(OpCounters.FIELDS))
    for row in transcript.opcount_rows:
        writer.writerow(
            [row["tick"], row["actor"], row["op"]] + [row[f] for f in OpCounters.FIELDS]
        )
    return buf.getvalue()


def emit(transcript: Transcript, out_dir: str | Path, cells: int) -> list[Path]:
    """Write the four transcript files; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    contents = {
        EVENTS_FILE: render_events(transcript),
        HEATMAP_FILE: render_heatmap_csv(transcript, cells),
        RISKS_FILE: render_risks_csv(transcript),
        OPCOUNTS_FILE: render_opcounts_csv(transcript),
    }
    paths = []
    for name, text in contents.items():
        path = out / name
        path.write_text(text)
        paths.append(path)
    return paths
