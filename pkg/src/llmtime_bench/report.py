"""Rendering of experiment reports: comparison table, trace CSVs and SVG charts."""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

from .bench import ExperimentReport
from .errors import DataError

ERR = "ERR"
BEST_MARK = "*"
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass(frozen=True)
class Table:
    text: str
    csv: str


def _ordered(items):
    return list(dict.fromkeys(items))


def emit_table(report: ExperimentReport) -> Table:
    """Datasets as rows, ``<model>_mse`` / ``<model>_mae`` as columns.

    The lowest MSE in each row is marked with ``*`` in the text form and
    named in the CSV ``best_model`` column; failed runs render as ``ERR``.
    """
    datasets = _ordered(r.dataset for r in report.rows)
    models = _ordered(r.model for r in report.rows)
    cell = {(r.dataset, r.model): r for r in report.rows}

    header = ["dataset"] + [f"{m}_{k}" for m in models for k in ("mse", "mae")]
    text_rows, csv_rows = [], []
    for ds in datasets:
        ok = [(cell[(ds, m)].mse, m) for m in models if (ds, m) in cell and cell[(ds, m)].ok]
        best = min(ok)[1] if ok else None
        trow, crow = [ds], [ds]
        for m in models:
            r = cell.get((ds, m))
            if r is None or not r.ok:
                trow += [ERR, ERR]
                crow += [ERR, ERR]
                continue
            flag = BEST_MARK if m == best and len(ok) > 1 else ""
            trow += [f"{r.mse:.6g}{flag}", f"{r.mae:.6g}"]
            crow += [f"{r.mse:.17g}", f"{r.mae:.17g}"]
        text_rows.append(trow)
        csv_rows.append(crow + [best or ""])

    widths = [max(len(str(x)) for x in col) for col in zip(header, *text_rows)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in text_rows:
        cells = [row[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header + ["best_model"])
    w.writerows(csv_rows)
    return Table("\n".join(lines) + "\n", buf.getvalue())


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "actual", "predicted"])
    for i, (t, a) in enumerate(zip(trace.t, trace.actual)):
        j = i - trace.split_index
        w.writerow([_fmt(t), _fmt(a), _fmt(trace.predicted[j]) if j >= 0 else ""])
    return buf.getvalue()


def svg_chart(title: str, t, actual, predictions: Dict[str, tuple], width=800, height=320) -> str:
    """Static line chart: actual series plus each model's forecast over its span."""
    margin = 40
    all_t = np.asarray(t, dtype=float)
    ys = [np.asarray(actual, dtype=float)] + [np.asarray(p, dtype=float) for _, p in predictions.values()]
    lo = min(float(np.min(y)) for y in ys)
    hi = max(float(np.max(y)) for y in ys)
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    t0, t1 = float(all_t[0]), float(all_t[-1])
    span = (t1 - t0) or 1.0

    def pts(tt, yy):
        xs = margin + (np.asarray(tt) - t0) / span * (width - 2 * margin)
        ys_ = height - margin - (np.asarray(yy) - lo) / (hi - lo) * (height - 2 * margin)
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys_))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{margin}" y="20" font-family="sans-serif" font-size="13">{_escape(title)}</text>',
        f'<polyline fill="none" stroke="black" stroke-width="1" points="{pts(all_t, actual)}"/>',
    ]
    for k, (model, (tt, yy)) in enumerate(predictions.items()):
        color = COLORS[k % len(COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts(tt, yy)}"/>')
        parts.append(f'<text x="{width - 150}" y="{20 + 15 * k}" font-family="sans-serif" '
                     f'font-size="12" fill="{color}">{_escape(model)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_traces(report: ExperimentReport, output_dir) -> List[Path]:
    """Write ``<dataset>__<model>.csv`` per successful cell and ``<dataset>.svg`` per dataset."""
    out = Path(output_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        by_dataset: Dict[str, list] = {}
        for tr in report.traces:
            path = out / f"{safe_name(tr.dataset)}__{safe_name(tr.model)}.csv"
            path.write_text(trace_csv(tr), encoding="utf-8")
            written.append(path)
            by_dataset.setdefault(tr.dataset, []).append(tr)
        for ds, traces in by_dataset.items():
            first = traces[0]
            preds = {tr.model: (tr.t[tr.split_index:], tr.predicted) for tr in traces}
            path = out / f"{safe_name(ds)}.svg"
            path.write_text(svg_chart(ds, first.t, first.actual, preds), encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise DataError(f"cannot write traces to {out}: {exc}") from exc
    return written


def write_outputs(report: ExperimentReport, output_dir) -> Dict[str, Path]:
    """Report JSON, table text/CSV, timings sidecar and traces under ``output_dir``."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = emit_table(report)
    paths = {
        "report": out / "report.json",
        "table_txt": out / "table.txt",
        "table_csv": out / "table.csv",
        "timings": out / "timings.json",
    }
    paths["report"].write_text(report.to_json(), encoding="utf-8")
    paths["table_txt"].write_text(table.text, encoding="utf-8")
    paths["table_csv"].write_text(table.csv, encoding="utf-8")
    paths["timings"].write_text(json.dumps(report.timings(), indent=1, sort_keys=True) + "\n",
                                encoding="utf-8")
    emit_traces(report, out / "traces")
    return paths
