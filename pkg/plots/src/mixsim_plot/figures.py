"""Figure construction from mixsim result CSVs.

Consumes only the public CSV schema; the simulator itself is never imported.
Each figure kind maps the fixed columns onto x/y/error-bar roles, groups rows
by an optional column, and aggregates seed-level rows into one point per
x-value with a normal-approximation 95% interval.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt   # noqa: E402  (backend must be pinned first)


class FigureError(Exception):
    """Bad figure spec or CSV input."""


KINDS = ("latency_vs_users", "entropy_vs_users", "cover_vs_users",
         "delay_vs_users", "dual_axis")

# kind -> (x column, y column, error column or None, axis labels)
KIND_COLUMNS = {
    "latency_vs_users": ("users", "mean_latency_s", None,
                         "users", "mean end-to-end latency [s]"),
    "entropy_vs_users": ("users", "entropy_bits_mean", "entropy_bits_ci95",
                         "users", "entropy [bits]"),
    "cover_vs_users": ("users", "axis", None,
                       "users", "required cover rate [pkt/s per origin]"),
    "delay_vs_users": ("users", "axis", None,
                       "users", "required mean delay [s]"),
}


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_csv: str
    output: str
    group_by: Optional[str] = None
    title: Optional[str] = None


def parse_spec(raw: dict) -> FigureSpec:
    if not isinstance(raw, dict):
        raise FigureError("figure spec must be a JSON object")
    unknown = set(raw) - {"kind", "input_csv", "output", "group_by", "title"}
    if unknown:
        raise FigureError(f"unknown key in figure spec: {sorted(unknown)[0]}")
    for key in ("kind", "input_csv", "output"):
        if key not in raw:
            raise FigureError(f"figure spec missing required key: {key}")
    if raw["kind"] not in KINDS:
        raise FigureError(f"unknown figure kind {raw['kind']!r}, expected one of {KINDS}")
    return FigureSpec(kind=raw["kind"], input_csv=raw["input_csv"], output=raw["output"],
                      group_by=raw.get("group_by"), title=raw.get("title"))


def load_rows(path: str) -> tuple:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if not header:
            raise FigureError(f"{path}: empty CSV, nothing to plot")
        rows = list(reader)
    if not rows:
        raise FigureError(f"{path}: CSV has a header but no data rows")
    return header, rows


def _column(header, rows, name):
    if name not in header:
        raise FigureError(f"missing column: {name}")
    return [row[name] for row in rows]


def _number(text: str) -> Optional[float]:
    if text is None or text == "":
        return None
    return float(text)


def ci95(values: list) -> Optional[float]:
    if len(values) < 2:
        return None
    return 1.96 * statistics.stdev(values) / math.sqrt(len(values))


@dataclass
class Series:
    label: str
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    yerr: list = field(default_factory=list)   # None entries mean "no bar"


def build_series(spec: FigureSpec, header, rows, y_column, err_column) -> list:
    """Group rows, then aggregate one (x, y, err) point per x value."""
    x_column = "users"
    for needed in filter(None, (x_column, y_column, err_column, spec.group_by)):
        if needed not in header:
            raise FigureError(f"missing column: {needed}")

    grouped: dict = {}
    for row in rows:
        y = _number(row[y_column])
        if y is None:
            continue
        label = row[spec.group_by] if spec.group_by else ""
        x = float(row[x_column])
        grouped.setdefault(label, {}).setdefault(x, []).append(
            (y, _number(row[err_column]) if err_column else None))
    if not grouped:
        raise FigureError(f"no usable values in column {y_column}")

    out = []
    for label in sorted(grouped):
        series = Series(label=label)
        for x in sorted(grouped[label]):
            points = grouped[label][x]
            ys = [p[0] for p in points]
            errs = [p[1] for p in points if p[1] is not None]
            series.x.append(x)
            series.y.append(statistics.fmean(ys))
            if errs:
                series.yerr.append(statistics.fmean(errs))
            else:
                series.yerr.append(ci95(ys))
        out.append(series)
    return out


def row_points(header, rows, columns) -> list:
    """Per-row values actually plotted, for the data dump."""
    for needed in columns:
        if needed not in header:
            raise FigureError(f"missing column: {needed}")
    points = []
    for row in rows:
        point = {}
        for name in columns:
            point[name] = _number(row[name]) if name != "topology" else row[name]
        points.append(point)
    return points


def _series_payload(series_list) -> list:
    return [{"label": s.label,
             "points": [{"x": x, "y": y, "yerr": e}
                        for x, y, e in zip(s.x, s.y, s.yerr)]}
            for s in series_list]


def render(spec: FigureSpec) -> dict:
    """Render PNG + SVG for the spec; returns the dump payload (plotted data)."""
    header, rows = load_rows(spec.input_csv)

    if spec.kind == "dual_axis":
        entropy = build_series(spec, header, rows, "entropy_bits_mean", "entropy_bits_ci95")
        latency = build_series(spec, header, rows, "mean_latency_s", None)
        fig, ax_h = plt.subplots(figsize=(7, 4.5))
        ax_lat = ax_h.twinx()
        for s in entropy:
            label = f"entropy {s.label}".strip()
            err = [e or 0.0 for e in s.yerr]
            ax_h.errorbar(s.x, s.y, yerr=err, marker="o", capsize=3,
                          color="tab:blue", label=label)
        for s in latency:
            label = f"latency {s.label}".strip()
            ax_lat.plot(s.x, s.y, marker="s", linestyle="--",
                        color="tab:red", label=label)
        ax_h.set_xlabel("users")
        ax_h.set_ylabel("entropy [bits]", color="tab:blue")
        ax_lat.set_ylabel("mean end-to-end latency [s]", color="tab:red")
        handles_a, labels_a = ax_h.get_legend_handles_labels()
        handles_b, labels_b = ax_lat.get_legend_handles_labels()
        ax_h.legend(handles_a + handles_b, labels_a + labels_b, loc="best", fontsize=8)
        dump = {
            "kind": spec.kind,
            "series": {"entropy": _series_payload(entropy),
                       "latency": _series_payload(latency)},
            "rows": row_points(header, rows,
                               ["users", "entropy_bits_mean", "mean_latency_s"]),
        }
    else:
        x_col, y_col, err_col, x_label, y_label = KIND_COLUMNS[spec.kind]
        series_list = build_series(spec, header, rows, y_col, err_col)
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for s in series_list:
            err = [e or 0.0 for e in s.yerr]
            ax.errorbar(s.x, s.y, yerr=err, marker="o", capsize=3,
                        label=s.label or None)
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        if any(s.label for s in series_list):
            ax.legend(loc="best", fontsize=8)
        dump = {
            "kind": spec.kind,
            "series": _series_payload(series_list),
            "rows": row_points(header, rows, [x_col, y_col]),
        }

    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    base = spec.output
    for ext in (".png", ".svg"):
        if base.endswith(ext):
            base = base[:-len(ext)]
    fig.savefig(base + ".png", dpi=150)
    fig.savefig(base + ".svg")
    plt.close(fig)
    dump["outputs"] = [base + ".png", base + ".svg"]
    return dump


def dump_to_file(dump: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dump, fh, indent=2, sort_keys=True)
        fh.write("\n")
