#!/usr/bin/env python3
"""Render simulator CSV outputs to PNG charts.

Standalone plotting front end. It consumes only the CSV files the simulator
CLI writes - never its Python API - so the two sides stay coupled through
the documented file schemas alone. Rendering is a pure function of the CSV
contents: no randomness, no network, single-threaded.

Usage:
    plots/render.py --csv <file> --kind <kind> --out <file.png>

Kinds mirror the experiment kinds. Metric kinds draw one line per scheme
against the sweep variable; ``roc`` draws each scheme's ROC curve; and
``tradeoff`` draws achieved rate against sensing accuracy. Rows flagged
infeasible are drawn as open markers on a dashed line: they mark the
ceiling the scheme reported, not an operating point it can realize.

A CSV whose header does not match the schema for the requested kind, or
whose body is empty, fails with a descriptive message and writes no file.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

METRIC_HEADER = [
    "scheme",
    "sweep_name",
    "sweep_value",
    "rate_bps_hz",
    "p_de",
    "p_fa",
    "p_sa",
    "bhattacharyya_nats",
    "feasible",
    "n_trials",
    "seed",
]
ROC_HEADER = ["scheme", "p_fa", "p_de"]


@dataclass(frozen=True)
class KindSpec:
    """Column layout and axis labels for one chart kind."""

    header: list[str]
    x_column: str
    y_column: str
    x_label: str
    y_label: str
    markers: bool


KINDS = {
    "roc": KindSpec(
        header=ROC_HEADER,
        x_column="p_fa",
        y_column="p_de",
        x_label="false-alarm probability",
        y_label="detection probability",
        markers=False,
    ),
    "accuracy-vs-fronthaul": KindSpec(
        header=METRIC_HEADER,
        x_column="sweep_value",
        y_column="p_sa",
        x_label="fronthaul capacity (bits/s/Hz)",
        y_label="sensing accuracy",
        markers=True,
    ),
    "rate-vs-fronthaul": KindSpec(
        header=METRIC_HEADER,
        x_column="sweep_value",
        y_column="rate_bps_hz",
        x_label="fronthaul capacity (bits/s/Hz)",
        y_label="ergodic rate (bits/s/Hz)",
        markers=True,
    ),
    "accuracy-vs-k": KindSpec(
        header=METRIC_HEADER,
        x_column="sweep_value",
        y_column="p_sa",
        x_label="number of access points",
        y_label="sensing accuracy",
        markers=True,
    ),
    "rate-vs-k": KindSpec(
        header=METRIC_HEADER,
        x_column="sweep_value",
        y_column="rate_bps_hz",
        x_label="number of access points",
        y_label="ergodic rate (bits/s/Hz)",
        markers=True,
    ),
    "tradeoff": KindSpec(
        header=METRIC_HEADER,
        x_column="p_sa",
        y_column="rate_bps_hz",
        x_label="sensing accuracy",
        y_label="ergodic rate (bits/s/Hz)",
        markers=True,
    ),
}


class RenderError(SystemExit):
    """Descriptive rendering failure; exits nonzero without writing output."""

    def __init__(self, message: str):
        super().__init__(f"render.py: error: {message}")


def load_rows(csv_path: Path, kind: str) -> list[dict[str, str]]:
    """Read and validate the CSV for ``kind``, returning one dict per row."""
    spec = KINDS[kind]
    try:
        with open(csv_path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise RenderError(f"{csv_path}: file is empty (no header row)") from None
            rows = [row for row in reader if row]
    except OSError as exc:
        raise RenderError(f"cannot read {csv_path}: {exc.strerror}") from None

    if header != spec.header:
        raise RenderError(
            f"{csv_path}: schema mismatch for kind '{kind}': expected columns "
            f"{spec.header}, found {header}"
        )
    if not rows:
        raise RenderError(f"{csv_path}: no data rows after the header")

    records = []
    for line_no, row in enumerate(rows, start=2):
        if len(row) != len(spec.header):
            raise RenderError(
                f"{csv_path}: line {line_no}: expected {len(spec.header)} "
                f"fields, found {len(row)}"
            )
        record = dict(zip(spec.header, row))
        for column in (spec.x_column, spec.y_column):
            try:
                float(record[column])
            except ValueError:
                raise RenderError(
                    f"{csv_path}: line {line_no}: column '{column}' is not "
                    f"numeric: {record[column]!r}"
                ) from None
        if "feasible" in record and record["feasible"] not in ("true", "false"):
            raise RenderError(
                f"{csv_path}: line {line_no}: column 'feasible' must be "
                f"'true' or 'false', found {record['feasible']!r}"
            )
        records.append(record)
    return records


def _series(records: list[dict[str, str]], kind: str):
    """Group rows by scheme in first-appearance order; each series carries
    (x, y, feasible) triples sorted by the sweep value (row order for ROC)."""
    spec = KINDS[kind]
    order: list[str] = []
    grouped: dict[str, list[tuple[float, float, float, bool]]] = {}
    for record in records:
        scheme = record["scheme"]
        if scheme not in grouped:
            order.append(scheme)
            grouped[scheme] = []
        sort_key = float(record["sweep_value"]) if "sweep_value" in record else 0.0
        grouped[scheme].append(
            (
                sort_key,
                float(record[spec.x_column]),
                float(record[spec.y_column]),
                record.get("feasible", "true") == "true",
            )
        )
    series = {}
    for scheme in order:
        points = grouped[scheme]
        if kind != "roc":
            points = sorted(points, key=lambda item: item[0])
        series[scheme] = [(x, y, ok) for _, x, y, ok in points]
    return series


def build_figure(csv_path: Path, kind: str) -> plt.Figure:
    """Build the chart for ``kind`` from a validated CSV; pure and
    deterministic in the file contents."""
    spec = KINDS[kind]
    series = _series(load_rows(csv_path, kind), kind)

    fig, ax = plt.subplots(figsize=(6.4, 4.4), layout="constrained")
    for scheme, points in series.items():
        xs = [x for x, _, _ in points]
        ys = [y for _, y, _ in points]
        feasible = [(x, y) for x, y, ok in points if ok]
        infeasible = [(x, y) for x, y, ok in points if not ok]
        marker = "o" if spec.markers else None

        if infeasible:
            # dashed underlay joins every reported point; the feasible
            # overlay and the open ceiling markers sit on top of it
            (underlay,) = ax.plot(xs, ys, linestyle="--", linewidth=1.0, alpha=0.55)
            color = underlay.get_color()
            if feasible:
                ax.plot(
                    [x for x, _ in feasible],
                    [y for _, y in feasible],
                    linestyle="-",
                    marker=marker,
                    color=color,
                    label=scheme,
                )
            else:
                underlay.set_label(scheme)
            ax.plot(
                [x for x, _ in infeasible],
                [y for _, y in infeasible],
                linestyle="none",
                marker="o",
                markerfacecolor="none",
                color=color,
            )
        else:
            ax.plot(xs, ys, linestyle="-", marker=marker, label=scheme)

    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    ax.grid(True, alpha=0.3)
    ax.legend(title="scheme")
    return fig


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="render.py", description="Render a simulator CSV to a PNG chart."
    )
    parser.add_argument("--csv", required=True, type=Path, help="input CSV file")
    parser.add_argument(
        "--kind", required=True, choices=sorted(KINDS), help="chart kind"
    )
    parser.add_argument("--out", required=True, type=Path, help="output PNG path")
    args = parser.parse_args(argv)

    figure = build_figure(args.csv, args.kind)
    figure.savefig(args.out, dpi=150)
    plt.close(figure)


if __name__ == "__main__":
    main(sys.argv[1:])
