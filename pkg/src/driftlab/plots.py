"""
Static SVG figures from experiment tables.

Figures are drawn directly as SVG elements, without a plotting library, so
that any table written by an experiment can be looked at with a browser.

"""

from __future__ import annotations

import enum
import math
import pathlib
import xml.etree.ElementTree as ET
from collections.abc import Sequence

import numpy as np

from .artifacts import read_csv
from .exceptions import SchemaError
from .typing import Array


__all__ = ["PlotKind", "emit_svg"]


class PlotKind(enum.Enum):
    """Kinds of figures."""

    LINE = "line"
    LOGLINE = "logline"
    SCATTER = "scatter"
    HEATMAP = "heatmap"


WIDTH = 480
HEIGHT = 360
MARGIN = 48

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

# Anchors of the heatmap color scale, from low to high values.
SCALE = np.array(
    [
        [68, 1, 84],
        [59, 82, 139],
        [33, 145, 140],
        [94, 201, 98],
        [253, 231, 37],
    ],
    dtype=np.float64,
)


class _Frame:
    """Maps data coordinates to the plotting area."""

    def __init__(self, xs: Array, ys: Array) -> None:
        self.x0, self.x1 = self._span(xs)
        self.y0, self.y1 = self._span(ys)

    @staticmethod
    def _span(values: Array) -> tuple[float, float]:
        low, high = float(np.min(values)), float(np.max(values))
        if low == high:
            low, high = low - 0.5, high + 0.5
        return low, high

    def x(self, value: float) -> float:
        return MARGIN + (value - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * MARGIN)

    def y(self, value: float) -> float:
        return HEIGHT - MARGIN - (value - self.y0) / (self.y1 - self.y0) * (
            HEIGHT - 2 * MARGIN
        )


def _number(value: float) -> str:
    return f"{value:.6g}"


def _svg(title: str) -> ET.Element:
    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
    )
    ET.SubElement(svg, "rect", width=str(WIDTH), height=str(HEIGHT), fill="white")
    heading = ET.SubElement(
        svg, "text", x=str(WIDTH // 2), y="20", attrib={"text-anchor": "middle"}
    )
    heading.text = title
    return svg


def _axes(
    svg: ET.Element,
    frame: _Frame,
    x_label: str,
    y_label: str,
    log_y: bool = False,
) -> None:
    group = ET.SubElement(svg, "g", attrib={"class": "axis", "stroke": "black"})
    bottom, left = HEIGHT - MARGIN, MARGIN
    for x2, y2 in ((WIDTH - MARGIN, bottom), (left, MARGIN)):
        ET.SubElement(
            group, "line", x1=str(left), y1=str(bottom), x2=str(x2), y2=str(y2)
        )
    labels = ET.SubElement(svg, "g", attrib={"class": "labels", "font-size": "11"})
    y_low, y_high = (10**frame.y0, 10**frame.y1) if log_y else (frame.y0, frame.y1)
    ticks = [
        (frame.x(frame.x0), bottom + 14, _number(frame.x0), "middle"),
        (frame.x(frame.x1), bottom + 14, _number(frame.x1), "middle"),
        (left - 4, frame.y(frame.y0), _number(y_low), "end"),
        (left - 4, frame.y(frame.y1), _number(y_high), "end"),
        (WIDTH / 2, HEIGHT - 8, x_label, "middle"),
        (12, HEIGHT / 2, y_label, "middle"),
    ]
    for x, y, text, anchor in ticks:
        element = ET.SubElement(
            labels,
            "text",
            x=_number(x),
            y=_number(y),
            attrib={"text-anchor": anchor},
        )
        element.text = text


def _legend(svg: ET.Element, names: Sequence[str]) -> None:
    group = ET.SubElement(svg, "g", attrib={"class": "legend", "font-size": "11"})
    for index, name in enumerate(names):
        y = MARGIN + 14 * index
        color = PALETTE[index % len(PALETTE)]
        ET.SubElement(
            group,
            "line",
            x1=str(WIDTH - MARGIN - 90),
            y1=str(y),
            x2=str(WIDTH - MARGIN - 74),
            y2=str(y),
            stroke=color,
        )
        label = ET.SubElement(group, "text", x=str(WIDTH - MARGIN - 70), y=str(y + 4))
        label.text = name


def _line(
    svg: ET.Element,
    columns: list[str],
    values: Array,
    log_y: bool,
) -> None:
    if len(columns) < 2:
        raise SchemaError("", "a line plot needs an x column and a y column")
    xs = values[:, 0]
    ys = values[:, 1:]
    valid = np.isfinite(ys) & np.isfinite(xs)[:, None]
    if log_y:
        valid &= ys > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ys = np.log10(np.where(valid, ys, 1.0))
    if not np.any(valid):
        raise SchemaError("", "no finite values to plot")
    frame = _Frame(
        np.broadcast_to(xs[:, None], ys.shape)[valid],
        ys[valid],
    )
    _axes(svg, frame, columns[0], "log10 " + columns[1] if log_y else columns[1], log_y)
    for index in range(ys.shape[1]):
        mask = valid[:, index]
        points = " ".join(
            f"{_number(frame.x(x))},{_number(frame.y(y))}"
            for x, y in zip(xs[mask], ys[mask, index])
        )
        ET.SubElement(
            svg,
            "polyline",
            points=points,
            fill="none",
            stroke=PALETTE[index % len(PALETTE)],
            attrib={"class": "series"},
        )
    _legend(svg, columns[1:])


def _scatter(svg: ET.Element, columns: list[str], values: Array) -> None:
    if len(columns) < 2:
        raise SchemaError("", "a scatter plot needs two coordinate columns")
    points = values[:, :2]
    points = points[np.all(np.isfinite(points), axis=1)]
    if len(points) == 0:
        raise SchemaError("", "no finite points to plot")
    frame = _Frame(points[:, 0], points[:, 1])
    _axes(svg, frame, columns[0], columns[1])
    group = ET.SubElement(svg, "g", fill=PALETTE[0], attrib={"fill-opacity": "0.5"})
    for x, y in points:
        ET.SubElement(
            group,
            "circle",
            cx=_number(frame.x(x)),
            cy=_number(frame.y(y)),
            r="1.5",
            attrib={"class": "point"},
        )


def _color(fraction: float) -> str:
    position = fraction * (len(SCALE) - 1)
    index = min(int(position), len(SCALE) - 2)
    weight = position - index
    rgb = (1 - weight) * SCALE[index] + weight * SCALE[index + 1]
    return "#" + "".join(f"{int(round(c)):02x}" for c in rgb)


def _heatmap(svg: ET.Element, columns: list[str], values: Array) -> None:
    if len(columns) < 3:
        raise SchemaError("", "a heatmap needs x, y, and value columns")
    xs = np.unique(values[:, 0])
    ys = np.unique(values[:, 1])
    if len(xs) * len(ys) != len(values):
        raise SchemaError(
            "", f"{len(values)} rows don't form a {len(xs)}×{len(ys)} grid"
        )
    frame = _Frame(xs, ys)
    _axes(svg, frame, columns[0], columns[1])
    cell_w = (WIDTH - 2 * MARGIN) / len(xs)
    cell_h = (HEIGHT - 2 * MARGIN) / len(ys)
    field = values[:, 2]
    finite = field[np.isfinite(field)]
    low, high = (float(finite.min()), float(finite.max())) if len(finite) else (0, 1)
    group = ET.SubElement(svg, "g", attrib={"class": "cells"})
    for x, y, value in values[:, :3]:
        i = int(np.searchsorted(xs, x))
        j = int(np.searchsorted(ys, y))
        if math.isfinite(value):
            fraction = (value - low) / (high - low) if high > low else 0.5
            fill = _color(fraction)
        else:
            fill = "#cccccc"
        cell = ET.SubElement(
            group,
            "rect",
            x=_number(MARGIN + i * cell_w),
            y=_number(HEIGHT - MARGIN - (j + 1) * cell_h),
            width=_number(cell_w),
            height=_number(cell_h),
            fill=fill,
            attrib={"class": "cell"},
        )
        tooltip = ET.SubElement(cell, "title")
        tooltip.text = f"{columns[2]}={_number(value)}"
    _legend_scale(svg, columns[2], low, high)


def _legend_scale(svg: ET.Element, name: str, low: float, high: float) -> None:
    group = ET.SubElement(svg, "g", attrib={"class": "legend", "font-size": "11"})
    label = ET.SubElement(group, "text", x=str(WIDTH - MARGIN + 4), y=str(MARGIN - 8))
    label.text = name
    for index, fraction in enumerate(np.linspace(0.0, 1.0, 5)):
        y = MARGIN + 16 * index
        ET.SubElement(
            group,
            "rect",
            x=str(WIDTH - MARGIN + 4),
            y=str(y),
            width="10",
            height="10",
            fill=_color(float(fraction)),
        )
        text = ET.SubElement(group, "text", x=str(WIDTH - MARGIN + 16), y=str(y + 9))
        text.text = _number(low + fraction * (high - low))


def emit_svg(
    csv_path: str | pathlib.Path,
    kind: PlotKind | str,
    out_path: str | pathlib.Path | None = None,
    *,
    columns: Sequence[str] | None = None,
) -> pathlib.Path:
    """
    Render a table as an SVG figure.

    Args:
        csv_path: Table written by an experiment.
        kind: :class:`PlotKind` or its value.
        out_path: Output file; defaults to ``csv_path`` with an ``.svg``
            suffix.
        columns: Columns to plot, in order; defaults to all columns. For
            line plots the first one is the x axis; for heatmaps the first
            three are x, y, and the value.

    Raises:
        SchemaError: If the table is empty or doesn't have the columns
            ``kind`` requires.

    """
    csv_path = pathlib.Path(csv_path)
    kind = PlotKind(kind)
    names, values = read_csv(csv_path)
    if len(values) == 0:
        raise SchemaError(str(csv_path), "no rows to plot")
    if columns is not None:
        missing = [name for name in columns if name not in names]
        if missing:
            raise SchemaError(str(csv_path), f"no column {missing[0]!r}")
        values = values[:, [names.index(name) for name in columns]]
        names = list(columns)

    svg = _svg(csv_path.stem)
    try:
        if kind is PlotKind.LINE or kind is PlotKind.LOGLINE:
            _line(svg, names, values, log_y=kind is PlotKind.LOGLINE)
        elif kind is PlotKind.SCATTER:
            _scatter(svg, names, values)
        else:
            _heatmap(svg, names, values)
    except SchemaError as exc:
        raise SchemaError(str(csv_path), exc.msg) from None

    if out_path is None:
        out_path = csv_path.with_suffix(".svg")
    out_path = pathlib.Path(out_path)
    ET.ElementTree(svg).write(out_path, encoding="utf-8", xml_declaration=True)
    return out_path
