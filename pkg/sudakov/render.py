"""Static SVG figure of a planar decomposition: classes, cone sections and map arrows."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Sequence

from .errors import UnsupportedDimensionError

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#17becf",
    "#8c564b",
    "#e377c2",
    "#bcbd22",
    "#7f7f7f",
)
UNCLASSIFIED = "#b0b0b0"
TARGET = "#333333"


def _fmt(value: float) -> str:
    return f"{value:.3f}"


class _Frame:
    """World-to-pixel map with the y axis flipped to mathematical orientation."""

    def __init__(self, points: Sequence[tuple], width: int, height: int, margin: int = 24):
        xs = [float(p[0]) for p in points] or [0.0]
        ys = [float(p[1]) for p in points] or [0.0]
        self.x0, self.x1 = min(xs), max(xs)
        self.y0, self.y1 = min(ys), max(ys)
        span = max(self.x1 - self.x0, self.y1 - self.y0, 1e-9)
        self.scale = min(width, height - 40) - 2 * margin
        self.scale /= span
        self.margin = margin
        self.height = height - 40

    def __call__(self, p) -> tuple[str, str]:
        x = self.margin + (float(p[0]) - self.x0) * self.scale
        y = self.height - self.margin - (float(p[1]) - self.y0) * self.scale
        return _fmt(x), _fmt(y)

    def length(self, d: float) -> float:
        return d * self.scale


def svgroot(width: int, height: int) -> ET.Element:
    return ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        version="1.1",
        width=f"{width}px",
        height=f"{height}px",
        viewBox=f"0 0 {width} {height}",
    )


def _polygon(parent: ET.Element, points: list[tuple[str, str]], **attrs) -> ET.Element | None:
    if len(points) < 2:
        return None
    d = "M" + " L".join(f"{x} {y}" for x, y in points) + " Z"
    return ET.SubElement(parent, "path", d=d, **attrs)


def _ordered(vertices: list[tuple[float, float]]) -> list[tuple[float, float]]:
    cx = sum(v[0] for v in vertices) / len(vertices)
    cy = sum(v[1] for v in vertices) / len(vertices)
    return sorted(vertices, key=lambda v: math.atan2(v[1] - cy, v[0] - cx))


def _wedge(cone, anchor: tuple[float, float], reach: float) -> list[tuple[float, float]]:
    """Displacements ``y - x`` allowed by the cone, drawn from ``anchor`` up to ``reach``."""
    section = cone.section(1)
    if section.is_empty:
        return []
    vertices = [(-float(v[0]), -float(v[1])) for v in section.vertices]
    size = max((math.hypot(*v) for v in vertices), default=0.0) or 1.0
    points = [(anchor[0] + reach * v[0] / size, anchor[1] + reach * v[1] / size) for v in vertices]
    if len(points) > 2:
        return _ordered(points + [anchor])
    return [anchor] + points


def render_svg(
    path,
    instance,
    classes: Sequence,
    arrows: Sequence[tuple[int, int]] = (),
    *,
    title: str = "",
    width: int = 640,
    height: int = 680,
) -> Path:
    """Write the figure to ``path``; only planar problems can be drawn."""
    if instance.dimension != 2:
        raise UnsupportedDimensionError(f"render draws planar problems only, this one has d={instance.dimension}")
    frame = _Frame(list(instance.mu_points) + list(instance.nu_points), width, height)
    span = max(frame.x1 - frame.x0, frame.y1 - frame.y0, 1e-9)
    svg = svgroot(width, height)
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    if title:
        ET.SubElement(svg, "text", x="12", y="18", attrib={"font-family": "sans-serif", "font-size": "13"}).text = title

    colour_of = {}
    for k, cls in enumerate(classes):
        colour = PALETTE[k % len(PALETTE)]
        for i in cls.members:
            colour_of[i] = colour

    cones = ET.SubElement(svg, "g", id="cones")
    for k, cls in enumerate(classes):
        xs = [float(instance.mu_points[i][0]) for i in cls.members]
        ys = [float(instance.mu_points[i][1]) for i in cls.members]
        anchor = (sum(xs) / len(xs), sum(ys) / len(ys))
        wedge = _wedge(cls.cone, anchor, 0.15 * span)
        _polygon(cones, [frame(p) for p in wedge], fill=PALETTE[k % len(PALETTE)], attrib={"fill-opacity": "0.2", "stroke": "none"})

    lines = ET.SubElement(svg, "g", id="map", attrib={"stroke-width": "0.6", "stroke-opacity": "0.6"})
    for i, j in arrows:
        (x1, y1), (x2, y2) = frame(instance.mu_points[i]), frame(instance.nu_points[j])
        ET.SubElement(lines, "line", x1=x1, y1=y1, x2=x2, y2=y2, stroke=colour_of.get(i, UNCLASSIFIED))

    atoms = ET.SubElement(svg, "g", id="atoms")
    for j, point in enumerate(instance.nu_points):
        x, y = frame(point)
        ET.SubElement(atoms, "rect", x=_fmt(float(x) - 1.5), y=_fmt(float(y) - 1.5), width="3", height="3", fill=TARGET)
    for i, point in enumerate(instance.mu_points):
        x, y = frame(point)
        ET.SubElement(atoms, "circle", cx=x, cy=y, r="2", fill=colour_of.get(i, UNCLASSIFIED))

    legend = ET.SubElement(svg, "g", id="legend", attrib={"font-family": "sans-serif", "font-size": "11"})
    entries = [(cls.label, PALETTE[k % len(PALETTE)]) for k, cls in enumerate(classes)]
    entries += [("fixed / residual", UNCLASSIFIED), ("targets", TARGET)]
    for k, (label, colour) in enumerate(entries):
        x = 12 + 120 * (k % 5)
        y = height - 30 + 14 * (k // 5)
        ET.SubElement(legend, "rect", x=str(x), y=str(y - 8), width="10", height="10", fill=colour)
        ET.SubElement(legend, "text", x=str(x + 14), y=str(y + 1)).text = label

    path = Path(path)
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
    return path
