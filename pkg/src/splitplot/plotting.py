"""Static SVG line plots for rejection-rate tables."""

from __future__ import annotations

import xml.etree.ElementTree as ET

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
_DASHES = ("", "2,3", "6,3", "6,3,2,3")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_plot_svg(
    series: dict,
    *,
    xlabel: str,
    ylabel: str,
    title: str = "",
    hline: float | None = None,
    width: int = 640,
    height: int = 420,
) -> str:
    """One polyline per entry of ``series`` (name -> (xs, ys)), with axes and legend."""
    if not series:
        raise ValueError("nothing to plot")
    left, right, top, bottom = 70, 150, 40, 60
    pw, ph = width - left - right, height - top - bottom
    xs_all = [float(x) for xs, _ in series.values() for x in xs]
    ys_all = [float(y) for _, ys in series.values() for y in ys]
    if hline is not None:
        ys_all.append(hline)
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(0.0, min(ys_all)), max(ys_all)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y1 = y0 + 1.0
    y1 += 0.05 * (y1 - y0)

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                     width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    if title:
        t = ET.SubElement(svg, "text", x=_fmt(left + pw / 2), y="22",
                          attrib={"text-anchor": "middle", "font-size": "14"})
        t.text = title
    axes = ET.SubElement(svg, "g", stroke="black", attrib={"stroke-width": "1"})
    ET.SubElement(axes, "line", x1=_fmt(left), y1=_fmt(top + ph), x2=_fmt(left + pw), y2=_fmt(top + ph))
    ET.SubElement(axes, "line", x1=_fmt(left), y1=_fmt(top), x2=_fmt(left), y2=_fmt(top + ph))
    ticks = ET.SubElement(svg, "g", attrib={"font-size": "11"})
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        tx = ET.SubElement(ticks, "text", x=_fmt(sx(xv)), y=_fmt(top + ph + 16),
                           attrib={"text-anchor": "middle"})
        tx.text = f"{xv:.3g}"
        ty = ET.SubElement(ticks, "text", x=_fmt(left - 6), y=_fmt(sy(yv) + 4),
                           attrib={"text-anchor": "end"})
        ty.text = f"{yv:.3g}"
    lx = ET.SubElement(svg, "text", x=_fmt(left + pw / 2), y=_fmt(height - 15),
                       attrib={"text-anchor": "middle", "font-size": "12"})
    lx.text = xlabel
    ly = ET.SubElement(svg, "text", x="18", y=_fmt(top + ph / 2),
                       transform=f"rotate(-90 18 {_fmt(top + ph / 2)})",
                       attrib={"text-anchor": "middle", "font-size": "12"})
    ly.text = ylabel
    if hline is not None:
        ET.SubElement(svg, "line", x1=_fmt(left), x2=_fmt(left + pw), y1=_fmt(sy(hline)),
                      y2=_fmt(sy(hline)), stroke="#999999",
                      attrib={"stroke-dasharray": "1,3", "class": "reference"})
    legend = ET.SubElement(svg, "g", attrib={"font-size": "12"})
    for k, (name, (xs, ys)) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        attrib = {"fill": "none", "stroke": color, "stroke-width": "2", "class": "series"}
        dash = _DASHES[k % len(_DASHES)]
        if dash:
            attrib["stroke-dasharray"] = dash
        pts = " ".join(f"{_fmt(sx(float(x)))},{_fmt(sy(float(y)))}" for x, y in zip(xs, ys))
        line = ET.SubElement(svg, "polyline", points=pts, attrib=attrib)
        ET.SubElement(line, "title").text = str(name)
        yy = top + 10 + 18 * k
        ET.SubElement(legend, "line", x1=_fmt(left + pw + 12), x2=_fmt(left + pw + 36),
                      y1=_fmt(yy), y2=_fmt(yy), stroke=color,
                      attrib={"stroke-width": "2", **({"stroke-dasharray": dash} if dash else {})})
        lt = ET.SubElement(legend, "text", x=_fmt(left + pw + 42), y=_fmt(yy + 4))
        lt.text = str(name)
    return ET.tostring(svg, encoding="unicode") + "\n"
