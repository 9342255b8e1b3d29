import xml.etree.ElementTree as ET

import numpy as np

from dtsfi.svg import bar_chart, line_plot, scatter_panels

NS = "{http://www.w3.org/2000/svg}"


def _parse(text):
    root = ET.fromstring(text)
    assert root.tag == NS + "svg"
    return root


def test_bar_chart_one_bar_per_label_and_escapes():
    root = _parse(bar_chart(["a<b", "c", "d"], [0.5, -0.25, np.nan], title="x & y"))
    texts = [t.text for t in root.iter(NS + "text")]
    assert "a<b" in texts and "x & y" in texts
    bars = [r for r in root.iter(NS + "rect") if r.get("fill") in ("#1f77b4", "#d62728")]
    assert len(bars) == 2  # NaN is left out


def test_scatter_panels_layout():
    rng = np.random.default_rng(0)
    panels = {f"p{i}": (rng.random(20), rng.random(20)) for i in range(4)}
    root = _parse(scatter_panels(panels, title="t"))
    assert len(list(root.iter(NS + "circle"))) == 80


def test_line_plot_series():
    root = _parse(line_plot([1, 2, 3], {"a": [1.0, 2.0, 3.0], "b": [3.0, np.nan, 1.0]}, markers=False))
    lines = list(root.iter(NS + "polyline"))
    assert len(lines) == 2
    assert all(len(pl.get("points").split()) >= 2 for pl in lines)


def test_constant_series_does_not_divide_by_zero():
    _parse(line_plot([0, 1], {"flat": [5.0, 5.0]}))
    _parse(scatter_panels({"p": ([1.0, 1.0], [2.0, 2.0])}))
