"""Dependency-free SVG rendering of log-log sweep curves."""

import numpy as np
import pytest

from proxsim import PlotSeries, SweepResult, emit_plot, render_loglog


def _series(name="a", n=5, scale=1.0, ses=False):
    xs = [2.0**k for k in range(n)]
    ys = [scale * x**-0.5 for x in xs]
    return PlotSeries(name=name, xs=xs, ys=ys, ses=[0.1 * y for y in ys] if ses else None)


def test_render_produces_one_polyline_per_series():
    svg = render_loglog([_series("one"), _series("two", scale=3.0)], title="t")
    assert svg.startswith("<svg")
    assert svg.count("<polyline") == 2
    assert "one" in svg and "two" in svg
    assert svg.endswith("\n")


def test_render_is_deterministic():
    a = render_loglog([_series(ses=True)], title="x", xlabel="b", ylabel="gap")
    b = render_loglog([_series(ses=True)], title="x", xlabel="b", ylabel="gap")
    assert a == b


def test_error_bands_add_a_polygon():
    plain = render_loglog([_series()])
    banded = render_loglog([_series(ses=True)])
    assert plain.count("<polygon") < banded.count("<polygon")


def test_labels_and_title_are_embedded():
    svg = render_loglog([_series()], title="the title", xlabel="bT", ylabel="subopt")
    for text in ("the title", "bT", "subopt"):
        assert text in svg


def test_rejects_nonpositive_and_nonfinite_data():
    with pytest.raises(ValueError):
        render_loglog([PlotSeries("bad", [1.0, 2.0], [0.5, 0.0])])
    with pytest.raises(ValueError):
        render_loglog([PlotSeries("bad", [1.0, 2.0], [0.5, float("nan")])])
    with pytest.raises(ValueError):
        render_loglog([PlotSeries("bad", [1.0, -2.0], [0.5, 0.25])])


def test_flat_series_still_renders():
    svg = render_loglog([PlotSeries("flat", [1.0, 2.0, 4.0], [0.5, 0.5, 0.5])])
    assert svg.count("<polyline") == 1


def test_emit_plot_from_sweep_result():
    sw = SweepResult.from_samples("b", {1: [1.0, 1.2], 4: [0.5, 0.6], 16: [0.25, 0.3]})
    blob = emit_plot(sw, title="demo", xlabel="b", ylabel="gap")
    assert isinstance(blob, bytes)
    assert blob.lstrip().startswith(b"<svg")


def test_emit_plot_guards():
    sw = SweepResult.from_samples("b", {1: [1.0]})
    with pytest.raises(ValueError):
        emit_plot(sw)  # a one-point sweep is not a curve
    sw2 = SweepResult.from_samples("b", {1: [1.0], 2: [0.5]})
    with pytest.raises(ValueError):
        emit_plot(sw2, style="scatter3d")
