import re

import pytest

from rewardteach.plotting import line_chart, scatter_chart


def curve(label, ts, mean, low=None, high=None):
    return {"label": label, "t": ts, "mean": mean, "low": low or mean, "high": high or mean}


def test_line_chart_deterministic():
    c = [curve("a", [1, 2, 3], [0.1, 0.5, 0.9], [0.0, 0.4, 0.8], [0.2, 0.6, 1.0])]
    assert line_chart(c, "t") == line_chart(c, "t")
    assert "<svg" in line_chart(c) and "timestamp" not in line_chart(c).lower()


def test_constant_curve_gives_flat_line_and_zero_height_band():
    svg = line_chart([curve("c", [10, 20, 30], [2.5, 2.5, 2.5])])
    path = re.search(r' d="M([^"]+)"', svg).group(1)
    ys = {float(p.split(",")[1]) for p in path.split(" L")}
    assert ys == {2.5}
    band = re.search(r'class="band" points="([^"]+)"', svg).group(1)
    assert {float(p.split(",")[1]) for p in band.split()} == {2.5}


def test_path_values_keep_six_significant_digits():
    vals = [1234.56789, 0.000123456789, 98765.4321]
    svg = line_chart([curve("x", [1, 2, 3], vals)])
    path = re.search(r' d="M([^"]+)"', svg).group(1)
    got = [float(p.split(",")[1]) for p in path.split(" L")]
    for g, v in zip(got, vals):
        assert g == pytest.approx(v, rel=5e-7)


def test_scatter_one_marker_per_point_and_log_axes():
    svg = scatter_chart([{"label": "tal", "x": [1, 10, 100], "y": [5, 50, 0]},
                         {"label": "na", "x": [2], "y": [2e5]}])
    assert svg.count("<circle") == 4
    assert "1e0" in svg and "(log)" in svg
    assert 'data-y="200000"' in svg
    assert scatter_chart([{"label": "a", "x": [1], "y": [1]}]) == scatter_chart([{"label": "a", "x": [1], "y": [1]}])


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        line_chart([])
    with pytest.raises(ValueError):
        scatter_chart([])


def test_labels_are_escaped():
    svg = line_chart([curve("a<b & c", [0, 1], [0, 1])])
    assert "a&lt;b &amp; c" in svg
