"""Chart rendering sanity: well-formed output and axis guards."""

import xml.etree.ElementTree as ET

import pytest

from cgolab._svg import render_line_chart, write_line_chart


def test_chart_is_well_formed_and_contains_series():
    text = render_line_chart(
        [
            {"label": "alpha", "x": [1.0, 2.0, 4.0], "y": [3.0, 1.5, 0.7]},
            {"label": "beta", "x": [1.0, 2.0, 4.0], "y": [0.1, 0.2, 0.4]},
        ],
        title="decay",
        x_label="rho",
        y_label="norm",
        log_x=True,
        log_y=True,
    )
    root = ET.fromstring(text)
    assert root.tag == "{http://www.w3.org/2000/svg}svg"
    body = ET.tostring(root, encoding="unicode")
    assert "alpha" in body and "beta" in body and "decay" in body
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(polylines) == 2


def test_chart_is_deterministic(tmp_path):
    series = [{"label": "s", "x": [0.0, 1.0], "y": [2.0, 5.0]}]
    write_line_chart(tmp_path / "a.svg", series, title="t")
    write_line_chart(tmp_path / "b.svg", series, title="t")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_chart_input_guards():
    with pytest.raises(ValueError, match="at least one point"):
        render_line_chart([{"label": "empty", "x": [], "y": []}])
    with pytest.raises(ValueError, match="log x"):
        render_line_chart([{"label": "s", "x": [0.0, 1.0], "y": [1.0, 2.0]}],
                          log_x=True)
    with pytest.raises(ValueError, match="log y"):
        render_line_chart([{"label": "s", "x": [1.0, 2.0], "y": [-1.0, 2.0]}],
                          log_y=True)


def test_flat_series_and_single_point_render():
    # degenerate ranges must still produce a parseable document
    flat = render_line_chart([{"label": "s", "x": [1.0, 2.0], "y": [3.0, 3.0]}])
    ET.fromstring(flat)
    single = render_line_chart([{"label": "s", "x": [1.0], "y": [1.0]}], log_y=True)
    ET.fromstring(single)
