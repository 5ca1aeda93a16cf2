import xml.etree.ElementTree as ET

import pytest

from navstack import svg
from navstack.gridmap import build_grid
from navstack.planner import astar, path_to_trajectory
from navstack.scenario import doorway_scenario, gate_scenario
from navstack.simulate import run_scenario


@pytest.fixture(scope="module")
def gates():
    return run_scenario(gate_scenario())


def parse(text):
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    return root


def test_all_kinds_render_and_repeat(gates):
    outs = {
        "map2d": lambda: svg.render_map2d(gates.segmap, gates.cloud),
        "grid": lambda: svg.render_grid(gates.grid),
        "path": lambda: svg.render_path(gates.grid, gates.path),
        "trajectory-overlay": lambda: svg.render_trajectory_overlay(
            gates.trajectory, list(zip(gates.column("x"), gates.column("y"))), gates.segmap),
        "vfh-run": lambda: svg.render_vfh_run(gates, gates.segmap),
    }
    assert set(outs) == set(svg.PLOT_KINDS)
    for kind, fn in outs.items():
        a, b = fn(), fn()
        assert a == b, kind
        parse(a)


def test_path_plot_has_polyline(gates):
    root = parse(svg.render_path(gates.grid, gates.path))
    assert root.findall("{http://www.w3.org/2000/svg}polyline")


def test_vfh_run_colours_modes():
    log = run_scenario(doorway_scenario())
    text = svg.render_vfh_run(log)
    assert svg.MODE_COLORS["avoid"] in text


def test_canvas_rejects_empty_bounds():
    with pytest.raises(ValueError):
        svg.Canvas((0, 0, 0, 1))


def test_number_format():
    assert svg._f(1.0) == "1"
    assert svg._f(-0.0001) == "0"
    assert svg._f(2.5) == "2.5"


def test_plotspec_validation(tmp_path):
    with pytest.raises(ValueError):
        svg.PlotSpec("pie")
    with pytest.raises(FileNotFoundError):
        svg.PlotSpec("grid", {"grid": str(tmp_path / "missing.txt")})
    f = tmp_path / "g.txt"
    f.write_text("x")
    assert svg.PlotSpec("grid", {"grid": str(f)}).kind == "grid"


def test_title_is_escaped():
    cv = svg.Canvas((0, 0, 1, 1), title="a<b")
    assert "a&lt;b" in cv.render()
