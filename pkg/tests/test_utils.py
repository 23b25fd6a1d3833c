import json

import numpy as np
import pandas as pd

from bubblelab.bubbletree import BubbleNode, BubbleTree
from bubblelab.geometry import NORTH, SOUTH, ChartPoint
from bubblelab.utils import (
    SCHEMA,
    make_dot,
    plot_density_field,
    plot_mass_flow,
    to_json,
    tree_paths,
    write_csv,
    write_json,
)


def _tree():
    small = BubbleNode(ChartPoint(NORTH, 0.5), 2.0, 1.0, 2, nu=1e-4, flags=["maximal depth reached"])
    first = BubbleNode(ChartPoint(NORTH, 0.0), 4 * np.pi, 2 * np.pi, 1, nu=1e-3, children=[small])
    second = BubbleNode(ChartPoint(SOUTH, 0.25j), 4 * np.pi, 2 * np.pi, 1, nu=2e-3)
    root = BubbleNode(None, 0.0, 0.0, 0, children=[first, second])
    return BubbleTree(root)


def test_make_dot():
    tree = _tree()
    d = make_dot(tree)
    source = d.source
    for name in ["base", "b0", "b0.0", "b1"]:
        assert name in source
    assert "red" in source
    assert "m=12.57" in source
    assert "1.00e-03" in source

    d = make_dot(tree, labels=False, highlight_flags=False)
    assert "red" not in d.source
    assert "m=" not in d.source

    # the small bubble and its subtree are dropped
    d = make_dot(tree, lower_limit=5.0)
    assert "b0.0" not in d.source
    assert "b1" in d.source


def test_tree_paths():
    paths = tree_paths(_tree())
    assert paths == [["base", "b0", "b0.0"], ["base", "b1"]]
    assert tree_paths(BubbleTree(BubbleNode(None, 0.0, 0.0, 0))) == []


def test_to_json(tmp_path):
    report = {"b": np.float64(1.5), "a": [np.nan, 1 + 2j], "passed": np.bool_(True)}
    text = to_json(report)
    data = json.loads(text)
    assert data["schema"] == SCHEMA
    assert data["a"] == [None, [1.0, 2.0]]
    assert data["passed"] is True
    assert "runtime_seconds" not in data
    assert list(data) == sorted(data)

    path = tmp_path / "report.json"
    text = write_json(report, str(path), timing=0.25)
    assert json.loads(path.read_text()) == json.loads(text)
    assert json.loads(text)["runtime_seconds"] == 0.25


def test_write_csv(tmp_path):
    frame = pd.DataFrame({"n": [4, 8], "value": [np.pi, np.nan]})
    path = write_csv(frame, str(tmp_path / "frame.csv"))
    back = pd.read_csv(path)
    assert list(back.columns) == ["n", "value"]
    assert back["value"].iloc[0] == np.pi
    assert np.isnan(back["value"].iloc[1])

    try:
        write_csv(frame.to_numpy(), str(tmp_path / "frame.csv"))
    except TypeError:
        pass
    else:
        raise AssertionError


def test_plot_density_field():
    field = pd.DataFrame(
        {
            "chart": [NORTH, NORTH, SOUTH],
            "re": [0.0, 0.5, 0.0],
            "im": [0.0, 0.0, 0.5],
            "e_holo": [1.0, 1.0, 1.0],
            "e_anti": [0.0, 0.0, 0.0],
            "q_holo": [0.5, 0.5, 0.5],
            "q_anti": [-0.5, -0.5, -0.5],
            "q_plus": [0.5, 0.5, 0.5],
            "sigma": [0.0, 0.0, 0.0],
        }
    )
    fig = plot_density_field(field, "q_plus")
    assert len(fig.axes) == 3
    plot_density_field(field, "e_anti", log=True)

    try:
        plot_density_field(field, "energy")
    except ValueError:
        pass
    else:
        raise AssertionError

    try:
        plot_density_field(field.to_numpy())
    except TypeError:
        pass
    else:
        raise AssertionError


def test_plot_mass_flow():
    frame = pd.DataFrame(
        {
            "node": ["b0", "b0"],
            "n": [4, 8],
            "E_bubble": [12.0, 12.4],
            "E_neck": [0.3, 0.1],
            "E_base": [0.01, 0.001],
            "Q_bubble": [6.0, 6.2],
            "Q_neck": [0.15, 0.05],
            "Q_base": [0.005, 0.0005],
        }
    )
    fig = plot_mass_flow(frame)
    assert len(fig.axes) == 2
    assert len(fig.axes[0].lines) == 3

    try:
        plot_mass_flow(frame, fig=1)
    except TypeError:
        pass
    else:
        raise AssertionError
