"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import json

import graphviz
import networkx as nx
import pandas as pd

from ..base import _to_builtin
from ..bubbletree import _named_nodes
from ._plot import plot_density_field, plot_mass_flow

__all__ = [
    "SCHEMA",
    "make_dot",
    "tree_paths",
    "to_json",
    "write_json",
    "write_csv",
    "plot_density_field",
    "plot_mass_flow",
]

SCHEMA = "bubblelab/1"


def make_dot(tree, labels=True, highlight_flags=True, lower_limit=0.0):
    """Directed graph source code in the DOT language of a bubble tree.

    Parameters
    ----------
    tree : BubbleTree
        Result of ``bubbletree.build_tree``.
    labels : boolean, optional (default=True)
        Write location and masses into the node labels.
    highlight_flags : boolean, optional (default=True)
        Draw nodes carrying diagnostic flags in red.
    lower_limit : float, optional (default=0.0)
        Bubbles with energy mass ``m <= lower_limit`` are not drawn.

    Returns
    -------
    graph : graphviz.Digraph
        Directed graph source code in the DOT language. Edges carry the neck
        energy ``nu`` of the child.
    """
    graph = tree.to_graph()
    flagged = {name for name, node in _named_nodes(tree.root) if node.flags}
    if lower_limit > 0:
        drop = [n for n, data in graph.nodes(data=True) if n != "base" and data["m"] <= lower_limit]
        for n in drop:
            if n in graph:
                graph.remove_nodes_from(nx.descendants(graph, n) | {n})

    d = graphviz.Digraph(engine="dot")
    for name, data in graph.nodes(data=True):
        kwargs = {}
        if name == "base":
            kwargs["shape"] = "box"
        if highlight_flags and name in flagged:
            kwargs["color"] = "red"
            kwargs["fontcolor"] = "red"
        label = data["label"]
        if labels and name != "base":
            label = f"{label}\nm={data['m']:.4g} q={data['q']:.4g}"
        d.node(name, label=label, **kwargs)
    for from_, to in graph.edges():
        d.edge(from_, to, label=f"{graph.nodes[to]['nu']:.2e}")
    return d


def tree_paths(tree):
    """Root-to-leaf paths of a bubble tree as lists of node names."""
    graph = tree.to_graph()
    leaves = [n for n in graph.nodes if graph.out_degree(n) == 0 and n != "base"]
    return [p for leaf in leaves for p in nx.all_simple_paths(graph, "base", leaf)]


def to_json(report, timing=None):
    """Deterministic JSON text of a report dictionary.

    Keys are sorted and non-finite numbers written as ``null``; ``timing``
    is added only when given.
    """
    payload = dict(_to_builtin(report))
    payload["schema"] = SCHEMA
    if timing is not None:
        payload["runtime_seconds"] = float(timing)
    return json.dumps(payload, sort_keys=True, indent=2)


def write_json(report, path, timing=None):
    text = to_json(report, timing)
    with open(path, "w") as f:
        f.write(text + "\n")
    return text


def write_csv(frame, path):
    """Write a DataFrame with frozen column order and full float precision."""
    if not isinstance(frame, pd.DataFrame):
        raise TypeError("frame must be pandas.DataFrame.")
    frame.to_csv(path, index=False, float_format="%.17g", na_rep="nan")
    return path

