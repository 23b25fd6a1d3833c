import numpy as np
import pandas as pd

import matplotlib.pyplot as plt
from matplotlib.figure import Figure

_FIELD_COLUMNS = ("e_holo", "e_anti", "q_holo", "q_anti", "q_plus", "sigma")


def plot_density_field(field, column="e_holo", fig=None, log=False):
    """Scatter plot of one density column over both charts.

    Parameters
    ----------
    field : pandas.DataFrame
        Output of ``densities.density_field``.
    column : str, optional (default="e_holo")
        Column to draw.
    fig : plt.Figure, optional (default=None)
        If ``fig`` is given, draw a figure in ``fig``.
    log : boolean, optional (default=False)
        Draw ``log10`` of the column.

    Return
    ------
    fig : plt.Figure
        Plotted figure, one axis per chart.
    """
    if not isinstance(field, pd.DataFrame):
        raise TypeError("field must be pandas.DataFrame.")
    if column not in _FIELD_COLUMNS or column not in field.columns:
        raise ValueError(f"column must be one of {_FIELD_COLUMNS}.")
    if fig is not None and not isinstance(fig, Figure):
        raise TypeError("fig must be matplotlib.figure.Figure.")
    if fig is None:
        fig = plt.figure(figsize=(10, 4.5))

    values = field[column].to_numpy(dtype=float)
    if log:
        with np.errstate(divide="ignore"):
            values = np.log10(np.abs(values))
    finite = values[np.isfinite(values)]
    vmin, vmax = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)

    axes = fig.subplots(1, 2)
    for ax, chart in zip(axes, ("north", "south")):
        part = field["chart"] == chart
        sc = ax.scatter(
            field.loc[part, "re"], field.loc[part, "im"], c=values[part.to_numpy()], s=6, vmin=vmin, vmax=vmax
        )
        ax.set_aspect("equal")
        ax.set_title(f"{column} ({chart} chart)")
        ax.set_xlabel("re")
        ax.set_ylabel("im")
    fig.colorbar(sc, ax=list(axes), shrink=0.8)
    return fig


def plot_mass_flow(frame, fig=None):
    """Base, neck and bubble energies along the schedule.

    Parameters
    ----------
    frame : pandas.DataFrame
        Output of ``BubbleTree.partition_frame``.
    fig : plt.Figure, optional (default=None)

    Return
    ------
    fig : plt.Figure
        Energies (left) and curvature masses (right) against ``n``, one
        line style per bubble node.
    """
    if not isinstance(frame, pd.DataFrame):
        raise TypeError("frame must be pandas.DataFrame.")
    if fig is not None and not isinstance(fig, Figure):
        raise TypeError("fig must be matplotlib.figure.Figure.")
    if fig is None:
        fig = plt.figure(figsize=(10, 4.5))

    ax_e, ax_q = fig.subplots(1, 2)
    for node, part in frame.groupby("node"):
        for ax, prefix in ((ax_e, "E"), (ax_q, "Q")):
            for name, style in (("bubble", "-"), ("neck", "--"), ("base", ":")):
                ax.plot(part["n"], part[f"{prefix}_{name}"], style, marker="o", label=f"{node} {name}")
    for ax, title in ((ax_e, "energy"), (ax_q, "positive curvature")):
        ax.set_xscale("log", base=2)
        ax.set_xlabel("n")
        ax.set_title(title)
    if len(frame):
        ax_e.legend(fontsize="small")
    return fig
