__all__ = ["subplots", "plot_sweep"]

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from fastcore.all import delegates, ifnone


@delegates(plt.subplots, keep=True)
def subplots(nrows=1, ncols=1, figsize=None, imsize=4, suptitle=None, **kwargs):
    "Create subplots"
    if figsize is None:
        h = nrows * imsize if suptitle is None or imsize > 2 else nrows * imsize + 0.6
        figsize = (ncols * imsize * 1.4, h)
    fig, ax = plt.subplots(nrows, ncols, figsize=figsize, **kwargs)
    if suptitle is not None:
        fig.suptitle(suptitle)
    if nrows * ncols == 1:
        ax = np.array([ax])
    return fig, ax


def plot_sweep(df: pd.DataFrame, x: str, y: str, hue: str = "method", ax=None, title=None, out=None, logy=False):
    """
    Plots the mean of `y` against `x` with one line per value of `hue`,
    e.g. the `power` column of a `sweep` table against `R`.
    Infeasible rows (NaN in `y`) are left out of the means.
    Saves the figure to `out` when given and returns the axes.
    """
    if ax is None:
        _, ax = subplots()
        ax = ax[0]
    table = df.groupby([hue, x])[y].mean().unstack(hue)
    for name in table.columns:
        ax.plot(table.index, table[name], marker="o", label=str(name))
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if logy:
        ax.set_yscale("log")
    ax.set_title(ifnone(title, f"{y} vs {x}"))
    ax.grid(True, alpha=0.3)
    ax.legend()
    if out is not None:
        ax.figure.savefig(out, bbox_inches="tight")
    return ax
