"""SVG plots of aggregate results, one file per variable.

Rendering is pinned for reproducibility: the Agg backend, a fixed
svg.hashsalt, and no Date metadata, so the same inputs produce the
same bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "xnsim"

import numpy as np
from matplotlib import pyplot as plt

from .errors import ConfigurationError

__all__ = ["DEFAULT_PLOT_VARIABLES", "plot_aggregate_tables"]

DEFAULT_PLOT_VARIABLES = ("A", "cumulative_outlay", "I", "T")

# switch to a log axis when the plotted span covers this many decades
_LOG_SPAN = 1e3


def plot_aggregate_tables(
    tables: Sequence[tuple[str, Mapping[str, np.ndarray]]],
    variables: Sequence[str] = DEFAULT_PLOT_VARIABLES,
    out_dir="plots",
) -> list[Path]:
    """One SVG per variable, mean curve per table, std band when present.

    ``tables`` pairs a label with the columns of a loaded aggregate CSV.
    """
    if not tables:
        raise ConfigurationError("nothing to plot: no aggregate tables given")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    for var in variables:
        mean_key = f"{var}_mean"
        for label, table in tables:
            if mean_key not in table:
                raise ConfigurationError(
                    f"table {label!r} has no column {mean_key!r}; "
                    f"available: {sorted(table)}"
                )
        fig, ax = plt.subplots(figsize=(7.0, 4.5))
        positive_lo, hi = np.inf, -np.inf
        any_nonpositive = False
        for label, table in tables:
            t = table["t"]
            mean = table[mean_key]
            ax.plot(t, mean, label=label)
            std_key = f"{var}_std"
            if std_key in table:
                std = table[std_key]
                ax.fill_between(t, mean - std, mean + std, alpha=0.2, linewidth=0)
            finite = mean[np.isfinite(mean)]
            if finite.size:
                if np.any(finite <= 0):
                    any_nonpositive = True
                else:
                    positive_lo = min(positive_lo, float(finite.min()))
                hi = max(hi, float(finite.max()))
        if not any_nonpositive and np.isfinite(positive_lo) and hi / positive_lo > _LOG_SPAN:
            ax.set_yscale("log")
        ax.set_xlabel("t (days)")
        ax.set_ylabel(var)
        ax.set_title(f"{var} by scenario")
        ax.legend()
        ax.grid(alpha=0.3)
        path = out / f"{var}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
