"""Static SVG figures of an emulation run: truth, ensemble mean, +-1 SD band
and the predictability horizon."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def plot_component(path, times, mean, sd, horizon, truth=None, label="x"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "flowgp"
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.fill_between(times, mean - sd, mean + sd, color="0.8", label="mean +- SD")
    if truth is not None:
        ax.plot(times, truth, color="red", lw=1, label="simulator")
    ax.plot(times, mean, color="black", lw=1, label="emulator")
    ax.axvline(horizon, color="blue", ls="--", lw=1, label="horizon")
    ax.set_xlabel("t")
    ax.set_ylabel(label)
    ax.legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    # data comment so the figure can be audited without the CSVs
    text = path.read_text()
    head, _, rest = text.partition("\n")
    comment = (f"<!-- flowgp {label}: n_points={len(times)} horizon={horizon:.17g} "
               f"final_mean={float(mean[-1]):.17g} final_sd={float(sd[-1]):.17g} -->")
    path.write_text(head + "\n" + comment + "\n" + rest)
    return path


def plot_ensemble(directory, result, truth=None):
    """One SVG per state variable; returns the written paths."""
    directory = Path(directory)
    paths = []
    for i in range(result.mean.shape[1]):
        tr = None if truth is None else np.asarray(truth)[:, i]
        paths.append(plot_component(directory / f"x{i + 1}.svg", result.times, result.mean[:, i],
                                    result.sd[:, i], float(result.horizon[i]), tr, f"x{i + 1}"))
    return paths
