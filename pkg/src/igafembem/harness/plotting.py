"""Log-log convergence figures written next to the CSV files."""

from __future__ import annotations

import os

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_record(record, outdir, expected: dict | None = None) -> list:
    """One PNG per metric: error against ``1/h`` with the fitted slope.

    ``expected`` maps metric names to a reference slope drawn as a dashed
    line through the last point.
    """
    plt = _pyplot()
    expected = expected or {}
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for metric in record.metrics:
        h_inv, err = record.series(metric)
        if h_inv.size == 0:
            continue
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.loglog(h_inv, err, "o-", color="black", ms=4, lw=1,
                  label="%s, p = %d" % (metric, record.p))
        if h_inv.size >= 2 and np.all(err > 0):
            ax.set_title("slope %.2f (last %d rows)" % (record.rate(metric), min(4, h_inv.size)),
                         fontsize=9)
        if metric in expected:
            k = expected[metric]
            ax.loglog(h_inv, err[-1] * (h_inv / h_inv[-1]) ** k, "--", color="gray", lw=1,
                      label="slope %g" % k)
        ax.set_xlabel("1/h")
        ax.set_ylabel("error")
        ax.grid(True, which="major", lw=0.5)
        ax.legend(fontsize=8, loc="lower left")
        fig.tight_layout()
        path = os.path.splitext(record.csv_path(outdir, metric))[0] + ".png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def expected_slopes(problem: str, p: int) -> dict:
    if problem == "interface-square":
        return {"energy": -p, "path1": -2 * p, "path2": -2 * p, "path3": -2 * p}
    return {"gap": -2 * p}
