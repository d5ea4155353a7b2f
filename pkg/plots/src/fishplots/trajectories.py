"""Average objective-gap trajectory with anchored rate references.

The main frame shows the mean over runs of phi(p^t) - phi_star on log-log
axes, next to C/t, C/t^2 and C/t^3 dashed references anchored at the first
plotted point (anchored, not fitted: the references illustrate slopes).
An inset repeats iterations 0..10 on linear axes.

phi_star defaults to the smallest potential value seen across the input
runs; pass --phi-star when the true optimum is known (e.g. for synthetic
trajectories).
"""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .csvio import CsvFormatError, read_trajectory

REFERENCE_POWERS = (1, 2, 3)
USAGE_ERROR = 2


def gap_series(runs: list[dict], phi_star: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mean gap per iteration across runs, for t >= 1.

    Runs of different lengths contribute wherever they have data.  Returns
    (t, mean_gap); entries where every run has already ended are dropped.
    """
    if not runs:
        raise CsvFormatError("no trajectory inputs")
    if phi_star is None:
        phi_star = min(run["phi"].min() for run in runs)
    horizon = max(run["t"].max() for run in runs)
    t = np.arange(1, int(horizon) + 1)
    table = np.full((len(runs), t.size), np.nan)
    for i, run in enumerate(runs):
        mask = run["t"] >= 1
        steps = run["t"][mask].astype(int) - 1
        table[i, steps] = run["phi"][mask] - phi_star
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(table, axis=0)
    keep = ~np.isnan(mean)
    return t[keep], mean[keep]


def reference_curves(t: np.ndarray, anchor_gap: float, anchor_t: float) -> dict[int, np.ndarray]:
    """C_k / t^k curves through the anchor point, for k = 1, 2, 3."""
    return {k: anchor_gap * (anchor_t / t) ** k for k in REFERENCE_POWERS}


def plot_trajectories(inputs: list[str], output: str, phi_star: float | None = None) -> str:
    runs = [read_trajectory(path) for path in inputs]
    t, mean_gap = gap_series(runs, phi_star)
    refs = reference_curves(t, anchor_gap=mean_gap[0], anchor_t=t[0])

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.loglog(t, mean_gap, color="tab:red", lw=1.8, label="mean objective gap")
    styles = {1: ("tab:blue", "1/t"), 2: ("tab:green", "1/t^2"), 3: ("tab:orange", "1/t^3")}
    for k, curve in refs.items():
        color, label = styles[k]
        ax.loglog(t, curve, "--", color=color, lw=1.0, label=label)
    ax.set_xlabel("iteration t")
    ax.set_ylabel("objective gap")
    ax.legend(loc="lower left", fontsize=8)

    inset = ax.inset_axes([0.55, 0.55, 0.42, 0.4])
    head = t <= 10
    inset.plot(t[head], mean_gap[head], color="tab:red", lw=1.2)
    for k, curve in refs.items():
        inset.plot(t[head], curve[head], "--", color=styles[k][0], lw=0.8)
    inset.set_title("iterations 0-10", fontsize=7)
    inset.tick_params(labelsize=6)

    fig.tight_layout()
    fig.savefig(output, dpi=150)
    plt.close(fig)
    return output


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("inputs", nargs="*", help="trajectory CSV paths")
    parser.add_argument("--out", required=True, help="output image path (extension picks the format)")
    parser.add_argument("--phi-star", type=float, default=None, dest="phi_star")
    args = parser.parse_args(argv)
    if not args.inputs:
        parser.error("at least one trajectory CSV is required")
    try:
        plot_trajectories(args.inputs, args.out, args.phi_star)
    except (OSError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
