"""Convergence-fraction heatmap over elasticity and step size.

Renders the heatmap CSV (rows = elasticity E, columns = step size gamma)
with color encoding the fraction of converged runs per cell; the
colormap's top end marks cells where every run converged.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .csvio import CsvFormatError, read_heatmap

USAGE_ERROR = 2


def plot_heatmap(input_path: str, output: str) -> str:
    elasticities, gammas, matrix = read_heatmap(input_path)
    fig, ax = plt.subplots(figsize=(5.6, 4.4))
    mesh = ax.imshow(
        matrix,
        origin="lower",
        aspect="auto",
        cmap="viridis_r",
        vmin=0.0,
        vmax=1.0,
        extent=(-0.5, len(gammas) - 0.5, -0.5, len(elasticities) - 0.5),
    )
    ax.set_xticks(range(len(gammas)), [f"{g:g}" for g in gammas])
    ax.set_yticks(range(len(elasticities)), [f"{e:g}" for e in elasticities])
    ax.set_xlabel("step size gamma")
    ax.set_ylabel("elasticity of demand E")
    fig.colorbar(mesh, ax=ax, label="fraction of runs converged")
    fig.tight_layout()
    fig.savefig(output, dpi=150)
    plt.close(fig)
    return output


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("input", help="heatmap CSV path")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        plot_heatmap(args.input, args.out)
    except (OSError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
