"""Plot learning curves from a results.csv written by `retrace run`.

usage: python scripts/plot_curves.py OUT_DIR/results.csv [--metric err_q_star] [--output curves.png]

One line per (trace, lambda), median over seeds. `diverged` values are
dropped from the median.
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("results")
    parser.add_argument("--metric", default=None, help="defaults to the first metric in the file")
    parser.add_argument("--output", default="curves.png")
    args = parser.parse_args()

    df = pd.read_csv(args.results, dtype={"value": str})
    metric = args.metric or df["metric"].iloc[0]
    df = df[df["metric"] == metric].copy()
    df["value"] = pd.to_numeric(df["value"], errors="coerce")

    fig, ax = plt.subplots(figsize=(7, 4))
    for (trace, lam), group in df.groupby(["trace", "lambda"], sort=False):
        curve = group.groupby("step")["value"].median()
        ax.plot(curve.index, curve.values, label=f"{trace} λ={lam}")
    ax.set_xlabel("step")
    ax.set_ylabel(metric)
    ax.set_yscale("log")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)


if __name__ == "__main__":
    main()
