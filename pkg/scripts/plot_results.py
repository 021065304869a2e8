#!/usr/bin/env python3
"""Plot trajectory CSVs produced by `polyomwu run`.

Examples:
    python scripts/plot_results.py runs/fig1a_*/sync_eta1e-02/mean.csv \
        runs/fig1a_*/uniform10_eta1e-02/mean.csv --column kl_main --out fig1a.png
    python scripts/plot_results.py --summary runs/fig2b_*/summary.csv --out fig2b.png
"""

import argparse
import csv
import glob
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def plot_curves(paths, column, out):
    fig, ax = plt.subplots(figsize=(6, 4))
    for pattern in paths:
        for path in sorted(glob.glob(pattern)) or [pattern]:
            rows = read_csv(path)
            t = [int(r["t"]) for r in rows]
            y = [float(r[column]) for r in rows]
            label = Path(path).parent.name
            ax.semilogy(t, y, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel(column)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


def plot_summary(path, out):
    rows = read_csv(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    by_prefix = {}
    for r in rows:
        prefix = r["label"].rsplit("_eta", 1)[0]
        by_prefix.setdefault(prefix, []).append((float(r["eta"]), float(r["final_kl_main"])))
    for prefix, pts in sorted(by_prefix.items()):
        pts.sort()
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", label=prefix)
    ax.set_xlabel("learning rate")
    ax.set_ylabel("final kl_main")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csvs", nargs="*", help="trajectory CSVs (glob patterns allowed)")
    parser.add_argument("--summary", help="plot a preset summary.csv instead of curves")
    parser.add_argument("--column", default="kl_main")
    parser.add_argument("--out", default="plot.png")
    args = parser.parse_args()
    if args.summary:
        plot_summary(args.summary, args.out)
    elif args.csvs:
        plot_curves(args.csvs, args.column, args.out)
    else:
        parser.error("pass trajectory CSVs or --summary")


if __name__ == "__main__":
    sys.exit(main())
