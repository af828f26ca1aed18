"""Cost curves from solver trace CSVs, one line per file, log-scale cost.

    python plot_traces.py 'runs/*.csv' --mode iterations --out cost.svg
"""

import argparse
import csv
import glob
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

HEADER = ["iter", "cost", "grad_norm", "step_or_radius", "backtracks", "inner_iters", "rho", "time_s"]
X_COLUMN = {"iterations": "iter", "time": "time_s"}


class TraceError(ValueError):
    pass


def read_trace(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != HEADER:
        raise TraceError(f"{path}: header does not match {','.join(HEADER)}")
    cols = {name: [] for name in HEADER}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(HEADER):
            raise TraceError(f"{path}:{n}: expected {len(HEADER)} fields, got {len(row)}")
        try:
            for name, v in zip(HEADER, row):
                cols[name].append(float(v))
        except ValueError as e:
            raise TraceError(f"{path}:{n}: {e}") from None
    its = cols["iter"]
    if any(b <= a for a, b in zip(its, its[1:])):
        raise TraceError(f"{path}: iteration column is not increasing")
    return cols


def plot_traces(paths, mode, out):
    """Plots every readable trace; returns the per-file errors."""
    if not paths:
        raise ValueError("no trace files given")
    if mode not in X_COLUMN:
        raise ValueError(f"mode must be one of {sorted(X_COLUMN)}")
    errors = []
    plt.rcParams["svg.hashsalt"] = "fixrank"
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = 0
    for path in sorted(paths):
        try:
            cols = read_trace(path)
        except (OSError, TraceError) as e:
            errors.append(str(e))
            continue
        cost = [max(c, 1e-300) for c in cols["cost"]]
        ax.semilogy(cols[X_COLUMN[mode]], cost, label=Path(path).stem)
        plotted += 1
    if plotted == 0:
        plt.close(fig)
        raise ValueError("no readable traces: " + "; ".join(errors))
    ax.set_xlabel("iteration" if mode == "iterations" else "time (s)")
    ax.set_ylabel("cost")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, metadata={"Date": None} if str(out).endswith(".svg") else None)
    plt.close(fig)
    return errors


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("inputs", nargs="+", help="trace files or glob patterns")
    p.add_argument("--mode", choices=sorted(X_COLUMN), default="iterations")
    p.add_argument("--out", required=True, help="output .svg or .png")
    args = p.parse_args(argv)
    paths = sorted({f for pat in args.inputs for f in (glob.glob(pat) or [pat])})
    try:
        errors = plot_traces(paths, args.mode, args.out)
    except ValueError as e:
        p.error(str(e))
    for e in errors:
        print(f"skipped {e}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
