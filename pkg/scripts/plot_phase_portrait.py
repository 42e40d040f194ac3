"""Plot the delta phase portrait written by ``drivefit evaluate --out``.

    python3 scripts/plot_phase_portrait.py eval.delta.csv --joint 2 -o portrait.png
"""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("delta_csv", nargs="+", help="one or more <out>.delta.csv files, overlaid")
    ap.add_argument("--joint", type=int, default=0)
    ap.add_argument("-o", "--output", default="phase_portrait.png")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(5, 5))
    for path in args.delta_csv:
        with open(path) as fh:
            header = next(line for line in fh if not line.startswith("#")).strip().split(",")
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1)
        dq = data[:, header.index(f"dq{args.joint}")]
        dqd = data[:, header.index(f"dqd{args.joint}")]
        ax.plot(dq, dqd, lw=0.6, label=path)
    ax.axhline(0, color="k", lw=0.5)
    ax.axvline(0, color="k", lw=0.5)
    ax.set_xlabel("delta q [rad]")
    ax.set_ylabel("delta qd [rad/s]")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
