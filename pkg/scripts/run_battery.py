"""Stability battery: 20 seeds x eps in {0.01, 0.05, 0.1} on the n=2 annulus (r=1, |A|=3 pi)."""

import math
import sys

from steklov_shell.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results/battery.csv"
    sys.exit(main(["stability-sweep", "--n", "2", "--r", "1", "--volume", repr(3 * math.pi),
                   "--eps", "0.01", "0.05", "0.1", "--seeds", "20", "--out", out]))
