"""Empirical eps0 probe: smallest eps in a sweep up to 0.45 at which any check fails."""

import math
import sys

from steklov_shell.cli import main

EPS = ["0.01", "0.02", "0.05", "0.1", "0.15", "0.2", "0.25", "0.3", "0.4", "0.45"]

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results/eps0_probe.csv"
    # a failing check is an expected outcome of the probe, so report rather than propagate
    main(["stability-sweep", "--n", "2", "--r", "1", "--volume", repr(3 * math.pi),
          "--eps", *EPS, "--seeds", "10", "--ntheta", "128", "--ns", "64", "--out", out])
