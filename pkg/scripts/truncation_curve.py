#!/usr/bin/env python3
"""Acceptance, error, and cost as functions of the truncation level.

Sweeps the relative-residual threshold over a log grid on the N = 16 AR(1)
target, writing acceptance.csv, rmse_vs_eps.csv, and essr_cces.csv under
results/curve/, plus a convergence check across overdispersed chains.
Extra flags are forwarded, e.g.

    python3 scripts/truncation_curve.py --epsilon-grid logspace:1e-7:1e-1:15
"""

import sys

from rjpo.cli import main

if __name__ == "__main__":
    sys.exit(
        main(["curve", "--psrf", "--out", "results/curve"] + sys.argv[1:])
    )
