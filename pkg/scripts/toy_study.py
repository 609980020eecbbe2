#!/usr/bin/env python3
"""Moment recovery on the AR(1) benchmark, one run per sampler.

Runs the exact sampler and both truncated variants (corrected and not) on
the same N = 20 target at a common truncation level, then prints the error
tables side by side.  Outputs land under results/toy/<sampler>/.  Extra
flags are forwarded to every run, e.g.

    python3 scripts/toy_study.py --n 64 --epsilon 1e-3
"""

import sys
from pathlib import Path

from rjpo.cli import main

SAMPLERS = ("epo", "rjpo", "tpo")

if __name__ == "__main__":
    extra = sys.argv[1:]
    for sampler in SAMPLERS:
        out = Path("results/toy") / sampler
        rc = main(
            ["toy", "--n", "20", "--n-max", "100000", "--epsilon", "1e-2",
             "--sampler", sampler, "--out", str(out)] + extra
        )
        if rc != 0:
            sys.exit(rc)
    for sampler in SAMPLERS:
        print(f"-- {sampler}")
        print((Path("results/toy") / sampler / "rmse.csv").read_text(), end="")
    sys.exit(0)
