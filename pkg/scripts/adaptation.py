#!/usr/bin/env python3
"""Both adaptation modes on the AR(1) benchmark.

First the acceptance-rate servo at three setpoints, then the
cost-per-effective-sample controller, each writing its trajectory and a
summary.json under results/adapt/<mode>/.  Extra flags are forwarded to
both runs, e.g.

    python3 scripts/adaptation.py --n 256 --n-max 30000
"""

import sys
from pathlib import Path

from rjpo.cli import main

if __name__ == "__main__":
    extra = sys.argv[1:]
    for mode in ("target_rate", "min_cces"):
        out = Path("results/adapt") / mode
        rc = main(["adapt", "--mode", mode, "--out", str(out)] + extra)
        if rc != 0:
            sys.exit(rc)
        print(f"-- {mode}")
        print((out / "summary.json").read_text())
    sys.exit(0)
