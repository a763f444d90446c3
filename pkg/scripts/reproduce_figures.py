#!/usr/bin/env python3
"""Run every preset config in configs/ and collect the CSVs in one place.

Usage: python3 scripts/reproduce_figures.py [outdir]
"""

import os
import sys

from agelab.cli import main as agelab_main

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIG_DIR = os.path.join(HERE, os.pardir, "configs")


def main() -> int:
    outdir = sys.argv[1] if len(sys.argv) > 1 else "figures"
    os.makedirs(outdir, exist_ok=True)
    rc = 0
    for name in sorted(os.listdir(CONFIG_DIR)):
        if not name.endswith(".json"):
            continue
        stem = os.path.splitext(name)[0]
        out = os.path.join(outdir, stem + ".csv")
        print(f"== {name} -> {out}")
        code = agelab_main([os.path.join(CONFIG_DIR, name), "--out", out])
        if code != 0:
            print(f"{name}: exit code {code}", file=sys.stderr)
            rc = code
    return rc


if __name__ == "__main__":
    sys.exit(main())
