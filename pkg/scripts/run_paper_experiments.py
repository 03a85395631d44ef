#!/usr/bin/env python3
"""Run the full experiment set with default calibration.

Produces, under --out (default ./out):
  sweep/    single-beam angle sweep CSV
  multi/    four simultaneous-beam groups CSV
  image/    three-user image transmission, BER reports and recovered bitmaps
  feedback/ power-feedback refinement history

Each subdirectory gets its own manifest; re-running with the same seed
reproduces every file byte for byte.
"""

import argparse
import os
import sys

from rislink.cli import main as rislink_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    common = ["--seed", str(args.seed), "--jobs", str(args.jobs)]
    for cmd in ("sweep", "multi", "image", "feedback"):
        out = os.path.join(args.out, cmd)
        print(f"=== {cmd} -> {out}")
        rc = rislink_main([cmd, "--out", out] + common)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
