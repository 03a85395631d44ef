#!/usr/bin/env python3
"""Write the built-in A/B/C letter bitmaps as P4 files (inputs for `rislink image`)."""

import argparse
import os

from rislink.fileio import write_pbm
from rislink.scenarios import IMAGE_LETTERS, letter_image


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=".")
    ap.add_argument("--size", type=int, default=64)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for letter in IMAGE_LETTERS:
        path = os.path.join(args.out, f"letter_{letter}.pbm")
        write_pbm(path, letter_image(letter, size=args.size))
        print("wrote", path)


if __name__ == "__main__":
    main()
