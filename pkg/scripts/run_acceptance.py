#!/usr/bin/env python3
"""Run the acceptance battery and write the report to a file."""

import argparse
import sys

from ballorbits import acceptance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--out", default="acceptance_report.txt")
    args = ap.parse_args()
    text, passed = acceptance.run_suite(args.seed)
    with open(args.out, "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
