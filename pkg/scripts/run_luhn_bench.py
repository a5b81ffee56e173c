#!/usr/bin/env python3
"""Run the Luhn length-scaling benchmark and write a CSV."""

import sys

from plint.cli import main

if __name__ == "__main__":
    args = [
        "bench", "luhn",
        "--length-min", "50",
        "--length-max", "350",
        "--step", "50",
        "--trials", "3",
        "--csv", "luhn_bench.csv",
    ] + sys.argv[1:]
    sys.exit(main(args))
