#!/usr/bin/env python3
"""Run the full randomized agreement suites (engine vs oracle, grads vs FD)."""

import sys

from plint.cli import main

if __name__ == "__main__":
    code = main(["check", "--oracle", "--trials", "200", "--max-dim", "64"] + sys.argv[1:])
    code = max(code, main(["check", "--grad", "--trials", "50"] + sys.argv[1:]))
    sys.exit(code)
