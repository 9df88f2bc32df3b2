#!/usr/bin/env python3
"""Run all six experiment families in sequence with the checked-in configs."""

import sys

from _driver import launch

KINDS = (
    "roc",
    "accuracy-vs-fronthaul",
    "accuracy-vs-k",
    "rate-vs-fronthaul",
    "rate-vs-k",
    "tradeoff",
)

if __name__ == "__main__":
    for kind in KINDS:
        print(f"== {kind} ==")
        launch(kind, extra_args=sys.argv[1:], standalone=False)
