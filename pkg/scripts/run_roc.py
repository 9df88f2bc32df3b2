#!/usr/bin/env python3
"""Run the roc experiment with the checked-in config; writes results/roc.csv."""

from _driver import launch

if __name__ == "__main__":
    launch("roc")
