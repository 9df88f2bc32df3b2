#!/usr/bin/env python3
"""Run the tradeoff experiment with the checked-in config; writes results/tradeoff.csv."""

from _driver import launch

if __name__ == "__main__":
    launch("tradeoff")
