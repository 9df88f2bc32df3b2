#!/usr/bin/env python3
"""Run the rate-vs-k experiment with the checked-in config; writes results/rate_vs_k.csv."""

from _driver import launch

if __name__ == "__main__":
    launch("rate-vs-k")
