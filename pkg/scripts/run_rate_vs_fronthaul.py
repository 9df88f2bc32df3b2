#!/usr/bin/env python3
"""Run the rate-vs-fronthaul experiment with the checked-in config; writes results/rate_vs_fronthaul.csv."""

from _driver import launch

if __name__ == "__main__":
    launch("rate-vs-fronthaul")
