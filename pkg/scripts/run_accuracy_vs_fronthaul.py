#!/usr/bin/env python3
"""Run the accuracy-vs-fronthaul experiment with the checked-in config; writes results/accuracy_vs_fronthaul.csv."""

from _driver import launch

if __name__ == "__main__":
    launch("accuracy-vs-fronthaul")
