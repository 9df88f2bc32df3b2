#!/usr/bin/env python3
"""Run the accuracy-vs-k experiment with the checked-in config; writes results/accuracy_vs_k.csv."""

from _driver import launch

if __name__ == "__main__":
    launch("accuracy-vs-k")
