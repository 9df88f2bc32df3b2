"""Shared launcher for the experiment scripts: resolves the checked-in
config and the results path for one experiment kind, then hands off to the
CLI. Extra command-line arguments are forwarded (e.g. --seed, --threads)."""

import sys
from pathlib import Path

from pmn_splitsim.cli import main

ROOT = Path(__file__).resolve().parent.parent


def launch(kind: str, extra_args=None, standalone: bool = True):
    config = ROOT / "configs" / f"{kind.replace('-', '_')}.json"
    out = ROOT / "results" / f"{kind.replace('-', '_')}.csv"
    args = [
        kind,
        "--config", str(config),
        "--out", str(out),
        *(extra_args if extra_args is not None else sys.argv[1:]),
    ]
    return main(args, standalone_mode=standalone)
