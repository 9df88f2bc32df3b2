"""Command-line driver: config parsing, experiment orchestration for the six
experiment families, and CSV emission.

Each experiment sweeps one quantity (fronthaul capacity, AP count, or the
sensing threshold), runs the per-scheme fronthaul optimizer at every sweep
point, evaluates the chosen plan end to end, and writes one CSV row per
(sweep value, scheme). ROC experiments instead emit the full detection
curve as (scheme, p_fa, p_de) rows. Sweep points are independent pure
functions of the config and seed, so they can run on a worker pool; rows
are always written in sweep order, making output byte-identical for any
thread count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import click
import numpy as np

from .model import SystemConfig
from .optimizer import OptimizerSpec, optimize_scheme
from .schemes import SCHEMES, MonteCarloSpec, run_scheme

EXPERIMENT_KINDS = (
    "roc",
    "accuracy-vs-fronthaul",
    "accuracy-vs-k",
    "rate-vs-fronthaul",
    "rate-vs-k",
    "tradeoff",
)

METRIC_HEADER = (
    "scheme",
    "sweep_name",
    "sweep_value",
    "rate_bps_hz",
    "p_de",
    "p_fa",
    "p_sa",
    "bhattacharyya_nats",
    "feasible",
    "n_trials",
    "seed",
)
ROC_HEADER = ("scheme", "p_fa", "p_de")

# Per-experiment defaults: operating point and sweep grid. "sweep_name" is
# the config field the sweep varies (None: single operating point).
_KIND_SETTINGS = {
    "roc": {
        "sweep_name": None,
        "sweep": (10.0,),
        "num_aps": 7,
        "fronthaul_capacity": 10.0,
        "bhattacharyya_threshold": 6.0,
        "power_db": 23.0,
    },
    "accuracy-vs-fronthaul": {
        "sweep_name": "fronthaul_capacity",
        "sweep": (1.0, 2.0, 4.0, 8.0, 16.0, 32.0),
        "num_aps": 3,
        "bhattacharyya_threshold": 2.0,
        "power_db": 23.0,
    },
    "accuracy-vs-k": {
        "sweep_name": "num_aps",
        "sweep": (1, 2, 3, 4, 5, 6, 7),
        "fronthaul_capacity": 4.0,
        "bhattacharyya_threshold": 2.0,
        "power_db": 23.0,
    },
    "rate-vs-fronthaul": {
        "sweep_name": "fronthaul_capacity",
        "sweep": (2.0, 4.0, 6.0, 8.0, 10.0),
        "num_aps": 3,
        "bhattacharyya_threshold": 2.0,
        "power_db": 23.0,
    },
    "rate-vs-k": {
        "sweep_name": "num_aps",
        "sweep": (1, 2, 3, 4, 5, 6, 7),
        "fronthaul_capacity": 4.0,
        "bhattacharyya_threshold": 2.0,
        "power_db": 23.0,
    },
    "tradeoff": {
        "sweep_name": "bhattacharyya_threshold",
        "sweep": (0.5, 1.0, 1.5, 2.0, 2.25, 2.5, 3.0, 4.0, 6.0, 8.0),
        "num_aps": 3,
        "fronthaul_capacity": 2.0,
        "power_db": 15.0,
    },
}

# config JSON schema: key -> expected shape
_INT_KEYS = {
    "num_aps",
    "antennas_per_ap",
    "T",
    "T_p",
    "T_d",
    "n_trials_detection",
    "n_trials_rate",
    "seed",
}
_SCALAR_KEYS = {
    "power_db",
    "p_target_present",
    "target_pfa",
    "bhattacharyya_threshold",
    "step",
}
_PER_AP_KEYS = {"target_gain_var", "clutter_var", "noise_var", "fronthaul_capacity"}
_POINT_KEYS = {"target_position", "ue_position"}
_LIST_KEYS = {"schemes", "sweep", "ap_positions"}
_ALL_KEYS = _INT_KEYS | _SCALAR_KEYS | _PER_AP_KEYS | _POINT_KEYS | _LIST_KEYS


@dataclass
class ExperimentSpec:
    """One fully resolved experiment: sweep grid, schemes, scenario, trial
    counts, and optimizer settings."""

    kind: str
    schemes: tuple[str, ...]
    sweep: tuple[float, ...]
    sweep_name: str | None
    config_kwargs: dict
    mc: MonteCarloSpec
    optimizer: OptimizerSpec

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.sweep:
            raise ValueError("sweep grid must be nonempty")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ValueError(f"schemes must be a nonempty subset of {SCHEMES}")


def _fail(field: str, message: str):
    raise ValueError(f"config field '{field}': {message}")


def _require_number(field: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(field, "expected a number")
    return float(value)


def _require_int(field: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(field, "expected an integer")
    return value


def _require_point(field: str, value):
    if not (isinstance(value, list) and len(value) == 2):
        _fail(field, "expected a [x, y] pair")
    return tuple(_require_number(f"{field}[{i}]", v) for i, v in enumerate(value))


def parse_config(kind: str, path) -> ExperimentSpec:
    """Load and validate a JSON config, filling defaults for the experiment
    kind. Unknown keys are rejected with the offending field named."""
    if kind not in EXPERIMENT_KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}")
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("config root must be a JSON object")
    for key in raw:
        if key not in _ALL_KEYS:
            raise ValueError(f"config field '{key}': unknown key")

    settings = _KIND_SETTINGS[kind]

    # time allocation: T = T_p + T_d, with T_d inferable
    t_p = _require_int("T_p", raw["T_p"]) if "T_p" in raw else 2
    t_d = _require_int("T_d", raw["T_d"]) if "T_d" in raw else None
    if "T" in raw:
        t = _require_int("T", raw["T"])
    elif t_d is not None:
        t = t_p + t_d
    else:
        t = 10
    if t_d is not None and t_p + t_d != t:
        raise ValueError(
            f"config field 'T_d': inconsistent time allocation (T_p + T_d = "
            f"{t_p + t_d} but T = {t})"
        )

    power_db = (
        _require_number("power_db", raw["power_db"])
        if "power_db" in raw
        else settings["power_db"]
    )
    power = 10.0 ** (power_db / 10.0)  # dB-to-linear at the config boundary

    config_kwargs = {
        "num_aps": _require_int("num_aps", raw["num_aps"]) if "num_aps" in raw else settings.get("num_aps", 3),
        "pilot_uses": t_p,
        "total_uses": t,
        "pilot_power": power,
        "data_power": power,
        "fronthaul_capacity": settings.get("fronthaul_capacity", 10.0),
    }
    if "antennas_per_ap" in raw:
        config_kwargs["antennas_per_ap"] = _require_int("antennas_per_ap", raw["antennas_per_ap"])
    for key in _PER_AP_KEYS:
        if key not in raw:
            continue
        value = raw[key]
        if isinstance(value, list):
            config_kwargs[key] = [
                _require_number(f"{key}[{i}]", v) for i, v in enumerate(value)
            ]
        else:
            config_kwargs[key] = _require_number(key, value)
    if "p_target_present" in raw:
        config_kwargs["p_target_present"] = _require_number("p_target_present", raw["p_target_present"])
    for key in _POINT_KEYS:
        if key in raw:
            config_kwargs[key] = _require_point(key, raw[key])
    if "ap_positions" in raw:
        if not isinstance(raw["ap_positions"], list):
            _fail("ap_positions", "expected a list of [x, y] pairs")
        config_kwargs["ap_positions"] = [
            _require_point(f"ap_positions[{i}]", v)
            for i, v in enumerate(raw["ap_positions"])
        ]

    schemes = tuple(SCHEMES)
    if "schemes" in raw:
        if not isinstance(raw["schemes"], list) or not raw["schemes"]:
            _fail("schemes", f"expected a nonempty list drawn from {SCHEMES}")
        for i, s in enumerate(raw["schemes"]):
            if s not in SCHEMES:
                _fail(f"schemes[{i}]", f"unknown scheme {s!r}; expected one of {SCHEMES}")
        schemes = tuple(raw["schemes"])

    sweep_name = settings["sweep_name"]
    sweep = settings["sweep"]
    if "sweep" in raw:
        if sweep_name is None:
            _fail("sweep", f"experiment kind '{kind}' takes no sweep grid")
        if not isinstance(raw["sweep"], list) or not raw["sweep"]:
            _fail("sweep", "expected a nonempty list of numbers")
        values = [_require_number(f"sweep[{i}]", v) for i, v in enumerate(raw["sweep"])]
        if sweep_name == "num_aps":
            for i, v in enumerate(values):
                if v != int(v) or v < 1:
                    _fail(f"sweep[{i}]", "AP counts must be positive integers")
            values = [int(v) for v in values]
        elif any(v < 0 for v in values):
            _fail("sweep", "sweep values must be nonnegative")
        sweep = tuple(values)

    mc = MonteCarloSpec(
        n_trials_detection=_require_int("n_trials_detection", raw["n_trials_detection"])
        if "n_trials_detection" in raw
        else 10_000,
        n_trials_rate=_require_int("n_trials_rate", raw["n_trials_rate"])
        if "n_trials_rate" in raw
        else 2_000,
        master_seed=_require_int("seed", raw["seed"]) if "seed" in raw else 0,
        target_pfa=_require_number("target_pfa", raw["target_pfa"])
        if "target_pfa" in raw
        else 0.1,
    )
    optimizer = OptimizerSpec(
        step=_require_number("step", raw["step"]) if "step" in raw else 0.05,
        bhattacharyya_threshold=_require_number(
            "bhattacharyya_threshold", raw["bhattacharyya_threshold"]
        )
        if "bhattacharyya_threshold" in raw
        # for the tradeoff kind the threshold is the sweep variable itself
        else settings.get("bhattacharyya_threshold", 0.0),
    )
    return ExperimentSpec(
        kind=kind,
        schemes=schemes,
        sweep=sweep,
        sweep_name=sweep_name,
        config_kwargs=config_kwargs,
        mc=mc,
        optimizer=optimizer,
    )


# --------------------------------------------------------------------------
# experiment execution
# --------------------------------------------------------------------------


def config_for_point(spec: ExperimentSpec, value) -> SystemConfig:
    kwargs = dict(spec.config_kwargs)
    if spec.sweep_name == "fronthaul_capacity":
        kwargs["fronthaul_capacity"] = float(value)
    elif spec.sweep_name == "num_aps":
        kwargs["num_aps"] = int(value)
    return SystemConfig(**kwargs)


def optimizer_for_point(spec: ExperimentSpec, value) -> OptimizerSpec:
    if spec.sweep_name == "bhattacharyya_threshold":
        return replace(spec.optimizer, bhattacharyya_threshold=float(value))
    return spec.optimizer


def _reverify_feasible(scheme, config, opt_spec, result):
    """Independent re-check of the constraints a feasible row claims."""
    if np.any(result.fronthaul_usage > config.fronthaul_capacity + 1e-9):
        raise RuntimeError(
            f"{scheme}: feasible row exceeds fronthaul capacity "
            f"({result.fronthaul_usage} > {config.fronthaul_capacity})"
        )
    if scheme in ("CDCS", "EDCS"):
        threshold = opt_spec.bhattacharyya_threshold
        if result.bhattacharyya < threshold - 1e-9:
            raise RuntimeError(
                f"{scheme}: feasible row violates the sensing constraint "
                f"({result.bhattacharyya} < {threshold})"
            )


def evaluate_point(spec: ExperimentSpec, value) -> list[tuple]:
    """All CSV rows for one sweep point, in scheme order."""
    config = config_for_point(spec, value)
    opt_spec = optimizer_for_point(spec, value)
    rows = []
    for scheme in spec.schemes:
        chosen = optimize_scheme(scheme, config, spec.mc, opt_spec)
        result = run_scheme(scheme, config, chosen.plan, spec.mc)
        feasible = chosen.feasible and result.feasible
        if feasible:
            _reverify_feasible(scheme, config, opt_spec, result)
        if spec.kind == "roc":
            rows.extend(
                (scheme, p_fa, p_de) for p_fa, p_de in result.roc.points
            )
        else:
            rows.append(
                (
                    scheme,
                    spec.sweep_name,
                    value,
                    result.rate,
                    result.p_de,
                    result.p_fa,
                    result.p_sa,
                    result.bhattacharyya,
                    feasible,
                    spec.mc.n_trials_detection,
                    spec.mc.master_seed,
                )
            )
    return rows


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


def run_experiment(spec: ExperimentSpec, out_path, threads: int = 1) -> int:
    """Run every sweep point, write the CSV, return the data row count.
    Rows are written in sweep order regardless of worker completion order."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1 or len(spec.sweep) == 1:
        batches = [evaluate_point(spec, value) for value in spec.sweep]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(lambda v: evaluate_point(spec, v), spec.sweep))

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    header = ROC_HEADER if spec.kind == "roc" else METRIC_HEADER
    count = 0
    with open(out_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for batch in batches:
            for row in batch:
                writer.writerow([_format_cell(cell) for cell in row])
                count += 1
    return count


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


@click.command()
@click.argument("kind", type=click.Choice(EXPERIMENT_KINDS))
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON config file (use {} for the experiment's defaults).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output CSV path.")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--trials", type=int, default=None,
              help="Override the detection trial count per hypothesis batch.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads across sweep points (output is identical for any value).")
def main(kind, config_path, out_path, seed, trials, threads):
    """Simulate one experiment family and write its CSV."""
    try:
        spec = parse_config(kind, config_path)
        if seed is not None:
            spec.mc = replace(spec.mc, master_seed=seed)
        if trials is not None:
            spec.mc = replace(spec.mc, n_trials_detection=trials)
        rows = run_experiment(spec, out_path, threads=threads)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {rows} rows to {out_path}")


if __name__ == "__main__":
    main()
