"""Per-scheme fronthaul allocation.

Each scheme exposes a one-dimensional knob once the structural choices are
fixed: cloud schemes split each AP's capacity between a sensing-bearing
stream and a data-bearing stream (a common split value across APs), and
edge-decoding schemes split the best AP's capacity between the forwarded
estimate (EDCS) or nothing (EDES) and the decoded data bits. The optimizers
scan a step grid over that knob, evaluate the ergodic rate by Monte Carlo
under common random numbers (so every grid point sees identical noise), and
apply the sensing constraint through the closed-form Bhattacharyya
distance. All selections are deterministic: ties keep the earliest grid
point, and the discriminability constraint uses a fixed absolute slack so
boundary points are kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fronthaul import (
    QuantizationPlan,
    cdcs_data_kind,
    cdcs_pilot_kind,
    cdes_data_kind,
    cdes_pilot_kind,
    edcs_estimate_kind,
    invert_rate_bound,
)
from .model import SystemConfig
from .schemes import (
    MonteCarloSpec,
    rate_cdcs,
    rate_cdes,
    rate_edge,
    select_best_ap,
)
from .sensing import bhattacharyya_cdcs, bhattacharyya_edcs

_B_SLACK = 1e-12  # absolute slack on the discriminability constraint


@dataclass
class OptimizerSpec:
    """Grid step (bits/s/Hz) and sensing constraint for the allocation."""

    step: float = 0.05
    bhattacharyya_threshold: float = 0.0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.bhattacharyya_threshold < 0:
            raise ValueError("bhattacharyya_threshold must be nonnegative")


@dataclass
class OptimizerResult:
    """Chosen plan and its metrics; ``allocation`` is the winning knob value
    (sensing-stream bits for cloud schemes, decoded-data bits for EDCS,
    absent for EDES)."""

    scheme: str
    plan: QuantizationPlan
    rate: float
    bhattacharyya: float
    feasible: bool
    allocation: float | None = None


def capacity_grid(cap: float, step: float) -> np.ndarray:
    """Multiples of ``step`` from 0 up to ``cap``, with ``cap`` itself
    appended so the full-allocation endpoint is always reachable. Halving
    the step yields a superset of the grid."""
    if cap < 0:
        raise ValueError("capacity must be nonnegative")
    count = int(math.floor(cap / step + 1e-9))
    points = [i * step for i in range(count + 1)]
    if cap - points[-1] > 1e-12:
        points.append(cap)
    # the floor tolerance can admit a final multiple one ulp above the cap
    return np.minimum(np.asarray(points), cap)


def _invert_or_none(kind, target: float) -> float | None:
    """Quantization level realizing ``target`` bits, or None when the
    reverse test channel cannot realize a positive target that small."""
    try:
        return invert_rate_bound(kind, target)
    except ValueError:
        return None


# --------------------------------------------------------------------------
# cloud decoding schemes: split capacity between pilot- and data-bearing
# streams with a common split across APs
# --------------------------------------------------------------------------


def optimize_cdcs(config: SystemConfig, mc: MonteCarloSpec, spec: OptimizerSpec) -> OptimizerResult:
    """Maximize the ergodic rate over the pilot/data capacity split subject
    to the sensing constraint; the pilot stream carries both channel
    estimation and cloud sensing, so its share controls discriminability."""
    caps = config.fronthaul_capacity
    grid = capacity_grid(float(np.min(caps)), spec.step)

    def plan_at(c: float) -> QuantizationPlan:
        sigma_p = [invert_rate_bound(cdcs_pilot_kind(config, k), c) for k in range(config.num_aps)]
        sigma_d = [
            invert_rate_bound(cdcs_data_kind(config, k), caps[k] - c)
            for k in range(config.num_aps)
        ]
        return QuantizationPlan("CDCS", sigma_p_sq=sigma_p, sigma_d_sq=sigma_d)

    best = None  # (rate, c, plan, B)
    for c in grid:
        plan = plan_at(c)
        distance = bhattacharyya_cdcs(config, plan.sigma_p_sq)
        if distance < spec.bhattacharyya_threshold - _B_SLACK:
            continue
        rate = rate_cdcs(config, plan, mc)
        if best is None or rate > best[0]:
            best = (rate, c, plan, distance)
    if best is not None:
        rate, c, plan, distance = best
        return OptimizerResult("CDCS", plan, rate, distance, True, allocation=float(c))

    # constraint unreachable: report the most discriminable allocation
    c = float(grid[-1])
    plan = plan_at(c)
    return OptimizerResult(
        "CDCS",
        plan,
        rate_cdcs(config, plan, mc),
        bhattacharyya_cdcs(config, plan.sigma_p_sq),
        False,
        allocation=c,
    )


def optimize_cdes(config: SystemConfig, mc: MonteCarloSpec, spec: OptimizerSpec) -> OptimizerResult:
    """Maximize the ergodic rate over the estimate/data capacity split.
    Sensing is local, so no discriminability constraint applies; each AP
    first spends one decision bit per block on its vote."""
    vote = 1.0 / config.total_uses
    caps = config.fronthaul_capacity
    budgets = np.maximum(caps - vote, 0.0)
    feasible = bool(np.all(caps >= vote - 1e-12))
    distance = bhattacharyya_cdcs(config, 0.0)

    best = None  # (rate, c, plan)
    for c in capacity_grid(float(np.min(budgets)), spec.step):
        sigma_p = [
            _invert_or_none(cdes_pilot_kind(config, k), c) for k in range(config.num_aps)
        ]
        if any(s is None for s in sigma_p):
            continue  # the reverse test channel cannot carry this few bits
        sigma_d = [
            invert_rate_bound(cdes_data_kind(config, k), budgets[k] - c)
            for k in range(config.num_aps)
        ]
        plan = QuantizationPlan("CDES", sigma_p_sq=sigma_p, sigma_d_sq=sigma_d)
        rate = rate_cdes(config, plan, mc)
        if best is None or rate > best[0]:
            best = (rate, c, plan)
    rate, c, plan = best
    return OptimizerResult("CDES", plan, rate, distance, feasible, allocation=float(c))


# --------------------------------------------------------------------------
# edge decoding schemes: the sensing-only APs are fixed, the best AP splits
# its capacity between sensing support and decoded data bits
# --------------------------------------------------------------------------


def optimize_edcs(config: SystemConfig, mc: MonteCarloSpec, spec: OptimizerSpec) -> OptimizerResult:
    """Maximize the forwarded decoded-data bits subject to the sensing
    constraint. Sensing-only APs spend their whole capacity on the refined
    estimate; discriminability falls as the best AP trades estimate bits
    for data bits, so the scan keeps the largest feasible data share."""
    caps = config.fronthaul_capacity
    best_ap = select_best_ap(config)
    sigma = np.empty(config.num_aps)
    for k in range(config.num_aps):
        if k == best_ap:
            continue
        level = _invert_or_none(edcs_estimate_kind(config, k), caps[k])
        sigma[k] = math.inf if level is None else level

    decode = rate_edge(config, mc)
    kind_best = edcs_estimate_kind(config, best_ap)
    grid = capacity_grid(float(min(caps[best_ap], decode)), spec.step)

    for r1 in grid[::-1]:  # largest data share first
        level = _invert_or_none(kind_best, caps[best_ap] - r1)
        if level is None:
            continue
        sigma[best_ap] = level
        distance = bhattacharyya_edcs(config, sigma)
        if distance >= spec.bhattacharyya_threshold - _B_SLACK:
            plan = QuantizationPlan("EDCS", sigma_sq=sigma.copy())
            return OptimizerResult(
                "EDCS", plan, float(r1), distance, True, allocation=float(r1)
            )

    # constraint unreachable even with every bit on sensing
    level = _invert_or_none(kind_best, caps[best_ap])
    sigma[best_ap] = math.inf if level is None else level
    plan = QuantizationPlan("EDCS", sigma_sq=sigma.copy())
    return OptimizerResult(
        "EDCS", plan, 0.0, bhattacharyya_edcs(config, sigma), False, allocation=0.0
    )


def optimize_edes(config: SystemConfig, mc: MonteCarloSpec, spec: OptimizerSpec) -> OptimizerResult:
    """No allocation knob: each AP sends its vote, the best AP forwards the
    locally decoded bits up to its remaining capacity."""
    vote = 1.0 / config.total_uses
    caps = config.fronthaul_capacity
    best_ap = select_best_ap(config)
    feasible = bool(np.all(caps >= vote - 1e-12))
    decode = rate_edge(config, mc)
    rate = float(min(decode, max(caps[best_ap] - vote, 0.0)))
    return OptimizerResult(
        "EDES",
        QuantizationPlan("EDES"),
        rate,
        bhattacharyya_cdcs(config, 0.0),
        feasible,
    )


_OPTIMIZERS = {
    "CDCS": optimize_cdcs,
    "CDES": optimize_cdes,
    "EDCS": optimize_edcs,
    "EDES": optimize_edes,
}


def optimize_scheme(scheme: str, config: SystemConfig, mc: MonteCarloSpec, spec: OptimizerSpec) -> OptimizerResult:
    if scheme not in _OPTIMIZERS:
        raise ValueError(f"unknown scheme {scheme!r}")
    return _OPTIMIZERS[scheme](config, mc, spec)
