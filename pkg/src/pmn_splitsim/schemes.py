"""End-to-end Monte Carlo pipelines for the four functional splits.

Every pipeline samples the full signal path (hypothesis, channels, symbol
blocks, receiver noise, fronthaul quantization) rather than sampling
estimates from nominal covariances. Random streams are keyed by
(master_seed, purpose) only — never by plan contents or grid index — so any
two plans evaluated with the same MonteCarloSpec share their underlying
randomness (common random numbers), and results are independent of worker
count or evaluation order.

Trial layout: detection uses three fixed-hypothesis batches of
``n_trials_detection`` each (a held-out no-target batch for threshold
calibration, plus one evaluation batch per hypothesis); rate expectations
use ``n_trials_rate`` trials with the hypothesis drawn from its prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import ml_estimate, physical_estimate_covariance, refine_estimate
from .fronthaul import (
    QuantizationPlan,
    cdcs_data_kind,
    cdcs_pilot_kind,
    cdes_data_kind,
    cdes_pilot_kind,
    edcs_estimate_kind,
    quantize_additive,
    quantize_reverse,
    rate_bound,
)
from .model import (
    H0,
    H1,
    SystemConfig,
    build_profiles,
    received_block_batch,
    rng_stream,
    sample_channel_batch,
    sample_data_batch,
    sample_hypotheses,
    sample_pilot_batch,
)
from .sensing import (
    ROCCurve,
    bhattacharyya_cdcs,
    bhattacharyya_edcs,
    build_detector,
    calibrate_threshold,
    cloud_statistic,
    fused_edge_statistic,
    roc_curve,
    sensing_accuracy,
    statistic_blocks,
    whiten_blocks,
)

SCHEMES = ("CDCS", "CDES", "EDCS", "EDES")


def _per_ap(values, config: SystemConfig) -> np.ndarray:
    """Broadcast a plan field to one value per AP."""
    return np.broadcast_to(np.asarray(values, dtype=float), (config.num_aps,))


@dataclass
class MonteCarloSpec:
    """Trial counts, seed, and detection operating point."""

    n_trials_detection: int = 10_000
    n_trials_rate: int = 2_000
    master_seed: int = 0
    target_pfa: float = 0.1

    def __post_init__(self):
        if self.n_trials_detection < 1 or self.n_trials_rate < 1:
            raise ValueError("trial counts must be >= 1")
        if not 0.0 < self.target_pfa < 1.0:
            raise ValueError("target_pfa must lie in (0, 1)")


@dataclass
class SchemeResult:
    """Joint sensing/communication metrics for one scheme and plan."""

    scheme: str
    rate: float
    roc: ROCCurve
    p_de: float
    p_fa: float
    p_sa: float
    bhattacharyya: float
    fronthaul_usage: np.ndarray
    feasible: bool

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")


# --------------------------------------------------------------------------
# noise floors of the cloud-decoding rate expressions
# --------------------------------------------------------------------------


def noise_floor_cdcs(config: SystemConfig, sigma_p_sq, sigma_d_sq) -> np.ndarray:
    """Per-AP effective noise in the CDCS decode: quantized-pilot estimation
    error scaled by data power, receiver noise, and data quantization."""
    s_p = np.broadcast_to(np.asarray(sigma_p_sq, dtype=float), (config.num_aps,))
    s_d = np.broadcast_to(np.asarray(sigma_d_sq, dtype=float), (config.num_aps,))
    p_energy = config.pilot_power * config.pilot_uses
    return config.data_power * (config.noise_var + s_p) / p_energy + config.noise_var + s_d


def noise_floor_cdes(config: SystemConfig, sigma_p_sq, sigma_d_sq) -> np.ndarray:
    """Per-AP effective noise in the CDES decode: estimate-forwarding noise
    enters at full strength (it is not reduced by the pilot energy)."""
    s_p = np.broadcast_to(np.asarray(sigma_p_sq, dtype=float), (config.num_aps,))
    s_d = np.broadcast_to(np.asarray(sigma_d_sq, dtype=float), (config.num_aps,))
    p_energy = config.pilot_power * config.pilot_uses
    return (
        config.data_power * (s_p + config.noise_var / p_energy) + config.noise_var + s_d
    )


def decode_log_args(estimates: np.ndarray, data_power: float, noise_floor: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Per-trial argument of the cloud-decoding log: 1 + P_d * sum_k
    ||est_k||^2 / floor_k over active APs (rank-one reduction of the dense
    log-det; APs whose streams carry no bits contribute zero)."""
    power = np.sum(np.abs(estimates) ** 2, axis=-1)  # (n, K)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(active, data_power * power / noise_floor, 0.0)
    return 1.0 + terms.sum(axis=-1)


# --------------------------------------------------------------------------
# rate pipelines
# --------------------------------------------------------------------------


def _sampled_pilot_estimates(config: SystemConfig, mc: MonteCarloSpec, sigma_p_sq=None):
    """Common front half of the rate pipelines: hypotheses, channels, pilot
    blocks, optional additive pilot quantization, ML estimates."""
    profiles = build_profiles(config)
    n = mc.n_trials_rate
    seed = mc.master_seed
    hyp = sample_hypotheses(config, n, rng_stream(seed, "rate-hyp"))
    h = sample_channel_batch(config, profiles, hyp, rng_stream(seed, "rate-channel"))
    x_p = sample_pilot_batch(config, n, rng_stream(seed, "rate-pilot"))
    y_p = received_block_batch(config, h, x_p, rng_stream(seed, "rate-noise"))
    if sigma_p_sq is not None:
        sampling_var = np.where(np.isfinite(sigma_p_sq), sigma_p_sq, 0.0)
        y_p = quantize_additive(
            y_p, sampling_var[None, :, None, None], rng_stream(seed, "rate-quant")
        )
    return profiles, hyp, ml_estimate(y_p, x_p)


def rate_cdcs(config: SystemConfig, plan: QuantizationPlan, mc: MonteCarloSpec) -> float:
    """Ergodic cloud-decoding rate from quantized received blocks."""
    sigma_p = _per_ap(plan.sigma_p_sq, config)
    sigma_d = _per_ap(plan.sigma_d_sq, config)
    _, _, est = _sampled_pilot_estimates(config, mc, sigma_p_sq=sigma_p)
    floor = noise_floor_cdcs(config, sigma_p, sigma_d)
    active = np.isfinite(sigma_p) & np.isfinite(floor)
    args = decode_log_args(est, config.data_power, floor, active)
    return config.data_uses / config.total_uses * float(np.mean(np.log2(args)))


def rate_cdes(config: SystemConfig, plan: QuantizationPlan, mc: MonteCarloSpec) -> float:
    """Ergodic cloud-decoding rate from forwarded channel estimates plus a
    quantized data block; the estimate travels through the reverse test
    channel whose input covariance is conditioned on the trial's true
    hypothesis."""
    sigma_p = _per_ap(plan.sigma_p_sq, config)
    sigma_d = _per_ap(plan.sigma_d_sq, config)
    profiles, hyp, est = _sampled_pilot_estimates(config, mc)
    compressed = np.zeros_like(est)
    for k in range(config.num_aps):
        if not math.isfinite(sigma_p[k]):
            continue  # stream carries no bits; AP is masked out below
        for hypothesis in (H0, H1):
            sel = hyp == hypothesis
            if not np.any(sel):
                continue
            cov = physical_estimate_covariance("CDES", config, profiles, k, hypothesis)
            compressed[sel, k, :] = quantize_reverse(
                est[sel, k, :], cov, sigma_p[k], rng_stream(mc.master_seed, "rate-reverse", k, hypothesis)
            )
    floor = noise_floor_cdes(config, sigma_p, sigma_d)
    active = np.isfinite(sigma_p) & np.isfinite(floor)
    args = decode_log_args(compressed, config.data_power, floor, active)
    return config.data_uses / config.total_uses * float(np.mean(np.log2(args)))


def select_best_ap(config: SystemConfig) -> int:
    """AP with the highest average received data SNR (ties to the lowest
    index); this AP hosts edge decoding."""
    mean_gain = config.clutter_var + config.p_target_present * config.target_gain_var
    snr = config.data_power * mean_gain / config.noise_var
    return int(np.argmax(snr))


def edge_decode_coefficient(config: SystemConfig, ap: int) -> float:
    """Effective SNR coefficient of the edge decoder at the given AP."""
    p_energy = config.pilot_power * config.pilot_uses
    return (
        config.pilot_power
        * config.data_power
        * config.pilot_uses
        / (config.noise_var[ap] * (config.data_power + p_energy))
    )


def rate_edge(config: SystemConfig, mc: MonteCarloSpec) -> float:
    """Ergodic rate of local decoding at the best AP (no fronthaul
    quantization enters this expression)."""
    best = select_best_ap(config)
    _, _, est = _sampled_pilot_estimates(config, mc)
    coeff = edge_decode_coefficient(config, best)
    power = np.sum(np.abs(est[:, best, :]) ** 2, axis=-1)
    return config.data_uses / config.total_uses * float(np.mean(np.log2(1.0 + coeff * power)))


# --------------------------------------------------------------------------
# sensing simulation
# --------------------------------------------------------------------------


@dataclass
class SensingSimResult:
    roc: ROCCurve
    p_de: float
    p_fa: float
    p_sa: float
    nu_p: float


def _sensing_statistics(scheme: str, config: SystemConfig, profiles, plan, mc: MonteCarloSpec, batch: str, hypothesis: int) -> np.ndarray:
    """Decision statistics for one fixed-hypothesis batch, running the
    scheme's full signal path."""
    n = mc.n_trials_detection
    seed = mc.master_seed
    detector = build_detector(scheme, config, profiles, plan)
    hyp = np.full(n, hypothesis, dtype=np.int8)
    h = sample_channel_batch(config, profiles, hyp, rng_stream(seed, "sense-channel", batch))
    x_p = sample_pilot_batch(config, n, rng_stream(seed, "sense-pilot", batch))
    y_p = received_block_batch(config, h, x_p, rng_stream(seed, "sense-noise", batch))

    if scheme == "CDCS":
        sigma_p = np.zeros(config.num_aps) if plan is None else _per_ap(plan.sigma_p_sq, config)
        sampling_var = np.where(np.isfinite(sigma_p), sigma_p, 0.0)
        y_hat = quantize_additive(
            y_p, sampling_var[None, :, None, None], rng_stream(seed, "sense-quant", batch)
        )
        return cloud_statistic(detector, whiten_blocks(detector, y_hat))

    if scheme in ("CDES", "EDES"):
        per_ap = statistic_blocks(detector, whiten_blocks(detector, y_p))
        return fused_edge_statistic(per_ap)

    if scheme == "EDCS":
        x_d = sample_data_batch(config, n, rng_stream(seed, "sense-data", batch))
        y_d = received_block_batch(config, h, x_d, rng_stream(seed, "sense-data-noise", batch))
        refined = refine_estimate(y_p, y_d, x_p, x_d)
        sigma_sq = np.zeros(config.num_aps) if plan is None else _per_ap(plan.sigma_sq, config)
        sampling_var = np.where(np.isfinite(sigma_sq), sigma_sq, 0.0)
        forwarded = quantize_additive(
            refined, sampling_var[None, :, None], rng_stream(seed, "sense-est-quant", batch)
        )
        blocks = forwarded[:, :, :, None]  # one block per AP
        return cloud_statistic(detector, whiten_blocks(detector, blocks))

    raise ValueError(f"unknown scheme {scheme!r}")


def simulate_sensing(scheme: str, config: SystemConfig, plan, mc: MonteCarloSpec) -> SensingSimResult:
    """ROC over the evaluation batches plus the operating point at a
    threshold calibrated on a held-out no-target batch."""
    profiles = build_profiles(config)
    cal = _sensing_statistics(scheme, config, profiles, plan, mc, "cal", H0)
    h0 = _sensing_statistics(scheme, config, profiles, plan, mc, "h0", H0)
    h1 = _sensing_statistics(scheme, config, profiles, plan, mc, "h1", H1)
    nu_p = calibrate_threshold(cal, mc.target_pfa)
    p_fa = float(np.mean(h0 > nu_p))
    p_de = float(np.mean(h1 > nu_p))
    return SensingSimResult(
        roc=roc_curve(h0, h1),
        p_de=p_de,
        p_fa=p_fa,
        p_sa=sensing_accuracy(p_de, p_fa),
        nu_p=nu_p,
    )


# --------------------------------------------------------------------------
# full scheme evaluation
# --------------------------------------------------------------------------


def scheme_bhattacharyya(scheme: str, config: SystemConfig, plan) -> float:
    """Sensing discriminability for the scheme's decision statistics. Edge
    sensing is unaffected by fronthaul, so CDES/EDES report the fixed
    per-AP-sensing value (pilot-domain form with no quantization)."""
    if scheme == "CDCS":
        sigma_p = 0.0 if plan is None else plan.sigma_p_sq
        return bhattacharyya_cdcs(config, sigma_p)
    if scheme == "EDCS":
        sigma = 0.0 if plan is None else plan.sigma_sq
        return bhattacharyya_edcs(config, sigma)
    if scheme in ("CDES", "EDES"):
        return bhattacharyya_cdcs(config, 0.0)
    raise ValueError(f"unknown scheme {scheme!r}")


def fronthaul_usage(scheme: str, config: SystemConfig, plan, rate: float) -> np.ndarray:
    """Bits/s/Hz consumed per AP by the scheme under the given plan; the
    achieved decode rate rides the best AP's link for edge decoding, and
    edge sensing adds one decision bit per block (1/T) per AP."""
    vote = 1.0 / config.total_uses
    usage = np.zeros(config.num_aps)
    if scheme == "CDCS":
        sigma_p = _per_ap(plan.sigma_p_sq, config)
        sigma_d = _per_ap(plan.sigma_d_sq, config)
        for k in range(config.num_aps):
            usage[k] = rate_bound(cdcs_pilot_kind(config, k), sigma_p[k]) + rate_bound(
                cdcs_data_kind(config, k), sigma_d[k]
            )
    elif scheme == "CDES":
        sigma_p = _per_ap(plan.sigma_p_sq, config)
        sigma_d = _per_ap(plan.sigma_d_sq, config)
        for k in range(config.num_aps):
            usage[k] = (
                vote
                + rate_bound(cdes_pilot_kind(config, k), sigma_p[k])
                + rate_bound(cdes_data_kind(config, k), sigma_d[k])
            )
    elif scheme == "EDCS":
        sigma = _per_ap(plan.sigma_sq, config)
        for k in range(config.num_aps):
            usage[k] = rate_bound(edcs_estimate_kind(config, k), sigma[k])
        usage[select_best_ap(config)] += rate
    elif scheme == "EDES":
        usage[:] = vote
        usage[select_best_ap(config)] += rate
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return usage


def run_scheme(scheme: str, config: SystemConfig, plan, mc: MonteCarloSpec) -> SchemeResult:
    """Evaluate one scheme end to end for a given quantization plan,
    producing the joint sensing and rate metrics plus fronthaul accounting.

    For edge decoding (EDCS/EDES) the reported rate is the operational
    forwarded-bits rate: the local decode rate capped by the fronthaul left
    after the scheme's sensing streams.
    """
    vote = 1.0 / config.total_uses
    best = select_best_ap(config)
    if plan is not None:
        violations = plan.feasibility_violations(config)
        if violations:
            # not an over-budget plan but an unrealizable one: the reverse
            # test channel cannot produce this distortion level at all
            raise ValueError("infeasible quantization plan: " + "; ".join(violations))
    feasible = True

    if scheme == "CDCS":
        rate = rate_cdcs(config, plan, mc)
    elif scheme == "CDES":
        rate = rate_cdes(config, plan, mc)
    elif scheme == "EDCS":
        decode = rate_edge(config, mc)
        sense_bits = rate_bound(edcs_estimate_kind(config, best), _per_ap(plan.sigma_sq, config)[best])
        headroom = config.fronthaul_capacity[best] - sense_bits
        if headroom < 0:
            feasible = False
        rate = float(min(decode, max(headroom, 0.0)))
    elif scheme == "EDES":
        if np.any(config.fronthaul_capacity < vote - 1e-12):
            feasible = False
        decode = rate_edge(config, mc)
        rate = float(min(decode, max(config.fronthaul_capacity[best] - vote, 0.0)))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    sensing = simulate_sensing(scheme, config, plan, mc)
    usage = fronthaul_usage(scheme, config, plan, rate)
    if np.any(usage > config.fronthaul_capacity + 1e-9):
        feasible = False
    return SchemeResult(
        scheme=scheme,
        rate=rate,
        roc=sensing.roc,
        p_de=sensing.p_de,
        p_fa=sensing.p_fa,
        p_sa=sensing.p_sa,
        bhattacharyya=scheme_bhattacharyya(scheme, config, plan),
        fronthaul_usage=usage,
        feasible=feasible,
    )
