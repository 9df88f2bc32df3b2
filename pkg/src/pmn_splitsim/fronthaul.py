"""Fronthaul quantization test channels and capacity accounting.

Two test-channel families model the capacity-limited AP-to-CPU links:

- additive: the forwarded signal is the original plus independent Gaussian
  noise (used for raw received blocks in CDCS and for the data block in
  CDES). The fronthaul rate needed is ``w * log2 det(I + M / sigma_sq)``
  where M is the signal covariance per channel use and w the fraction of the
  block the stream occupies.
- reverse: the original is modeled as the forwarded value plus independent
  Gaussian noise (used for channel estimates in CDES and EDCS). Feasibility
  requires the quantization variance not to exceed the smallest eigenvalue
  of the input covariance, and the rate is ``w * log2 det(M_in / sigma_sq)``
  with M_in the input-estimate covariance.

All covariances here have scaled-identity-plus-rank-one structure
``a*I + b*uu^H`` (unit u), so log-dets reduce to two scalar logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import SystemConfig, complex_normal

_BRACKET_LO = 1e-300  # covers capacity targets up to hundreds of bits
_BRACKET_HI = 1e12
_REL_TOL = 1e-9
_MAX_ITER = 200


# --------------------------------------------------------------------------
# rate-bound kinds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RateBoundKind:
    """Closed-form fronthaul-rate bound for one forwarded stream of one AP.

    ``identity_coeff`` (a) and ``rank_one_eig`` (b) describe the effective
    covariance a*I + b*uu^H; ``time_fraction`` (w) scales bits per use to
    bits/s/Hz over the whole block. ``reverse`` selects the test-channel
    family. For reverse kinds, ``identity_coeff`` is also the largest
    feasible quantization variance.
    """

    tag: str
    identity_coeff: float
    rank_one_eig: float
    time_fraction: float
    antennas: int
    reverse: bool

    @property
    def max_feasible_sigma_sq(self) -> float:
        return self.identity_coeff if self.reverse else math.inf

    @property
    def min_rate(self) -> float:
        """Smallest representable rate: 0 for additive kinds, the rate at the
        feasibility edge for reverse kinds."""
        if not self.reverse:
            return 0.0
        return rate_bound(self, self.identity_coeff)


def cdcs_pilot_kind(config: SystemConfig, k: int) -> RateBoundKind:
    """Raw received pilot block forwarded to the CPU (additive)."""
    p1 = config.p_target_present
    return RateBoundKind(
        tag="CdcsPilot",
        identity_coeff=config.pilot_power * config.clutter_var[k] + config.noise_var[k],
        rank_one_eig=config.pilot_power * p1 * config.target_gain_var[k] * config.antennas_per_ap,
        time_fraction=config.pilot_uses / config.total_uses,
        antennas=config.antennas_per_ap,
        reverse=False,
    )


def cdcs_data_kind(config: SystemConfig, k: int) -> RateBoundKind:
    """Raw received data block forwarded to the CPU (additive)."""
    p1 = config.p_target_present
    return RateBoundKind(
        tag="CdcsData",
        identity_coeff=config.data_power * config.clutter_var[k] + config.noise_var[k],
        rank_one_eig=config.data_power * p1 * config.target_gain_var[k] * config.antennas_per_ap,
        time_fraction=config.data_uses / config.total_uses,
        antennas=config.antennas_per_ap,
        reverse=False,
    )


def cdes_data_kind(config: SystemConfig, k: int) -> RateBoundKind:
    """Received data block forwarded under edge sensing (additive; same
    statistics as the CDCS data stream)."""
    kind = cdcs_data_kind(config, k)
    return RateBoundKind(
        tag="CdesData",
        identity_coeff=kind.identity_coeff,
        rank_one_eig=kind.rank_one_eig,
        time_fraction=kind.time_fraction,
        antennas=kind.antennas,
        reverse=False,
    )


def cdes_pilot_kind(config: SystemConfig, k: int) -> RateBoundKind:
    """Locally computed channel estimate forwarded to the CPU (reverse).

    The input covariance uses the physical pilot-estimation error
    (clutter variance plus noise_var / pilot energy); see estimation module
    for the relation to the reported second-moment formulas.
    """
    p1 = config.p_target_present
    a = config.clutter_var[k] + config.noise_var[k] / (config.pilot_power * config.pilot_uses)
    return RateBoundKind(
        tag="CdesPilot",
        identity_coeff=a,
        rank_one_eig=p1 * config.target_gain_var[k] * config.antennas_per_ap,
        time_fraction=1.0 / config.total_uses,
        antennas=config.antennas_per_ap,
        reverse=True,
    )


def edcs_estimate_kind(config: SystemConfig, k: int) -> RateBoundKind:
    """Refined whole-block channel estimate forwarded after local decoding
    (reverse). The estimation error shrinks with the total block energy."""
    p1 = config.p_target_present
    a = config.clutter_var[k] + config.noise_var[k] / config.pilot_data_energy
    return RateBoundKind(
        tag="EdcsEstimate",
        identity_coeff=a,
        rank_one_eig=p1 * config.target_gain_var[k] * config.antennas_per_ap,
        time_fraction=1.0 / config.total_uses,
        antennas=config.antennas_per_ap,
        reverse=True,
    )


# --------------------------------------------------------------------------
# rate bound and its inverse
# --------------------------------------------------------------------------


def rate_bound(kind: RateBoundKind, sigma_sq: float) -> float:
    """Fronthaul rate (bits/s/Hz) needed to forward the stream with
    quantization variance sigma_sq. Strictly decreasing in sigma_sq."""
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    if math.isinf(sigma_sq):
        return 0.0  # +inf sentinel: no fronthaul spent on this stream
    a, b, w, n_r = kind.identity_coeff, kind.rank_one_eig, kind.time_fraction, kind.antennas
    if kind.reverse:
        if sigma_sq > a * (1 + 1e-12):
            raise ValueError("reverse test channel infeasible: sigma_sq exceeds the input covariance floor")
        return w * ((n_r - 1) * math.log2(a / sigma_sq) + math.log2((a + b) / sigma_sq))
    return w * ((n_r - 1) * math.log2(1 + a / sigma_sq) + math.log2(1 + (a + b) / sigma_sq))


def invert_rate_bound(kind: RateBoundKind, c_target: float) -> float:
    """Quantization variance whose rate_bound equals c_target (bisection in
    log sigma_sq, since feasible levels span hundreds of decades).

    c_target = 0 returns +inf, the sentinel for spending no fronthaul on the
    stream. Targets outside what the feasible bracket can reach raise
    'capacity target infeasible' (for reverse kinds this includes targets
    below the rate at the feasibility edge). The result rounds toward the
    feasible side: the realized rate never exceeds c_target and falls short
    by at most 1e-9 relative, so plans built by inversion stay within their
    capacity budget.
    """
    if c_target < 0:
        raise ValueError("c_target must be nonnegative")
    if c_target == 0:
        return math.inf
    lo = _BRACKET_LO
    hi = min(_BRACKET_HI, kind.max_feasible_sigma_sq)
    c_lo = rate_bound(kind, lo)   # largest achievable within bracket
    c_hi = rate_bound(kind, hi)   # smallest achievable within bracket
    if c_target > c_lo or c_target < c_hi - _REL_TOL * max(1.0, c_hi):
        raise ValueError("capacity target infeasible")
    if c_target <= c_hi:
        return hi
    tol = _REL_TOL * max(c_target, 1.0)
    for _ in range(_MAX_ITER):
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi)))
        c_mid = rate_bound(kind, mid)
        if c_mid > c_target:
            lo = mid
        elif c_target - c_mid <= tol:
            return mid
        else:
            hi = mid
    return hi


# --------------------------------------------------------------------------
# test channels
# --------------------------------------------------------------------------


def quantize_additive(signal: np.ndarray, sigma_sq, rng: np.random.Generator) -> np.ndarray:
    """Forwarded copy of ``signal`` with independent CN(0, sigma_sq) noise
    per entry. sigma_sq may broadcast over the signal shape."""
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    if np.any(sigma_sq < 0):
        raise ValueError("sigma_sq must be nonnegative")
    return signal + complex_normal(rng, signal.shape, np.broadcast_to(sigma_sq, signal.shape))


def quantize_reverse(
    estimates: np.ndarray, cov: np.ndarray, sigma_sq: float, rng: np.random.Generator
) -> np.ndarray:
    """Forwarded estimates under the reverse (subtractive) test channel.

    Models input = output + q with q ~ CN(0, sigma_sq*I) independent of the
    output, for inputs with covariance ``cov``. Realized as the jointly
    Gaussian construction: output = A @ input + residual, A = (cov -
    sigma_sq*I) cov^{-1}, residual ~ CN(0, sigma_sq*A) independent of the
    input. Accepts a single vector or a batch of row vectors.
    """
    cov = np.asarray(cov)
    n = cov.shape[0]
    shrunk = cov - sigma_sq * np.eye(n)
    scale = max(1.0, float(np.linalg.norm(cov)))
    if np.min(np.linalg.eigvalsh((shrunk + shrunk.conj().T) / 2)) < -1e-10 * scale:
        raise ValueError("reverse test channel infeasible: cov - sigma_sq*I is not PSD")
    gain = np.linalg.solve(cov, shrunk).conj().T        # (cov - s2 I) cov^{-1}
    resid_cov = shrunk - gain @ shrunk                   # equals sigma_sq * gain
    resid_cov = (resid_cov + resid_cov.conj().T) / 2
    eigvals, eigvecs = np.linalg.eigh(resid_cov)
    factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    single = estimates.ndim == 1
    est = estimates[None, :] if single else estimates
    white = complex_normal(rng, est.shape)
    out = est @ gain.T + white @ factor.T
    return out[0] if single else out


# --------------------------------------------------------------------------
# quantization plans
# --------------------------------------------------------------------------

_PLAN_FIELDS = {
    "CDCS": ("sigma_p_sq", "sigma_d_sq"),
    "CDES": ("sigma_p_sq", "sigma_d_sq"),
    "EDCS": ("sigma_sq",),
    "EDES": (),
}


@dataclass
class QuantizationPlan:
    """Per-AP quantization variances for one scheme.

    CDCS: sigma_p_sq quantizes the received pilot block, sigma_d_sq the
    received data block. CDES: sigma_p_sq quantizes the local channel
    estimate (reverse channel), sigma_d_sq the data block. EDCS: sigma_sq
    quantizes the refined channel estimate (reverse channel). EDES forwards
    no soft signals. Value +inf means no fronthaul is spent on the stream.
    """

    scheme: str
    sigma_p_sq: np.ndarray | None = None
    sigma_d_sq: np.ndarray | None = None
    sigma_sq: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in _PLAN_FIELDS:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        required = _PLAN_FIELDS[self.scheme]
        for name in ("sigma_p_sq", "sigma_d_sq", "sigma_sq"):
            value = getattr(self, name)
            if name in required:
                if value is None:
                    raise ValueError(f"{self.scheme} plan requires {name}")
                arr = np.asarray(value, dtype=float)
                if arr.ndim == 0:
                    arr = arr[None]
                if np.any(np.isnan(arr)) or np.any(arr <= 0):
                    raise ValueError(f"{name} entries must lie in (0, +inf]")
                setattr(self, name, arr)
            elif value is not None:
                raise ValueError(f"{self.scheme} plan does not use {name}")

    def num_aps(self) -> int:
        for name in _PLAN_FIELDS[self.scheme]:
            return len(getattr(self, name))
        return 0

    def feasibility_violations(self, config: SystemConfig) -> list[str]:
        """Reverse-channel feasibility checks that need scenario context."""
        problems = []
        if self.scheme == "CDES":
            for k in range(config.num_aps):
                bound = cdes_pilot_kind(config, k).identity_coeff
                v = self.sigma_p_sq[k]
                if math.isfinite(v) and v > bound * (1 + 1e-12):
                    problems.append(
                        f"sigma_p_sq[{k}]={v:g} exceeds reverse-channel bound {bound:g}"
                    )
        elif self.scheme == "EDCS":
            for k in range(config.num_aps):
                bound = edcs_estimate_kind(config, k).identity_coeff
                v = self.sigma_sq[k]
                if math.isfinite(v) and v > bound * (1 + 1e-12):
                    problems.append(
                        f"sigma_sq[{k}]={v:g} exceeds reverse-channel bound {bound:g}"
                    )
        return problems
