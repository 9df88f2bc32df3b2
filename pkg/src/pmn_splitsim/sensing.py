"""Neyman-Pearson detection, threshold calibration, vote fusion, ROC and
accuracy metrics, and Bhattacharyya distances.

All detectors share one structure: the observation is whitened so the
no-target hypothesis is unit-variance white noise, and the test statistic is
the quadratic form r^H T r with T = DΛD (DΛD + I)^{-1}. Because every
per-block signal covariance is rank one (a scaled steering outer product),
T acts as a weighted projection onto the steering direction and statistics
reduce to weighted squared inner products.

Scheme mapping:

- CDCS: the CPU senses from quantized received pilot blocks of all APs;
  one N_r-block per pilot use per AP.
- CDES / EDES: each AP senses locally from its own received pilot block
  (same detector family, no fronthaul quantization in the path) and the CPU
  fuses the per-AP votes by majority.
- EDCS: the CPU senses from the forwarded refined channel estimates; one
  N_r-block per AP, whitened by the total block energy and the forwarding
  quantization noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import H0, H1, APProfile, SystemConfig, steering_matrix

# --------------------------------------------------------------------------
# detector specification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectorSpec:
    """Whitened quadratic detector with per-AP rank-one signal structure.

    ``whiten_coeff[k]`` scales AP k's raw observation blocks to unit noise
    floor (D_k = whiten_coeff[k] * I). ``load[k]`` is the single nonzero
    eigenvalue of D_k Λ_k D_k and ``unit_dirs[k]`` its eigenvector; ``uses``
    is the number of N_r-blocks the statistic spans per AP (pilot uses for
    pilot-domain sensing, 1 for estimate-domain sensing).
    """

    scheme: str
    whiten_coeff: np.ndarray
    load: np.ndarray
    unit_dirs: np.ndarray
    uses: int
    nu_p: float | None = None

    @property
    def num_aps(self) -> int:
        return self.unit_dirs.shape[0]

    @property
    def antennas(self) -> int:
        return self.unit_dirs.shape[1]

    @property
    def full_dim(self) -> int:
        return self.num_aps * self.antennas * self.uses

    def with_threshold(self, nu_p: float) -> "DetectorSpec":
        return replace(self, nu_p=nu_p)

    # ---- dense materializations (tests and oracles; pipelines use the
    # rank-one fast paths below) ----

    def _blockdiag(self, per_ap_block) -> np.ndarray:
        n = self.antennas * self.uses
        out = np.zeros((self.num_aps * n, self.num_aps * n), dtype=complex)
        for k in range(self.num_aps):
            out[k * n : (k + 1) * n, k * n : (k + 1) * n] = per_ap_block(k)
        return out

    def whitening_matrix(self) -> np.ndarray:
        return self._blockdiag(
            lambda k: self.whiten_coeff[k] * np.eye(self.antennas * self.uses)
        )

    def signal_covariance(self) -> np.ndarray:
        def block(k):
            v = self.unit_dirs[k]
            lam = (self.load[k] / self.whiten_coeff[k] ** 2) * np.outer(v, v.conj())
            return np.kron(np.eye(self.uses), lam)

        return self._blockdiag(block)

    def test_matrix(self) -> np.ndarray:
        def block(k):
            v = self.unit_dirs[k]
            x = self.load[k]
            t = (x / (1 + x)) * np.outer(v, v.conj())
            return np.kron(np.eye(self.uses), t)

        return self._blockdiag(block)


def build_detector(scheme: str, config: SystemConfig, profiles: list[APProfile], plan=None) -> DetectorSpec:
    """Assemble the scheme's whitened detector from the scenario and the
    quantization plan (plan is unused for CDES/EDES; missing plan entries
    default to no quantization)."""
    a = steering_matrix(profiles)
    unit_dirs = a / np.linalg.norm(a, axis=1, keepdims=True)
    n_r = config.antennas_per_ap
    sig = config.target_gain_var * n_r  # rank-one eigenvalue of Omega_g

    if scheme in ("CDCS", "CDES", "EDES"):
        sigma_p = np.zeros(config.num_aps)
        if scheme == "CDCS" and plan is not None:
            sigma_p = np.asarray(plan.sigma_p_sq, dtype=float)
        denom = config.pilot_power * config.clutter_var + config.noise_var + sigma_p
        with np.errstate(divide="ignore"):
            coeff = 1.0 / np.sqrt(denom)
        load = np.where(np.isinf(denom), 0.0, config.pilot_power * sig / denom)
        uses = config.pilot_uses
    elif scheme == "EDCS":
        sigma_sq = np.zeros(config.num_aps)
        if plan is not None:
            sigma_sq = np.asarray(plan.sigma_sq, dtype=float)
        energy = config.pilot_data_energy
        denom = energy * (config.clutter_var + sigma_sq) + config.noise_var
        if np.any(denom <= 0):
            raise ValueError("whitening infeasible: nonpositive variance after compression")
        with np.errstate(divide="ignore", invalid="ignore"):
            coeff = np.where(np.isinf(sigma_sq), 0.0, np.sqrt(energy / denom))
        load = np.where(np.isinf(sigma_sq), 0.0, energy * sig / denom)
        uses = 1
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return DetectorSpec(
        scheme=scheme,
        whiten_coeff=np.where(np.isfinite(coeff), coeff, 0.0),
        load=load,
        unit_dirs=unit_dirs,
        uses=uses,
    )


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


def quadratic_statistic(spec: DetectorSpec, r: np.ndarray) -> float:
    """r^H T r for a full whitened observation vector (all APs and uses
    concatenated, AP-major then use-major then antenna)."""
    r = np.asarray(r)
    if r.shape != (spec.full_dim,):
        raise ValueError(
            f"dimension mismatch: expected vector of length {spec.full_dim}, got {r.shape}"
        )
    blocks = r.reshape(spec.num_aps, spec.uses, spec.antennas)
    proj = np.abs(np.einsum("kur,kr->ku", blocks, spec.unit_dirs.conj())) ** 2
    weights = spec.load / (1 + spec.load)
    return float(np.sum(weights * proj.sum(axis=1)))


def whiten_blocks(spec: DetectorSpec, obs: np.ndarray) -> np.ndarray:
    """Apply per-AP whitening to observation blocks (..., K, N_r, uses)."""
    return obs * spec.whiten_coeff[:, None, None]


def statistic_blocks(spec: DetectorSpec, r: np.ndarray) -> np.ndarray:
    """Per-AP statistics from whitened blocks (..., K, N_r, uses) -> (..., K)."""
    proj = np.abs(np.einsum("...kru,kr->...ku", r, spec.unit_dirs.conj())) ** 2
    weights = spec.load / (1 + spec.load)
    return np.einsum("...ku,k->...k", proj, weights)


def cloud_statistic(spec: DetectorSpec, r: np.ndarray) -> np.ndarray:
    """Single fused statistic summing all APs' contributions (CDCS, EDCS)."""
    return statistic_blocks(spec, r).sum(axis=-1)


def fused_edge_statistic(per_ap_stats: np.ndarray) -> np.ndarray:
    """Scalar equivalent of majority fusion with a common threshold.

    With K APs voting H1 when their statistic exceeds the shared threshold,
    the majority decision (ties to H1) is H1 exactly when the
    ceil(K/2)-th largest per-AP statistic exceeds the threshold; that order
    statistic therefore acts as a scalar fused statistic.
    """
    k = per_ap_stats.shape[-1]
    m = (k + 1) // 2
    return np.partition(per_ap_stats, k - m, axis=-1)[..., k - m]


# --------------------------------------------------------------------------
# decisions and fusion
# --------------------------------------------------------------------------


@dataclass
class SensingOutcome:
    """Result of one sensing decision."""

    decision: int
    statistic: float
    votes: np.ndarray | None = None
    n_h0_votes: int | None = None

    def __post_init__(self):
        if self.statistic < 0:
            raise ValueError("statistic must be nonnegative")


def majority_fuse(votes) -> tuple[int, int]:
    """CPU majority rule over per-AP votes. Returns (decision, count of H0
    votes); an exact tie resolves to H1 (detection-favoring)."""
    votes = np.asarray(votes)
    if votes.size == 0:
        raise ValueError("need at least one vote")
    n_h0 = int(np.sum(votes == H0))
    decision = H0 if n_h0 > votes.size / 2 else H1
    return decision, n_h0


def calibrate_threshold(h0_statistics, target_pfa: float) -> float:
    """Empirical threshold for a tolerated false-alarm probability: the
    (1 - target_pfa) quantile of no-target statistics, higher-interpolation
    convention."""
    stats = np.asarray(h0_statistics, dtype=float)
    if stats.size == 0:
        raise ValueError("need at least one no-target statistic")
    if not 0.0 < target_pfa < 1.0:
        raise ValueError("target_pfa must lie in (0, 1)")
    return float(np.quantile(stats, 1.0 - target_pfa, method="higher"))


# --------------------------------------------------------------------------
# ROC and accuracy
# --------------------------------------------------------------------------


@dataclass
class ROCCurve:
    """Empirical operating points swept over the pooled statistics."""

    points: np.ndarray  # (m, 2) columns (P_fa, P_de), threshold increasing
    n_h0: int
    n_h1: int


def roc_curve(h0_stats, h1_stats) -> ROCCurve:
    """Sweep the decision threshold over every observed statistic value;
    each point is (fraction of H0 stats above, fraction of H1 stats above).
    Includes the all-alarm point (1, 1) and ends at (0, 0)."""
    h0 = np.sort(np.asarray(h0_stats, dtype=float))
    h1 = np.sort(np.asarray(h1_stats, dtype=float))
    if h0.size == 0 or h1.size == 0:
        raise ValueError("need statistics under both hypotheses")
    thresholds = np.unique(np.concatenate([h0, h1]))
    p_fa = 1.0 - np.searchsorted(h0, thresholds, side="right") / h0.size
    p_de = 1.0 - np.searchsorted(h1, thresholds, side="right") / h1.size
    points = np.column_stack([np.concatenate([[1.0], p_fa]), np.concatenate([[1.0], p_de])])
    return ROCCurve(points=points, n_h0=int(h0.size), n_h1=int(h1.size))


def sensing_accuracy(p_de, p_fa):
    """Mean of the true-positive and true-negative probabilities."""
    p_de = np.asarray(p_de, dtype=float)
    p_fa = np.asarray(p_fa, dtype=float)
    if np.any((p_de < 0) | (p_de > 1)) or np.any((p_fa < 0) | (p_fa > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = 0.5 * (p_de + 1.0 - p_fa)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Bhattacharyya distances (natural log)
# --------------------------------------------------------------------------


def bhattacharyya_gaussian(sigma1: np.ndarray, sigma2: np.ndarray) -> float:
    """Distance between zero-mean complex Gaussians with the given
    covariances: ln det((S1+S2)/2) - (ln det S1 + ln det S2)/2."""
    s1 = np.asarray(sigma1)
    s2 = np.asarray(sigma2)
    for s in (s1, s2):
        if np.linalg.eigvalsh(s)[0] <= 0:
            raise ValueError("covariance must be strictly positive definite")
    mid = np.linalg.slogdet((s1 + s2) / 2)[1]
    return float(mid - 0.5 * (np.linalg.slogdet(s1)[1] + np.linalg.slogdet(s2)[1]))


def _per_block_distance(load: np.ndarray) -> np.ndarray:
    """B for CN(0, I) vs CN(0, I + x vv^H) per block, x = load."""
    return np.log1p(load / 2) - 0.5 * np.log1p(load)


def bhattacharyya_cdcs(config: SystemConfig, sigma_p_sq) -> float:
    """Closed-form distance for pilot-domain sensing with additive pilot
    quantization sigma_p_sq per AP; sums over APs and pilot uses. With
    sigma_p_sq = 0 this is also the per-AP edge-sensing distance (CDES and
    EDES local detectors)."""
    s = np.broadcast_to(np.asarray(sigma_p_sq, dtype=float), (config.num_aps,))
    denom = config.pilot_power * config.clutter_var + config.noise_var + s
    load = np.where(
        np.isinf(denom),
        0.0,
        config.pilot_power * config.target_gain_var * config.antennas_per_ap / denom,
    )
    return float(config.pilot_uses * np.sum(_per_block_distance(load)))


def bhattacharyya_edcs(config: SystemConfig, sigma_sq) -> float:
    """Closed-form distance for estimate-domain sensing after forwarding
    with quantization sigma_sq per AP; one block per AP, no pilot-use
    multiplier. Strictly decreasing in each sigma_sq entry."""
    s = np.broadcast_to(np.asarray(sigma_sq, dtype=float), (config.num_aps,))
    if np.any(s < 0):
        raise ValueError("sigma_sq must be nonnegative")
    energy = config.pilot_data_energy
    denom = energy * (config.clutter_var + s) + config.noise_var
    lam = np.where(np.isinf(s), 0.0, energy / denom)
    load = lam * config.target_gain_var * config.antennas_per_ap
    return float(np.sum(_per_block_distance(load)))
