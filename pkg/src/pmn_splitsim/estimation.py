"""Channel estimation from pilots, decision-directed refinement, and
second-moment bookkeeping.

Two families of covariance helpers coexist deliberately:

- ``estimate_second_moments`` reproduces the reported closed-form
  second-moment expressions verbatim, including their subtractive error
  terms, clamping to PSD (with a warning) when a configuration drives them
  negative. These are bookkeeping/reporting values.
- ``physical_estimate_covariance`` returns the covariance the sampled
  estimates actually have (estimation error adds to the channel
  covariance). The Monte Carlo pipelines and reverse-channel feasibility
  logic use these, because the reverse test channel's construction requires
  the true second moment of its input.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import APProfile, SystemConfig

PRIOR = "prior"


class CovarianceClampWarning(UserWarning):
    """A closed-form second-moment expression went indefinite and was
    floored to the nearest PSD matrix."""


@dataclass
class ChannelEstimate:
    """Per-AP channel estimates at the successive processing stages."""

    h_tilde: np.ndarray              # pilot-based estimate, (K, N_r)
    h_bar: np.ndarray | None = None  # whole-block refined estimate (EDCS)
    h_hat: np.ndarray | None = None  # post-fronthaul compressed estimate
    error_variance: np.ndarray | None = None  # per-entry, per AP


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


def _matched_filter(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y @ conj(x) / ||x||^2 over the trailing (time) axis, broadcasting a
    batch of symbol vectors against per-AP receive blocks."""
    y = np.asarray(y)
    x = np.asarray(x)
    while x.ndim < y.ndim - 1:
        x = x[..., None, :]
    energy = np.sum(np.abs(x) ** 2, axis=-1)
    if not np.all(energy > 0):
        raise ValueError("zero pilot: cannot estimate from an all-zero training signal")
    return np.einsum("...rt,...t->...r", y, x.conj()) / energy[..., None]


def ml_estimate(y_p: np.ndarray, x_p: np.ndarray) -> np.ndarray:
    """Maximum-likelihood channel estimate from the pilot block:
    h_tilde = Y_p x_p^* / ||x_p||^2. Accepts single blocks (N_r, T_p) or
    batches (..., N_r, T_p) with symbol vectors broadcast accordingly."""
    return _matched_filter(y_p, x_p)


def refine_estimate(y_p: np.ndarray, y_d: np.ndarray, x_p: np.ndarray, x_d_decoded: np.ndarray) -> np.ndarray:
    """Whole-block ML estimate using the decoded data symbols as extra
    training: the pilot and data blocks are concatenated in time. Assumes
    the decode is correct. Equals ml_estimate when the data block is empty."""
    y = np.concatenate([np.asarray(y_p), np.asarray(y_d)], axis=-1)
    x = np.concatenate([np.asarray(x_p), np.asarray(x_d_decoded)], axis=-1)
    return _matched_filter(y, x)


def pilot_error_variance(config: SystemConfig, sigma_p_sq=0.0) -> np.ndarray:
    """Per-entry variance of the pilot-based estimation error, per AP.
    sigma_p_sq is the additive quantization variance on the pilot block
    (zero when the signal is not quantized before estimation)."""
    s = np.broadcast_to(np.asarray(sigma_p_sq, dtype=float), (config.num_aps,))
    return (config.noise_var + s) / (config.pilot_power * config.pilot_uses)


def refined_error_variance(config: SystemConfig) -> np.ndarray:
    """Per-entry variance of the whole-block refined estimation error."""
    return config.noise_var / config.pilot_data_energy


# --------------------------------------------------------------------------
# second moments
# --------------------------------------------------------------------------


def _rank_one_weight(config: SystemConfig, hypothesis_or_prior) -> float:
    if hypothesis_or_prior == PRIOR:
        return config.p_target_present
    if hypothesis_or_prior in (0, 1):
        return float(hypothesis_or_prior)
    raise ValueError("hypothesis_or_prior must be 0, 1, or 'prior'")


def _clamp_psd(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals[0] >= 0:
        return matrix
    warnings.warn(
        "second-moment formula produced a negative eigenvalue "
        f"({eigvals[0]:.4g}); clamped to PSD",
        CovarianceClampWarning,
        stacklevel=3,
    )
    clipped = np.clip(eigvals, 0.0, None)
    return (eigvecs * clipped) @ eigvecs.conj().T


def estimate_second_moments(
    scheme: str,
    config: SystemConfig,
    profiles: list[APProfile],
    plan=None,
    hypothesis_or_prior=PRIOR,
) -> list[np.ndarray]:
    """Reported per-AP second moments of the scheme's channel estimate.

    These reproduce the closed-form bookkeeping expressions as printed,
    subtractive error terms included; indefinite results are floored to PSD
    with a CovarianceClampWarning. For physically sampled covariances use
    ``physical_estimate_covariance``.

    CDCS under a hypothesis gives the pilot-estimate covariance (error terms
    subtracted, including the pilot quantization from ``plan``); CDCS under
    the prior gives the prior-weighted channel covariance (used by the raw
    signal fronthaul bounds). CDES/EDES give the unquantized local-estimate
    forms. EDCS gives the compressed refined-estimate form, subtracting the
    plan's estimate quantization variance.
    """
    weight = _rank_one_weight(config, hypothesis_or_prior)
    p_energy = config.pilot_power * config.pilot_uses
    out = []
    for k in range(config.num_aps):
        eye = np.eye(config.antennas_per_ap)
        if scheme == "CDCS" and hypothesis_or_prior == PRIOR:
            coeff = config.clutter_var[k]
        elif scheme == "CDCS":
            sigma_p = plan.sigma_p_sq[k] if plan is not None else 0.0
            coeff = (config.clutter_var[k] * p_energy - (config.noise_var[k] + sigma_p)) / p_energy
        elif scheme in ("CDES", "EDES"):
            coeff = (config.clutter_var[k] * p_energy - config.noise_var[k]) / p_energy
        elif scheme == "EDCS":
            sigma_k = plan.sigma_sq[k] if plan is not None else 0.0
            coeff = config.clutter_var[k] - sigma_k + config.noise_var[k] / config.pilot_data_energy
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        out.append(_clamp_psd(coeff * eye + weight * profiles[k].omega_g))
    return out


def physical_estimate_covariance(
    scheme: str,
    config: SystemConfig,
    profiles: list[APProfile],
    k: int,
    hypothesis_or_prior,
    plan=None,
) -> np.ndarray:
    """Actual covariance of the sampled (pre-compression) estimate at AP k:
    channel covariance plus the estimation-error variance. Used to drive the
    reverse test channel and whitening, where the construction needs the
    true input second moment."""
    weight = _rank_one_weight(config, hypothesis_or_prior)
    if scheme == "CDCS":
        sigma_p = plan.sigma_p_sq[k] if plan is not None else 0.0
        err = (config.noise_var[k] + sigma_p) / (config.pilot_power * config.pilot_uses)
    elif scheme in ("CDES", "EDES"):
        err = config.noise_var[k] / (config.pilot_power * config.pilot_uses)
    elif scheme == "EDCS":
        err = config.noise_var[k] / config.pilot_data_energy
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    eye = np.eye(config.antennas_per_ap)
    return (config.clutter_var[k] + err) * eye + weight * profiles[k].omega_g
