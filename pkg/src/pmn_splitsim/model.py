"""Scenario configuration, geometry, steering vectors, and Monte Carlo
sampling of channels and signal blocks.

Conventions used throughout the package:

- All powers and variances are linear (dB conversion happens at the config
  boundary, in the CLI).
- Complex Gaussian CN(0, v) means independent real/imaginary parts each with
  variance v/2.
- Per-AP quantities are numpy arrays of length ``num_aps``; channel vectors
  are indexed ``[ap, antenna]`` and signal blocks ``[ap, antenna, use]``.
- Batched variants add a leading trial axis and are the workhorses of the
  Monte Carlo pipelines; the single-draw operations define the semantics.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

H0 = 0
H1 = 1

# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def _per_ap_array(value, num_aps: int, name: str) -> np.ndarray:
    """Broadcast a scalar or length-K sequence to a float array of length K."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(num_aps, float(arr))
    if arr.shape != (num_aps,):
        raise ValueError(f"{name} must be a scalar or a length-{num_aps} sequence")
    return arr


def default_ap_positions(num_aps: int, x_min: float = 0.0, x_max: float = 100.0) -> np.ndarray:
    """APs spaced uniformly on the x axis between x_min and x_max, at y = 0."""
    if num_aps == 1:
        xs = np.array([(x_min + x_max) / 2.0])
    else:
        xs = np.linspace(x_min, x_max, num_aps)
    return np.stack([xs, np.zeros(num_aps)], axis=1)


@dataclass
class SystemConfig:
    """Full scenario description for one experiment point.

    ``pilot_power`` / ``data_power`` are linear transmit powers; durations are
    in channel uses with ``total_uses = pilot_uses + data_uses``. Per-AP fields
    accept scalars and are broadcast.
    """

    num_aps: int = 3
    antennas_per_ap: int = 2
    pilot_uses: int = 2
    total_uses: int = 10
    pilot_power: float = 200.0
    data_power: float = 200.0
    target_gain_var: object = 0.1
    clutter_var: object = 0.01
    noise_var: object = 1.0
    fronthaul_capacity: object = 10.0
    p_target_present: float = 0.5
    ap_positions: object = None
    target_position: object = (20.0, 50.0)
    ue_position: object = (50.0, 50.0)

    def __post_init__(self):
        k = self.num_aps
        if k < 1 or self.antennas_per_ap < 1:
            raise ValueError("counts must be >= 1")
        if self.pilot_uses < 1 or self.total_uses <= self.pilot_uses:
            raise ValueError("need 1 <= pilot_uses < total_uses")
        if self.pilot_power <= 0 or self.data_power <= 0:
            raise ValueError("powers must be positive")
        if not 0.0 <= self.p_target_present <= 1.0:
            raise ValueError("p_target_present must lie in [0, 1]")
        self.target_gain_var = _per_ap_array(self.target_gain_var, k, "target_gain_var")
        self.clutter_var = _per_ap_array(self.clutter_var, k, "clutter_var")
        self.noise_var = _per_ap_array(self.noise_var, k, "noise_var")
        self.fronthaul_capacity = _per_ap_array(self.fronthaul_capacity, k, "fronthaul_capacity")
        if np.any(self.target_gain_var <= 0) or np.any(self.clutter_var <= 0) or np.any(self.noise_var <= 0):
            raise ValueError("variances must be positive")
        if np.any(self.fronthaul_capacity < 0):
            raise ValueError("fronthaul_capacity must be nonnegative")
        if self.ap_positions is None:
            self.ap_positions = default_ap_positions(k)
        else:
            self.ap_positions = np.asarray(self.ap_positions, dtype=float)
            if self.ap_positions.shape != (k, 2):
                raise ValueError("ap_positions must have shape (num_aps, 2)")
        self.target_position = np.asarray(self.target_position, dtype=float)
        self.ue_position = np.asarray(self.ue_position, dtype=float)

    @property
    def data_uses(self) -> int:
        return self.total_uses - self.pilot_uses

    @property
    def pilot_data_energy(self) -> np.ndarray:
        """Total forwarded-block signal energy P_p*T_p + P_d*T_d (scalar)."""
        return self.pilot_power * self.pilot_uses + self.data_power * self.data_uses


# --------------------------------------------------------------------------
# geometry and steering
# --------------------------------------------------------------------------


def angle_of_arrival(ap_position, target_position) -> float:
    """Angle of the target seen from an AP, measured from the +y boresight of
    a linear array laid along the x axis. Returns radians in (-pi, pi]."""
    ap = np.asarray(ap_position, dtype=float)
    tgt = np.asarray(target_position, dtype=float)
    dx = tgt[0] - ap[0]
    dy = tgt[1] - ap[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError("degenerate geometry: AP and target coincide")
    return math.atan2(dx, dy)


def steering_vector(theta: float, n_r: int) -> np.ndarray:
    """Uniform-linear-array response: entry i is exp(-j*pi*i*sin(theta))."""
    if n_r < 1:
        raise ValueError("need at least one antenna")
    idx = np.arange(n_r)
    return np.exp(-1j * np.pi * idx * math.sin(theta))


@dataclass(frozen=True)
class APProfile:
    """Geometry-derived per-AP quantities: arrival angle, steering vector,
    and the rank-one target-return covariance."""

    theta: float
    steering: np.ndarray
    omega_g: np.ndarray


def build_profiles(config: SystemConfig) -> list[APProfile]:
    profiles = []
    for k in range(config.num_aps):
        theta = angle_of_arrival(config.ap_positions[k], config.target_position)
        a = steering_vector(theta, config.antennas_per_ap)
        omega_g = config.target_gain_var[k] * np.outer(a, a.conj())
        profiles.append(APProfile(theta=theta, steering=a, omega_g=omega_g))
    return profiles


def steering_matrix(profiles: list[APProfile]) -> np.ndarray:
    """Stack per-AP steering vectors into shape (K, N_r)."""
    return np.stack([p.steering for p in profiles], axis=0)


# --------------------------------------------------------------------------
# RNG streams
# --------------------------------------------------------------------------


def rng_stream(master_seed: int, *tags) -> np.random.Generator:
    """Derive a named, reproducible random stream from a master seed.

    Tags (strings or ints) are folded into a SeedSequence spawn key, so every
    (seed, tags) pair yields the same stream regardless of call order or
    worker count. String tags are hashed with crc32, which is stable across
    platforms and processes.
    """
    key = tuple(
        zlib.crc32(t.encode("utf-8")) if isinstance(t, str) else int(t) for t in tags
    )
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=master_seed, spawn_key=key)))


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Draw CN(0, var) entries of the given shape."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


# --------------------------------------------------------------------------
# channel and block sampling
# --------------------------------------------------------------------------


@dataclass
class ChannelRealization:
    hypothesis: int
    h: np.ndarray          # (K, N_r) total channel
    g: np.ndarray          # (K, N_r) target return, zero under H0
    c: np.ndarray          # (K, N_r) clutter
    alpha: np.ndarray      # (K,) target gains, zero under H0


def sample_channel(config: SystemConfig, profiles: list[APProfile], hypothesis: int, rng) -> ChannelRealization:
    """One channel block: clutter always; a single target-gain draw per AP
    under H1 (slow fluctuation: one draw per coherence block)."""
    k, n_r = config.num_aps, config.antennas_per_ap
    c = complex_normal(rng, (k, n_r), config.clutter_var[:, None])
    alpha = np.zeros(k, dtype=complex)
    g = np.zeros((k, n_r), dtype=complex)
    if hypothesis == H1:
        alpha = complex_normal(rng, (k,), config.target_gain_var)
        a = steering_matrix(profiles)
        g = alpha[:, None] * a
    return ChannelRealization(hypothesis=hypothesis, h=g + c, g=g, c=c, alpha=alpha)


@dataclass
class BlockSignals:
    s_p: np.ndarray        # (T_p,) unit-power pilot symbols, ||s_p||^2 = T_p
    x_p: np.ndarray        # (T_p,) transmitted pilot
    s_d: np.ndarray        # (T_d,) data symbols
    x_d: np.ndarray        # (T_d,) transmitted data
    y_p: np.ndarray        # (K, N_r, T_p) received pilot
    y_d: np.ndarray        # (K, N_r, T_d) received data
    z_p: np.ndarray
    z_d: np.ndarray


def sample_block(config: SystemConfig, channels: ChannelRealization, rng, noiseless: bool = False) -> BlockSignals:
    """One transmission block over the sampled channel.

    The pilot is drawn Gaussian then rescaled so its energy is exactly T_p,
    making the pilot-estimator error variance match the closed forms exactly.
    Data symbols stay unscaled Gaussian. ``noiseless`` is a test hook.
    """
    t_p, t_d = config.pilot_uses, config.data_uses
    s_p = complex_normal(rng, (t_p,))
    s_p = s_p * math.sqrt(t_p) / np.linalg.norm(s_p)
    x_p = math.sqrt(config.pilot_power) * s_p
    s_d = complex_normal(rng, (t_d,))
    x_d = math.sqrt(config.data_power) * s_d
    k, n_r = config.num_aps, config.antennas_per_ap
    if noiseless:
        z_p = np.zeros((k, n_r, t_p), dtype=complex)
        z_d = np.zeros((k, n_r, t_d), dtype=complex)
    else:
        z_p = complex_normal(rng, (k, n_r, t_p), config.noise_var[:, None, None])
        z_d = complex_normal(rng, (k, n_r, t_d), config.noise_var[:, None, None])
    y_p = channels.h[:, :, None] * x_p[None, None, :] + z_p
    y_d = channels.h[:, :, None] * x_d[None, None, :] + z_d
    return BlockSignals(s_p=s_p, x_p=x_p, s_d=s_d, x_d=x_d, y_p=y_p, y_d=y_d, z_p=z_p, z_d=z_d)


# --------------------------------------------------------------------------
# batched sampling (trial axis first)
# --------------------------------------------------------------------------


def sample_hypotheses(config: SystemConfig, n: int, rng) -> np.ndarray:
    """Bernoulli(p_target_present) hypothesis labels for n trials."""
    return (rng.random(n) < config.p_target_present).astype(np.int8)


def sample_channel_batch(config: SystemConfig, profiles, hypotheses: np.ndarray, rng) -> np.ndarray:
    """Channels for a batch of trials; returns h with shape (n, K, N_r).

    Target gains are drawn for every trial and masked by the hypothesis so
    the random stream consumption is independent of the hypothesis pattern
    (this keeps common-random-number comparisons aligned).
    """
    n = hypotheses.shape[0]
    k, n_r = config.num_aps, config.antennas_per_ap
    c = complex_normal(rng, (n, k, n_r), config.clutter_var[None, :, None])
    alpha = complex_normal(rng, (n, k), config.target_gain_var[None, :])
    alpha = alpha * hypotheses[:, None]
    a = steering_matrix(profiles)
    return alpha[:, :, None] * a[None, :, :] + c


def sample_pilot_batch(config: SystemConfig, n: int, rng) -> np.ndarray:
    """Rescaled pilot symbol vectors, shape (n, T_p)."""
    t_p = config.pilot_uses
    s_p = complex_normal(rng, (n, t_p))
    s_p = s_p * (math.sqrt(t_p) / np.linalg.norm(s_p, axis=1))[:, None]
    return math.sqrt(config.pilot_power) * s_p


def sample_data_batch(config: SystemConfig, n: int, rng) -> np.ndarray:
    """Data symbol vectors, shape (n, T_d)."""
    return math.sqrt(config.data_power) * complex_normal(rng, (n, config.data_uses))


def received_block_batch(config: SystemConfig, h: np.ndarray, x: np.ndarray, rng, noiseless: bool = False) -> np.ndarray:
    """Received signal h x^T + Z for a batch; shapes (n,K,N_r), (n,T) ->
    (n, K, N_r, T)."""
    y = h[:, :, :, None] * x[:, None, None, :]
    if not noiseless:
        y = y + complex_normal(rng, y.shape, config.noise_var[None, :, None, None])
    return y
