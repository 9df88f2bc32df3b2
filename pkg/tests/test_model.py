"""Geometry, steering, configuration, and sampling semantics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmn_splitsim.model import (
    H0,
    H1,
    APProfile,
    SystemConfig,
    angle_of_arrival,
    build_profiles,
    complex_normal,
    default_ap_positions,
    received_block_batch,
    rng_stream,
    sample_block,
    sample_channel,
    sample_channel_batch,
    sample_data_batch,
    sample_hypotheses,
    sample_pilot_batch,
    steering_matrix,
    steering_vector,
)


# --------------------------------------------------------------------------
# geometry oracles
# --------------------------------------------------------------------------


def test_angle_directly_above_is_zero():
    assert angle_of_arrival((20.0, 0.0), (20.0, 50.0)) == pytest.approx(0.0, abs=1e-12)


def test_angle_northeast_is_quarter_pi():
    assert angle_of_arrival((0.0, 0.0), (50.0, 50.0)) == pytest.approx(math.pi / 4, abs=1e-12)


def test_angle_northwest_is_minus_quarter_pi():
    assert angle_of_arrival((100.0, 0.0), (50.0, 50.0)) == pytest.approx(-math.pi / 4, abs=1e-12)


def test_angle_degenerate_raises():
    with pytest.raises(ValueError, match="degenerate geometry"):
        angle_of_arrival((20.0, 50.0), (20.0, 50.0))


# --------------------------------------------------------------------------
# steering-vector oracles
# --------------------------------------------------------------------------


def test_steering_boresight():
    np.testing.assert_allclose(steering_vector(0.0, 2), [1.0, 1.0], atol=1e-12)


def test_steering_endfire():
    np.testing.assert_allclose(steering_vector(math.pi / 2, 2), [1.0, -1.0], atol=1e-12)


def test_steering_three_antennas_half_sine():
    # sin(theta) = 1/2 -> phases 0, -pi/2, -pi
    np.testing.assert_allclose(
        steering_vector(math.asin(0.5), 3), [1.0, -1j, -1.0], atol=1e-12
    )


def test_steering_first_entry_always_one():
    for theta in np.linspace(-math.pi, math.pi, 17):
        assert steering_vector(theta, 4)[0] == pytest.approx(1.0)


@given(st.floats(-math.pi, math.pi, allow_nan=False), st.integers(1, 8))
def test_steering_entries_unit_modulus(theta, n_r):
    a = steering_vector(theta, n_r)
    np.testing.assert_allclose(np.abs(a), np.ones(n_r), atol=1e-12)


# --------------------------------------------------------------------------
# profiles
# --------------------------------------------------------------------------


def test_profile_covariance_boresight():
    cfg = SystemConfig(num_aps=1, ap_positions=[(20.0, 0.0)], target_position=(20.0, 50.0))
    (prof,) = build_profiles(cfg)
    np.testing.assert_allclose(prof.omega_g, 0.1 * np.array([[1, 1], [1, 1]]), atol=1e-12)


def test_profile_covariance_endfire():
    cfg = SystemConfig(
        num_aps=1,
        ap_positions=[(0.0, 0.0)],
        target_position=(50.0, 0.0 + 1e-12),  # almost along the array axis
    )
    (prof,) = build_profiles(cfg)
    np.testing.assert_allclose(
        prof.omega_g, 0.1 * np.array([[1, -1], [-1, 1]]), atol=1e-9
    )


def test_profile_covariance_trace_and_rank():
    cfg = SystemConfig(num_aps=3, antennas_per_ap=4)
    for prof in build_profiles(cfg):
        assert np.trace(prof.omega_g).real == pytest.approx(0.1 * 4)
        assert np.linalg.matrix_rank(prof.omega_g) == 1
        np.testing.assert_allclose(prof.omega_g, prof.omega_g.conj().T, atol=1e-12)


def test_steering_matrix_shape():
    cfg = SystemConfig(num_aps=3, antennas_per_ap=2)
    a = steering_matrix(build_profiles(cfg))
    assert a.shape == (3, 2)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def test_default_positions_span():
    pos = default_ap_positions(3)
    np.testing.assert_allclose(pos[:, 0], [0.0, 50.0, 100.0])
    np.testing.assert_allclose(pos[:, 1], 0.0)


def test_config_broadcasts_scalars():
    cfg = SystemConfig(num_aps=4, noise_var=2.0)
    np.testing.assert_allclose(cfg.noise_var, [2.0, 2.0, 2.0, 2.0])


def test_config_rejects_wrong_length():
    with pytest.raises(ValueError, match="noise_var"):
        SystemConfig(num_aps=3, noise_var=[1.0, 2.0])


def test_config_rejects_bad_durations():
    with pytest.raises(ValueError):
        SystemConfig(pilot_uses=10, total_uses=10)


def test_config_data_uses_derived():
    cfg = SystemConfig(pilot_uses=3, total_uses=10)
    assert cfg.data_uses == 7


def test_config_block_energy():
    cfg = SystemConfig(pilot_power=200.0, data_power=200.0, pilot_uses=2, total_uses=10)
    assert cfg.pilot_data_energy == pytest.approx(2000.0)


# --------------------------------------------------------------------------
# rng streams
# --------------------------------------------------------------------------


def test_rng_stream_reproducible_and_tag_sensitive():
    a1 = rng_stream(7, "detect", 0).standard_normal(5)
    a2 = rng_stream(7, "detect", 0).standard_normal(5)
    b = rng_stream(7, "detect", 1).standard_normal(5)
    c = rng_stream(7, "rate", 0).standard_normal(5)
    np.testing.assert_array_equal(a1, a2)
    assert not np.allclose(a1, b)
    assert not np.allclose(a1, c)


def test_complex_normal_variance():
    rng = rng_stream(0, "var-check")
    z = complex_normal(rng, (200_000,), 0.5)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(0.5, rel=0.02)
    assert np.mean(z).real == pytest.approx(0.0, abs=0.01)


# --------------------------------------------------------------------------
# channel sampling
# --------------------------------------------------------------------------


def test_channel_h0_has_no_target():
    cfg = SystemConfig()
    ch = sample_channel(cfg, build_profiles(cfg), H0, rng_stream(1, "ch"))
    assert np.all(ch.alpha == 0)
    assert np.all(ch.g == 0)
    np.testing.assert_array_equal(ch.h, ch.c)


def test_channel_h1_target_on_steering_direction():
    cfg = SystemConfig()
    profiles = build_profiles(cfg)
    ch = sample_channel(cfg, profiles, H1, rng_stream(2, "ch"))
    a = steering_matrix(profiles)
    np.testing.assert_allclose(ch.g, ch.alpha[:, None] * a, atol=1e-12)
    np.testing.assert_allclose(ch.h, ch.g + ch.c, atol=1e-12)


def test_channel_sample_covariance_matches_model():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(3, "cov")
    n = 60_000
    hyps = np.ones(n, dtype=np.int8)
    h = sample_channel_batch(cfg, profiles, hyps, rng)[:, 0, :]
    cov = h.T @ h.conj() / n  # E[h h^H]
    expected = 0.01 * np.eye(2) + profiles[0].omega_g
    np.testing.assert_allclose(cov, expected, atol=0.01)


def test_channel_batch_h0_covariance_is_clutter_only():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(4, "cov0")
    n = 60_000
    h = sample_channel_batch(cfg, profiles, np.zeros(n, dtype=np.int8), rng)[:, 0, :]
    cov = h.conj().T @ h / n
    np.testing.assert_allclose(cov, 0.01 * np.eye(2), atol=0.005)


def test_hypothesis_labels_match_prior():
    cfg = SystemConfig(p_target_present=0.25)
    labels = sample_hypotheses(cfg, 100_000, rng_stream(5, "hyp"))
    assert labels.mean() == pytest.approx(0.25, abs=0.01)


# --------------------------------------------------------------------------
# block sampling
# --------------------------------------------------------------------------


def test_pilot_energy_is_exact():
    cfg = SystemConfig(pilot_uses=2, total_uses=10)
    ch = sample_channel(cfg, build_profiles(cfg), H0, rng_stream(6, "blk"))
    blk = sample_block(cfg, ch, rng_stream(6, "blk2"))
    assert np.linalg.norm(blk.s_p) ** 2 == pytest.approx(2.0, rel=1e-12)
    assert np.linalg.norm(blk.x_p) ** 2 == pytest.approx(cfg.pilot_power * 2.0, rel=1e-12)


def test_pilot_batch_energy_exact_every_row():
    cfg = SystemConfig(pilot_uses=3, total_uses=10)
    x_p = sample_pilot_batch(cfg, 50, rng_stream(7, "pb"))
    np.testing.assert_allclose(
        np.linalg.norm(x_p, axis=1) ** 2, cfg.pilot_power * 3.0, rtol=1e-12
    )


def test_noiseless_block_is_pure_signal():
    cfg = SystemConfig()
    profiles = build_profiles(cfg)
    ch = sample_channel(cfg, profiles, H1, rng_stream(8, "nb"))
    blk = sample_block(cfg, ch, rng_stream(8, "nb2"), noiseless=True)
    expected = ch.h[:, :, None] * blk.x_p[None, None, :]
    np.testing.assert_allclose(blk.y_p, expected, atol=1e-12)
    assert np.all(blk.z_p == 0) and np.all(blk.z_d == 0)


def test_received_batch_noiseless_identity():
    cfg = SystemConfig()
    profiles = build_profiles(cfg)
    rng = rng_stream(9, "rb")
    hyps = sample_hypotheses(cfg, 10, rng)
    h = sample_channel_batch(cfg, profiles, hyps, rng)
    x = sample_data_batch(cfg, 10, rng)
    y = received_block_batch(cfg, h, x, rng, noiseless=True)
    assert y.shape == (10, cfg.num_aps, cfg.antennas_per_ap, cfg.data_uses)
    np.testing.assert_allclose(y[3], h[3][:, :, None] * x[3][None, None, :], atol=1e-12)


def test_received_batch_noise_variance():
    cfg = SystemConfig(num_aps=1, noise_var=2.0)
    rng = rng_stream(10, "nv")
    n = 20_000
    h = np.zeros((n, 1, 2), dtype=complex)
    x = sample_data_batch(cfg, n, rng)
    y = received_block_batch(cfg, h, x, rng)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(2.0, rel=0.03)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_data_symbols_unit_power_prior(seed):
    cfg = SystemConfig(data_power=4.0, pilot_power=4.0)
    x = sample_data_batch(cfg, 4, rng_stream(seed, "dp"))
    assert x.shape == (4, cfg.data_uses)
    # scaled by sqrt(P_d); per-symbol second moment is P_d in expectation
    assert np.isfinite(x).all()
