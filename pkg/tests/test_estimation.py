"""Channel estimation, refinement, and second-moment bookkeeping."""

import math

import numpy as np
import pytest

from pmn_splitsim.estimation import (
    PRIOR,
    CovarianceClampWarning,
    estimate_second_moments,
    ml_estimate,
    physical_estimate_covariance,
    pilot_error_variance,
    refine_estimate,
    refined_error_variance,
)
from pmn_splitsim.fronthaul import QuantizationPlan, quantize_additive
from pmn_splitsim.model import (
    H0,
    H1,
    SystemConfig,
    build_profiles,
    complex_normal,
    rng_stream,
    sample_channel_batch,
    sample_data_batch,
    sample_pilot_batch,
    received_block_batch,
)

CFG = SystemConfig()  # P=200, T_p=2, T=10, sigma_c^2=0.01, sigma_z^2=1


# --------------------------------------------------------------------------
# ML estimate
# --------------------------------------------------------------------------


def test_ml_estimate_noiseless_recovers_channel():
    rng = rng_stream(30, "ml0")
    h = complex_normal(rng, (2,))
    x_p = complex_normal(rng, (4,))
    y_p = h[:, None] * x_p[None, :]
    np.testing.assert_allclose(ml_estimate(y_p, x_p), h, atol=1e-12)


def test_ml_estimate_zero_pilot_raises():
    with pytest.raises(ValueError, match="zero pilot"):
        ml_estimate(np.ones((2, 3), dtype=complex), np.zeros(3, dtype=complex))


def test_ml_estimate_linear_in_observation():
    rng = rng_stream(31, "ml-lin")
    x_p = complex_normal(rng, (3,))
    y1 = complex_normal(rng, (2, 3))
    y2 = complex_normal(rng, (2, 3))
    a, b = 1.7 - 0.3j, -0.8 + 2.1j
    np.testing.assert_allclose(
        ml_estimate(a * y1 + b * y2, x_p),
        a * ml_estimate(y1, x_p) + b * ml_estimate(y2, x_p),
        atol=1e-12,
    )


def test_ml_estimate_batched_shapes():
    rng = rng_stream(32, "ml-b")
    n, k, n_r, t_p = 6, 3, 2, 2
    y = complex_normal(rng, (n, k, n_r, t_p))
    x = complex_normal(rng, (n, t_p))
    out = ml_estimate(y, x)
    assert out.shape == (n, k, n_r)
    np.testing.assert_allclose(out[2, 1], ml_estimate(y[2, 1], x[2]), atol=1e-12)


def test_quantized_pilot_error_variance():
    """Estimating from an additively quantized pilot block: per-entry error
    variance is (noise + quant) / pilot energy."""
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(33, "ml-var")
    n = 100_000
    hyps = np.zeros(n, dtype=np.int8)
    h = sample_channel_batch(cfg, profiles, hyps, rng)
    x_p = sample_pilot_batch(cfg, n, rng)
    y_p = received_block_batch(cfg, h, x_p, rng)
    y_hat = quantize_additive(y_p, 1.0, rng)
    err = ml_estimate(y_hat, x_p) - h
    expected = (1.0 + 1.0) / (cfg.pilot_power * cfg.pilot_uses)
    assert np.mean(np.abs(err) ** 2) == pytest.approx(expected, rel=0.03)
    assert pilot_error_variance(cfg, 1.0)[0] == pytest.approx(expected)


def test_unquantized_pilot_error_variance():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(34, "ml-var0")
    n = 100_000
    h = sample_channel_batch(cfg, profiles, np.ones(n, dtype=np.int8), rng)
    x_p = sample_pilot_batch(cfg, n, rng)
    y_p = received_block_batch(cfg, h, x_p, rng)
    err = ml_estimate(y_p, x_p) - h
    expected = 1.0 / 400.0
    assert np.mean(np.abs(err) ** 2) == pytest.approx(expected, rel=0.03)
    assert pilot_error_variance(cfg)[0] == pytest.approx(expected)


def test_estimation_error_uncorrelated_with_channel():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(35, "ml-x")
    n = 100_000
    h = sample_channel_batch(cfg, profiles, np.ones(n, dtype=np.int8), rng)
    x_p = sample_pilot_batch(cfg, n, rng)
    y_p = received_block_batch(cfg, h, x_p, rng)
    err = ml_estimate(y_p, x_p) - h
    cross = np.abs(np.mean(err[:, 0, :] * h[:, 0, :].conj(), axis=0))
    assert np.max(cross) < 5e-4


# --------------------------------------------------------------------------
# refinement
# --------------------------------------------------------------------------


def test_refine_noiseless_recovers_channel():
    rng = rng_stream(36, "rf0")
    h = complex_normal(rng, (2,))
    x_p = complex_normal(rng, (2,))
    x_d = complex_normal(rng, (8,))
    np.testing.assert_allclose(
        refine_estimate(h[:, None] * x_p[None, :], h[:, None] * x_d[None, :], x_p, x_d),
        h,
        atol=1e-12,
    )


def test_refine_equals_ml_when_no_data():
    rng = rng_stream(37, "rf-eq")
    y_p = complex_normal(rng, (2, 4))
    x_p = complex_normal(rng, (4,))
    y_d = np.zeros((2, 0), dtype=complex)
    x_d = np.zeros((0,), dtype=complex)
    np.testing.assert_allclose(
        refine_estimate(y_p, y_d, x_p, x_d), ml_estimate(y_p, x_p), atol=1e-12
    )


def test_refined_error_variance_matches_formula():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(38, "rf-var")
    n = 100_000
    h = sample_channel_batch(cfg, profiles, np.zeros(n, dtype=np.int8), rng)
    x_p = sample_pilot_batch(cfg, n, rng)
    x_d = sample_data_batch(cfg, n, rng)
    # pin the data energy to its mean so the closed form is exact
    x_d *= (math.sqrt(cfg.data_power * cfg.data_uses) / np.linalg.norm(x_d, axis=1))[:, None]
    y_p = received_block_batch(cfg, h, x_p, rng)
    y_d = received_block_batch(cfg, h, x_d, rng)
    err = refine_estimate(y_p, y_d, x_p, x_d) - h
    expected = 1.0 / 2000.0
    assert np.mean(np.abs(err) ** 2) == pytest.approx(expected, rel=0.03)
    assert refined_error_variance(cfg)[0] == pytest.approx(expected)


def test_refinement_dominates_pilot_only():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(39, "rf-dom")
    n = 30_000
    h = sample_channel_batch(cfg, profiles, np.zeros(n, dtype=np.int8), rng)
    x_p = sample_pilot_batch(cfg, n, rng)
    x_d = sample_data_batch(cfg, n, rng)
    y_p = received_block_batch(cfg, h, x_p, rng)
    y_d = received_block_batch(cfg, h, x_d, rng)
    var_tilde = np.mean(np.abs(ml_estimate(y_p, x_p) - h) ** 2)
    var_bar = np.mean(np.abs(refine_estimate(y_p, y_d, x_p, x_d) - h) ** 2)
    assert var_bar < var_tilde


# --------------------------------------------------------------------------
# reported second moments (printed forms, PSD-clamped)
# --------------------------------------------------------------------------


def test_edcs_second_moment_anchor():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    plan = QuantizationPlan(scheme="EDCS", sigma_sq=[1e-300])
    (m,) = estimate_second_moments("EDCS", cfg, profiles, plan, PRIOR)
    a = profiles[0].steering
    expected = 0.0105 * np.eye(2) + 0.05 * np.outer(a, a.conj())
    np.testing.assert_allclose(m, expected, atol=1e-10)


def test_cdcs_hypothesis_gap_is_target_covariance():
    cfg = SystemConfig(num_aps=2)
    profiles = build_profiles(cfg)
    plan = QuantizationPlan(scheme="CDCS", sigma_p_sq=[0.5, 0.5], sigma_d_sq=[1.0, 1.0])
    m1 = estimate_second_moments("CDCS", cfg, profiles, plan, 1)
    m0 = estimate_second_moments("CDCS", cfg, profiles, plan, 0)
    for k in range(2):
        np.testing.assert_allclose(m1[k] - m0[k], profiles[k].omega_g, atol=1e-12)


def test_cdcs_prior_gives_channel_covariance():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    (m,) = estimate_second_moments("CDCS", cfg, profiles, None, PRIOR)
    np.testing.assert_allclose(m, 0.01 * np.eye(2) + 0.5 * profiles[0].omega_g, atol=1e-12)


def test_cdes_printed_coefficient_at_high_power():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    (m,) = estimate_second_moments("CDES", cfg, profiles, None, 0)
    np.testing.assert_allclose(m, (0.01 - 1.0 / 400.0) * np.eye(2), atol=1e-12)


def test_cdes_printed_coefficient_clamps_at_low_power():
    # 15 dB-ish: pilot energy 2*31.62 = 63.2; 0.01 - 1/63.2 < 0 -> clamp
    cfg = SystemConfig(num_aps=1, pilot_power=10**1.5, data_power=10**1.5)
    profiles = build_profiles(cfg)
    with pytest.warns(CovarianceClampWarning):
        (m,) = estimate_second_moments("CDES", cfg, profiles, None, 0)
    eigs = np.linalg.eigvalsh(m)
    assert eigs[0] >= 0
    np.testing.assert_allclose(m, np.zeros((2, 2)), atol=1e-12)


def test_edcs_subtractive_clamp_under_heavy_quantization():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    plan = QuantizationPlan(scheme="EDCS", sigma_sq=[0.02])  # > 0.0105 floor
    with pytest.warns(CovarianceClampWarning):
        (m,) = estimate_second_moments("EDCS", cfg, profiles, plan, 0)
    assert np.linalg.eigvalsh(m)[0] >= 0


def test_unknown_scheme_rejected():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    with pytest.raises(ValueError, match="unknown scheme"):
        estimate_second_moments("XXXX", cfg, profiles, None, 0)
    with pytest.raises(ValueError, match="hypothesis_or_prior"):
        estimate_second_moments("CDES", cfg, profiles, None, 0.7)


# --------------------------------------------------------------------------
# physical covariances (sampling-path forms)
# --------------------------------------------------------------------------


def test_physical_cdes_covariance_matches_sampled_estimates():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    rng = rng_stream(40, "phys")
    n = 100_000
    h = sample_channel_batch(cfg, profiles, np.ones(n, dtype=np.int8), rng)
    x_p = sample_pilot_batch(cfg, n, rng)
    y_p = received_block_batch(cfg, h, x_p, rng)
    est = ml_estimate(y_p, x_p)[:, 0, :]
    sample_cov = est.T @ est.conj() / n
    expected = physical_estimate_covariance("CDES", cfg, profiles, 0, 1)
    np.testing.assert_allclose(sample_cov, expected, atol=0.01)
    np.testing.assert_allclose(
        expected, (0.01 + 1 / 400) * np.eye(2) + profiles[0].omega_g, atol=1e-12
    )


def test_physical_edcs_covariance_value():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    got = physical_estimate_covariance("EDCS", cfg, profiles, 0, 0)
    np.testing.assert_allclose(got, (0.01 + 1 / 2000) * np.eye(2), atol=1e-15)


def test_physical_prior_weighting():
    cfg = SystemConfig(num_aps=1)
    profiles = build_profiles(cfg)
    got = physical_estimate_covariance("CDES", cfg, profiles, 0, PRIOR)
    expected = (0.01 + 1 / 400) * np.eye(2) + 0.5 * profiles[0].omega_g
    np.testing.assert_allclose(got, expected, atol=1e-15)
