import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaycache.errors import ValidationError
from relaycache.model import (
    CachingPolicy,
    ContentCatalog,
    NetworkConfig,
    db_to_linear,
    dbm_to_watts,
    free_space_intercept,
    gain_distribution,
    linear_to_db,
    los_probability,
    mpc_policy,
    path_loss,
    sinr_threshold,
    thermal_noise_watts,
    uc_policy,
    zipf_popularity,
)


def test_zipf_three_files():
    np.testing.assert_allclose(zipf_popularity(3, 1.0), [6 / 11, 3 / 11, 2 / 11], rtol=1e-14)


def test_zipf_uniform_when_flat():
    np.testing.assert_allclose(zipf_popularity(5, 0.0), np.full(5, 0.2))


def test_zipf_default_catalog_head():
    # 1 / sum_{m<=20} m^-0.8
    oracle = 1.0 / math.fsum(m**-0.8 for m in range(1, 21))
    a = zipf_popularity(20, 0.8)
    assert a[0] == pytest.approx(oracle, rel=1e-13)
    assert a[0] == pytest.approx(0.21229, abs=5e-6)


def test_zipf_rejects_empty():
    with pytest.raises(ValidationError):
        zipf_popularity(0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10_000), st.floats(0.0, 2.0))
def test_zipf_is_a_distribution(f, delta):
    a = zipf_popularity(f, delta)
    assert a.shape == (f,)
    assert np.all(a > 0)
    assert abs(a.sum() - 1.0) < 1e-12
    assert np.all(np.diff(a) <= 1e-15)


def test_los_probability_values():
    assert los_probability(0.0, 4e-4) == 1.0
    assert los_probability(1 / 4e-4, 4e-4) == pytest.approx(math.exp(-1))
    assert los_probability(1e6, 0.0) == 1.0
    with pytest.raises(ValidationError):
        los_probability(-1.0, 1e-3)


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1e-2), st.floats(0, 1e-2))
def test_los_probability_monotone(r1, r2, b1, b2):
    lo_r, hi_r = sorted((r1, r2))
    lo_b, hi_b = sorted((b1, b2))
    assert los_probability(hi_r, lo_b) <= los_probability(lo_r, lo_b)
    assert los_probability(lo_r, hi_b) <= los_probability(lo_r, lo_b)


def test_gain_distribution_thirty_degrees():
    g = gain_distribution(math.radians(30), 10.0, 0.1)
    assert g.probs[0] == pytest.approx(1 / 144)
    assert g.probs[1] == pytest.approx(22 / 144)
    assert sum(g.probs) == pytest.approx(1.0, abs=1e-12)
    assert g.gains == pytest.approx((100.0, 1.0, 0.01))


def test_gain_distribution_full_circle_is_mainlobe():
    g = gain_distribution(2 * math.pi, 10.0, 0.1)
    assert g.mean == pytest.approx(100.0)


@pytest.mark.parametrize("theta", [0.0, -1.0, 7.0])
def test_gain_distribution_rejects_bad_beamwidth(theta):
    with pytest.raises(ValidationError):
        gain_distribution(theta, 10.0, 0.1)


@given(st.floats(1e-3, 2 * math.pi), st.floats(1e-3, 2 * math.pi))
def test_gain_mean_increases_with_beamwidth(t1, t2):
    lo, hi = sorted((t1, t2))
    assert gain_distribution(lo, 10, 0.1).mean <= gain_distribution(hi, 10, 0.1).mean + 1e-12
    assert sum(gain_distribution(lo, 10, 0.1).probs) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "r, alpha, gamma, expected",
    [(1.0, 2.5, 1.0, 1.0), (100.0, 2.0, 1.0, 1e-4), (10.0, 4.0, 2.0, 2e-4)],
)
def test_path_loss(r, alpha, gamma, expected):
    assert path_loss(r, alpha, gamma) == pytest.approx(expected)


def test_path_loss_rejects_zero_distance():
    with pytest.raises(ValidationError):
        path_loss(0.0, 2.0)


def test_unit_conversions():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(-10.0) == pytest.approx(0.1)
    assert linear_to_db(db_to_linear(13.0)) == pytest.approx(13.0)


def test_free_space_and_noise_defaults():
    assert free_space_intercept(28e9) == pytest.approx((299_792_458.0 / (4 * math.pi * 28e9)) ** 2)
    # -174 + 80 + 10 = -84 dBm
    assert thermal_noise_watts(100e6) == pytest.approx(dbm_to_watts(-84.0))


def test_sinr_threshold():
    assert sinr_threshold(100e6, 100e6) == pytest.approx(1.0)
    assert sinr_threshold(1e9, 100e6) == pytest.approx(1023.0)


def test_config_validation():
    NetworkConfig()
    with pytest.raises(ValidationError):
        NetworkConfig(alpha_nlos=2.0)
    with pytest.raises(ValidationError):
        NetworkConfig(lambda_bs=0.0)
    with pytest.raises(ValidationError):
        NetworkConfig(gain_side=20.0)
    with pytest.raises(ValidationError) as exc:
        NetworkConfig(n_los=1.5)
    assert exc.value.field == "n_los"


def test_config_from_units_matches_defaults():
    cfg = NetworkConfig.from_units()
    ref = NetworkConfig()
    assert cfg.p_bs == pytest.approx(ref.p_bs)
    assert cfg.gain_side == pytest.approx(ref.gain_side)
    assert cfg.theta == pytest.approx(ref.theta)
    assert cfg.p_bar_bs == pytest.approx(ref.gamma_intercept * 100.0)


def test_catalog_defaults():
    cat = ContentCatalog.build()
    assert cat.f_count == 20
    assert cat.target_rates[0] == pytest.approx(0.04e9)
    assert cat.target_rates[-1] == pytest.approx(1e9)
    assert cat.sinr_thresholds[-1] == pytest.approx(1023.0)
    assert np.all(cat.sinr_thresholds > 0)
    with pytest.raises(ValidationError):
        ContentCatalog.build(f_count=5, cache_size=6)


def test_catalog_single_threshold():
    cat = ContentCatalog.build().with_sinr_threshold_db(10.0, 100e6)
    np.testing.assert_allclose(cat.sinr_thresholds, 10.0)


def test_benchmark_policies():
    cat = ContentCatalog.build()
    mpc = mpc_policy(cat).probs
    np.testing.assert_array_equal(mpc, [1.0] * 10 + [0.0] * 10)
    np.testing.assert_allclose(uc_policy(cat).probs, 0.5)
    assert mpc.sum() == pytest.approx(10)
    assert uc_policy(cat).probs.sum() == pytest.approx(10)


def test_policy_validation():
    with pytest.raises(ValidationError):
        CachingPolicy(np.array([0.5, 1.2]))
    with pytest.raises(ValidationError):
        CachingPolicy(np.array([1.0, 1.0])).check_budget(1.5)
    CachingPolicy(np.array([1.0, 0.5])).check_budget(1.5)
