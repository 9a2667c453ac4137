"""Network parameters and the elementary propagation/popularity model.

Everything inside the package works in linear units (watts, linear gains,
metres).  dB and dBm values are accepted only by the ``from_*`` constructors
and the conversion helpers below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0


def dbm_to_watts(x):
    out = np.power(10.0, (np.asarray(x, dtype=float) - 30.0) / 10.0)
    return float(out) if np.ndim(x) == 0 else out


def db_to_linear(x):
    out = np.power(10.0, np.asarray(x, dtype=float) / 10.0)
    return float(out) if np.ndim(x) == 0 else out


def linear_to_db(x):
    return 10.0 * np.log10(x)


def free_space_intercept(carrier_hz: float) -> float:
    """Free-space path gain at 1 m, ``(c / (4 pi f))**2``."""
    return (SPEED_OF_LIGHT / (4.0 * math.pi * carrier_hz)) ** 2


def thermal_noise_watts(bandwidth_hz: float, noise_figure_db: float = 10.0) -> float:
    return dbm_to_watts(THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db)


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and geometric parameters of the relay-assisted mmWave network.

    Densities are in nodes/m^2, powers in watts, gains linear, ``theta`` in
    radians and ``beta`` in 1/m.
    """

    lambda_bs: float = 1e-5
    lambda_rn: float = 1e-5
    lambda_ue: float = 1e-4
    p_bs: float = 1.0
    p_rn: float = 1.0
    b_bs: float = 1.0
    b_rn: float = 1.0
    bandwidth: float = 100e6
    alpha_los: float = 2.5
    alpha_nlos: float = 4.0
    beta: float = 4e-4
    theta: float = math.radians(30.0)
    gain_main: float = 10.0
    gain_side: float = 0.1
    n_los: int = 3
    n_nlos: int = 2
    gamma_intercept: float = field(default_factory=lambda: free_space_intercept(28e9))
    noise_power: float = field(default_factory=lambda: thermal_noise_watts(100e6))
    area_side: float = 800.0

    def __post_init__(self):
        if self.lambda_bs <= 0:
            raise ValidationError("lambda_bs must be > 0", "lambda_bs")
        if self.lambda_rn < 0:
            raise ValidationError("lambda_rn must be >= 0", "lambda_rn")
        if self.lambda_ue <= 0:
            raise ValidationError("lambda_ue must be > 0", "lambda_ue")
        if self.alpha_los < 2:
            raise ValidationError("alpha_los must be >= 2", "alpha_los")
        if self.alpha_nlos <= self.alpha_los:
            raise ValidationError("alpha_nlos must exceed alpha_los", "alpha_nlos")
        if not 0 < self.theta < 2 * math.pi + 1e-12:
            raise ValidationError("theta must lie in (0, 2*pi]", "theta")
        if not self.gain_main > self.gain_side > 0:
            raise ValidationError("need gain_main > gain_side > 0", "gain_main")
        for name in ("n_los", "n_nlos"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer", name)
        if self.beta < 0:
            raise ValidationError("beta must be >= 0", "beta")
        for name in ("p_bs", "p_rn", "b_bs", "b_rn", "bandwidth", "gamma_intercept", "area_side"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0", name)
        if self.noise_power < 0:
            raise ValidationError("noise_power must be >= 0", "noise_power")

    @classmethod
    def from_units(
        cls,
        *,
        p_bs_dbm: float = 30.0,
        p_rn_dbm: float = 30.0,
        theta_deg: float = 30.0,
        gain_main_db: float = 10.0,
        gain_side_db: float = -10.0,
        bandwidth_hz: float = 100e6,
        carrier_hz: float = 28e9,
        noise_figure_db: float = 10.0,
        noise_dbm: float | None = None,
        **linear,
    ) -> "NetworkConfig":
        """Build a config from dB/dBm/degree quantities (the config-file boundary)."""
        noise = dbm_to_watts(noise_dbm) if noise_dbm is not None else thermal_noise_watts(bandwidth_hz, noise_figure_db)
        return cls(
            p_bs=dbm_to_watts(p_bs_dbm),
            p_rn=dbm_to_watts(p_rn_dbm),
            theta=math.radians(theta_deg),
            gain_main=db_to_linear(gain_main_db),
            gain_side=db_to_linear(gain_side_db),
            bandwidth=bandwidth_hz,
            gamma_intercept=free_space_intercept(carrier_hz),
            noise_power=noise,
            **linear,
        )

    def with_(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)

    @property
    def serving_gain(self) -> float:
        # perfect beam alignment on the serving link
        return self.gain_main * self.gain_main

    @property
    def p_bar_bs(self) -> float:
        """Effective biased power gamma * P * M^2 * B of the BS tier."""
        return self.gamma_intercept * self.p_bs * self.serving_gain * self.b_bs

    @property
    def p_bar_rn(self) -> float:
        return self.gamma_intercept * self.p_rn * self.serving_gain * self.b_rn

    @property
    def area(self) -> float:
        return self.area_side * self.area_side


@dataclass(frozen=True)
class GainPattern:
    """Random effective antenna gain of an interfering link (MM, Mm, mm)."""

    gains: tuple[float, float, float]
    probs: tuple[float, float, float]

    @property
    def mean(self) -> float:
        return float(np.dot(self.gains, self.probs))


def gain_distribution(theta: float, gain_main: float, gain_side: float) -> GainPattern:
    if not 0 < theta <= 2 * math.pi:
        raise ValidationError("theta must lie in (0, 2*pi]", "theta")
    q = theta / (2 * math.pi)
    probs = (q * q, 2 * q * (1 - q), (1 - q) * (1 - q))
    gains = (gain_main * gain_main, gain_main * gain_side, gain_side * gain_side)
    return GainPattern(gains=gains, probs=probs)


def config_gain_pattern(cfg: NetworkConfig) -> GainPattern:
    return gain_distribution(cfg.theta, cfg.gain_main, cfg.gain_side)


def zipf_popularity(f_count: int, delta: float) -> np.ndarray:
    """Zipf request probabilities ``a_n = n^-delta / sum_m m^-delta``."""
    if int(f_count) != f_count or f_count < 1:
        raise ValidationError("f_count must be a positive integer", "f_count")
    if delta < 0:
        raise ValidationError("delta must be >= 0", "delta")
    w = np.arange(1, int(f_count) + 1, dtype=float) ** (-float(delta))
    return w / w.sum()


def los_probability(r, beta: float):
    """Probability that a link of length ``r`` is line-of-sight, ``exp(-beta r)``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValidationError("distance must be >= 0", "r")
    out = np.exp(-beta * r_arr)
    return float(out) if np.ndim(r) == 0 else out


def path_loss(r, alpha: float, gamma_intercept: float = 1.0):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValidationError("distance must be > 0", "r")
    out = gamma_intercept * r_arr ** (-alpha)
    return float(out) if np.ndim(r) == 0 else out


def sinr_threshold(rate_bps, bandwidth_hz: float):
    """Minimum SINR for rate ``rate_bps``: ``2**(tau/B) - 1``."""
    return np.expm1(np.asarray(rate_bps, dtype=float) / bandwidth_hz * math.log(2.0))


@dataclass(frozen=True, eq=False)
class ContentCatalog:
    f_count: int
    delta: float
    cache_size: float
    popularity: np.ndarray
    target_rates: np.ndarray
    sinr_thresholds: np.ndarray

    def __post_init__(self):
        if not 1 <= self.cache_size <= self.f_count:
            raise ValidationError("cache_size must satisfy 1 <= C <= F", "cache_size")
        for name in ("popularity", "target_rates", "sinr_thresholds"):
            arr = getattr(self, name)
            if arr.shape != (self.f_count,):
                raise ValidationError(f"{name} must have length {self.f_count}", name)
        if abs(self.popularity.sum() - 1.0) > 1e-12:
            raise ValidationError("popularity must sum to 1", "popularity")
        if np.any(self.sinr_thresholds <= 0):
            raise ValidationError("SINR thresholds must be positive", "sinr_thresholds")

    @classmethod
    def build(
        cls,
        f_count: int = 20,
        delta: float = 0.8,
        cache_size: float = 10,
        tau_min_bps: float = 0.04e9,
        tau_max_bps: float = 1e9,
        bandwidth_hz: float = 100e6,
    ) -> "ContentCatalog":
        """Zipf catalog with target rates evenly spaced over ``[tau_min, tau_max]``."""
        if tau_min_bps <= 0 or tau_max_bps < tau_min_bps:
            raise ValidationError("need 0 < tau_min <= tau_max", "tau_min_bps")
        a = zipf_popularity(f_count, delta)
        tau = np.linspace(tau_min_bps, tau_max_bps, int(f_count))
        return cls(int(f_count), float(delta), float(cache_size), a, tau, sinr_threshold(tau, bandwidth_hz))

    def with_sinr_threshold_db(self, threshold_db: float, bandwidth_hz: float) -> "ContentCatalog":
        """Same catalog with every file sharing one SINR threshold."""
        nu = np.full(self.f_count, db_to_linear(threshold_db))
        tau = bandwidth_hz * np.log2(1.0 + nu)
        return replace(self, target_rates=tau, sinr_thresholds=nu)

    def with_cache_size(self, cache_size: float) -> "ContentCatalog":
        return replace(self, cache_size=float(cache_size))


@dataclass(frozen=True, eq=False)
class CachingPolicy:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1:
            raise ValidationError("caching probabilities must be a vector", "probs")
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValidationError("caching probabilities must lie in [0, 1]", "probs")

    def check_budget(self, cache_size: float) -> None:
        if self.probs.sum() > cache_size + 1e-9:
            raise ValidationError(
                f"caching probabilities sum to {self.probs.sum():.6g} > C = {cache_size:g}", "probs"
            )

    def __len__(self):
        return self.probs.size


def mpc_policy(catalog: ContentCatalog) -> CachingPolicy:
    """Cache the C most popular files everywhere (fractional C caches a partial file)."""
    p = np.clip(catalog.cache_size - np.arange(catalog.f_count), 0.0, 1.0)
    return CachingPolicy(p)


def uc_policy(catalog: ContentCatalog) -> CachingPolicy:
    return CachingPolicy(np.full(catalog.f_count, catalog.cache_size / catalog.f_count))
