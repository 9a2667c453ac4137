"""Caching placement for the noise-limited objective via its KKT conditions.

The objective ``sum_n K_n a_n (1 - exp(-p_n T_n))`` is separable and concave,
so the optimum is a water-filling solution: each ``p_n`` is the clipped root of
``K_n a_n T_n exp(-p_n T_n) = eps`` and the budget multiplier ``eps`` is found
by bisection on the cache constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import noise_limited_coefficients, noise_limited_value
from .errors import ValidationError
from .model import ContentCatalog, NetworkConfig

MAX_BISECTION = 200


@dataclass(frozen=True, eq=False)
class KktCoefficients:
    """Per-file gain ``K_n`` and coverage exponent ``T_n``."""

    k: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if k.shape != t.shape or k.ndim != 1:
            raise ValidationError("K and T must be vectors of equal length", "k")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(t))) or np.any(k <= 0) or np.any(t <= 0):
            raise ValidationError("K and T must be finite and positive", "t")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "t", t)

    def __len__(self):
        return self.k.size


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    probs: np.ndarray
    value: float
    iterations: int
    converged: bool = True
    multiplier: float = float("nan")


def compute_kkt_coefficients(catalog: ContentCatalog, cfg: NetworkConfig) -> KktCoefficients:
    k, t = noise_limited_coefficients(catalog, cfg)
    return KktCoefficients(k, t)


def _popularity(catalog_or_a) -> np.ndarray:
    if isinstance(catalog_or_a, ContentCatalog):
        return catalog_or_a.popularity
    return np.asarray(catalog_or_a, dtype=float)


def caching_prob_from_multiplier(epsilon_mult: float, coeffs: KktCoefficients, catalog) -> np.ndarray:
    """Caching probabilities that satisfy stationarity for budget multiplier ``epsilon_mult``.

    ``catalog`` may be a :class:`ContentCatalog` or a popularity vector.
    """
    if epsilon_mult < 0:
        raise ValidationError("multiplier must be >= 0", "epsilon_mult")
    a = _popularity(catalog)
    marginal = coeffs.k * a * coeffs.t  # derivative of the objective at p = 0
    if epsilon_mult == 0:
        return np.ones_like(marginal)
    with np.errstate(divide="ignore"):
        p = np.log(marginal / epsilon_mult) / coeffs.t
    return np.clip(p, 0.0, 1.0)


def solve_budget(
    coeffs: KktCoefficients,
    popularity: np.ndarray,
    cache_size: float,
    tolerance: float = 1e-6,
    max_iter: int = MAX_BISECTION,
) -> OptimizationResult:
    """Bisection on the budget multiplier for given ``(K, T, a, C)``."""
    if tolerance <= 0:
        raise ValidationError("tolerance must be > 0", "tolerance")
    a = np.asarray(popularity, dtype=float)
    if a.shape != coeffs.k.shape:
        raise ValidationError("popularity length must match the coefficients", "popularity")
    if cache_size <= 0:
        raise ValidationError("cache_size must be > 0", "cache_size")
    k, t = coeffs.k, coeffs.t

    if cache_size >= a.size - tolerance:
        # every file fits: the box corner is optimal
        p = np.ones(a.size)
        return OptimizationResult(p, noise_limited_value(p, k, t, a), 0, True, 0.0)

    marginal = k * a * t
    lo = float(np.min(marginal * np.exp(-t)))  # every p_n = 1 at or below this
    hi = float(np.max(marginal))  # every p_n = 0 at or above this
    p = caching_prob_from_multiplier(lo, coeffs, a)
    eps = lo
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        eps = 0.5 * (lo + hi)
        p = caching_prob_from_multiplier(eps, coeffs, a)
        excess = p.sum() - cache_size
        # stop only on the feasible side so the result never overfills a cache
        if -tolerance < excess <= 0:
            converged = True
            break
        if excess > 0:
            lo = eps
        else:
            hi = eps
    return OptimizationResult(p, noise_limited_value(p, k, t, a), it, converged, eps)


def cp_co(
    catalog: ContentCatalog,
    cfg: NetworkConfig,
    tolerance: float = 1e-6,
    coeffs: KktCoefficients | None = None,
) -> OptimizationResult:
    """Noise-limited caching placement by KKT water-filling.

    Parameters
    ----------
    catalog, cfg
        Content catalog and network parameters.
    tolerance
        Allowed residual ``|sum p - C|`` when the budget binds.
    coeffs
        Precomputed ``(K, T)``; computed from ``catalog`` and ``cfg`` if omitted.

    Returns
    -------
    OptimizationResult
        Policy vector, its noise-limited SBOP, and the number of bisection steps.
    """
    if catalog.cache_size > catalog.f_count:
        raise ValidationError("cache_size must not exceed f_count", "cache_size")
    coeffs = coeffs or compute_kkt_coefficients(catalog, cfg)
    return solve_budget(coeffs, catalog.popularity, catalog.cache_size, tolerance)


def stationarity_residual(result: OptimizationResult, coeffs: KktCoefficients, popularity) -> float:
    """Largest ``|K a T e^{-pT} - eps| / eps`` over files with ``0 < p < 1``."""
    a = np.asarray(popularity, dtype=float)
    p = result.probs
    interior = (p > 0) & (p < 1)
    if not np.any(interior) or not math.isfinite(result.multiplier) or result.multiplier <= 0:
        return 0.0
    grad = coeffs.k * a * coeffs.t * np.exp(-p * coeffs.t)
    return float(np.max(np.abs(grad[interior] - result.multiplier)) / result.multiplier)
