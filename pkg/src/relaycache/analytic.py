"""Stochastic-geometry evaluation of the successful backhaul offloading probability.

All distributions are expressed in the *inverse biased received power* domain,
``x = r^alpha / P_bar``, in which BS and RN tiers can be compared directly.
Integrals against a tier density ``F'(x) dx`` are computed with Gauss-Laguerre
rules after the substitution ``u = Lambda(x)`` (so ``F'(x) dx = e^-u du``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import kernels
from .errors import DegenerateDistributionError, NumericError, ValidationError
from .model import CachingPolicy, ContentCatalog, NetworkConfig, config_gain_pattern
from .quadrature import QuadratureRule, gauss_laguerre

LINKS = ("BU", "BR", "RU")
DEFAULT_ORDER = 30
# inner rule for the association integral and the two-hop probability
INNER_ORDER = 64
# serving-node rule: log-spaced piece on [U_FLOOR, 1] gets LOW_SHARE of the nodes
U_FLOOR = 1e-6
LOW_SHARE = 0.65

# interference grid: log-spaced composite Gauss-Legendre between T_MIN and T_MAX metres
T_MIN = 1e-4
T_MAX = 1e9
PANEL_WIDTH = 0.5
PANEL_NODES = 8


@dataclass(frozen=True)
class TierSpec:
    """A PPP of transmitters seen through the inverse biased received power."""

    density: float
    p_bar: float
    alpha_los: float
    alpha_nlos: float
    beta: float
    los_only: bool = False

    def __post_init__(self):
        if self.density < 0:
            raise ValidationError("tier density must be >= 0", "density")
        if self.p_bar <= 0:
            raise ValidationError("p_bar must be > 0", "p_bar")

    def thinned(self, fraction: float) -> "TierSpec":
        return replace(self, density=self.density * fraction)


def bs_tier(cfg: NetworkConfig, fraction: float = 1.0, los_only: bool = False) -> TierSpec:
    return TierSpec(cfg.lambda_bs * fraction, cfg.p_bar_bs, cfg.alpha_los, cfg.alpha_nlos, cfg.beta, los_only)


def rn_tier(cfg: NetworkConfig, los_only: bool = False) -> TierSpec:
    return TierSpec(cfg.lambda_rn, cfg.p_bar_rn, cfg.alpha_los, cfg.alpha_nlos, cfg.beta, los_only)


# ---------------------------------------------------------------------------
# distributions of the inverse biased received power
# ---------------------------------------------------------------------------

def _h(z):
    """``(1 - e^-z (1 + z)) / z^2``, i.e. ``int_0^1 v e^{-z v} dv``."""
    z = np.asarray(z, dtype=float)
    zb = np.maximum(z, 1e-3)
    with np.errstate(invalid="ignore", over="ignore"):
        big = -(np.expm1(-zb) + zb * np.exp(-zb)) / (zb * zb)
        series = 0.5 - z / 3.0 + z * z / 8.0 - z**3 / 30.0
    return np.where(z < 1e-3, series, big)


def _g(z):
    """``1/2 - _h(z)``, i.e. ``int_0^1 v (1 - e^{-z v}) dv``, without cancellation."""
    z = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        series = z / 3.0 - z * z / 8.0 + z**3 / 30.0 - z**4 / 144.0
    return np.where(z < 1e-3, series, np.where(np.isinf(z), 0.5, 0.5 - _h(z)))


def _radii(tier: TierSpec, x):
    xp = np.asarray(x, dtype=float) * tier.p_bar
    return xp ** (1.0 / tier.alpha_los), xp ** (1.0 / tier.alpha_nlos)


def _los_disc(d, beta: float):
    """``int_0^d 2 t e^{-beta t} dt / 2``, finite as ``d -> inf`` when ``beta > 0``."""
    with np.errstate(invalid="ignore", over="ignore"):
        out = d * d * _h(beta * d)
    if beta > 0:
        out = np.where(np.isinf(d), _inv_square(beta), out)
    return out


def _inv_square(beta: float) -> float:
    return math.inf if beta < 1e-150 else 1.0 / (beta * beta)


def intensity(tier: TierSpec, x):
    """Mean number of ``tier`` nodes with inverse biased power below ``x``."""
    x = np.asarray(x, dtype=float)
    if tier.density == 0:
        return np.zeros_like(x)
    d_l, d_n = _radii(tier, x)
    lam = 2.0 * math.pi * tier.density
    los = _los_disc(d_l, tier.beta)
    if tier.los_only:
        return lam * los
    with np.errstate(invalid="ignore", over="ignore"):
        nlos = d_n * d_n * _g(tier.beta * d_n)
    return lam * (los + nlos)


def total_intensity(tier: TierSpec) -> float:
    """``intensity(tier, inf)``: finite only for a line-of-sight-only tier with blockage."""
    if tier.density == 0:
        return 0.0
    if tier.los_only and tier.beta > 0:
        return 2.0 * math.pi * tier.density * _inv_square(tier.beta)
    return math.inf


def intensity_rates(tier: TierSpec, x):
    """Derivative of :func:`intensity` split into its LOS and NLOS parts."""
    x = np.asarray(x, dtype=float)
    if tier.density == 0:
        return np.zeros_like(x), np.zeros_like(x)
    lam = 2.0 * math.pi * tier.density
    al, an = tier.alpha_los, tier.alpha_nlos
    with np.errstate(divide="ignore", invalid="ignore"):
        d_l, d_n = _radii(tier, x)
        rate_l = lam / al * tier.p_bar ** (2.0 / al) * x ** (2.0 / al - 1.0) * np.exp(-tier.beta * d_l)
        if tier.los_only:
            return rate_l, np.zeros_like(x)
        rate_n = lam / an * tier.p_bar ** (2.0 / an) * x ** (2.0 / an - 1.0) * -np.expm1(-tier.beta * d_n)
    return rate_l, rate_n


def inverse_power_cdf(tier: TierSpec, r):
    """CDF of the smallest inverse biased received power of ``tier``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValidationError("inverse power must be >= 0", "r")
    out = -np.expm1(-intensity(tier, r_arr))
    return float(out) if np.ndim(r) == 0 else out


def inverse_power_pdf(tier: TierSpec, r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValidationError("inverse power must be >= 0", "r")
    rate_l, rate_n = intensity_rates(tier, r_arr)
    out = (rate_l + rate_n) * np.exp(-intensity(tier, r_arr))
    return float(out) if np.ndim(r) == 0 else out


def los_share(tier: TierSpec, x):
    """Probability that the nearest node at inverse power ``x`` is line-of-sight."""
    rate_l, rate_n = intensity_rates(tier, x)
    total = rate_l + rate_n
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(total > 0, rate_l / np.where(total > 0, total, 1.0), 1.0)
    return share


def inverse_intensity(tier: TierSpec, u):
    """Solve ``intensity(tier, x) = u`` for ``x`` (``inf`` where ``u`` is unreachable)."""
    u = np.asarray(u, dtype=float)
    if tier.density == 0:
        return np.full(u.shape, np.inf)
    flat = kernels.inverse_intensity(
        np.ascontiguousarray(u.ravel()), tier.density, tier.p_bar,
        tier.alpha_los, tier.alpha_nlos, tier.beta, bool(tier.los_only),
    )
    if np.any(np.isnan(flat)):
        raise NumericError("inverse intensity did not converge")
    return flat.reshape(u.shape)


# ---------------------------------------------------------------------------
# user association and relaying
# ---------------------------------------------------------------------------

def _u_rule(lo, cap: float, rule: QuadratureRule):
    """Nodes and weights for ``int_lo^cap e^-u g(u) du`` (``lo`` may be an array).

    For an unbounded range this is the shifted Gauss-Laguerre rule; a finite
    ``cap`` (defective distribution) switches to Gauss-Legendre on ``[lo, cap]``.
    """
    lo = np.asarray(lo, dtype=float)[..., None]
    if math.isinf(cap):
        return lo + rule.nodes, np.exp(-lo) * rule.weights
    x, w = np.polynomial.legendre.leggauss(rule.order)
    half = 0.5 * np.maximum(cap - lo, 0.0)
    u = lo + half * (x + 1.0)
    return u, half * w * np.exp(-u)


def _log_legendre(lo: float, hi: float, order: int):
    """Gauss-Legendre in ``t = ln u`` on ``[lo, hi]`` for ``int e^-u g(u) du``."""
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = math.log(lo), math.log(hi)
    u = np.exp(a + 0.5 * (b - a) * (x + 1.0))
    return u, 0.5 * (b - a) * w * u * np.exp(-u)


def _serving_rule(cap: float, rule: QuadratureRule):
    """Nodes and weights for ``int_0^cap e^-u g(u) du`` over the serving-node axis.

    Success probabilities at high thresholds live at ``u << 1``, which plain
    Gauss-Laguerre misses. The range is split at ``u = 1``: a log-spaced
    Gauss-Legendre piece below (from ``U_FLOOR``) and the shifted rule above,
    sharing the ``rule.order`` nodes roughly 2:1, plus one midpoint node below
    the floor.
    """
    q = rule.order
    if q < 3 or cap <= 10 * U_FLOOR:
        return _u_rule(0.0, cap, rule)
    if cap <= 1.0:
        u, w = _log_legendre(U_FLOOR, cap, q)
        return np.append(0.5 * U_FLOOR, u), np.append(-math.expm1(-U_FLOOR), w)
    q_lo = int(round(LOW_SHARE * q))
    u_lo, w_lo = _log_legendre(U_FLOOR, 1.0, q_lo)
    u_hi, w_hi = _u_rule(1.0, cap, gauss_laguerre(q - q_lo))
    # midpoint node for the sliver below the floor keeps the rule's total mass
    return (
        np.concatenate([[0.5 * U_FLOOR], u_lo, u_hi]),
        np.concatenate([[-math.expm1(-U_FLOOR)], w_lo, w_hi]),
    )


def _association(p_n: float, x, cfg: NetworkConfig, inner: QuadratureRule, los_only: bool = False):
    tier_b = bs_tier(cfg, p_n, los_only)
    tier_r = rn_tier(cfg, los_only)
    x = np.asarray(x, dtype=float)
    f_rn = -np.expm1(-intensity(tier_r, x))
    u0 = intensity(tier_b, x)
    f_bs = -np.expm1(-u0)
    chi_bu = 1.0 - f_rn * f_bs
    if tier_b.density == 0 or tier_r.density == 0:
        chi_br = np.zeros_like(x)
    else:
        u, w = _u_rule(u0, total_intensity(tier_b), inner)
        shifted = inverse_intensity(tier_b, u)
        chi_br = np.sum(w * -np.expm1(-intensity(tier_r, shifted)), axis=-1)
    chi_ru = 0.5 * (1.0 - f_bs * f_bs)
    return chi_bu, chi_br, chi_ru


def uar_probabilities(p_n: float, r, cfg: NetworkConfig, *, los_only: bool = False):
    """Association probabilities ``(chi_BU, chi_BR, chi_RU)`` at inverse power ``r``.

    With ``p_n = 0`` there is no caching BS; ``chi_BU`` is 1 by convention.
    """
    if not 0 <= p_n <= 1:
        raise ValidationError("p_n must lie in [0, 1]", "p_n")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValidationError("inverse power must be >= 0", "r")
    out = _association(p_n, r_arr, cfg, gauss_laguerre(INNER_ORDER), los_only)
    if np.ndim(r) == 0:
        return tuple(float(v) for v in out)
    return out


def _link_tier(link: str, p_n: float, cfg: NetworkConfig, los_only: bool) -> TierSpec:
    return rn_tier(cfg, los_only) if link == "RU" else bs_tier(cfg, p_n, los_only)


def _check_link(link: str) -> None:
    if link not in LINKS:
        raise ValidationError(f"link must be one of {LINKS}", "link")


def _link_weights(link: str, p_n: float, cfg: NetworkConfig, rule: QuadratureRule, los_only: bool = False):
    """Quadrature nodes ``x_i`` and normalized weights of the association-weighted density."""
    tier = _link_tier(link, p_n, cfg, los_only)
    if tier.density == 0:
        raise DegenerateDistributionError(f"{link} link has an empty serving tier")
    u, w = _serving_rule(total_intensity(tier), rule)
    x = inverse_intensity(tier, u)
    finite = np.isfinite(x)
    chi = _association(p_n, np.where(finite, x, 0.0), cfg, gauss_laguerre(INNER_ORDER), los_only)[LINKS.index(link)]
    # a vanishing tier pushes nodes to x = inf, where the density carries no mass
    mass = np.where(finite, w * chi, 0.0)
    z = mass.sum()
    if not z > 0 or not math.isfinite(z):
        raise DegenerateDistributionError(f"{link} association-weighted density has normalizer {z!r}")
    return x, mass / z, z


def weighted_pdf(link: str, p_n: float, r, cfg: NetworkConfig, *, los_only: bool = False, order: int = INNER_ORDER):
    """Association-weighted density of the serving inverse power on ``link``."""
    _check_link(link)
    if not 0 <= p_n <= 1:
        raise ValidationError("p_n must lie in [0, 1]", "p_n")
    rule = gauss_laguerre(order)
    _, _, z = _link_weights(link, p_n, cfg, rule, los_only)
    tier = _link_tier(link, p_n, cfg, los_only)
    r_arr = np.asarray(r, dtype=float)
    chi = _association(p_n, r_arr, cfg, gauss_laguerre(INNER_ORDER), los_only)[LINKS.index(link)]
    out = inverse_power_pdf(tier, r_arr) * chi / z
    return float(out) if np.ndim(r) == 0 else out


def two_hop_probability(cfg: NetworkConfig, order: int = INNER_ORDER) -> float:
    """Probability that the typical UE is served through a relay."""
    if cfg.lambda_rn == 0:
        return 0.0
    rule = gauss_laguerre(order)
    x = inverse_intensity(bs_tier(cfg), rule.nodes)
    f_rn = -np.expm1(-intensity(rn_tier(cfg), x))
    return float(np.clip(0.5 * np.dot(rule.weights, f_rn), 0.0, 0.5))


# ---------------------------------------------------------------------------
# interference
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Grid:
    alpha: float
    beta: float
    los: bool
    base: np.ndarray
    decay: np.ndarray
    t_end: float


@lru_cache(maxsize=64)
def _grid(alpha: float, beta: float, los: bool) -> _Grid:
    y0, y1 = math.log(T_MIN), math.log(T_MAX)
    n_panels = int(math.ceil((y1 - y0) / PANEL_WIDTH))
    x, w = _gl_panel()
    left = y0 + PANEL_WIDTH * np.arange(n_panels)
    y = (left[:, None] + 0.5 * PANEL_WIDTH * (x + 1.0)).ravel()
    t = np.exp(y)
    rho = np.exp(-beta * t) if los else -np.expm1(-beta * t)
    base = np.tile(0.5 * PANEL_WIDTH * w, n_panels) * rho * t * t
    # the last panel overshoots T_MAX; the analytic tail starts where the grid stops
    t_end = math.exp(y0 + PANEL_WIDTH * n_panels)
    return _Grid(alpha, beta, los, base, t ** (-alpha), t_end)


@lru_cache(maxsize=1)
def _gl_panel():
    return np.polynomial.legendre.leggauss(PANEL_NODES)


def exclusion_integral(a, d, alpha: float, n_fading: int, beta: float, los: bool):
    """``int_d^inf (1 - (1 + a t^-alpha / N)^-N) rho(t) t dt`` with ``rho`` the LOS/NLOS probability.

    This is the per-interferer term of the log-Laplace transform of the
    interference from a PPP whose nodes closer than ``d`` are excluded.
    """
    a = np.asarray(a, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), a.shape)
    g = _grid(float(alpha), float(beta), bool(los))
    x, w = _gl_panel()
    flat = kernels.exclusion_integrals(
        np.ascontiguousarray(a.ravel() / n_fading),
        np.ascontiguousarray(d.ravel()),
        int(n_fading), float(alpha), float(beta), bool(los),
        math.log(T_MIN), PANEL_WIDTH, x, w, g.base, g.decay, T_MIN, g.t_end,
    )
    return flat.reshape(a.shape)


def _interferer_tiers(scenario: str, p_n: float, cfg: NetworkConfig):
    """``(density, transmit power, exclusion p_bar or None)`` for each interfering tier."""
    if scenario == "BU":
        return [
            (p_n * cfg.lambda_bs, cfg.p_bs, cfg.p_bar_bs),
            ((1.0 - p_n) * cfg.lambda_bs, cfg.p_bs, None),
            (cfg.lambda_rn, cfg.p_rn, None),
        ]
    if scenario == "BR":
        return [
            (p_n * cfg.lambda_bs, cfg.p_bs, cfg.p_bar_bs),
            ((1.0 - p_n) * cfg.lambda_bs, cfg.p_bs, None),
        ]
    if scenario == "RU":
        return [
            (cfg.lambda_rn, cfg.p_rn, cfg.p_bar_rn),
            (cfg.lambda_bs, cfg.p_bs, None),
        ]
    raise ValidationError(f"scenario must be one of {LINKS}", "scenario")


def log_laplace_interference(scenario: str, p_n: float, s, r, cfg: NetworkConfig):
    """Natural log of :func:`laplace_interference` (broadcast over ``s`` and ``r``)."""
    s, r = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(r, dtype=float))
    gp = config_gain_pattern(cfg)
    # merge (tier, gain) combinations with the same interferer power and exclusion
    groups: dict[tuple, float] = {}
    for density, power, p_bar_excl in _interferer_tiers(scenario, p_n, cfg):
        for gain, prob in zip(gp.gains, gp.probs):
            if density > 0 and prob > 0:
                key = (power * gain * cfg.gamma_intercept, p_bar_excl)
                groups[key] = groups.get(key, 0.0) + density * prob
    out = np.zeros(s.shape)
    if not groups:
        return out
    keys = list(groups)
    scale = np.array([k[0] for k in keys])
    weight = 2.0 * math.pi * np.array([groups[k] for k in keys])
    a = s.reshape(-1, 1) * scale
    flat_r = r.reshape(-1, 1)
    for alpha, n_f, los in ((cfg.alpha_los, cfg.n_los, True), (cfg.alpha_nlos, cfg.n_nlos, False)):
        d = np.column_stack(
            [np.zeros(flat_r.shape[0]) if k[1] is None else (flat_r[:, 0] * k[1]) ** (1.0 / alpha) for k in keys]
        )
        vals = exclusion_integral(a, d, alpha, n_f, cfg.beta, los)
        out -= (vals @ weight).reshape(s.shape)
    return out


def laplace_interference(scenario: str, p_n: float, s, r, cfg: NetworkConfig):
    """Laplace transform ``E[exp(-s I)]`` of the interference on a link.

    ``r`` is the inverse biased power of the serving link; interferers of the
    truncated tier (caching BSs for BU/BR, relays for RU) cannot be stronger.
    """
    _check_link(scenario)
    if np.any(np.asarray(s) < 0) or np.any(np.asarray(r) < 0):
        raise ValidationError("s and r must be >= 0", "s")
    out = np.exp(log_laplace_interference(scenario, p_n, s, r, cfg))
    return float(out) if np.ndim(s) == 0 and np.ndim(r) == 0 else out


# ---------------------------------------------------------------------------
# conditional success probabilities
# ---------------------------------------------------------------------------

def alzer_terms(n_fading: int):
    """``(u, signed binomial coefficient, eta)`` of the Gamma-tail approximation."""
    eta = n_fading * math.factorial(n_fading) ** (-1.0 / n_fading)
    u = np.arange(1, n_fading + 1)
    coef = np.array([(-1) ** (k + 1) * math.comb(n_fading, k) for k in u], dtype=float)
    return u.astype(float), coef, eta


def link_success(scenario: str, p_n: float, nu: float, x, cfg: NetworkConfig):
    """Probability that a link whose serving node sits at inverse power ``x`` clears SINR ``nu``."""
    x = np.asarray(x, dtype=float)
    tier = _link_tier(scenario, p_n, cfg, False)
    bias = cfg.b_rn if scenario == "RU" else cfg.b_bs
    share_l = los_share(tier, x)
    u_l, coef_l, eta_l = alzer_terms(cfg.n_los)
    u_n, coef_n, eta_n = alzer_terms(cfg.n_nlos)
    mult = np.concatenate([u_l * eta_l, u_n * eta_n])
    coef = np.concatenate([coef_l, coef_n])
    # nodes too weak for any finite Laplace argument cannot clear nu
    reach = np.isfinite(x) & (x * (mult.max() * nu * bias) < 1e300)
    xr = np.where(reach, x, 0.0)
    s = mult[:, None] * (nu * bias) * xr[None, :]
    log_l = log_laplace_interference(scenario, p_n, s, xr[None, :], cfg)
    terms = coef[:, None] * np.exp(log_l - s * cfg.noise_power)
    k = cfg.n_los
    out = share_l * terms[:k].sum(axis=0) + (1.0 - share_l) * terms[k:].sum(axis=0)
    return np.where(reach, out, 0.0)


def _conditional(scenario: str, p_n: float, nu: float, cfg: NetworkConfig, rule: QuadratureRule) -> float:
    try:
        x, w, _ = _link_weights(scenario, p_n, cfg, rule)
    except DegenerateDistributionError:
        if p_n > 0 and scenario != "RU":
            return 0.0  # caching tier so sparse that no node is within reach
        raise
    ok = w > 0
    return float(np.dot(w[ok], link_success(scenario, p_n, nu, x[ok], cfg)))


def sbop_one_hop(p_n: float, nu_n: float, cfg: NetworkConfig, rule: QuadratureRule | None = None) -> float:
    """Conditional success probability of a one-hop delivery of a file cached with ``p_n``."""
    if not 0 <= p_n <= 1:
        raise ValidationError("p_n must lie in [0, 1]", "p_n")
    if nu_n <= 0:
        raise ValidationError("SINR threshold must be > 0", "nu_n")
    if p_n == 0 or math.isinf(nu_n):
        return 0.0
    rule = rule or gauss_laguerre(DEFAULT_ORDER)
    return min(max(_conditional("BU", p_n, nu_n, cfg, rule), 0.0), 1.0)


def sbop_two_hop(p_n: float, nu_n: float, cfg: NetworkConfig, rule: QuadratureRule | None = None) -> float:
    """Conditional success probability of a relayed delivery (both hops must succeed)."""
    if not 0 <= p_n <= 1:
        raise ValidationError("p_n must lie in [0, 1]", "p_n")
    if nu_n <= 0:
        raise ValidationError("SINR threshold must be > 0", "nu_n")
    if p_n == 0 or cfg.lambda_rn == 0 or math.isinf(nu_n):
        return 0.0
    rule = rule or gauss_laguerre(DEFAULT_ORDER)
    br = _conditional("BR", p_n, nu_n, cfg, rule)
    ru = _conditional("RU", p_n, nu_n, cfg, rule)
    return min(max(br, 0.0), 1.0) * min(max(ru, 0.0), 1.0)


@dataclass(frozen=True, eq=False)
class SbopBreakdown:
    """Total SBOP with its per-file conditional components.

    ``per_file[n] = (one-hop, two-hop)`` conditional success probabilities.
    """

    total: float
    per_file: np.ndarray
    p_one_hop: float
    p_two_hop: float
    popularity: np.ndarray

    def per_file_contribution(self) -> np.ndarray:
        return self.popularity * (self.p_one_hop * self.per_file[:, 0] + self.p_two_hop * self.per_file[:, 1])


def file_sbop(p_n: float, nu_n: float, cfg: NetworkConfig, rule: QuadratureRule | None = None) -> tuple[float, float]:
    return sbop_one_hop(p_n, nu_n, cfg, rule), sbop_two_hop(p_n, nu_n, cfg, rule)


def total_sbop(
    policy: CachingPolicy | np.ndarray,
    catalog: ContentCatalog,
    cfg: NetworkConfig,
    rule: QuadratureRule | None = None,
) -> SbopBreakdown:
    """Average the per-file conditional success over file popularity and hop type."""
    if not isinstance(policy, CachingPolicy):
        policy = CachingPolicy(np.asarray(policy, dtype=float))
    if len(policy) != catalog.f_count:
        raise ValidationError("policy length must equal the number of files", "policy")
    rule = rule or gauss_laguerre(DEFAULT_ORDER)
    p2 = two_hop_probability(cfg)
    p1 = 1.0 - p2
    per_file = np.zeros((catalog.f_count, 2))
    for n, (p, nu) in enumerate(zip(policy.probs, catalog.sinr_thresholds)):
        p = float(min(max(p, 0.0), 1.0))
        per_file[n, 0] = sbop_one_hop(p, float(nu), cfg, rule)
        per_file[n, 1] = sbop_two_hop(p, float(nu), cfg, rule) if p2 > 0 else 0.0
    total = float(np.dot(catalog.popularity, p1 * per_file[:, 0] + p2 * per_file[:, 1]))
    return SbopBreakdown(min(max(total, 0.0), 1.0), per_file, p1, p2, catalog.popularity)


# ---------------------------------------------------------------------------
# noise-limited closed form
# ---------------------------------------------------------------------------

def snr_scale(cfg: NetworkConfig, power: float, nu):
    """``xi = gamma P M^2 / (sigma^2 nu)``: the largest ``r^alpha / |h|^2`` still decodable."""
    if cfg.noise_power <= 0:
        raise ValidationError("the noise-limited model needs noise_power > 0", "noise_power")
    return cfg.gamma_intercept * power * cfg.serving_gain / (cfg.noise_power * np.asarray(nu, dtype=float))


def _y_state(xi: float, density: float, alpha: float, n_f: int, beta: float) -> float:
    # int 2 pi lambda r e^{-beta r} Q(N, N r^alpha / xi) dr, Q the regularized upper gamma
    if density == 0:
        return 0.0
    r_max = (60.0 * xi / n_f) ** (1.0 / alpha)

    def integrand(r):
        return r * math.exp(-beta * r) * special.gammaincc(n_f, n_f * r**alpha / xi)

    knee = min(r_max, xi ** (1.0 / alpha))
    val = 0.0
    for lo, hi in ((0.0, knee), (knee, r_max)):
        if hi > lo:
            val += integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    return 2.0 * math.pi * density * val


def y_coefficient(xi: float, density: float, cfg: NetworkConfig) -> float:
    """Blockage correction to the coverage exponent (LOS gain minus the NLOS overcount)."""
    y_l = _y_state(xi, density, cfg.alpha_los, cfg.n_los, cfg.beta)
    y_n = _y_state(xi, density, cfg.alpha_nlos, cfg.n_nlos, cfg.beta)
    return y_l - y_n


def c_coefficient(density: float, cfg: NetworkConfig) -> float:
    """Coverage constant of an all-NLOS PPP: ``pi lambda E[h^kappa]`` with ``h ~ Gamma(N_N, 1/N_N)``."""
    kappa = 2.0 / cfg.alpha_nlos
    n = cfg.n_nlos
    return math.pi * density * math.exp(special.gammaln(kappa + n) - special.gammaln(n)) / n**kappa


def coverage_exponent(xi: float, density: float, cfg: NetworkConfig) -> float:
    """Mean number of nodes whose SNR clears the threshold (``T`` in ``1 - e^-T``)."""
    kappa = 2.0 / cfg.alpha_nlos
    return c_coefficient(density, cfg) * xi**kappa + y_coefficient(xi, density, cfg)


def noise_limited_coefficients(catalog: ContentCatalog, cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-file ``(K_n, T_n)`` of the noise-limited objective ``sum K a (1 - e^{-p T})``."""
    p2 = two_hop_probability(cfg)
    p1 = 1.0 - p2
    xi_bs = snr_scale(cfg, cfg.p_bs, catalog.sinr_thresholds)
    xi_rn = snr_scale(cfg, cfg.p_rn, catalog.sinr_thresholds)
    t = np.array([coverage_exponent(float(x), cfg.lambda_bs, cfg) for x in xi_bs])
    if cfg.lambda_rn > 0:
        t_rn = np.array([coverage_exponent(float(x), cfg.lambda_rn, cfg) for x in xi_rn])
        k = p1 + -np.expm1(-t_rn) * p2
    else:
        k = np.full(catalog.f_count, p1)
    return k, t


def noise_limited_value(probs, k, t, popularity) -> float:
    p = np.asarray(probs, dtype=float)
    return float(np.sum(k * popularity * -np.expm1(-p * t)))


def sbop_noise_limited(policy: CachingPolicy | np.ndarray, catalog: ContentCatalog, cfg: NetworkConfig) -> float:
    """Closed-form SBOP when interference is neglected."""
    probs = policy.probs if isinstance(policy, CachingPolicy) else np.asarray(policy, dtype=float)
    if probs.shape != (catalog.f_count,):
        raise ValidationError("policy length must equal the number of files", "policy")
    k, t = noise_limited_coefficients(catalog, cfg)
    return noise_limited_value(probs, k, t, catalog.popularity)
