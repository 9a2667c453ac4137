"""Monte Carlo simulation of cache-enabled, relay-assisted mmWave deployments.

Each deployment drops BSs and RNs as Poisson processes in a square with the
typical UE at its centre, fills the BS caches, realizes link blockage, runs the
BS/RN selection rule on fading-free biased powers and then checks the SINR of
every hop with fresh Nakagami fading and random interferer antenna gains.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .model import (
    CachingPolicy,
    ContentCatalog,
    NetworkConfig,
    config_gain_pattern,
    mpc_policy,
    uc_policy,
)

__all__ = [
    "Deployment",
    "LinkRealization",
    "TrialOutcome",
    "AssociationDecision",
    "SimulationResult",
    "sample_deployment",
    "place_caches",
    "select_nodes",
    "run_trials",
    "mpc_policy",
    "uc_policy",
]

ONE_HOP, TWO_HOP, NONE = "one_hop", "two_hop", "none"
MAX_RESAMPLE = 1000


def _seed_int(seed) -> int:
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, np.uint64)[0])
    return int(seed)


def _los(rng: np.random.Generator, dist: np.ndarray, beta: float) -> np.ndarray:
    return rng.random(dist.shape) < np.exp(-beta * dist)


@dataclass(frozen=True, eq=False)
class Deployment:
    """One network realization around a typical UE.

    Link states are realized once per transmitter/receiver pair.  ``los_rn_rn``
    is symmetric; its diagonal is unused.
    """

    bs_positions: np.ndarray
    rn_positions: np.ndarray
    ue_position: np.ndarray
    los_bs_ue: np.ndarray
    los_rn_ue: np.ndarray
    los_bs_rn: np.ndarray
    los_rn_rn: np.ndarray
    rng_seed: int = 0
    cache_contents: np.ndarray | None = None

    @property
    def n_bs(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def n_rn(self) -> int:
        return self.rn_positions.shape[0]

    def with_caches(self, caches: np.ndarray) -> "Deployment":
        caches = np.asarray(caches, dtype=bool)
        if caches.ndim != 2 or caches.shape[0] != self.n_bs:
            raise ValidationError("cache matrix must have one row per BS", "cache_contents")
        return replace(self, cache_contents=caches)

    def dist_bs_ue(self) -> np.ndarray:
        return np.linalg.norm(self.bs_positions - self.ue_position, axis=1)

    def dist_rn_ue(self) -> np.ndarray:
        return np.linalg.norm(self.rn_positions - self.ue_position, axis=1)

    def dist_bs_rn(self) -> np.ndarray:
        return np.linalg.norm(self.bs_positions[:, None, :] - self.rn_positions[None, :, :], axis=2)

    def dist_rn_rn(self) -> np.ndarray:
        return np.linalg.norm(self.rn_positions[:, None, :] - self.rn_positions[None, :, :], axis=2)


@dataclass(frozen=True)
class LinkRealization:
    distance: float
    is_los: bool
    fading_power: float
    gain: float


@dataclass(frozen=True)
class AssociationDecision:
    """Outcome of the BS/RN selection rule for one request.

    ``cache_hit`` is False when no BS holds the file and the UE was associated
    by power alone (an offload failure whatever the SINR).
    """

    kind: str
    bs: int
    rn: int
    cache_hit: bool
    p_one_hop: float
    p_two_hop: float


@dataclass
class TrialOutcome:
    deployment_id: int
    requested_file: int
    association_type: str
    offload_success: bool
    cache_hit: bool
    sinr: dict = field(default_factory=dict)
    full_tier_type: str = ONE_HOP


@dataclass
class SimulationResult:
    sbop: float
    std_error: float
    n_deployments: int
    association_counts: dict
    full_tier_two_hop: float
    per_file_success: np.ndarray
    per_file_requests: np.ndarray
    conditional: dict
    outcomes: list

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["deployment", "file", "association", "cache_hit", "sinr_bu", "sinr_br", "sinr_ru", "success"])
            for o in self.outcomes:
                w.writerow([
                    o.deployment_id, o.requested_file, o.association_type, int(o.cache_hit),
                    *(f"{o.sinr[k]:.9g}" if k in o.sinr else "" for k in ("BU", "BR", "RU")),
                    int(o.offload_success),
                ])


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _draw_points(rng: np.random.Generator, density: float, side: float) -> np.ndarray:
    n = rng.poisson(density * side * side) if density > 0 else 0
    return rng.uniform(0.0, side, size=(n, 2))


def realize_links(bs: np.ndarray, rn: np.ndarray, ue: np.ndarray, beta: float, rng: np.random.Generator):
    """Blockage states of every BS-UE, RN-UE, BS-RN and RN-RN pair."""
    los_bu = _los(rng, np.linalg.norm(bs - ue, axis=1), beta)
    los_ru = _los(rng, np.linalg.norm(rn - ue, axis=1), beta)
    los_br = _los(rng, np.linalg.norm(bs[:, None, :] - rn[None, :, :], axis=2), beta)
    upper = np.triu(_los(rng, np.linalg.norm(rn[:, None, :] - rn[None, :, :], axis=2), beta), 1)
    return los_bu, los_ru, los_br, upper | upper.T


def sample_deployment(cfg: NetworkConfig, seed, require_bs: bool = True) -> Deployment:
    """Drop BSs and RNs as PPPs in the simulation square; the UE sits at the centre.

    Realizations without any BS are redrawn when ``require_bs`` is set.
    """
    if cfg.area_side <= 0:
        raise ValidationError("area_side must be > 0", "area_side")
    seed_int = _seed_int(seed)
    rng = np.random.default_rng(seed_int)
    side = cfg.area_side
    for _ in range(MAX_RESAMPLE):
        bs = _draw_points(rng, cfg.lambda_bs, side)
        rn = _draw_points(rng, cfg.lambda_rn, side)
        if bs.shape[0] > 0 or not require_bs:
            break
    else:
        raise ValidationError("no BS in any resampled deployment; density too small for the area", "lambda_bs")
    ue = np.array([0.5 * side, 0.5 * side])
    links = realize_links(bs, rn, ue, cfg.beta, rng)
    return Deployment(bs, rn, ue, *links, rng_seed=seed_int)


def place_caches(deployment: Deployment, policy: CachingPolicy | np.ndarray, catalog: ContentCatalog, seed) -> np.ndarray:
    """Fill every BS cache so that file ``n`` is held with probability ``p_n``.

    The ``p_n`` segments are laid end to end on ``[0, sum p]``; a BS with
    uniform offset ``u`` caches the files whose segment contains ``u + k`` for
    some integer ``k``.  This yields exact marginals with at most
    ``ceil(sum p)`` files per cache.
    """
    probs = policy.probs if isinstance(policy, CachingPolicy) else np.asarray(policy, dtype=float)
    if probs.shape != (catalog.f_count,):
        raise ValidationError("policy length must equal the number of files", "policy")
    if probs.sum() > catalog.cache_size + 1e-9:
        raise ValidationError("policy exceeds the cache size", "policy")
    rng = np.random.default_rng(_seed_int(seed))
    u = rng.random(deployment.n_bs)
    edges = np.concatenate([[0.0], np.cumsum(np.clip(probs, 0.0, 1.0))])
    hits = np.ceil(edges[None, 1:] - u[:, None]) - np.ceil(edges[None, :-1] - u[:, None])
    return hits >= 1


# ---------------------------------------------------------------------------
# association
# ---------------------------------------------------------------------------

def _biased_power(p_bar: float, dist: np.ndarray, los: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    alpha = np.where(los, cfg.alpha_los, cfg.alpha_nlos)
    with np.errstate(divide="ignore"):
        return p_bar * np.maximum(dist, 1e-9) ** (-alpha)


def _associate(dep: Deployment, serving: np.ndarray, cfg: NetworkConfig):
    # best one-hop BS and best relay among the given serving BSs
    p_bu = _biased_power(cfg.p_bar_bs, dep.dist_bs_ue(), dep.los_bs_ue, cfg)
    idx = np.flatnonzero(serving)
    bs0 = int(idx[np.argmax(p_bu[idx])])
    p0 = float(p_bu[bs0])
    if dep.n_rn == 0:
        return ONE_HOP, bs0, -1, p0, 0.0
    p_ru = _biased_power(cfg.p_bar_rn, dep.dist_rn_ue(), dep.los_rn_ue, cfg)
    cand = np.flatnonzero(p_ru > p0)
    if cand.size == 0:
        return ONE_HOP, bs0, -1, p0, 0.0
    p_br = _biased_power(cfg.p_bar_bs, dep.dist_bs_rn()[np.ix_(idx, cand)], dep.los_bs_rn[np.ix_(idx, cand)], cfg)
    best_bs = np.argmax(p_br, axis=0)
    two = np.minimum(p_ru[cand], p_br[best_bs, np.arange(cand.size)])
    k = int(np.argmax(two))
    if two[k] > p0:
        return TWO_HOP, int(idx[best_bs[k]]), int(cand[k]), p0, float(two[k])
    return ONE_HOP, bs0, -1, p0, float(two[k])


def select_nodes(deployment: Deployment, requested_file: int, cfg: NetworkConfig) -> AssociationDecision:
    """Pick the serving BS and, if it pays off, a relay for ``requested_file``.

    Among the BSs caching the file, the strongest (biased, fading-free) one is
    the one-hop candidate.  Relays weaker than it are dropped; each remaining
    relay is paired with its strongest caching BS and the pair with the best
    weaker-hop power wins if that power beats the one-hop candidate.  When no
    BS caches the file the UE is associated over all BSs by power alone.
    """
    if deployment.n_bs == 0:
        return AssociationDecision(NONE, -1, -1, False, 0.0, 0.0)
    caches = deployment.cache_contents
    serving = caches[:, requested_file] if caches is not None else np.ones(deployment.n_bs, dtype=bool)
    hit = bool(np.any(serving))
    if not hit:
        serving = np.ones(deployment.n_bs, dtype=bool)
    kind, bs, rn, p1, p2 = _associate(deployment, serving, cfg)
    return AssociationDecision(kind, bs, rn, hit, p1, p2)


# ---------------------------------------------------------------------------
# SINR
# ---------------------------------------------------------------------------

def _fading(rng: np.random.Generator, los: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    shape = np.where(los, cfg.n_los, cfg.n_nlos).astype(float)
    return rng.gamma(shape, 1.0 / shape)


def _sinr(
    rng: np.random.Generator,
    signal: tuple[float, float, bool],
    interferers: Iterable[tuple[float, np.ndarray, np.ndarray]],
    cfg: NetworkConfig,
    gains: np.ndarray,
    gain_probs: np.ndarray,
) -> float:
    """SINR with fresh fading; ``signal`` is ``(power, distance, los)``.

    Each interferer group is ``(power, distances, los flags)`` and gets random
    antenna gains.
    """
    power, dist, los = signal
    alpha = cfg.alpha_los if los else cfg.alpha_nlos
    h = _fading(rng, np.array([los]), cfg)[0]
    s = power * cfg.serving_gain * cfg.gamma_intercept * h * max(dist, 1e-9) ** (-alpha)
    total = cfg.noise_power
    for p_tx, d, l in interferers:
        if d.size == 0:
            continue
        g = gains[rng.choice(gains.size, size=d.size, p=gain_probs)]
        a = np.where(l, cfg.alpha_los, cfg.alpha_nlos)
        total += float(np.sum(p_tx * g * cfg.gamma_intercept * _fading(rng, l, cfg) * np.maximum(d, 1e-9) ** (-a)))
    return s / total if total > 0 else math.inf


def _full_tier_type(dep: Deployment, cfg: NetworkConfig) -> str:
    kind, *_ = _associate(dep, np.ones(dep.n_bs, dtype=bool), cfg)
    return kind


def simulate_request(
    dep: Deployment,
    requested_file: int,
    nu: float,
    cfg: NetworkConfig,
    rng: np.random.Generator,
    deployment_id: int = 0,
) -> TrialOutcome:
    gp = config_gain_pattern(cfg)
    gains, probs = np.array(gp.gains), np.array(gp.probs)
    dec = select_nodes(dep, requested_file, cfg)
    out = TrialOutcome(deployment_id, requested_file, dec.kind, False, dec.cache_hit)
    out.full_tier_type = _full_tier_type(dep, cfg)
    d_bu, d_ru = dep.dist_bs_ue(), dep.dist_rn_ue()
    others_bs = np.arange(dep.n_bs) != dec.bs
    if dec.kind == ONE_HOP:
        sinr = _sinr(
            rng, (cfg.p_bs, d_bu[dec.bs], bool(dep.los_bs_ue[dec.bs])),
            [(cfg.p_bs, d_bu[others_bs], dep.los_bs_ue[others_bs]), (cfg.p_rn, d_ru, dep.los_rn_ue)],
            cfg, gains, probs,
        )
        out.sinr["BU"] = sinr
        ok = sinr > nu
    else:
        d_br, d_rr = dep.dist_bs_rn(), dep.dist_rn_rn()
        rn0 = dec.rn
        others_rn = np.arange(dep.n_rn) != rn0
        sinr_br = _sinr(
            rng, (cfg.p_bs, d_br[dec.bs, rn0], bool(dep.los_bs_rn[dec.bs, rn0])),
            [
                (cfg.p_bs, d_br[others_bs, rn0], dep.los_bs_rn[others_bs, rn0]),
                (cfg.p_rn, d_rr[others_rn, rn0], dep.los_rn_rn[others_rn, rn0]),
            ],
            cfg, gains, probs,
        )
        # the second slot sees an independent interference field
        sinr_ru = _sinr(
            rng, (cfg.p_rn, d_ru[rn0], bool(dep.los_rn_ue[rn0])),
            [(cfg.p_bs, d_bu, dep.los_bs_ue), (cfg.p_rn, d_ru[others_rn], dep.los_rn_ue[others_rn])],
            cfg, gains, probs,
        )
        out.sinr["BR"], out.sinr["RU"] = sinr_br, sinr_ru
        ok = sinr_br > nu and sinr_ru > nu
    out.offload_success = bool(ok and dec.cache_hit)
    return out


def run_trials(
    cfg: NetworkConfig,
    catalog: ContentCatalog,
    policy: CachingPolicy | np.ndarray,
    n_deployments: int,
    seed: int,
    keep_outcomes: bool = False,
) -> SimulationResult:
    """Estimate the SBOP from ``n_deployments`` independent deployments.

    Every deployment gets its own random stream spawned from ``seed``, so the
    estimate is bit-for-bit reproducible.
    """
    if n_deployments < 1:
        raise ValidationError("n_deployments must be >= 1", "n_deployments")
    if not isinstance(policy, CachingPolicy):
        policy = CachingPolicy(np.asarray(policy, dtype=float))
    policy.check_budget(catalog.cache_size)
    children = np.random.SeedSequence(seed).spawn(n_deployments)
    success = np.zeros(n_deployments, dtype=bool)
    counts = {ONE_HOP: 0, TWO_HOP: 0, NONE: 0}
    full_two = 0
    per_file_ok = np.zeros(catalog.f_count)
    per_file_req = np.zeros(catalog.f_count)
    cond = {ONE_HOP: [0, 0], TWO_HOP: [0, 0]}  # [successes, trials with a cache hit]
    outcomes = []
    for i, child in enumerate(children):
        s_dep, s_cache, s_trial = child.spawn(3)
        dep = sample_deployment(cfg, s_dep)
        dep = dep.with_caches(place_caches(dep, policy, catalog, s_cache))
        rng = np.random.default_rng(s_trial)
        n = int(rng.choice(catalog.f_count, p=catalog.popularity))
        out = simulate_request(dep, n, float(catalog.sinr_thresholds[n]), cfg, rng, i)
        success[i] = out.offload_success
        counts[out.association_type] += 1
        full_two += out.full_tier_type == TWO_HOP
        per_file_req[n] += 1
        per_file_ok[n] += out.offload_success
        if out.cache_hit and out.association_type in cond:
            cond[out.association_type][0] += out.offload_success
            cond[out.association_type][1] += 1
        if keep_outcomes:
            outcomes.append(out)
    est = float(success.mean())
    se = float(success.std(ddof=1) / math.sqrt(n_deployments)) if n_deployments > 1 else math.nan
    conditional = {k: (v[0] / v[1] if v[1] else math.nan) for k, v in cond.items()}
    return SimulationResult(
        est, se, n_deployments, counts, full_two / n_deployments,
        np.divide(per_file_ok, per_file_req, out=np.full(catalog.f_count, np.nan), where=per_file_req > 0),
        per_file_req, conditional, outcomes,
    )
