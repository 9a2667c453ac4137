import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaycache.analytic import total_sbop
from relaycache.errors import ValidationError
from relaycache.model import CachingPolicy, ContentCatalog, NetworkConfig, mpc_policy
from relaycache.simulate import (
    Deployment,
    _fading,
    place_caches,
    realize_links,
    run_trials,
    sample_deployment,
    select_nodes,
)

CFG = NetworkConfig()
CAT = ContentCatalog.build()


def fixture_deployment(bs, rn, los_bu, los_ru, los_br, caches=None, ue=(0.0, 0.0)):
    bs = np.array(bs, dtype=float).reshape(-1, 2)
    rn = np.array(rn, dtype=float).reshape(-1, 2)
    dep = Deployment(
        bs, rn, np.array(ue, dtype=float),
        np.array(los_bu, dtype=bool), np.array(los_ru, dtype=bool),
        np.array(los_br, dtype=bool).reshape(bs.shape[0], rn.shape[0]),
        np.ones((rn.shape[0], rn.shape[0]), dtype=bool),
    )
    if caches is not None:
        dep = dep.with_caches(np.array(caches, dtype=bool).reshape(bs.shape[0], -1))
    return dep


# ---------------------------------------------------------------------------
# deployments
# ---------------------------------------------------------------------------

def test_same_seed_same_deployment():
    a = sample_deployment(CFG, 42)
    b = sample_deployment(CFG, 42)
    np.testing.assert_array_equal(a.bs_positions, b.bs_positions)
    np.testing.assert_array_equal(a.rn_positions, b.rn_positions)
    np.testing.assert_array_equal(a.los_bs_rn, b.los_bs_rn)
    assert not np.array_equal(a.bs_positions, sample_deployment(CFG, 43).bs_positions)


def test_ue_at_centre_and_points_in_square():
    dep = sample_deployment(CFG, 1)
    np.testing.assert_allclose(dep.ue_position, [400.0, 400.0])
    assert np.all((dep.bs_positions >= 0) & (dep.bs_positions <= 800))


def test_poisson_counts():
    n = 1000
    counts = np.array([sample_deployment(CFG, s, require_bs=False).n_bs for s in range(n)])
    mean = CFG.lambda_bs * 800**2
    assert mean == pytest.approx(6.4)
    assert abs(counts.mean() - mean) <= 3 * math.sqrt(mean / n)
    assert abs(counts.var(ddof=1) - mean) <= 0.15 * mean


def test_zero_density_gives_no_nodes():
    dep = sample_deployment(CFG.with_(lambda_rn=0.0), 3)
    assert dep.n_rn == 0
    assert dep.los_bs_rn.shape == (dep.n_bs, 0)


def test_rejects_empty_area():
    with pytest.raises(ValidationError):
        sample_deployment(CFG.with_(area_side=0.0), 0)


# ---------------------------------------------------------------------------
# blockage and fading
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("r", [50.0, 500.0, 2000.0])
def test_los_fraction_matches_exponential(r):
    rng = np.random.default_rng(5)
    m = 20_000
    ue = np.zeros(2)
    bs = np.column_stack([np.full(m, r), np.zeros(m)])
    los, _, _, _ = realize_links(bs, np.zeros((0, 2)), ue, CFG.beta, rng)
    p = math.exp(-CFG.beta * r)
    assert abs(los.mean() - p) <= 3 * math.sqrt(p * (1 - p) / m) + 1e-12


@pytest.mark.parametrize("los", [True, False])
def test_fading_is_normalized(los):
    rng = np.random.default_rng(9)
    m = 50_000
    h = _fading(rng, np.full(m, los), CFG)
    shape = CFG.n_los if los else CFG.n_nlos
    assert np.all(h >= 0)
    assert abs(h.mean() - 1.0) <= 3 * math.sqrt(1.0 / shape / m)


def test_rn_pair_states_symmetric():
    dep = sample_deployment(CFG.with_(lambda_rn=1e-4), 11)
    np.testing.assert_array_equal(dep.los_rn_rn, dep.los_rn_rn.T)


# ---------------------------------------------------------------------------
# caches
# ---------------------------------------------------------------------------

def test_cache_two_files_one_slot():
    cat = ContentCatalog.build(f_count=2, cache_size=1)
    dep = fixture_deployment(np.zeros((10_000, 2)), np.zeros((0, 2)), np.ones(10_000), [], np.zeros((10_000, 0)))
    caches = place_caches(dep, np.array([0.5, 0.5]), cat, 8)
    np.testing.assert_array_equal(caches.sum(axis=1), 1)
    assert abs(caches[:, 0].mean() - 0.5) <= 0.02


def test_cache_extremes():
    dep = sample_deployment(CFG, 4)
    full = place_caches(dep, mpc_policy(CAT), CAT, 1)
    assert np.all(full[:, :10]) and not np.any(full[:, 10:])
    empty = place_caches(dep, np.zeros(CAT.f_count), CAT, 1)
    assert not empty.any()


def test_cache_rejects_over_budget():
    dep = sample_deployment(CFG, 4)
    with pytest.raises(ValidationError):
        place_caches(dep, np.full(CAT.f_count, 0.6), CAT, 1)
    with pytest.raises(ValidationError):
        place_caches(dep, np.full(3, 0.1), CAT, 1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8), st.integers(0, 2**32))
def test_cache_marginals_and_capacity(p, seed):
    p = np.array(p)
    cat = ContentCatalog.build(f_count=p.size, cache_size=p.size)
    m = 4000
    dep = fixture_deployment(np.zeros((m, 2)), np.zeros((0, 2)), np.ones(m), [], np.zeros((m, 0)))
    caches = place_caches(dep, p, cat, seed)
    assert caches.sum(axis=1).max() <= math.ceil(p.sum() - 1e-12) if p.sum() > 0 else caches.sum() == 0
    sigma = np.sqrt(p * (1 - p) / m)
    assert np.all(np.abs(caches.mean(axis=0) - p) <= 4.5 * sigma + 1e-9)


# ---------------------------------------------------------------------------
# association
# ---------------------------------------------------------------------------

def test_fixture_prefers_one_hop():
    # BS at 100 m (LOS) holds the file; RN at 10 m (LOS) reaches it only over an NLOS backhaul
    dep = fixture_deployment(
        [[100.0, 0.0], [-490.0, 100.0]], [[10.0, 0.0]],
        los_bu=[True, False], los_ru=[True], los_br=[[False], [False]], caches=[[1], [0]],
    )
    p_bs0 = CFG.p_bar_bs * 100.0**-2.5
    p_ru = CFG.p_bar_rn * 10.0**-2.5
    p_br = CFG.p_bar_bs * 90.0**-4.0
    assert p_ru > p_bs0 > p_br
    dec = select_nodes(dep, 0, CFG)
    assert dec.kind == "one_hop" and dec.bs == 0 and dec.cache_hit
    assert dec.p_one_hop == pytest.approx(p_bs0)
    assert dec.p_two_hop == pytest.approx(min(p_ru, p_br))


def test_fixture_two_hop():
    # weak NLOS direct link, strong LOS relay path
    dep = fixture_deployment(
        [[300.0, 0.0]], [[20.0, 0.0]], los_bu=[False], los_ru=[True], los_br=[[True]], caches=[[1]],
    )
    dec = select_nodes(dep, 0, CFG)
    assert dec.kind == "two_hop" and dec.rn == 0 and dec.bs == 0
    assert dec.p_two_hop > dec.p_one_hop
    assert dec.p_two_hop == pytest.approx(min(CFG.p_bar_rn * 20.0**-2.5, CFG.p_bar_bs * 280.0**-2.5))


def test_no_relays_is_one_hop():
    cfg = CFG.with_(lambda_rn=0.0)
    for s in range(30):
        dep = sample_deployment(cfg, s)
        dep = dep.with_caches(place_caches(dep, mpc_policy(CAT), CAT, s))
        assert select_nodes(dep, 0, cfg).kind == "one_hop"


def test_cache_miss_falls_back_to_power():
    dep = fixture_deployment(
        [[100.0, 0.0], [50.0, 0.0]], np.zeros((0, 2)), los_bu=[True, True], los_ru=[], los_br=np.zeros((2, 0)),
        caches=[[0], [0]],
    )
    dec = select_nodes(dep, 0, CFG)
    assert not dec.cache_hit
    assert dec.bs == 1


def test_two_hop_decisions_satisfy_the_rule():
    cfg = CFG.with_(lambda_rn=5e-5)
    seen = 0
    for s in range(200):
        dep = sample_deployment(cfg, s)
        dep = dep.with_caches(place_caches(dep, mpc_policy(CAT), CAT, s))
        dec = select_nodes(dep, 0, cfg)
        if dec.kind == "two_hop":
            seen += 1
            assert dec.p_two_hop > dec.p_one_hop
    assert seen > 0


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------

def test_trials_are_reproducible():
    a = run_trials(CFG, CAT, mpc_policy(CAT), 100, 2024)
    b = run_trials(CFG, CAT, mpc_policy(CAT), 100, 2024)
    assert a.sbop == b.sbop and a.std_error == b.std_error
    assert a.association_counts == b.association_counts


def test_unreachable_threshold_gives_zero():
    cat = CAT.with_sinr_threshold_db(200.0, CFG.bandwidth)
    res = run_trials(CFG, cat, mpc_policy(cat), 200, 1)
    assert res.sbop == 0.0


def test_empty_caches_never_succeed():
    res = run_trials(CFG, CAT, np.zeros(CAT.f_count), 200, 1)
    assert res.sbop == 0.0


def test_full_caching_close_to_analytic():
    cat = ContentCatalog.build(f_count=5, cache_size=5)
    probs = np.ones(5)
    res = run_trials(CFG, cat, probs, 2000, 7)
    ref = total_sbop(probs, cat, CFG).total
    assert abs(res.sbop - ref) <= 0.1 * ref


def test_trial_records(tmp_path):
    res = run_trials(CFG, CAT, CachingPolicy(np.full(CAT.f_count, 0.5)), 20, 3, keep_outcomes=True)
    assert len(res.outcomes) == 20
    assert sum(res.association_counts.values()) == 20
    assert res.per_file_requests.sum() == 20
    for o in res.outcomes:
        if o.offload_success:
            assert o.cache_hit
            nu = CAT.sinr_thresholds[o.requested_file]
            assert all(v > nu for v in o.sinr.values())
    path = tmp_path / "trials.csv"
    res.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("deployment,file,association")
    assert len(lines) == 21


def test_trials_validation():
    with pytest.raises(ValidationError):
        run_trials(CFG, CAT, mpc_policy(CAT), 0, 1)
    with pytest.raises(ValidationError):
        run_trials(CFG, CAT, np.ones(CAT.f_count), 10, 1)
