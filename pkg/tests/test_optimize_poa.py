import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaycache.analytic import total_sbop
from relaycache.errors import ContractViolation, InvalidStateError, ValidationError
from relaycache.model import ContentCatalog, NetworkConfig
from relaycache.optimize_co import compute_kkt_coefficients, cp_co
from relaycache.optimize_poa import (
    SeparableObjective,
    _project_batch,
    analytic_objective,
    cp_poa,
    grid_search,
    noise_limited_objective,
    polish,
    project_to_boundary,
    simplex_member,
)

CFG = NetworkConfig()
CAT = ContentCatalog.build()


@pytest.fixture(scope="module")
def coeffs():
    return compute_kkt_coefficients(CAT, CFG)


def sub_objective(coeffs, f):
    a = CAT.popularity[:f] / CAT.popularity[:f].sum()
    return noise_limited_objective(coeffs.k[:f], coeffs.t[:f], a)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def test_projection_identity_inside():
    member = simplex_member(1.0)
    v = np.array([0.2, 0.3])
    np.testing.assert_array_equal(project_to_boundary(v, member), v)


def test_projection_symmetric_face():
    np.testing.assert_allclose(project_to_boundary(np.array([1.0, 1.0]), simplex_member(1.0)), [0.5, 0.5], atol=1e-9)


def test_projection_already_on_face():
    v = np.array([1.0, 0.5, 0.5])
    np.testing.assert_allclose(project_to_boundary(v, simplex_member(2.0)), v)


def test_projection_needs_feasible_origin():
    with pytest.raises(InvalidStateError):
        project_to_boundary(np.ones(2), lambda y: False)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=8), st.floats(0.1, 6.0))
def test_exact_projection_matches_bisection(v, cache):
    v = np.array(v)
    exact = _project_batch(v[None, :], cache)[0]
    bis = project_to_boundary(v, simplex_member(cache, shift=1.0))
    np.testing.assert_allclose(exact, bis, atol=5e-9)
    assert np.maximum(exact - 1.0, 0.0).sum() <= cache + 1e-9


# ---------------------------------------------------------------------------
# small instances
# ---------------------------------------------------------------------------

def test_box_optimum_feasible():
    obj = noise_limited_objective(np.ones(2), np.array([1.0, 2.0]), np.array([0.5, 0.5]))
    res = cp_poa(obj, 2, 2.0)
    np.testing.assert_allclose(res.probs, [1.0, 1.0])
    assert res.converged


def test_symmetric_pair():
    eps = 0.01
    obj = noise_limited_objective(np.ones(2), np.ones(2), np.array([0.5, 0.5]))
    res = cp_poa(obj, 2, 1.0, epsilon=eps)
    np.testing.assert_allclose(res.probs, [0.5, 0.5], atol=eps)
    assert res.probs.sum() <= 1.0 + 1e-9


@pytest.mark.parametrize("f, cache", [(3, 1.5), (4, 2.0), (4, 1.0)])
def test_matches_grid_search(coeffs, f, cache):
    eps = 0.01
    obj = sub_objective(coeffs, f)
    res = cp_poa(obj, f, cache, epsilon=eps)
    _, grid_value = grid_search(obj, f, cache, step=0.01)
    assert abs(res.value - grid_value) <= 2 * eps
    # the continuous optimum is never below the grid one
    assert res.value >= grid_value - 1e-9


def test_bounds_bracket_the_incumbent(coeffs):
    obj = sub_objective(coeffs, 4)
    res = cp_poa(obj, 4, 2.0, epsilon=1e-4, max_iter=400, keep_trace=True)
    ub = np.array(res.trace.upper_bounds)
    best = np.array(res.trace.best_values)
    assert ub.size > 5
    assert np.all(np.diff(ub) <= 1e-12)
    assert np.all(np.diff(best) >= 0)
    assert np.all(ub >= best - 1e-12)


def test_children_are_dominated_by_parent(coeffs):
    obj = sub_objective(coeffs, 3)
    res = cp_poa(obj, 3, 1.5, epsilon=1e-6, max_iter=200, keep_trace=True)
    for v in res.trace.vertices:
        assert np.all(v.coords <= 2.0)
        assert v.cached_objective == pytest.approx(float(obj(np.clip(v.coords - 1, 0, 1)[None, :])[0]))


@settings(max_examples=15, deadline=None)
@given(
    st.lists(st.floats(0.1, 30.0), min_size=2, max_size=5),
    st.floats(0.2, 0.9),
)
def test_output_feasible(t, frac):
    f = len(t)
    obj = noise_limited_objective(np.ones(f), np.array(t), np.full(f, 1.0 / f))
    res = cp_poa(obj, f, frac * f, max_iter=300)
    assert res.probs.sum() <= frac * f + 1e-9
    assert np.all((res.probs >= 0) & (res.probs <= 1))
    assert res.value == pytest.approx(float(obj(res.probs[None, :])[0]))


def test_agrees_with_cp_co_on_defaults(coeffs):
    eps = 0.01
    obj = noise_limited_objective(coeffs.k, coeffs.t, CAT.popularity)
    poa = cp_poa(obj, CAT.f_count, CAT.cache_size, epsilon=eps, max_iter=2000)
    co = cp_co(CAT, CFG, coeffs=coeffs)
    assert abs(poa.value - co.value) <= eps + 1e-6
    assert poa.probs.sum() <= CAT.cache_size + 1e-9


def test_rejects_decreasing_objective():
    with pytest.raises(ContractViolation):
        cp_poa(lambda p: -np.atleast_2d(p).sum(axis=1), 3, 1.0)


def test_argument_validation():
    obj = noise_limited_objective(np.ones(2), np.ones(2), np.full(2, 0.5))
    with pytest.raises(ValidationError):
        cp_poa(obj, 2, 1.0, epsilon=0.0)
    with pytest.raises(ValidationError):
        cp_poa(obj, 2, 0.0)


def test_iteration_cap_warns(coeffs, caplog):
    obj = noise_limited_objective(coeffs.k, coeffs.t, CAT.popularity)
    res = cp_poa(obj, CAT.f_count, CAT.cache_size, epsilon=1e-9, max_iter=5)
    assert not res.converged
    assert res.iterations == 5
    assert "iteration cap" in caplog.text
    assert res.probs.sum() <= CAT.cache_size + 1e-9


def test_polish_keeps_feasibility(coeffs):
    obj = sub_objective(coeffs, 4)
    start = np.array([0.25, 0.25, 0.25, 0.25])
    p = polish(obj, start, 2.0)
    assert p.sum() <= 2.0 + 1e-12
    assert obj(p[None, :])[0] >= obj(start[None, :])[0]


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------

def test_separable_objective_interpolates():
    grid = np.linspace(0, 1, 11)
    table = np.vstack([grid, 2 * grid**2])
    obj = SeparableObjective(grid, table)
    np.testing.assert_allclose(obj(np.array([[0.3, 0.5], [1.0, 0.0]])), [0.3 + 0.5, 1.0], atol=1e-12)
    assert obj(np.array([0.5, 0.5])).shape == (1,)
    with pytest.raises(ValidationError):
        SeparableObjective(grid, table[:, :5])


def test_analytic_objective_matches_total_sbop():
    cat = ContentCatalog.build(f_count=3, cache_size=1)
    obj = analytic_objective(cat, CFG)
    for p in ([1.0, 0.0, 0.0], [0.3, 0.3, 0.3], [0.0, 0.5, 0.5]):
        direct = total_sbop(np.array(p), cat, CFG).total
        assert float(obj(np.array(p))[0]) == pytest.approx(direct, abs=1e-5)


def test_grid_search_small():
    obj = noise_limited_objective(np.ones(2), np.ones(2), np.array([0.5, 0.5]))
    p, v = grid_search(obj, 2, 1.0, step=0.05)
    np.testing.assert_allclose(p, [0.5, 0.5])
    assert v == pytest.approx(float(obj(p[None, :])[0]))
