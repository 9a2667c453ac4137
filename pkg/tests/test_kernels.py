import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import relaycache.analytic as an
from relaycache import _fallback, kernels
from relaycache.model import NetworkConfig

compiled = pytest.importorskip("relaycache._kernels")

CFG = NetworkConfig()


def both(monkeypatch, name, fn):
    """Evaluate ``fn`` once on each backend."""
    out = []
    for impl in (compiled, _fallback):
        monkeypatch.setattr(an.kernels, name, getattr(impl, name))
        out.append(fn())
    return out


def test_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")


@pytest.mark.parametrize("los", [True, False])
@pytest.mark.parametrize("beta", [0.0, 4e-4, 1e-2])
def test_exclusion_integrals_agree(monkeypatch, los, beta):
    a = np.geomspace(1e-3, 1e9, 25)
    d = np.geomspace(1e-3, 3e3, 25)
    fast, slow = both(monkeypatch, "exclusion_integrals", lambda: an.exclusion_integral(a, d, 2.5, 3, beta, los))
    # summation order differs between backends
    np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-300)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(1e-7, 1e-3),
    st.floats(1e-6, 1e-3),
    st.sampled_from([0.0, 1e-5, 4e-4, 5e-3]),
    st.booleans(),
)
def test_inverse_intensity_agree(density, p_bar, beta, los_only):
    tier = an.TierSpec(density, p_bar, 2.5, 4.0, beta, los_only)
    u = np.concatenate([[0.0], np.geomspace(1e-9, 50.0, 40)])
    args = (np.ascontiguousarray(u), density, p_bar, 2.5, 4.0, beta, los_only)
    fast = compiled.inverse_intensity(*args)
    slow = _fallback.inverse_intensity(*args)
    np.testing.assert_allclose(fast, slow, rtol=1e-10)
    ok = np.isfinite(fast)
    np.testing.assert_allclose(an.intensity(tier, fast[ok]), u[ok], rtol=1e-9, atol=1e-300)


def test_total_sbop_same_on_both_backends(monkeypatch):
    probs = np.full(20, 0.5)
    from relaycache.model import ContentCatalog

    cat = ContentCatalog.build()

    def value():
        return an.total_sbop(probs, cat, CFG).total

    for name in ("exclusion_integrals", "inverse_intensity"):
        monkeypatch.setattr(an.kernels, name, getattr(compiled, name))
    fast = value()
    for name in ("exclusion_integrals", "inverse_intensity"):
        monkeypatch.setattr(an.kernels, name, getattr(_fallback, name))
    slow = value()
    assert fast == pytest.approx(slow, abs=1e-12)
