"""Pure-NumPy implementations of the hot kernels.

Used when the compiled extension is unavailable (or disabled with
``RELAYCACHE_PURE_PYTHON=1``).  Signatures and results match ``_kernels``.
"""
from __future__ import annotations

import numpy as np


def _nakagami_mgf_complement(z, n):
    # 1 - (1 + z)^-n, accurate for small z
    return -np.expm1(-n * np.log1p(z))


def exclusion_integrals(c, d, n, alpha, beta, los, y0, h, gl_x, gl_w, base, decay, t_min, t_max):
    """Evaluate ``int_d^inf (1 - (1 + c t^-alpha)^-n) rho(t) t dt`` for each row.

    ``rho`` is ``exp(-beta t)`` for line-of-sight interferers and its complement
    otherwise.  The integral runs over a shared composite Gauss-Legendre grid in
    ``log t`` (``base`` and ``decay`` hold the grid weights times ``rho t^2`` and
    ``t^-alpha``); the panel containing ``log d`` is re-integrated on its own.
    """
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    k_nodes = gl_x.size
    n_panels = base.size // k_nodes
    out = np.zeros(c.shape)
    if c.size == 0:
        return out

    yd = np.log(np.maximum(d, t_min))
    panel = np.clip(np.floor((yd - y0) / h).astype(np.int64), 0, n_panels)
    z = c[:, None] * decay[None, :]
    vals = base[None, :] * _nakagami_mgf_complement(z, n)
    keep = np.arange(base.size)[None, :] >= ((panel + 1) * k_nodes)[:, None]
    out += np.where(keep, vals, 0.0).sum(axis=1)

    # partial panel [log d, right edge]
    inside = panel < n_panels
    right = y0 + h * np.minimum(panel + 1, n_panels)
    half = 0.5 * (right - yd)
    tp = np.exp(yd[:, None] + half[:, None] * (gl_x[None, :] + 1.0))
    rho = np.exp(-beta * tp) if los else -np.expm1(-beta * tp)
    part = (gl_w[None, :] * rho * tp * tp * _nakagami_mgf_complement(c[:, None] * tp ** (-alpha), n)).sum(axis=1)
    out += np.where(inside, part * half, 0.0)

    # below the grid: the interference factor is frozen at its t_min value
    lo = np.minimum(d, t_min)
    near = 0.5 * (t_min**2 - lo**2) if los else beta * (t_min**3 - lo**3) / 3.0
    out += near * _nakagami_mgf_complement(c * t_min ** (-alpha), n)

    # beyond the grid: first order in the (tiny) interference factor
    t_far = np.maximum(d, t_max)
    tail = n * c * t_far ** (2.0 - alpha) / (alpha - 2.0)
    if los:
        tail = tail * np.exp(-beta * t_far)
    out += tail
    return out



Y_MAX = 700.0


def _h(z):
    # (1 - e^-z (1 + z)) / z^2 with a series near zero
    zb = np.maximum(z, 1e-3)
    with np.errstate(invalid="ignore", over="ignore"):
        big = -(np.expm1(-zb) + zb * np.exp(-zb)) / (zb * zb)
        series = 0.5 - z / 3.0 + z * z / 8.0 - z**3 / 30.0
    return np.where(z < 1e-3, series, big)


def _g(z):
    # 1/2 - _h(z) without cancellation
    with np.errstate(invalid="ignore", over="ignore"):
        series = z / 3.0 - z * z / 8.0 + z**3 / 30.0 - z**4 / 144.0
    return np.where(z < 1e-3, series, 0.5 - _h(z))


def _intensity_and_slope(y, density, p_bar, alpha_los, alpha_nlos, beta, los_only):
    # intensity at x = e^y and its logarithmic derivative d(intensity)/d(log x)
    xp = np.exp(y) * p_bar
    d_l = xp ** (1.0 / alpha_los)
    d_n = xp ** (1.0 / alpha_nlos)
    lam = 2.0 * np.pi * density
    total = lam * d_l * d_l * _h(beta * d_l)
    slope = lam * d_l * d_l * np.exp(-beta * d_l) / alpha_los
    if not los_only:
        total += lam * d_n * d_n * _g(beta * d_n)
        slope += lam * d_n * d_n * -np.expm1(-beta * d_n) / alpha_nlos
    return total, slope


def inverse_intensity(u, density, p_bar, alpha_los, alpha_nlos, beta, los_only, tol=1e-13, max_iter=400):
    """Solve ``intensity(x) = u`` by safeguarded Newton on ``log x``.

    The unblocked all-LOS and all-NLOS laws bracket the root.  Convergence is
    judged on ``|log intensity - log u|`` because the intensity can be nearly
    flat where LOS nodes are exhausted before NLOS nodes take over.
    """
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    pos = u > 0
    if los_only and beta > 1e-150:
        cap = 2.0 * np.pi * density / beta**2
        out[u >= cap] = np.inf
        pos &= u < cap
    target = np.log(u[pos])
    base = target - np.log(np.pi * density)
    y_l = 0.5 * alpha_los * base - np.log(p_bar)
    y_n = 0.5 * alpha_nlos * base - np.log(p_bar)
    if los_only:
        lo, hi = y_l - 1.0, np.full(y_l.shape, np.inf)
    else:
        lo, hi = np.minimum(y_l, y_n) - 1.0, np.maximum(y_l, y_n) + 1.0
    # roots beyond Y_MAX would overflow x; those nodes are out of reach
    top, _ = _intensity_and_slope(np.full(1, Y_MAX), density, p_bar, alpha_los, alpha_nlos, beta, los_only)
    hi = np.minimum(hi, Y_MAX)
    y = np.minimum(y_l, Y_MAX)
    active = target < np.log(top[0])
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        lam, slope = _intensity_and_slope(y[idx], density, p_bar, alpha_los, alpha_nlos, beta, los_only)
        g = np.log(lam) - target[idx]
        conv = np.abs(g) <= tol
        lo[idx] = np.where(g < 0, y[idx], lo[idx])
        hi[idx] = np.where(g > 0, y[idx], hi[idx])
        y_new = y[idx] - np.clip(g * lam / slope, -20.0, 20.0)
        outside = ~((y_new > lo[idx]) & (y_new < hi[idx]))
        y_new = np.where(outside & np.isfinite(hi[idx]), 0.5 * (lo[idx] + hi[idx]), y_new)
        # a collapsed bracket is as good as it gets
        conv |= (hi[idx] - lo[idx]) <= 1e-15 * np.maximum(1.0, np.abs(y[idx]))
        y[idx] = np.where(conv, y[idx], y_new)
        active[idx] = ~conv
    reach = target < np.log(top[0])
    y[active] = np.nan
    out[pos] = np.where(reach, np.exp(y), np.inf)
    return out
