"""Gauss-Laguerre quadrature for integrals of the form int_0^inf e^-u g(u) du."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericError, ValidationError

MAX_ORDER = 128


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, g) -> float:
        """Approximate ``int_0^inf e^-u g(u) du``; ``g`` must accept an array."""
        return float(np.dot(self.weights, g(self.nodes)))


def _laguerre_scaled(q: int, x: float) -> tuple[float, float, float]:
    """Return ``(L_q(x), L_{q-1}(x), log_scale)`` with both values divided by exp(log_scale).

    The three-term recurrence overflows for large ``x`` and ``q``; the pair is
    rescaled whenever it grows big and the accumulated log factor is returned.
    """
    p_prev, p = 1.0, 1.0 - x
    if q == 0:
        return 1.0, 0.0, 0.0
    log_scale = 0.0
    for k in range(1, q):
        p_prev, p = p, ((2 * k + 1 - x) * p - k * p_prev) / (k + 1)
        big = abs(p)
        if big > 1e150:
            p /= big
            p_prev /= big
            log_scale += math.log(big)
    return p, p_prev, log_scale


def _initial_guess(i: int, q: int, roots: list[float]) -> float:
    # standard asymptotic starting points for the Laguerre zeros (alpha = 0)
    if i == 0:
        return 3.0 / (1.0 + 2.4 * q)
    if i == 1:
        return roots[0] + 15.0 / (1.0 + 2.5 * q)
    ai = i - 1
    return roots[i - 1] + (1.0 + 2.55 * ai) / (1.9 * ai) * (roots[i - 1] - roots[i - 2])


@lru_cache(maxsize=None)
def _rule(q: int) -> QuadratureRule:
    roots: list[float] = []
    for i in range(q):
        z = _initial_guess(i, q, roots)
        for it in range(200):
            p, p_prev, _ = _laguerre_scaled(q, z)
            dp = q * (p - p_prev) / z
            step = p / dp
            z -= step
            if abs(step) <= 1e-14 * max(1.0, abs(z)):
                break
        else:
            raise NumericError(
                f"Laguerre root {i} of order {q} did not converge (last z={z!r}, step={step!r})"
            )
        roots.append(z)
    nodes = np.array(roots)
    if np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
        raise NumericError(f"Laguerre roots of order {q} are not strictly increasing: {nodes}")

    log_w = np.empty(q)
    for i, z in enumerate(roots):
        lq1, _, log_scale = _laguerre_scaled(q + 1, z)
        log_w[i] = math.log(z) - 2.0 * math.log(q + 1) - 2.0 * (math.log(abs(lq1)) + log_scale)
    weights = np.exp(log_w)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=q)


def gauss_laguerre(q1: int) -> QuadratureRule:
    """Gauss-Laguerre rule of order ``q1``.

    Nodes are the zeros of the Laguerre polynomial ``L_q1`` (Newton iteration on
    the three-term recurrence) and the weights are
    ``w_i = r_i / ((q1 + 1)^2 L_{q1+1}(r_i)^2)``.
    """
    if int(q1) != q1 or not 1 <= q1 <= MAX_ORDER:
        raise ValidationError(f"quadrature order must be an integer in [1, {MAX_ORDER}]", "q1")
    return _rule(int(q1))
