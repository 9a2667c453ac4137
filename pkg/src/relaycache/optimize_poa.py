"""Globally optimal caching placement by polyblock outer approximation.

The feasible set ``{p in [0,1]^F : sum p <= C}`` is handled in the shifted
coordinates ``y = p + 1``.  Its normal hull there,
``{0 <= y <= 2 : sum max(y - 1, 0) <= C}``, is downward closed and bounded away
from the origin along every direction we project on.  The algorithm keeps a set
of vertices whose boxes ``[0, v]`` cover the optimum; the vertex with the
largest objective bound is projected onto the boundary of the feasible set and
replaced by its ``F`` children.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ContractViolation, InvalidStateError, ValidationError
from .optimize_co import OptimizationResult

log = logging.getLogger(__name__)

MAX_VERTICES = 100_000
MAX_ITERATIONS = 10_000
PROJECTION_TOL = 1e-9
# iterations between local refinements of the incumbent
POLISH_EVERY = 50

Objective = Callable[[np.ndarray], np.ndarray]


@dataclass(order=True)
class Vertex:
    # heap key first: larger bound pops first
    sort_key: float
    seq: int
    coords: np.ndarray = field(compare=False)
    cached_objective: float = field(compare=False)


@dataclass
class PolyblockState:
    vertices: list
    iteration: int
    best_point: np.ndarray
    best_value: float
    epsilon: float
    upper_bounds: list = field(default_factory=list)
    best_values: list = field(default_factory=list)


def project_to_boundary(v, member: Callable[[np.ndarray], bool], tol: float = PROJECTION_TOL) -> np.ndarray:
    """Scale ``v`` toward the origin until it touches the feasible set.

    Returns ``g * v`` with ``g = max{g in [0, 1] : g v feasible}``, located by
    bisection on ``g``.
    """
    v = np.asarray(v, dtype=float)
    if not member(np.zeros_like(v)):
        raise InvalidStateError("the origin must be feasible for the projection")
    if member(v):
        return v.copy()
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if member(mid * v):
            lo = mid
        else:
            hi = mid
    return lo * v


def simplex_member(cache_size: float, shift: float = 0.0, slack: float = 1e-12):
    """Membership oracle of ``{sum max(y - shift, 0) <= C, y <= 1 + shift}``."""

    def member(y):
        p = np.maximum(np.asarray(y) - shift, 0.0)
        return bool(p.sum() <= cache_size + slack and np.all(p <= 1.0 + slack))

    return member


def _project_batch(v: np.ndarray, cache_size: float) -> np.ndarray:
    """Exact projection of each row onto the shifted cache set.

    Along the ray ``g v`` the used budget ``sum max(g v_i - 1, 0)`` is piecewise
    linear in ``g`` with breakpoints ``1 / v_i``, so the crossing with ``C`` is
    found by sorting instead of bisection.
    """
    v = np.atleast_2d(v)
    order = -np.sort(-v, axis=1)
    k = np.arange(1, v.shape[1] + 1)
    cum = np.cumsum(order, axis=1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = (cache_size + k) / cum
        nxt = np.concatenate([order[:, 1:], np.zeros((v.shape[0], 1))], axis=1)
        valid = (g * order >= 1.0 - 1e-12) & (g * nxt <= 1.0 + 1e-12)
    pick = np.where(valid, g, np.inf).min(axis=1)
    used = np.maximum(v - 1.0, 0.0).sum(axis=1)
    gamma = np.where(used <= cache_size + 1e-12, 1.0, np.minimum(pick, 1.0))
    return gamma[:, None] * v


def check_monotone(objective: Objective, f_count: int, rng: np.random.Generator, samples: int = 4, step: float = 1e-3, tol: float = 1e-9):
    """Spot-check that ``objective`` does not decrease along any coordinate."""
    base = rng.uniform(0.0, 1.0 - step, size=(samples, f_count))
    probes = np.repeat(base, f_count, axis=0) + step * np.tile(np.eye(f_count), (samples, 1))
    f0 = np.repeat(objective(base), f_count)
    f1 = objective(probes)
    worst = float(np.min(f1 - f0))
    if worst < -tol:
        raise ContractViolation(f"objective decreases along a coordinate (forward difference {worst:.3g})")


def cp_poa(
    objective: Objective,
    f_count: int,
    cache_size: float,
    epsilon: float = 0.01,
    max_iter: int = MAX_ITERATIONS,
    max_vertices: int = MAX_VERTICES,
    check: bool = True,
    seed: int = 0,
    keep_trace: bool = False,
) -> OptimizationResult:
    """Maximize an increasing function of the caching probabilities.

    Parameters
    ----------
    objective
        Vectorized: maps an ``(m, F)`` array of probabilities in ``[0, 1]`` to
        ``m`` values; must be nondecreasing in every coordinate.
    f_count, cache_size
        Number of files and cache budget ``C``.
    epsilon
        Relative distance between the best vertex and its projection at which
        the search stops.

    Returns
    -------
    OptimizationResult
        Best feasible policy found, its value and the iteration count.
        ``converged`` is False when an iteration cap was hit.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be > 0", "epsilon")
    if f_count < 1:
        raise ValidationError("f_count must be >= 1", "f_count")
    if cache_size <= 0:
        raise ValidationError("cache_size must be > 0", "cache_size")
    if check:
        check_monotone(objective, f_count, np.random.default_rng(seed))

    def value(y):
        return np.asarray(objective(np.clip(y - 1.0, 0.0, 1.0)), dtype=float)

    counter = itertools.count()
    top = np.full((1, f_count), 2.0)
    top_value = float(value(top)[0])
    heap = [Vertex(-top_value, next(counter), top[0], top_value)]
    z0 = _project_batch(top, cache_size)
    p0 = polish(objective, np.clip(z0[0] - 1.0, 0.0, 1.0), cache_size)
    state = PolyblockState(heap, 0, p0 + 1.0, float(objective(p0[None, :])[0]), epsilon)

    def offer(points):
        vals = value(points)
        i = int(np.argmax(vals))
        if vals[i] > state.best_value:
            state.best_value, state.best_point = float(vals[i]), points[i].copy()
            return True
        return False

    converged = False
    improved = False
    for it in range(1, max_iter + 1):
        state.iteration = it
        if not heap:
            converged = True  # every remaining box was bounded by the incumbent
            break
        v = heapq.heappop(heap)
        if keep_trace:
            state.upper_bounds.append(v.cached_objective)
            state.best_values.append(state.best_value)
        # no box can beat the incumbent by more than a relative epsilon
        if v.cached_objective <= state.best_value + epsilon * abs(state.best_value):
            converged = True
            break
        z = _project_batch(v.coords[None, :], cache_size)[0]
        improved |= offer(z[None, :])
        if np.linalg.norm(v.coords - z) <= epsilon * np.linalg.norm(v.coords):
            converged = True
            break

        # children: lower one coordinate of v to the projection's
        children = np.repeat(v.coords[None, :], f_count, axis=0)
        idx = np.arange(f_count)
        children[idx, idx] = z
        children = children[v.coords - z > 0]
        if children.size == 0:
            continue
        improved |= offer(_project_batch(children, cache_size))
        if improved and it % POLISH_EVERY == 0:
            p_best = polish(objective, np.clip(state.best_point - 1.0, 0.0, 1.0), cache_size)
            offer(p_best[None, :] + 1.0)
            improved = False
        bounds = value(children)
        threshold = state.best_value + epsilon * abs(state.best_value)
        for c, b in zip(children, bounds):
            if b > threshold:
                heapq.heappush(heap, Vertex(-float(b), next(counter), c, float(b)))
        if len(heap) > max_vertices:
            # drop the weakest bounds in one batch so the trim is amortized
            heap = heapq.nsmallest(max_vertices * 3 // 4, heap)
            heapq.heapify(heap)
            state.vertices = heap
    else:
        log.warning("polyblock search stopped at the iteration cap (%d)", max_iter)

    p_best = polish(objective, np.clip(state.best_point - 1.0, 0.0, 1.0), cache_size)
    offer(p_best[None, :] + 1.0)
    p = np.clip(state.best_point - 1.0, 0.0, 1.0)
    result = OptimizationResult(p, state.best_value, state.iteration, converged)
    if keep_trace:
        object.__setattr__(result, "trace", state)
    return result


def polish(objective: Objective, p: np.ndarray, cache_size: float, step: float = 0.05, min_step: float = 1e-6, max_rounds: int = 2000) -> np.ndarray:
    """Improve a feasible policy by moving probability mass between file pairs.

    Only the incumbent is touched, so the polyblock bounds stay valid.  Any
    unused budget is first handed to the file with the best marginal gain.
    """
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0).copy()
    f_count = p.size
    eye = np.eye(f_count)
    current = float(objective(p[None, :])[0])
    for _ in range(max_rounds):
        if step < min_step:
            break
        slack = cache_size - p.sum()
        if slack > min_step:
            room = np.minimum(1.0 - p, min(slack, step))
            if np.any(room > 0):
                cand = p[None, :] + eye * room[:, None]
                vals = objective(cand)
                i = int(np.argmax(vals))
                if vals[i] >= current and room[i] > 0:
                    p, current = cand[i], float(vals[i])
                    continue
        # move up to ``step`` from file j to file i
        d = np.minimum(np.minimum(1.0 - p[:, None], p[None, :]), step)
        np.fill_diagonal(d, 0.0)
        i_idx, j_idx = np.nonzero(d > 0)
        if i_idx.size == 0:
            break
        amt = d[i_idx, j_idx]
        cand = np.repeat(p[None, :], i_idx.size, axis=0)
        rows = np.arange(i_idx.size)
        cand[rows, i_idx] += amt
        cand[rows, j_idx] -= amt
        vals = objective(cand)
        k = int(np.argmax(vals))
        if vals[k] > current + 1e-15:
            p, current = np.clip(cand[k], 0.0, 1.0), float(vals[k])
        else:
            step *= 0.5
    return p


class SeparableObjective:
    """Vectorized ``sum_n g_n(p_n)`` built from per-file value functions.

    Each ``g_n`` is tabulated on a grid and interpolated with a monotone cubic
    so that the optimizers can evaluate thousands of candidate policies.
    """

    def __init__(self, grid: np.ndarray, table: np.ndarray):
        grid = np.asarray(grid, dtype=float)
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[1] != grid.size:
            raise ValidationError("table must have one row per file and one column per grid point", "table")
        self.grid = grid
        self.table = table
        self._interp = [PchipInterpolator(grid, row) for row in table]

    @classmethod
    def from_file_function(cls, file_value: Callable[[int, float], float], f_count: int, points: int = 41):
        grid = np.linspace(0.0, 1.0, points)
        table = np.array([[file_value(n, float(p)) for p in grid] for n in range(f_count)])
        return cls(grid, table)

    def __call__(self, probs) -> np.ndarray:
        p = np.atleast_2d(np.asarray(probs, dtype=float))
        total = np.zeros(p.shape[0])
        for n, f in enumerate(self._interp):
            total += f(p[:, n])
        return total if np.ndim(probs) == 2 else total[:1]


def noise_limited_objective(k, t, popularity) -> Objective:
    k = np.asarray(k, dtype=float)
    t = np.asarray(t, dtype=float)
    a = np.asarray(popularity, dtype=float)

    def f(probs):
        p = np.atleast_2d(probs)
        return np.sum(k * a * -np.expm1(-p * t), axis=1)

    return f


def analytic_objective(catalog, cfg, rule=None, points: int = 41) -> SeparableObjective:
    """Interference-aware SBOP as a tabulated separable objective."""
    from .analytic import file_sbop, two_hop_probability

    p2 = two_hop_probability(cfg)
    p1 = 1.0 - p2

    def file_value(n, p):
        one, two = file_sbop(p, float(catalog.sinr_thresholds[n]), cfg, rule)
        return catalog.popularity[n] * (p1 * one + p2 * two)

    return SeparableObjective.from_file_function(file_value, catalog.f_count, points)


def grid_search(objective: Objective, f_count: int, cache_size: float, step: float = 0.01, chunk: int = 200_000):
    """Exhaustive search over the budget-feasible grid (small ``F`` only).

    Because the objective is increasing, the last coordinate always takes the
    largest grid level that still fits the budget.
    """
    n_levels = int(round(1.0 / step)) + 1
    heads = np.stack(np.meshgrid(*[np.arange(n_levels)] * (f_count - 1), indexing="ij"), axis=-1)
    heads = heads.reshape(-1, f_count - 1)
    used = heads.sum(axis=1)
    budget = int(math.floor(cache_size / step + 1e-9))
    heads, used = heads[used <= budget], used[used <= budget]
    last = np.minimum(budget - used, n_levels - 1)
    cand_all = np.column_stack([heads, last]) * step
    best_p, best_v = None, -math.inf
    for start in range(0, cand_all.shape[0], chunk):
        cand = cand_all[start:start + chunk]
        vals = objective(cand)
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v, best_p = float(vals[i]), cand[i]
    return best_p, best_v
