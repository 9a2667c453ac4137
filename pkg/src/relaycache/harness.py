"""Experiment orchestration: configs, parameter sweeps and CSV output."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .analytic import DEFAULT_ORDER, total_sbop, sbop_noise_limited
from .errors import ValidationError
from .model import CachingPolicy, ContentCatalog, NetworkConfig, mpc_policy, uc_policy
from .optimize_co import cp_co
from .optimize_poa import MAX_ITERATIONS, analytic_objective, cp_poa, noise_limited_objective
from .quadrature import gauss_laguerre
from .simulate import (
    TWO_HOP,
    Deployment,
    place_caches,
    realize_links,
    run_trials,
    sample_deployment,
    select_nodes,
    simulate_request,
)

SWEEP_VARS = ("lambda_rn", "lambda_bs", "sinr_threshold_db", "beta", "cache_size", "delta")
POLICIES = ("cp_poa", "cp_co", "mpc", "uc")
MODES = ("analytic", "noise_limited", "monte_carlo")

# config-file keys and their defaults (the units a user writes down)
NETWORK_KEYS = {
    "lambda_bs": 1e-5,
    "lambda_rn": 1e-5,
    "lambda_ue": 1e-4,
    "p_bs_dbm": 30.0,
    "p_rn_dbm": 30.0,
    "b_bs": 1.0,
    "b_rn": 1.0,
    "bandwidth_hz": 100e6,
    "alpha_los": 2.5,
    "alpha_nlos": 4.0,
    "theta_deg": 30.0,
    "gain_main_db": 10.0,
    "gain_side_db": -10.0,
    "beta": 4e-4,
    "n_los": 3,
    "n_nlos": 2,
    "carrier_hz": 28e9,
    "noise_figure_db": 10.0,
    "noise_dbm": None,
    "area_side": 800.0,
}
CATALOG_KEYS = {
    "f_count": 20,
    "delta": 0.8,
    "cache_size": 10,
    "tau_min_bps": 0.04e9,
    "tau_max_bps": 1e9,
    "sinr_threshold_db": None,
}
INT_KEYS = {"n_los", "n_nlos", "f_count"}

CSV_COLUMNS = (
    "sweep_var", "sweep_value", "policy", "mode", "sbop", "std_error",
    "p_two_hop", "wall_time_s", "iterations", "config_hash",
)


def default_params() -> dict:
    return {**NETWORK_KEYS, **CATALOG_KEYS}


def _coerce(key: str, value):
    if value is None:
        return None
    if key in INT_KEYS:
        if float(value) != int(float(value)):
            raise ValidationError(f"{key} must be an integer", key)
        return int(float(value))
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key} must be a number, got {value!r}", key) from None


def resolve_params(overrides: dict | None = None) -> dict:
    params = default_params()
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ValidationError(f"unknown config key {key!r}", key)
        params[key] = _coerce(key, value)
    return params


def build_config(params: dict) -> NetworkConfig:
    net = {k: params[k] for k in NETWORK_KEYS}
    return NetworkConfig.from_units(
        p_bs_dbm=net.pop("p_bs_dbm"),
        p_rn_dbm=net.pop("p_rn_dbm"),
        theta_deg=net.pop("theta_deg"),
        gain_main_db=net.pop("gain_main_db"),
        gain_side_db=net.pop("gain_side_db"),
        bandwidth_hz=net.pop("bandwidth_hz"),
        carrier_hz=net.pop("carrier_hz"),
        noise_figure_db=net.pop("noise_figure_db"),
        noise_dbm=net.pop("noise_dbm"),
        **net,
    )


def build_catalog(params: dict) -> ContentCatalog:
    cat = ContentCatalog.build(
        f_count=params["f_count"],
        delta=params["delta"],
        cache_size=params["cache_size"],
        tau_min_bps=params["tau_min_bps"],
        tau_max_bps=params["tau_max_bps"],
        bandwidth_hz=params["bandwidth_hz"],
    )
    if params.get("sinr_threshold_db") is not None:
        cat = cat.with_sinr_threshold_db(params["sinr_threshold_db"], params["bandwidth_hz"])
    return cat


def config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fmt(x) -> str:
    """Format a CSV cell; floats get 9 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else f"{float(x):.9g}"
    return str(x)


@dataclass(frozen=True)
class ExperimentSpec:
    """A parameter sweep: which policies to build and how to evaluate them."""

    params: dict = field(default_factory=default_params)
    sweep_var: str = "lambda_rn"
    sweep_values: tuple = (1e-5,)
    policies: tuple = ("mpc",)
    modes: tuple = ("analytic",)
    n_deployments: int = 2000
    seed: int = 0
    out: str | None = None
    workers: int = 1
    quadrature_order: int = DEFAULT_ORDER
    epsilon: float = 0.01
    co_tolerance: float = 1e-6
    poa_max_iter: int = MAX_ITERATIONS
    poa_objective: str = "analytic"

    def __post_init__(self):
        object.__setattr__(self, "params", resolve_params(self.params))
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "modes", tuple(self.modes))
        self.validate()

    def validate(self) -> None:
        if self.sweep_var not in SWEEP_VARS:
            raise ValidationError(f"sweep variable must be one of {SWEEP_VARS}", "sweep_var")
        if not self.sweep_values:
            raise ValidationError("sweep values must be nonempty", "sweep_values")
        if not self.policies:
            raise ValidationError("at least one policy is required", "policies")
        if not self.modes:
            raise ValidationError("at least one evaluation mode is required", "modes")
        for p in self.policies:
            if p not in POLICIES:
                raise ValidationError(f"unknown policy {p!r}; choose from {POLICIES}", "policies")
        for m in self.modes:
            if m not in MODES:
                raise ValidationError(f"unknown mode {m!r}; choose from {MODES}", "modes")
        if self.n_deployments < 1:
            raise ValidationError("n_deployments must be >= 1", "n_deployments")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1", "workers")
        if not 1 <= self.quadrature_order <= 128:
            raise ValidationError("quadrature_order must lie in [1, 128]", "quadrature_order")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be > 0", "epsilon")
        if self.poa_objective not in ("analytic", "noise_limited"):
            raise ValidationError("poa_objective must be 'analytic' or 'noise_limited'", "poa_objective")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer", "seed")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweep_values"] = list(self.sweep_values)
        d["policies"] = list(self.policies)
        d["modes"] = list(self.modes)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown experiment fields {sorted(extra)}", sorted(extra)[0])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        return cls.from_dict(json.loads(text))

    def cells(self):
        """Resolved parameter sets, one per sweep value."""
        for v in self.sweep_values:
            params = dict(self.params)
            params[self.sweep_var] = _coerce(self.sweep_var, v)
            yield v, params


def load_config_file(path) -> dict:
    """Read a flat YAML or JSON mapping of config keys (experiment keys allowed)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}", "config") from None
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValidationError("config file must hold a key-value mapping", "config")
    return data


def _build_policy(name: str, catalog: ContentCatalog, cfg: NetworkConfig, spec: ExperimentSpec):
    """Return ``(probs, iterations)`` for a named policy."""
    if name == "mpc":
        return mpc_policy(catalog).probs, 0
    if name == "uc":
        return uc_policy(catalog).probs, 0
    if name == "cp_co":
        r = cp_co(catalog, cfg, spec.co_tolerance)
        return r.probs, r.iterations
    if name == "cp_poa":
        if spec.poa_objective == "noise_limited":
            from .optimize_co import compute_kkt_coefficients

            c = compute_kkt_coefficients(catalog, cfg)
            obj = noise_limited_objective(c.k, c.t, catalog.popularity)
        else:
            obj = analytic_objective(catalog, cfg, gauss_laguerre(spec.quadrature_order))
        r = cp_poa(obj, catalog.f_count, catalog.cache_size, spec.epsilon, max_iter=spec.poa_max_iter, seed=spec.seed)
        return r.probs, r.iterations
    raise ValidationError(f"unknown policy {name!r}", "policies")


def _run_cell(spec: ExperimentSpec, value: float, params: dict) -> list[dict]:
    cfg = build_config(params)
    catalog = build_catalog(params)
    h = config_hash(params)
    rule = gauss_laguerre(spec.quadrature_order)
    rows = []
    for name in spec.policies:
        t0 = time.perf_counter()
        probs, iters = _build_policy(name, catalog, cfg, spec)
        build_time = time.perf_counter() - t0
        for mode in spec.modes:
            t1 = time.perf_counter()
            se = math.nan
            p2 = math.nan
            if mode == "analytic":
                b = total_sbop(probs, catalog, cfg, rule)
                val, p2 = b.total, b.p_two_hop
            elif mode == "noise_limited":
                val = sbop_noise_limited(probs, catalog, cfg)
            else:
                sim = run_trials(cfg, catalog, probs, spec.n_deployments, spec.seed)
                val, se = sim.sbop, sim.std_error
                p2 = sim.association_counts[TWO_HOP] / spec.n_deployments
            rows.append({
                "sweep_var": spec.sweep_var,
                "sweep_value": float(value),
                "policy": name,
                "mode": mode,
                "sbop": float(val),
                "std_error": se,
                "p_two_hop": p2,
                "wall_time_s": build_time + time.perf_counter() - t1,
                "iterations": iters,
                "config_hash": h,
                "probs": probs,
            })
    return rows


def run_experiment(spec: ExperimentSpec, write: bool = True) -> list[dict]:
    """Evaluate every (sweep value, policy, mode) cell.

    Optimizers are re-run for each sweep value.  Cells run in a process pool
    of ``spec.workers``; rows come back in sweep order and are written once.
    """
    if write and spec.out:
        out_dir = os.path.dirname(os.path.abspath(spec.out))
        if not os.access(out_dir, os.W_OK):
            raise ValidationError(f"output directory {out_dir} is not writable", "out")
    cells = list(spec.cells())
    if spec.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            parts = list(pool.map(_run_cell, [spec] * len(cells), [v for v, _ in cells], [p for _, p in cells]))
    else:
        parts = [_run_cell(spec, v, p) for v, p in cells]
    rows = [r for part in parts for r in part]
    if write and spec.out:
        write_rows(rows, spec.out)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_rows(rows: list[dict], path) -> None:
    try:
        Path(path).write_text(rows_to_csv(rows))
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}", "out") from None


SNAPSHOT_COLUMNS = (
    "ue_id", "x", "y", "requested_file", "serving_type", "serving_id",
    "source_bs", "hop_count", "cache_hit", "offload_success", "config_hash",
)


def association_snapshot(
    cfg: NetworkConfig,
    policy: CachingPolicy | np.ndarray,
    catalog: ContentCatalog,
    seed: int,
    n_ue: int = 60,
) -> list[dict]:
    """Associate ``n_ue`` uniformly placed UEs in one shared deployment."""
    probs = policy.probs if isinstance(policy, CachingPolicy) else np.asarray(policy, dtype=float)
    s_dep, s_cache, s_ue = np.random.SeedSequence(seed).spawn(3)
    dep = sample_deployment(cfg, s_dep)
    caches = place_caches(dep, probs, catalog, s_cache)
    ue_rng = np.random.default_rng(s_ue)
    positions = ue_rng.uniform(0.0, cfg.area_side, size=(n_ue, 2))
    files = ue_rng.choice(catalog.f_count, size=n_ue, p=catalog.popularity)
    trial_seeds = np.random.SeedSequence(seed).spawn(3 + n_ue)[3:]
    rows = []
    for i in range(n_ue):
        rng = np.random.default_rng(trial_seeds[i])
        links = realize_links(dep.bs_positions, dep.rn_positions, positions[i], cfg.beta, rng)
        # BS-RN and RN-RN states belong to the deployment, not the UE
        view = Deployment(
            dep.bs_positions, dep.rn_positions, positions[i], links[0], links[1],
            dep.los_bs_rn, dep.los_rn_rn, dep.rng_seed, caches,
        )
        n = int(files[i])
        out = simulate_request(view, n, float(catalog.sinr_thresholds[n]), cfg, rng, 0)
        dec = select_nodes(view, n, cfg)
        two = dec.kind == TWO_HOP
        rows.append({
            "ue_id": i,
            "x": float(positions[i, 0]),
            "y": float(positions[i, 1]),
            "requested_file": n,
            "serving_type": "rn" if two else "bs",
            "serving_id": dec.rn if two else dec.bs,
            "source_bs": dec.bs,
            "hop_count": 2 if two else 1,
            "cache_hit": int(dec.cache_hit),
            "offload_success": int(out.offload_success),
        })
    return rows


def emit_association_snapshot(
    cfg: NetworkConfig,
    policy: CachingPolicy | np.ndarray,
    seed: int,
    path,
    catalog: ContentCatalog | None = None,
    n_ue: int = 60,
    params: dict | None = None,
) -> list[dict]:
    """Write the UE association snapshot of one deployment as CSV."""
    catalog = catalog or ContentCatalog.build()
    rows = association_snapshot(cfg, policy, catalog, seed, n_ue)
    h = config_hash(params) if params is not None else config_hash({"config": repr(cfg), "f_count": catalog.f_count})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SNAPSHOT_COLUMNS)
    for r in rows:
        r["config_hash"] = h
        w.writerow([fmt(r[c]) for c in SNAPSHOT_COLUMNS])
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}", "out") from None
    return rows
