"""Command-line entry point: ``relaycache {analyze,optimize,simulate,sweep,snapshot}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness
from .analytic import sbop_noise_limited, total_sbop
from .errors import NumericError, ValidationError
from .quadrature import gauss_laguerre
from .simulate import run_trials

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3

# experiment keys a config file may carry next to the physical parameters
_SPEC_KEYS = {
    "sweep": "sweep",
    "policies": "policies",
    "modes": "modes",
    "deployments": "n_deployments",
    "n_deployments": "n_deployments",
    "seed": "seed",
    "out": "out",
    "workers": "workers",
    "quadrature_order": "quadrature_order",
    "epsilon": "epsilon",
    "poa_objective": "poa_objective",
    "poa_max_iter": "poa_max_iter",
}


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _parse_sweep(text: str) -> tuple[str, list[float]]:
    if "=" not in text:
        raise ValidationError("--sweep must look like var=v1,v2,...", "sweep")
    var, values = text.split("=", 1)
    try:
        vals = [float(v) for v in _csv_list(values)]
    except ValueError:
        raise ValidationError(f"sweep values must be numbers: {values!r}", "sweep") from None
    return var.strip(), vals


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON file of parameters (same key names as --set)")
    p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    p.add_argument("--out", default=None, help="output path (CSV)")
    p.add_argument("--quadrature-order", type=int, default=None, dest="quadrature_order")
    p.add_argument("--epsilon", type=float, default=None, help="CP-POA tolerance")
    p.add_argument("--deployments", type=int, default=None, help="Monte Carlo deployments")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaycache", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("analyze", help="analytic SBOP of a caching policy")
    _add_common(p)
    p.add_argument("--policy", default="mpc", help="mpc, uc, cp_co, cp_poa or comma-separated probabilities")

    p = sub.add_parser("optimize", help="run CP-POA or CP-CO")
    _add_common(p)
    p.add_argument("--method", choices=("cp_poa", "cp_co"), default="cp_co")
    p.add_argument("--poa-objective", choices=("analytic", "noise_limited"), default=None, dest="poa_objective")

    p = sub.add_parser("simulate", help="Monte Carlo SBOP estimate")
    _add_common(p)
    p.add_argument("--policy", default="mpc")
    p.add_argument("--trials-out", default=None, help="per-trial CSV records")

    p = sub.add_parser("sweep", help="full parameter sweep")
    _add_common(p)
    p.add_argument("--sweep", default=None, help="var=v1,v2,...")
    p.add_argument("--policies", default=None, help="comma list of cp_poa,cp_co,mpc,uc")
    p.add_argument("--modes", default=None, help="comma list of analytic,noise_limited,monte_carlo")
    p.add_argument("--poa-objective", choices=("analytic", "noise_limited"), default=None, dest="poa_objective")

    p = sub.add_parser("snapshot", help="association CSV of 60 UEs in one deployment")
    _add_common(p)
    p.add_argument("--policy", default="mpc")
    p.add_argument("--ues", type=int, default=60)
    return parser


def _spec_from_args(args) -> harness.ExperimentSpec:
    file_data = harness.load_config_file(args.config) if args.config else {}
    params = {k: v for k, v in file_data.items() if k not in _SPEC_KEYS}
    spec_kw = {_SPEC_KEYS[k]: v for k, v in file_data.items() if k in _SPEC_KEYS}
    for item in args.set:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}", "set")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()

    sweep = getattr(args, "sweep", None) or spec_kw.pop("sweep", None)
    if sweep:
        var, vals = _parse_sweep(sweep) if isinstance(sweep, str) else (sweep["var"], sweep["values"])
        spec_kw["sweep_var"], spec_kw["sweep_values"] = var, vals
    else:
        resolved = harness.resolve_params(params)
        spec_kw["sweep_var"], spec_kw["sweep_values"] = "lambda_rn", [resolved["lambda_rn"]]
    for name in ("policies", "modes"):
        val = getattr(args, name, None)
        if val is not None:
            spec_kw[name] = _csv_list(val)
        elif isinstance(spec_kw.get(name), str):
            spec_kw[name] = _csv_list(spec_kw[name])
    for flag, key in (
        ("seed", "seed"), ("out", "out"), ("quadrature_order", "quadrature_order"),
        ("epsilon", "epsilon"), ("deployments", "n_deployments"), ("workers", "workers"),
        ("poa_objective", "poa_objective"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            spec_kw[key] = val
    return harness.ExperimentSpec(params=params, **spec_kw)


def _policy(text: str, spec: harness.ExperimentSpec, cfg, catalog) -> tuple[np.ndarray, str]:
    if text in harness.POLICIES:
        probs, _ = harness._build_policy(text, catalog, cfg, spec)
        return probs, text
    try:
        probs = np.array([float(v) for v in _csv_list(text)])
    except ValueError:
        raise ValidationError(f"policy must be one of {harness.POLICIES} or a list of numbers", "policy") from None
    if probs.shape != (catalog.f_count,):
        raise ValidationError(f"policy needs {catalog.f_count} probabilities", "policy")
    return probs, "custom"


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise ValidationError(f"cannot write {out}: {exc}", "out") from None
    else:
        sys.stdout.write(text)


def _cell(spec):
    value, params = next(spec.cells())
    return params, harness.build_config(params), harness.build_catalog(params)


def _run(args) -> int:
    spec = _spec_from_args(args)
    if args.verb == "sweep":
        rows = harness.run_experiment(spec, write=bool(spec.out))
        if not spec.out:
            sys.stdout.write(harness.rows_to_csv(rows))
        return EXIT_OK

    params, cfg, catalog = _cell(spec)
    h = harness.config_hash(params)
    if args.verb == "analyze":
        probs, name = _policy(args.policy, spec, cfg, catalog)
        b = total_sbop(probs, catalog, cfg, gauss_laguerre(spec.quadrature_order))
        nl = sbop_noise_limited(probs, catalog, cfg)
        lines = ["policy,sbop,sbop_noise_limited,p_one_hop,p_two_hop,config_hash"]
        lines.append(",".join([name, *map(harness.fmt, (b.total, nl, b.p_one_hop, b.p_two_hop)), h]))
        lines.append("file,p_n,popularity,one_hop,two_hop")
        for n in range(catalog.f_count):
            lines.append(",".join(map(harness.fmt, (n + 1, float(probs[n]), float(catalog.popularity[n]), *map(float, b.per_file[n])))))
        _emit("\n".join(lines) + "\n", spec.out)
    elif args.verb == "optimize":
        probs, iters = harness._build_policy(args.method, catalog, cfg, spec)
        b = total_sbop(probs, catalog, cfg, gauss_laguerre(spec.quadrature_order))
        payload = {
            "method": args.method,
            "probs": [float(harness.fmt(float(p))) for p in probs],
            "sbop": float(harness.fmt(b.total)),
            "sbop_noise_limited": float(harness.fmt(sbop_noise_limited(probs, catalog, cfg))),
            "iterations": int(iters),
            "config_hash": h,
        }
        _emit(json.dumps(payload, indent=2) + "\n", spec.out)
    elif args.verb == "simulate":
        probs, name = _policy(args.policy, spec, cfg, catalog)
        sim = run_trials(cfg, catalog, probs, spec.n_deployments, spec.seed, keep_outcomes=bool(args.trials_out))
        if args.trials_out:
            sim.write_csv(args.trials_out)
        lines = ["policy,sbop,std_error,deployments,one_hop,two_hop,config_hash"]
        lines.append(",".join([
            name, harness.fmt(sim.sbop), harness.fmt(sim.std_error), str(spec.n_deployments),
            str(sim.association_counts["one_hop"]), str(sim.association_counts["two_hop"]), h,
        ]))
        _emit("\n".join(lines) + "\n", spec.out)
    elif args.verb == "snapshot":
        if not spec.out:
            raise ValidationError("snapshot needs --out", "out")
        probs, _ = _policy(args.policy, spec, cfg, catalog)
        harness.emit_association_snapshot(cfg, probs, spec.seed, spec.out, catalog, args.ues, params)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ValidationError as exc:
        field = f" [{exc.field}]" if exc.field else ""
        print(f"error{field}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
