"""Time the compiled kernels against the NumPy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Prints one line
per kernel and a full ``total_sbop`` evaluation on each backend.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

import relaycache.analytic as an
from relaycache import _fallback
from relaycache.model import ContentCatalog, NetworkConfig

try:
    from relaycache import _kernels
except ImportError:  # extension not built
    _kernels = None


def _exclusion_case(impl):
    a = np.geomspace(1e-3, 1e9, 2000)
    d = np.geomspace(1e-2, 3e3, 2000)
    g = an._grid(2.5, 4e-4, True)
    x, w = an._gl_panel()
    args = (a / 3, d, 3, 2.5, 4e-4, True, np.log(an.T_MIN), an.PANEL_WIDTH, x, w, g.base, g.decay, an.T_MIN, g.t_end)
    return lambda: impl.exclusion_integrals(*args)


def _inverse_case(impl):
    tier = an.bs_tier(NetworkConfig(), 0.5)
    u = np.geomspace(1e-8, 60.0, 5000)
    args = (u, tier.density, tier.p_bar, tier.alpha_los, tier.alpha_nlos, tier.beta, False)
    return lambda: impl.inverse_intensity(*args)


def _sbop_case(impl):
    cfg, cat = NetworkConfig(), ContentCatalog.build()
    probs = np.full(cat.f_count, 0.5)

    def run():
        saved = an.kernels.exclusion_integrals, an.kernels.inverse_intensity
        an.kernels.exclusion_integrals, an.kernels.inverse_intensity = impl.exclusion_integrals, impl.inverse_intensity
        try:
            return an.total_sbop(probs, cat, cfg).total
        finally:
            an.kernels.exclusion_integrals, an.kernels.inverse_intensity = saved

    return run


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    backends = [("compiled", _kernels), ("python", _fallback)] if _kernels else [("python", _fallback)]
    cases = [
        ("exclusion_integrals (2000 rows)", _exclusion_case, 10),
        ("inverse_intensity (5000 nodes)", _inverse_case, 10),
        ("total_sbop (F=20, q1=30)", _sbop_case, 1),
    ]
    print(f"{'kernel':34s} {'backend':9s} {'best ms':>10s} {'speedup':>8s}")
    for label, make, number in cases:
        times = {}
        for name, impl in backends:
            fn = make(impl)
            fn()  # warm up
            times[name] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
        base = times["python"]
        for name, _ in backends:
            print(f"{label:34s} {name:9s} {1e3 * times[name]:10.2f} {base / times[name]:7.1f}x")


if __name__ == "__main__":
    main()
