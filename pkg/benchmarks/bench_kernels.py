"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--countries 40] [--products 300] [--repeat 5]

Both backends are run on the same inputs; outputs are checked for equality
before timings are reported.
"""

import argparse
import timeit

import numpy as np

from reroute import _pykernels, kernels
from reroute.periods import YearMonth
from reroute.synth import ScenarioConfig, generate


def edge_inputs(countries: int, products: int, periods: int):
    cfg = ScenarioConfig(n_countries=countries, n_products=products, n_periods=periods, edge_density=0.5)
    t = generate(cfg).flows
    group = t.product.astype(np.int64) * periods + (t.period - YearMonth(2010, 1).ordinal)
    return (group, t.origin, t.destination, t.value, t.value, products * periods, countries, 1, 0), len(t)


def panel_inputs(entities: int, periods: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    entity = np.repeat(np.arange(entities, dtype=np.int64), periods)
    y = rng.normal(size=entity.size)
    d = np.zeros(entity.size)
    d[periods // 4 : periods // 2] = 1.0
    return entity, y, d, entities


def bench(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--countries", type=int, default=40)
    ap.add_argument("--products", type=int, default=300)
    ap.add_argument("--periods", type=int, default=72)
    ap.add_argument("--entities", type=int, default=150)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = {"python": _pykernels}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled extension not built; timing the Python backend only")

    edges, n_edges = edge_inputs(args.countries, args.products, args.periods)
    panel = panel_inputs(args.entities, args.periods)
    ref_idx = _pykernels.route_index(*edges)
    ref_mom = _pykernels.within_moments(*panel)

    print(f"route_index: {n_edges} edges, {args.products * args.periods} product-months")
    print(f"within_moments: {args.entities} entities x {args.periods} periods")
    print(f"{'kernel':16}{'backend':>10}{'best (ms)':>12}{'speedup':>10}")
    for name, args_, ref in (("route_index", edges, ref_idx), ("within_moments", panel, ref_mom)):
        base = None
        for label, mod in backends.items():
            fn = getattr(mod, name)
            out = fn(*args_)
            if name == "route_index":
                assert np.array_equal(out, ref), f"{label} route_index disagrees with the Python backend"
            else:
                assert np.allclose(out, ref, rtol=1e-12, atol=1e-12), f"{label} within_moments disagrees"
            t = bench(fn, args_, args.repeat)
            base = base or t
            print(f"{name:16}{label:>10}{t * 1e3:>12.3f}{base / t:>9.1f}x")


if __name__ == "__main__":
    main()
