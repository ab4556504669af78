import numpy as np
import pytest

from reroute import _pykernels, kernels
from reroute.graph import TradeNetwork
from reroute.periods import YearMonth

ACCEPTANCE_REPORT: list = []

BACKENDS = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    impl = _pykernels if request.param == "python" else kernels.compiled_backend
    monkeypatch.setattr(kernels, "route_index", impl.route_index)
    monkeypatch.setattr(kernels, "within_moments", impl.within_moments)
    return request.param


def make_network(edges, product="690710", period=YearMonth(2015, 12)):
    """Network from ``{(origin, destination): value}`` or ``{...: (value, quantity)}``."""
    nodes = sorted({c for e in edges for c in e})
    idx = {c: i for i, c in enumerate(nodes)}
    items = sorted(edges.items(), key=lambda kv: (idx[kv[0][0]], idx[kv[0][1]]))
    src = [idx[o] for (o, _), _ in items]
    dst = [idx[d] for (_, d), _ in items]
    vals, qtys = [], []
    for _, w in items:
        v, q = w if isinstance(w, tuple) else (w, None)
        vals.append(np.nan if v is None else v)
        qtys.append(np.nan if q is None else q)
    return TradeNetwork(product, period, nodes, src, dst, vals, qtys)


def random_network(rng, n_nodes, n_edges, missing_quantity=0.2):
    nodes = [f"K{k:02d}" for k in range(n_nodes)]
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    chosen = rng.choice(len(pairs), size=min(n_edges, len(pairs)), replace=False)
    edges = {}
    for c in chosen.tolist():
        v = float(rng.lognormal(3, 1)) if rng.random() > 0.05 else 0.0
        q = None if rng.random() < missing_quantity else float(rng.lognormal(2, 1))
        edges[pairs[c]] = (v, q)
    return make_network(edges)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
