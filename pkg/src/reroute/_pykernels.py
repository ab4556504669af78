"""numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation, including the order in
which terms are accumulated, so both backends return bit-identical index
values.
"""

import numpy as np


def route_index(group, src, dst, amount_out, amount_in, n_groups, n_nodes, exporter, importer):
    """Per-group sum over third nodes ``k`` of ``amount_out[j->k] + amount_in[k->i]``.

    A term counts only when both legs exist in the group and both amounts are
    non-NaN.  Terms are accumulated in ascending node order.
    """
    group = np.asarray(group, dtype=np.int64)
    src = np.asarray(src, dtype=np.int32)
    dst = np.asarray(dst, dtype=np.int32)
    leg_out = np.full((n_groups, n_nodes), np.nan)
    leg_in = np.full((n_groups, n_nodes), np.nan)

    m = (src == exporter) & (dst != importer) & (dst != exporter)
    leg_out[group[m], dst[m]] = np.asarray(amount_out, dtype=np.float64)[m]
    m = (dst == importer) & (src != exporter) & (src != importer)
    leg_in[group[m], src[m]] = np.asarray(amount_in, dtype=np.float64)[m]

    acc = np.zeros(n_groups)
    for k in range(n_nodes):
        term = leg_out[:, k] + leg_in[:, k]
        ok = ~np.isnan(term)
        acc[ok] += term[ok]
    return acc


def within_moments(entity, y, d, n_entities):
    """Within-transformed moments for a single-regressor fixed-effects fit.

    Rows must be sorted by entity.  Returns ``(sxx, sxy, rss, n_active)`` where
    ``sxx = sum(d~^2)``, ``sxy = sum(d~ y~)``, ``rss`` is the residual sum of
    squares after removing ``beta = sxy / sxx`` (or ``sum(y~^2)`` when
    ``sxx == 0``) and ``n_active`` counts entities with at least one row.
    """
    entity = np.asarray(entity, dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    counts = np.bincount(entity, minlength=n_entities).astype(np.float64)
    ybar = np.bincount(entity, weights=y, minlength=n_entities)
    dbar = np.bincount(entity, weights=d, minlength=n_entities)
    active = counts > 0
    ybar[active] /= counts[active]
    dbar[active] /= counts[active]
    yt = y - ybar[entity]
    dt = d - dbar[entity]
    sxx = float(np.dot(dt, dt))
    sxy = float(np.dot(dt, yt))
    beta = sxy / sxx if sxx > 0 else 0.0
    e = yt - beta * dt
    return sxx, sxy, float(np.dot(e, e)), int(active.sum())
