"""Control-panel selection for a focal circumvention series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EmptyPanelError, PreconditionError
from .index import CircumventionSeries
from .registry import AdRegistry, is_ad_free

DEFAULT_MISSING_THRESHOLD = 0.10


@dataclass(frozen=True)
class ControlPanel:
    focal: CircumventionSeries
    controls: tuple

    def __post_init__(self) -> None:
        chapter = self.focal.product[:2]
        for c in self.controls:
            assert c.route == self.focal.route, f"control {c.product} on another route"
            assert c.product[:2] != chapter, f"control {c.product} shares chapter {chapter}"

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def control_products(self) -> list:
        return [c.product for c in self.controls]


def missing_fraction(series: CircumventionSeries) -> float:
    if len(series) == 0:
        raise PreconditionError("series has no periods")
    return float(np.count_nonzero(series.missing)) / len(series)


def _within(fraction: float, threshold: float) -> bool:
    # 7/70 computed in floating point must still pass a 10% threshold
    return fraction <= threshold + 1e-12


def select_controls(
    focal: CircumventionSeries,
    universe: Iterable[CircumventionSeries],
    registry: AdRegistry,
    missing_threshold: float = DEFAULT_MISSING_THRESHOLD,
) -> ControlPanel:
    """Keep universe series from another HS chapter, never AD-touched, and at most
    ``missing_threshold`` missing.  Controls are ordered by product code.
    """
    chosen = []
    for s in universe:
        if s.route != focal.route:
            raise PreconditionError(f"universe series {s.product} is on route {s.route}, focal on {focal.route}")
        if s.periods != focal.periods:
            raise PreconditionError(f"universe series {s.product} uses a different period grid")
        if s.statistic != focal.statistic:
            raise PreconditionError(f"universe series {s.product} uses statistic {s.statistic.value}")
        if s.product[:2] == focal.product[:2]:
            continue
        if not is_ad_free(registry, s.product, s.exporter, s.importer):
            continue
        if not _within(missing_fraction(s), missing_threshold):
            continue
        chosen.append(s)
    if not chosen:
        raise EmptyPanelError(
            f"no control survived selection for {focal.product} {focal.exporter}->{focal.importer}"
        )
    chosen.sort(key=lambda s: s.product)
    return ControlPanel(focal, tuple(chosen))
