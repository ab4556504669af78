"""Fixed-effects level-shift test on a pooled focal + control panel.

The model is ``response[c, t] = mu[c] + beta * d[c, t] + eps[c, t]`` where
``d`` is the duty dummy, switched on for the focal entity only.  ``beta`` is
estimated with the within (entity-demeaning) estimator and tested with a
classical t-test on ``n_obs - n_entities - 1`` degrees of freedom.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import stats

from . import kernels
from .controls import ControlPanel
from .errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    NonpositiveResponseError,
    PreconditionError,
    UnidentifiedBetaError,
)
from .index import standardize_series
from .periods import YearMonth
from .registry import DutyWindow, duty_dummy

ALPHAS = (0.10, 0.05, 0.01)


class Spec(str, enum.Enum):
    LOG_LEVEL = "log_level"
    STANDARDIZED = "standardized"

    @classmethod
    def parse(cls, text: Union[str, "Spec"]) -> "Spec":
        if isinstance(text, Spec):
            return text
        return {"log": cls.LOG_LEVEL, "log_level": cls.LOG_LEVEL, "standardized": cls.STANDARDIZED}[text]


class PanelObservation(NamedTuple):
    entity: int
    period: YearMonth
    response: float
    dummy: int


@dataclass(frozen=True, eq=False)
class Panel:
    """Stacked panel; entity 0 is the focal series, 1..C the controls."""

    entity: np.ndarray
    period: np.ndarray  # month ordinals
    response: np.ndarray
    dummy: np.ndarray
    entity_names: tuple
    spec: Spec = Spec.LOG_LEVEL
    key: Optional[tuple] = None

    def __len__(self) -> int:
        return len(self.entity)

    def observations(self) -> list[PanelObservation]:
        return [
            PanelObservation(int(e), YearMonth.from_ordinal(int(t)), float(r), int(d))
            for e, t, r, d in zip(self.entity, self.period, self.response, self.dummy)
        ]

    @classmethod
    def from_observations(cls, rows: Sequence[PanelObservation], spec=Spec.LOG_LEVEL, key=None) -> "Panel":
        rows = list(rows)
        ids = sorted({r.entity for r in rows})
        return cls(
            np.array([r.entity for r in rows], dtype=np.int64),
            np.array([r.period.ordinal for r in rows], dtype=np.int64),
            np.array([r.response for r in rows], dtype=np.float64),
            np.array([r.dummy for r in rows], dtype=np.float64),
            tuple(str(i) for i in ids),
            Spec.parse(spec),
            key,
        )


@dataclass(frozen=True)
class FEFit:
    beta_hat: float
    se: float
    t_stat: float
    p_value: float
    dof: int
    n_obs: int
    n_entities: int
    spec: Spec
    one_sided: bool = False
    key: Optional[tuple] = None


@dataclass(frozen=True)
class DetectionFlag:
    product: str
    exporter: str
    importer: str
    alpha: float
    detected: bool
    fit: FEFit

    @property
    def key(self) -> tuple:
        return (self.product, self.exporter, self.importer)


def _transform(values: np.ndarray, spec: Spec, standardize_log: bool, zero_policy: str, name: str, periods) -> np.ndarray:
    x = values.astype(np.float64, copy=True)
    needs_log = spec is Spec.LOG_LEVEL or standardize_log
    if needs_log:
        bad = ~np.isnan(x) & (x <= 0)
        if bad.any():
            if zero_policy == "drop":
                x[bad] = np.nan
            else:
                t = int(np.flatnonzero(bad)[0])
                raise NonpositiveResponseError(name, periods[t], float(x[t]))
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.log(x)
    if spec is Spec.STANDARDIZED:
        try:
            x = standardize_series(x)
        except (DegenerateSeriesError, InsufficientDataError) as exc:
            raise type(exc)(f"entity {name}: {exc}") from exc
    return x


def build_panel(
    panel: ControlPanel,
    window: DutyWindow,
    spec=Spec.LOG_LEVEL,
    *,
    standardize_log: bool = True,
    zero_policy: str = "error",
) -> Panel:
    """Stack focal and controls into a panel, dropping missing periods.

    ``standardize_log=False`` z-scores the raw index instead of its log under
    the standardized spec.  ``zero_policy="drop"`` treats nonpositive values as
    missing instead of raising when a log is required.
    """
    spec = Spec.parse(spec)
    if zero_policy not in ("error", "drop"):
        raise ValueError(f"zero_policy must be 'error' or 'drop', got {zero_policy!r}")
    focal = panel.focal
    if window.product != focal.product or (window.exporter, window.importer) != focal.route:
        raise PreconditionError(f"duty window {window.key} does not belong to focal flow {focal.product} {focal.route}")
    periods = focal.periods
    ords = np.array([p.ordinal for p in periods], dtype=np.int64)
    series = (focal,) + tuple(panel.controls)
    focal_dummy = duty_dummy(window, periods).astype(np.float64)

    ent, per, resp, dum = [], [], [], []
    for c, s in enumerate(series):
        x = _transform(np.asarray(s.values), spec, standardize_log, zero_policy, s.product, periods)
        ok = ~np.isnan(x)
        ent.append(np.full(int(ok.sum()), c, dtype=np.int64))
        per.append(ords[ok])
        resp.append(x[ok])
        dum.append(focal_dummy[ok] if c == 0 else np.zeros(int(ok.sum())))

    fd = dum[0]
    if not len(fd) or fd.min() == fd.max():
        raise UnidentifiedBetaError(
            f"focal {focal.product}: duty dummy is constant over observed periods, beta not identified"
        )
    return Panel(
        np.concatenate(ent),
        np.concatenate(per),
        np.concatenate(resp),
        np.concatenate(dum),
        tuple(s.product for s in series),
        spec,
        (focal.product, focal.exporter, focal.importer),
    )


def fit_fixed_effects(panel: Union[Panel, Sequence[PanelObservation]], one_sided: bool = False) -> FEFit:
    """Within estimator with homoskedastic standard error and Student-t p-value.

    ``one_sided=True`` tests ``beta > 0`` instead of ``beta != 0``.
    """
    if not isinstance(panel, Panel):
        panel = Panel.from_observations(panel)
    n_obs = len(panel)
    if n_obs == 0:
        raise InsufficientDataError("empty panel")
    # canonical row order makes the fit independent of input order
    order = np.lexsort((panel.period, panel.entity))
    _, entity = np.unique(panel.entity[order], return_inverse=True)
    n_ent = int(entity.max()) + 1
    sxx, sxy, rss, n_active = kernels.within_moments(
        entity.astype(np.int64), panel.response[order], panel.dummy[order].astype(np.float64), n_ent
    )
    dof = n_obs - n_active - 1
    if sxx <= 0:
        raise UnidentifiedBetaError("dummy has no within-entity variation")
    if dof < 1:
        raise InsufficientDataError(f"residual degrees of freedom {dof} < 1 ({n_obs} obs, {n_active} entities)")
    beta = sxy / sxx
    sigma2 = max(rss, 0.0) / dof
    se = float(np.sqrt(sigma2 / sxx))
    if se > 0:
        t_stat = beta / se
    else:
        t_stat = 0.0 if beta == 0 else float(np.copysign(np.inf, beta))
    if one_sided:
        p = float(stats.t.sf(t_stat, dof))
    else:
        p = float(min(1.0, 2.0 * stats.t.sf(abs(t_stat), dof)))
    return FEFit(float(beta), se, float(t_stat), p, int(dof), int(n_obs), int(n_active), panel.spec, one_sided, panel.key)


def detect(fit: FEFit, alpha: float, key: Optional[tuple] = None) -> DetectionFlag:
    key = key or fit.key
    if key is None:
        raise PreconditionError("detection needs a (product, exporter, importer) key")
    return DetectionFlag(*key, alpha=alpha, detected=bool(fit.p_value < alpha), fit=fit)

