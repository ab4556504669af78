import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reroute.controls import ControlPanel
from reroute.detect import Panel, PanelObservation, Spec, build_panel, detect, fit_fixed_effects
from reroute.errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    NonpositiveResponseError,
    PreconditionError,
    UnidentifiedBetaError,
)
from reroute.index import CircumventionSeries
from reroute.periods import YearMonth, iter_months
from reroute.registry import DutyWindow, duty_dummy

from oracles import lsdv

PERIODS = tuple(iter_months(YearMonth(2010, 1), 24))
WINDOW = DutyWindow("690710", "CHN", "EU", YearMonth(2010, 9), YearMonth(2011, 4))


def make_panel(rows):
    ent, resp, dum = zip(*rows)
    n = len(ent)
    return Panel(
        np.array(ent, dtype=np.int64),
        np.arange(n, dtype=np.int64) + 24120,
        np.array(resp, dtype=float),
        np.array(dum, dtype=float),
        tuple(str(e) for e in sorted(set(ent))),
    )


def random_panel(rng, max_entities=20, max_periods=72):
    n_ent = int(rng.integers(1, max_entities + 1))
    T = int(rng.integers(4, max_periods + 1))
    a = int(rng.integers(0, T - 2))
    b = int(rng.integers(a + 1, T - 1))  # at least one untreated focal month
    ent, per, resp, dum = [], [], [], []
    for c in range(n_ent):
        mu = rng.normal(0, 3)
        for t in range(T):
            if c > 0 and rng.random() < 0.15:
                continue  # unbalanced
            d = 1.0 if (c == 0 and a <= t <= b) else 0.0
            ent.append(c)
            per.append(24120 + t)
            resp.append(mu + 0.7 * d + rng.normal())
            dum.append(d)
    return Panel(np.array(ent), np.array(per), np.array(resp), np.array(dum), tuple(map(str, range(n_ent))))


def test_exact_level_shift():
    fit = fit_fixed_effects(make_panel([(0, 0, 0), (0, 0, 0), (0, 10, 1), (0, 10, 1)]))
    assert fit.beta_hat == 10.0
    assert fit.dof == 2 and fit.n_entities == 1 and fit.n_obs == 4


def test_accepts_observation_sequence():
    rows = [PanelObservation(0, p, float(k % 3) + (k >= 5) * 2.0, int(k >= 5)) for k, p in enumerate(PERIODS[:10])]
    fit = fit_fixed_effects(rows)
    resp = np.array([r.response for r in rows])
    d = np.array([r.dummy for r in rows])
    assert fit.beta_hat == pytest.approx(resp[d == 1].mean() - resp[d == 0].mean(), abs=1e-12)


def test_within_matches_lsdv(backend):
    rng = np.random.default_rng(0)
    for _ in range(25):
        p = random_panel(rng, 8, 25)
        fit = fit_fixed_effects(p)
        beta, se = lsdv(p.entity, p.response, p.dummy)
        assert abs(fit.beta_hat - beta) < 1e-10
        assert abs(fit.se - se) < 1e-10
        assert fit.t_stat == pytest.approx(fit.beta_hat / fit.se)


def test_entity_shift_absorbed(backend):
    rng = np.random.default_rng(1)
    p = random_panel(rng, 6, 30)
    base = fit_fixed_effects(p)
    shifted = p.response + np.where(p.entity == 2, 1234.5, 0.0) + np.where(p.entity == 0, -7.0, 0.0)
    fit = fit_fixed_effects(Panel(p.entity, p.period, shifted, p.dummy, p.entity_names))
    assert fit.beta_hat == pytest.approx(base.beta_hat, abs=1e-9)
    assert fit.se == pytest.approx(base.se, abs=1e-9)
    assert fit.t_stat == pytest.approx(base.t_stat, abs=1e-7)


def test_row_permutation(backend):
    rng = np.random.default_rng(2)
    p = random_panel(rng, 10, 40)
    perm = rng.permutation(len(p))
    q = Panel(p.entity[perm], p.period[perm], p.response[perm], p.dummy[perm], p.entity_names)
    a, b = fit_fixed_effects(p), fit_fixed_effects(q)
    assert abs(a.beta_hat - b.beta_hat) <= 1e-12 and abs(a.se - b.se) <= 1e-12 and abs(a.p_value - b.p_value) <= 1e-12


def test_unidentified_and_dof_errors():
    with pytest.raises(UnidentifiedBetaError):
        fit_fixed_effects(make_panel([(0, 1, 0), (0, 2, 0), (1, 3, 0)]))
    with pytest.raises(InsufficientDataError):
        fit_fixed_effects(make_panel([(0, 1, 0), (0, 2, 1)]))


def test_one_sided_halves_p_for_positive_shift():
    rng = np.random.default_rng(3)
    p = random_panel(rng, 5, 40)
    two, one = fit_fixed_effects(p), fit_fixed_effects(p, one_sided=True)
    if two.t_stat > 0:
        assert one.p_value == pytest.approx(two.p_value / 2)


def test_detect_thresholds_nested():
    fit = fit_fixed_effects(make_panel([(0, 0.0, 0), (0, 0.3, 0), (0, 1.0, 1), (0, 1.4, 1), (0, 0.1, 0)]))
    flags = {a: detect(fit, a, ("690710", "CHN", "EU")).detected for a in (0.10, 0.05, 0.01)}
    assert flags[0.01] <= flags[0.05] <= flags[0.10]
    f = detect(fit, 0.05, ("690710", "CHN", "EU"))
    assert f.detected == (fit.p_value < 0.05)


@pytest.mark.parametrize("p,alpha,expected", [(0.03, 0.05, True), (0.03, 0.01, False)])
def test_detect_threshold_examples(p, alpha, expected):
    from reroute.detect import FEFit

    fit = FEFit(1.0, 0.5, 2.0, p, 10, 12, 1, Spec.LOG_LEVEL)
    assert detect(fit, alpha, ("690710", "CHN", "EU")).detected is expected
    with pytest.raises(PreconditionError):
        detect(fit, alpha)


# -- panel construction -----------------------------------------------------------


def cseries(product, values):
    return CircumventionSeries(product, "CHN", "EU", PERIODS, np.asarray(values, dtype=float))


def control_panel(focal_values, n_controls=3, seed=0):
    rng = np.random.default_rng(seed)
    controls = tuple(cseries(f"85013{k}", rng.lognormal(5, 0.4, len(PERIODS))) for k in range(n_controls))
    return ControlPanel(cseries("690710", focal_values), controls)


def test_build_panel_dummy_matches_duty_dummy():
    rng = np.random.default_rng(4)
    cp = control_panel(rng.lognormal(5, 0.4, len(PERIODS)))
    panel = build_panel(cp, WINDOW, Spec.LOG_LEVEL)
    focal = panel.entity == 0
    assert panel.dummy[focal].tolist() == duty_dummy(WINDOW, PERIODS).tolist()
    assert not panel.dummy[~focal].any()
    np.testing.assert_allclose(panel.response[focal], np.log(cp.focal.values))
    assert panel.entity_names[0] == "690710" and len(panel) == 4 * len(PERIODS)


def test_build_panel_zero_focal_raises_and_drop_policy():
    rng = np.random.default_rng(5)
    v = rng.lognormal(5, 0.4, len(PERIODS))
    v[3] = 0.0
    cp = control_panel(v)
    with pytest.raises(NonpositiveResponseError) as info:
        build_panel(cp, WINDOW, Spec.LOG_LEVEL)
    assert info.value.entity == "690710" and info.value.period == PERIODS[3]
    panel = build_panel(cp, WINDOW, Spec.LOG_LEVEL, zero_policy="drop")
    assert (panel.entity == 0).sum() == len(PERIODS) - 1


def test_build_panel_standardized_per_entity():
    rng = np.random.default_rng(6)
    v = rng.lognormal(5, 0.4, len(PERIODS))
    v[[2, 9]] = np.nan
    panel = build_panel(control_panel(v), WINDOW, "standardized")
    for c in range(4):
        r = panel.response[panel.entity == c]
        assert abs(r.mean()) < 1e-12 and abs(r.std(ddof=1) - 1) < 1e-12
    assert (panel.entity == 0).sum() == len(PERIODS) - 2


def test_build_panel_raw_standardization_switch():
    rng = np.random.default_rng(7)
    v = rng.lognormal(5, 0.4, len(PERIODS))
    panel = build_panel(control_panel(v), WINDOW, Spec.STANDARDIZED, standardize_log=False)
    z = (v - v.mean()) / v.std(ddof=1)
    np.testing.assert_allclose(panel.response[panel.entity == 0], z, atol=1e-12)


def test_build_panel_guards():
    rng = np.random.default_rng(8)
    cp = control_panel(rng.lognormal(5, 0.4, len(PERIODS)))
    with pytest.raises(PreconditionError):
        build_panel(cp, DutyWindow("850134", "CHN", "EU", YearMonth(2010, 9), YearMonth(2011, 4)))
    outside = DutyWindow("690710", "CHN", "EU", YearMonth(2015, 1), YearMonth(2015, 4))
    with pytest.raises(UnidentifiedBetaError):
        build_panel(cp, outside)
    v = rng.lognormal(5, 0.4, len(PERIODS))
    v[(np.arange(len(PERIODS)) < 8) | (np.arange(len(PERIODS)) > 15)] = np.nan
    with pytest.raises(UnidentifiedBetaError):
        build_panel(control_panel(v), WINDOW)
    with pytest.raises(DegenerateSeriesError):
        build_panel(control_panel(np.full(len(PERIODS), 3.0)), WINDOW, Spec.STANDARDIZED)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1e4))
def test_scale_invariance_of_flags(seed, lam):
    rng = np.random.default_rng(seed)
    v = rng.lognormal(5, 0.4, len(PERIODS))
    cp = control_panel(v, seed=seed)
    scaled = ControlPanel(cp.focal.with_values(v * lam), tuple(c.with_values(c.values * lam) for c in cp.controls))
    for spec in Spec:
        a = fit_fixed_effects(build_panel(cp, WINDOW, spec))
        b = fit_fixed_effects(build_panel(scaled, WINDOW, spec))
        assert b.beta_hat == pytest.approx(a.beta_hat, abs=1e-9)
        assert b.se == pytest.approx(a.se, rel=1e-9)
        for alpha in (0.1, 0.05, 0.01):
            if abs(a.p_value - alpha) > 1e-9:
                assert (a.p_value < alpha) == (b.p_value < alpha)
