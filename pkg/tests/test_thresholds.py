import math

import numpy as np
import pytest

from hartree_balance.errors import ConfigError, RegimeError, SolverError
from hartree_balance.spectral_core import Field, build_kernels, make_grid, make_radial_grid
from hartree_balance.thresholds import (
    SCAN_COLUMNS,
    ScanRow,
    _run_rows,
    bracket_transition,
    critical_mass,
    critical_mass_check,
    decay_fit,
    negative_energy_witness,
    scan_gamma,
    scan_m,
    subadditivity_check,
    worker_count,
)


def step_fn(threshold):
    calls = []

    def fn(c):
        calls.append(c)
        return ScanRow(c, 0.0, "vanishing" if c < threshold else "attained")

    return fn, calls


def test_bracket_transition_contains_threshold():
    fn, calls = step_fn(3.7)
    rows = [fn(c) for c in (1.0, 2.0, 4.0, 8.0)]
    br = bracket_transition(rows, fn, {"vanishing"}, {"attained"}, rel_width=1e-3)
    assert br.lo < 3.7 <= br.hi
    assert br.width <= 1e-3
    assert (br.verdict_lo, br.verdict_hi) == ("vanishing", "attained")
    assert br.iterations == len(calls) - 4


def test_bracket_absent_without_transition():
    fn, _ = step_fn(100.0)
    rows = [fn(c) for c in (1.0, 2.0)]
    assert bracket_transition(rows, fn, {"vanishing"}, {"attained"}) is None


def test_failed_rows_do_not_abort_and_keep_order():
    def fn(c):
        if c == 2.0:
            raise SolverError("did not converge")
        return ScanRow(c, -c, "attained")

    seen = []
    rows = _run_rows(fn, [3.0, 2.0, 1.0], workers=2, on_row=lambda r: seen.append(r.c))
    assert [r.c for r in rows] == [3.0, 2.0, 1.0] == seen
    assert rows[1].verdict == "failed"
    assert "SolverError" in rows[1].message
    assert len(rows[1].row()) == len(SCAN_COLUMNS)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("HB_THREADS", "3")
    assert worker_count(None) == 3
    monkeypatch.setenv("HB_THREADS", "x")
    with pytest.raises(ConfigError):
        worker_count(None)
    monkeypatch.delenv("HB_THREADS")
    assert worker_count(None) == 1


@pytest.fixture(scope="module")
def radial():
    return make_radial_grid(5, 1024, 60.0)


def test_decay_fit_algebraic(radial):
    r = radial.r
    u = Field(radial, r**-3.0)
    fit = decay_fit(u, (15.0, 30.0), 2.0)
    assert fit.cls == "algebraic"
    assert fit.exponent == pytest.approx(-3.0, abs=1e-10)
    assert fit.r2_algebraic > 0.9999


def test_decay_fit_stretched(radial):
    r = radial.r
    g2 = 1.0
    p = -(5 - 1) / 2 + g2 / 4
    u = Field(radial, r**p * np.exp(-0.7 * r ** (1 - g2 / 2)))
    fit = decay_fit(u, (10.0, 40.0), g2)
    assert fit.cls == "stretched-exponential"
    assert fit.rate == pytest.approx(0.7, rel=1e-6)


def test_decay_fit_validation(radial):
    u = Field(radial, radial.gaussian(5.0))
    with pytest.raises(ConfigError):
        decay_fit(u, (10.0, 80.0), 1.0)
    with pytest.raises(ConfigError):
        decay_fit(Field(make_grid(3, 4.0, 8), np.ones((8, 8, 8))), (1.0, 2.0), 1.0)


@pytest.fixture(scope="module")
def grid():
    return make_grid(3, 8.0, 32)


def test_critical_mass_sides(grid):
    cm = critical_mass(grid)
    chk = critical_mass_check(cm, grid, 1.0)
    assert chk.below_infimum >= -1e-10
    assert chk.above_energy < -10.0
    assert chk.to_dict()["critical_mass"] == cm.value


def test_negative_energy_witness_closed_form(grid):
    ks = build_kernels(grid, 1.5, 0.5)
    rep = negative_energy_witness(grid, 12.0, ks)
    assert rep.negative
    assert rep.closed_vs_direct < 1e-6
    assert rep.factorization_error < 1e-10
    assert not negative_energy_witness(grid, 1.0, ks).negative


def test_subadditivity(grid):
    rep = subadditivity_check(grid, 6.0, 6.0, build_kernels(grid, 1.5, 0.5))
    assert rep.holds
    assert rep.m12 <= rep.m1 + rep.m2 + 1e-6


def test_scan_m_brackets_threshold(grid):
    ks = build_kernels(grid, 1.5, 0.5)
    res = scan_m(grid, ks, [4.0, 16.0])
    verdicts = [r.verdict for r in res.rows]
    assert verdicts == ["vanishing", "attained"]
    assert res.checks["nonincreasing"]
    br = res.brackets["m_negative"]
    assert br.lo < br.hi and br.width <= 1e-2
    est = res.checks["ratio_threshold_estimate"]
    assert br.lo * 0.9 < est < br.hi * 1.1


def test_scan_regime_guards(grid):
    with pytest.raises(RegimeError):
        scan_m(grid, build_kernels(grid, 2.5, 1.0), [1.0])
    with pytest.raises(RegimeError):
        scan_gamma(grid, build_kernels(grid, 1.5, 0.5), [1.0])
