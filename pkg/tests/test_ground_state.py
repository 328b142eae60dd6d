import math

import numpy as np
import pytest

from hartree_balance.errors import ConfigError, DomainError, RegimeError
from hartree_balance.functionals import energy, pohozaev_time, residual_norm
from hartree_balance.ground_state import (
    MASS_TOL,
    POHOZAEV_TOL,
    RESIDUAL_TOL,
    SolverParams,
    VanishingVerdict,
    certify,
    minimize_critical,
    minimize_global,
    minimize_pohozaev,
    solve_choquard,
    solve_zero_mass,
)
from hartree_balance.spectral_core import Field, build_kernels, make_grid, make_radial_grid


@pytest.fixture(scope="module")
def grid():
    return make_grid(3, 8.0, 32)


@pytest.fixture(scope="module")
def q2(grid):
    return solve_choquard(grid, 2.0)


@pytest.fixture(scope="module")
def pohozaev_state(grid):
    return minimize_pohozaev(grid, 1.0, build_kernels(grid, 2.5, 1.0))


def assert_certified(gs):
    m = gs.field.grid.mass(gs.field.values)
    assert abs(m - gs.c) <= MASS_TOL * gs.c
    assert abs(gs.Q) <= POHOZAEV_TOL * gs.breakdown.scale
    assert gs.residual <= RESIDUAL_TOL


def test_solver_params_validation():
    with pytest.raises(ConfigError):
        SolverParams(tau0=0.0, backtrack=2.0)


def test_choquard_gamma2(q2):
    assert q2.c == pytest.approx(2.85277, rel=1e-4)
    assert q2.residual <= RESIDUAL_TOL
    assert q2.lam == 1.0


def test_choquard_is_radial_and_positive(q2):
    v = q2.field.values.real
    assert np.all(v > -1e-8 * v.max())
    np.testing.assert_allclose(v, np.transpose(v, (1, 2, 0)), atol=1e-8 * v.max())


def test_pohozaev_state_certified(pohozaev_state):
    gs = pohozaev_state
    assert_certified(gs)
    assert gs.regime == "supercritical-minimax"
    assert gs.lam > 0
    # the ground state is its own fiber maximiser
    assert pohozaev_time(gs.breakdown).t == pytest.approx(1.0, abs=1e-5)


def test_pohozaev_state_recertifies(pohozaev_state):
    gs = pohozaev_state
    b, lam, res = certify(gs.field, gs.kernels, gs.c)
    assert lam == pytest.approx(gs.lam, rel=1e-10)
    assert res == pytest.approx(gs.residual, rel=1e-6)
    assert b.energy == pytest.approx(gs.E, rel=1e-12)


def test_pohozaev_below_gaussian_maximum(pohozaev_state):
    """Gamma(c) does not exceed the fiber maximum of any trial field."""
    ks = pohozaev_state.kernels
    grid = ks.grid
    u = Field(grid, grid.gaussian(1.0))
    u = u * math.sqrt(1.0 / grid.mass(u.values))
    assert pohozaev_time(energy(u, ks)).energy >= pohozaev_state.E - 1e-9


def test_pohozaev_reproducible(grid, pohozaev_state):
    again = minimize_pohozaev(grid, 1.0, build_kernels(grid, 2.5, 1.0))
    assert again.E == pohozaev_state.E
    np.testing.assert_array_equal(again.field.values, pohozaev_state.field.values)


def test_pohozaev_regime_guard(grid):
    with pytest.raises(RegimeError):
        minimize_pohozaev(grid, 1.0, build_kernels(grid, 1.5, 0.5))
    with pytest.raises(DomainError):
        minimize_pohozaev(grid, -1.0, build_kernels(grid, 2.5, 1.0))


def test_critical_below_threshold_refused(grid, q2):
    ks = build_kernels(grid, 2.0, 1.0)
    with pytest.raises(DomainError, match="there exists no solutions to"):
        minimize_critical(grid, 0.9 * q2.c, ks, choquard_state=q2)


def test_critical_above_threshold(grid, q2):
    gs = minimize_critical(grid, 1.5 * q2.c, build_kernels(grid, 2.0, 1.0), choquard_state=q2)
    assert_certified(gs)
    assert gs.breakdown.kinetic < gs.breakdown.d_gamma1 / 2
    assert gs.extra["critical_mass"] == q2.c


def test_subcritical_attained(grid):
    gs = minimize_global(grid, 12.0, build_kernels(grid, 1.5, 0.5))
    assert not isinstance(gs, VanishingVerdict)
    assert_certified(gs)
    assert gs.E < 0


def test_subcritical_vanishing(grid):
    v = minimize_global(grid, 2.0, build_kernels(grid, 1.5, 0.5))
    assert isinstance(v, VanishingVerdict)
    assert v.ratio < 1
    assert v.m_estimate >= 0
    assert v.field.grid.mass(v.field.values) == pytest.approx(2.0, rel=1e-8)


def test_zero_mass_radial():
    g = make_radial_grid(5, 512, 40.0)
    ks = build_kernels(g, 3.0, 2.0)
    gs = solve_zero_mass(g, ks)
    assert gs.lam == 0.0
    assert gs.residual <= RESIDUAL_TOL
    assert abs(gs.Q) <= POHOZAEV_TOL * gs.breakdown.scale
    assert residual_norm(gs.field, 0.0, gs.kernels) == pytest.approx(gs.residual, rel=1e-6)
