from math import factorial

import numpy as np
import pytest

from chflow import eulerian as eu
from chflow import spectral as sp
from chflow import taylor as ty

TWO_PI = 2 * np.pi


@pytest.fixture
def grid():
    return sp.PeriodicGrid(64)


@pytest.fixture
def u0(grid):
    return grid.from_function(lambda x: 0.2 * np.sin(TWO_PI * x) + 0.1 * np.cos(2 * TWO_PI * x))


class TestTimeSeries:
    def test_first_coefficient_is_rhs(self, u0):
        tt = ty.time_taylor_u(u0, 1, 3)
        f = tt.fields()
        assert sp.sup_norm(f[0] - u0) < 1e-15
        assert sp.sup_norm(f[1] - eu.rhs(u0, 1)) < 1e-14

    def test_second_coefficient_finite_difference(self, u0):
        # u_2 = u_tt(0) / 2 from a centred difference of rhs along the solver
        tt = ty.time_taylor_u(u0, 1, 4)
        h = 5e-4
        fwd = eu.integrate(eu.CHState(u0), h, h / 4).final
        # reversal symmetry: u(-t, x) = v(t, -x) where v starts from u0(-x)
        bwd = eu.integrate(eu.CHState(u0.grid.field(np.roll(u0.values[::-1], 1))), h, h / 4).final
        back = u0.grid.field(np.roll(bwd.values[::-1], 1))
        fd = (eu.rhs(fwd, 1) - eu.rhs(back, 1)) / (2 * h) / 2
        # centred difference error is O(h^2): ~3e-6 relative here
        assert sp.sup_norm(tt.fields()[2] - fd) <= 1e-5 * sp.sup_norm(fd)

    @pytest.mark.parametrize("l", [1, 2])
    def test_matches_stepper(self, u0, l):
        tt = ty.time_taylor_u(u0, l, 12)
        ref = eu.integrate(eu.CHState(u0, l), 0.02, 0.001).final
        assert sp.sup_norm(tt.evaluate(0.02) - ref) < 1e-12
        assert tt.residual(0.01) < 1e-11

    def test_constant_data(self, grid):
        tt = ty.time_taylor_u(grid.field(np.full(grid.n, 0.7)), 1, 5)
        assert all(np.max(np.abs(c)) < 1e-15 for c in tt.coeffs[1:])

    def test_K_limits(self, u0):
        with pytest.raises(ValueError):
            ty.time_taylor_u(u0, 1, 31)
        with pytest.warns(RuntimeWarning):
            ty.time_taylor_u(u0, 1, 21)

    def test_evaluate_dt_of_constant_series(self, grid):
        tt = ty.time_taylor_u(grid.field(np.zeros(grid.n)), 1, 0)
        assert sp.sup_norm(tt.evaluate_dt(0.3)) == 0.0


class TestMaterialDerivatives:
    def test_first_is_minus_pressure_gradient(self, u0):
        tt = ty.time_taylor_u(u0, 1, 4)
        Du = ty.material_derivatives(tt, 3)
        assert sp.sup_norm(Du[0] - u0) < 1e-15
        ref = -eu.pressure_gradient(u0, 1)
        assert sp.sup_norm(Du[1] - ref) <= 1e-13 * sp.sup_norm(ref)

    @pytest.mark.parametrize("l", [1, 2])
    def test_lambda_route(self, u0, l):
        tt = ty.time_taylor_u(u0, l, 8)
        # each D adds a spectral derivative, so high-mode roundoff grows ~ (pi n)^k
        a = ty.material_derivatives(tt, 4)
        b = ty.material_derivatives_lambda_route(tt, 4)
        for x, y in zip(a[1:], b[1:]):
            assert sp.sup_norm(x - y) <= 1e-12 * sp.sup_norm(x)

    def test_apply_D_needs_two_entries(self, u0):
        tt = ty.time_taylor_u(u0, 1, 2)
        with pytest.raises(ValueError):
            ty.apply_D(tt.coeffs[:1], tt)


class TestFlowSeries:
    def test_low_coefficients(self, u0):
        ft = ty.flow_taylor(u0, 1, 4)
        assert sp.sup_norm(ft.coeffs[0] - u0) < 1e-15
        ref = -0.5 * eu.pressure_gradient(u0, 1)
        assert sp.sup_norm(ft.coeffs[1] - ref) <= 1e-13 * sp.sup_norm(ref)
        assert len(ft.coeffs) == 5

    def test_matches_advance_flow(self, u0):
        ft = ty.flow_taylor(u0, 1, 12)
        flow, _ = eu.advance_flow(eu.CHState(u0), 0.05, 1e-3)
        assert np.max(np.abs(ft.positions(0.05) - flow.final)) < 1e-10


class TestAnalyticity:
    @pytest.mark.parametrize("l", [1, 2])
    def test_report_passes(self, u0, l):
        r = ty.analyticity_report(ty.time_taylor_u(u0, l, 12))
        assert r.base_case and r.stabilized and r.flow_bound_holds and r.passed
        assert r.L_k == sorted(r.L_k)
        assert r.radius_root > 0

    def test_flow_norms_consistent(self, u0):
        r = ty.analyticity_report(ty.time_taylor_u(u0, 1, 8))
        assert r.flow_norms[0] == pytest.approx(r.V)
        assert r.flow_norms[3] == pytest.approx(max(n[3] for n in r.norms) / factorial(4))

    def test_zero_data_trivial(self, grid):
        r = ty.analyticity_report(ty.time_taylor_u(grid.field(np.zeros(grid.n)), 1, 6))
        assert r.trivial and r.passed
        assert set(r.as_dict()) >= {"L", "L_k", "passed", "flow_bound_holds"}


def test_mollified_flows_shrink():
    grid = sp.PeriodicGrid(128)
    u0 = grid.from_function(lambda x: 0.3 * np.cos(TWO_PI * x))
    out = ty.mollified_flow_differences(u0, [0.04, 0.02, 0.01], 0.1, 0.005, labels=np.linspace(0, 1, 9))
    assert len(out["differences"]) == 2 and len(out["ratios"]) == 1
    assert out["differences"][1] < out["differences"][0]
