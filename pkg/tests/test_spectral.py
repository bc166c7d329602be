import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chflow import spectral as sp

TWO_PI = 2 * np.pi


@pytest.fixture
def grid():
    return sp.PeriodicGrid(64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TestGrid:
    @pytest.mark.parametrize("n", [7, 6, 0, -8, 9])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            sp.PeriodicGrid(n)

    def test_nodes(self):
        g = sp.PeriodicGrid(8)
        np.testing.assert_allclose(g.x, np.arange(8) / 8)
        assert g.nyquist == 4

    def test_roundtrip(self, grid, rng):
        f = grid.field(rng.standard_normal(grid.n))
        back = np.fft.ifft(f.coeffs * grid.n).real
        assert np.max(np.abs(back - f.values)) <= 1e-12 * np.max(np.abs(f.values))

    def test_real_field_coeffs_conjugate_symmetric(self, grid, rng):
        c = sp.random_trig_poly(grid, rng).coeffs
        np.testing.assert_allclose(c, np.conj(np.roll(c[::-1], 1)), atol=1e-14)

    def test_values_immutable(self, grid):
        f = grid.field(np.zeros(grid.n))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_realify_guard(self, grid):
        f = grid.field(np.full(grid.n, 1j))
        with pytest.raises(ValueError):
            f.real()


class TestDerivative:
    def test_sine(self, grid):
        f = grid.from_function(lambda x: np.sin(TWO_PI * x))
        d = sp.derivative(f, 1)
        np.testing.assert_allclose(d.values, TWO_PI * np.cos(TWO_PI * grid.x), atol=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 5])
    def test_constant(self, grid, m):
        assert sp.sup_norm(sp.derivative(grid.field(np.full(grid.n, 3.0)), m)) < 1e-13

    def test_second_derivative_matches_finite_difference(self, grid, rng):
        f = sp.random_trig_poly(grid, rng, modes=5)
        h = 1e-4
        x = grid.x
        fd = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
        d2 = sp.derivative(f, 2).values
        assert np.max(np.abs(fd - d2)) <= 1e-5 * np.max(np.abs(d2))


class TestA:
    def test_symbol_at_one(self, grid):
        f = grid.from_function(lambda x: np.sin(TWO_PI * x))
        np.testing.assert_allclose(sp.apply_A(f, 1).values, (1 + 4 * np.pi ** 2) * f.values, atol=1e-11)

    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_constant_fixed(self, grid, l):
        c = grid.field(np.full(grid.n, -2.5))
        np.testing.assert_allclose(sp.apply_A(c, l).values, -2.5)
        np.testing.assert_allclose(sp.invert_A(c, l).values, -2.5)

    def test_l2_composition(self, grid, rng):
        f = sp.random_trig_poly(grid, rng)
        ref = f - sp.derivative(f, 2) + sp.derivative(sp.derivative(f, 2), 2)
        assert sp.sup_norm(sp.apply_A(f, 2) - ref) <= 1e-9 * sp.sup_norm(ref)

    def test_invert_single_mode(self, grid):
        g = grid.from_function(lambda x: np.sin(TWO_PI * x))
        np.testing.assert_allclose(sp.invert_A(g, 1).values, g.values / (1 + 4 * np.pi ** 2), atol=1e-14)

    @pytest.mark.parametrize("l", [1, 2, 3, 4])
    def test_inverse_roundtrip(self, grid, rng, l):
        g = sp.random_trig_poly(grid, rng)
        back = sp.apply_A(sp.invert_A(g, l), l)
        assert sp.sup_norm(back - g) <= 1e-11 * sp.sup_norm(g)

    def test_invert_matches_green_function(self):
        # periodic Green's function of 1 - d^2 on the unit torus
        grid = sp.PeriodicGrid(32)
        amps = [(0, 0.3), (1, 1.0), (2, -0.5), (3, 0.25)]

        def g(x):
            return sum(a * np.cos(TWO_PI * k * x + 0.3 * k) for k, a in amps)

        f = sp.invert_A(grid.from_function(g), 1)
        nodes, weights = np.polynomial.legendre.leggauss(60)
        for x in grid.x[::5]:
            # integrand is smooth on (x, x + 1): the kernel kink sits at the endpoints
            y = x + 0.5 * (nodes + 1)
            kern = np.cosh(np.abs(y - x) - 0.5) / (2 * np.sinh(0.5))
            val = 0.5 * np.sum(weights * kern * g(y))
            assert abs(val - f(x)[0]) <= 1e-8


class TestFactorization:
    @pytest.mark.parametrize("l", [1, 2, 3, 4])
    def test_spec_invariants(self, l):
        spec = sp.OperatorSpec.for_order(l)
        np.testing.assert_allclose(np.abs(spec.roots), 1.0)
        assert len(spec.tilde_plus) == 2 * l

    def test_l1_explicit(self, grid, rng):
        spec = sp.OperatorSpec.for_order(1)
        # xi_1 = i: Lambda_pm = -i d +- i, Lambda~_pm = -i d -+ i
        np.testing.assert_allclose(spec.roots, [1j], atol=1e-15)
        np.testing.assert_allclose(spec.tilde_coeffs(+1), [-1j, -1j], atol=1e-15)
        np.testing.assert_allclose(spec.tilde_coeffs(-1), [1j, -1j], atol=1e-15)
        f = sp.random_trig_poly(grid, rng)
        out = sp.apply_lambda(sp.apply_lambda_tilde(f, spec, +1), spec, +1)
        ref = f - sp.derivative(f, 2)
        assert sp.sup_norm(out - ref) <= 1e-10 * sp.sup_norm(ref)

    def test_sum_of_lambdas(self, grid, rng):
        spec = sp.OperatorSpec.for_order(2)
        f = sp.random_trig_poly(grid, rng)
        s = sp.apply_lambda(f, spec, +1) + sp.apply_lambda(f, spec, -1)
        err = np.max(np.abs(s.values + 2j * sp.derivative(f).values))
        assert err <= 1e-11 * sp.sup_norm(sp.derivative(f))

    @pytest.mark.parametrize("l", [1, 3])
    def test_factorization_both_signs(self, grid, rng, l):
        spec = sp.OperatorSpec.for_order(l)
        f = sp.random_trig_poly(grid, rng)
        Af = sp.apply_A(f, l)
        for sign in (+1, -1):
            out = sp.apply_lambda(sp.apply_lambda_tilde(f, spec, sign), spec, sign)
            assert np.max(np.abs(out.values - Af.values)) <= 1e-10 * sp.w_inf_norm(f, 2 * l)

    def test_invert_lambda_tilde(self, grid, rng):
        spec = sp.OperatorSpec.for_order(3)
        f = sp.random_trig_poly(grid, rng)
        g = sp.apply_lambda_tilde(f, spec, -1)
        back = sp.invert_lambda_tilde(g, spec, -1)
        assert np.max(np.abs(back.values - f.values)) <= 1e-12 * sp.sup_norm(f)

    def test_bad_sign(self):
        with pytest.raises(ValueError):
            sp.OperatorSpec.for_order(1).lambda_coeffs(0)


class TestFirstOrderSolve:
    def test_zero(self, grid):
        f = sp.first_order_solve(grid.field(np.zeros(grid.n)), 1j)
        assert sp.sup_norm(f) == 0.0

    @pytest.mark.parametrize("method", ["spectral", "quadrature"])
    def test_constant_source(self, grid, method):
        f = sp.first_order_solve(grid.field(np.ones(grid.n)), 1j, method=method)
        np.testing.assert_allclose(f.values, 1j, atol=1e-12)

    def test_single_mode(self, grid):
        g = grid.field(np.exp(1j * TWO_PI * grid.x))
        f = sp.first_order_solve(g, 1j)
        np.testing.assert_allclose(f.values, g.values / (TWO_PI - 1j), atol=1e-14)

    @pytest.mark.parametrize("xi", [1j, np.exp(1j * np.pi / 3), 0.5 + 0.2j, 2.0])
    def test_roundtrip_and_two_routes(self, rng, xi):
        grid = sp.PeriodicGrid(256)
        g = sp.random_trig_poly(grid, rng, modes=10)
        fs = sp.first_order_solve(g, xi, method="spectral")
        fq = sp.first_order_solve(g, xi, method="quadrature")
        resid = -1j * sp.derivative(fs).values - xi * fs.values - g.values
        assert np.max(np.abs(resid)) <= 1e-9 * sp.sup_norm(g)
        assert np.max(np.abs(fs.values - fq.values)) <= 1e-8 * np.max(np.abs(fs.values))

    @pytest.mark.parametrize("xi", [0.0, TWO_PI, -2 * TWO_PI + 1e-11])
    def test_rejects_resonance(self, grid, xi):
        with pytest.raises(ValueError):
            sp.first_order_solve(grid.field(np.ones(grid.n)), xi)

    def test_unknown_method(self, grid):
        with pytest.raises(ValueError):
            sp.first_order_solve(grid.field(np.ones(grid.n)), 1j, method="euler")


class TestNorms:
    def test_zero(self, grid):
        out = sp.norms(grid.field(np.zeros(grid.n)), s=2, m=2)
        assert out["sup"] == out["l2"] == out["h2"] == out["w2,inf"] == 0.0

    def test_sine(self, grid):
        f = grid.from_function(lambda x: np.sin(TWO_PI * x))
        assert sp.l2_norm(f) == pytest.approx(1 / np.sqrt(2), rel=1e-14)
        assert sp.hs_norm(f, 1) ** 2 == pytest.approx((1 + 4 * np.pi ** 2) / 2, rel=1e-13)
        assert sp.energy_norm(f, 1) == pytest.approx(sp.hs_norm(f, 1), rel=1e-14)
        assert sp.w_inf_seminorm(f, 1) == pytest.approx(TWO_PI, rel=1e-12)


class TestProductsAndInterpolation:
    def test_interpolation_exact_for_band_limited(self, grid, rng):
        f = sp.random_trig_poly(grid, rng, modes=8)
        x = rng.uniform(0, 1, 50)
        c = f.coeffs
        direct = np.real(sum(c[k] * np.exp(1j * TWO_PI * k * x) + (c[-k] * np.exp(-1j * TWO_PI * k * x) if k else 0)
                             for k in range(9)))
        np.testing.assert_allclose(f(x), direct, atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
    def test_dealiased_product_exact(self, seed, d):
        grid = sp.PeriodicGrid(32)
        r = np.random.default_rng(seed)
        fs = [sp.random_trig_poly(grid, r, modes=10) for _ in range(d)]
        p = sp.product(*fs)
        fine = sp.PeriodicGrid(32 * 4)
        up = [fine.field(f(fine.x)) for f in fs]
        full = np.prod([u.values for u in up], axis=0)
        ref = sp.truncate_coeffs(np.fft.fft(full) / fine.n, 32)
        ref[16] = 0
        got = np.array(p.coeffs)
        got[16] = 0
        assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))

    def test_mollify_preserves_mean(self, grid, rng):
        f = sp.random_trig_poly(grid, rng)
        g = sp.mollify(f, 0.05)
        assert g.coeffs[0] == pytest.approx(f.coeffs[0])
        assert sp.sup_norm(sp.derivative(g)) < sp.sup_norm(sp.derivative(f))
