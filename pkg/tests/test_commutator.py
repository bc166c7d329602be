from fractions import Fraction
from math import comb

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from chflow import commutator as cm


class TestIndexSets:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 7), st.integers(1, 4), st.integers(0, 2))
    def test_compositions_count(self, total, parts, minimum):
        got = list(cm.compositions(total, parts, minimum))
        free = total - parts * minimum
        expected = comb(free + parts - 1, parts - 1) if free >= 0 else 0
        assert len(got) == len(set(got)) == expected
        assert all(sum(c) == total and min(c) >= minimum for c in got)

    def test_in_B(self):
        assert cm.in_B(1, 1, (0, 0), (1, 1))
        assert not cm.in_B(1, 1, (0, 0), (0, 2))
        assert not cm.in_B(1, 1, (1,), (1,))

    @pytest.mark.parametrize("k,m", [(1, 1), (2, 3), (3, 2), (4, 1)])
    def test_enumerate_B_members(self, k, m):
        items = list(cm.enumerate_B(k, m))
        assert items and all(cm.in_B(k, m, a, b) for a, b in items)

    def test_bound_value(self):
        # (2s)^{2(m-1)} k! m! / (alpha! beta!) at s=2, k=2, m=2
        assert cm.coefficient_bound(2, 2, (1, 0), (2, 1)) == Fraction(16 * 2 * 2, 2)


class TestExpansion:
    # small cases derived by hand from d D w = D d w + (d u)(d w)
    def test_F11(self):
        assert cm.build_Fkm(1, 1).aggregated() == {((0, 0), (1, 1)): 1}

    def test_F12(self):
        assert cm.build_Fkm(1, 2).aggregated() == {((0, 0), (1, 2)): 2, ((0, 0), (2, 1)): 1}

    def test_F21(self):
        assert cm.build_Fkm(2, 1).aggregated() == {
            ((1, 0), (1, 1)): 1, ((0, 1), (1, 1)): 2, ((0, 0, 0), (1, 1, 1)): -2}

    @pytest.mark.parametrize("k,m", [(k, m) for k in range(1, 5) for m in range(1, 4)])
    def test_support_is_B(self, k, m):
        ts = cm.build_Fkm(k, m)
        assert ts.check_membership()
        assert set(ts.aggregated()) == set(cm.enumerate_B(k, m))

    def test_rejects_bad_orders(self):
        with pytest.raises(ValueError):
            cm.build_Fkm(0, 1)
        with pytest.raises(ValueError):
            cm.build_Fkm(1, 0)

    def test_dump_deterministic(self):
        a = cm.build_Fkm(2, 2).dump()
        assert a == cm.build_Fkm(2, 2).dump()
        assert a.splitlines()[0] == "# F^{2,2}: 12 emitted terms"
        assert "s=3 alpha=(0,0,0) beta=(1,1,2) c=-6" in a


class TestSymField:
    def test_trig_roundtrip(self):
        f = cm.SymField.real_trig({(0, 1): (2, 0)})
        assert f.terms == {(0, 1): (1, 0), (0, -1): (1, 0)}

    def test_dx_of_sine(self):
        s = cm.SymField.real_trig({(0, 1): (0, 1)})
        assert s.dx() == cm.SymField.real_trig({(0, 1): (1, 0)})

    def test_dt_and_product(self):
        t = cm.SymField({(1, 0): (1, 0)})
        assert (t * t).dt() == t.scale(2)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_material_is_derivation(self, seed):
        rng = np.random.default_rng(seed)
        u, f, g = (cm.random_symfield(rng) for _ in range(3))
        assert (f * g).material(u) == f.material(u) * g + f * g.material(u)

    def test_random_is_real(self):
        f = cm.random_symfield(np.random.default_rng(0))
        for (p, n), (a, b) in f.terms.items():
            assert f.terms[(p, -n)] == (a, -b)


class TestIdentity:
    def test_zero_residual(self):
        rng = np.random.default_rng(7)
        for k in range(1, 4):
            for m in range(1, 3):
                u, psi = cm.random_symfield(rng), cm.random_symfield(rng)
                assert cm.verify_identity(k, m, u, psi) == 0

    def test_detects_wrong_sign(self):
        rng = np.random.default_rng(8)
        u, psi = cm.random_symfield(rng), cm.random_symfield(rng)
        ts = cm.build_Fkm(2, 2)
        bad = cm.TermSet(2, 2, [(a, b, -c if len(a) == 3 else c) for a, b, c in ts.terms])
        assert cm.verify_identity(2, 2, u, psi, bad) > 0

    def test_sympy_oracle(self):
        # independent evaluation with sympy on concrete smooth functions
        t, x = sympy.symbols("t x")
        u = t * sympy.sin(x) + sympy.cos(2 * x) / 3
        psi = sympy.sin(x) + t ** 2 * sympy.cos(x)
        D = lambda w: sympy.diff(w, t) + u * sympy.diff(w, x)

        def DD(w, a):
            for _ in range(a):
                w = D(w)
            return w

        k, m = 2, 2
        lhs = sympy.diff(DD(psi, k), x, m) - DD(sympy.diff(psi, x, m), k)
        rhs = 0
        for (alpha, beta), c in cm.build_Fkm(k, m).aggregated().items():
            term = c
            for a, b in zip(alpha[:-1], beta[:-1]):
                term *= sympy.diff(DD(u, a), x, b)
            rhs += term * sympy.diff(DD(psi, alpha[-1]), x, beta[-1])
        for tv, xv in [(0.3, 0.7), (-1.1, 2.5), (0.0, 4.0)]:
            diff = (lhs - rhs).subs({t: tv, x: xv})
            assert abs(float(diff)) < 1e-9


class TestCounting:
    @pytest.mark.parametrize("s,m", [(1, 3), (2, 5), (3, 4), (4, 6)])
    def test_upsilon_dp_matches_enumeration(self, s, m):
        assert cm.upsilon_sum(s, m) == cm.upsilon_sum_enumerated(s, m)

    def test_upsilon_known(self):
        # s=2, m=1: alpha in {(1,0), (0,1)}, each 1/4
        assert cm.upsilon_sum(2, 1) == Fraction(1, 2)

    def test_enumeration_guard(self):
        with pytest.raises(ValueError):
            cm.upsilon_sum_enumerated(12, 60)

    @pytest.mark.parametrize("s,m", [(1, 0), (3, 10), (6, 30)])
    def test_upsilon_bound(self, s, m):
        assert cm.upsilon_bound_holds(s, m)

    @pytest.mark.parametrize("k,m1,m2", [(0, 0, 0), (5, 2, 3), (17, 4, 1), (40, 4, 4)])
    def test_leibniz_lhs_two_forms(self, k, m1, m2):
        assert cm.leibniz_sides(k, m1, m2)[0] == cm.leibniz_lhs_direct(k, m1, m2)

    @pytest.mark.parametrize("k,m1,m2", [(0, 0, 0), (10, 4, 4), (40, 1, 3)])
    def test_leibniz_bound(self, k, m1, m2):
        assert cm.leibniz_bound_check(k, m1, m2)
