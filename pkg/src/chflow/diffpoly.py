"""Exact differential polynomials in a single symbol ``u``.

A monomial is a product ``(d^{m_1} u) ... (d^{m_r} u)`` stored as the sorted
tuple ``(m_1, ..., m_r)``; a :class:`DiffPoly` maps such tuples to rational
coefficients.  This is enough to expand ``C_l(u)`` exactly and to recover the
quadratic source ``F[u]`` with ``d/dx F = -C_l``.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
import sympy

from . import spectral as sp


class InconsistentSystemError(ArithmeticError):
    """The ansatz for F[u] admits no solution."""


class DiffPoly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for key, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                k = tuple(sorted(int(m) for m in key))
                if any(m < 0 for m in k):
                    raise ValueError("derivative orders must be nonnegative")
                c = clean.get(k, 0) + c
                if c:
                    clean[k] = c
                else:
                    clean.pop(k, None)
        self.terms = clean

    @classmethod
    def u(cls, order: int = 0) -> "DiffPoly":
        """The monomial ``d^order u``."""
        return cls({(order,): 1})

    @classmethod
    def constant(cls, c) -> "DiffPoly":
        return cls({(): c})

    # -- ring structure --------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, DiffPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return DiffPoly.constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return DiffPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return DiffPoly({k: c * other for k, c in self.terms.items()})
        if not isinstance(other, DiffPoly):
            return NotImplemented
        out: dict = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                key = tuple(sorted(ka + kb))
                out[key] = out.get(key, 0) + ca * cb
        return DiffPoly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    # -- differentiation -----------------------------------------------------------
    def dx(self, times: int = 1) -> "DiffPoly":
        p = self
        for _ in range(times):
            out: dict = {}
            for key, c in p.terms.items():
                for i in range(len(key)):
                    new = tuple(sorted(key[:i] + (key[i] + 1,) + key[i + 1:]))
                    out[new] = out.get(new, 0) + c
            p = DiffPoly(out)
        return p

    def apply_A(self, l: int) -> "DiffPoly":
        """``A_l p = sum_j (-1)^j d^{2j} p``."""
        out = DiffPoly()
        p = self
        for j in range(l + 1):
            out = out + p * (-1) ** j
            p = p.dx(2)
        return out

    # -- inspection ---------------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((len(k) for k in self.terms), default=0)

    @property
    def order(self) -> int:
        """Largest derivative order carried by a single factor."""
        return max((max(k) for k in self.terms if k), default=0)

    @property
    def weight(self) -> int:
        """Largest total derivative count ``m_1 + ... + m_r`` of a monomial."""
        return max((sum(k) for k in self.terms), default=0)

    def coefficient(self, *orders) -> Fraction:
        return self.terms.get(tuple(sorted(orders)), Fraction(0))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def dump(self) -> str:
        """Deterministic one-monomial-per-line text form."""
        if not self.terms:
            return "0\n"
        lines = []
        for key, c in self.sorted_terms():
            factors = " ".join(f"u^({m})" for m in key) or "1"
            lines.append(f"{c} * {factors}")
        return "\n".join(lines) + "\n"

    def __repr__(self):
        if not self.terms:
            return "DiffPoly(0)"
        parts = []
        for key, c in self.sorted_terms():
            parts.append(f"{c}*" + "*".join(f"u{m}" for m in key) if key else f"{c}")
        return "DiffPoly(" + " + ".join(parts) + ")"


def expand_Cl(l: int) -> DiffPoly:
    """``C_l(u) = -u A_l u' + A_l(u u') - 2 u' A_l u`` fully expanded."""
    if l < 1:
        raise ValueError("order l must be >= 1")
    u = DiffPoly.u(0)
    ux = DiffPoly.u(1)
    return -(u * ux.apply_A(l)) + (u * ux).apply_A(l) - 2 * (ux * u.apply_A(l))


def quadratic_basis(max_order: int):
    """Sorted pairs ``(m1, m2)`` with ``m1 <= m2 <= max_order``."""
    return list(combinations_with_replacement(range(max_order + 1), 2))


def antiderivative_F(l: int) -> DiffPoly:
    """The quadratic differential polynomial ``F`` with ``d/dx F = -C_l``.

    The ansatz runs over ``(d^{m1} u)(d^{m2} u)`` with every factor of order
    at most ``2l - 1`` (``u^2 + (u')^2 / 2`` for ``l = 1`` already needs
    ``m1 + m2 = 2``).  Coefficients come from an exact rational linear solve;
    ``d/dx`` has no kernel on non-constant polynomials, so the solution is
    unique when it exists.
    """
    target = -expand_Cl(l)
    basis = quadratic_basis(2 * l - 1)
    images = [DiffPoly({b: 1}).dx() for b in basis]
    rows = sorted(set(target.terms).union(*(im.terms for im in images)))
    mat = sympy.Matrix([[sympy.Rational(im.terms.get(r, 0)) for im in images] for r in rows])
    rhs = sympy.Matrix([sympy.Rational(target.terms.get(r, 0)) for r in rows])
    try:
        sol, params = mat.gauss_jordan_solve(rhs)
    except ValueError as exc:
        raise InconsistentSystemError(f"no F with dF = -C_{l} among order-{2 * l - 1} quadratics") from exc
    if params.shape[0]:
        raise InconsistentSystemError("ansatz for F is not unique")
    F = DiffPoly({b: Fraction(int(v.p), int(v.q)) for b, v in zip(basis, sol)})
    if F.dx() + expand_Cl(l):
        raise InconsistentSystemError("solved F does not satisfy dF = -C_l")
    return F


def evaluate(p: DiffPoly, u: sp.PeriodicField) -> sp.PeriodicField:
    """Substitute spectral derivatives of ``u`` and multiply on a padded grid.

    Products of ``d`` factors are formed on a grid ``max(2, ceil((d+1)/2))``
    times finer and truncated back, which is alias-free for band-limited ``u``.
    """
    grid = u.grid
    pad = max(2, -(-(max(p.degree, 1) + 1) // 2))
    m = pad * grid.n
    derivs = {}
    for k in sorted({k for key in p.terms for k in key}):
        c = u.coeffs * sp.derivative_multiplier(grid, k)
        derivs[k] = np.fft.ifft(sp.pad_coeffs(c, m)).real * m
    total = np.zeros(m)
    for key, c in p.terms.items():
        term = np.full(m, float(c))
        for k in key:
            term = term * derivs[k]
        total = total + term
    out = sp.truncate_coeffs(np.fft.fft(total) / m, grid.n)
    return sp.PeriodicField.from_coeffs(grid, out)
