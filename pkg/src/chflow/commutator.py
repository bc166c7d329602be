"""Commutators of ``d_x^m`` with powers of the material derivative ``D = d_t + u d_x``.

The expansion

    d_x^m D^k psi = D^k d_x^m psi + F^{k,m}[u, psi],
    F^{k,m} = sum_gamma c_{k,m}(gamma) f(gamma)[u, psi],

is built constructively.  A term ``gamma = (s, alpha, beta)`` stands for the
ordered product

    (d^{beta_1} D^{alpha_1} u) ... (d^{beta_{s-1}} D^{alpha_{s-1}} u) (d^{beta_s} D^{alpha_s} psi)

and is stored as the pair ``(alpha, beta)``.  Factor order is never
canonicalised, so permuted products stay distinct keys.

The identities are certified on exact symbolic test functions
(:class:`SymField`), and the combinatorial inequalities used to bound
``F^{k,m}`` are evaluated in exact rational arithmetic.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb, factorial, prod

import numpy as np

MAX_ENUMERATION = 10 ** 7


# -- index sets ---------------------------------------------------------------------

def compositions(total: int, parts: int, minimum: int = 0):
    """All tuples of ``parts`` integers ``>= minimum`` summing to ``total``."""
    free = total - parts * minimum
    if parts <= 0 or free < 0:
        if parts == 0 and total == 0:
            yield ()
        return
    for bars in combinations(range(free + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1 + minimum)
            prev = b
        out.append(free + parts - 2 - prev + minimum)
        yield tuple(out)


def in_B(k: int, m: int, alpha, beta) -> bool:
    """Membership in ``B_{k,m}``."""
    s = len(alpha)
    return (
        len(beta) == s
        and 2 <= s <= k + 1
        and all(a >= 0 for a in alpha)
        and all(b >= 1 for b in beta)
        and sum(alpha) == k + 1 - s
        and sum(beta) == m + s - 1
    )


def enumerate_B(k: int, m: int):
    """Every ``(alpha, beta)`` in ``B_{k,m}``, by brute force over the constraints."""
    for s in range(2, k + 2):
        for alpha in compositions(k + 1 - s, s):
            for beta in compositions(m + s - 1, s, minimum=1):
                yield alpha, beta


def coefficient_bound(k: int, m: int, alpha, beta) -> Fraction:
    """``(2s)^{2(m-1)} k! m! / (alpha! beta!)``."""
    s = len(alpha)
    num = (2 * s) ** (2 * (m - 1)) * factorial(k) * factorial(m)
    den = prod(factorial(a) for a in alpha) * prod(factorial(b) for b in beta)
    return Fraction(num, den)


# -- term sets ---------------------------------------------------------------------------

@dataclass
class TermSet:
    """Emitted terms of ``F^{k,m}`` as ``(alpha, beta, coefficient)`` triples.

    Each recursion step reads the previous expansions through their
    per-gamma coefficients and emits one entry per produced product, so the
    same gamma can appear several times in ``terms``.
    """

    k: int
    m: int
    terms: list = field(default_factory=list)

    def aggregated(self) -> dict:
        """``c_{k,m}(gamma)``: signed sum of the emissions of each gamma."""
        out: dict = defaultdict(int)
        for alpha, beta, c in self.terms:
            out[(alpha, beta)] += c
        return {g: c for g, c in out.items() if c}

    def absolute_mass(self) -> dict:
        """Sum of ``|c|`` over the emissions of each gamma (dominates ``|c_{k,m}|``)."""
        out: dict = defaultdict(int)
        for alpha, beta, c in self.terms:
            out[(alpha, beta)] += abs(c)
        return dict(out)

    def check_membership(self) -> bool:
        return all(in_B(self.k, self.m, a, b) for a, b, _ in self.terms)

    def bound_violations(self, use_mass: bool = True) -> list:
        """Gammas whose coefficient exceeds ``(2s)^{2(m-1)} k! m!/(alpha! beta!)``."""
        coeffs = self.absolute_mass() if use_mass else self.aggregated()
        bad = []
        for (alpha, beta), c in coeffs.items():
            bound = coefficient_bound(self.k, self.m, alpha, beta)
            if abs(c) > bound:
                bad.append((alpha, beta, c, bound))
        return bad

    def dump(self) -> str:
        """Deterministic text form, one aggregated gamma per line."""
        lines = [f"# F^{{{self.k},{self.m}}}: {len(self.terms)} emitted terms"]
        for (alpha, beta), c in sorted(self.aggregated().items(), key=lambda kv: (len(kv[0][0]), kv[0])):
            a = ",".join(map(str, alpha))
            b = ",".join(map(str, beta))
            lines.append(f"s={len(alpha)} alpha=({a}) beta=({b}) c={c}")
        return "\n".join(lines) + "\n"


@lru_cache(maxsize=None)
def _F1_coeffs(k: int) -> tuple:
    return tuple(sorted(build_F1(k).aggregated().items()))


def build_F1(k: int) -> TermSet:
    """``F^k = F^{k,1}`` from ``F^k = D F^{k-1} + (d u)(d D^{k-1} psi)``.

    ``D`` acts as a derivation on the factors, with
    ``D d D^a w = d D^{a+1} w - (d u)(d D^a w)``; the new ``(d u)`` factor
    is placed right before the factor it came from, so ``psi`` stays last.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = []
    if k > 1:
        for (alpha, beta), c in _F1_coeffs(k - 1):
            s = len(alpha)
            for i in range(s):
                a = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1:]
                terms.append((a, beta, c))
                terms.append((alpha[:i] + (0,) + alpha[i:], beta + (1,), -c))
    terms.append(((0, k - 1), (1, 1), 1))
    return TermSet(k, 1, terms)


@lru_cache(maxsize=None)
def _Fkm_coeffs(k: int, m: int) -> tuple:
    if k == 0:
        return ()
    return tuple(sorted(build_Fkm(k, m).aggregated().items()))


def _bump(beta: tuple, r: int) -> tuple:
    return beta[:r] + (beta[r] + 1,) + beta[r + 1:]


def build_Fkm(k: int, m: int) -> TermSet:
    """``F^{k,m}`` by iterating in ``m``.

    With ``M = m - 1``,

        F^{k,M+1} = F^k[u, d^M psi] + d F^{k,M},

    and inside ``F^k[u, d^M psi]`` the last factor is rewritten as
    ``d D^a d^M psi = d^{M+1} D^a psi - d F^{a,M}[u, psi]``.  This gives the
    three kinds of terms: the rewritten last factor, the nested ``F^{a,M}``
    differentiated by Leibniz, and the Leibniz derivative of ``F^{k,M}``.
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    if m == 1:
        return build_F1(k)
    mm = m - 1
    terms = []
    f1 = _F1_coeffs(k)
    # first kind
    for (alpha, _), c in f1:
        s = len(alpha)
        terms.append((alpha, (1,) * (s - 1) + (mm + 1,), c))
    # second kind
    for (alpha, _), c in f1:
        a = alpha[-1]
        if a == 0:
            continue
        head_a = alpha[:-1]
        head_b = (1,) * len(head_a)
        for (alpha2, beta2), c2 in _Fkm_coeffs(a, mm):
            for r in range(len(beta2)):
                terms.append((head_a + alpha2, head_b + _bump(beta2, r), -c * c2))
    # third kind
    for (alpha, beta), c in _Fkm_coeffs(k, mm):
        for r in range(len(beta)):
            terms.append((alpha, _bump(beta, r), c))
    return TermSet(k, m, terms)


# -- exact symbolic test functions ------------------------------------------------------------

class SymField:
    """Polynomial in ``t`` with trigonometric-polynomial coefficients in ``x``.

    Stored in the exponential basis: ``{(p, n): (re, im)}`` means
    ``sum (re + i im) t^p exp(i n x)`` with exact rational ``re``/``im``
    (plain ints stay ints).  Frequencies are integers; the commutator
    identities do not depend on the spatial period.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {k: v for k, v in (terms or {}).items() if v[0] or v[1]}

    @classmethod
    def real_trig(cls, modes: dict) -> "SymField":
        """From ``{(p, n): (a, b)}`` meaning ``t^p (a cos(n x) + b sin(n x))``."""
        out: dict = {}
        for (p, n), (a, b) in modes.items():
            a, b = _num(a), _num(b)
            if n == 0:
                _acc(out, (p, 0), (a, 0))
                continue
            half = Fraction(1, 2)
            # cos = (e + e^-1)/2, sin = (e - e^-1)/(2i)
            _acc(out, (p, n), (a * half, -b * half))
            _acc(out, (p, -n), (a * half, b * half))
        return cls(out)

    @classmethod
    def from_exponentials(cls, coeffs: dict) -> "SymField":
        """Real field ``sum t^p (c e^{inx} + conj(c) e^{-inx})`` from ``{(p, n>0): (re, im)}``.

        ``n = 0`` entries contribute ``re * t^p`` once.  Integer input keeps
        all later arithmetic in the integers.
        """
        out: dict = {}
        for (p, n), (re, im) in coeffs.items():
            if n == 0:
                _acc(out, (p, 0), (re, 0))
            else:
                _acc(out, (p, n), (re, im))
                _acc(out, (p, -n), (re, -im))
        return cls(out)

    @classmethod
    def constant(cls, c) -> "SymField":
        return cls({(0, 0): (_num(c), 0)})

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            _acc(out, k, v)
        return SymField(out)

    def __neg__(self):
        return SymField({k: (-a, -b) for k, (a, b) in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "SymField":
        c = _num(c)
        return SymField({k: (a * c, b * c) for k, (a, b) in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, SymField):
            return self.scale(other)
        out: dict = {}
        get = out.get
        for (p1, n1), (a1, b1) in self.terms.items():
            for (p2, n2), (a2, b2) in other.terms.items():
                key = (p1 + p2, n1 + n2)
                re, im = get(key, (0, 0))
                out[key] = (re + a1 * a2 - b1 * b2, im + a1 * b2 + b1 * a2)
        return SymField(out)

    __rmul__ = __mul__

    def dt(self) -> "SymField":
        return SymField({(p - 1, n): (a * p, b * p) for (p, n), (a, b) in self.terms.items() if p})

    def dx(self, times: int = 1) -> "SymField":
        f = self
        for _ in range(times):
            # d/dx (a + ib) e^{inx} = (-n b + i n a) e^{inx}
            f = SymField({(p, n): (-n * b, n * a) for (p, n), (a, b) in f.terms.items() if n})
        return f

    def material(self, u: "SymField") -> "SymField":
        """``D w = d_t w + u d_x w``."""
        return self.dt() + u * self.dx()

    def max_abs_coeff(self):
        return max((max(abs(a), abs(b)) for a, b in self.terms.values()), default=Fraction(0))

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, SymField) and (self - other).is_zero()

    def __repr__(self):
        return f"SymField({len(self.terms)} terms)"


def _num(c):
    if isinstance(c, (int, Fraction)):
        return c
    return Fraction(c)


def _acc(d: dict, key, val):
    re, im = d.get(key, (0, 0))
    d[key] = (re + val[0], im + val[1])


def random_symfield(rng: np.random.Generator, max_mode: int = 2, t_degree: int = 1,
                    amplitude: int = 3) -> SymField:
    """Random real SymField with small integer exponential coefficients."""
    coeffs = {}
    for p in range(t_degree + 1):
        for n in range(max_mode + 1):
            re = int(rng.integers(-amplitude, amplitude + 1))
            im = 0 if n == 0 else int(rng.integers(-amplitude, amplitude + 1))
            if re or im:
                coeffs[(p, n)] = (re, im)
    return SymField.from_exponentials(coeffs)


class _Jets:
    """Cache of ``d^b D^a w`` for fixed ``u`` and a base field ``w``."""

    def __init__(self, u: SymField, w: SymField):
        self.u = u
        self.D = [w]
        self.cache: dict = {}

    def get(self, a: int, b: int) -> SymField:
        key = (a, b)
        if key not in self.cache:
            while len(self.D) <= a:
                self.D.append(self.D[-1].material(self.u))
            self.cache[key] = self.D[a] if b == 0 else self.get(a, b - 1).dx()
        return self.cache[key]


def evaluate_termset(coeffs, u: SymField, psi: SymField, ujets=None, pjets=None) -> SymField:
    """``sum_gamma c(gamma) f(gamma)[u, psi]`` for ``{(alpha, beta): c}`` items."""
    ujets = ujets or _Jets(u, u)
    pjets = pjets or _Jets(u, psi)
    prefix: dict = {}
    total = SymField()
    for (alpha, beta), c in coeffs:
        head = tuple(zip(alpha[:-1], beta[:-1]))
        acc = prefix.get(head)
        if acc is None:
            acc = SymField.constant(1)
            for i in range(len(head)):
                key = head[: i + 1]
                nxt = prefix.get(key)
                if nxt is None:
                    nxt = acc * ujets.get(*head[i])
                    prefix[key] = nxt
                acc = nxt
        total = total + (acc * pjets.get(alpha[-1], beta[-1])).scale(c)
    return total


def verify_identity(k: int, m: int, u: SymField, psi: SymField, terms: TermSet | None = None):
    """Exact residual of ``d^m D^k psi - D^k d^m psi - F^{k,m}[u, psi]``.

    Returns the largest absolute coefficient of the difference; ``0`` means
    the identity holds exactly.
    """
    terms = terms or build_Fkm(k, m)
    pjets = _Jets(u, psi)
    lhs = pjets.get(k, m)
    dpsi = _Jets(u, psi.dx(m))
    rhs = dpsi.get(k, 0) + evaluate_termset(sorted(terms.aggregated().items()), u, psi,
                                             pjets=pjets)
    return (lhs - rhs).max_abs_coeff()


# -- counting inequalities ------------------------------------------------------------------------

def upsilon(alpha) -> Fraction:
    return Fraction(1, prod((1 + a) ** 2 for a in alpha))


def upsilon_sum_enumerated(s: int, m: int) -> Fraction:
    """``sum_{|alpha| = m, alpha in N^s} prod 1/(1 + alpha_i)^2`` by enumeration."""
    if s < 1 or m < 0:
        raise ValueError("need s >= 1 and m >= 0")
    count = comb(m + s - 1, s - 1)
    if count > MAX_ENUMERATION:
        raise ValueError(f"refusing to enumerate {count} multi-indices")
    return sum((upsilon(a) for a in compositions(m, s)), Fraction(0))


@lru_cache(maxsize=None)
def upsilon_sum(s: int, m: int) -> Fraction:
    """Same sum, exactly, as the coefficient of ``x^m`` in ``(sum_j x^j/(j+1)^2)^s``."""
    if s < 1 or m < 0:
        raise ValueError("need s >= 1 and m >= 0")
    if s == 1:
        return Fraction(1, (m + 1) ** 2)
    return sum((Fraction(1, (j + 1) ** 2) * upsilon_sum(s - 1, m - j) for j in range(m + 1)),
               Fraction(0))


def upsilon_bound_holds(s: int, m: int) -> bool:
    """``sum Upsilon <= 20^s / (m + 1)^2``."""
    return upsilon_sum(s, m) <= Fraction(20 ** s, (m + 1) ** 2)


def leibniz_sides(k: int, m1: int, m2: int) -> tuple:
    """Both sides of the Leibniz product estimate with ``L`` and ``V`` divided out.

    Left: ``k! m1! m2! / ((m1+1)^2 (m2+1)^2) * sum_j 1/((j+1)^2 (k-j+1)^2)``,
    i.e. ``sum_j binom(k, j) V_{m1,j} V_{m2,k-j}``.
    Right: ``16 V V_{m1+m2,k} = 16 k! (m1+m2)! / ((m1+m2+1)^2 (k+1)^2)``.
    """
    inner = sum((Fraction(1, (j + 1) ** 2 * (k - j + 1) ** 2) for j in range(k + 1)), Fraction(0))
    lhs = Fraction(factorial(k) * factorial(m1) * factorial(m2),
                   (m1 + 1) ** 2 * (m2 + 1) ** 2) * inner
    rhs = Fraction(16 * factorial(k) * factorial(m1 + m2), (m1 + m2 + 1) ** 2 * (k + 1) ** 2)
    return lhs, rhs


def leibniz_bound_check(k: int, m1: int, m2: int) -> bool:
    lhs, rhs = leibniz_sides(k, m1, m2)
    return lhs <= rhs


def leibniz_lhs_direct(k: int, m1: int, m2: int) -> Fraction:
    """``sum_j binom(k, j) V_{m1,j} V_{m2,k-j}`` at ``L = V = 1`` (independent check of the left side)."""
    def v(m, j):
        return Fraction(factorial(m) * factorial(j), (m + 1) ** 2 * (j + 1) ** 2)
    return sum((comb(k, j) * v(m1, j) * v(m2, k - j) for j in range(k + 1)), Fraction(0))
