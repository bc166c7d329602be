"""Periodic fields on the unit torus and constant-coefficient Fourier operators.

Fields are sampled at ``x_j = j/n`` on ``[0, 1)``.  The Fourier coefficients
use the convention ``coeffs = fft(values) / n`` so that

    f(x) = sum_k coeffs[k] * exp(2*pi*i*k*x).

Every operator here is a Fourier multiplier in the variable ``2*pi*k``.
The elliptic operator ``A_l = sum_j (-1)^j d^{2j}`` and its first-order
factors ``Lambda_pm = -i d +- xi_l`` are provided together with their
inverses; ``first_order_solve`` additionally implements the explicit
variation-of-constants formula as an independent quadrature route.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class PeriodicGrid:
    """Equispaced grid of ``n`` points on the period-1 torus."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise TypeError(f"grid size must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")

    @cached_property
    def x(self) -> np.ndarray:
        x = np.arange(self.n) / self.n
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order (Nyquist mode is ``-n/2``)."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)
        k.flags.writeable = False
        return k

    @cached_property
    def z(self) -> np.ndarray:
        """Symbol of ``-i d/dx``, i.e. ``2*pi*k``."""
        z = TWO_PI * self.k.astype(float)
        z.flags.writeable = False
        return z

    @cached_property
    def nyquist(self) -> int:
        return self.n // 2

    def field(self, values) -> "PeriodicField":
        return PeriodicField(self, values)

    def from_function(self, func) -> "PeriodicField":
        return PeriodicField(self, func(self.x))


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Grid samples of a function on the torus with a cached spectral view.

    Values may be complex for intermediate results; use :meth:`real` to
    come back to a real field (the imaginary residue is checked).
    """

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {vals.shape}")
        vals = vals.astype(complex if np.iscomplexobj(vals) else float, copy=True)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_coeffs(cls, grid: PeriodicGrid, coeffs, real: bool = True) -> "PeriodicField":
        """Build from Fourier coefficients, keeping them as the exact spectral view.

        Reusing the coefficients (instead of recomputing them from the grid
        values) keeps roundoff out of the high modes when several high-order
        multipliers are composed.
        """
        coeffs = np.array(coeffs, dtype=complex)
        vals = np.fft.ifft(coeffs * grid.n)
        if real:
            out = cls(grid, _realify(vals))
            coeffs = 0.5 * (coeffs + np.conj(np.roll(coeffs[::-1], 1)))
        else:
            out = cls(grid, vals)
        coeffs.flags.writeable = False
        out.__dict__["coeffs"] = coeffs
        return out

    @cached_property
    def coeffs(self) -> np.ndarray:
        c = np.fft.fft(self.values) / self.grid.n
        if self.is_real:
            # exact conjugate symmetry, so high-order multipliers stay real
            c = 0.5 * (c + np.conj(np.roll(c[::-1], 1)))
        c.flags.writeable = False
        return c

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def real(self) -> "PeriodicField":
        if self.is_real:
            return self
        _realify(self.values)
        return PeriodicField.from_coeffs(self.grid, self.coeffs, real=True)

    def __call__(self, x) -> np.ndarray:
        return interpolate(self, x)

    def _other(self, other):
        if isinstance(other, PeriodicField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return PeriodicField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return PeriodicField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return PeriodicField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        # pointwise, aliased; see ``product`` for the dealiased version
        return PeriodicField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicField(self.grid, -self.values)

    def __truediv__(self, scalar):
        return PeriodicField(self.grid, self.values / scalar)


def _realify(vals: np.ndarray) -> np.ndarray:
    vals = np.asarray(vals)
    if not np.iscomplexobj(vals):
        return vals.astype(float)
    scale = max(float(np.max(np.abs(vals))), 1.0)
    resid = float(np.max(np.abs(vals.imag)))
    if resid > IMAG_TOL * scale:
        raise ValueError(f"field is not real: imaginary residue {resid:.3e}")
    return vals.real.copy()


# -- derivatives and A_l ------------------------------------------------------

def derivative_multiplier(grid: PeriodicGrid, m: int) -> np.ndarray:
    """``(2*pi*i*k)^m``; the Nyquist mode is dropped for odd ``m``."""
    if m < 0:
        raise ValueError("derivative order must be nonnegative")
    mult = (1j * grid.z) ** m
    if m % 2:
        mult = mult.copy()
        mult[grid.nyquist] = 0.0
    return mult


def derivative(f: PeriodicField, m: int = 1) -> PeriodicField:
    """Spectral ``d^m f / dx^m``."""
    if m == 0:
        return f
    c = f.coeffs * derivative_multiplier(f.grid, m)
    return PeriodicField.from_coeffs(f.grid, c, real=f.is_real)


def symbol_A(z, l: int):
    """Fourier symbol of ``A_l``: ``sum_{j<=l} z^{2j}`` (always >= 1 for real z)."""
    if l < 1:
        raise ValueError("order l must be >= 1")
    z2 = np.asarray(z, dtype=float) ** 2
    out = np.ones_like(z2)
    term = np.ones_like(z2)
    for _ in range(l):
        term = term * z2
        out = out + term
    return out


def apply_A(f: PeriodicField, l: int) -> PeriodicField:
    c = f.coeffs * symbol_A(f.grid.z, l)
    return PeriodicField.from_coeffs(f.grid, c, real=f.is_real)


def invert_A(g: PeriodicField, l: int) -> PeriodicField:
    c = g.coeffs / symbol_A(g.grid.z, l)
    return PeriodicField.from_coeffs(g.grid, c, real=g.is_real)


# -- first-order factors ----------------------------------------------------------

@dataclass(frozen=True)
class OperatorSpec:
    """Roots ``xi_j = exp(i*pi*j/(l+1))`` and the coefficients of ``Lambda~_pm``.

    ``tilde_plus[m]`` and ``tilde_minus[m]`` are the coefficients ``d_m`` of
    ``d^m`` in ``Lambda~_+`` and ``Lambda~_-`` (degree ``2l - 1``).
    """

    order: int
    roots: np.ndarray = field(repr=False)
    tilde_plus: np.ndarray = field(repr=False)
    tilde_minus: np.ndarray = field(repr=False)

    @classmethod
    def for_order(cls, l: int) -> "OperatorSpec":
        if l < 1:
            raise ValueError("order l must be >= 1")
        roots = np.exp(1j * np.pi * np.arange(1, l + 1) / (l + 1))
        # polynomials in z = -i d (numpy.polynomial order: ascending powers)
        pairs = np.array([1.0 + 0j])
        for xj in roots[:-1]:
            pairs = np.polynomial.polynomial.polymul(pairs, [-(xj ** 2), 0.0, 1.0])
        tp_z = np.polynomial.polynomial.polymul(pairs, [-roots[-1], 1.0])
        tm_z = np.polynomial.polynomial.polymul(pairs, [roots[-1], 1.0])
        # z^m = (-i)^m d^m
        conv = (-1j) ** np.arange(2 * l)
        spec = cls(l, roots, tp_z * conv, tm_z * conv)
        spec._check_factorization()
        return spec

    def lambda_coeffs(self, sign: int) -> np.ndarray:
        """Coefficients of ``Lambda_pm = -i d +- xi_l`` in powers of ``d``."""
        return np.array([_sign(sign) * self.roots[-1], -1j])

    def tilde_coeffs(self, sign: int) -> np.ndarray:
        return self.tilde_plus if _sign(sign) > 0 else self.tilde_minus

    def _check_factorization(self):
        a = np.zeros(2 * self.order + 1)
        a[0::2] = (-1.0) ** np.arange(self.order + 1)
        for sign in (1, -1):
            prod = np.polynomial.polynomial.polymul(self.lambda_coeffs(sign), self.tilde_coeffs(sign))
            if np.max(np.abs(prod - a)) > 1e-12:
                raise ArithmeticError("Lambda * Lambda~ does not reproduce A_l")
        if np.any(np.abs(np.abs(self.roots) - 1.0) > 1e-14):
            raise ArithmeticError("roots must lie on the unit circle")


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def _poly_multiplier(grid: PeriodicGrid, coeffs: np.ndarray) -> np.ndarray:
    mult = np.zeros(grid.n, dtype=complex)
    d = 1j * grid.z
    for m, cm in enumerate(coeffs):
        mult = mult + cm * d ** m
    return mult


def lambda_multiplier(grid: PeriodicGrid, spec: OperatorSpec, sign) -> np.ndarray:
    """Fourier symbol of ``Lambda_pm``: ``2*pi*k +- xi_l``."""
    return _poly_multiplier(grid, spec.lambda_coeffs(sign))


def apply_lambda(f: PeriodicField, spec: OperatorSpec, sign) -> PeriodicField:
    """``Lambda_pm f``; the result is complex in general."""
    mult = lambda_multiplier(f.grid, spec, sign)
    return PeriodicField.from_coeffs(f.grid, f.coeffs * mult, real=False)


def apply_lambda_tilde(f: PeriodicField, spec: OperatorSpec, sign) -> PeriodicField:
    mult = _poly_multiplier(f.grid, spec.tilde_coeffs(sign))
    return PeriodicField.from_coeffs(f.grid, f.coeffs * mult, real=False)


def invert_lambda_tilde(g: PeriodicField, spec: OperatorSpec, sign) -> PeriodicField:
    mult = _poly_multiplier(g.grid, spec.tilde_coeffs(sign))
    return PeriodicField.from_coeffs(g.grid, g.coeffs / mult, real=False)


# -- (-i d - xi) f = g ------------------------------------------------------------

def _check_xi(xi: complex):
    xi = complex(xi)
    nearest = TWO_PI * round(xi.real / TWO_PI)
    if abs(xi - nearest) < 1e-9:
        raise ValueError(f"xi={xi} is within 1e-9 of 2*pi*Z; -i d - xi is not invertible")
    return xi


def first_order_solve(g: PeriodicField, xi: complex, method: str = "spectral") -> PeriodicField:
    """Periodic solution of ``(-i d/dx - xi) f = g`` (complex-valued).

    ``method="spectral"`` divides mode ``k`` by ``2*pi*k - xi``.
    ``method="quadrature"`` evaluates the variation-of-constants formula

        -i f(x) = C e^{i xi x} + e^{i xi x} int_0^x g(y) e^{-i xi y} dy

    with ``C`` fixed by ``f(0) = f(1)``; the cell integrals use Gauss-Legendre
    nodes and the trigonometric interpolant of ``g``.
    """
    xi = _check_xi(xi)
    if method == "spectral":
        c = g.coeffs / (g.grid.z - xi)
        return PeriodicField.from_coeffs(g.grid, c, real=False)
    if method == "quadrature":
        return _first_order_quadrature(g, xi)
    raise ValueError(f"unknown method {method!r}")


def _first_order_quadrature(g: PeriodicField, xi: complex, nodes: int = 10) -> PeriodicField:
    grid = g.grid
    h = 1.0 / grid.n
    t, w = np.polynomial.legendre.leggauss(nodes)
    y = (grid.x[:, None] + 0.5 * h * (1.0 + t)[None, :]).ravel()
    integrand = interpolate(g, y) * np.exp(-1j * xi * y)
    cells = 0.5 * h * (integrand.reshape(grid.n, nodes) @ w)
    cum = np.concatenate(([0.0], np.cumsum(cells)))
    total = cum[-1]
    e = np.exp(1j * xi)
    const = e * total / (1.0 - e)
    phase = np.exp(1j * xi * grid.x)
    f = 1j * (const * phase + phase * cum[:-1])
    return PeriodicField(grid, f)


# -- interpolation, products, norms ------------------------------------------------

def interpolate(f: PeriodicField, x, chunk: int = 4096) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grid = f.grid
    c = f.coeffs
    nyq = grid.nyquist
    k = grid.k.astype(float).copy()
    k[nyq] = 0.0
    cn = c.copy()
    cn[nyq] = 0.0
    out = np.empty(x.shape, dtype=complex)
    flat = x.ravel()
    res = out.reshape(-1)
    for start in range(0, flat.size, chunk):
        xs = flat[start:start + chunk]
        ph = np.exp(1j * TWO_PI * np.outer(xs, k))
        res[start:start + chunk] = ph @ cn + c[nyq] * np.cos(np.pi * grid.n * xs)
    if f.is_real:
        return out.real
    return out


def pad_coeffs(c: np.ndarray, m: int) -> np.ndarray:
    """Embed FFT-ordered coefficients of length n into length m >= n (Nyquist dropped)."""
    n = c.shape[-1]
    half = n // 2
    out = np.zeros(c.shape[:-1] + (m,), dtype=complex)
    out[..., :half] = c[..., :half]
    out[..., m - half + 1:] = c[..., half + 1:]
    return out


def truncate_coeffs(c: np.ndarray, n: int) -> np.ndarray:
    m = c.shape[-1]
    half = n // 2
    out = np.zeros(c.shape[:-1] + (n,), dtype=complex)
    out[..., :half] = c[..., :half]
    out[..., half + 1:] = c[..., m - half + 1:]
    return out


def dealiased_product_coeffs(*factors: np.ndarray, pad: int | None = None) -> np.ndarray:
    """Coefficients of a pointwise product, computed on a padded grid.

    The default padding ``max(2, ceil((d + 1) / 2))`` for ``d`` factors makes
    the truncated result alias-free.
    """
    n = factors[0].shape[-1]
    d = len(factors)
    if pad is None:
        pad = max(2, -(-(d + 1) // 2))
    m = pad * n
    prod = None
    for c in factors:
        v = np.fft.ifft(pad_coeffs(c, m)) * m
        prod = v if prod is None else prod * v
    return truncate_coeffs(np.fft.fft(prod) / m, n)


def product(*fields: PeriodicField) -> PeriodicField:
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ValueError("fields live on different grids")
    c = dealiased_product_coeffs(*(f.coeffs for f in fields))
    real = all(f.is_real for f in fields)
    return PeriodicField.from_coeffs(grid, c, real=real)


def mollify(f: PeriodicField, width: float) -> PeriodicField:
    """Convolve with a periodized Gaussian of standard deviation ``width``."""
    if width < 0:
        raise ValueError("mollifier width must be nonnegative")
    mult = np.exp(-0.5 * (f.grid.z * width) ** 2)
    return PeriodicField.from_coeffs(f.grid, f.coeffs * mult, real=f.is_real)


def sup_norm(f: PeriodicField) -> float:
    return float(np.max(np.abs(f.values)))


def l2_norm(f: PeriodicField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def hs_norm(f: PeriodicField, s: float) -> float:
    w = (1.0 + f.grid.z ** 2) ** s
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def energy_norm(f: PeriodicField, l: int) -> float:
    """``sqrt(<f, A_l f>)``, the norm conserved by the order-l flow.

    For ``l = 1`` this is the usual H^1 norm.
    """
    w = symbol_A(f.grid.z, l)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def w_inf_seminorm(f: PeriodicField, m: int) -> float:
    return sup_norm(derivative(f, m))


def w_inf_norm(f: PeriodicField, m: int) -> float:
    """``max_{j<=m} sup |d^j f|``."""
    return max(w_inf_seminorm(f, j) for j in range(m + 1))


def norms(f: PeriodicField, s: int = 1, m: int = 1) -> dict:
    return {
        "sup": sup_norm(f),
        "l2": l2_norm(f),
        f"h{s}": hs_norm(f, s),
        f"w{m},inf": w_inf_norm(f, m),
        "seminorms": [w_inf_seminorm(f, j) for j in range(m + 1)],
    }


def random_trig_poly(grid: PeriodicGrid, rng: np.random.Generator, modes: int = 6,
                     decay: float = 1.0) -> PeriodicField:
    """Real trigonometric polynomial with ``modes`` random modes, amplitude ~ k^-decay."""
    if modes >= grid.nyquist:
        raise ValueError("too many modes for this grid")
    c = np.zeros(grid.n, dtype=complex)
    kk = np.arange(1, modes + 1)
    amp = (rng.standard_normal(modes) + 1j * rng.standard_normal(modes)) / kk ** decay
    c[1:modes + 1] = amp
    c[-modes:] = np.conj(amp[::-1])
    c[0] = rng.standard_normal()
    return PeriodicField.from_coeffs(grid, c)
