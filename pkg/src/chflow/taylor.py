"""Time-Taylor expansions at ``t = 0`` and numerical witnesses of time analyticity.

Jets are normalized: ``u_k = d_t^k u(0) / k!``.  The recursion follows from

    u_t + u u_x + P_x = 0,   A_l P = F[u] = sum c_{m1 m2} (d^{m1} u)(d^{m2} u),

by collecting powers of ``t``; all products are dealiased.  Material
derivatives ``D^k u(0)`` are obtained by applying ``D = d_t + u d_x``
jet-wise, so the flow coefficients ``d_t^{k+1} xi(0) = D^k u(0)`` follow
without time stepping.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import diffpoly
from . import eulerian
from . import spectral as sp

OVERFLOW_LIMIT = 1e150
ROUNDOFF_WARN_K = 20


class _Padded:
    def __init__(self, grid: sp.PeriodicGrid):
        self.grid = grid
        self.m = 2 * grid.n
        self.dx = sp.derivative_multiplier(grid, 1)

    def up(self, c, real=True):
        v = np.fft.ifft(sp.pad_coeffs(c, self.m)) * self.m
        return v.real if real else v

    def down(self, v):
        c = sp.truncate_coeffs(np.fft.fft(v) / self.m, self.grid.n)
        if not np.iscomplexobj(v):
            # keep real jets exactly conjugate-symmetric
            c = 0.5 * (c + np.conj(np.roll(c[::-1], 1)))
        return c


@dataclass
class TimeTaylor:
    """Normalized jets ``u_0 ... u_K`` and ``P_0 ... P_{K-1}`` (coefficient arrays)."""

    grid: sp.PeriodicGrid
    l: int
    coeffs: list
    pressure: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.coeffs) - 1

    def fields(self) -> list:
        return [sp.PeriodicField.from_coeffs(self.grid, c) for c in self.coeffs]

    def evaluate(self, t: float) -> sp.PeriodicField:
        c = sum(ck * t ** k for k, ck in enumerate(self.coeffs))
        return sp.PeriodicField.from_coeffs(self.grid, c)

    def evaluate_dt(self, t: float) -> sp.PeriodicField:
        c = sum(k * ck * t ** (k - 1) for k, ck in enumerate(self.coeffs) if k)
        if isinstance(c, int):
            c = np.zeros(self.grid.n, dtype=complex)
        return sp.PeriodicField.from_coeffs(self.grid, c)

    def residual(self, t: float) -> float:
        """``|| d/dt S(t) - rhs(S(t)) ||_inf`` for the truncated series ``S``."""
        s = self.evaluate(t)
        return sp.sup_norm(self.evaluate_dt(t) - eulerian.rhs(s, self.l))


def time_taylor_u(u0: sp.PeriodicField, l: int = 1, K: int = 12) -> TimeTaylor:
    """Normalized time jets of the order-l solution starting at ``u0``."""
    if K < 0 or K > 30:
        raise ValueError("K must lie in 0..30")
    if K > ROUNDOFF_WARN_K:
        warnings.warn("above K ~ 20 round-off dominates the smallest coefficients", RuntimeWarning)
    grid = u0.grid
    F = diffpoly.antiderivative_F(l)
    terms = [(key, float(c)) for key, c in F.terms.items()]
    orders = sorted({0, 1} | {m for key, _ in terms for m in key})
    mult = {m: sp.derivative_multiplier(grid, m) for m in orders}
    sym = sp.symbol_A(grid.z, l)
    pad = _Padded(grid)

    coeffs = [np.array(u0.coeffs)]
    pressure = []
    phys = []
    for k in range(K):
        phys.append({m: pad.up(mult[m] * coeffs[k]) for m in orders})
        src = np.zeros(pad.m)
        adv = np.zeros(pad.m)
        for j in range(k + 1):
            a, b = phys[j], phys[k - j]
            adv += a[0] * b[1]
            for (m1, m2), c in terms:
                src += c * a[m1] * b[m2]
        Pk = pad.down(src) / sym
        nxt = (-pad.down(adv) - pad.dx * Pk) / (k + 1)
        size = np.max(np.abs(nxt))
        if not np.isfinite(size) or size > OVERFLOW_LIMIT:
            raise OverflowError(f"Taylor coefficient {k + 1} overflowed")
        pressure.append(Pk)
        coeffs.append(nxt)
    return TimeTaylor(grid, l, coeffs, pressure)


def apply_D(jet: list, tt: TimeTaylor, real: bool = True) -> list:
    """``D W`` jet-wise: ``(D W)_j = (j+1) W_{j+1} + sum_i u_i d_x W_{j-i}``.

    ``real`` states that the jet entries are coefficients of real fields.
    """
    pad = _Padded(tt.grid)
    J = len(jet) - 1
    if J < 1:
        raise ValueError("jet too short to differentiate in time")
    up_u = [pad.up(c) for c in tt.coeffs[:J]]
    up_w = [pad.up(pad.dx * c, real) for c in jet[:J]]
    out = []
    for j in range(J):
        acc = np.zeros(pad.m, dtype=float if real else complex)
        for i in range(j + 1):
            acc += up_u[i] * up_w[j - i]
        out.append((j + 1) * jet[j + 1] + pad.down(acc))
    return out


def material_derivative_coeffs(tt: TimeTaylor, K: int | None = None) -> list:
    """Coefficient arrays of ``D^k u(0)`` for ``k = 0..K``."""
    K = tt.K if K is None else K
    if K > tt.K:
        raise ValueError("need at least K time jets")
    jet = list(tt.coeffs[:K + 1])
    out = [jet[0]]
    for _ in range(K):
        jet = apply_D(jet, tt)
        out.append(jet[0])
    return out


def material_derivatives(tt: TimeTaylor, K: int | None = None) -> list:
    return [sp.PeriodicField.from_coeffs(tt.grid, c) for c in material_derivative_coeffs(tt, K)]


def _lambda_jets(tt: TimeTaylor, sign) -> list:
    spec = sp.OperatorSpec.for_order(tt.l)
    mult = sp.lambda_multiplier(tt.grid, spec, sign)
    return [mult * P for P in tt.pressure]


def material_derivatives_lambda_route(tt: TimeTaylor, K: int | None = None) -> list:
    """``D^k u(0) = -(i/2) D^{k-1} (Lambda_+ + Lambda_-) P`` at ``t = 0``, ``k >= 1``.

    Uses ``Lambda_+ + Lambda_- = -2i d_x`` and ``D u = -P_x``; entry 0 is ``u_0``.
    """
    K = tt.K if K is None else K
    if K > tt.K:
        raise ValueError("need at least K time jets")
    plus, minus = _lambda_jets(tt, +1), _lambda_jets(tt, -1)
    jet = [a + b for a, b in zip(plus, minus)][:K]
    out = [sp.PeriodicField.from_coeffs(tt.grid, tt.coeffs[0])]
    for k in range(1, K + 1):
        out.append(sp.PeriodicField.from_coeffs(tt.grid, -0.5j * jet[0]))
        if k < K:
            jet = apply_D(jet, tt, real=False)
    return out


def lambda_pressure_material(tt: TimeTaylor, K: int, sign) -> list:
    """Coefficient arrays of ``D^k Lambda_pm P`` at ``t = 0`` for ``k = 0..K``."""
    if K > tt.K - 1:
        raise ValueError("need K + 1 time jets")
    jet = _lambda_jets(tt, sign)[:K + 1]
    out = [jet[0]]
    for _ in range(K):
        jet = apply_D(jet, tt, real=False)
        out.append(jet[0])
    return out


@dataclass
class FlowTaylor:
    """``xi(t, x) = x + sum_{k>=0} t^{k+1} xi_{k+1}(x)`` at the grid labels."""

    grid: sp.PeriodicGrid
    coeffs: list  # xi_1 ... xi_{K+1} as PeriodicFields

    def offset(self, t: float) -> np.ndarray:
        return sum(c.values * t ** (k + 1) for k, c in enumerate(self.coeffs))

    def positions(self, t: float) -> np.ndarray:
        return self.grid.x + self.offset(t)


def flow_taylor(u0: sp.PeriodicField, l: int = 1, K: int = 12, tt: TimeTaylor | None = None
                ) -> FlowTaylor:
    """``xi_{k+1} = D^k u(0) / (k+1)!`` for ``k = 0..K``."""
    tt = tt or time_taylor_u(u0, l, K)
    dk = material_derivatives(tt, K)
    return FlowTaylor(u0.grid, [d / factorial(k + 1) for k, d in enumerate(dk)])


# -- analyticity witnesses ----------------------------------------------------------

@dataclass
class AnalyticityReport:
    l: int
    K: int
    V: float
    norms: list                # norms[m][k] = sup |d^m D^k u(0)|
    L_k: list                  # smallest L for the D^k u bound up to rank k
    L: float
    stabilized: bool
    base_case: bool            # rank-0 bound, independent of L
    L_pressure: list           # same fit for D^k Lambda_pm P
    pressure_with_L: bool      # Lambda_pm P bound holds with the u-fitted L
    flow_norms: list           # ||xi_{k+1}||_{W^{2l-1,inf}}
    flow_constant: float       # absorbed m-dependent constant
    flow_bound_holds: bool
    L_flow_direct: float
    radius_ratio: float
    radius_root: float
    trivial: bool = False

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out

    @property
    def passed(self) -> bool:
        return self.trivial or (self.stabilized and self.flow_bound_holds and self.radius_root > 0)


def _sup_derivs(grid, c, mmax):
    out = []
    for m in range(mmax + 1):
        d = c * sp.derivative_multiplier(grid, m)
        out.append(float(np.max(np.abs(np.fft.ifft(d) * grid.n))))
    return out


def analyticity_report(tt: TimeTaylor, K: int | None = None) -> AnalyticityReport:
    """Fit the constants of the jet bounds at ``t = 0``.

    With ``V = ||u_0||_{W^{2l-1,inf}}`` and ``V_{m,j} = m! j! L^j V^{j+1} / ((m+1)^2 (j+1)^2)``:

    * ``L_k`` is the smallest ``L`` with ``||d^m D^j u|| <= 4 V_{m,j}`` for all
      ``m <= 2l-1`` and ``1 <= j <= k``;
    * the pressure fit uses ``||d^m D^j Lambda_pm P|| <= L V V_{m,j}``, ``j <= k``;
    * the flow check is ``||d_t^{k+1} xi|| <= k! (C L)^k V^{k+1} / (k+1)^2``
      with ``C = max(1, 4 max_m m!/(m+1)^2)`` absorbing the m-dependence.
    """
    K = tt.K if K is None else K
    l = tt.l
    grid = tt.grid
    mmax = 2 * l - 1
    Du = material_derivative_coeffs(tt, K)
    norms = [_sup_derivs(grid, Du[k], mmax) for k in range(K + 1)]
    norms_mk = [[norms[k][m] for k in range(K + 1)] for m in range(mmax + 1)]
    V = max(norms[0])
    flow_norms = [max(norms[k]) / factorial(k + 1) for k in range(K + 1)]
    absorb = max(1.0, 4.0 * max(factorial(m) / (m + 1) ** 2 for m in range(mmax + 1)))
    if V == 0.0:
        return AnalyticityReport(l, K, 0.0, norms_mk, [0.0] * (K + 1), 0.0, True, True,
                                 [0.0] * K, True, flow_norms, absorb, True, 0.0,
                                 np.inf, np.inf, trivial=True)

    def weight(m, j):
        return factorial(m) * factorial(j) / ((m + 1) ** 2 * (j + 1) ** 2)

    base = all(norms[0][m] <= 4 * weight(m, 0) * V * (1 + 1e-12) for m in range(mmax + 1))
    need = [0.0]
    for j in range(1, K + 1):
        need.append(max((norms[j][m] / (4 * weight(m, j) * V ** (j + 1))) ** (1.0 / j)
                        for m in range(mmax + 1)))
    L_k = list(np.maximum.accumulate(need))
    L = L_k[-1]
    stabilized = K >= 5 and L <= 2.0 * L_k[5]

    # Lambda_pm P
    KP = K - 1
    LP = []
    pressure_ok = True
    lam = [lambda_pressure_material(tt, KP, s) for s in (+1, -1)]
    running = 0.0
    for j in range(KP + 1):
        for m in range(mmax + 1):
            for branch in lam:
                n = _sup_derivs(grid, branch[j], m)[m]
                req = (n / (weight(m, j) * V ** (j + 2))) ** (1.0 / (j + 1))
                running = max(running, req)
                if n > L * V * weight(m, j) * L ** j * V ** (j + 1) * (1 + 1e-12):
                    pressure_ok = False
        LP.append(running)

    CL = absorb * L
    flow_ok = all(
        flow_norms[k] <= (CL ** k) * V ** (k + 1) / (k + 1) ** 3 * (1 + 1e-12) for k in range(K + 1)
    )
    direct = 0.0
    for k in range(1, K + 1):
        direct = max(direct, (flow_norms[k] * (k + 1) ** 3 / V ** (k + 1)) ** (1.0 / k))

    nz = [w for w in flow_norms if w > 0]
    radius_ratio = flow_norms[K - 1] / flow_norms[K] if K >= 1 and flow_norms[K] > 0 else np.inf
    radius_root = flow_norms[K] ** (-1.0 / K) if K >= 1 and flow_norms[K] > 0 else np.inf
    if not nz:
        radius_ratio = radius_root = np.inf
    return AnalyticityReport(l, K, V, norms_mk, [float(x) for x in L_k], float(L), bool(stabilized),
                             bool(base), [float(x) for x in LP], bool(pressure_ok), flow_norms,
                             float(absorb), bool(flow_ok), float(direct), float(radius_ratio),
                             float(radius_root))


# -- mollified data ------------------------------------------------------------------------

def mollified_flow_differences(u0: sp.PeriodicField, widths, T: float, dt: float, l: int = 1,
                               labels=None) -> dict:
    """Flows from ``mollify(u0, h)`` for each width; sup distances of consecutive flows."""
    finals = []
    for h in widths:
        flow, _ = eulerian.advance_flow(eulerian.CHState(sp.mollify(u0, h), l), T, dt, x0=labels)
        finals.append(flow.final)
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(finals[:-1], finals[1:])]
    ratios = [b / a for a, b in zip(diffs[:-1], diffs[1:])]
    return {"widths": list(widths), "differences": diffs, "ratios": ratios}
