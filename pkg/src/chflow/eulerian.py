"""Pseudo-spectral integration of the order-l Camassa-Holm hierarchy.

The equation is

    u_t + u u_x = A_l^{-1} C_l(u),   C_l(u) = -u A_l u_x + A_l(u u_x) - 2 u_x A_l u,

written as ``u_t + u u_x + P_x = 0`` with ``P_x = -A_l^{-1} C_l(u)``.  All
quadratic products are dealiased by 2x zero padding.  Time stepping is the
classical explicit RK4 on the Fourier coefficients.

Besides the Eulerian stepper this module integrates the flow map
``xi_t = u(t, xi)`` together with its Jacobian, and the Lagrangian system
``(xi, v)' = (v, -P_x(xi))`` obtained by conjugating with the flow.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diffpoly
from . import spectral as sp

BLOWUP_THRESHOLD = 1e6
JACOBIAN_FLOOR = 1e-6


class WaveBreakingError(ArithmeticError):
    """Raised when the solution stops being numerically regular."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class CFLWarning(RuntimeWarning):
    pass


class InversionError(ArithmeticError):
    """The flow map is not monotone, so it cannot be inverted."""


# -- right-hand side -------------------------------------------------------------

class _Operators:
    """Multipliers reused by every right-hand-side evaluation on one grid."""

    def __init__(self, grid: sp.PeriodicGrid, l: int):
        self.grid = grid
        self.l = l
        self.sym = sp.symbol_A(grid.z, l)
        self.dx = sp.derivative_multiplier(grid, 1)
        self.m = 2 * grid.n

    def to_padded(self, c):
        return np.fft.ifft(sp.pad_coeffs(c, self.m)).real * self.m

    def from_padded(self, v):
        return sp.truncate_coeffs(np.fft.fft(v) / self.m, self.grid.n)

    def pressure_gradient(self, c):
        """Coefficients of ``P_x = -A^{-1} C_l(u)``."""
        cx = self.dx * c
        u, ux = self.to_padded(c), self.to_padded(cx)
        Au, Aux = self.to_padded(self.sym * c), self.to_padded(self.sym * cx)
        C = (-self.from_padded(u * Aux) + self.sym * self.from_padded(u * ux)
             - 2.0 * self.from_padded(ux * Au))
        return -C / self.sym

    def rhs(self, c):
        cx = self.dx * c
        adv = self.from_padded(self.to_padded(c) * self.to_padded(cx))
        return -adv - self.pressure_gradient(c)


def _ops(grid, l, cache={}):
    key = (grid.n, l)
    if key not in cache:
        cache[key] = _Operators(grid, l)
    return cache[key]


def pressure_gradient(u: sp.PeriodicField, l: int) -> sp.PeriodicField:
    """``P_x = -A_l^{-1} C_l(u)``."""
    return sp.PeriodicField.from_coeffs(u.grid, _ops(u.grid, l).pressure_gradient(u.coeffs))


def rhs(u: sp.PeriodicField, l: int) -> sp.PeriodicField:
    """``du/dt = -u u_x - P_x``."""
    _check_l(l)
    return sp.PeriodicField.from_coeffs(u.grid, _ops(u.grid, l).rhs(u.coeffs))


def rhs_via_F(u: sp.PeriodicField, l: int) -> sp.PeriodicField:
    """Same right-hand side through ``P = A_l^{-1} F[u]`` with ``d/dx F = -C_l``."""
    _check_l(l)
    F = diffpoly.antiderivative_F(l)
    P = sp.invert_A(diffpoly.evaluate(F, u), l)
    return -(sp.product(u, sp.derivative(u)) + sp.derivative(P))


def _check_l(l):
    if int(l) != l or l < 1:
        raise ValueError("order l must be a positive integer")


def momentum(u: sp.PeriodicField) -> sp.PeriodicField:
    """``m = u - u_xx``."""
    return sp.apply_A(u, 1)


# -- time stepping ---------------------------------------------------------------

@dataclass(frozen=True)
class CHState:
    u: sp.PeriodicField
    l: int = 1
    t: float = 0.0

    def __post_init__(self):
        _check_l(self.l)
        if not self.u.is_real:
            raise ValueError("CH state must be real")


@dataclass
class Trajectory:
    """Snapshots of an Eulerian run."""

    grid: sp.PeriodicGrid
    l: int
    times: list = field(default_factory=list)
    coeffs: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    breakdown: dict | None = None

    def field(self, i: int) -> sp.PeriodicField:
        return sp.PeriodicField.from_coeffs(self.grid, self.coeffs[i])

    @property
    def final(self) -> sp.PeriodicField:
        return self.field(-1)

    def values(self) -> np.ndarray:
        return np.array([self.field(i).values for i in range(len(self.times))])


def _rk4(f, c, dt):
    k1 = f(c)
    k2 = f(c + 0.5 * dt * k1)
    k3 = f(c + 0.5 * dt * k2)
    k4 = f(c + dt * k3)
    return c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _energy(grid, c, l):
    return float(np.sqrt(np.sum(sp.symbol_A(grid.z, l) * np.abs(c) ** 2)))


def _regularity(ops, c):
    u = np.fft.ifft(c).real * ops.grid.n
    ux = np.fft.ifft(ops.dx * c).real * ops.grid.n
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ux))):
        return np.inf
    return max(np.max(np.abs(u)), np.max(np.abs(ux)))


def step(state: CHState, dt: float) -> CHState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    ops = _ops(state.u.grid, state.l)
    c = _rk4(ops.rhs, state.u.coeffs, dt)
    return CHState(sp.PeriodicField.from_coeffs(state.u.grid, c), state.l, state.t + dt)


def cfl_number(u: sp.PeriodicField, dt: float) -> float:
    return dt * sp.sup_norm(u) * u.grid.n


def integrate(state: CHState, T: float, dt: float, save_every: int = 1) -> Trajectory:
    """RK4 from ``state.t`` to ``state.t + T``.

    Raises :class:`WaveBreakingError` on non-finite values or when
    ``||u||_{W^{1,inf}}`` exceeds ``BLOWUP_THRESHOLD``.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    grid, l = state.u.grid, state.l
    ops = _ops(grid, l)
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be an integer multiple of dt")
    if cfl_number(state.u, dt) > 1.0:
        warnings.warn(f"dt*|u|*n = {cfl_number(state.u, dt):.3g} > 1", CFLWarning, stacklevel=2)
    traj = Trajectory(grid, l)
    c = np.array(state.u.coeffs)

    def save(t, c):
        traj.times.append(t)
        traj.coeffs.append(c.copy())
        traj.energy.append(_energy(grid, c, l))

    save(state.t, c)
    for i in range(1, nsteps + 1):
        c = _rk4(ops.rhs, c, dt)
        t = state.t + i * dt
        size = _regularity(ops, c)
        if size > BLOWUP_THRESHOLD:
            traj.breakdown = {"time": t, "w1inf": float(size)}
            raise WaveBreakingError(f"solution lost regularity at t = {t:.6g}", t)
        if i % save_every == 0 or i == nsteps:
            save(t, c)
    return traj


def energy_drift(traj: Trajectory) -> float:
    """``max_t | E(t) - E(0) | / E(0)`` with ``E = sqrt(<u, A_l u>)``."""
    e = np.asarray(traj.energy)
    if e[0] == 0:
        return float(np.max(np.abs(e)))
    return float(np.max(np.abs(e - e[0])) / e[0])


h1_norm_drift = energy_drift


def crest_position(u: sp.PeriodicField) -> float:
    """Location of the maximum, refined by a parabola through the top three samples."""
    v = u.values
    j = int(np.argmax(v))
    a, b, c = v[j - 1], v[j], v[(j + 1) % u.n]
    den = a - 2 * b + c
    shift = 0.0 if den == 0 else 0.5 * (a - c) / den
    return ((j + shift) / u.n) % 1.0


# -- flow map ------------------------------------------------------------------------

@dataclass
class FlowTrajectory:
    """Positions ``xi(t, x0)`` and Jacobians ``d xi/dx`` along a run."""

    x0: np.ndarray
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    jacobians: list = field(default_factory=list)
    flagged: bool = False
    min_jacobian: float = 1.0

    @property
    def final(self) -> np.ndarray:
        return self.positions[-1]


def _eval_pair(grid, c, cx, x):
    """``u`` and ``u_x`` at arbitrary points, from coefficient arrays."""
    f = sp.PeriodicField.from_coeffs(grid, c)
    fx = sp.PeriodicField.from_coeffs(grid, cx)
    return sp.interpolate(f, x), sp.interpolate(fx, x)


def advance_flow(state: CHState, T: float, dt: float, x0=None, save_every: int = 1
                 ) -> tuple[FlowTrajectory, Trajectory]:
    """Integrate ``u`` jointly with ``xi_t = u(t, xi)`` and ``J_t = u_x(t, xi) J``.

    Both systems share the RK4 substeps, so ``u`` is available exactly where
    the characteristic ODE needs it.  A run whose Jacobian drops below
    ``JACOBIAN_FLOOR`` is flagged, not aborted.
    """
    grid, l = state.u.grid, state.l
    ops = _ops(grid, l)
    x0 = grid.x.copy() if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    npts = x0.size
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be an integer multiple of dt")

    def f(y):
        c, X, J = y[:grid.n], y[grid.n:grid.n + npts].real, y[grid.n + npts:].real
        cx = ops.dx * c
        uX, uxX = _eval_pair(grid, c, cx, X)
        return np.concatenate([ops.rhs(c), uX, uxX * J])

    y = np.concatenate([state.u.coeffs, x0, np.ones(npts)]).astype(complex)
    flow = FlowTrajectory(x0)
    traj = Trajectory(grid, l)

    def save(t, y):
        X, J = y[grid.n:grid.n + npts].real.copy(), y[grid.n + npts:].real.copy()
        flow.times.append(t)
        flow.positions.append(X)
        flow.jacobians.append(J)
        flow.min_jacobian = min(flow.min_jacobian, float(J.min()))
        traj.times.append(t)
        traj.coeffs.append(y[:grid.n].copy())
        traj.energy.append(_energy(grid, y[:grid.n], l))

    save(state.t, y)
    for i in range(1, nsteps + 1):
        y = _rk4(f, y, dt)
        t = state.t + i * dt
        if not np.all(np.isfinite(y)):
            raise WaveBreakingError(f"non-finite flow at t = {t:.6g}", t)
        if np.min(y[grid.n + npts:].real) < JACOBIAN_FLOOR:
            flow.flagged = True
        if i % save_every == 0 or i == nsteps:
            save(t, y)
    flow.flagged = flow.flagged or flow.min_jacobian < JACOBIAN_FLOOR
    return flow, traj


# -- Lagrangian form -------------------------------------------------------------------

def invert_flow(offset: sp.PeriodicField, y, tol: float = 1e-14, maxiter: int = 100) -> np.ndarray:
    """Solve ``x + offset(x) = y`` for monotone ``x -> x + offset(x)``.

    Newton steps are kept inside a bisection bracket, so the iteration cannot
    escape even where the derivative is small.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    jac = 1.0 + sp.derivative(offset).values
    if np.min(jac) <= 0:
        raise InversionError("flow map is not monotone")
    doff = sp.derivative(offset)
    spread = float(np.max(offset.values) - np.min(offset.values))
    lo = y - np.max(offset.values) - 0.1 * spread - 1e-3
    hi = y - np.min(offset.values) + 0.1 * spread + 1e-3
    glo = lo + offset(lo) - y
    ghi = hi + offset(hi) - y
    if np.any(glo > 0) or np.any(ghi < 0):
        raise InversionError("could not bracket the preimage")
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        g = x + offset(x) - y
        neg = g < 0
        lo = np.where(neg, x, lo)
        hi = np.where(neg, hi, x)
        d = 1.0 + doff(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - g / d
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        if np.max(np.abs(xn - x)) < tol:
            return xn
        x = xn
    if np.max(hi - lo) > 1e-10:
        raise InversionError("flow inversion did not converge")
    return x


@dataclass(frozen=True)
class FlowMap:
    """``xi(x) = x + offset(x)`` with a periodic offset."""

    offset: sp.PeriodicField
    t: float = 0.0

    @property
    def grid(self) -> sp.PeriodicGrid:
        return self.offset.grid

    @property
    def positions(self) -> np.ndarray:
        return self.grid.x + self.offset.values

    def jacobian(self) -> np.ndarray:
        return 1.0 + sp.derivative(self.offset).values

    @classmethod
    def identity(cls, grid: sp.PeriodicGrid) -> "FlowMap":
        return cls(grid.field(np.zeros(grid.n)))


def lagrangian_rhs(xi: FlowMap, v: sp.PeriodicField, l: int):
    """``(xi, v)' = (v, -P_x(xi))`` with ``P`` built from ``u = v o xi^{-1}``."""
    grid = v.grid
    pre = invert_flow(xi.offset, grid.x)
    u = grid.field(sp.interpolate(v, pre))
    px = pressure_gradient(u, l)
    dv = grid.field(-sp.interpolate(px, xi.positions % 1.0))
    return v, dv


def integrate_lagrangian(u0: sp.PeriodicField, l: int, T: float, dt: float):
    """RK4 on the Lagrangian system; returns ``(FlowMap, v)`` at time ``T``."""
    grid = u0.grid
    nsteps = int(round(T / dt))

    def f(y):
        off, v = y
        dxi, dv = lagrangian_rhs(FlowMap(off), v, l)
        return dxi.values, dv.values

    off = np.zeros(grid.n)
    v = u0.values.copy()
    for _ in range(nsteps):
        a = f((grid.field(off), grid.field(v)))
        b = f((grid.field(off + 0.5 * dt * a[0]), grid.field(v + 0.5 * dt * a[1])))
        c = f((grid.field(off + 0.5 * dt * b[0]), grid.field(v + 0.5 * dt * b[1])))
        d = f((grid.field(off + dt * c[0]), grid.field(v + dt * c[1])))
        off = off + dt / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
        v = v + dt / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
    return FlowMap(grid.field(off), nsteps * dt), grid.field(v)
