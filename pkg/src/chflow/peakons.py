"""Multipeakon dynamics on the line and the periodic peakon.

A multipeakon ``u(t, x) = sum_i p_i(t) exp(-|x - q_i(t)|)`` evolves by the
canonical equations of

    H(q, p) = 1/2 sum_{i,j} p_i p_j exp(-|q_i - q_j|),

i.e. ``dq_i/dt = sum_j p_j e_ij`` and ``dp_i/dt = sum_j p_i p_j sign(q_i - q_j) e_ij``
with ``e_ij = exp(-|q_i - q_j|)`` and ``sign(0) = 0``.

For a peakon-antipeakon pair with asymptotic speeds ``c1 > 0 > c2`` the
trajectories are known in closed form; :func:`exact_antisym_collision` and
:func:`conservative_continuation` glue them through the collision with
either labeling of the outgoing branches.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from . import spectral as sp

COLLISION_GAP = 1e-6
SIGN_WARN_GAP = 1e-9


@dataclass(frozen=True)
class PeakonState:
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError("q and p must be vectors of equal length")
        q.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def separated(self) -> bool:
        return self.n < 2 or min_gap(self.q) > 1e-12


def min_gap(q) -> float:
    q = np.sort(np.asarray(q, dtype=float))
    return float(np.min(np.diff(q))) if q.size > 1 else np.inf


def _kernel(q):
    d = q[:, None] - q[None, :]
    return np.exp(-np.abs(d)), np.sign(d)


def u_field(state: PeakonState, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sum(state.p * np.exp(-np.abs(x[..., None] - state.q)), axis=-1)


def ux_field(state: PeakonState, x) -> np.ndarray:
    """``u_x`` away from the crests (one-sided value 0 convention at a crest)."""
    x = np.asarray(x, dtype=float)
    d = x[..., None] - state.q
    return np.sum(-state.p * np.sign(d) * np.exp(-np.abs(d)), axis=-1)


def momentum_measure(state: PeakonState) -> list:
    """``m = u - u_xx`` as ``[(position, weight)]`` with weights ``2 p_i``."""
    return [(float(q), 2.0 * float(p)) for q, p in zip(state.q, state.p)]


def apply_kernel(measure, x) -> np.ndarray:
    """``1/2 int exp(-|x - y|) dm(y)`` for a Dirac measure."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for y, w in measure:
        out = out + 0.5 * w * np.exp(-np.abs(x - y))
    return out


def hamiltonian(state: PeakonState) -> float:
    e, _ = _kernel(state.q)
    return float(0.5 * state.p @ e @ state.p)


def h1_energy(state: PeakonState) -> float:
    """``int (u^2 + u_x^2) dx = 4 H``."""
    return 4.0 * hamiltonian(state)


def total_momentum(state: PeakonState) -> float:
    return float(np.sum(state.p))


def h1_energy_quadrature(state: PeakonState, a: float = -30.0, b: float = 30.0,
                         h: float = 2.5e-4) -> float:
    """Trapezoid rule for ``int_a^b (u^2 + u_x^2)``, with the crests as break points."""
    cuts = np.unique(np.concatenate([[a, b], state.q[(state.q > a) & (state.q < b)]]))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        npts = max(int(np.ceil((hi - lo) / h)), 2) + 1
        x = np.linspace(lo, hi, npts)
        mid = 0.5 * (lo + hi)
        # one-sided derivative of the smooth piece
        sgn = np.sign(mid - state.q)
        d = x[:, None] - state.q
        ux = np.sum(-state.p * sgn * np.exp(-np.abs(d)), axis=-1)
        f = u_field(state, x) ** 2 + ux ** 2
        total += trapezoid(f, x)
    return float(total)


def rhs(state: PeakonState):
    """``(dq/dt, dp/dt)`` as the exact gradient of ``H``."""
    return _rhs(state.q, state.p)


def _rhs(q, p):
    e, s = _kernel(q)
    dq = e @ p
    dp = p * ((s * e) @ p)
    return dq, dp


def gradient_fd(state: PeakonState, h: float = 1e-6):
    """Central differences ``(dH/dp, -dH/dq)``."""
    dq = np.empty(state.n)
    dp = np.empty(state.n)
    for i in range(state.n):
        e = np.zeros(state.n)
        e[i] = h
        dq[i] = (hamiltonian(PeakonState(state.q, state.p + e))
                 - hamiltonian(PeakonState(state.q, state.p - e))) / (2 * h)
        dp[i] = -(hamiltonian(PeakonState(state.q + e, state.p))
                  - hamiltonian(PeakonState(state.q - e, state.p))) / (2 * h)
    return dq, dp


# -- integration -------------------------------------------------------------------

@dataclass
class CollisionEvent:
    time: float
    indices: tuple
    speeds: tuple | None = None
    labeling: str | None = None
    reason: str = "gap"

    def as_dict(self) -> dict:
        return {
            "time": self.time,
            "indices": list(self.indices),
            "speeds": None if self.speeds is None else list(self.speeds),
            "labeling": self.labeling,
            "reason": self.reason,
        }


@dataclass
class PeakonTrajectory:
    times: list = field(default_factory=list)
    q: list = field(default_factory=list)
    p: list = field(default_factory=list)
    H: list = field(default_factory=list)
    events: list = field(default_factory=list)
    continued: list = field(default_factory=list)

    def arrays(self):
        return np.asarray(self.times), np.asarray(self.q), np.asarray(self.p)

    def hamiltonian_drift(self) -> float:
        H = np.asarray(self.H)
        return float(np.max(np.abs(H - H[0])) / max(abs(H[0]), 1e-300))

    def momentum_drift(self) -> float:
        P = np.sum(np.asarray(self.p), axis=1)
        return float(np.max(np.abs(P - P[0])))

    @property
    def final(self) -> PeakonState:
        return PeakonState(self.q[-1], self.p[-1], self.times[-1])


def _rk4(q, p, dt):
    a = _rhs(q, p)
    b = _rhs(q + 0.5 * dt * a[0], p + 0.5 * dt * a[1])
    c = _rhs(q + 0.5 * dt * b[0], p + 0.5 * dt * b[1])
    d = _rhs(q + dt * c[0], p + dt * c[1])
    return (q + dt / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0]),
            p + dt / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1]))


def _close_pair(q):
    order = np.argsort(q)
    gaps = np.diff(q[order])
    k = int(np.argmin(gaps))
    return tuple(sorted((int(order[k]), int(order[k + 1]))))


def integrate(state: PeakonState, T: float, dt: float, save_every: int = 1,
              continuation: bool = False, labeling: str = "analytic") -> PeakonTrajectory:
    """RK4 with collision detection.

    The run stops at the first step where two crests come closer than
    ``COLLISION_GAP``, cross, or where ``max |p|`` exceeds ``1/COLLISION_GAP``.
    With ``continuation`` enabled a two-body collision is continued on the
    closed-form conservative branch selected by ``labeling``.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    nsteps = int(round(T / dt))
    q, p = np.array(state.q), np.array(state.p)
    traj = PeakonTrajectory()
    order0 = np.argsort(q, kind="stable")
    if state.n > 1 and min_gap(q) < SIGN_WARN_GAP:
        warnings.warn("crests nearly coincide; sign(q_i - q_j) ill-defined", RuntimeWarning)

    def save(t, q, p):
        traj.times.append(t)
        traj.q.append(q.copy())
        traj.p.append(p.copy())
        traj.H.append(hamiltonian(PeakonState(q, p)))

    save(state.t, q, p)
    fit_state = PeakonState(q, p, state.t)
    for i in range(1, nsteps + 1):
        qn, pn = _rk4(q, p, dt)
        t = state.t + i * dt
        reason = None
        if not (np.all(np.isfinite(qn)) and np.all(np.isfinite(pn))):
            reason = "nonfinite"
        elif state.n > 1 and not np.array_equal(np.argsort(qn, kind="stable"), order0):
            reason = "crossing"
        elif state.n > 1 and min_gap(qn) < COLLISION_GAP:
            reason = "gap"
        elif np.max(np.abs(pn)) > 1.0 / COLLISION_GAP:
            reason = "amplitude"
        if reason is not None:
            idx = _close_pair(q) if state.n > 1 else (0,)
            event = CollisionEvent(time=t, indices=idx, reason=reason)
            traj.events.append(event)
            if continuation:
                _continue(traj, fit_state, event, labeling, t, state.t + nsteps * dt, dt, save_every)
            return traj
        q, p = qn, pn
        if state.n < 2 or min_gap(q) > 1e-2:
            fit_state = PeakonState(q, p, t)
        if i % save_every == 0 or i == nsteps:
            save(t, q, p)
    return traj


def _continue(traj, fit_state, event, labeling, t_event, t_end, dt, save_every):
    if fit_state.n != 2:
        raise ValueError("continuation is only implemented for two-body collisions")
    fit = fit_two_body(fit_state)
    event.speeds = (fit.c1, fit.c2)
    event.time = fit.t_collision
    event.labeling = labeling
    i0 = int(np.floor((t_event - traj.times[0]) / dt))
    t = traj.times[0] + i0 * dt
    k = 0
    while t <= t_end + 1e-12:
        # the amplitudes blow up exactly at the collision instant
        if k % save_every == 0 and t > traj.times[-1] + 1e-15 and abs(t - fit.t_collision) > 1e-9:
            st = fit.state(t, labeling)
            traj.times.append(t)
            traj.q.append(np.array(st.q))
            traj.p.append(np.array(st.p))
            traj.H.append(hamiltonian(st))
            traj.continued.append(True)
        k += 1
        t = traj.times[0] + (i0 + k) * dt


# -- peakon-antipeakon collision ------------------------------------------------------

def _check_speeds(c1, c2):
    if not (c1 > 0 > c2):
        raise ValueError("need c1 > 0 > c2")


def _Q1(c1, c2, t):
    t = np.asarray(t, dtype=float)
    return np.log(c1 - c2) - np.log(c1 * np.exp(-c1 * t) - c2 * np.exp(-c2 * t))


def _Q2(c1, c2, t):
    t = np.asarray(t, dtype=float)
    return -np.log(c1 - c2) + np.log(c1 * np.exp(c1 * t) - c2 * np.exp(c2 * t))


def _dQ1(c1, c2, t):
    a, b = np.exp(-c1 * t), np.exp(-c2 * t)
    return (c1 * c1 * a - c2 * c2 * b) / (c1 * a - c2 * b)


def _dQ2(c1, c2, t):
    a, b = np.exp(c1 * t), np.exp(c2 * t)
    return (c1 * c1 * a - c2 * c2 * b) / (c1 * a - c2 * b)


def exact_antisym_collision(c1: float, c2: float, t):
    """Crest positions of the pair colliding at ``(t, x) = (0, 0)``.

    Before the collision ``q1 = ln((c1-c2)/(c1 e^{-c1 t} - c2 e^{-c2 t}))`` and
    ``q2 = -ln((c1-c2)/(c1 e^{c1 t} - c2 e^{c2 t}))``.  For ``t > 0`` the
    outgoing branches carry the same speeds, and with the analytic labeling
    each crest keeps its formula, so the result is the same expression.
    """
    _check_speeds(c1, c2)
    return _Q1(c1, c2, t), _Q2(c1, c2, t)


def reconstruct_amplitudes(q, qdot):
    """Solve ``dq/dt = E(q) p`` with ``E_ij = exp(-|q_i - q_j|)``."""
    e, _ = _kernel(np.asarray(q, dtype=float))
    return np.linalg.solve(e, np.asarray(qdot, dtype=float))


def glued_positions(c1: float, c2: float, t, labeling: str = "analytic"):
    """``(q1, q2)`` through the collision with the chosen outgoing labeling."""
    _check_speeds(c1, c2)
    if labeling not in ("analytic", "swapped"):
        raise ValueError("labeling must be 'analytic' or 'swapped'")
    t = np.asarray(t, dtype=float)
    q1, q2 = _Q1(c1, c2, t), _Q2(c1, c2, t)
    if labeling == "swapped":
        after = t > 0
        q1, q2 = np.where(after, q2, q1), np.where(after, q1, q2)
    return q1, q2


def glued_velocities(c1, c2, t, labeling="analytic"):
    t = np.asarray(t, dtype=float)
    v1, v2 = _dQ1(c1, c2, t), _dQ2(c1, c2, t)
    if labeling == "swapped":
        after = t > 0
        v1, v2 = np.where(after, v2, v1), np.where(after, v1, v2)
    return v1, v2


def one_sided_second_derivative(f, t0: float, side: int, h: float = 1e-3) -> float:
    """Estimate ``f''(t0 +- 0)`` from samples strictly on one side of ``t0``.

    A cubic through ``t0 + s h, ..., t0 + 4 s h`` is differentiated at ``t0``
    (error ``O(h^2)``).
    """
    s = 1.0 if side > 0 else -1.0
    ts = s * h * np.arange(1, 5)
    coef = np.polyfit(ts / h, [float(f(t0 + x)) for x in ts], 3)
    return float(2.0 * coef[1] / h ** 2)


@dataclass(frozen=True)
class TwoBodyFit:
    """Peakon-antipeakon pair as asymptotic speeds plus a space-time shift."""

    c1: float
    c2: float
    t_collision: float
    x_collision: float

    def positions(self, t, labeling: str = "analytic"):
        q1, q2 = glued_positions(self.c1, self.c2, np.asarray(t) - self.t_collision, labeling)
        return q1 + self.x_collision, q2 + self.x_collision

    def state(self, t: float, labeling: str = "analytic") -> PeakonState:
        tau = t - self.t_collision
        q = np.array(glued_positions(self.c1, self.c2, tau, labeling), dtype=float)
        v = np.array(glued_velocities(self.c1, self.c2, tau, labeling), dtype=float)
        return PeakonState(q + self.x_collision, reconstruct_amplitudes(q, v), t)


def asymptotic_speeds(state: PeakonState) -> tuple:
    """``(c1, c2)`` from ``c1 + c2 = sum p`` and ``c1^2 + c2^2 = 2 H``."""
    if state.n != 2:
        raise ValueError("asymptotic speeds need exactly two bodies")
    P = total_momentum(state)
    H = hamiltonian(state)
    disc = 4.0 * H - P * P
    if disc < 0:
        raise ValueError("state has no real asymptotic speeds")
    r = np.sqrt(disc)
    return 0.5 * (P + r), 0.5 * (P - r)


def fit_two_body(state: PeakonState) -> TwoBodyFit:
    """Match a two-body state to the closed-form collision family (before collision)."""
    c1, c2 = asymptotic_speeds(state)
    _check_speeds(c1, c2)
    i1, i2 = np.argsort(state.q)
    if not (state.p[i1] > 0 > state.p[i2]):
        raise ValueError("expected a peakon on the left of an antipeakon")
    gap = float(state.q[i2] - state.q[i1])

    def g(tau):
        return float(_Q2(c1, c2, tau) - _Q1(c1, c2, tau)) - gap

    hi = -1e-12
    lo = -1.0
    while g(lo) < 0:
        lo *= 2.0
        if lo < -1e6:
            raise ValueError("could not bracket the collision time")
    tau = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return TwoBodyFit(c1, c2, state.t - tau, float(state.q[i1] - _Q1(c1, c2, tau)))


def conservative_continuation(event: CollisionEvent, labeling: str = "analytic",
                              state: PeakonState | None = None):
    """Continue a two-body collision on the conservative closed-form branch.

    ``event.speeds`` (or ``state``) fixes ``(c1, c2)``; the outgoing crests
    carry the same speeds, as required by conservation of ``int u`` and of
    the H^1 energy.  Returns a :class:`TwoBodyFit` whose ``positions`` and
    ``state`` methods evaluate the glued trajectory.
    """
    if len(event.indices) != 2:
        raise ValueError("continuation needs exactly two colliding bodies")
    if labeling not in ("analytic", "swapped"):
        raise ValueError("labeling must be 'analytic' or 'swapped'")
    if state is not None:
        fit = fit_two_body(state)
    elif event.speeds is not None:
        c1, c2 = event.speeds
        _check_speeds(c1, c2)
        fit = TwoBodyFit(c1, c2, event.time, 0.0)
    else:
        raise ValueError("need asymptotic speeds or a pre-collision state")
    event.labeling = labeling
    event.speeds = (fit.c1, fit.c2)
    return fit


def second_derivative_jump(c1: float, c2: float, labeling: str, h: float = 1e-3) -> float:
    """``q1''(0+) - q1''(0-)`` on the glued trajectory."""
    f = lambda t: glued_positions(c1, c2, t, labeling)[0]
    return one_sided_second_derivative(f, 0.0, +1, h) - one_sided_second_derivative(f, 0.0, -1, h)


# -- periodic peakon ------------------------------------------------------------------

def periodic_peakon_amplitude(c: float) -> float:
    """``gamma`` with ``gamma sum_n e^{-|n|} ... = c`` at the crest: ``c tanh(1/2)``."""
    return c * np.tanh(0.5)


def periodic_peakon_values(c: float, t: float, x) -> np.ndarray:
    y = np.mod(np.asarray(x, dtype=float) - c * t, 1.0)
    gam = periodic_peakon_amplitude(c)
    return gam * (np.exp(-y) + np.exp(y - 1.0)) / (1.0 - np.exp(-1.0))


def periodic_peakon(c: float, t: float, grid: sp.PeriodicGrid) -> sp.PeriodicField:
    """``gamma sum_n exp(-|x + n - c t|)`` sampled on ``grid``."""
    return grid.field(periodic_peakon_values(c, t, grid.x))
