"""Integration of the full equations of motion.

Two coordinate systems are available:

* Cartesian ``(q, v)`` with Newton's equation ``q'' = -q'_perp + E(q)``;
* action-angle ``(phi, I)`` with ``phi' = (0, 1) - <E, dq/dI>`` and
  ``I' = <E, dq/dphi>``.

Both carry the continuous winding ``theta = arg(q)`` as an extra component,
integrated from ``theta' = q ^ q' / |q|^2``.  In ``auto_switch`` mode the
action-angle form is used away from the singular sets and Cartesian
coordinates near the puncture or near vanishing actions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np
from scipy.optimize import brentq

from ._rk import DormandPrince
from .actionangle import ActionAngleState, from_cartesian, position, velocity
from .errors import (InvalidParameterError, NoHittingError, SingularityError, StepSizeUnderflow,
                     UndefinedAngleError)
from .model import (EPS_Q, TWO_PI, Observables, PhaseState, SystemParams, electric_field,
                    make_field, observables_arrays, perp, vector_potential)

CARTESIAN = "cartesian"
ACTION_ANGLE = "action_angle"
AUTO = "auto_switch"
MODES = (CARTESIAN, ACTION_ANGLE, AUTO)

HITTING = "hitting_time"
SINGULAR = "singularity_flag"
SWITCH = "branch_switch"

CSV_COLUMNS = ("s", "q1", "q2", "p1", "p2", "I1", "I2", "phi1", "phi2", "H", "K", "c1", "c2")

EVENT_XTOL = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.5
    coordinate_mode: str = AUTO
    r_switch: float = 0.05
    #: switch to Cartesian when min(I1, I2) drops below this
    action_switch: float = 1e-3
    #: Cartesian step cap ``h <= step_cap_factor * |q|``
    step_cap_factor: float = 0.5
    #: default sample spacing when no explicit sample times are given
    sample_step: float = 0.1

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise InvalidParameterError("tolerances and max_step must be positive")
        if self.coordinate_mode not in MODES:
            raise InvalidParameterError(f"coordinate_mode must be one of {MODES}")
        if not self.r_switch > EPS_Q:
            raise InvalidParameterError("r_switch must exceed the field guard radius")
        if not (self.action_switch > 0 and self.step_cap_factor > 0 and self.sample_step > 0):
            raise InvalidParameterError("switch thresholds and sample_step must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Event:
    kind: str
    s: float
    detail: dict = field(default_factory=dict, compare=False)


# --------------------------------------------------------------------------
# vector fields
# --------------------------------------------------------------------------

def rhs_cartesian(state: PhaseState, params: SystemParams):
    """Return ``(q', q'')`` at ``state`` from Newton's equation."""
    v = state.p - vector_potential(state.s, state.q, params)
    E = electric_field(state.s, state.q, params)
    return v, -perp(v) + E


def cartesian_vector_field(s, y, params: SystemParams) -> np.ndarray:
    """First-order companion form on ``y = (q1, q2, v1, v2)``."""
    y = np.asarray(y, dtype=float)
    E = electric_field(s, y[:2], params)
    return np.array([y[2], y[3], y[3] + E[0], -y[2] + E[1]])


def rhs_action_angle(aa: ActionAngleState, params: SystemParams):
    """Return ``(phi', I')`` at ``aa``.

    Raises :class:`SingularityError` when ``q`` is too close to the origin and
    :class:`UndefinedAngleError` on vanishing actions.
    """
    out = _aa_fun(params)(aa.s, [aa.phi1, aa.phi2, aa.I1, aa.I2, 0.0])
    return np.array(out[:2]), np.array(out[2:4])


def _aa_fun(params: SystemParams, r_min: float = EPS_Q):
    field_at = make_field(params)
    r_min2 = r_min * r_min
    cos, sin, sqrt = math.cos, math.sin, math.sqrt

    def fun(s, y):
        p1, p2, I1, I2 = y[0], y[1], y[2], y[3]
        if I1 <= 0.0 or I2 <= 0.0:
            raise UndefinedAngleError("vanishing action")
        c1, s1, c2, s2 = cos(p1), sin(p1), cos(p2), sin(p2)
        r1, r2 = sqrt(2.0 * I1), sqrt(2.0 * I2)
        qx = r1 * c1 + r2 * c2
        qy = r1 * s1 - r2 * s2
        q2 = qx * qx + qy * qy
        if q2 < r_min2:
            raise SingularityError("near collision in action-angle coordinates")
        Ex, Ey = field_at(qx, qy)
        vx, vy = -r2 * s2, -r2 * c2
        return [-(Ex * c1 + Ey * s1) / r1,
                1.0 - (Ex * c2 - Ey * s2) / r2,
                r1 * (Ey * c1 - Ex * s1),
                -r2 * (Ex * s2 + Ey * c2),
                (qx * vy - qy * vx) / q2]
    return fun


def _cart_fun(params: SystemParams):
    field_at = make_field(params)

    def fun(s, y):
        q1, q2, v1, v2 = y[0], y[1], y[2], y[3]
        E1, E2 = field_at(q1, q2)
        return [v1, v2, v2 + E1, -v1 + E2, (q1 * v2 - q2 * v1) / (q1 * q1 + q2 * q2)]
    return fun


# --------------------------------------------------------------------------
# scalar conversions used inside the driver
# --------------------------------------------------------------------------

def _wrap(d):
    return (d + math.pi) % TWO_PI - math.pi


def _cart_to_aa(q1, q2, v1, v2, ref1, ref2):
    c1, c2 = q1 + v2, q2 - v1
    I1 = 0.5 * (c1 * c1 + c2 * c2)
    I2 = 0.5 * (v1 * v1 + v2 * v2)
    a1 = math.atan2(c2, c1) if I1 > 0 else ref1
    a2 = -math.atan2(v1, -v2) if I2 > 0 else ref2
    return ref1 + _wrap(a1 - ref1), ref2 + _wrap(a2 - ref2), I1, I2


def _aa_to_cart(p1, p2, I1, I2):
    r1, r2 = math.sqrt(2.0 * I1), math.sqrt(2.0 * I2)
    c1, s1, c2, s2 = math.cos(p1), math.sin(p1), math.cos(p2), math.sin(p2)
    return r1 * c1 + r2 * c2, r1 * s1 - r2 * s2, -r2 * s2, -r2 * c2


class _Row(NamedTuple):
    s: float
    q1: float
    q2: float
    v1: float
    v2: float
    phi1: float
    phi2: float
    I1: float
    I2: float
    theta: float
    mode: int


def _row_from(mode, s, y, ref1, ref2):
    if mode == ACTION_ANGLE:
        p1, p2, I1, I2, th = y
        q1, q2, v1, v2 = _aa_to_cart(p1, p2, I1, I2)
        return _Row(s, q1, q2, v1, v2, p1, p2, I1, I2, th, 1)
    q1, q2, v1, v2, th = y
    p1, p2, I1, I2 = _cart_to_aa(q1, q2, v1, v2, ref1, ref2)
    return _Row(s, q1, q2, v1, v2, p1, p2, I1, I2, th, 0)


# --------------------------------------------------------------------------
# trajectory container
# --------------------------------------------------------------------------

class Trajectory:
    """Time-ordered samples of one integration plus detected events.

    Arrays are read-only after construction.  Each sample is available in
    Cartesian form (:meth:`phase_state`), action-angle form
    (:meth:`action_angle_state`) and as :class:`Observables`.
    """

    def __init__(self, params: SystemParams, rows, events=(), steps=None, truncated=False,
                 config: Optional[IntegratorConfig] = None):
        self.params = params
        self.config = config
        arr = np.array(rows, dtype=float).reshape(-1, len(_Row._fields))
        self.s = arr[:, 0]
        self.q = arr[:, 1:3]
        v = arr[:, 3:5]
        self.phi = arr[:, 5:7]
        self.I = arr[:, 7:9]
        self.winding = arr[:, 9]
        self.mode = arr[:, 10].astype(int)
        if len(self.s):
            self.p = v + vector_potential(self.s, self.q, params)
            self.v, self.c, self.L, self.H, self.K = observables_arrays(
                self.s, self.q, self.p, self.winding, params)
        else:
            self.p = v.copy()
            self.v, self.c = v, v.copy()
            self.L = self.H = self.K = np.empty(0)
        self.events = sorted(events, key=lambda e: e.s)
        self.steps = steps
        self.truncated = truncated
        for a in (self.s, self.q, self.p, self.phi, self.I, self.winding, self.v, self.c,
                  self.L, self.H, self.K, self.mode):
            a.setflags(write=False)
        if steps:
            for a in steps.values():
                a.setflags(write=False)

    def __len__(self):
        return len(self.s)

    @property
    def I1(self):
        return self.I[:, 0]

    @property
    def I2(self):
        return self.I[:, 1]

    def phase_state(self, i: int) -> PhaseState:
        return PhaseState(self.s[i], self.q[i], self.p[i], self.winding[i])

    def action_angle_state(self, i: int) -> ActionAngleState:
        return ActionAngleState(self.s[i], self.phi[i, 0], self.phi[i, 1], self.I[i, 0], self.I[i, 1])

    def observables(self, i: int) -> Observables:
        return Observables(self.v[i], self.c[i], float(self.L[i]), float(self.H[i]), float(self.K[i]))

    def samples(self) -> Iterator:
        for i in range(len(self)):
            yield self.phase_state(i), self.action_angle_state(i), self.observables(i)

    def events_of(self, kind: str):
        return [e for e in self.events if e.kind == kind]

    def columns(self) -> dict:
        """Columns of the trajectory CSV schema."""
        return {"s": self.s, "q1": self.q[:, 0], "q2": self.q[:, 1], "p1": self.p[:, 0],
                "p2": self.p[:, 1], "I1": self.I[:, 0], "I2": self.I[:, 1],
                "phi1": self.phi[:, 0], "phi2": self.phi[:, 1], "H": self.H, "K": self.K,
                "c1": self.c[:, 0], "c2": self.c[:, 1]}


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def _initial_internal(initial, params):
    """Return ``(s0, q1, q2, v1, v2, theta, phi_ref)`` from either state type."""
    if isinstance(initial, ActionAngleState):
        q = position(initial.phi1, initial.phi2, initial.I1, initial.I2)
        v = velocity(initial.phi2, initial.I2)
        if math.hypot(*q) < EPS_Q:
            raise SingularityError("initial point on the excluded set C")
        theta = math.atan2(q[1], q[0])
        return initial.s, q[0], q[1], v[0], v[1], theta, (initial.phi1, initial.phi2)
    if isinstance(initial, PhaseState):
        v = initial.p - vector_potential(initial.s, initial.q, params)
        try:
            aa = from_cartesian(initial, params)
            ref = (aa.phi1, aa.phi2)
        except UndefinedAngleError:
            ref = (0.0, 0.0)
        return initial.s, initial.q[0], initial.q[1], v[0], v[1], initial.winding, ref
    raise TypeError("initial must be a PhaseState or an ActionAngleState")


class _Run:
    """One integration direction."""

    def __init__(self, params, config, record_steps):
        self.params = params
        self.cfg = config
        self.record_steps = record_steps
        self.aa_fun = _aa_fun(params)
        self.cart_fun = _cart_fun(params)
        self.field_at = make_field(params)
        self.events = []
        self.rows = []
        self.steps = []
        self.truncated = False

    # -- mode helpers ------------------------------------------------------
    def _aa_ok(self, row, factor=1.0):
        cfg = self.cfg
        r = math.hypot(row.q1, row.q2)
        return r > factor * cfg.r_switch and min(row.I1, row.I2) > factor * cfg.action_switch

    def _state_vector(self, mode, row):
        if mode == ACTION_ANGLE:
            return [row.phi1, row.phi2, row.I1, row.I2, row.theta]
        return [row.q1, row.q2, row.v1, row.v2, row.theta]

    def _cart_cap(self, t, y, dydt):
        q1, q2, v1, v2 = y[0], y[1], y[2], y[3]
        r = math.hypot(q1, q2)
        cap = self.cfg.step_cap_factor * r
        a1, a2 = dydt[2], dydt[3]
        E1, E2 = a1 - v2, a2 + v1
        c1, c2 = q1 + v2, q2 - v1
        cc = c1 * c1 + c2 * c2
        vv = v1 * v1 + v2 * v2
        rate = 0.0
        if cc > 1e-20:
            rate += abs(c1 * (-E1) - c2 * E2) / cc
        if vv > 1e-20:
            rate += abs(v1 * a2 - v2 * a1) / vv
        if rate > 0.0:
            cap = min(cap, 0.25 * math.pi / rate)
        return cap

    @staticmethod
    def _angle_guard(y_old, y_new):
        return abs(y_new[0] - y_old[0]) + abs(y_new[1] - y_old[1]) < math.pi

    def _stepper(self, mode, s, y, s_end, first_step=None):
        cfg = self.cfg
        if mode == ACTION_ANGLE:
            return DormandPrince(self.aa_fun, s, y, s_end, cfg.rel_tol, cfg.abs_tol, cfg.max_step,
                                 first_step=first_step, accept=self._angle_guard)
        return DormandPrince(self.cart_fun, s, y, s_end, cfg.rel_tol, cfg.abs_tol, cfg.max_step,
                             first_step=first_step, step_cap=self._cart_cap)

    def _gap_rate(self, row):
        E1, E2 = self.field_at(row.q1, row.q2)
        return row.q1 * E2 - row.q2 * E1

    def _torque_ratio(self, row):
        pot = self.params.potential
        if pot.is_zero:
            return 0.0
        lam = self.params.lam
        tq = float(pot.torque(lam * row.q1, lam * row.q2))
        return abs(tq) / max(abs(self.params.Phi0) / TWO_PI, 1e-300)

    # -- main loop ---------------------------------------------------------
    def run(self, start_row: _Row, s_end: float, sample_times):
        cfg = self.cfg
        mode = CARTESIAN if cfg.coordinate_mode == CARTESIAN else ACTION_ANGLE
        if cfg.coordinate_mode == AUTO and not self._aa_ok(start_row):
            mode = CARTESIAN
        if mode == ACTION_ANGLE and min(start_row.I1, start_row.I2) <= 0.0:
            raise UndefinedAngleError("action-angle integration needs positive actions")
        row_old = start_row
        k = 0
        n_samp = len(sample_times)
        if start_row.s == s_end:
            return
        st = self._stepper(mode, start_row.s, self._state_vector(mode, start_row), s_end)
        if self.record_steps:
            self._record(row_old)
        direction = st.direction
        while not st.finished:
            try:
                st.step()
            except StepSizeUnderflow as exc:
                self._truncate(st.t, str(exc))
                break
            ref1, ref2 = row_old.phi1, row_old.phi2
            row_new = _row_from(mode, st.t, st.y, ref1, ref2)
            while k < n_samp and direction * (sample_times[k] - st.t) <= 0:
                ts = sample_times[k]
                y = st.y if ts == st.t else st.dense(ts)
                self.rows.append(_row_from(mode, ts, y, ref1, ref2))
                k += 1
            self._check_hitting(st, mode, row_old, row_new)
            if math.hypot(row_new.q1, row_new.q2) < EPS_Q:
                self._truncate(st.t, "reached guard radius")
                break
            if self.record_steps:
                self._record(row_new)
            row_old = row_new
            if cfg.coordinate_mode == AUTO and not st.finished:
                new_mode = None
                if mode == ACTION_ANGLE and not self._aa_ok(row_new):
                    new_mode = CARTESIAN
                elif mode == CARTESIAN and self._aa_ok(row_new, 2.0):
                    new_mode = ACTION_ANGLE
                if new_mode is not None:
                    self.events.append(Event(SWITCH, st.t, {"to": new_mode}))
                    mode = new_mode
                    st = self._stepper(mode, st.t, self._state_vector(mode, row_new), s_end,
                                       first_step=abs(st.h_last))

    def _record(self, row):
        self.steps.append((row.s, row.I1, row.I2, self._gap_rate(row), self._torque_ratio(row),
                           row.mode))

    def _truncate(self, s, why):
        self.truncated = True
        self.events.append(Event(SINGULAR, s, {"reason": why}))

    def _check_hitting(self, st, mode, row_old, row_new):
        g0 = row_old.I1 - row_old.I2
        g1 = row_new.I1 - row_new.I2
        if g0 == 0.0 and not self.events_at(row_old.s):
            self.events.append(Event(HITTING, row_old.s))
        if g0 * g1 >= 0.0:
            return
        ref1, ref2 = row_old.phi1, row_old.phi2

        def gap(t):
            r = _row_from(mode, t, st.dense(t), ref1, ref2)
            return r.I1 - r.I2

        a, b = st.t_old, st.t
        try:
            s_hit = brentq(gap, min(a, b), max(a, b), xtol=EVENT_XTOL, rtol=4 * np.finfo(float).eps)
        except ValueError:
            s_hit = 0.5 * (a + b)
        self.events.append(Event(HITTING, s_hit))

    def events_at(self, s):
        return any(e.kind == HITTING and e.s == s for e in self.events)


def _sample_grid(s_lo, s_hi, s0, step):
    if s_hi <= s_lo:
        return np.empty(0)
    n = max(int(round((s_hi - s_lo) / step)), 1)
    return np.linspace(s_lo, s_hi, n + 1)


def integrate(initial: Union[PhaseState, ActionAngleState], s_span, params: SystemParams,
              config: Optional[IntegratorConfig] = None, *, samples=None,
              record_steps: bool = False) -> Trajectory:
    """Integrate the equations of motion from ``initial`` over ``s_span``.

    The integration starts at ``initial.s`` and proceeds backward and/or
    forward as needed to cover ``s_span``.  Samples are produced by dense
    output at ``samples`` (default: a uniform grid with spacing
    ``config.sample_step``), restricted to ``s_span``.  A run that cannot
    continue near the puncture is truncated and carries a
    ``singularity_flag`` event.

    With ``record_steps`` the trajectory's ``steps`` dict holds, at every
    accepted step, the actions, the action-gap rate ``d(I1 - I2)/ds`` and
    the torque ratio ``|q ^ grad V| / (Phi0 / 2 pi)``.
    """
    config = config or IntegratorConfig()
    if params.flux_rate is not None:
        raise InvalidParameterError("integration supports only the linear flux law")
    s_a, s_b = (float(x) for x in s_span)
    if s_b < s_a:
        s_a, s_b = s_b, s_a
    s0, q1, q2, v1, v2, theta, (r1, r2) = _initial_internal(initial, params)
    start = _row_from(CARTESIAN, s0, [q1, q2, v1, v2, theta], r1, r2)
    if isinstance(initial, ActionAngleState):
        start = start._replace(phi1=initial.phi1, phi2=initial.phi2, I1=initial.I1, I2=initial.I2)

    if samples is None:
        samples = _sample_grid(s_a, s_b, s0, config.sample_step) if s_b > s_a else np.empty(0)
    samples = np.unique(np.asarray(samples, dtype=float))
    samples = samples[(samples >= s_a) & (samples <= s_b)]

    rows, events, steps = [], [], []
    truncated = False
    back = samples[samples < s0][::-1]
    fwd = samples[samples > s0]
    lo, hi = min(s_a, s0), max(s_b, s0)
    if s_b > s_a or s_a != s0:
        if lo < s0:
            run = _Run(params, config, record_steps)
            run.run(start, lo, back)
            rows.extend(reversed(run.rows))
            events.extend(run.events)
            steps.extend(reversed(run.steps[1:] if record_steps else []))
            truncated |= run.truncated
        if np.any(samples == s0):
            rows.append(start)
        run = _Run(params, config, record_steps)
        if hi > s0:
            run.run(start, hi, fwd)
            rows.extend(run.rows)
            events.extend([e for e in run.events if not (e.kind == HITTING and any(
                abs(e.s - x.s) < 1e-12 and x.kind == HITTING for x in events))])
            steps.extend(run.steps)
            truncated |= run.truncated
        elif record_steps:
            steps.append((start.s, start.I1, start.I2, run._gap_rate(start),
                          run._torque_ratio(start), start.mode))
    step_arrays = None
    if record_steps:
        arr = np.array(steps, dtype=float).reshape(-1, 6)
        step_arrays = {"s": arr[:, 0], "I1": arr[:, 1], "I2": arr[:, 2], "gap_rate": arr[:, 3],
                       "torque_ratio": arr[:, 4], "mode": arr[:, 5]}
    return Trajectory(params, rows, events, step_arrays, truncated, config)


# --------------------------------------------------------------------------
# hitting time
# --------------------------------------------------------------------------

class HittingTime(NamedTuple):
    s0: float
    #: True when the linear law I1 - I2 = f (s - s0) applies (zero torque)
    linear_law: bool
    #: spread of the pointwise estimates (linear law) or 0
    spread: float


def detect_hitting_time(traj: Trajectory, params: Optional[SystemParams] = None) -> HittingTime:
    """Hitting time ``s0`` at which ``I1 = I2``.

    For zero torque every sample yields ``s0 = s - (I1 - I2)/f``; the median
    is returned together with the spread.  Otherwise the first located sign
    change of ``I1 - I2`` is returned with ``linear_law=False``.
    """
    params = params or traj.params
    f = params.f
    if f == 0.0:
        raise NoHittingError("f = 0: the action gap never changes")
    if len(traj) == 0:
        raise NoHittingError("empty trajectory")
    gap = traj.I[:, 0] - traj.I[:, 1]
    if params.potential.is_zero:
        est = traj.s - gap / f
        med = float(np.median(est))
        return HittingTime(med, True, float(np.max(np.abs(est - med))))
    hits = traj.events_of(HITTING)
    if hits:
        return HittingTime(hits[0].s, False, 0.0)
    idx = np.nonzero(np.sign(gap[:-1]) * np.sign(gap[1:]) <= 0)[0]
    if len(idx) == 0:
        raise NoHittingError("I1 - I2 does not change sign on the sampled interval")
    i = idx[0]
    s_a, s_b, g_a, g_b = traj.s[i], traj.s[i + 1], gap[i], gap[i + 1]
    s_hit = s_a if g_b == g_a else s_a - g_a * (s_b - s_a) / (g_b - g_a)
    return HittingTime(float(s_hit), False, 0.0)
