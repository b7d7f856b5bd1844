"""Large-time behaviour for V = 0 and a linearly growing flux.

With the action gap fixed by ``I1 - I2 = f (s - s0)`` the motion reduces to
``J = I1 + I2`` and ``psi = phi1 + phi2``.  Writing ``sig = s - s0`` and
``R = sqrt(J^2 - f^2 sig^2)`` the substitution

    x1 = R cos(psi),   x2 = R sin(psi) + f

turns the reduced equations into a perturbed Bessel system

    x1' - x1/sig + x2 = F(sig, x),   x2' = x1,
    F = f - x1/sig - f^2 sig / (sqrt(x1^2 + (x2 - f)^2 + f^2 sig^2) + x1),

whose homogeneous solutions are ``sig (J0, J1)`` and ``sig (Y0, Y1)``.
Functions working in the x-picture take ``sig`` as their time variable.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy import special
from scipy.integrate import cumulative_simpson, solve_ivp

from .dynamics import Trajectory, detect_hitting_time
from .errors import ConvergenceError, DomainError, InvalidParameterError
from .model import TWO_PI, SystemParams

FUTURE, PAST = "future", "past"
#: default fit window: last quarter of the run, at least this many fast periods
MIN_WINDOW_PERIODS = 50


# --------------------------------------------------------------------------
# Bessel functions
# --------------------------------------------------------------------------

_BESSEL = {("J", 0): special.j0, ("J", 1): special.j1, ("Y", 0): special.y0, ("Y", 1): special.y1}


def bessel(kind: str, order: int, s):
    """``J_n(s)`` or ``Y_n(s)`` for ``n`` in {0, 1}; scalar or array ``s``."""
    try:
        fn = _BESSEL[(kind, int(order))]
    except KeyError:
        raise InvalidParameterError(f"unsupported Bessel function {kind}{order}") from None
    arr = np.asarray(s, dtype=float)
    if kind == "Y" and np.any(arr <= 0):
        raise DomainError("Y_n requires s > 0")
    if kind == "J" and np.any(arr < 0):
        raise DomainError("J_n is evaluated for s >= 0 only")
    out = fn(arr)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# reduced system and x-transform
# --------------------------------------------------------------------------

@dataclass
class ReducedState:
    s: float
    J: float
    psi: float


@dataclass
class XState:
    s: float
    x1: float
    x2: float


def _radical(J, sig, f):
    rad = J * J - (f * sig) ** 2
    if np.any(rad < 0):
        raise DomainError("J^2 < f^2 (s - s0)^2")
    return np.sqrt(rad)


def reduced_rhs(state: ReducedState, f: float, s0: float = 0.0):
    """``(psi', J')`` of the reduced system."""
    sig = state.s - s0
    R = _radical(state.J, sig, f)
    if f != 0.0 and sig != 0.0 and R == 0.0:
        raise DomainError("degenerate radical: J = |f (s - s0)|")
    den = state.J + R * math.cos(state.psi)
    if den <= 0.0:
        raise DomainError("reduced system evaluated at q = 0")
    dJ = f * f * sig / den
    dpsi = 1.0 + (f * f * sig * math.sin(state.psi) / (R * den) if sig != 0.0 else 0.0)
    return dpsi, dJ


def x_transform(state: ReducedState, f: float, s0: float = 0.0) -> XState:
    R = float(_radical(state.J, state.s - s0, f))
    return XState(state.s, R * math.cos(state.psi), R * math.sin(state.psi) + f)


def x_transform_inverse(x: XState, f: float, s0: float = 0.0,
                        psi_ref: Optional[float] = None) -> ReducedState:
    y = x.x2 - f
    R = math.hypot(x.x1, y)
    psi = math.atan2(y, x.x1)
    if psi_ref is not None:
        psi += TWO_PI * round((psi_ref - psi) / TWO_PI)
    return ReducedState(x.s, math.hypot(R, f * (x.s - s0)), psi)


def x_forcing(sig, x1, x2, f):
    """The forcing ``F(sig, x1, x2)``."""
    root = np.sqrt(x1 * x1 + (x2 - f) ** 2 + (f * sig) ** 2)
    return f - x1 / sig - f * f * sig / (root + x1)


def x_rhs(sig, x, f):
    x1, x2 = x
    return [x1 / sig - x2 + x_forcing(sig, x1, x2, f), x1]


def homogeneous_solution(kind: str, sig):
    """``sig (J0, J1)`` (kind 'J') or ``sig (Y0, Y1)`` (kind 'Y')."""
    return sig * bessel(kind, 0, sig), sig * bessel(kind, 1, sig)


def constants_from_amplitude(a0: float, b0: float):
    """``(c1, c2)`` with ``c1 sig J0 + c2 sig Y0 ~ a0 sqrt(sig) cos(sig + b0)``."""
    z = math.sqrt(math.pi / 2) * a0 * complex(math.cos(b0 + math.pi / 4), math.sin(b0 + math.pi / 4))
    return z.real, -z.imag


def amplitude_from_constants(c1: float, c2: float):
    z = complex(c1, -c2) / math.sqrt(math.pi / 2)
    return abs(z), math.atan2(z.imag, z.real) - math.pi / 4


# --------------------------------------------------------------------------
# Picard iteration for the integral equation
# --------------------------------------------------------------------------

@dataclass
class PicardResult:
    s: np.ndarray
    x: np.ndarray
    s_star: float
    S_max: float
    iterations: int
    increment: float
    tail_bound: float

    def states(self):
        return [XState(float(a), float(b), float(c)) for a, b, c in zip(self.s, *self.x.T)]

    def terminal_value(self):
        return self.x[-1].copy()


def picard_solve(c1: float, c2: float, f: float, s_star: float, horizon: float,
                 S_max: Optional[float] = None, h: float = 0.01, tol: float = 1e-10,
                 max_iter: int = 200, max_doublings: int = 6,
                 forcing: Optional[Callable] = None) -> PicardResult:
    """Solve the integral equation by fixed-point iteration from ``x = 0``.

    The infinite upper limit is replaced by ``S_max`` (default
    ``2 * horizon``).  The truncated equation is solved exactly by the
    differential equation with terminal data ``x(S_max) = c1 S_max (J0, J1) +
    c2 S_max (Y0, Y1)``; an estimate of the discarded tail is reported.  On
    non-contraction ``s_star`` is doubled (up to ``max_doublings`` times).
    ``forcing(sig, x1, x2, f)`` replaces :func:`x_forcing` when given.
    """
    forcing = forcing or x_forcing
    if s_star < 1.0:
        raise InvalidParameterError("s_star must be >= 1")
    if horizon <= s_star:
        raise InvalidParameterError("horizon must exceed s_star")
    S_max = float(S_max if S_max is not None else 2.0 * horizon)
    if S_max < horizon:
        raise InvalidParameterError("S_max must be >= horizon")
    for _ in range(max_doublings + 1):
        n = int(math.ceil((S_max - s_star) / h))
        n += n % 2  # even interval count for Simpson
        sig = np.linspace(s_star, S_max, n + 1)
        J0, J1 = special.j0(sig), special.j1(sig)
        Y0, Y1 = special.y0(sig), special.y1(sig)
        hom = np.stack([c1 * sig * J0 + c2 * sig * Y0, c1 * sig * J1 + c2 * sig * Y1], axis=1)
        x = np.zeros_like(hom)
        inc = math.inf
        history = []
        for it in range(1, max_iter + 1):
            F = forcing(sig, x[:, 0], x[:, 1], f)
            # integrals from sig to S_max, accumulated in u = -sig
            A = cumulative_simpson((J1 * F)[::-1], x=-sig[::-1], initial=0.0)[::-1]
            Bi = cumulative_simpson((Y1 * F)[::-1], x=-sig[::-1], initial=0.0)[::-1]
            pre = 0.5 * math.pi * sig
            new = hom - np.stack([pre * (Y0 * A - J0 * Bi), pre * (Y1 * A - J1 * Bi)], axis=1)
            if not np.all(np.isfinite(new)):
                inc = math.inf
                break
            inc = float(np.max(np.abs(new - x)))
            x = new
            history.append(inc)
            if inc < tol:
                break
            if it > 5 and inc > history[-4]:
                break  # increments not shrinking
        if inc < tol:
            tail = 10
            M = float(np.max(np.abs(sig[-len(sig) // tail:] * F[-len(sig) // tail:])))
            bound = 4.0 * M * math.sqrt(horizon / S_max)
            keep = sig <= horizon + 0.5 * h
            return PicardResult(sig[keep], x[keep], s_star, S_max, it, inc, bound)
        s_star *= 2.0
        if s_star >= horizon:
            break
    raise ConvergenceError(f"Picard iteration did not contract (last increment {inc:.3g}, "
                           f"s_star={s_star})")


def integrate_x_system(x_end, f: float, s_end: float, s_eval, rtol: float = 1e-12,
                       atol: float = 1e-12) -> np.ndarray:
    """Integrate the x-system backward from ``x(s_end) = x_end``; values at ``s_eval``."""
    s_eval = np.asarray(s_eval, dtype=float)
    order = np.argsort(-s_eval)
    sol = solve_ivp(lambda t, y: x_rhs(t, y, f), (s_end, float(s_eval.min())), list(x_end),
                    method="DOP853", rtol=rtol, atol=atol, t_eval=s_eval[order])
    if not sol.success:
        raise ConvergenceError(sol.message)
    out = np.empty((len(s_eval), 2))
    out[order] = sol.y.T
    return out


# --------------------------------------------------------------------------
# asymptotic series
# --------------------------------------------------------------------------

_NAN = float("nan")


@dataclass
class AsymptoticConstants:
    a0: float = _NAN
    b0: float = _NAN
    K: float = _NAN
    a0_tilde: float = _NAN
    b0_tilde: float = _NAN
    s0: float = _NAN
    residuals: Dict[str, float] = field(default_factory=dict)
    low_confidence: bool = False

    def merge(self, other: "AsymptoticConstants") -> "AsymptoticConstants":
        """Fill NaN fields from ``other`` (for combining future and past fits)."""
        out = AsymptoticConstants(**{k: getattr(self, k) for k in
                                     ("a0", "b0", "K", "a0_tilde", "b0_tilde", "s0")})
        for k in ("a0", "b0", "K", "a0_tilde", "b0_tilde", "s0"):
            if math.isnan(getattr(out, k)):
                setattr(out, k, getattr(other, k))
        out.residuals = {**other.residuals, **self.residuals}
        out.low_confidence = self.low_confidence or other.low_confidence
        return out


def eval_asymptotic_series(c: AsymptoticConstants, f: float, s, direction: str = FUTURE):
    """Evaluate the asymptotic expansions through order ``1/s``.

    Returns ``(I1, I2, phi1, phi2)`` (arrays for array ``s``); the neglected
    remainder is ``O(|s|^{-3/2})``.
    """
    s = np.asarray(s, dtype=float)
    if f <= 0:
        raise DomainError("asymptotic series need f > 0")
    if direction == FUTURE:
        if np.any(s <= 0):
            raise DomainError("future series need s > 0")
        a, b, K = c.a0, c.b0, c.K
        th = s + b
        rs = np.sqrt(s)
        I2 = a * a / (4 * f) - 0.5 * a * np.sin(th) / rs \
            + 0.25 * (f + a * a / (2 * f) * np.sin(2 * th)) / s
        I1 = I2 + f * (s - c.s0)
        phi1 = a * a / (4 * f * f) - K / f - 1.0 / (4 * s)
        phi2 = th - a * a / (4 * f * f) + K / f - (f / a) * np.cos(th) / rs \
            + 0.125 * (-1 + 2 * np.cos(2 * th) - 4 * f * f / (a * a) * np.sin(2 * th)) / s
    elif direction == PAST:
        if np.any(s >= 0):
            raise DomainError("past series need s < 0")
        a, b, K = c.a0_tilde, c.b0_tilde, c.K
        th = s + b
        rs = np.sqrt(np.abs(s))
        I1 = a * a / (4 * f) + 0.5 * a * np.sin(th) / rs \
            - 0.25 * (f - a * a / (2 * f) * np.sin(2 * th)) / s
        I2 = I1 - f * (s - c.s0)
        phi1 = c.s0 + b + a * a / (4 * f * f) - K / f + (f / a) * np.cos(th) / rs \
            - 0.125 * (1 - 2 * np.cos(2 * th) - 4 * f * f / (a * a) * np.sin(2 * th)) / s
        phi2 = s - c.s0 - a * a / (4 * f * f) + K / f - 1.0 / (4 * s)
    else:
        raise DomainError(f"unknown direction {direction!r}")
    if s.ndim == 0:
        return float(I1), float(I2), float(phi1), float(phi2)
    return I1, I2, phi1, phi2


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------

def _basis(s, nuisance=True):
    """Columns 1, sin/sqrt, cos/sqrt, 1/s, sin2/s, cos2/s and optional s^{-3/2} terms."""
    a = np.abs(s)
    r = np.sqrt(a)
    cols = [np.ones_like(s), np.sin(s) / r, np.cos(s) / r, 1 / s, np.sin(2 * s) / s,
            np.cos(2 * s) / s]
    if nuisance:
        p = a ** -1.5
        cols += [p] + [g(k * s) * p for k in (1, 2, 3) for g in (np.sin, np.cos)]
    return np.column_stack(cols)


def _lsq(s, y):
    A = _basis(s)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return coef, float(np.sqrt(np.mean(res ** 2))), float(np.max(np.abs(res)))


def _window(traj: Trajectory, direction: str, window):
    s = traj.s
    if direction == FUTURE:
        if window is None:
            hi = s[-1]
            lo = max(0.75 * hi, hi - max(0.25 * hi, 0.0))
            window = (lo, hi)
        mask = (s >= window[0]) & (s <= window[1]) & (s > 0)
    else:
        if window is None:
            lo = s[0]
            window = (lo, 0.75 * lo)
        mask = (s >= window[0]) & (s <= window[1]) & (s < 0)
    return mask, window


def _resheet(angle, reference):
    """Shift ``angle`` by the multiple of 2 pi closest to ``reference - angle`` on average."""
    k = np.round(np.median(reference - angle) / TWO_PI)
    return angle + TWO_PI * k


def fit_constants(traj: Trajectory, direction: str = FUTURE, window=None,
                  params: Optional[SystemParams] = None) -> AsymptoticConstants:
    """Estimate the asymptotic constants from the tail of a V = 0 trajectory.

    Each limit is fitted by linear least squares against the oscillatory
    ``1/sqrt(s)`` and ``1/s`` terms of the expansion plus nuisance
    ``s^{-3/2}`` terms.  ``residuals`` reports fit RMS values and internal
    consistency checks; ``low_confidence`` is set for short windows or
    inconsistent fits.
    """
    params = params or traj.params
    f = params.f
    if not params.potential.is_zero or f <= 0:
        raise DomainError("constant fits require V = 0 and f > 0")
    mask, window = _window(traj, direction, window)
    if mask.sum() < 20:
        raise DomainError("fit window holds too few samples")
    s = traj.s[mask]
    I1, I2 = traj.I[mask, 0], traj.I[mask, 1]
    phi1, phi2 = traj.phi[mask, 0], traj.phi[mask, 1]
    wind = traj.winding[mask]
    s0 = detect_hitting_time(traj, params).s0
    out = AsymptoticConstants(s0=s0)
    res = out.residuals
    span = abs(window[1] - window[0])
    low = span < MIN_WINDOW_PERIODS * TWO_PI

    psi_coef, rms_psi, _ = _lsq(s, phi1 + phi2 - s)
    if direction == FUTURE:
        ci, rms_i, _ = _lsq(s, I2)
        a0 = math.sqrt(4 * f * ci[0]) if ci[0] > 0 else _NAN
        amp = math.hypot(ci[1], ci[2])
        b_from_I = math.atan2(-ci[2], -ci[1])
        ck, rms_k, _ = _lsq(s, I2 - f * _resheet(phi1, wind))
        out.a0, out.b0, out.K = a0, float(psi_coef[0]), float(ck[0])
        res.update({"future_I2_rms": rms_i, "future_psi_rms": rms_psi, "future_K_rms": rms_k,
                    "future_amplitude_mismatch": abs(amp - 0.5 * a0),
                    "future_phase_mismatch": abs(math.remainder(b_from_I - out.b0, TWO_PI))})
        lim_key = "future"
    else:
        ci, rms_i, _ = _lsq(s, I1)
        a0 = math.sqrt(4 * f * ci[0]) if ci[0] > 0 else _NAN
        amp = math.hypot(ci[1], ci[2])
        b_from_I = math.atan2(ci[2], ci[1])
        ck, rms_k, _ = _lsq(s, I2 + f * _resheet(phi2, -wind))
        out.a0_tilde, out.b0_tilde, out.K = a0, float(psi_coef[0]), float(ck[0])
        res.update({"past_I1_rms": rms_i, "past_psi_rms": rms_psi, "past_K_rms": rms_k,
                    "past_amplitude_mismatch": abs(amp - 0.5 * a0),
                    "past_phase_mismatch": abs(math.remainder(b_from_I - psi_coef[0], TWO_PI))})
        lim_key = "past"
    if not math.isfinite(a0) or res[f"{lim_key}_amplitude_mismatch"] > 1e-2 * max(a0, 1e-300) \
            or res[f"{lim_key}_phase_mismatch"] > 1e-2:
        low = True
    out.low_confidence = bool(low)
    return out


def fit_x_amplitude(traj: Trajectory, s0: float, window=None,
                    params: Optional[SystemParams] = None):
    """Fit ``x(sig) ~ a0 e(sig + b) sqrt(sig)`` on the future tail; returns ``(a0, b)``.

    ``b`` is the phase in the shifted time ``sig = s - s0``.
    """
    params = params or traj.params
    f = params.f
    mask, _ = _window(traj, FUTURE, window)
    s = traj.s[mask]
    sig = s - s0
    J = traj.I[mask].sum(axis=1)
    psi = traj.phi[mask].sum(axis=1)
    R = _radical(J, sig, f)
    y1 = R * np.cos(psi) / np.sqrt(sig)
    y2 = (R * np.sin(psi) + f) / np.sqrt(sig)
    # y1 + i y2 ~ a0 e^{i b} e^{i sig}: fit complex amplitude with 1/sig corrections
    z = (y1 + 1j * y2) * np.exp(-1j * sig)
    p = sig ** -1.5
    A = np.column_stack([np.ones_like(z), 1 / sig, np.exp(-2j * sig) / sig, p,
                         np.exp(-1j * sig) * p, np.exp(-2j * sig) * p])
    coef, *_ = np.linalg.lstsq(A, z, rcond=None)
    return float(abs(coef[0])), float(np.angle(coef[0]))


# --------------------------------------------------------------------------
# transport coefficients
# --------------------------------------------------------------------------

@dataclass
class TransportRecord:
    a0: float
    b0: float
    K: float
    a0_tilde: float
    b0_tilde: float
    s0: float
    #: |q(t)|/sqrt(t) limit as given by the closed-form coefficient sqrt(Phi0/(2 pi B))
    drift_magnitude: float
    #: coefficient implied by the action asymptotics, sqrt(Phi0/(pi B))
    drift_magnitude_actions: float
    drift_angle: float
    energy_limit: float
    past_energy_slope: float
    measured: Dict[str, float] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)
    low_confidence: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(_jsonable(self.to_dict()), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def measure_transport(traj: Trajectory, params: Optional[SystemParams] = None,
                      tail: float = 0.25) -> Dict[str, float]:
    """Direct measurements in physical units from the ends of ``traj``.

    ``drift_ratio`` is ``|q(t)|/sqrt(t)`` at the last positive sample,
    ``past_energy_slope`` the least-squares slope of the energy against time
    over the earliest ``tail`` fraction of the negative-time samples and
    ``future_energy`` the energy averaged over the last ``tail`` fraction.
    """
    params = params or traj.params
    w, lam = params.omega, params.lam
    s = traj.s
    out: Dict[str, float] = {}
    if len(s) and s[-1] > 0:
        t = s[-1] / w
        out["t_end"] = t
        out["drift_ratio"] = float(lam * math.hypot(*traj.q[-1]) / math.sqrt(t))
        m = s >= s[-1] * (1 - tail)
        out["future_energy"] = float(w * np.mean(traj.I[m, 1]))
    if len(s) and s[0] < 0:
        m = s <= s[0] * (1 - tail)
        if m.sum() >= 2:
            t = s[m] / w
            out["past_energy_slope"] = float(np.polyfit(t, w * traj.I[m, 1], 1)[0])
            out["t_start"] = float(s[0] / w)
    return out


def transport_coefficients(consts: AsymptoticConstants, params: SystemParams,
                           traj: Optional[Trajectory] = None) -> TransportRecord:
    """Transport limits from the fitted constants, with measurements if ``traj`` is given."""
    f = params.f
    if f <= 0 or params.Phi0 <= 0:
        raise DomainError("transport coefficients need B > 0 and Phi0 > 0")
    a0 = consts.a0
    rec = TransportRecord(
        a0=consts.a0, b0=consts.b0, K=consts.K, a0_tilde=consts.a0_tilde,
        b0_tilde=consts.b0_tilde, s0=consts.s0,
        drift_magnitude=math.sqrt(params.Phi0 / (TWO_PI * params.B)),
        drift_magnitude_actions=math.sqrt(params.Phi0 / (math.pi * params.B)),
        drift_angle=a0 * a0 / (4 * f * f) - consts.K / f,
        energy_limit=params.omega * a0 * a0 / (4 * f),
        past_energy_slope=-params.e ** 2 * params.B * params.Phi0 / (TWO_PI * params.m),
        residuals=dict(consts.residuals), low_confidence=consts.low_confidence)
    if traj is not None:
        rec.measured = measure_transport(traj, params)
    return rec
