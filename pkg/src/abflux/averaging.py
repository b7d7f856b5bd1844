"""Averaged (guiding-center) dynamics over the fast angle phi2.

For the linear flux law the averaged vector field is

    psi' = (0, 1) + (e/omega) d_J V_av(psi1, J)
    J'   = f (chi(J1 > J2), -chi(J1 < J2)) - (e/omega) (d_psi1 V_av, 0)

where ``V_av`` is the phi2-average of ``V(lam q(phi, I))``.  It is the
Hamiltonian vector field of

    K_av = J2 - f (psi1 chi(J1 > J2) - psi2 chi(J1 < J2)) + (e/omega) V_av.

The field has a kink on ``J1 = J2``; :func:`integrate_averaged` crosses it
exactly by locating the crossing and restarting on the other branch.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from ._rk import DormandPrince
from .actionangle import ActionAngleState
from .dynamics import IntegratorConfig, integrate
from .errors import DomainError, InvalidParameterError, KinkCrossingError, StepSizeUnderflow
from .model import TWO_PI, SystemParams

KINK_TOL = 1e-10
#: two kink crossings closer than this count as chattering
MIN_CROSSING_GAP = 1e-8


@dataclass
class AveragedState:
    s: float
    psi1: float
    J1: float
    J2: float
    psi2: float = 0.0

    def __post_init__(self):
        if self.J1 < 0 or self.J2 < 0:
            raise InvalidParameterError("averaged actions must be non-negative")


def average_over_fast_angle(g: Callable, N: int = 64) -> Callable:
    """Return ``g_av(phi1, I1, I2)``, the mean of ``g`` over ``phi2`` in [0, 2 pi).

    ``g(phi1, phi2, I1, I2)`` must accept an array of ``phi2`` values.  The
    trapezoidal rule on ``N`` equispaced nodes is spectrally accurate for
    smooth periodic integrands.
    """
    nodes = TWO_PI * np.arange(N) / N

    def g_av(phi1, I1, I2):
        return float(np.mean(g(phi1, nodes, I1, I2)))
    return g_av


def quadrature_order(I1: float, I2: float, tol: float = 1e-13, N_min: int = 64) -> int:
    """Node count for which the trapezoidal error of ``(1/q^2)_av`` drops below ``tol``.

    The integrand's Fourier coefficients decay like ``rho^k`` with
    ``rho = sqrt(min(I) / max(I))``, so the error of the ``N``-point rule is
    of order ``rho^N``.
    """
    lo, hi = sorted((float(I1), float(I2)))
    if hi <= 0 or lo == hi:
        raise DomainError("quadrature order undefined on the kink")
    rho = math.sqrt(lo / hi)
    if rho == 0.0:
        return N_min
    n = math.ceil(math.log(tol) / math.log(rho))
    return max(N_min, n + n % 2)


class AveragedField:
    """Averaged vector field for given parameters and quadrature order."""

    def __init__(self, params: SystemParams, N: int = 64):
        if N < 2:
            raise InvalidParameterError("quadrature order must be at least 2")
        self.params = params
        self.f = params.f
        self.N = N
        self.nodes = TWO_PI * np.arange(N) / N
        self._cn = np.cos(self.nodes)
        self._sn = np.sin(self.nodes)

    @property
    def is_zero(self) -> bool:
        return self.params.potential.is_zero

    def V_av(self, phi1: float, I1: float, I2: float):
        """Averaged potential and its derivatives.

        Returns ``(V_av, dV_av/dphi1, dV_av/dI1, dV_av/dI2)``.
        """
        if self.is_zero:
            return 0.0, 0.0, 0.0, 0.0
        lam = self.params.lam
        pot = self.params.potential
        r1, r2 = math.sqrt(2.0 * I1), math.sqrt(2.0 * I2)
        e1 = (math.cos(phi1), math.sin(phi1))
        # e(-phi2) at the nodes
        ex, ey = self._cn, -self._sn
        qx = r1 * e1[0] + r2 * ex
        qy = r1 * e1[1] + r2 * ey
        V = pot.value(lam * qx, lam * qy)
        gx, gy = pot.gradient(lam * qx, lam * qy)
        gx, gy = lam * gx, lam * gy
        dphi1 = r1 * (-e1[1] * gx + e1[0] * gy)
        dI1 = (e1[0] * gx + e1[1] * gy) / r1 if r1 > 0 else np.zeros_like(gx)
        dI2 = (ex * gx + ey * gy) / r2 if r2 > 0 else np.zeros_like(gx)
        return float(V.mean()), float(dphi1.mean()), float(dI1.mean()), float(dI2.mean())


def _rates(psi1, J1, J2, fld: AveragedField, branch: int):
    f = fld.f
    k = fld.params.coupling
    _, dphi1, dI1, dI2 = fld.V_av(psi1, J1, J2)
    upper = branch > 0
    return (k * dI1, 1.0 + k * dI2,
            (f if upper else 0.0) - k * dphi1,
            (0.0 if upper else -f))


def averaged_rhs(state: AveragedState, fld: AveragedField):
    """Return ``(psi', J')`` of the averaged system at ``state``."""
    if abs(state.J1 - state.J2) < KINK_TOL:
        raise KinkCrossingError("averaged field evaluated on the kink J1 = J2")
    branch = 1 if state.J1 > state.J2 else -1
    r = _rates(state.psi1, state.J1, state.J2, fld, branch)
    return np.array(r[:2]), np.array(r[2:])


def averaged_hamiltonian(state: AveragedState, fld: AveragedField) -> float:
    """``K_av`` at ``state`` (off the kink)."""
    if abs(state.J1 - state.J2) < KINK_TOL:
        raise KinkCrossingError("K_av evaluated on the kink J1 = J2")
    V = fld.V_av(state.psi1, state.J1, state.J2)[0]
    flux = state.psi1 if state.J1 > state.J2 else -state.psi2
    return state.J2 - fld.f * flux + fld.params.coupling * V


def explicit_solution_V0(J0: Sequence[float], psi0: Sequence[float], f: float, s):
    """Closed-form averaged solution for ``V = 0``.

    ``J(s) = min(J0) + (f s - dJ) (chi(f s > dJ), -chi(f s < dJ))`` with
    ``dJ = J0[1] - J0[0]`` and ``psi(s) = (psi0[0], psi0[1] + s)``.  Scalar
    ``s`` gives an :class:`AveragedState`; array ``s`` gives ``(J, psi)``
    arrays of shape ``(n, 2)``.
    """
    if f == 0.0:
        raise DomainError("explicit solution requires f != 0")
    J10, J20 = float(J0[0]), float(J0[1])
    dJ = J20 - J10
    base = min(J10, J20)
    s_arr = np.asarray(s, dtype=float)
    x = f * s_arr - dJ
    J1 = base + np.where(x > 0, x, 0.0)
    J2 = base - np.where(x < 0, x, 0.0)
    psi1 = np.full_like(s_arr, float(psi0[0]))
    psi2 = float(psi0[1]) + s_arr
    if s_arr.ndim == 0:
        return AveragedState(float(s_arr), float(psi1), float(J1), float(J2), float(psi2))
    return np.stack([J1, J2], axis=-1), np.stack([psi1, psi2], axis=-1)


@dataclass
class AveragedTrajectory:
    s: np.ndarray
    psi: np.ndarray
    J: np.ndarray
    crossings: List[float] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.s)

    def columns(self) -> dict:
        """Columns in the trajectory CSV layout with I -> J and phi -> psi."""
        return {"s": self.s, "J1": self.J[:, 0], "J2": self.J[:, 1],
                "psi1": self.psi[:, 0], "psi2": self.psi[:, 1]}

    def stay_time(self, s1: float, s2: float) -> float:
        """Signed time spent with ``J1 < J2`` between ``s1`` and ``s2``."""
        lo, hi = min(s1, s2), max(s1, s2)
        cuts = [lo] + [c for c in self.crossings if lo < c < hi] + [hi]
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            m = 0.5 * (a + b)
            J = np.array([np.interp(m, self.s, self.J[:, 0]), np.interp(m, self.s, self.J[:, 1])])
            if J[0] < J[1]:
                total += b - a
        return total if s2 >= s1 else -total


def _integrate_direction(state, fld, s_end, samples, rtol, atol, max_step, out, crossings, flags):
    y = [state.psi1, state.psi2, state.J1, state.J2]
    s = state.s
    if s == s_end:
        return

    def gap_rate(t, yy):
        return _rates(yy[0], yy[2], yy[3], fld, 1)[2] - _rates(yy[0], yy[2], yy[3], fld, -1)[3]

    def pick_branch(t, yy):
        g = yy[2] - yy[3]
        if g > 0:
            return 1
        if g < 0:
            return -1
        rate = gap_rate(t, yy)
        if rate == 0.0:
            return 1
        return 1 if rate * (1 if s_end > t else -1) > 0 else -1

    branch = pick_branch(s, y)
    k = 0
    while True:
        b = branch
        st = DormandPrince(lambda t, yy: list(_rates(yy[0], yy[2], yy[3], fld, b)), s, y, s_end,
                           rtol, atol, max_step)
        restarted = False
        while not st.finished:
            try:
                st.step()
            except StepSizeUnderflow:
                flags.append(f"step underflow at s={st.t}")
                return
            g0 = st.y_old[2] - st.y_old[3]
            g1 = st.y[2] - st.y[3]
            crossing = g1 == 0.0 or (g0 * g1 < 0.0)
            if crossing and b * g1 <= 0 and not (g0 == 0.0):
                def gap(t):
                    yy = st.dense(t)
                    return yy[2] - yy[3]
                a, c = sorted((st.t_old, st.t))
                sc = st.t if g1 == 0.0 else brentq(gap, a, c, xtol=1e-14, rtol=4 * np.finfo(float).eps)
                while k < len(samples) and (samples[k] - sc) * st.direction <= 0:
                    out.append((samples[k], *st.dense(samples[k])))
                    k += 1
                if crossings and abs(sc - crossings[-1]) < MIN_CROSSING_GAP:
                    flags.append(f"kink chattering near s={sc}")
                    return
                crossings.append(sc)
                y = st.dense(sc)
                y[3] = y[2]  # exactly on the kink
                s = sc
                branch = -b
                restarted = True
                break
            while k < len(samples) and (samples[k] - st.t) * st.direction <= 0:
                t = samples[k]
                out.append((t, *(st.y if t == st.t else st.dense(t))))
                k += 1
        if not restarted:
            return


def integrate_averaged(initial: AveragedState, fld: AveragedField, s_span, samples=None,
                       rtol: float = 1e-12, atol: float = 1e-12, max_step: float = 1.0,
                       sample_step: float = 0.1) -> AveragedTrajectory:
    """Integrate the averaged system across ``s_span`` (both directions from ``initial.s``)."""
    s_a, s_b = sorted(float(x) for x in s_span)
    if samples is None:
        n = max(int(round((s_b - s_a) / sample_step)), 1)
        samples = np.linspace(s_a, s_b, n + 1) if s_b > s_a else np.empty(0)
    samples = np.unique(np.asarray(samples, dtype=float))
    samples = samples[(samples >= s_a) & (samples <= s_b)]
    s0 = initial.s
    back, fwd, crossings, flags = [], [], [], []
    if s_a < s0:
        _integrate_direction(initial, fld, s_a, samples[samples < s0][::-1], rtol, atol,
                             max_step, back, crossings, flags)
    rows = back[::-1]
    if np.any(samples == s0):
        rows.append((s0, initial.psi1, initial.psi2, initial.J1, initial.J2))
    if s_b > s0:
        _integrate_direction(initial, fld, s_b, samples[samples > s0], rtol, atol, max_step,
                             fwd, crossings, flags)
    rows.extend(fwd)
    arr = np.array(rows, dtype=float).reshape(-1, 5)
    return AveragedTrajectory(arr[:, 0], arr[:, 1:3], arr[:, 3:5], sorted(crossings), flags)


def energy_flux_residual(traj: AveragedTrajectory, f: float, s1: float, s2: float) -> float:
    """``|J2(s2) - J2(s1)| - f |time with J1 < J2|``; zero for the averaged flow."""
    J2a = np.interp(s1, traj.s, traj.J[:, 1])
    J2b = np.interp(s2, traj.s, traj.J[:, 1])
    return abs(J2b - J2a) - f * abs(traj.stay_time(s1, s2))


# --------------------------------------------------------------------------
# full-vs-averaged error experiment
# --------------------------------------------------------------------------

@dataclass
class ErrorTable:
    f: np.ndarray
    err: np.ndarray
    horizon: np.ndarray
    exponent: float
    constant: float
    angle_err: np.ndarray

    def rows(self):
        return list(zip(self.f.tolist(), self.err.tolist(), self.horizon.tolist()))


def params_for_f(base: SystemParams, f: float) -> SystemParams:
    """Change ``B`` (keeping e, m, Phi0) so that the flux parameter equals ``f``."""
    if f <= 0 or base.Phi0 <= 0:
        raise InvalidParameterError("error experiment needs f > 0 and Phi0 > 0")
    return replace(base, B=base.Phi0 * base.m / (TWO_PI * f))


def _error_cell(args):
    initial, f, T, base, config, dt = args
    params = params_for_f(base, f)
    horizon = T / f
    n = max(int(math.ceil(horizon / dt)), 1)
    grid = np.linspace(initial.s, initial.s + horizon, n + 1)
    full = integrate(initial, (grid[0], grid[-1]), params, config, samples=grid)
    fld = AveragedField(params)
    avg = integrate_averaged(AveragedState(initial.s, initial.phi1, initial.I1, initial.I2,
                                           initial.phi2), fld, (grid[0], grid[-1]), samples=grid)
    m = min(len(full), len(avg))
    err = float(np.max(np.abs(full.I[:m] - avg.J[:m])))
    aerr = float(np.max(np.abs(full.phi[:m] - avg.psi[:m])))
    return f, err, horizon, aerr


def averaging_error_experiment(initial: ActionAngleState, f_values: Sequence[float],
                               params: SystemParams, T: float = 10.0,
                               config: Optional[IntegratorConfig] = None,
                               threads: int = 1, dt: float = 0.05) -> ErrorTable:
    """Compare full and averaged solutions for several ``f`` over ``[0, T/f]``.

    For each ``f`` the sup over the horizon of ``max_i |I_i - J_i|`` is
    recorded; the scaling exponent is the slope of ``log err`` against
    ``log f``.
    """
    f_values = [float(x) for x in f_values]
    if any(x <= 0 for x in f_values):
        raise InvalidParameterError("f values must be positive")
    config = config or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    jobs = [(initial, f, T, params, config, dt) for f in f_values]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(_error_cell, jobs))
    else:
        res = [_error_cell(j) for j in jobs]
    f_arr = np.array([r[0] for r in res])
    err = np.array([r[1] for r in res])
    slope, icept = (np.polyfit(np.log(f_arr), np.log(err), 1) if len(res) > 1
                    else (float("nan"), float("nan")))
    return ErrorTable(f_arr, err, np.array([r[2] for r in res]), float(slope),
                      float(np.exp(icept)), np.array([r[3] for r in res]))
