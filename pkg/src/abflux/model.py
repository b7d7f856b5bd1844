"""Parameters, unit scaling, fields and pointwise observables.

Scaled variables follow the convention ``s = omega t``, ``q = q_phys / lam``,
``p = p_phys * lam`` with ``omega = eB/m`` and ``lam = 1/sqrt(eB)``.  In these
units the Hamiltonian is ``H = 1/2 (p - a(s;q))**2`` with

    a(s;q) = 1/2 q_perp + a_E(s;q),      a_E(s;q) = -s E(q),

and the electric field for the linear flux law ``Phi(t) = Phi0 t`` is

    E(q) = f q_perp/|q|**2 - (e/omega) lam (grad V)(lam q),   f = e Phi0 / (2 pi omega).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import InvalidParameterError, SingularityError

#: Field evaluation refuses below this radius (scaled units).
EPS_Q = 1e-8
#: Central-difference step used by bracket and gradient checks.
FD_STEP = 1e-5

TWO_PI = 2.0 * math.pi


def perp(v):
    """Rotate by +90 degrees: ``(x, y) -> (-y, x)``; works on trailing axis."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def wedge(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def unwrap_to(raw, ref):
    """Shift angle(s) ``raw`` by a multiple of 2 pi to lie closest to ``ref``."""
    return raw + TWO_PI * np.round((ref - raw) / TWO_PI)


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------

class Potential:
    """Smooth bounded potential ``V(x, y)`` in physical coordinates.

    Subclasses implement :meth:`value` and :meth:`gradient`; both accept
    scalars or broadcastable arrays.
    """

    kind = "abstract"
    is_zero = False

    def value(self, x, y):
        raise NotImplementedError

    def gradient(self, x, y):
        raise NotImplementedError

    def torque(self, x, y):
        """``q ^ grad V`` at ``q = (x, y)``."""
        gx, gy = self.gradient(x, y)
        return x * gy - y * gx

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroPotential(Potential):
    kind = "zero"
    is_zero = True

    def value(self, x, y):
        return np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float))

    def gradient(self, x, y):
        z = self.value(x, y)
        return z, z.copy()

    def torque(self, x, y):
        return self.value(x, y)

    def to_dict(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class SinusoidalPotential(Potential):
    """``V(x, y) = amplitude * (sin(k1 x) + sin(k2 y))``."""

    amplitude: float
    k1: float = 1.0
    k2: float = 1.0
    kind = "sinusoidal"

    def value(self, x, y):
        return self.amplitude * (np.sin(self.k1 * x) + np.sin(self.k2 * y))

    def gradient(self, x, y):
        a = self.amplitude
        return a * self.k1 * np.cos(self.k1 * x), a * self.k2 * np.cos(self.k2 * y)

    def to_dict(self):
        return {"kind": "sinusoidal", "amplitude": self.amplitude, "k1": self.k1, "k2": self.k2}


class TabulatedPotential(Potential):
    """Bicubic spline through values tabulated on a rectangular grid.

    With ``periodic=True`` (default) the table is treated as one period of a
    doubly periodic potential, which keeps V bounded on the whole plane.
    Otherwise evaluation outside the table raises ``ValueError``.
    """

    kind = "tabulated"
    _PAD = 4

    def __init__(self, x, y, values, periodic: bool = True):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (x.size, y.size):
            raise InvalidParameterError("values must have shape (len(x), len(y))")
        if x.size < 4 or y.size < 4:
            raise InvalidParameterError("bicubic interpolation needs at least 4 nodes per axis")
        self.x, self.y, self.values, self.periodic = x, y, values, periodic
        if periodic:
            # last node duplicates the first, so the period is x[-1] - x[0]
            self._period = (x[-1] - x[0], y[-1] - y[0])
            n = self._PAD
            core = values[:-1, :-1]
            tiled = np.pad(core, n, mode="wrap")
            dx, dy = x[1] - x[0], y[1] - y[0]
            xs = x[0] + dx * np.arange(-n, core.shape[0] + n)
            ys = y[0] + dy * np.arange(-n, core.shape[1] + n)
            self._spline = RectBivariateSpline(xs, ys, tiled, kx=3, ky=3)
        else:
            self._spline = RectBivariateSpline(x, y, values, kx=3, ky=3)

    def _reduce(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.periodic:
            lx, ly = self._period
            return self.x[0] + np.mod(x - self.x[0], lx), self.y[0] + np.mod(y - self.y[0], ly)
        if (np.any(x < self.x[0]) or np.any(x > self.x[-1])
                or np.any(y < self.y[0]) or np.any(y > self.y[-1])):
            raise ValueError("point outside tabulated potential domain")
        return x, y

    def value(self, x, y):
        xr, yr = self._reduce(x, y)
        return self._spline.ev(xr, yr)

    def gradient(self, x, y):
        xr, yr = self._reduce(x, y)
        return self._spline.ev(xr, yr, dx=1), self._spline.ev(xr, yr, dy=1)

    def to_dict(self):
        return {"kind": "tabulated", "x": self.x.tolist(), "y": self.y.tolist(),
                "values": self.values.tolist(), "periodic": self.periodic}


def potential_from_dict(d: Optional[dict]) -> Potential:
    if not d:
        return ZeroPotential()
    kind = d.get("kind", "zero")
    if kind == "zero":
        return ZeroPotential()
    if kind == "sinusoidal":
        return SinusoidalPotential(float(d["amplitude"]), float(d.get("k1", 1.0)), float(d.get("k2", 1.0)))
    if kind == "tabulated":
        return TabulatedPotential(d["x"], d["y"], d["values"], bool(d.get("periodic", True)))
    raise InvalidParameterError(f"unknown potential kind {kind!r}")


# --------------------------------------------------------------------------
# parameters and states
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the model.

    ``Phi0`` is the flux added per unit (unscaled) time.  ``flux_rate`` may
    override the constant rate with a callable ``t -> dPhi/dt``; only
    :func:`electric_field` honours it.
    """

    e: float = 1.0
    m: float = 1.0
    B: float = 1.0
    Phi0: float = TWO_PI
    potential: Potential = field(default_factory=ZeroPotential)
    flux_rate: Optional[Callable[[float], float]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("e", "m", "B"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise InvalidParameterError(f"{name} must be positive, got {val!r}")
        if not np.isfinite(self.Phi0):
            raise InvalidParameterError("Phi0 must be finite")

    @property
    def omega(self) -> float:
        return self.e * self.B / self.m

    @property
    def lam(self) -> float:
        return 1.0 / math.sqrt(self.e * self.B)

    @property
    def f(self) -> float:
        return self.e * self.Phi0 / (TWO_PI * self.omega)

    @property
    def coupling(self) -> float:
        """Prefactor ``e/omega`` of the potential terms."""
        return self.e / self.omega

    @classmethod
    def from_f(cls, f: float, e=1.0, m=1.0, B=1.0, potential: Optional[Potential] = None):
        """Parameters with the requested flux parameter ``f`` (sets ``Phi0``)."""
        omega = e * B / m
        return cls(e, m, B, TWO_PI * omega * f / e, potential or ZeroPotential())

    def to_dict(self) -> dict:
        return {"e": self.e, "m": self.m, "B": self.B, "Phi0": self.Phi0,
                "potential": self.potential.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        return cls(float(d.get("e", 1.0)), float(d.get("m", 1.0)), float(d.get("B", 1.0)),
                   float(d.get("Phi0", TWO_PI)), potential_from_dict(d.get("potential")))


def derived_params(params: SystemParams):
    """Return ``(omega, lam, f)``."""
    return params.omega, params.lam, params.f


@dataclass
class PhaseState:
    """Scaled phase-space point with a continuous branch of ``arg(q)``."""

    s: float
    q: np.ndarray
    p: np.ndarray
    winding: Optional[float] = None

    def __post_init__(self):
        self.s = float(self.s)
        self.q = np.array(self.q, dtype=float).reshape(2)
        self.p = np.array(self.p, dtype=float).reshape(2)
        r = math.hypot(*self.q)
        if r == 0.0:
            raise SingularityError("PhaseState requires q != 0")
        principal = math.atan2(self.q[1], self.q[0])
        if self.winding is None:
            self.winding = principal
        else:
            self.winding = float(self.winding)
            d = (self.winding - principal) / TWO_PI
            if abs(d - round(d)) > 1e-7:
                raise InvalidParameterError("winding is not a branch of arg(q)")

    def copy(self) -> "PhaseState":
        return PhaseState(self.s, self.q.copy(), self.p.copy(), self.winding)


@dataclass(frozen=True)
class Observables:
    v: np.ndarray
    c: np.ndarray
    L: float
    H: float
    K: float


# --------------------------------------------------------------------------
# scaling
# --------------------------------------------------------------------------

def scale_to_dimensionless(t, q_phys, p_phys, params: SystemParams) -> PhaseState:
    q_phys = np.asarray(q_phys, dtype=float)
    if not np.any(q_phys):
        raise SingularityError("q = 0 is not in phase space")
    return PhaseState(params.omega * t, q_phys / params.lam, np.asarray(p_phys, dtype=float) * params.lam)


def scale_from_dimensionless(state: PhaseState, params: SystemParams):
    return state.s / params.omega, state.q * params.lam, state.p / params.lam


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------

def _flux_factor(s, params: SystemParams):
    if params.flux_rate is None:
        return params.f
    return params.e * params.flux_rate(s / params.omega) / (TWO_PI * params.omega)


def electric_field(s, q, params: SystemParams) -> np.ndarray:
    """Scaled electric field at ``q`` (shape ``(..., 2)``)."""
    q = np.asarray(q, dtype=float)
    r2 = q[..., 0] ** 2 + q[..., 1] ** 2
    if np.any(r2 < EPS_Q ** 2):
        raise SingularityError(f"|q| below {EPS_Q:g}")
    E = _flux_factor(s, params) * perp(q) / r2[..., None]
    if not params.potential.is_zero:
        lam = params.lam
        gx, gy = params.potential.gradient(lam * q[..., 0], lam * q[..., 1])
        E = E - params.coupling * lam * np.stack([gx, gy], axis=-1)
    return E


def make_field(params: SystemParams):
    """Scalar fast path ``(x, y) -> (E1, E2)`` for the integrators' inner loops."""
    f = params.f
    eps2 = EPS_Q * EPS_Q
    pot = params.potential
    if pot.is_zero:
        def field(x, y):
            r2 = x * x + y * y
            if r2 < eps2:
                raise SingularityError("|q| below guard radius")
            return -f * y / r2, f * x / r2
        return field

    lam = params.lam
    kv = params.coupling * lam
    grad = pot.gradient

    def field(x, y):
        r2 = x * x + y * y
        if r2 < eps2:
            raise SingularityError("|q| below guard radius")
        gx, gy = grad(lam * x, lam * y)
        return -f * y / r2 - kv * float(gx), f * x / r2 - kv * float(gy)
    return field


def gauge_potential(s, q, params: SystemParams) -> np.ndarray:
    """``a_E(s; q) = -s E(q)``, so that ``a_E(0) = 0`` and ``-d_s a_E = E``."""
    return -np.asarray(s, dtype=float)[..., None] * electric_field(s, q, params)


def vector_potential(s, q, params: SystemParams) -> np.ndarray:
    return 0.5 * perp(q) + gauge_potential(s, q, params)


def gauge_function(q, winding, params: SystemParams):
    """``m(q) = f arg(q) - (e/omega) V(lam q)`` on the covering sheet ``winding``."""
    q = np.asarray(q, dtype=float)
    out = params.f * np.asarray(winding, dtype=float)
    if not params.potential.is_zero:
        lam = params.lam
        out = out - params.coupling * params.potential.value(lam * q[..., 0], lam * q[..., 1])
    return out


def observables_arrays(s, q, p, winding, params: SystemParams):
    """Vectorised observables; returns ``(v, c, L, H, K)`` arrays."""
    s = np.asarray(s, dtype=float)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    v = p - vector_potential(s, q, params)
    c = q - perp(v)
    L = wedge(q, p)
    H = 0.5 * np.sum(v * v, axis=-1)
    K = H - gauge_function(q, winding, params)
    return v, c, L, H, K


def observables(state: PhaseState, params: SystemParams) -> Observables:
    """Velocity, center, angular momentum, energy and the motion integral K.

    ``K = H - m(q)`` is conserved for every time-independent potential; for
    ``V = 0`` it reduces to ``H - f * winding``.
    """
    v, c, L, H, K = observables_arrays(state.s, state.q, state.p, state.winding, params)
    return Observables(v, c, float(L), float(H), float(K))


def center_identity_residual(state: PhaseState, params: SystemParams) -> float:
    """``1/2 c^2 - (H + L - q ^ a_E)``; vanishes identically."""
    ob = observables(state, params)
    aE = gauge_potential(state.s, state.q, params)
    return float(0.5 * ob.c @ ob.c - (ob.H + ob.L - wedge(state.q, aE)))


# --------------------------------------------------------------------------
# Poisson brackets by central differences
# --------------------------------------------------------------------------

def poisson_bracket(F, G, q, p, h: float = FD_STEP) -> float:
    """``{F, G} = dF/dq . dG/dp - dF/dp . dG/dq`` for scalar functions of ``(q, p)``."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)

    def grad(fun):
        gq = np.empty(2)
        gp = np.empty(2)
        for i in range(2):
            d = np.zeros(2)
            d[i] = h
            gq[i] = (fun(q + d, p) - fun(q - d, p)) / (2 * h)
            gp[i] = (fun(q, p + d) - fun(q, p - d)) / (2 * h)
        return gq, gp

    Fq, Fp = grad(F)
    Gq, Gp = grad(G)
    return float(Fq @ Gp - Fp @ Gq)


def bracket_residuals(state: PhaseState, params: SystemParams, h: float = FD_STEP) -> dict:
    """Residuals of the frozen-system bracket identities at ``state``.

    Keys name the identity; ideal values are all zero.
    """
    s = state.s

    def vel(q, p):
        return p - vector_potential(s, q, params)

    def comp(fun, i):
        return lambda q, p: float(fun(q, p)[i])

    def cen(q, p):
        return q - perp(vel(q, p))

    def ham(q, p):
        v = vel(q, p)
        return 0.5 * float(v @ v)

    q, p = state.q, state.p
    v1, v2 = comp(vel, 0), comp(vel, 1)
    c1, c2 = comp(cen, 0), comp(cen, 1)
    res = {
        "{v1,v2}-1": poisson_bracket(v1, v2, q, p, h) - 1.0,
        "{c1,c2}+1": poisson_bracket(c1, c2, q, p, h) + 1.0,
    }
    for i, ci in ((1, c1), (2, c2)):
        for j, vj in ((1, v1), (2, v2)):
            res[f"{{c{i},v{j}}}"] = poisson_bracket(ci, vj, q, p, h)
        res[f"{{c{i},H}}"] = poisson_bracket(ci, ham, q, p, h)
    return res
