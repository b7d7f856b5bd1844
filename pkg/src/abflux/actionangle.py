"""Action-angle coordinates of the Landau problem.

The transform is

    q = sqrt(2 I1) e(phi1) + sqrt(2 I2) e(-phi2)
    p = 1/2 (sqrt(2 I1) e_perp(phi1) - sqrt(2 I2) e_perp(-phi2)) + a_E(s; q)

with ``e(t) = (cos t, sin t)``.  Its inverse reads ``I1 = c^2/2``,
``I2 = H = v^2/2``, ``e(phi1) = c/|c|`` and ``e(-phi2) = v_perp/|v|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, SingularityError, UndefinedAngleError
from .model import (FD_STEP, TWO_PI, PhaseState, SystemParams, perp, unwrap_to,
                    vector_potential)

#: ``|q|`` below this counts as lying on the excluded set C.
C_TOL = 1e-12
#: ``v^2`` or ``c^2`` below this counts as lying on the null set D.
D_TOL = 1e-24


@dataclass
class ActionAngleState:
    s: float
    phi1: float
    phi2: float
    I1: float
    I2: float

    def __post_init__(self):
        self.s, self.phi1, self.phi2 = float(self.s), float(self.phi1), float(self.phi2)
        self.I1, self.I2 = float(self.I1), float(self.I2)
        if self.I1 < 0.0 or self.I2 < 0.0:
            raise InvalidParameterError("actions must be non-negative")

    @property
    def phi(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2])

    @property
    def I(self) -> np.ndarray:
        return np.array([self.I1, self.I2])


def position(phi1, phi2, I1, I2):
    """``q(phi, I)``; vectorised over broadcastable inputs, result shape ``(..., 2)``."""
    r1 = np.sqrt(2.0 * np.asarray(I1, dtype=float))
    r2 = np.sqrt(2.0 * np.asarray(I2, dtype=float))
    return np.stack([r1 * np.cos(phi1) + r2 * np.cos(phi2),
                     r1 * np.sin(phi1) - r2 * np.sin(phi2)], axis=-1)


def velocity(phi2, I2):
    """``v = -sqrt(2 I2) e_perp(-phi2)``."""
    r2 = np.sqrt(2.0 * np.asarray(I2, dtype=float))
    return np.stack([-r2 * np.sin(phi2), -r2 * np.cos(phi2)], axis=-1)


def to_cartesian(aa: ActionAngleState, params: SystemParams,
                 winding_hint: Optional[float] = None) -> PhaseState:
    """Map action-angle coordinates to a Cartesian phase-space point.

    ``winding_hint`` selects the branch of arg(q) nearest to it.
    """
    q = position(aa.phi1, aa.phi2, aa.I1, aa.I2)
    if math.hypot(*q) < C_TOL:
        raise SingularityError("action-angle point lies on the excluded set C (q = 0)")
    v = velocity(aa.phi2, aa.I2)
    p = v + vector_potential(aa.s, q, params)
    w = math.atan2(q[1], q[0])
    if winding_hint is not None:
        w = float(unwrap_to(w, winding_hint))
    return PhaseState(aa.s, q, p, w)


def _angles(q, p, s, params):
    v = p - vector_potential(s, q, params)
    c = q - perp(v)
    return v, c


def from_cartesian(state: PhaseState, params: SystemParams,
                   reference: Optional[ActionAngleState] = None) -> ActionAngleState:
    """Inverse transform.  Angles are principal unless ``reference`` is given,
    in which case each angle is moved to the branch closest to the reference."""
    v, c = _angles(state.q, state.p, state.s, params)
    v2 = float(v @ v)
    c2 = float(c @ c)
    if v2 < D_TOL or c2 < D_TOL:
        raise UndefinedAngleError("angles undefined where v = 0 or c = 0")
    vp = perp(v)
    phi1 = math.atan2(c[1], c[0])
    phi2 = -math.atan2(vp[1], vp[0])
    if reference is not None:
        phi1 = float(unwrap_to(phi1, reference.phi1))
        phi2 = float(unwrap_to(phi2, reference.phi2))
    return ActionAngleState(state.s, phi1, phi2, 0.5 * c2, 0.5 * v2)


def _wrapped(d):
    return (d + math.pi) % TWO_PI - math.pi


def check_canonical(aa: ActionAngleState, params: SystemParams, h: float = FD_STEP,
                    threshold: float = 1e-6) -> dict:
    """Finite-difference Poisson brackets of ``(phi, I)`` as functions of ``(q, p)``.

    Returns a dict with the residual of each bracket relation, the maximum
    residual and a ``flagged`` entry that is true when any residual exceeds
    ``threshold`` (expected near the singular sets C and D).
    """
    st = to_cartesian(aa, params)
    s = aa.s
    q0, p0 = st.q, st.p

    def coords(q, p):
        v, c = _angles(q, p, s, params)
        vp = perp(v)
        return np.array([math.atan2(c[1], c[0]), -math.atan2(vp[1], vp[0]),
                         0.5 * float(c @ c), 0.5 * float(v @ v)])

    # Jacobian d(phi1, phi2, I1, I2)/d(q1, q2, p1, p2)
    jac = np.empty((4, 4))
    for k in range(4):
        d = np.zeros(4)
        d[k] = h
        plus = coords(q0 + d[:2], p0 + d[2:])
        minus = coords(q0 - d[:2], p0 - d[2:])
        diff = plus - minus
        diff[:2] = _wrapped(diff[:2])
        jac[:, k] = diff / (2 * h)

    def br(i, j):
        return float(jac[i, :2] @ jac[j, 2:] - jac[i, 2:] @ jac[j, :2])

    res = {
        "{phi1,I1}-1": br(0, 2) - 1.0,
        "{phi2,I2}-1": br(1, 3) - 1.0,
        "{phi1,I2}": br(0, 3),
        "{phi2,I1}": br(1, 2),
        "{phi1,phi2}": br(0, 1),
        "{I1,I2}": br(2, 3),
    }
    worst = max(abs(x) for x in res.values())
    return {"residuals": res, "max": worst, "flagged": bool(worst > threshold or not np.isfinite(worst))}

