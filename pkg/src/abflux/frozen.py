"""Closed-form flow of the frozen Hamiltonian H(sigma) and orbit topology."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IncompleteOrbitError
from .model import (TWO_PI, PhaseState, SystemParams, gauge_potential, observables_arrays,
                    perp, wedge)

#: ``|c^2 - 2H|`` below this marks an orbit through the origin.
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class FrozenOrbit:
    sigma: float
    center: np.ndarray
    radius: float
    phase0: float
    encircles_origin: bool
    through_origin: bool


def _frozen_velocity(state: PhaseState, sigma: float, params: SystemParams):
    v, c, L, H, _ = observables_arrays(sigma, state.q, state.p, state.winding, params)
    return v, c, float(L), float(H)


def classify_orbit(state: PhaseState, sigma: float, params: SystemParams) -> FrozenOrbit:
    """Decide whether the frozen Landau circle through ``state`` winds around q = 0.

    Two independent criteria are evaluated, ``c^2 < 2H`` and
    ``L - q ^ a_E(sigma; q) < 0``; they must agree unless the orbit touches the
    origin, in which case ``through_origin`` is set.
    """
    v, c, L, H = _frozen_velocity(state, sigma, params)
    c2 = float(c @ c)
    by_radius = c2 < 2.0 * H
    aE = gauge_potential(sigma, state.q, params)
    by_momentum = L - float(wedge(state.q, aE)) < 0.0
    through = abs(c2 - 2.0 * H) < BOUNDARY_TOL
    if not through and by_radius != by_momentum:
        raise AssertionError("homotopy criteria disagree away from the boundary")
    vp = perp(v)
    return FrozenOrbit(float(sigma), c, math.sqrt(2.0 * H), math.atan2(vp[1], vp[0]),
                       bool(by_radius and not through), bool(through))


def _arc_winding(c, vp, v, s, radius):
    """Change of arg(q) along the frozen circle from phase 0 to phase ``s``."""
    dist = abs(math.hypot(*c) - radius)
    # a sub-arc whose sagitta is below the origin's distance to the circle
    # cannot hide the origin between arc and chord, so wrapped steps are exact
    if radius == 0.0:
        return 0.0
    x = min(dist / radius, 1.0)
    dphi = 2.0 * math.acos(1.0 - 0.5 * x)
    dphi = min(dphi, 0.5)
    n = int(math.ceil(abs(s) / dphi)) + 1
    t = np.linspace(0.0, s, n + 1)
    qs = c[None, :] + np.cos(t)[:, None] * vp[None, :] + np.sin(t)[:, None] * v[None, :]
    ang = np.arctan2(qs[:, 1], qs[:, 0])
    d = np.diff(ang)
    d = (d + math.pi) % TWO_PI - math.pi
    return float(d.sum())


def frozen_flow(state: PhaseState, sigma: float, s: float, params: SystemParams) -> PhaseState:
    """Advance ``state`` by ``s`` under the Hamiltonian frozen at time ``sigma``.

    ``q(s) = c + cos(s) v_perp + sin(s) v`` and
    ``p(s) = 1/2 (c_perp + cos(s) v - sin(s) v_perp) + a_E(sigma; q(s))``.
    The returned state carries ``state.s + s`` as its time stamp and the
    continuously continued winding of ``q``.
    """
    v, c, L, H = _frozen_velocity(state, sigma, params)
    c2 = float(c @ c)
    if abs(c2 - 2.0 * H) < BOUNDARY_TOL:
        raise IncompleteOrbitError("frozen orbit passes through the origin")
    vp = perp(v)
    cs, sn = math.cos(s), math.sin(s)
    q = c + cs * vp + sn * v
    p = 0.5 * (perp(c) + cs * v - sn * vp) + gauge_potential(sigma, q, params)

    radius = math.sqrt(2.0 * H)
    turns = math.floor(s / TWO_PI)
    rest = s - turns * TWO_PI
    per_turn = -TWO_PI if c2 < 2.0 * H else 0.0  # clockwise rotation
    winding = state.winding + turns * per_turn + _arc_winding(c, vp, v, rest, radius)
    return PhaseState(state.s + s, q, p, winding)
