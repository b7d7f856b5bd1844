"""Frozen Landau orbits and the action-angle picture.

With the flux switched off, a charge in a uniform field circles its guiding
center c at speed |v|.  The actions are I1 = |c|^2/2 and I2 = H, and the
closed-form flow matches a numerical integration to round-off.
"""
import math

import numpy as np

from abflux import ActionAngleState, PhaseState, SystemParams, from_cartesian, integrate, to_cartesian
from abflux.dynamics import IntegratorConfig
from abflux.frozen import classify_orbit, frozen_flow
from abflux.model import observables

free = SystemParams(Phi0=0.0)
start = PhaseState(0.0, [1.5, 0.2], [0.1, 0.9])
orbit = classify_orbit(start, 0.0, free)
print(f"center {orbit.center}, radius {orbit.radius:.4f}, encircles origin: {orbit.encircles_origin}")

cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13, coordinate_mode="cartesian")
grid = np.linspace(0, 2 * math.pi, 9)
tr = integrate(start, (0, 2 * math.pi), free, cfg, samples=grid)
dev = max(np.max(np.abs(tr.q[i] - frozen_flow(start, 0.0, s, free).q)) for i, s in enumerate(grid))
print(f"integrated vs closed form over one period: {dev:.1e}")
print(f"winding change over one period: {tr.winding[-1] - tr.winding[0]:+.6f} (-2 pi when encircling)")

aa = from_cartesian(start, free)
ob = observables(start, free)
print(f"I1 = {aa.I1:.6f} = |c|^2/2 = {0.5 * ob.c @ ob.c:.6f};  I2 = {aa.I2:.6f} = H = {ob.H:.6f}")

back = to_cartesian(ActionAngleState(0.0, 0.0, math.pi, 9 / 8, 1 / 8), free)
print(f"(phi, I) = (0, pi, 9/8, 1/8) maps to q = {back.q}, p = {back.p}")
