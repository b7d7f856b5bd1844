"""The flux ramp opens the action gap at a constant rate.

Without a potential, I1 - I2 grows exactly like f (s - s0): the Landau orbit
touches the flux line once, at the hitting time s0.  A weak potential tilts
the rate by at most the relative torque bound.
"""
from abflux import ActionAngleState, SinusoidalPotential, SystemParams, integrate
from abflux.dynamics import IntegratorConfig, detect_hitting_time

cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12)
for f in (0.1, 1.0):
    tr = integrate(ActionAngleState(0.0, 0.3, 1.1, 2.0, 1.0), (-50, 50), SystemParams.from_f(f), cfg)
    hit = detect_hitting_time(tr)
    gap = abs(tr.I[:, 0] - tr.I[:, 1] - f * (tr.s - hit.s0)).max()
    print(f"f={f}: s0={hit.s0:+.6f}, worst deviation from the linear law {gap:.1e}, "
          f"K drift {abs(tr.K - tr.K[0]).max():.1e}")

params = SystemParams.from_f(1.0, potential=SinusoidalPotential(0.02))
tr = integrate(ActionAngleState(0.0, 0.3, 1.1, 1.0, 3.0), (0, 30), params, cfg, record_steps=True)
c = tr.steps["torque_ratio"].max()
r = tr.steps["gap_rate"]
print(f"with V = 0.02 (sin x + sin y): c_torque={c:.3f}, gap rate in [{r.min():.3f}, {r.max():.3f}] "
      f"inside [{1 - c:.3f}, {1 + c:.3f}]; hitting time {detect_hitting_time(tr).s0:.4f}")
