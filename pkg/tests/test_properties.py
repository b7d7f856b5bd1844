"""Property-based checks on randomly drawn states."""
import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from abflux.actionangle import ActionAngleState, from_cartesian, position, to_cartesian
from abflux.frozen import classify_orbit, frozen_flow
from abflux.model import (PhaseState, SinusoidalPotential, SystemParams, center_identity_residual,
                          scale_from_dimensionless, scale_to_dimensionless)

coord = st.floats(-5, 5, allow_nan=False)
angle = st.floats(-10, 10, allow_nan=False)
action = st.floats(0.01, 50, allow_nan=False)
fval = st.floats(0, 2, allow_nan=False)
PARAMS = st.builds(lambda f, a: SystemParams.from_f(f, potential=SinusoidalPotential(a)),
                   fval, st.floats(0, 0.5))


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), angle, angle, action, action, PARAMS)
def test_action_angle_round_trip(s, p1, p2, I1, I2, params):
    assume(abs(I1 - I2) > 1e-3)
    aa = ActionAngleState(s, p1, p2, I1, I2)
    assume(np.hypot(*position(p1, p2, I1, I2)) > 1e-3)
    back = from_cartesian(to_cartesian(aa, params), params, reference=aa)
    scale = max(1.0, I1, I2)
    assert abs(back.I1 - I1) < 1e-11 * scale and abs(back.I2 - I2) < 1e-11 * scale
    assert abs(back.phi1 - p1) < 1e-9 and abs(back.phi2 - p2) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), coord, coord, coord, coord, PARAMS)
def test_center_identity(s, q1, q2, p1, p2, params):
    assume(math.hypot(q1, q2) > 0.1)
    st_ = PhaseState(s, [q1, q2], [p1, p2])
    assert center_identity_residual(st_, params) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), coord, coord, coord, coord)
def test_scaling_round_trip(t, q1, q2, p1, p2):
    assume(math.hypot(q1, q2) > 1e-3)
    params = SystemParams(1.3, 0.7, 2.1, 4.0)
    st_ = scale_to_dimensionless(t, np.array([q1, q2]), np.array([p1, p2]), params)
    t2, q, p = scale_from_dimensionless(st_, params)
    assert np.isclose(t2, t, atol=1e-13) and np.allclose(q, [q1, q2], atol=1e-12)
    assert np.allclose(p, [p1, p2], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(coord, coord, coord, coord, st.floats(0, 3), st.floats(-7, 7), fval)
def test_frozen_flow_periodic(q1, q2, p1, p2, sigma, s, f):
    assume(math.hypot(q1, q2) > 1e-3)
    params = SystemParams.from_f(f)
    state = PhaseState(sigma, [q1, q2], [p1, p2])
    orbit = classify_orbit(state, sigma, params)
    assume(abs(np.hypot(*orbit.center) - orbit.radius) > 1e-3)
    one = frozen_flow(state, sigma, s, params)
    full = frozen_flow(state, sigma, s + 2 * math.pi, params)
    assert np.allclose(one.q, full.q, atol=1e-9) and np.allclose(one.p, full.p, atol=1e-9)
    # group property: flowing s then back returns to the start
    back = frozen_flow(one, sigma, -s, params)
    assert np.allclose(back.q, state.q, atol=1e-9) and np.allclose(back.p, state.p, atol=1e-9)
