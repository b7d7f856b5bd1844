import math

import numpy as np
import pytest

from abflux.actionangle import ActionAngleState, from_cartesian, to_cartesian
from abflux.dynamics import (CARTESIAN, HITTING, SINGULAR, IntegratorConfig, Trajectory,
                             cartesian_vector_field, detect_hitting_time, integrate,
                             rhs_action_angle, rhs_cartesian)
from abflux.errors import InvalidParameterError, NoHittingError, SingularityError
from abflux.model import PhaseState, SinusoidalPotential, SystemParams

from oracles import hamiltonian, reference_trajectory

TIGHT = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12)


def test_cartesian_rhs_examples():
    free = SystemParams(Phi0=0.0)
    # q' = (1, 0): p = v + q_perp/2
    st = PhaseState(0.0, [1, 0], np.array([1, 0]) + 0.5 * np.array([0, 1]))
    v, acc = rhs_cartesian(st, free)
    assert np.allclose(v, [1, 0]) and np.allclose(acc, [0, -1])
    st = PhaseState(0.0, [1, 0], [0, 0.5])  # v = 0
    _, acc = rhs_cartesian(st, SystemParams.from_f(1.0))
    assert np.allclose(acc, [0, 1])
    assert np.allclose(cartesian_vector_field(0.0, [1, 0, 0, 0], SystemParams.from_f(1.0)), [0, 0, 0, 1])


def test_action_angle_rhs_unperturbed():
    dphi, dI = rhs_action_angle(ActionAngleState(0, 0.3, 1.1, 2, 1), SystemParams(Phi0=0.0))
    assert np.allclose(dphi, [0, 1], atol=1e-15) and np.allclose(dI, 0, atol=1e-15)


def test_action_angle_rhs_displayed_system(rng):
    f = 0.8
    p = SystemParams.from_f(f)
    for _ in range(50):
        p1, p2 = rng.uniform(-3, 3, 2)
        I1, I2 = rng.uniform(0.2, 3, 2)
        D = 2 * (I1 + I2 + 2 * math.sqrt(I1 * I2) * math.cos(p1 + p2))
        if D < 0.1:
            continue
        S = math.sin(p1 + p2)
        dphi, dI = rhs_action_angle(ActionAngleState(0, p1, p2, I1, I2), p)
        assert dphi[0] == pytest.approx(-f * S / D * math.sqrt(I2 / I1), abs=1e-12)
        assert dphi[1] == pytest.approx(1 + f * S / D * math.sqrt(I1 / I2), abs=1e-12)
        assert dI[0] == pytest.approx(f * (I1 - I2) / D + f / 2, abs=1e-12)
        assert dI[1] == pytest.approx(f * (I1 - I2) / D - f / 2, abs=1e-12)
        assert dI[0] - dI[1] == pytest.approx(f, abs=1e-13)


def test_action_angle_rhs_is_pushforward(rng):
    params = SystemParams.from_f(0.6, potential=SinusoidalPotential(0.3))
    h = 1e-6
    for _ in range(100):
        aa = ActionAngleState(rng.uniform(-2, 2), *rng.uniform(-math.pi, math.pi, 2),
                              *rng.uniform(0.3, 3, 2))
        st = to_cartesian(aa, params)
        if np.hypot(*st.q) < 0.3:
            continue
        dphi, dI = rhs_action_angle(aa, params)
        # Hamilton's equations in (q, p) from the symbolic oracle, then d/dh of the inverse map
        from oracles import _hamilton_equations
        rhs, _ = _hamilton_equations(params.f, params.coupling, params.lam, 0.3)
        dq1, dq2, dp1, dp2 = rhs(aa.s, *st.q, *st.p)

        def coords(eps):
            moved = PhaseState(aa.s + eps, st.q + eps * np.array([dq1, dq2]),
                               st.p + eps * np.array([dp1, dp2]))
            b = from_cartesian(moved, params, reference=aa)
            return np.array([b.phi1, b.phi2, b.I1, b.I2])

        fd = (coords(h) - coords(-h)) / (2 * h)
        assert np.allclose(fd, np.concatenate([dphi, dI]), atol=1e-6)


def test_gap_law_and_K():
    p = SystemParams.from_f(1.0)
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.0, 2.0), (-50, 50), p, TIGHT)
    gap = tr.I1 - tr.I2 + 1
    assert np.max(np.abs(gap - tr.s)) < 1e-8
    assert np.max(np.abs(tr.K - tr.K[0])) < 1e-8
    assert np.all(np.diff(tr.s) > 0)
    h = detect_hitting_time(tr)
    assert h.linear_law and h.s0 == pytest.approx(1.0, abs=1e-8)
    assert any(e.kind == HITTING and abs(e.s - 1.0) < 1e-8 for e in tr.events)


def test_hitting_time_examples():
    p = SystemParams.from_f(1.0)
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.5, 1.5), (-2, 2), p, TIGHT)
    assert detect_hitting_time(tr).s0 == pytest.approx(0.0, abs=1e-9)
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.0, 6.0), (0, 8), p, TIGHT)
    assert detect_hitting_time(tr).s0 == pytest.approx(5.0, abs=1e-8)
    gap = tr.I1 - tr.I2
    i = np.nonzero(np.diff(np.sign(gap)))[0][0]
    assert tr.s[i] <= 5.0 <= tr.s[i + 1]
    with pytest.raises(NoHittingError):
        detect_hitting_time(integrate(ActionAngleState(0, 0.3, 1.1, 1, 2), (0, 1), SystemParams(Phi0=0.0)))


def test_hitting_time_with_potential():
    p = SystemParams.from_f(1.0, potential=SinusoidalPotential(0.05))
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.0, 3.0), (0, 6), p, TIGHT)
    h = detect_hitting_time(tr)
    assert not h.linear_law and 1.0 < h.s0 < 3.0
    k = np.searchsorted(tr.s, h.s0)
    assert (tr.I1 - tr.I2)[k - 1] < 0 < (tr.I1 - tr.I2)[k]


def test_against_symbolic_oracle():
    params = SystemParams.from_f(0.7, potential=SinusoidalPotential(0.3))
    st = PhaseState(0.0, [1.2, -0.4], [0.3, 0.9])
    s = np.linspace(-6, 6, 25)
    tr = integrate(st, (-6, 6), params, TIGHT, samples=s)
    ref = reference_trajectory(0.0, st.q, st.p, s, params.f, params.coupling, params.lam, 0.3)
    assert np.allclose(tr.q, ref[:, :2], atol=1e-7) and np.allclose(tr.p, ref[:, 2:], atol=1e-7)
    H = [hamiltonian(si, qi, pi, params.f, params.coupling, params.lam, 0.3)
         for si, qi, pi in zip(s, tr.q, tr.p)]
    assert np.allclose(H, tr.H, atol=1e-9)


def test_coordinate_mode_independence():
    params = SystemParams.from_f(0.5, potential=SinusoidalPotential(0.2))
    init = ActionAngleState(0, 0.3, 1.1, 1.0, 2.0)
    cfg_a = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-12)
    cfg_c = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-12, coordinate_mode=CARTESIAN)
    a = integrate(init, (0, 20), params, cfg_a)
    c = integrate(init, (0, 20), params, cfg_c)
    assert np.max(np.abs(a.q - c.q)) < 10 * 1e-11 * 20 * 10
    assert np.max(np.abs(a.I - c.I)) < 1e-8


def test_sample_representations_agree():
    params = SystemParams.from_f(0.5, potential=SinusoidalPotential(0.2))
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.0, 2.0), (0, 10), params, TIGHT)
    for i in range(0, len(tr), 17):
        st = to_cartesian(tr.action_angle_state(i), params)
        assert np.allclose(st.q, tr.q[i], atol=1e-10) and np.allclose(st.p, tr.p[i], atol=1e-10)


def test_zero_span_and_read_only():
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.0, 2.0), (0, 0), SystemParams())
    assert isinstance(tr, Trajectory) and len(tr) == 0
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.0, 2.0), (0, 1), SystemParams())
    with pytest.raises(ValueError):
        tr.s[0] = 5.0


def test_truncation_at_origin():
    # starting 1e-7 from the puncture with the flux term active: steps underflow
    tr = integrate(PhaseState(1.0, [1e-7, 0], [0, 0]), (1.0, 2.0), SystemParams.from_f(1.0))
    assert tr.truncated
    assert [e.kind for e in tr.events] == [SINGULAR]
    assert tr.s[-1] < 2.0
    with pytest.raises(SingularityError):
        integrate(PhaseState(1.0, [1e-9, 0], [0, 0]), (1.0, 2.0), SystemParams.from_f(1.0))


def test_flux_rate_rejected():
    p = SystemParams(flux_rate=lambda t: 1.0)
    with pytest.raises(InvalidParameterError):
        integrate(ActionAngleState(0, 0.3, 1.1, 1, 2), (0, 1), p)


def test_torque_bounds_recorded():
    params = SystemParams.from_f(1.0, potential=SinusoidalPotential(0.02))
    tr = integrate(ActionAngleState(0, 0.3, 1.1, 1.0, 2.0), (0, 10), params, record_steps=True)
    st = tr.steps
    c = st["torque_ratio"].max()
    assert c < 1
    assert np.all(st["gap_rate"] >= params.f * (1 - c) - 1e-12)
    assert np.all(st["gap_rate"] <= params.f * (1 + c) + 1e-12)
