import math

import numpy as np
import pytest

from abflux.errors import InvalidParameterError, SingularityError
from abflux.model import (PhaseState, SinusoidalPotential, SystemParams, TabulatedPotential,
                          ZeroPotential, bracket_residuals, center_identity_residual,
                          electric_field, gauge_potential, observables, potential_from_dict,
                          scale_from_dimensionless, scale_to_dimensionless, unwrap_to)


@pytest.mark.parametrize("e,m,B,Phi0,omega,lam,f", [
    (1, 1, 1, 2 * math.pi, 1.0, 1.0, 1.0),
    (2, 4, 3, 0.0, 1.5, 1 / math.sqrt(6), 0.0),
    (1, 1, 100, 2 * math.pi, 100.0, 0.1, 0.01),
])
def test_derived_parameters(e, m, B, Phi0, omega, lam, f):
    p = SystemParams(e, m, B, Phi0)
    assert p.omega == pytest.approx(omega, rel=1e-15)
    assert p.lam == pytest.approx(lam, rel=1e-15)
    assert p.f == pytest.approx(f, rel=1e-15, abs=1e-300)


def test_sign_of_f_follows_flux():
    assert SystemParams(Phi0=-1.0).f < 0


@pytest.mark.parametrize("bad", [dict(e=0), dict(m=-1), dict(B=0), dict(B=float("nan"))])
def test_invalid_parameters(bad):
    with pytest.raises(InvalidParameterError):
        SystemParams(**bad)


def test_from_f_roundtrip():
    p = SystemParams.from_f(0.37, e=2, m=3, B=5)
    assert p.f == pytest.approx(0.37, rel=1e-14)


def test_scaling_examples():
    p1 = SystemParams()
    st = scale_to_dimensionless(0.0, (1, 0), (0, 0), p1)
    assert st.s == 0 and np.array_equal(st.q, [1, 0]) and np.array_equal(st.p, [0, 0])
    # omega = 2, lam = 3  <=>  e B = 1/9, e B/m = 2
    p2 = SystemParams(e=1.0, m=1 / 18, B=1 / 9)
    assert p2.omega == pytest.approx(2) and p2.lam == pytest.approx(3)
    st = scale_to_dimensionless(2.0, (3, 0), (0, 5), p2)
    assert st.s == pytest.approx(4) and np.allclose(st.q, [1, 0]) and np.allclose(st.p, [0, 15])


def test_scaling_roundtrip(rng):
    p = SystemParams(e=1.3, m=0.7, B=2.2)
    for _ in range(20):
        t, q, pp = rng.normal(), rng.normal(size=2), rng.normal(size=2)
        back = scale_from_dimensionless(scale_to_dimensionless(t, q, pp, p), p)
        assert abs(back[0] - t) < 1e-14
        assert np.allclose(back[1], q, atol=1e-14) and np.allclose(back[2], pp, atol=1e-14)


def test_scaling_rejects_origin():
    with pytest.raises(SingularityError):
        scale_to_dimensionless(0.0, (0, 0), (1, 0), SystemParams())


def test_electric_field_examples():
    p = SystemParams.from_f(1.0)
    assert np.allclose(electric_field(0.0, [1, 0], p), [0, 1], atol=1e-15)
    assert np.allclose(electric_field(0.0, [0, 2], p), [-0.5, 0], atol=1e-15)
    assert np.array_equal(electric_field(0.0, [0.3, -2], SystemParams(Phi0=0.0)), [0, 0])
    with pytest.raises(SingularityError):
        electric_field(0.0, [1e-9, 0], p)


def test_flux_circulation_and_curl():
    p = SystemParams.from_f(0.8, potential=SinusoidalPotential(0.4))
    t = np.linspace(0, 2 * math.pi, 2001)[:-1]
    dt = t[1] - t[0]

    def circulation(center, r):
        pts = np.stack([center[0] + r * np.cos(t), center[1] + r * np.sin(t)], axis=-1)
        tang = np.stack([-r * np.sin(t), r * np.cos(t)], axis=-1)
        return float(np.sum(np.sum(electric_field(0.0, pts, p) * tang, axis=-1)) * dt)

    assert circulation((0, 0), 1.3) == pytest.approx(2 * math.pi * p.f, rel=1e-12)
    assert abs(circulation((3, 1), 0.5)) < 1e-12
    h = 1e-5
    for q in ([0.5, 0.2], [-2.0, 1.5], [3.0, -4.0]):
        q = np.array(q)
        dE2dx = (electric_field(0, q + [h, 0], p)[1] - electric_field(0, q - [h, 0], p)[1]) / (2 * h)
        dE1dy = (electric_field(0, q + [0, h], p)[0] - electric_field(0, q - [0, h], p)[0]) / (2 * h)
        assert abs(dE2dx - dE1dy) < 1e-6


def test_gauge_time_derivative_is_field():
    p = SystemParams.from_f(0.6, potential=SinusoidalPotential(0.3))
    q = np.array([0.7, -1.2])
    h = 1e-6
    dads = (gauge_potential(1.0 + h, q, p) - gauge_potential(1.0 - h, q, p)) / (2 * h)
    assert np.allclose(-dads, electric_field(1.0, q, p), atol=1e-9)
    assert np.array_equal(gauge_potential(0.0, q, p), [0, 0])


def test_observables_examples():
    p = SystemParams(Phi0=0.0)
    ob = observables(PhaseState(0.0, [1, 0], [0, 1]), p)
    assert np.allclose(ob.v, [0, 0.5]) and np.allclose(ob.c, [1.5, 0])
    assert ob.H == pytest.approx(1 / 8) and ob.L == pytest.approx(1)
    ob = observables(PhaseState(0.0, [2, 0], [0, 1]), p)
    assert np.allclose(ob.v, 0) and ob.H == 0


def test_center_identity(rng):
    for params in (SystemParams(Phi0=0.0), SystemParams.from_f(1.0),
                   SystemParams.from_f(0.3, potential=SinusoidalPotential(0.5))):
        for _ in range(50):
            r = rng.uniform(0.1, 10)
            a = rng.uniform(0, 2 * math.pi)
            st = PhaseState(rng.uniform(-5, 5), [r * math.cos(a), r * math.sin(a)],
                            rng.uniform(-7, 7, 2))
            c2 = float(np.sum(observables(st, params).c ** 2))
            assert abs(center_identity_residual(st, params)) < 1e-10 * (1 + c2)


def test_brackets_random(rng):
    p = SystemParams.from_f(0.9, potential=SinusoidalPotential(0.25))
    for _ in range(100):
        q = rng.uniform(-3, 3, 2)
        if np.hypot(*q) < 0.3:
            continue
        st = PhaseState(rng.uniform(-2, 2), q, rng.uniform(-3, 3, 2))
        assert max(abs(v) for v in bracket_residuals(st, p).values()) < 1e-6


def test_phase_state_winding_validation():
    st = PhaseState(0.0, [-1, 0], [0, 0], winding=3 * math.pi)
    assert st.winding == 3 * math.pi
    with pytest.raises(InvalidParameterError):
        PhaseState(0.0, [1, 0], [0, 0], winding=1.0)
    with pytest.raises(SingularityError):
        PhaseState(0.0, [0, 0], [0, 0])


def test_unwrap_to():
    assert unwrap_to(0.1, 4 * math.pi) == pytest.approx(4 * math.pi + 0.1)
    assert unwrap_to(3.0, -3.0) == pytest.approx(3.0 - 2 * math.pi)


def test_zero_potential_exact():
    z = ZeroPotential()
    assert z.value(1.2, 3.0) == 0 and z.gradient(1.0, 2.0) == (0, 0) and z.torque(1, 1) == 0


def test_sinusoidal_gradient_fd():
    V = SinusoidalPotential(0.7, 1.3, 0.4)
    h = 1e-6
    for x, y in ((0.1, 0.2), (-2.0, 5.0)):
        gx, gy = V.gradient(x, y)
        assert gx == pytest.approx((V.value(x + h, y) - V.value(x - h, y)) / (2 * h), abs=1e-8)
        assert gy == pytest.approx((V.value(x, y + h) - V.value(x, y - h)) / (2 * h), abs=1e-8)
        assert V.torque(x, y) == pytest.approx(x * gy - y * gx)


def test_tabulated_matches_sinusoid():
    n = 81
    g = np.linspace(0, 2 * math.pi, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    tab = TabulatedPotential(g, g, 0.5 * (np.sin(X) + np.sin(Y)))
    ref = SinusoidalPotential(0.5)
    pts = np.random.default_rng(1).uniform(-10, 10, (50, 2))
    assert np.max(np.abs(tab.value(pts[:, 0], pts[:, 1]) - ref.value(pts[:, 0], pts[:, 1]))) < 1e-5
    gx, gy = tab.gradient(pts[:, 0], pts[:, 1])
    rx, ry = ref.gradient(pts[:, 0], pts[:, 1])
    assert np.max(np.abs(gx - rx)) < 1e-3 and np.max(np.abs(gy - ry)) < 1e-3


def test_potential_dict_roundtrip():
    for pot in (ZeroPotential(), SinusoidalPotential(0.2, 2.0, 3.0)):
        assert potential_from_dict(pot.to_dict()) == pot
    with pytest.raises(InvalidParameterError):
        potential_from_dict({"kind": "cubic"})


def test_params_dict_roundtrip():
    p = SystemParams(1.5, 2.0, 3.0, 0.7, SinusoidalPotential(0.1))
    assert SystemParams.from_dict(p.to_dict()) == p
