import math

import numpy as np
import pytest

from abflux.actionangle import ActionAngleState, position
from abflux.averaging import (AveragedField, AveragedState, average_over_fast_angle,
                              averaged_hamiltonian, averaged_rhs, averaging_error_experiment,
                              energy_flux_residual, explicit_solution_V0, integrate_averaged,
                              params_for_f, quadrature_order)
from abflux.errors import DomainError, KinkCrossingError
from abflux.io import read_csv_columns, write_trajectory_csv
from abflux.model import SinusoidalPotential, SystemParams

from oracles import averaged_v0


def inv_q2(p1, p2, I1, I2):
    q = position(p1, p2, I1, I2)
    return 1.0 / np.sum(q * q, axis=-1)


def test_rhs_examples():
    f = 0.7
    fld = AveragedField(SystemParams.from_f(f))
    dpsi, dJ = averaged_rhs(AveragedState(0, 0.3, 2.0, 1.0), fld)
    assert np.allclose(dpsi, [0, 1]) and np.allclose(dJ, [f, 0])
    dpsi, dJ = averaged_rhs(AveragedState(0, 0.3, 1.0, 2.0), fld)
    assert np.allclose(dpsi, [0, 1]) and np.allclose(dJ, [0, -f])
    dpsi, dJ = averaged_rhs(AveragedState(0, 0.3, 1.0, 2.0), AveragedField(SystemParams(Phi0=0.0)))
    assert np.allclose(np.concatenate([dpsi, dJ]), [0, 1, 0, 0])
    with pytest.raises(KinkCrossingError):
        averaged_rhs(AveragedState(0, 0.3, 1.0, 1.0 + 1e-12), fld)


def test_quadrature_identities():
    g = average_over_fast_angle(inv_q2, 64)
    assert g(0.3, 3.5, 0.3) == pytest.approx(1 / (2 * 3.2), abs=1e-12)
    g2 = average_over_fast_angle(lambda p1, p2, I1, I2: np.sin(p1 + p2) * inv_q2(p1, p2, I1, I2), 64)
    assert abs(g2(0.3, 3.5, 0.3)) < 1e-12
    g3 = average_over_fast_angle(lambda p1, t, I1, I2: np.arctan2(0.5 * np.sin(t), 1 + 0.5 * np.cos(t)), 64)
    assert abs(g3(0, 0, 0)) < 1e-12
    # I = (2, 1): 64 nodes leave ~(1/2)^32; the decay bound picks enough nodes
    n = quadrature_order(2.0, 1.0)
    assert n > 64
    assert average_over_fast_angle(inv_q2, n)(0.3, 2.0, 1.0) == pytest.approx(0.5, abs=1e-13)
    with pytest.raises(DomainError):
        quadrature_order(1.0, 1.0)


def test_V_av_zero_and_derivatives():
    assert AveragedField(SystemParams.from_f(1.0)).V_av(0.3, 1.0, 2.0) == (0.0, 0.0, 0.0, 0.0)
    fld = AveragedField(SystemParams(1.0, 1.0, 2.0, 2 * math.pi, SinusoidalPotential(0.4)), N=128)
    h = 1e-5
    x = np.array([0.3, 1.2, 2.5])
    V, *grad = fld.V_av(*x)
    for i in range(3):
        d = np.zeros(3)
        d[i] = h
        fd = (fld.V_av(*(x + d))[0] - fld.V_av(*(x - d))[0]) / (2 * h)
        assert fd == pytest.approx(grad[i], abs=1e-9)


def test_K_av_examples():
    f = 0.6
    fld = AveragedField(SystemParams.from_f(f))
    assert averaged_hamiltonian(AveragedState(0, 0.3, 2.0, 1.0, 1.1), fld) == pytest.approx(1.0 - f * 0.3)
    assert averaged_hamiltonian(AveragedState(0, 0.3, 1.0, 2.0, 1.1), fld) == pytest.approx(2.0 + f * 1.1)
    free = AveragedField(SystemParams(Phi0=0.0))
    assert averaged_hamiltonian(AveragedState(0, 0.3, 1.0, 2.0, 1.1), free) == 2.0


@pytest.mark.parametrize("J", [(2.0, 1.2), (0.8, 2.3)])
def test_K_av_generates_rhs(J):
    fld = AveragedField(SystemParams(1.0, 1.0, 2.0, 3.0, SinusoidalPotential(0.4)), N=128)
    x = np.array([0.3, 1.1, *J])  # psi1, psi2, J1, J2
    h = 1e-5

    def K(v):
        return averaged_hamiltonian(AveragedState(0.0, v[0], v[2], v[3], v[1]), fld)

    grad = np.empty(4)
    for i in range(4):
        d = np.zeros(4)
        d[i] = h
        grad[i] = (K(x + d) - K(x - d)) / (2 * h)
    dpsi, dJ = averaged_rhs(AveragedState(0.0, x[0], x[2], x[3], x[1]), fld)
    assert np.allclose(dpsi, grad[2:], atol=1e-8)
    assert np.allclose(dJ, -grad[:2], atol=1e-8)


def test_explicit_solution_examples():
    st = explicit_solution_V0((1, 2), (0.3, 1.1), 1.0, 0.0)
    assert (st.J1, st.J2) == (1.0, 2.0)
    st = explicit_solution_V0((1, 2), (0.3, 1.1), 1.0, 2.0)
    assert (st.J1, st.J2) == (2.0, 1.0) and st.psi2 == pytest.approx(3.1)
    st = explicit_solution_V0((1, 2), (0.3, 1.1), 1.0, 1.0)
    assert (st.J1, st.J2) == (1.0, 1.0)
    J, _ = explicit_solution_V0((1, 2), (0.3, 1.1), 1.0, np.array([-10.0, -100.0]))
    assert np.all(J[:, 0] == 1.0) and np.allclose(J[:, 1], [12.0, 102.0])
    with pytest.raises(DomainError):
        explicit_solution_V0((1, 2), (0, 0), 0.0, 1.0)


def test_explicit_solution_vs_case_oracle(rng):
    for _ in range(50):
        J0 = rng.uniform(0.1, 5, 2)
        f = rng.uniform(0.1, 2)
        s = rng.uniform(-20, 20)
        st = explicit_solution_V0(J0, (0, 0), f, s)
        assert np.allclose([st.J1, st.J2], averaged_v0(J0[0], J0[1], f, s), atol=1e-13)


def test_solver_matches_explicit_solution(rng):
    worst = 0.0
    for _ in range(100):
        f = rng.uniform(0.1, 2.0)
        J0 = rng.uniform(0.1, 5.0, 2)
        psi0 = rng.uniform(-math.pi, math.pi, 2)
        tr = integrate_averaged(AveragedState(0.0, psi0[0], J0[0], J0[1], psi0[1]),
                                AveragedField(SystemParams.from_f(f)), (-10, 10), sample_step=0.5)
        J, psi = explicit_solution_V0(J0, psi0, f, tr.s)
        worst = max(worst, np.max(np.abs(tr.J - J)), np.max(np.abs(tr.psi - psi)))
        assert len(tr.crossings) <= 1 and not tr.flags
    assert worst < 1e-10


def _sinusoidal_run():
    # small coupling e/omega = 0.1 with f = 1
    params = SystemParams(1.0, 1.0, 10.0, 20 * math.pi, SinusoidalPotential(1 / 3))
    assert params.f == pytest.approx(1.0) and params.coupling == pytest.approx(0.1)
    fld = AveragedField(params)
    return params, integrate_averaged(AveragedState(0.0, 0.3, 1.0, 20.0, 1.1), fld, (0, 60))


def test_sinusoidal_qualitative():
    params, tr = _sinusoidal_run()
    assert len(tr.crossings) >= 1 and not tr.flags
    sc = tr.crossings[0]
    before = tr.s < sc
    after = tr.s > tr.crossings[-1]
    assert np.all(np.diff(tr.J[before, 1]) < 0)
    assert np.ptp(tr.J[after, 1]) < 1e-9 * 20
    assert np.all(tr.J[after, 0] > tr.J[after, 1])


def test_energy_flux_accounting():
    params, tr = _sinusoidal_run()
    for s1, s2 in ((0, 60), (5, 30), (40, 10)):
        assert abs(energy_flux_residual(tr, params.f, s1, s2)) < 1e-8


def test_error_scaling():
    base = SystemParams()
    tab = averaging_error_experiment(ActionAngleState(0.0, 0.3, 1.1, 1.0, 2.0), [0.02, 0.01], base)
    assert tab.f.tolist() == [0.02, 0.01]
    ratio = tab.err[0] / tab.err[1]
    assert 1.4 <= ratio <= 2.8
    assert tab.err[1] < tab.err[0]
    assert params_for_f(base, 0.01).f == pytest.approx(0.01)


def test_averaged_csv_export(tmp_path):
    tr = integrate_averaged(AveragedState(0.0, 0.3, 1.0, 2.0, 1.1),
                            AveragedField(SystemParams.from_f(1.0)), (-2, 3), sample_step=0.5)
    path = tmp_path / "avg.csv"
    write_trajectory_csv(path, tr)
    back = read_csv_columns(path)
    assert list(back) == ["s", "J1", "J2", "psi1", "psi2"]
    assert np.array_equal(back["J2"], tr.J[:, 1])
