"""Invariant suites run by ``abflux verify``.

Every check yields a record ``{suite, name, residual, threshold, passed}``.
Random points come from a fixed seed so reports are reproducible.
"""
from __future__ import annotations

import math
from typing import Callable, Dict, List

import numpy as np

from . import actionangle as aa
from . import asymptotics as asy
from . import averaging as avg
from .dynamics import IntegratorConfig, integrate, rhs_action_angle
from .frozen import classify_orbit, frozen_flow
from .model import PhaseState, SinusoidalPotential, SystemParams, bracket_residuals

SEED = 20240611
SUITES = ("brackets", "frozen", "actionangle", "averaging", "asymptotics")


def _check(suite, name, residual, threshold):
    residual = float(residual)
    return {"suite": suite, "name": name, "residual": residual, "threshold": threshold,
            "passed": bool(np.isfinite(residual) and residual < threshold)}


def random_phase_states(rng, n, s_range=(-3.0, 3.0), r_min=0.3):
    out = []
    while len(out) < n:
        q = rng.uniform(-3, 3, 2)
        if np.hypot(*q) < r_min:
            continue
        out.append(PhaseState(rng.uniform(*s_range), q, rng.uniform(-3, 3, 2)))
    return out


def random_aa_states(rng, n, s_range=(-3.0, 3.0)):
    out = []
    while len(out) < n:
        st = aa.ActionAngleState(rng.uniform(*s_range), *rng.uniform(-math.pi, math.pi, 2),
                                 *rng.uniform(0.2, 3.0, 2))
        if np.hypot(*aa.position(st.phi1, st.phi2, st.I1, st.I2)) > 0.2:
            out.append(st)
    return out


def suite_brackets() -> List[dict]:
    rng = np.random.default_rng(SEED)
    res = []
    for label, params in (("V=0", SystemParams.from_f(0.7)),
                          ("V=sin", SystemParams.from_f(0.7, potential=SinusoidalPotential(0.3)))):
        worst = 0.0
        for st in random_phase_states(rng, 100):
            worst = max(worst, max(abs(v) for v in bracket_residuals(st, params).values()))
        res.append(_check("brackets", f"velocity/center brackets ({label})", worst, 1e-6))
    return res


def suite_frozen() -> List[dict]:
    rng = np.random.default_rng(SEED + 1)
    params = SystemParams.from_f(0.0)
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-13, coordinate_mode="cartesian")
    worst, agree = 0.0, 0.0
    for st in random_phase_states(rng, 20, s_range=(0.0, 0.0)):
        orbit = classify_orbit(st, 0.0, params)
        if orbit.through_origin:
            continue
        grid = np.linspace(0.0, 2 * math.pi, 9)
        tr = integrate(st, (0.0, 2 * math.pi), params, cfg, samples=grid)
        for i, s in enumerate(grid):
            ex = frozen_flow(st, 0.0, s, params)
            worst = max(worst, np.max(np.abs(tr.q[i] - ex.q)), np.max(np.abs(tr.p[i] - ex.p)))
        # encircling orbits wind -2 pi per period
        dw = tr.winding[-1] - tr.winding[0]
        agree = max(agree, abs(dw - (-2 * math.pi if orbit.encircles_origin else 0.0)))
    return [_check("frozen", "integrated vs closed-form frozen flow", worst, 1e-9),
            _check("frozen", "winding per period matches topology", agree, 1e-8)]


def suite_actionangle() -> List[dict]:
    rng = np.random.default_rng(SEED + 2)
    params = SystemParams.from_f(0.8, potential=SinusoidalPotential(0.2))
    trip, canon = 0.0, 0.0
    for st in random_aa_states(rng, 100):
        back = aa.from_cartesian(aa.to_cartesian(st, params), params, reference=st)
        trip = max(trip, abs(back.phi1 - st.phi1), abs(back.phi2 - st.phi2),
                   abs(back.I1 - st.I1), abs(back.I2 - st.I2))
        canon = max(canon, aa.check_canonical(st, params)["max"])
    return [_check("actionangle", "round trip (phi, I) -> (q, p) -> (phi, I)", trip, 1e-12),
            _check("actionangle", "canonical bracket residuals", canon, 1e-6)]


QUAD_PAIRS = [(a, b) for a in (0.05, 0.3, 1.0, 2.0, 3.5) for b in (0.05, 0.3, 1.0, 2.0, 3.5)
              if abs(a - b) >= 0.1]


def quadrature_identities(N=64, pairs=QUAD_PAIRS) -> Dict[str, float]:
    """Worst residuals of three averaged identities.

    ``N`` is a node count or a callable ``(I1, I2) -> N``.
    """
    out = {"inverse_square": 0.0, "sin_over_q2": 0.0, "arg_average": 0.0}

    def inv_q2(p1, p2, I1, I2):
        q = aa.position(p1, p2, I1, I2)
        return 1.0 / np.sum(q * q, axis=-1)

    def sin_q2(p1, p2, I1, I2):
        return np.sin(p1 + p2) * inv_q2(p1, p2, I1, I2)

    for I1, I2 in pairs:
        n = N(I1, I2) if callable(N) else N
        g1 = avg.average_over_fast_angle(inv_q2, n)
        g2 = avg.average_over_fast_angle(sin_q2, n)
        exact = 1.0 / (2 * abs(I1 - I2))
        for p1 in (0.0, 0.3, 2.5):
            out["inverse_square"] = max(out["inverse_square"], abs(g1(p1, I1, I2) - exact))
            out["sin_over_q2"] = max(out["sin_over_q2"], abs(g2(p1, I1, I2)))
    n = 64 if callable(N) else N
    for a in (0.0, 0.25, 0.5):
        g3 = avg.average_over_fast_angle(
            lambda p1, t, I1, I2, a=a: np.arctan2(a * np.sin(t), 1 + a * np.cos(t)), n)
        out["arg_average"] = max(out["arg_average"], abs(g3(0.0, 0.0, 0.0)))
    return out


def _resolved_pairs(N=64, tol=1e-13):
    return [p for p in QUAD_PAIRS if avg.quadrature_order(*p, tol=tol) <= N]


def suite_averaging(scaling: bool = True) -> List[dict]:
    res = [_check("averaging", f"quadrature identity {k} (N=64, resolved pairs)", v, 1e-12)
           for k, v in quadrature_identities(64, _resolved_pairs()).items()]
    res += [_check("averaging", f"quadrature identity {k} (N from decay bound)", v, 1e-12)
            for k, v in quadrature_identities(avg.quadrature_order).items()]
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    for _ in range(20):
        f = rng.uniform(0.1, 2.0)
        fld = avg.AveragedField(SystemParams.from_f(f))
        J0 = rng.uniform(0.1, 5.0, 2)
        psi0 = rng.uniform(-math.pi, math.pi, 2)
        tr = avg.integrate_averaged(avg.AveragedState(0.0, psi0[0], J0[0], J0[1], psi0[1]), fld,
                                    (-20, 20), sample_step=0.25)
        J, psi = avg.explicit_solution_V0(J0, psi0, f, tr.s)
        worst = max(worst, np.max(np.abs(tr.J - J)), np.max(np.abs(tr.psi - psi)))
    res.append(_check("averaging", "averaged solver vs explicit V=0 solution", worst, 1e-10))
    if scaling:
        tab = avg.averaging_error_experiment(aa.ActionAngleState(0.0, 0.3, 1.1, 1.0, 2.0),
                                             [0.02, 0.01, 0.005], SystemParams())
        res.append(_check("averaging", "error-scaling exponent |p - 1|", abs(tab.exponent - 1.0), 0.3))
    return res


def suite_asymptotics() -> List[dict]:
    res = []
    s = np.linspace(0.5, 1000.0, 4001)
    w = asy.bessel("J", 1, s) * asy.bessel("Y", 0, s) - asy.bessel("J", 0, s) * asy.bessel("Y", 1, s)
    wr = np.max(np.abs(w * math.pi * s / 2 - 1.0))
    res.append(_check("asymptotics", "Bessel Wronskian (relative)", wr, 1e-10))

    sg = np.linspace(1.0, 100.0, 2001)
    hres = 0.0
    for kind in ("J", "Y"):
        x1, x2 = asy.homogeneous_solution(kind, sg)
        # x1' = x1/s - x2 and x2' = x1 with analytic derivatives
        d1 = asy.bessel(kind, 0, sg) - sg * asy.bessel(kind, 1, sg)
        d2 = sg * asy.bessel(kind, 0, sg)
        hres = max(hres, np.max(np.abs(d1 - (x1 / sg - x2))), np.max(np.abs(d2 - x1)))
    res.append(_check("asymptotics", "homogeneous solutions of the x-system", hres, 1e-8))

    rng = np.random.default_rng(SEED + 4)
    params = SystemParams.from_f(0.9)
    cons = 0.0
    for st in random_aa_states(rng, 100):
        s0 = st.s - (st.I1 - st.I2) / params.f
        dphi, dI = rhs_action_angle(st, params)
        dpsi, dJ = asy.reduced_rhs(asy.ReducedState(st.s, st.I1 + st.I2, st.phi1 + st.phi2),
                                   params.f, s0)
        cons = max(cons, abs(dpsi - dphi.sum()), abs(dJ - dI.sum()))
    res.append(_check("asymptotics", "reduced system vs full action-angle field", cons, 1e-10))

    c1, c2 = asy.constants_from_amplitude(2.0, 0.4)
    pic = asy.picard_solve(c1, c2, 1.0, 10.0, 100.0)
    S = pic.S_max
    end = [c1 * S * asy.bessel("J", 0, S) + c2 * S * asy.bessel("Y", 0, S),
           c1 * S * asy.bessel("J", 1, S) + c2 * S * asy.bessel("Y", 1, S)]
    ode = asy.integrate_x_system(end, 1.0, S, pic.s)
    res.append(_check("asymptotics", "Picard vs ODE x-solution (sup norm)",
                      np.max(np.abs(ode - pic.x)), 1e-6))
    return res


_SUITES: Dict[str, Callable[[], List[dict]]] = {
    "brackets": suite_brackets, "frozen": suite_frozen, "actionangle": suite_actionangle,
    "averaging": suite_averaging, "asymptotics": suite_asymptotics,
}


def run_suite(name: str) -> List[dict]:
    if name == "all":
        return [r for n in SUITES for r in _SUITES[n]()]
    if name not in _SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    return _SUITES[name]()
