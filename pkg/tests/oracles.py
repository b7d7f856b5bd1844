"""Independent reference implementations used as test oracles.

Nothing here imports the package's numerical code: Hamilton's equations are
derived symbolically from the Hamiltonian, Bessel values come from mpmath
and from a direct power series, and integration uses scipy's DOP853.
"""
from __future__ import annotations

import math
from functools import lru_cache

import mpmath
import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp


@lru_cache(maxsize=None)
def _hamilton_equations(f: float, kappa: float, lam: float, alpha: float):
    """Lambdified ``(q', p')`` and ``H`` for ``H = 1/2 (p - a)^2``.

    ``a = 1/2 q_perp - s E`` with ``E = f q_perp/|q|^2 - kappa lam grad V(lam q)``
    and ``V(x, y) = alpha (sin x + sin y)``.
    """
    s, q1, q2, p1, p2 = sp.symbols("s q1 q2 p1 p2", real=True)
    r2 = q1 ** 2 + q2 ** 2
    X, Y = lam * q1, lam * q2
    V = alpha * (sp.sin(X) + sp.sin(Y))
    gx, gy = sp.diff(V, q1) / lam, sp.diff(V, q2) / lam  # physical gradient at lam q
    E1 = f * (-q2) / r2 - kappa * lam * gx
    E2 = f * q1 / r2 - kappa * lam * gy
    a1 = -q2 / 2 - s * E1
    a2 = q1 / 2 - s * E2
    H = ((p1 - a1) ** 2 + (p2 - a2) ** 2) / 2
    rhs = [sp.diff(H, p1), sp.diff(H, p2), -sp.diff(H, q1), -sp.diff(H, q2)]
    return sp.lambdify((s, q1, q2, p1, p2), rhs, "math"), sp.lambdify((s, q1, q2, p1, p2), H, "math")


def reference_trajectory(s0, q, p, s_eval, f, kappa=0.0, lam=1.0, alpha=0.0,
                         rtol=1e-12, atol=1e-12):
    """Integrate Hamilton's equations in ``(q, p)`` from ``s0``; returns array ``(n, 4)``."""
    rhs, _ = _hamilton_equations(float(f), float(kappa), float(lam), float(alpha))
    s_eval = np.atleast_1d(np.asarray(s_eval, dtype=float))
    out = np.empty((len(s_eval), 4))
    y0 = [q[0], q[1], p[0], p[1]]
    for mask, end in ((s_eval >= s0, s_eval.max()), (s_eval < s0, s_eval.min())):
        if not mask.any():
            continue
        if end == s0:
            out[mask] = y0
            continue
        sol = solve_ivp(lambda t, y: rhs(t, *y), (s0, end), y0, method="DOP853",
                        rtol=rtol, atol=atol, dense_output=True)
        assert sol.success, sol.message
        out[mask] = sol.sol(s_eval[mask]).T
    return out


def hamiltonian(s, q, p, f, kappa=0.0, lam=1.0, alpha=0.0):
    _, H = _hamilton_equations(float(f), float(kappa), float(lam), float(alpha))
    return H(s, q[0], q[1], p[0], p[1])


def landau_circle(q, v, s):
    """Free Landau motion in unit field: ``v' = -v_perp`` (clockwise rotation)."""
    q = np.asarray(q, float)
    v = np.asarray(v, float)
    c, sn = math.cos(s), math.sin(s)
    # v(s) = rotation by -s of v; q(s) = q + integral
    rot = np.array([[c, sn], [-sn, c]])
    v_s = rot @ v
    vp = np.array([-v[1], v[0]])
    q_s = q - vp + np.array([-v_s[1], v_s[0]])
    return q_s, v_s


# -- Bessel oracles ---------------------------------------------------------

def bessel_mp(kind: str, order: int, s: float, dps: int = 40) -> float:
    with mpmath.workdps(dps):
        fn = mpmath.besselj if kind == "J" else mpmath.bessely
        return float(fn(order, s))


def bessel_series_J(order: int, s: float, dps: int = 60) -> float:
    """``J_n(s) = sum_k (-1)^k (s/2)^(2k+n) / (k! (k+n)!)`` summed in high precision."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(s) / 2
        total = mpmath.mpf(0)
        k = 0
        while True:
            term = (-1) ** k * x ** (2 * k + order) / (mpmath.factorial(k) * mpmath.factorial(k + order))
            total += term
            if k > 5 and abs(term) < mpmath.mpf(10) ** (-dps + 5):
                break
            k += 1
        return float(total)


def bessel_series_Y0(s: float, dps: int = 60) -> float:
    """``Y_0(s) = 2/pi (ln(s/2) + gamma) J_0(s) + 2/pi sum_k (-1)^(k+1) H_k (s/2)^(2k)/(k!)^2``."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(s) / 2
        J0 = mpmath.mpf(bessel_series_J(0, s, dps))
        total = mpmath.mpf(0)
        Hk = mpmath.mpf(0)
        k = 1
        while True:
            Hk += mpmath.mpf(1) / k
            term = (-1) ** (k + 1) * Hk * x ** (2 * k) / mpmath.factorial(k) ** 2
            total += term
            if k > 5 and abs(term) < mpmath.mpf(10) ** (-dps + 5):
                break
            k += 1
        return float(2 / mpmath.pi * ((mpmath.log(x) + mpmath.euler) * J0 + total))


def first_zero_J0() -> float:
    """Bisection on the power series between 2 and 3."""
    a, b = 2.0, 3.0
    fa = bessel_series_J(0, a)
    for _ in range(80):
        m = 0.5 * (a + b)
        fm = bessel_series_J(0, m)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


# -- averaged V=0 solution by hand ------------------------------------------

def averaged_v0(J10, J20, f, s):
    """Averaged V=0 actions by cases: the gap J1 - J2 grows at rate f, and
    whichever action is smaller at the crossing stays frozen on its side."""
    s_hit = (J20 - J10) / f
    m = min(J10, J20)  # common value at the crossing
    if s >= s_hit:
        return m + f * (s - s_hit), m
    return m, m - f * (s - s_hit)
