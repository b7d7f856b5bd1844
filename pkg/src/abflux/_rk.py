"""Dormand-Prince 5(4) stepper with PI step control and 4th-order dense output.

Works on plain lists of floats: the systems here have at most five
components, where numpy's per-call overhead would dominate.
"""
from __future__ import annotations

import math

from .errors import SingularityError, StepSizeUnderflow

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# error weights (5th minus 4th order)
E1, E3, E4, E5, E6, E7 = (-71 / 57600, 71 / 16695, -71 / 1920, 17253 / 339200,
                          -22 / 525, 1 / 40)
# Shampine's continuous extension, rows = stages 1..7, columns = theta^1..theta^4
P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 10.0
BETA = 0.04  # PI controller (Hairer's DOPRI5 default)
ALPHA = 0.2 - 0.75 * BETA


class DormandPrince:
    """Adaptive integrator for ``y' = fun(t, y)`` on lists of floats.

    Parameters
    ----------
    fun : callable
        ``fun(t, y) -> list``; may raise :class:`SingularityError`, which is
        handled as a step rejection.
    step_cap : callable, optional
        ``step_cap(t, y, dydt) -> float``, an extra state-dependent bound on
        ``|h|`` applied before each attempt.
    accept : callable, optional
        ``accept(y_old, y_new) -> bool``; a False return rejects the step and
        halves ``h``.
    """

    def __init__(self, fun, t0, y0, t_bound, rtol=1e-10, atol=1e-12, max_step=math.inf,
                 first_step=None, step_cap=None, accept=None, h_min=None):
        self.fun = fun
        self.t = float(t0)
        self.y = [float(v) for v in y0]
        self.t_bound = float(t_bound)
        self.direction = 1.0 if t_bound >= t0 else -1.0
        self.rtol, self.atol = rtol, atol
        self.max_step = max_step
        self.step_cap = step_cap
        self.accept = accept
        self.h_min = h_min
        self.n = len(self.y)
        self.f = list(fun(self.t, self.y))
        self.nfev = 1
        self.naccept = 0
        self.nreject = 0
        self.err_old = 1e-4
        self.h_abs = abs(first_step) if first_step else self._initial_step()
        self.t_old = None
        self.y_old = None
        self.K = None
        self.h_last = 0.0

    @property
    def finished(self) -> bool:
        return self.direction * (self.t - self.t_bound) >= 0.0

    def _norm(self, err, y0, y1):
        s = 0.0
        for e, a, b in zip(err, y0, y1):
            sc = self.atol + self.rtol * max(abs(a), abs(b))
            s += (e / sc) ** 2
        return math.sqrt(s / self.n)

    def _initial_step(self):
        y0, f0 = self.y, self.f
        sc = [self.atol + self.rtol * abs(v) for v in y0]
        d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(y0, sc)) / self.n)
        d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(f0, sc)) / self.n)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, self.max_step, abs(self.t_bound - self.t) or 1.0)
        try:
            y1 = [a + self.direction * h0 * b for a, b in zip(y0, f0)]
            f1 = self.fun(self.t + self.direction * h0, y1)
            self.nfev += 1
            d2 = math.sqrt(sum(((b - a) / s) ** 2 for a, b, s in zip(f0, f1, sc)) / self.n) / h0
        except SingularityError:
            return h0 * 0.01
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, self.max_step)

    def step(self):
        """Take one accepted step; raises :class:`StepSizeUnderflow` on failure."""
        t, y, f0 = self.t, self.y, self.f
        d = self.direction
        h_min = self.h_min if self.h_min is not None else 10 * math.ulp(max(1.0, abs(t)))
        h_abs = min(self.h_abs, self.max_step)
        if self.step_cap is not None:
            h_abs = min(h_abs, self.step_cap(t, y, f0))
        fun = self.fun
        while True:
            if h_abs < h_min:
                raise StepSizeUnderflow(f"step size underflow at t={t!r}")
            h = d * h_abs
            t_new = t + h
            if d * (t_new - self.t_bound) > 0:
                t_new = self.t_bound
                h = t_new - t
                h_abs = abs(h)
            try:
                k1 = f0
                k2 = fun(t + C2 * h, [a + h * A21 * b1 for a, b1 in zip(y, k1)])
                k3 = fun(t + C3 * h, [a + h * (A31 * b1 + A32 * b2)
                                      for a, b1, b2 in zip(y, k1, k2)])
                k4 = fun(t + C4 * h, [a + h * (A41 * b1 + A42 * b2 + A43 * b3)
                                      for a, b1, b2, b3 in zip(y, k1, k2, k3)])
                k5 = fun(t + C5 * h, [a + h * (A51 * b1 + A52 * b2 + A53 * b3 + A54 * b4)
                                      for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)])
                k6 = fun(t + h, [a + h * (A61 * b1 + A62 * b2 + A63 * b3 + A64 * b4 + A65 * b5)
                                 for a, b1, b2, b3, b4, b5 in zip(y, k1, k2, k3, k4, k5)])
                y_new = [a + h * (B1 * b1 + B3 * b3 + B4 * b4 + B5 * b5 + B6 * b6)
                         for a, b1, b3, b4, b5, b6 in zip(y, k1, k3, k4, k5, k6)]
                k7 = fun(t_new, y_new)
            except SingularityError:
                self.nfev += 6
                self.nreject += 1
                h_abs *= 0.25
                continue
            self.nfev += 6
            err = [h * (E1 * b1 + E3 * b3 + E4 * b4 + E5 * b5 + E6 * b6 + E7 * b7)
                   for b1, b3, b4, b5, b6, b7 in zip(k1, k3, k4, k5, k6, k7)]
            en = self._norm(err, y, y_new)
            if en <= 1.0 and (self.accept is None or self.accept(y, y_new)):
                break
            self.nreject += 1
            if en > 1.0:
                h_abs *= max(FAC_MIN, SAFETY * en ** (-1 / 5))
            else:
                h_abs *= 0.5

        # PI controller for the next step
        if en == 0.0:
            fac = FAC_MAX
        else:
            fac = SAFETY * en ** (-ALPHA) * self.err_old ** BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
        self.err_old = max(en, 1e-4)
        self.t_old, self.y_old = t, y
        self.K = (k1, k2, k3, k4, k5, k6, k7)
        self.h_last = t_new - t
        self.t, self.y, self.f = t_new, y_new, list(k7)
        self.h_abs = h_abs * fac
        self.naccept += 1

    def dense(self, t):
        """Interpolate inside the last accepted step."""
        h = self.h_last
        if h == 0.0:
            return list(self.y)
        x = (t - self.t_old) / h
        x2 = x * x
        pw = (x, x2, x2 * x, x2 * x2)
        w = [sum(r[j] * pw[j] for j in range(4)) for r in P]
        out = list(self.y_old)
        for wi, ki in zip(w, self.K):
            if wi != 0.0:
                hw = h * wi
                for j in range(self.n):
                    out[j] += hw * ki[j]
        return out
