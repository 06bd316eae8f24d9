"""Golden-section line search and coordinate ascent used by the fitters."""

from __future__ import annotations

import math
from typing import Callable, Sequence

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f: Callable[[float], float], lo: float, hi: float,
               n_iter: int = 30, log_scale: bool = False):
    """Maximise a scalar function on ``[lo, hi]`` by golden-section search.

    Returns ``(x, f(x))`` for the best point seen, endpoints included, so a
    monotone objective still reaches its boundary optimum.
    With ``log_scale`` the search runs on ``log x`` (``lo`` must be > 0).
    """
    if log_scale:
        to_x, u_lo, u_hi = math.exp, math.log(lo), math.log(hi)
    else:
        to_x, u_lo, u_hi = (lambda u: u), lo, hi

    best_x, best_f = lo, -math.inf

    def ev(u):
        nonlocal best_x, best_f
        x = to_x(u)
        v = f(x)
        if v > best_f or (v == best_f and math.isinf(best_f)):
            best_x, best_f = x, v
        return v

    ev(u_lo)
    ev(u_hi)
    c = u_hi - INVPHI * (u_hi - u_lo)
    d = u_lo + INVPHI * (u_hi - u_lo)
    fc, fd = ev(c), ev(d)
    a, b = u_lo, u_hi
    for _ in range(n_iter):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = ev(d)
    return best_x, best_f


def coordinate_ascent(f: Callable[[Sequence[float]], float], x0: Sequence[float],
                      bounds: Sequence[tuple], log_scale: Sequence[bool],
                      sweeps: int = 2, n_iter: int = 30, tol: float = 0.0):
    """Cyclic coordinate ascent with a golden-section search per coordinate.

    A coordinate only moves when the line search strictly improves on the
    current value, so the objective never decreases. Stops after
    ``sweeps`` sweeps, or earlier once a sweep gains less than ``tol``.
    """
    x = list(x0)
    fx = f(x)
    for _ in range(sweeps):
        f_start = fx
        for j, ((lo, hi), logj) in enumerate(zip(bounds, log_scale)):
            def fj(v, j=j):
                y = list(x)
                y[j] = v
                return f(y)
            xj, fj_best = golden_max(fj, lo, hi, n_iter=n_iter, log_scale=logj)
            if fj_best > fx:
                x[j], fx = xj, fj_best
        if tol > 0 and fx - f_start <= tol * (1.0 + abs(fx)):
            break
    return x, fx
