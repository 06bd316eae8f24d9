"""Conditional intensities, pure-model log-likelihoods and the E-step.

The mixture intensity is ``lambda_p + lambda_s(t)``, where the SFP part is
``1 / (mu/e + gap)`` and ``gap`` is the last inter-event time *between SFP
events*. The source label of each observed event is hidden, so the E-step
computes ``a_i = E[lambda_s(t_i)]`` and ``b_i = E[lambda_s(t_i)^2]`` with a
backward dynamic program over the position of the previous SFP event.

Conventions (shared with the simulator and :func:`loglik_pure_sfp`):

* the first event is taken to be SFP;
* while fewer than two SFP events have occurred there is no observed gap
  and the SFP intensity is ``1 / (mu/e + mu)``;
* ``a_i`` is the intensity on ``(t_{i-1}, t_i]``; one extra value
  ``a_{n+1}`` covers ``(t_n, b]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .core import (EventSeries, InvalidParameters, MixtureParams,
                   NumericalUnderflow, require_events)

E = math.e
INTENSITY_FLOOR = 1e-300
DEFAULT_TRUNCATION_DEPTH = 10


def sfp_intensity(mu: float, last_gap: float) -> float:
    """SFP conditional intensity ``1 / (mu/e + last_gap)``."""
    if not mu > 0:
        raise InvalidParameters(f"mu must be > 0, got {mu}")
    if last_gap < 0:
        raise ValueError(f"last_gap must be >= 0, got {last_gap}")
    return 1.0 / (mu / E + last_gap)


def loglik_pure_poisson(series: EventSeries):
    """MLE rate and maximised log-likelihood of a homogeneous Poisson process."""
    require_events(series, 1, "Poisson log-likelihood")
    n, T = series.n, series.length
    lam = n / T
    return lam, n * math.log(lam) - n


def poisson_loglik(series: EventSeries, lambda_p: float) -> float:
    if not lambda_p > 0:
        raise InvalidParameters("lambda_p must be > 0")
    return series.n * math.log(lambda_p) - lambda_p * series.length


def sfp_path_intensities(t: np.ndarray, mu: float) -> np.ndarray:
    """Deterministic SFP intensities when every event is SFP.

    Entry ``i`` (``i < n``) is the intensity on ``(t_{i-1}, t_i]``; the
    last entry holds on ``(t_n, b]``.
    """
    c = mu / E
    f0 = 1.0 / (c + mu)
    n = len(t)
    lam = np.empty(n + 1)
    lam[:2] = f0
    if n >= 2:
        lam[2:] = 1.0 / (c + np.diff(t))
    return lam


def loglik_pure_sfp(series: EventSeries, mu: float) -> float:
    """Exact log-likelihood of the series under a pure SFP with parameter ``mu``."""
    if not (mu > 0):
        raise InvalidParameters(f"mu must be > 0, got {mu}")
    if math.isinf(mu):
        return -math.inf
    t = series.timestamps
    lam = sfp_path_intensities(t, mu)
    at_events = lam[:-1]
    if np.any(at_events < INTENSITY_FLOOR):
        raise NumericalUnderflow("SFP intensity underflowed at an event")
    widths = np.diff(np.concatenate(([series.a], t, [series.b])))
    return float(np.sum(np.log(at_events)) - np.dot(lam, widths))


@dataclass(frozen=True, eq=False)
class EStepState:
    """Expected SFP intensity (``a``) and its second moment (``b``) per event.

    ``weights[i]`` is the probability that event ``i`` is SFP as used by the
    recursion; ``a_tail``/``b_tail`` describe ``(t_n, b]``.
    """

    a: np.ndarray
    b: np.ndarray
    a_tail: float
    b_tail: float
    weights: np.ndarray
    truncation_depth: int
    params: MixtureParams

    @property
    def a_full(self) -> np.ndarray:
        return np.append(self.a, self.a_tail)

    @property
    def b_full(self) -> np.ndarray:
        return np.append(self.b, self.b_tail)


@njit(cache=True)
def _estep_kernel(t, lam, mu, depth, w_in, frozen):
    n = t.shape[0]
    c = mu / math.e
    f0 = 1.0 / (c + mu)
    a = np.empty(n + 1)
    b = np.empty(n + 1)
    w = np.empty(n)
    a[0] = f0
    b[0] = f0 * f0
    for i in range(1, n + 1):
        prev = i - 1
        if frozen:
            wp = w_in[prev]
        elif prev == 0:
            wp = 1.0
        else:
            wp = a[prev] / (a[prev] + lam)
        w[prev] = wp
        # distribution of the SFP event preceding t_prev, walking backwards
        s1 = 0.0
        s2 = 0.0
        surv = 1.0
        kmin = prev - depth
        if kmin < 0:
            kmin = 0
        k = prev - 1
        while k >= kmin and surv > 0.0:
            fk = 1.0 / (c + (t[prev] - t[k]))
            p = w[k] * surv
            s1 += p * fk
            s2 += p * fk * fk
            surv *= 1.0 - w[k]
            k -= 1
        if surv > 0.0:
            if kmin == 0:
                ft = f0
            else:
                # remaining mass sits on events older than the horizon
                ft = 1.0 / (c + (t[prev] - t[kmin - 1]))
            s1 += surv * ft
            s2 += surv * ft * ft
        a[i] = (1.0 - wp) * a[prev] + wp * s1
        b[i] = (1.0 - wp) * b[prev] + wp * s2
    return a, b, w


@njit(cache=True)
def _expected_loglik_kernel(t, wa, wb, lam, a, b):
    n = t.shape[0]
    total = 0.0
    integral = 0.0
    floored = 0
    prev_t = wa
    for i in range(n):
        m = lam + a[i]
        if m < 1e-300:
            m = 1e-300
            floored += 1
        var = b[i] - a[i] * a[i]
        if var < 0.0:
            var = 0.0
        total += math.log(m)
        if var > 0.0:
            total -= var / (2.0 * m) / m
        integral += a[i] * (t[i] - prev_t)
        prev_t = t[i]
    integral += a[n] * (wb - prev_t)
    return total - integral - (wb - wa) * lam, floored


def _check_mixed(params: MixtureParams):
    if not isinstance(params, MixtureParams):
        params = MixtureParams(*params)
    if math.isinf(params.mu):
        raise InvalidParameters("E-step needs a finite mu")
    return params


def estep(series: EventSeries, params: MixtureParams,
          truncation_depth: int = DEFAULT_TRUNCATION_DEPTH,
          weights: Optional[np.ndarray] = None) -> EStepState:
    """Run the backward dynamic program for ``a_i`` and ``b_i``.

    With ``weights`` given, the label probabilities are held fixed (as in
    the M-step) and only the intensities are recomputed for ``params``.
    """
    params = _check_mixed(params)
    require_events(series, 2, "E-step")
    depth = int(truncation_depth)
    if depth < 1:
        raise ValueError("truncation_depth must be >= 1")
    t = series.timestamps
    if weights is None:
        w_in, frozen = np.empty(0), False
    else:
        w_in, frozen = np.ascontiguousarray(weights, dtype=float), True
        if len(w_in) != series.n:
            raise ValueError("weights must have one entry per event")
    a, b, w = _estep_kernel(t, params.lambda_p, params.mu, depth, w_in, frozen)
    return EStepState(a=a[:-1], b=b[:-1], a_tail=float(a[-1]), b_tail=float(b[-1]),
                      weights=w, truncation_depth=depth, params=params)


def expected_loglik(series: EventSeries, params: MixtureParams,
                    state: EStepState, strict: bool = True) -> float:
    """Second-order approximation of the expected mixture log-likelihood.

    ``sum_i [log(lambda_p + a_i) - (b_i - a_i^2) / (2 (lambda_p + a_i)^2)]``
    minus the area under the expected SFP intensity step function and
    ``(b - a) lambda_p``.
    """
    params = _check_mixed(params)
    val, floored = _expected_loglik_kernel(
        series.timestamps, series.a, series.b, params.lambda_p,
        state.a_full, state.b_full)
    if floored and strict:
        raise NumericalUnderflow(f"{floored} event intensities below {INTENSITY_FLOOR}")
    return float(val)


def mixture_loglik(series: EventSeries, params: MixtureParams,
                   truncation_depth: int = DEFAULT_TRUNCATION_DEPTH) -> float:
    """Plug-in mixture log-likelihood: E-step at ``params`` then the expectation."""
    params = _check_mixed(params)
    state = estep(series, params, truncation_depth)
    return expected_loglik(series, params, state)


EXACT_MERGE_RESOLUTION = 0.05
EXACT_PRUNE_THRESHOLD = 1e-12


@njit(cache=True)
def _forward_kernel(t, wa, wb, lam, mu, delta, eps):
    n = t.shape[0]
    c = mu / math.e
    f0 = 1.0 / (c + mu)
    cap = 1024
    # hidden state: index of the last SFP event (-1: none yet), SFP intensity,
    # log posterior weight
    K = np.empty(cap, np.int64); H = np.empty(cap); LW = np.empty(cap)
    m = 1
    K[0] = -1; H[0] = f0; LW[0] = 0.0
    acc = np.zeros(n + 1)
    loglam = math.log(lam) if lam > 0 else -np.inf
    total = 0.0
    prev = wa
    for i in range(n):
        d = t[i] - prev
        prev = t[i]
        cK = np.empty(2 * m, np.int64); cH = np.empty(2 * m); cL = np.empty(2 * m)
        touched = np.empty(m, np.int64)
        top = -np.inf
        for s in range(m):
            LW[s] = LW[s] - (lam + H[s]) * d
            v = LW[s] + max(loglam, math.log(H[s]))
            if v > top:
                top = v
        nc = 0
        nt = 0
        if lam > 0:  # event i is Poisson: state unchanged
            for s in range(m):
                cK[nc] = K[s]; cH[nc] = H[s]; cL[nc] = math.exp(LW[s] + loglam - top)
                nc += 1
        for s in range(m):  # event i is SFP: new state keyed by the old last-SFP index
            key = K[s] + 1
            if acc[key] == 0.0:
                touched[nt] = K[s]; nt += 1
            acc[key] += math.exp(LW[s] + math.log(H[s]) - top)
        for j in range(nt):
            kk = touched[j]
            cK[nc] = i
            cH[nc] = f0 if kk < 0 else 1.0 / (c + t[i] - t[kk])
            cL[nc] = acc[kk + 1]
            acc[kk + 1] = 0.0
            nc += 1
        z = 0.0
        for j in range(nc):
            z += cL[j]
        total += top + math.log(z)
        # states with (nearly) equal intensity and last-SFP age behave alike
        # from here on; merge them on a log grid of width delta
        keys = np.empty(nc, np.int64)
        for j in range(nc):
            if cK[j] < 0:
                keys[j] = -1
            elif delta <= 0.0:
                keys[j] = j  # no merging
            else:
                kh = int(math.floor(math.log(cH[j]) / delta))
                ka = int(math.floor(math.log(c + t[i] - t[cK[j]]) / delta))
                keys[j] = (kh + (1 << 30)) * (1 << 31) + (ka + (1 << 30))
        order = np.argsort(keys)
        if 2 * nc > cap:
            cap = 2 * nc
            K = np.empty(cap, np.int64); H = np.empty(cap); LW = np.empty(cap)
        m = 0
        j0 = 0
        while j0 < nc:
            kj = keys[order[j0]]
            wsum = 0.0; hsum = 0.0; best = -1.0; bk = 0
            j1 = j0
            while j1 < nc and keys[order[j1]] == kj and (kj != -1 or j1 == j0):
                q = order[j1]
                wsum += cL[q]; hsum += cL[q] * cH[q]
                if cL[q] > best:
                    best = cL[q]; bk = cK[q]
                j1 += 1
            p = wsum / z
            if p >= eps:
                K[m] = bk; H[m] = hsum / wsum; LW[m] = math.log(p); m += 1
            j0 = j1
    # no event on (t_n, b]
    d = wb - prev
    top = -np.inf
    for s in range(m):
        v = LW[s] - (lam + H[s]) * d
        if v > top: top = v
    z = 0.0
    for s in range(m):
        z += math.exp(LW[s] - (lam + H[s]) * d - top)
    return total + top + math.log(z)


def exact_mixture_loglik(series: EventSeries, params: MixtureParams,
                         resolution: float = EXACT_MERGE_RESOLUTION,
                         prune: float = EXACT_PRUNE_THRESHOLD) -> float:
    """Marginal log-likelihood of the mixture by forward filtering.

    The hidden state after each event is the last SFP event and the current
    SFP intensity. Unlike :func:`expected_loglik` nothing is approximated
    beyond merging states whose intensity and last-SFP age agree within
    ``resolution`` on a log scale and dropping states with posterior mass
    below ``prune``; with ``resolution=0`` and ``prune=0`` the result is
    exact. No label is imposed on the first event.
    """
    if not isinstance(params, MixtureParams):
        params = MixtureParams(*params)
    require_events(series, 1, "mixture log-likelihood")
    if params.is_pure_poisson:
        return poisson_loglik(series, params.lambda_p)
    if resolution < 0 or prune < 0:
        raise ValueError("resolution and prune must be >= 0")
    return float(_forward_kernel(series.timestamps, series.a, series.b,
                                 params.lambda_p, params.mu, resolution, prune))
