"""EM estimation of the BuSca mixture and the median-based mu correction."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numba import njit

from .core import (EventSeries, InvalidParameters, MixtureFit, MixtureParams,
                   RefinementFailed, burstiness_scale, require_events)
from ._optim import golden_max
from .likelihood import (DEFAULT_TRUNCATION_DEPTH, _estep_kernel,
                         _expected_loglik_kernel)


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 100
    convergence_tol: float = 1e-4
    refine_mu: bool = True
    refine_replications: int = 30
    seed: Optional[int] = None
    truncation_depth: int = DEFAULT_TRUNCATION_DEPTH
    line_search_iterations: int = 30
    sweeps: int = 2

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidParameters("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise InvalidParameters("convergence_tol must be > 0")
        if self.refine_replications < 1:
            raise InvalidParameters("refine_replications must be >= 1")


def search_bounds(series: EventSeries):
    """Box for the M-step: lambda_p in [0, n/t_n], mu in [(b-a)/(10 n), t_n]."""
    n = series.n
    span = series.timestamps[-1] - series.a
    if not span > 0:
        span = series.length
    lam_hi = n / span
    mu_lo = series.length / (10.0 * n)
    mu_hi = max(span, mu_lo * 10.0)
    return (0.0, lam_hi), (mu_lo, mu_hi)


class _Objective:
    """Expected log-likelihood with a fresh E-step at every evaluated point."""

    def __init__(self, series: EventSeries, depth: int):
        self.t = series.timestamps
        self.wa, self.wb = series.a, series.b
        self.depth = depth
        self.evaluations = 0

    def __call__(self, lam, mu):
        self.evaluations += 1
        a, b, _ = _estep_kernel(self.t, lam, mu, self.depth, _NO_WEIGHTS, False)
        val, _ = _expected_loglik_kernel(self.t, self.wa, self.wb, lam, a, b)
        return val


_NO_WEIGHTS = np.empty(0)


def _m_step(obj: _Objective, lam, mu, best, bounds, config: EmConfig):
    # coordinate ascent; a coordinate moves only on strict improvement
    (lam_lo, lam_hi), (mu_lo, mu_hi) = bounds
    for _ in range(config.sweeps):
        x, v = golden_max(lambda L: obj(L, mu), lam_lo, lam_hi,
                          config.line_search_iterations)
        if v > best:
            lam, best = x, v
        x, v = golden_max(lambda m: obj(lam, m), mu_lo, mu_hi,
                          config.line_search_iterations, log_scale=True)
        if v > best:
            mu, best = x, v
    return lam, mu, best


def _initial_guess(series: EventSeries, bounds):
    (_, lam_hi), (mu_lo, mu_hi) = bounds
    med = float(np.median(series.gaps()))
    return 0.5 * lam_hi, min(max(med, mu_lo), mu_hi)


def run_em(series: EventSeries, config: EmConfig = EmConfig(), start=None):
    """EM loops without the mu refinement.

    Each loop re-runs the E-step inside a coordinate-ascent pass over
    ``(lambda_p, mu)``, so the label probabilities always match the point
    being scored. Returns ``(params, loglik, iterations, converged)``.
    """
    require_events(series, 2, "EM fit")
    bounds = search_bounds(series)
    lam, mu = start if start is not None else _initial_guess(series, bounds)
    lam_scale = bounds[0][1]
    obj = _Objective(series, config.truncation_depth)
    best = obj(lam, mu)
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        new_lam, new_mu, best = _m_step(obj, lam, mu, best, bounds, config)
        change = max(abs(new_lam - lam) / max(lam, 1e-6 * lam_scale),
                     abs(new_mu - mu) / mu)
        lam, mu = new_lam, new_mu
        if change < config.convergence_tol:
            converged = True
            break
    return MixtureParams(lam, mu), float(best), it, converged


def fit_em(series: EventSeries, config: EmConfig = EmConfig()) -> MixtureFit:
    """Fit ``(lambda_p, mu)`` by EM; optionally swap in the refined mu.

    ``log_likelihood`` is always the EM maximum (at the EM mu), so it stays
    comparable with the pure-model maxima used by the likelihood-ratio test.
    """
    params, loglik, iters, converged = run_em(series, config)
    psi = burstiness_scale(params.lambda_p, series.n, series.length)
    fit = MixtureFit(params=params, psi=psi, log_likelihood=loglik,
                     em_iterations=iters, converged=converged,
                     mu_refined=False, mu_em=params.mu)
    if config.refine_mu:
        try:
            mu = refine_mu(series, params.lambda_p, config.refine_replications,
                           config.seed)
        except RefinementFailed:
            return fit
        fit = replace(fit, params=MixtureParams(params.lambda_p, mu), mu_refined=True)
    return fit


@njit(cache=True)
def _find(parent, i):
    # path-halving find over "next alive index" pointers
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _delete_nearest(t, u, radius):
    """Mark, for each pseudo-event in turn, the closest surviving event.

    Only events strictly within ``radius`` qualify; ties go to the earlier
    event.
    """
    n = t.shape[0]
    deleted = np.zeros(n, dtype=np.bool_)
    right = np.arange(n + 1)  # right[i]: first alive index >= i (n = none)
    left = np.arange(n + 1)   # left[i + 1]: last alive index <= i (0 = none)
    for q in range(u.shape[0]):
        x = u[q]
        idx = np.searchsorted(t, x)
        r = _find(right, idx)
        l = _find(left, idx) - 1  # left is offset by one
        best = -1
        best_d = radius
        if l >= 0:
            d = x - t[l]
            if d < best_d:
                best, best_d = l, d
        if r < n:
            d = t[r] - x
            if d < best_d:
                best, best_d = r, d
        if best >= 0:
            deleted[best] = True
            right[best] = best + 1
            left[best + 1] = best
    return deleted


def pseudo_poisson_deletion(series: EventSeries, lambda_hat: float, rng):
    """One random deletion pass; returns a boolean mask of deleted events.

    Pseudo-events come from a Poisson process of rate ``lambda_hat`` on
    ``(a, t_n)`` and each removes the nearest not-yet-removed event within
    ``2 / lambda_hat``.
    """
    t = series.timestamps
    if not lambda_hat > 0:
        return np.zeros(series.n, dtype=bool)
    lo, hi = series.a, t[-1]
    m = rng.poisson(lambda_hat * (hi - lo))
    u = np.sort(rng.uniform(lo, hi, size=m))
    return _delete_nearest(t, u, 2.0 / lambda_hat)


def refine_mu(series: EventSeries, lambda_hat: float, replications: int = 30,
              seed=None) -> float:
    """Median-gap estimate of mu after deleting pseudo-Poisson events.

    Averages the median surviving gap over ``replications`` deletion passes;
    passes leaving fewer than three events are discarded.
    """
    if lambda_hat < 0 or not math.isfinite(lambda_hat):
        raise InvalidParameters("lambda_hat must be finite and >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    t = series.timestamps
    medians = []
    for _ in range(replications):
        deleted = pseudo_poisson_deletion(series, lambda_hat, rng)
        kept = t[~deleted]
        if len(kept) < 3:
            continue
        medians.append(float(np.median(np.diff(kept))))
    if not medians:
        raise RefinementFailed("every replication left fewer than 3 events")
    return float(np.mean(medians))


def delta_metric(est: float, truth: float) -> float:
    """Symmetric relative error: ``est/truth - 1`` above parity, ``1 - truth/est`` below."""
    if not (est > 0 and truth > 0):
        raise ValueError("delta_metric needs positive arguments")
    r = est / truth
    return r - 1.0 if r >= 1.0 else 1.0 - truth / est
