"""Synthetic realisations of Poisson, SFP, BuSca-mixture and Hawkes processes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numba import njit

from .core import (EventSeries, InvalidParameters, Label, LabelAssignment,
                   MixtureParams)

E = math.e
CALIBRATION_SEEDS = 50


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_window(a, b):
    if not (math.isfinite(a) and math.isfinite(b) and b > a):
        raise InvalidParameters(f"invalid window ({a}, {b}]")


def poisson_times(lambda_p: float, a: float, b: float, rng) -> np.ndarray:
    """Raw event times of a homogeneous Poisson process on ``(a, b]``."""
    if not (lambda_p > 0 and math.isfinite(lambda_p)):
        raise InvalidParameters(f"Poisson rate must be > 0, got {lambda_p}")
    _check_window(a, b)
    rng = _rng(rng)
    k = rng.poisson(lambda_p * (b - a))
    return np.sort(rng.uniform(a, b, size=k))


@njit(cache=True)
def _sfp_walk(exps, c, t, prev_gap, n_done, b, out, n_out):
    # gap_k = Exp(1) * (mu/e + previous gap); no gap exists before 2 events
    for j in range(exps.shape[0]):
        g = exps[j] * (c + prev_gap)
        t = t + g
        if t > b:
            return t, prev_gap, n_done, n_out, True
        if n_done >= 1:
            prev_gap = g
        n_done += 1
        if n_out < out.shape[0]:
            out[n_out] = t
        n_out += 1
    return t, prev_gap, n_done, n_out, False


def sfp_times(mu: float, a: float, b: float, rng, first_gap: Optional[float] = None,
              max_events: int = 10_000_000) -> np.ndarray:
    """Raw event times of a self-feeding process on ``(a, b]``.

    The gap preceding the window is ``first_gap`` (default ``mu``). It sets
    the intensity until two events exist; afterwards each gap is exponential
    with mean ``mu/e`` plus the previous gap.
    """
    if not (mu > 0 and math.isfinite(mu)):
        raise InvalidParameters(f"SFP mu must be finite and > 0, got {mu}")
    _check_window(a, b)
    rng = _rng(rng)
    prev = float(mu if first_gap is None else first_gap)
    if prev < 0:
        raise InvalidParameters("first_gap must be >= 0")
    c = mu / E
    t, n_done = float(a), 0
    chunks = []
    chunk = 256
    while True:
        exps = rng.standard_exponential(chunk)
        out = np.empty(chunk)
        t, prev, n_done, n_out, stop = _sfp_walk(exps, c, t, prev, n_done, b, out, 0)
        chunks.append(out[:n_out])
        if stop:
            break
        if n_done > max_events:
            raise InvalidParameters(f"SFP produced more than {max_events} events")
        chunk = min(chunk * 2, 1 << 16)
    return np.concatenate(chunks) if chunks else np.empty(0)


def _series(times, a, b, id=""):
    return EventSeries(np.asarray(times, dtype=float), a, b, id)


def simulate_poisson(lambda_p: float, a: float, b: float, seed=None,
                     id: str = "") -> EventSeries:
    """Homogeneous Poisson realisation; raises if no event falls in the window."""
    return _series(poisson_times(lambda_p, a, b, seed), a, b, id)


def simulate_sfp(mu: float, a: float, b: float, seed=None,
                 first_gap: Optional[float] = None, id: str = "") -> EventSeries:
    return _series(sfp_times(mu, a, b, seed, first_gap), a, b, id)


def simulate_mixture(params: MixtureParams, a: float, b: float, seed=None,
                     id: str = ""):
    """Superpose a Poisson and an SFP realisation.

    Returns the observed series and the ground-truth labels. The label
    assignment's R^2 fields are left as NaN.
    """
    if not isinstance(params, MixtureParams):
        params = MixtureParams(*params)
    _check_window(a, b)
    rng = _rng(seed)
    pp = (poisson_times(params.lambda_p, a, b, rng)
          if params.lambda_p > 0 else np.empty(0))
    sf = (sfp_times(params.mu, a, b, rng)
          if not params.is_pure_poisson else np.empty(0))
    times = np.concatenate([pp, sf])
    labels = np.concatenate([np.full(len(pp), Label.POISSON, dtype=np.int8),
                             np.full(len(sf), Label.SFP, dtype=np.int8)])
    order = np.argsort(times, kind="mergesort")
    times, labels = times[order], labels[order]
    if len(times) > 1 and np.any(np.diff(times) == 0):
        # continuous draws: a tie has probability zero, nudge it anyway
        times = np.maximum.accumulate(times + np.arange(len(times)) * 1e-12 * (b - a))
    series = _series(times, a, b, id)
    return series, LabelAssignment(labels, math.nan, math.nan)


def _capped_sfp_count(mu, a, b, rng, cap):
    c = mu / E
    t, prev, n_done = float(a), float(mu), 0
    out = np.empty(0)
    while True:
        exps = rng.standard_exponential(1024)
        t, prev, n_done, _, stop = _sfp_walk(exps, c, t, prev, n_done, b, out, 0)
        if stop or n_done >= cap:
            return min(n_done, cap)


def sfp_count_quantile(mu: float, a: float, b: float, seeds=CALIBRATION_SEEDS,
                       q: float = 0.5, base_seed: int = 0, cap: int = 10**7) -> float:
    """Quantile of the SFP event count in ``(a, b]`` over seeded replications."""
    children = np.random.SeedSequence(base_seed).spawn(seeds)
    counts = [_capped_sfp_count(mu, a, b, np.random.default_rng(s), cap)
              for s in children]
    return float(np.quantile(counts, q))


def pick_params_for_psi(psi_target: float, n_target: int, window=(0.0, 1000.0),
                        seeds: int = CALIBRATION_SEEDS, base_seed: int = 0,
                        max_iter: int = 60) -> MixtureParams:
    """Mixture parameters expected to give ``n_target`` events, ``psi_target`` % SFP.

    ``lambda_p`` follows directly; ``mu`` is found by bisection (in log
    space) on the median SFP count over ``seeds`` common-random-number runs.
    """
    a, b = window
    _check_window(a, b)
    if not 0 <= psi_target <= 100:
        raise InvalidParameters("psi_target must be in [0, 100]")
    if n_target < 10:
        raise InvalidParameters("n_target must be >= 10")
    T = b - a
    lam = (1.0 - psi_target / 100.0) * n_target / T
    if psi_target == 0:
        return MixtureParams(lam, math.inf)
    target = psi_target / 100.0 * n_target
    cap = int(100 * target) + 10

    def count(log_mu):
        return sfp_count_quantile(math.exp(log_mu), a, b, seeds,
                                  base_seed=base_seed, cap=cap)

    # counts fall as mu grows; widen by decades until the target is bracketed
    lo = hi = math.log(T / target)
    for _ in range(12):
        if count(lo) >= target:
            break
        lo -= math.log(10.0)
    else:
        raise InvalidParameters(f"cannot reach {target:g} SFP events in ({a}, {b}]")
    for _ in range(12):
        if count(hi) < target:
            break
        hi += math.log(10.0)
    else:
        raise InvalidParameters(f"cannot get below {target:g} SFP events in ({a}, {b}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if count(mid) >= target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-4:
            break
    return MixtureParams(lam, math.exp(0.5 * (lo + hi)))


@dataclass(frozen=True)
class HawkesParams:
    """Exponential-kernel Hawkes parameters: ``K(x) = alpha beta exp(-beta x)``."""

    lambda_p: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("lambda_p", "alpha", "beta"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameters(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)

    @property
    def stationary(self) -> bool:
        return self.alpha < 1.0


def simulate_hawkes(params: HawkesParams, a: float, b: float, seed=None,
                    id: str = "") -> EventSeries:
    """Ogata thinning for the exponential-kernel Hawkes process."""
    if params.lambda_p <= 0:
        raise InvalidParameters("Hawkes background rate must be > 0")
    _check_window(a, b)
    rng = _rng(seed)
    mu_, ab, beta = params.lambda_p, params.alpha * params.beta, params.beta
    times = []
    t = a
    excite = 0.0  # sum of alpha*beta*exp(-beta (t - t_i)) at current t
    while True:
        bound = mu_ + excite  # intensity only decays until the next event
        w = rng.exponential(1.0 / bound)
        t_new = t + w
        if t_new > b:
            break
        excite *= math.exp(-beta * w)
        t = t_new
        if rng.uniform() * bound <= mu_ + excite:
            times.append(t)
            excite += ab
    return _series(times, a, b, id)
