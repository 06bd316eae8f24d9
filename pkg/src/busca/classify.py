"""Likelihood-ratio classification: pure Poisson, pure SFP, mixed or ambiguous."""

from __future__ import annotations

import math

from scipy.stats import chi2

from .core import (ClassificationResult, EventSeries, InvalidParameters,
                   MixtureFit, Verdict, require_events)
from ._optim import golden_max
from .likelihood import loglik_pure_poisson, loglik_pure_sfp

NULLS = (Verdict.PURE_POISSON, Verdict.PURE_SFP)
SFP_SEARCH_ITERATIONS = 60


def pure_sfp_max(series: EventSeries):
    """Maximise the pure-SFP log-likelihood over ``mu``.

    The search is a log-scale golden section on ``[(b-a)*1e-6/n, t_n - a]``.
    Returns ``(mu_hat, loglik)``.
    """
    require_events(series, 2, "pure-SFP fit")
    hi = series.timestamps[-1] - series.a
    if not hi > 0:
        hi = series.length
    lo = min(series.length * 1e-6 / series.n, hi * 1e-3)
    return golden_max(lambda m: loglik_pure_sfp(series, m), lo, hi,
                      SFP_SEARCH_ITERATIONS, log_scale=True)


def lrt_statistic(series: EventSeries, fit: MixtureFit, null) -> float:
    """``2 (l_mixture - l_null)``, floored at zero."""
    null = Verdict(null)
    if null is Verdict.PURE_POISSON:
        _, l0 = loglik_pure_poisson(series)
    elif null is Verdict.PURE_SFP:
        _, l0 = pure_sfp_max(series)
    else:
        raise InvalidParameters(f"null must be one of {[v.value for v in NULLS]}")
    return max(0.0, 2.0 * (fit.log_likelihood - l0))


def p_value(r: float) -> float:
    """Survival function of chi-square with one degree of freedom."""
    return float(chi2.sf(max(r, 0.0), df=1))


def verdict_from_p(phi_p: float, phi_s: float, alpha: float = 0.05) -> Verdict:
    keep_p, keep_s = phi_p > alpha, phi_s > alpha
    if keep_p and keep_s:
        return Verdict.AMBIGUOUS
    if keep_p:
        return Verdict.PURE_POISSON
    if keep_s:
        return Verdict.PURE_SFP
    return Verdict.MIXED


def classify(series: EventSeries, fit: MixtureFit, alpha: float = 0.05) -> ClassificationResult:
    if not 0 < alpha < 1:
        raise InvalidParameters(f"alpha must be in (0, 1), got {alpha}")
    r_p = lrt_statistic(series, fit, Verdict.PURE_POISSON)
    r_s = lrt_statistic(series, fit, Verdict.PURE_SFP)
    phi_p, phi_s = p_value(r_p), p_value(r_s)
    return ClassificationResult(phi_p=phi_p, phi_s=phi_s,
                                verdict=verdict_from_p(phi_p, phi_s, alpha),
                                alpha=alpha, lrt_poisson=r_p, lrt_sfp=r_s)


def effective_mu(mu: float, series: EventSeries) -> float:
    """Finite stand-in for an infinite ``mu``: the window length."""
    return series.length if math.isinf(mu) else mu
