"""scikit-learn style wrappers around the functional API.

Single-series estimators take an :class:`~busca.core.EventSeries` (or an
array of timestamps plus an optional ``window``) as ``X``. Corpus-level
objects take a list of series.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .anomaly import RobustMahalanobisDetector
from .burst import burst_periods, detect_bursts
from .classify import classify
from .core import MixtureParams, check_series
from .disentangle import DEFAULT_REPLICATIONS, disentangle
from .estimate import EmConfig, fit_em
from .hawkes import fit_hawkes, hawkes_loglik, HawkesParams
from .likelihood import DEFAULT_TRUNCATION_DEPTH, exact_mixture_loglik

__all__ = ["BuscaEstimator", "HawkesEstimator", "BurstDetector",
           "CorpusFeatures", "RobustMahalanobisDetector"]


class BuscaEstimator(BaseEstimator):
    """Poisson plus self-feeding mixture fitted by EM.

    After ``fit``: ``lambda_p_``, ``mu_``, ``mu_em_``, ``psi_``,
    ``log_likelihood_``, ``n_iter_``, ``converged_``, ``fit_`` and, when
    ``alpha`` is set, ``classification_`` and ``verdict_``.
    """

    def __init__(self, max_iterations=100, convergence_tol=1e-4, refine_mu=True,
                 refine_replications=30, truncation_depth=DEFAULT_TRUNCATION_DEPTH,
                 alpha=0.05, random_state=None):
        self.max_iterations = max_iterations
        self.convergence_tol = convergence_tol
        self.refine_mu = refine_mu
        self.refine_replications = refine_replications
        self.truncation_depth = truncation_depth
        self.alpha = alpha
        self.random_state = random_state

    def _config(self):
        return EmConfig(max_iterations=self.max_iterations,
                        convergence_tol=self.convergence_tol,
                        refine_mu=self.refine_mu,
                        refine_replications=self.refine_replications,
                        seed=self.random_state,
                        truncation_depth=self.truncation_depth)

    def fit(self, X, y=None, window=None):
        series = check_series(X, window)
        fit = fit_em(series, self._config())
        self.fit_ = fit
        self.series_ = series
        self.lambda_p_, self.mu_, self.mu_em_ = fit.lambda_p, fit.mu, fit.mu_em
        self.psi_ = fit.psi
        self.log_likelihood_ = fit.log_likelihood
        self.n_iter_ = fit.em_iterations
        self.converged_ = fit.converged
        if self.alpha is not None:
            self.classification_ = classify(series, fit, self.alpha)
            self.verdict_ = self.classification_.verdict
        return self

    def predict(self, X=None, window=None):
        """Per-event labels (0 Poisson, 1 SFP) from the best disentangling."""
        check_is_fitted(self)
        series = self.series_ if X is None else check_series(X, window)
        labels = disentangle(series, self.fit_, DEFAULT_REPLICATIONS, self.random_state)
        return np.asarray(labels.labels, dtype=int)

    def score(self, X=None, y=None, window=None):
        """Exact mixture log-likelihood per event at the fitted parameters."""
        check_is_fitted(self)
        series = self.series_ if X is None else check_series(X, window)
        return exact_mixture_loglik(series, self.fit_.params) / series.n


class HawkesEstimator(BaseEstimator):
    """Exponential-kernel Hawkes process fitted by maximum likelihood."""

    def __init__(self, sweeps=50):
        self.sweeps = sweeps

    def fit(self, X, y=None, window=None):
        series = check_series(X, window)
        res = fit_hawkes(series, sweeps=self.sweeps)
        self.params_ = res.params
        self.lambda_p_, self.alpha_, self.beta_ = (res.params.lambda_p, res.params.alpha,
                                                   res.params.beta)
        self.log_likelihood_ = res.log_likelihood
        self.aic_ = res.aic
        return self

    def score(self, X, y=None, window=None):
        check_is_fitted(self)
        series = check_series(X, window)
        return hawkes_loglik(series, HawkesParams(self.lambda_p_, self.alpha_,
                                                  self.beta_)) / series.n


class BurstDetector(BaseEstimator):
    """Burst segments of one series; ``predict`` marks events inside bursts."""

    def __init__(self, penalty=None, tau_threshold=1.0,
                 replications=DEFAULT_REPLICATIONS, random_state=None):
        self.penalty = penalty
        self.tau_threshold = tau_threshold
        self.replications = replications
        self.random_state = random_state

    def fit(self, X, y=None, window=None, mixture_fit=None):
        series = check_series(X, window)
        if mixture_fit is None:
            mixture_fit = fit_em(series, EmConfig(seed=self.random_state))
        self.mixture_fit_ = mixture_fit
        self.segments_ = detect_bursts(series, mixture_fit, self.random_state,
                                       self.penalty, self.tau_threshold,
                                       self.replications)
        self.periods_ = burst_periods(self.segments_, mixture_fit.lambda_p)
        return self

    def predict(self, X):
        """1 for times inside a burst segment, 0 otherwise."""
        check_is_fitted(self)
        t = np.asarray(getattr(X, "timestamps", X), dtype=float)
        out = np.zeros(len(t), dtype=int)
        for k, seg in enumerate(self.segments_):
            if not seg.is_burst:
                continue
            if k == 0:
                inside = (t >= seg.t_start) & (t <= seg.t_end)
            else:
                inside = (t > seg.t_start) & (t <= seg.t_end)
            out[inside] = 1
        return out


class CorpusFeatures(TransformerMixin, BaseEstimator):
    """Map each series of a corpus to ``(log lambda_p, log mu)``.

    Rows whose fit has ``lambda_p = 0`` or an infinite ``mu`` get NaN in
    the affected column.
    """

    def __init__(self, refine_mu=True, random_state=None):
        self.refine_mu = refine_mu
        self.random_state = random_state

    def fit(self, X, y=None):
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        rows = []
        for k, s in enumerate(X):
            seed = None if self.random_state is None else [self.random_state, k]
            fit = fit_em(check_series(s), EmConfig(refine_mu=self.refine_mu, seed=seed))
            rows.append(_log_features(fit.params))
        return np.array(rows, dtype=float).reshape(-1, 2)

    def get_feature_names_out(self, input_features=None):
        return np.array(["log_lambda_p", "log_mu"], dtype=object)


def _log_features(params: MixtureParams):
    lam = math.log(params.lambda_p) if params.lambda_p > 0 else math.nan
    mu = math.log(params.mu) if math.isfinite(params.mu) else math.nan
    return lam, mu
