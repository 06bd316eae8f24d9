"""Robust bivariate Gaussian on ``(log lambda_p, log mu)`` and Mahalanobis flags."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import BuscaError, InvalidParameters

MAD_SCALE = 1.4826
MIN_POINTS = 10


class DegenerateScale(BuscaError, ValueError):
    """A coordinate has zero median absolute deviation."""


class SingularCovariance(BuscaError, ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class RobustGaussian:
    center: np.ndarray
    covariance: np.ndarray

    @property
    def scales(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def correlation(self) -> float:
        s = self.scales
        return float(self.covariance[0, 1] / (s[0] * s[1]))


def _points(points) -> np.ndarray:
    x = check_array(points, dtype=float)
    if x.shape[1] != 2:
        raise InvalidParameters(f"expected points with 2 coordinates, got {x.shape[1]}")
    return x


def median_correlation(u: np.ndarray, v: np.ndarray) -> float:
    """``(m+^2 - m-^2) / (m+^2 + m-^2)`` with ``m+-`` the medians of ``|u +- v|``."""
    mp = np.median(np.abs(u + v))
    mm = np.median(np.abs(u - v))
    den = mp * mp + mm * mm
    if den == 0:
        raise DegenerateScale("both median sums vanish")
    return float((mp * mp - mm * mm) / den)


def fit_robust_gaussian(points, min_points: int = MIN_POINTS) -> RobustGaussian:
    x = _points(points)
    if len(x) < min_points:
        raise InvalidParameters(f"need at least {min_points} points, got {len(x)}")
    center = np.median(x, axis=0)
    scale = MAD_SCALE * np.median(np.abs(x - center), axis=0)
    if np.any(scale <= 0):
        raise DegenerateScale("a coordinate has zero MAD")
    u, v = ((x - center) / scale).T
    r = median_correlation(u, v)
    # the construction keeps |r| <= 1; shrink the boundary case so that det > 0
    r = float(np.clip(r, -1 + 1e-12, 1 - 1e-12))
    cov = np.array([[scale[0] ** 2, r * scale[0] * scale[1]],
                    [r * scale[0] * scale[1], scale[1] ** 2]])
    return RobustGaussian(center, cov)


def chi2_threshold(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise InvalidParameters(f"alpha must be in (0, 1), got {alpha}")
    return float(chi2.isf(alpha, df=2))


def mahalanobis_sq(points, model: RobustGaussian) -> np.ndarray:
    x = _points(points)
    try:
        prec = np.linalg.inv(model.covariance)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    if not np.all(np.isfinite(prec)):
        raise SingularCovariance("covariance is not invertible")
    d = x - model.center
    return np.maximum(np.einsum("ij,jk,ik->i", d, prec, d), 0.0)


def anomaly_scores(points, model: RobustGaussian, alpha: float = 0.01):
    """``(D^2, is_anomalous)`` arrays; flagged when D^2 exceeds the chi2(2) quantile."""
    d2 = mahalanobis_sq(points, model)
    return d2, d2 > chi2_threshold(alpha)


class RobustMahalanobisDetector(OutlierMixin, BaseEstimator):
    """Outlier detector over ``(log lambda_p, log mu)`` points.

    ``predict`` returns -1 for anomalies and 1 for inliers, and
    ``score_samples`` returns ``-D^2`` (higher means more normal).
    """

    def __init__(self, alpha: float = 0.01):
        self.alpha = alpha

    def fit(self, X, y=None):
        self.model_ = fit_robust_gaussian(X)
        self.threshold_ = chi2_threshold(self.alpha)
        self.location_ = self.model_.center
        self.covariance_ = self.model_.covariance
        self.offset_ = -self.threshold_
        return self

    def score_samples(self, X):
        check_is_fitted(self)
        return -mahalanobis_sq(X, self.model_)

    def decision_function(self, X):
        return self.score_samples(X) - self.offset_

    def predict(self, X):
        return np.where(self.decision_function(X) < 0, -1, 1)
