"""BuSca: a homogeneous Poisson process superposed with a self-feeding process.

The package simulates, fits and classifies random series of events, and
uses the fitted model to separate routine from bursty activity.
"""

from .anomaly import (RobustGaussian, RobustMahalanobisDetector, anomaly_scores,
                      fit_robust_gaussian)
from .burst import (BurstSegment, burst_periods, detect_bursts, reduce_breakpoints,
                    segment)
from .classify import classify, lrt_statistic
from .core import (BuscaError, ClassificationResult, DegenerateFitError,
                   DuplicateTimestamp, EmptySeries, EventSeries, FitFailed,
                   InvalidParameters, Label, LabelAssignment, MixtureFit,
                   MixtureParams, NonFiniteTimestamp, NumericalUnderflow,
                   RefinementFailed, SeriesError, TimestampOutsideWindow, Verdict,
                   burstiness_scale, counting_function, validate_series)
from .disentangle import disentangle
from .estimate import EmConfig, delta_metric, fit_em, refine_mu
from .estimators import BuscaEstimator, BurstDetector, CorpusFeatures, HawkesEstimator
from .goodness import r2_poisson, r2_sfp
from .hawkes import HawkesFit, HawkesParams, Winner, compare_aic, fit_hawkes, hawkes_loglik
from .likelihood import (estep, exact_mixture_loglik, expected_loglik,
                         loglik_pure_poisson, loglik_pure_sfp)
from .simulate import (pick_params_for_psi, simulate_hawkes, simulate_mixture,
                       simulate_poisson, simulate_sfp)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
