"""Coefficient-of-determination diagnostics for the two disentangled components.

Poisson events should have a cumulative count ``N(t)`` close to a straight
line in ``t``. For SFP events the odds ratio of the empirical gap CDF,
``F / (1 - F)``, should be close to linear in the gap length; it is
evaluated at empirical gap quantiles.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import linregress

from .core import DegenerateFitError, as_float_array


def _r2(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0:
        raise DegenerateFitError("regressor has zero variance")
    if np.ptp(y) == 0:
        return 1.0
    r = linregress(x, y).rvalue
    return float(min(1.0, max(0.0, r * r)))


def r2_poisson(events, window=None) -> float:
    """R^2 of the OLS line ``i ~ t_i`` over the given (sorted) events.

    ``window`` is accepted for interface symmetry; the fit only uses the
    event times, so it is translation invariant.
    """
    t = np.sort(as_float_array(events))
    if len(t) < 3:
        raise DegenerateFitError(f"r2_poisson needs >= 3 events, got {len(t)}")
    return _r2(t, np.arange(1, len(t) + 1, dtype=float))


#: CDF levels at which the odds ratio is evaluated (1st to 95th percentile).
#: The far upper tail is left out because a handful of extreme gaps would
#: otherwise dominate the least-squares fit.
OR_LEVELS = np.arange(1, 96) / 100.0


def odds_ratio_points(events, levels=OR_LEVELS):
    """``(gap quantile, p / (1 - p))`` pairs at the given CDF levels ``p``."""
    t = np.sort(as_float_array(events))
    levels = np.asarray(levels, dtype=float)
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError("CDF levels must lie strictly between 0 and 1")
    q = np.quantile(np.diff(t), levels)
    return q, levels / (1.0 - levels)


def r2_sfp(events) -> float:
    t = as_float_array(events)
    if len(t) < 4:
        raise DegenerateFitError(f"r2_sfp needs >= 4 events, got {len(t)}")
    x, y = odds_ratio_points(t)
    return _r2(x, y)
