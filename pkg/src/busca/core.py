"""Domain types and input validation shared by the whole package."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np


class BuscaError(Exception):
    """Base class for all errors raised by this package."""


class SeriesError(BuscaError, ValueError):
    """An event series failed validation."""


class EmptySeries(SeriesError):
    pass


class NonFiniteTimestamp(SeriesError):
    pass


class DuplicateTimestamp(SeriesError):
    pass


class TimestampOutsideWindow(SeriesError):
    pass


class InvalidParameters(BuscaError, ValueError):
    pass


class NumericalUnderflow(BuscaError, ArithmeticError):
    """An intensity vanished below the representable floor at an event."""


class RefinementFailed(BuscaError, RuntimeError):
    pass


class FitFailed(BuscaError, RuntimeError):
    pass


class DegenerateFitError(BuscaError, ValueError):
    """A regression had too few points or a constant regressor."""


class Label(enum.IntEnum):
    POISSON = 0
    SFP = 1


class Verdict(str, enum.Enum):
    PURE_POISSON = "PURE_POISSON"
    PURE_SFP = "PURE_SFP"
    MIXED = "MIXED"
    AMBIGUOUS = "AMBIGUOUS"


@dataclass(frozen=True, eq=False)
class EventSeries:
    """A strictly increasing sequence of event times observed on ``(a, b]``.

    Use :func:`validate_series` to build one from raw input; the
    constructor re-checks the invariants but never reorders.
    """

    timestamps: np.ndarray
    a: float
    b: float
    id: str = ""

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        _check_invariants(t, self.a, self.b)

    @property
    def n(self) -> int:
        return len(self.timestamps)

    @property
    def length(self) -> float:
        return self.b - self.a

    def __len__(self):
        return len(self.timestamps)

    def __eq__(self, other):
        if not isinstance(other, EventSeries):
            return NotImplemented
        return (self.id == other.id and self.a == other.a and self.b == other.b
                and np.array_equal(self.timestamps, other.timestamps))

    def __hash__(self):
        return hash((self.id, self.a, self.b, self.timestamps.tobytes()))

    def scaled(self, factor: float) -> "EventSeries":
        """Return the series with time multiplied by ``factor``."""
        return EventSeries(self.timestamps * factor, self.a * factor,
                           self.b * factor, self.id)

    def gaps(self) -> np.ndarray:
        return np.diff(self.timestamps)


def _check_invariants(t: np.ndarray, a: float, b: float) -> None:
    if t.ndim != 1:
        raise SeriesError("timestamps must be one-dimensional")
    if len(t) == 0:
        raise EmptySeries("series has no events")
    if not np.all(np.isfinite(t)):
        raise NonFiniteTimestamp("timestamps must be finite")
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise SeriesError(f"invalid window ({a}, {b}]")
    d = np.diff(t)
    if np.any(d == 0):
        i = int(np.flatnonzero(d == 0)[0])
        raise DuplicateTimestamp(f"coincident timestamps at {float(t[i])!r}")
    if np.any(d < 0):
        raise SeriesError("timestamps must be strictly increasing")
    if t[0] < a or t[-1] > b:
        raise TimestampOutsideWindow(
            f"events span [{t[0]}, {t[-1]}] outside window ({a}, {b}]")


def validate_series(raw: Iterable[float], a: Optional[float] = None,
                    b: Optional[float] = None, id: str = "") -> EventSeries:
    """Sort and check raw timestamps, returning an :class:`EventSeries`.

    Coincident timestamps raise :class:`DuplicateTimestamp` instead of
    being merged. A missing window defaults to ``[0, t_n]``; if the
    first event is negative the lower bound defaults to it instead.
    """
    if isinstance(raw, EventSeries):
        if a is None and b is None:
            return raw
        t = np.asarray(raw.timestamps, dtype=float)
        a = raw.a if a is None else a
        b = raw.b if b is None else b
        id = id or raw.id
    else:
        try:
            t = np.asarray(list(raw), dtype=float)
        except (TypeError, ValueError) as exc:
            raise SeriesError(f"timestamps must be numeric: {exc}") from None
    if t.ndim != 1:
        t = t.ravel()
    if len(t) == 0:
        raise EmptySeries("series has no events")
    if not np.all(np.isfinite(t)):
        raise NonFiniteTimestamp("timestamps must be finite")
    t = np.sort(t, kind="mergesort")
    if a is None:
        a = min(0.0, float(t[0]))
    if b is None:
        b = float(t[-1])
    if not b > a:
        # a single event at the origin leaves an empty default window
        raise SeriesError(f"invalid window ({a}, {b}]")
    return EventSeries(t, a, b, id)


def check_series(X, window=None) -> EventSeries:
    """Coerce estimator input (an EventSeries or array-like) to a series."""
    if isinstance(X, EventSeries) and window is None:
        return X
    a, b = (None, None) if window is None else window
    return validate_series(X, a, b)


def require_events(series: EventSeries, n_min: int, what: str = "operation"):
    if series.n < n_min:
        raise SeriesError(f"{what} requires at least {n_min} events, got {series.n}")


def counting_function(series: EventSeries, t: float) -> int:
    """Number of events at or before ``t`` (right-continuous)."""
    if not series.a <= t <= series.b:
        raise ValueError(f"t={t} outside window [{series.a}, {series.b}]")
    return int(np.searchsorted(series.timestamps, t, side="right"))


@dataclass(frozen=True)
class MixtureParams:
    """Poisson rate ``lambda_p`` and SFP median gap ``mu`` (``inf`` = no SFP)."""

    lambda_p: float
    mu: float

    def __post_init__(self):
        lam, mu = float(self.lambda_p), float(self.mu)
        object.__setattr__(self, "lambda_p", lam)
        object.__setattr__(self, "mu", mu)
        if not (math.isfinite(lam) and lam >= 0):
            raise InvalidParameters(f"lambda_p must be finite and >= 0, got {lam}")
        if math.isnan(mu) or mu <= 0:
            raise InvalidParameters(f"mu must be in (0, inf], got {mu}")
        if lam == 0 and math.isinf(mu):
            raise InvalidParameters("lambda_p = 0 and mu = inf leaves no process")

    @property
    def is_pure_poisson(self) -> bool:
        return math.isinf(self.mu)

    @property
    def is_pure_sfp(self) -> bool:
        return self.lambda_p == 0


def burstiness_scale(lambda_p: float, n: int, length: float) -> float:
    """Estimated percentage of SFP events, clamped to [0, 100]."""
    psi = (1.0 - lambda_p * length / n) * 100.0
    return float(min(100.0, max(0.0, psi)))


@dataclass(frozen=True)
class MixtureFit:
    params: MixtureParams
    psi: float
    log_likelihood: float
    em_iterations: int
    converged: bool
    mu_refined: bool = False
    # EM estimate of mu before the median-based refinement
    mu_em: float = math.nan

    @property
    def lambda_p(self) -> float:
        return self.params.lambda_p

    @property
    def mu(self) -> float:
        return self.params.mu


@dataclass(frozen=True, eq=False)
class LabelAssignment:
    labels: np.ndarray
    r2_poisson: float
    r2_sfp: float

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int8)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return len(self.labels)

    @property
    def sfp_mask(self) -> np.ndarray:
        return self.labels == Label.SFP

    @property
    def poisson_mask(self) -> np.ndarray:
        return self.labels == Label.POISSON

    @property
    def sfp_fraction(self) -> float:
        return float(np.mean(self.sfp_mask)) if len(self.labels) else math.nan


@dataclass(frozen=True)
class ClassificationResult:
    phi_p: float
    phi_s: float
    verdict: Verdict
    alpha: float = 0.05
    lrt_poisson: float = math.nan
    lrt_sfp: float = math.nan


def as_float_array(x: Sequence[float]) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)
