"""Monte-Carlo separation of a fitted series into Poisson and SFP events."""

from __future__ import annotations

import math

import numpy as np

from .core import (DegenerateFitError, EventSeries, Label, LabelAssignment,
                   MixtureFit, RefinementFailed)
from .estimate import pseudo_poisson_deletion
from .goodness import r2_poisson, r2_sfp

DEFAULT_REPLICATIONS = 20


def _replication(series: EventSeries, lambda_hat: float, seed):
    rng = np.random.default_rng(seed)
    deleted = pseudo_poisson_deletion(series, lambda_hat, rng)
    t = series.timestamps
    try:
        rp = r2_poisson(t[deleted])
        rs = r2_sfp(t[~deleted])
    except DegenerateFitError:
        return None
    labels = np.where(deleted, Label.POISSON, Label.SFP).astype(np.int8)
    return LabelAssignment(labels, rp, rs)


def disentangle_all(series: EventSeries, fit: MixtureFit,
                    replications: int = DEFAULT_REPLICATIONS, seed=None):
    """Every non-degenerate replication, in replication order.

    Each replication draws from its own child seed, so the output does not
    depend on the order in which replications are evaluated.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    children = np.random.SeedSequence(seed).spawn(replications)
    out = [_replication(series, fit.lambda_p, s) for s in children]
    return [r for r in out if r is not None]


def disentangle(series: EventSeries, fit: MixtureFit,
                replications: int = DEFAULT_REPLICATIONS, seed=None) -> LabelAssignment:
    """Label every event, keeping the replication with the best worse-of-two R^2.

    A fit with ``lambda_p = 0`` has no Poisson component: every event is
    labelled SFP and ``r2_poisson`` is NaN.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if fit.lambda_p == 0:
        try:
            rs = r2_sfp(series.timestamps)
        except DegenerateFitError:
            rs = math.nan
        return LabelAssignment(np.full(series.n, Label.SFP, dtype=np.int8), math.nan, rs)
    kept = disentangle_all(series, fit, replications, seed)
    if not kept:
        raise RefinementFailed("every disentangling replication was degenerate")
    return max(kept, key=lambda r: min(r.r2_poisson, r.r2_sfp))
