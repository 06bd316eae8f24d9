"""Burst periods from segmented least squares on the SFP counting process.

The SFP events of a disentangled series are cut into segments. Each segment
gets a straight-line fit of the cumulative SFP count against time, and the
partition minimises total squared error plus a fixed cost per segment. A
segment's burst power is its SFP count over the count a Poisson process at
the fitted background rate would produce in the same time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import (DegenerateFitError, EventSeries, InvalidParameters,
                   MixtureFit, as_float_array)
from .disentangle import DEFAULT_REPLICATIONS, disentangle

N_SPLITS = 100
MAX_BLOCKS = 2 * N_SPLITS
PENALTY_DIVISOR = 20.0


@dataclass(frozen=True)
class BurstSegment:
    t_start: float
    t_end: float
    sfp_count: int
    tau: float
    is_burst: bool

    @property
    def length(self) -> float:
        return self.t_end - self.t_start


def reduce_breakpoints(sfp_events, max_blocks: int = MAX_BLOCKS) -> np.ndarray:
    """Candidate segment endpoints: count percentiles plus equal-time grid.

    Both grids have ``max_blocks // 2`` points and every candidate is one
    of the events. The union is sorted and deduplicated.
    """
    t = np.sort(as_float_array(sfp_events))
    m = len(t)
    if m < 2:
        raise DegenerateFitError(f"need at least 2 SFP events, got {m}")
    k = max(1, max_blocks // 2)
    levels = np.arange(1, k + 1) / k
    by_count = np.rint(levels * (m - 1)).astype(int)
    grid = t[0] + levels * (t[-1] - t[0])
    right = np.clip(np.searchsorted(t, grid), 1, m - 1)
    left = right - 1
    by_time = np.where(grid - t[left] <= t[right] - grid, left, right)
    return t[np.unique(np.concatenate([by_count, by_time]))]


class _SegmentCost:
    """O(1) least-squares cost of the events inside ``(B[i], B[j]]``."""

    def __init__(self, x, y, boundaries):
        shift_x, shift_y = np.mean(x), np.mean(y)
        xc, yc = x - shift_x, y - shift_y
        z = np.zeros(1)
        self.sx = np.concatenate([z, np.cumsum(xc)])
        self.sy = np.concatenate([z, np.cumsum(yc)])
        self.sxx = np.concatenate([z, np.cumsum(xc * xc)])
        self.sxy = np.concatenate([z, np.cumsum(xc * yc)])
        self.syy = np.concatenate([z, np.cumsum(yc * yc)])
        # index of the first event strictly after each boundary; the first
        # boundary is closed so events sitting on it count
        idx = np.searchsorted(x, boundaries, side="right")
        idx[0] = np.searchsorted(x, boundaries[0], side="left")
        self.idx = idx

    def sse(self, i, j) -> float:
        lo, hi = self.idx[i], self.idx[j]
        k = hi - lo
        if k < 3:
            return 0.0
        sx = self.sx[hi] - self.sx[lo]
        sy = self.sy[hi] - self.sy[lo]
        vxx = (self.sxx[hi] - self.sxx[lo]) - sx * sx / k
        vxy = (self.sxy[hi] - self.sxy[lo]) - sx * sy / k
        vyy = (self.syy[hi] - self.syy[lo]) - sy * sy / k
        if vxx <= 0:
            return max(vyy, 0.0)
        return max(vyy - vxy * vxy / vxx, 0.0)


def segment_cost_table(x, y, boundaries) -> np.ndarray:
    cost = _SegmentCost(np.asarray(x, float), np.asarray(y, float),
                        np.asarray(boundaries, float))
    c = len(boundaries)
    table = np.full((c, c), np.inf)
    for i in range(c - 1):
        for j in range(i + 1, c):
            table[i, j] = cost.sse(i, j)
    return table


def segment(x, y, boundaries, penalty: float):
    """Optimal partition of ``boundaries[0] .. boundaries[-1]``.

    ``x`` are sorted event times and ``y`` the cumulative count at each.
    Returns ``(cuts, cost)`` where ``cuts`` are the chosen boundaries,
    endpoints included, and ``cost`` is total SSE plus ``penalty`` per
    segment.
    """
    if penalty < 0:
        raise InvalidParameters("penalty must be >= 0")
    boundaries = np.asarray(boundaries, float)
    c = len(boundaries)
    if c < 2:
        raise InvalidParameters("need at least two boundaries")
    table = segment_cost_table(x, y, boundaries)
    best = np.full(c, np.inf)
    back = np.zeros(c, dtype=int)
    best[0] = 0.0
    for j in range(1, c):
        vals = best[:j] + table[:j, j] + penalty
        i = int(np.argmin(vals))
        best[j], back[j] = vals[i], i
    cuts = [c - 1]
    while cuts[-1] != 0:
        cuts.append(back[cuts[-1]])
    return boundaries[cuts[::-1]], float(best[-1])


def default_penalty(x, y) -> float:
    """Residual variance of a single straight-line fit, divided by 20."""
    if len(x) < 3:
        return 0.0
    coef = np.polyfit(x, y, 1)
    return float(np.var(y - np.polyval(coef, x)) / PENALTY_DIVISOR)


def score_segments(sfp_events, cuts, lambda_p: float,
                   tau_threshold: float = 1.0) -> List[BurstSegment]:
    t = np.sort(as_float_array(sfp_events))
    out = []
    for k, (lo, hi) in enumerate(zip(cuts[:-1], cuts[1:])):
        first = np.searchsorted(t, lo, side="left" if k == 0 else "right")
        count = int(np.searchsorted(t, hi, side="right") - first)
        expected = lambda_p * (hi - lo)
        with np.errstate(over="ignore"):  # a vanishing rate gives tau = inf
            tau = count / expected if expected > 0 else (np.inf if count else 0.0)
        out.append(BurstSegment(float(lo), float(hi), count, float(tau),
                                bool(tau >= tau_threshold)))
    return out


def segment_sfp_events(sfp_events, window, lambda_p: float,
                       penalty: Optional[float] = None,
                       tau_threshold: float = 1.0,
                       max_blocks: int = MAX_BLOCKS) -> List[BurstSegment]:
    """Segment already-labelled SFP events covering ``window = (a, b)``."""
    a, b = window
    t = np.sort(as_float_array(sfp_events))
    if len(t) < 2:
        return score_segments(t, np.array([a, b]), lambda_p, tau_threshold)
    y = np.arange(1, len(t) + 1, dtype=float)
    cand = reduce_breakpoints(t, max_blocks)
    inner = cand[(cand > a) & (cand < b)]
    boundaries = np.concatenate([[a], inner, [b]])
    pen = default_penalty(t, y) if penalty is None else penalty
    cuts, _ = segment(t, y, boundaries, pen)
    return score_segments(t, cuts, lambda_p, tau_threshold)


def detect_bursts(series: EventSeries, fit: MixtureFit, seed=None,
                  penalty: Optional[float] = None, tau_threshold: float = 1.0,
                  replications: int = DEFAULT_REPLICATIONS,
                  return_labels: bool = False):
    """Disentangle, then segment the SFP events; optionally also return the labels."""
    labels = disentangle(series, fit, replications, seed)
    sfp = series.timestamps[labels.sfp_mask]
    segs = segment_sfp_events(sfp, (series.a, series.b), fit.lambda_p,
                              penalty, tau_threshold)
    return (segs, labels) if return_labels else segs


def top_segment(segments: List[BurstSegment]) -> BurstSegment:
    return max(segments, key=lambda s: s.tau)


def jaccard(lo1, hi1, lo2, hi2) -> float:
    inter = max(0.0, min(hi1, hi2) - max(lo1, lo2))
    union = (hi1 - lo1) + (hi2 - lo2) - inter
    return inter / union if union > 0 else 0.0


def burst_periods(segments: List[BurstSegment], lambda_p: float) -> List[BurstSegment]:
    """Merge each maximal run of adjacent burst segments into one period."""
    out: List[BurstSegment] = []
    run: List[BurstSegment] = []

    def flush():
        if run:
            lo, hi = run[0].t_start, run[-1].t_end
            count = sum(s.sfp_count for s in run)
            expected = lambda_p * (hi - lo)
            tau = count / expected if expected > 0 else np.inf
            out.append(BurstSegment(lo, hi, count, tau, True))
            run.clear()

    for seg in segments:
        if seg.is_burst:
            run.append(seg)
        else:
            flush()
    flush()
    return out
