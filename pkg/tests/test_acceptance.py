"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Heavy simulations are shared through module-level caches. Everything runs
single-threaded; run with ``pytest -m acceptance -s`` to see the lines as
they are produced (they are also repeated in the terminal summary).
"""

import functools
import math
import time
import warnings

import numpy as np
import pytest

from busca.anomaly import anomaly_scores, fit_robust_gaussian
from busca.burst import detect_bursts, jaccard, segment, top_segment
from busca.classify import classify
from busca.core import MixtureParams, Verdict, validate_series
from busca.disentangle import disentangle
from busca.estimate import EmConfig, delta_metric, fit_em
from busca.hawkes import HawkesParams, Winner, compare_aic, fit_hawkes, hawkes_loglik
from busca.likelihood import estep, expected_loglik, poisson_loglik
from busca.simulate import (pick_params_for_psi, poisson_times, sfp_times,
                            simulate_mixture, simulate_poisson)
from conftest import ACCEPTANCE_LINES
from oracles import brute_force_segmentation, sequential_expected_loglik

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

WINDOW = (0.0, 1000.0)
GRID_N = (200, 1000)
GRID_PSI = (25, 50, 75)
GRID_REPS = 50
ALL_FITS = []  # (em_iterations) of every EM fit made by this suite


def report(k, ok, detail):
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def seed_of(*key):
    return int(np.random.SeedSequence([20240, *key]).generate_state(1)[0])


def fit(series, seed):
    f = fit_em(series, EmConfig(seed=seed))
    ALL_FITS.append(f.em_iterations)
    return f


@functools.lru_cache(maxsize=None)
def params_for(psi, n):
    return pick_params_for_psi(psi, n, WINDOW)


@functools.lru_cache(maxsize=None)
def grid():
    """Per-cell arrays of delta_lambda, delta_mu_em, delta_mu_refined."""
    start = time.perf_counter()
    cells = {}
    for n in GRID_N:
        for psi in GRID_PSI:
            p = params_for(psi, n)
            rows = []
            for rep in range(GRID_REPS):
                seed = seed_of(n, psi, rep)
                s, _ = simulate_mixture(p, *WINDOW, seed)
                f = fit(s, seed)
                lam = max(f.lambda_p, 1e-12)
                rows.append((delta_metric(lam, p.lambda_p), delta_metric(f.mu_em, p.mu),
                             delta_metric(f.mu, p.mu)))
            cells[(n, psi)] = np.clip(np.array(rows), -5, 5)
    return cells, time.perf_counter() - start


@functools.lru_cache(maxsize=None)
def mixed_verdicts(psi, n, reps):
    p = params_for(psi, n)
    out = []
    for rep in range(reps):
        seed = seed_of(7, n, psi, rep)
        s, _ = simulate_mixture(p, *WINDOW, seed)
        out.append(classify(s, fit(s, seed)).verdict)
    return out


def test_criterion_01_lambda_recovery():
    cells, elapsed = grid()
    med = {k: float(np.median(np.abs(v[:, 0]))) for k, v in cells.items()}
    big = {k: m for k, m in med.items() if k[0] == 1000}
    # the budget is 10 minutes on 4 cores; this machine runs on one
    ok = all(m < 0.3 for m in big.values()) and elapsed < 4 * 600
    detail = ", ".join(f"n={n} psi={psi}: {m:.3f}" for (n, psi), m in sorted(med.items()))
    assert report(1, ok, f"median |delta lambda| {detail}; grid took {elapsed:.0f} s "
                         "on one core"), med


def test_criterion_02_mu_correction():
    cells, _ = grid()
    better = [np.median(np.abs(v[:, 2])) < np.median(np.abs(v[:, 1])) for v in cells.values()]
    over = [np.median(v[:, 1]) > 0 for v in cells.values()]
    ok = np.mean(better) >= 0.8 and np.mean(over) >= 0.9
    assert report(2, ok, f"refined beats EM in {np.mean(better):.0%} of cells, "
                         f"EM overestimates in {np.mean(over):.0%} of cells")


def test_criterion_03_estimator_independence():
    cells, _ = grid()
    pooled = np.vstack(list(cells.values()))
    r = float(np.corrcoef(pooled[:, 0], pooled[:, 2])[0, 1])
    r_em = float(np.corrcoef(pooled[:, 0], pooled[:, 1])[0, 1])
    ok = abs(r) < 0.3
    assert report(3, ok, f"pooled corr(delta lambda, delta mu refined) = {r:+.3f} "
                         f"(with EM mu: {r_em:+.3f})")


def test_criterion_04_lrt_calibration():
    pp_rej, sfp_rej = [], []
    sfp_mu = params_for(100, 500).mu
    for rep in range(100):
        seed = seed_of(4, rep)
        s = simulate_poisson(0.5, *WINDOW, seed)
        pp_rej.append(classify(s, fit(s, seed)).phi_p <= 0.05)
        s = validate_series(sfp_times(sfp_mu, *WINDOW, np.random.default_rng(seed)), *WINDOW)
        sfp_rej.append(classify(s, fit(s, seed)).phi_p <= 0.05)
    mixed = np.mean([v is Verdict.MIXED for v in mixed_verdicts(50, 1000, 100)])
    a, b = np.mean(pp_rej), np.mean(sfp_rej)
    ok = 0.01 <= a <= 0.15 and b >= 0.99 and mixed >= 0.95
    assert report(4, ok, f"pure-PP false rejection {a:.0%} (target 1%-15%), pure-SFP "
                         f"rejection {b:.0%}, psi=50 MIXED {mixed:.0%}")


def test_criterion_05_never_both_accepted():
    verdicts = []
    for psi in (30, 40, 50, 60, 70):
        for n in (500, 1000):
            verdicts += mixed_verdicts(psi, n, 50)
    rate = np.mean([v is Verdict.AMBIGUOUS for v in verdicts])
    assert report(5, rate < 0.02, f"AMBIGUOUS rate {rate:.1%} over {len(verdicts)} series")


def test_criterion_06_em_iteration_budget():
    grid()
    mixed_verdicts(50, 1000, 100)
    its = np.array(ALL_FITS)
    frac = float(np.mean(its <= 21))
    ok = frac >= 0.95 and its.mean() <= 10
    assert report(6, ok, f"{frac:.1%} of {len(its)} fits within 21 loops, "
                         f"mean {its.mean():.2f}")


def _unit_rate_series(rng):
    """First n events of a simulated mixture, rescaled so the window has length n."""
    while True:
        n = int(rng.integers(3, 11))
        lam, mu = rng.uniform(0.2, 2.0), rng.uniform(0.1, 2.0)
        horizon = 4 * n / lam
        t = np.sort(np.r_[poisson_times(lam, 0, horizon, rng), sfp_times(mu, 0, horizon, rng)])
        if len(t) > n:
            scale = n / t[n]
            return t[:n] * scale, float(n), lam / scale, mu * scale


def test_criterion_07_estep_correctness():
    rng = np.random.default_rng(seed_of(7))
    errs = []
    for _ in range(100):
        t, b, lam, mu = _unit_rate_series(rng)
        s = validate_series(t, 0.0, b)
        p = MixtureParams(lam, mu)
        approx = expected_loglik(s, p, estep(s, p))
        exact = sequential_expected_loglik(t, 0.0, b, lam, mu)
        errs.append(abs(approx - exact) / abs(exact))
    errs = np.array(errs)
    worst_trunc = 0.0
    for k in range(5):
        p = MixtureParams(0.5, 2.0)
        s, _ = simulate_mixture(p, 0, 400, seed_of(77, k))
        s = validate_series(s.timestamps[:200], 0, s.timestamps[199])
        shallow, full = estep(s, p, 10).a_full, estep(s, p, s.n + 1).a_full
        worst_trunc = max(worst_trunc, float(np.max(np.abs(shallow - full) / full)))
    ok = np.all(errs < 0.05) and worst_trunc < 0.01
    assert report(7, ok, f"{np.mean(errs < 0.05):.0%} of 100 series within 5% of the "
                         f"enumeration oracle (median {np.median(errs):.2%}, max "
                         f"{errs.max():.2%}); truncation max a_i gap {worst_trunc:.2e}")


def test_criterion_08_hawkes_comparison():
    wins, margins = [], []
    for psi in (50, 75):
        p = params_for(psi, 1000)
        for rep in range(250):
            seed = seed_of(8, psi, rep)
            s, _ = simulate_mixture(p, *WINDOW, seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                h = fit_hawkes(s)
            winner, a_b, a_h = compare_aic(s, fit(s, seed), h)
            wins.append(winner is Winner.BUSCA)
            margins.append(a_h - a_b)
    s = simulate_poisson(1.0, 0, 500, 1)
    ident = abs(hawkes_loglik(s, HawkesParams(1.0, 0.0, 3.0)) - poisson_loglik(s, 1.0))
    rate = np.mean(wins)
    ok = rate >= 0.95 and ident <= 1e-10
    assert report(8, ok, f"BuSca AIC lower on {rate:.1%} of 500 series (median margin "
                         f"{np.median(margins):.1f}); alpha=0 identity error {ident:.1e}")


def test_criterion_09_goodness_of_fit():
    p = params_for(50, 1000)
    good = []
    for rep in range(100):
        seed = seed_of(9, rep)
        s, _ = simulate_mixture(p, *WINDOW, seed)
        lab = disentangle(s, fit(s, seed), seed=seed)
        good.append(lab.r2_poisson > 0.9 and lab.r2_sfp > 0.9)
    rate = np.mean(good)
    assert report(9, rate >= 0.8, f"both R^2 > 0.9 on {rate:.0%} of 100 series")


def test_criterion_10_anomaly_calibration():
    rng = np.random.default_rng(seed_of(10))
    cov = np.array([[1.0, -0.4 * 0.5], [-0.4 * 0.5, 0.25]])
    x = rng.multivariate_normal([0.0, 0.0], cov, 10_000)
    _, flag = anomaly_scores(x, fit_robust_gaussian(x), 0.01)
    rate = flag.mean()
    # replace 10% of the points by outliers 10 sd out, on a random side of
    # each coordinate, and compare against the clean fit of the same sample
    base = fit_robust_gaussian(x)
    sd = np.sqrt(np.diag(cov))
    dirty = x.copy()
    k = len(x) // 10
    dirty[:k] = 10 * sd * rng.choice([-1.0, 1.0], size=(k, 2))
    shift = float(np.max(np.abs(fit_robust_gaussian(dirty).center - base.center) / sd))
    one_sided = x.copy()
    one_sided[:k] = 10 * sd
    shift_one = float(np.max(np.abs(fit_robust_gaussian(one_sided).center - base.center) / sd))
    ok = abs(rate - 0.01) <= 0.01 and shift < 0.05
    assert report(10, ok, f"flag rate {rate:.2%}, center shift under 10% two-sided "
                          f"contamination {shift:.3f} sd (one-sided: {shift_one:.3f} sd)")


def _planted_burst(seed):
    rng = np.random.default_rng(seed)
    t = np.sort(np.r_[poisson_times(1.0, 0, 1000, rng), sfp_times(0.1, 400, 450, rng)])
    return validate_series(t, 0, 1000)


def test_criterion_11_burst_detection():
    hits = []
    for trial in range(50):
        seed = seed_of(11, trial)
        s = _planted_burst(seed)
        segs = detect_bursts(s, fit(s, seed), seed)
        top = top_segment(segs)
        hits.append(jaccard(top.t_start, top.t_end, 400, 450) >= 0.5)
    exact = 0
    rng = np.random.default_rng(seed_of(111))
    for _ in range(100):
        t = np.sort(rng.uniform(0, 10, 40))
        y = np.arange(1.0, 41.0)
        k = int(rng.integers(1, 11))
        bounds = np.r_[0.0, np.sort(rng.choice(t[:-1], k, replace=False)), 10.0]
        pen = float(rng.uniform(0.05, 5))
        cuts, cost = segment(t, y, bounds, pen)
        want_cost, want_cuts = brute_force_segmentation(t, y, bounds, pen)
        exact += bool(np.array_equal(cuts, want_cuts) and math.isclose(cost, want_cost,
                                                                        rel_tol=1e-9))
    rate = np.mean(hits)
    ok = rate >= 0.9 and exact == 100
    assert report(11, ok, f"planted burst recovered (Jaccard >= 0.5) in {rate:.0%} of 50 "
                          f"trials; DP equals brute force in {exact}/100 cases")


def test_criterion_12_sfp_simulator_law():
    mu, k = 1.0, 10
    c = mu / math.e
    rng = np.random.default_rng(seed_of(12))
    xs, ys, total = [], [], 0
    short = 0
    while total < 100_000:
        # the window is long enough that every path reaches k + 1 gaps, so
        # keeping the first k + 1 does not select on their lengths
        g = np.diff(sfp_times(mu, 0, 1e5, rng))[:k + 1]
        if len(g) < k + 1:
            short += 1
            continue
        xs.append(g[:-1])
        ys.append(g[1:])
        total += k
    x, y = np.concatenate(xs), np.concatenate(ys)
    slope, icpt = np.polyfit(x, y, 1)
    # the next gap is exponential, so its sd equals its conditional mean:
    # reweight by the fitted mean (feasible generalised least squares)
    for _ in range(3):
        slope, icpt = np.polyfit(x, y, 1, w=1.0 / np.maximum(icpt + slope * x, 1e-12))
    ok = abs(slope - 1) <= 0.05 and abs(icpt / c - 1) <= 0.05 and short == 0
    assert report(12, ok, f"slope {slope:.4f}, intercept {icpt:.4f} vs mu/e {c:.4f} "
                          f"over {len(x)} gaps ({short} short paths)")


def test_criterion_13_performance():
    def timed(n, seed):
        s, _ = simulate_mixture(params_for(50, n), *WINDOW, seed)
        start = time.perf_counter()
        fit_em(s, EmConfig(seed=seed))
        return time.perf_counter() - start

    timed(1000, 0)  # compile and warm caches
    t1 = [timed(1000, seed_of(13, k)) for k in range(10)]
    t2 = [timed(2000, seed_of(14, k)) for k in range(10)]
    worst, ratio = max(t1), float(np.median(t2) / np.median(t1))
    ok = worst < 5.0 and ratio <= 3.0
    assert report(13, ok, f"slowest n=1000 fit {worst:.2f} s, median n=2000/n=1000 "
                          f"time ratio {ratio:.2f}")
