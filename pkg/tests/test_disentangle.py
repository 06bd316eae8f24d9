import numpy as np
import pytest

from busca.core import Label, MixtureFit, MixtureParams, RefinementFailed, validate_series
from busca.disentangle import disentangle, disentangle_all
from busca.estimate import EmConfig, fit_em
from busca.simulate import pick_params_for_psi, simulate_mixture, simulate_poisson


@pytest.fixture(scope="module")
def mixed():
    p = pick_params_for_psi(50, 1000)
    s, truth = simulate_mixture(p, 0, 1000, 21)
    return s, truth, fit_em(s, EmConfig(seed=21))


def test_deterministic(mixed):
    s, _, f = mixed
    a, b = disentangle(s, f, 10, 3), disentangle(s, f, 10, 3)
    assert np.array_equal(a.labels, b.labels) and a.r2_sfp == b.r2_sfp


def test_selected_replication_is_the_max_min(mixed):
    s, _, f = mixed
    best = disentangle(s, f, 15, 4)
    mins = [min(r.r2_poisson, r.r2_sfp) for r in disentangle_all(s, f, 15, 4)]
    assert min(best.r2_poisson, best.r2_sfp) == max(mins) >= np.median(mins)


def test_poisson_count_matches_fitted_rate(mixed):
    s, _, f = mixed
    lab = disentangle(s, f, 20, 5)
    expected = f.lambda_p * s.length
    assert abs(lab.poisson_mask.sum() - expected) <= 3 * np.sqrt(expected)


def test_accuracy_beats_chance(mixed):
    s, truth, f = mixed
    lab = disentangle(s, f, 20, 6)
    assert np.mean(lab.labels == truth.labels) > 0.55


def test_pure_poisson_forced_through():
    s = simulate_poisson(1.0, 0, 500, 7)
    fit = MixtureFit(MixtureParams(s.n / 500, 50.0), 0.0, 0.0, 1, True)
    lab = disentangle(s, fit, 20, 1)
    assert lab.sfp_mask.sum() < 0.4 * s.n and lab.r2_poisson > 0.99


def test_all_degenerate_raises():
    s = validate_series([1.0, 2.0, 3.0], 0, 3)
    fit = MixtureFit(MixtureParams(100.0, 1.0), 0.0, 0.0, 1, True)
    with pytest.raises(RefinementFailed):
        disentangle(s, fit, 5, 0)
    with pytest.raises(ValueError):
        disentangle(s, fit, 0, 0)


def test_pure_sfp_fit_labels_everything_sfp():
    s = validate_series(np.cumsum(np.random.default_rng(0).exponential(1, 50)))
    lab = disentangle(s, MixtureFit(MixtureParams(0.0, 1.0), 100.0, 0.0, 1, True), 5, 0)
    assert np.all(lab.sfp_mask) and np.isnan(lab.r2_poisson) and 0 <= lab.r2_sfp <= 1


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason=(
    "nearest-event deletion removes the event closest to each pseudo-event "
    "whatever its source, so inside SFP clusters it mostly deletes SFP events; "
    "label accuracy saturates near 63% at psi=50"))
def test_label_accuracy_above_seventy_percent():
    p = pick_params_for_psi(50, 1000)
    acc = []
    for seed in range(20):
        s, truth = simulate_mixture(p, 0, 1000, 100 + seed)
        lab = disentangle(s, fit_em(s, EmConfig(seed=seed)), 20, seed)
        acc.append(np.mean(lab.labels == truth.labels))
    assert np.median(acc) > 0.7
