import math

import numpy as np
import pytest

from busca.core import InvalidParameters, Label, MixtureParams
from busca.simulate import (HawkesParams, pick_params_for_psi, simulate_hawkes,
                            simulate_mixture, simulate_poisson, simulate_sfp, sfp_times)


def test_poisson_count_within_four_sigma():
    for seed in range(20):
        assert 60 <= simulate_poisson(1.0, 0, 100, seed).n <= 140


def test_poisson_rejects_zero_rate():
    with pytest.raises(InvalidParameters):
        simulate_poisson(0.0, 0, 100, 1)


def test_poisson_mean_gap():
    rng = np.random.default_rng(5)
    gaps = np.concatenate([simulate_poisson(0.5, 0, 100, rng).gaps() for _ in range(1000)])
    assert abs(gaps.mean() - 2.0) < 0.5


def test_sfp_zero_gap_mean():
    # with a previous gap of 0 the next gap is exponential with mean mu/e
    rng = np.random.default_rng(3)
    first = [sfp_times(1.0, 0, 20, rng, first_gap=0.0)[:1] for _ in range(4000)]
    assert abs(np.mean(first) - 1 / math.e) < 0.02


def test_sfp_rates_vary_across_seeds():
    counts = [simulate_sfp(1.0, 0, 100, s).n for s in range(200)]
    # rates from well under 0.5 to well over 1.2 events per unit time
    assert min(counts) < 50 and max(counts) > 120


def test_simulators_are_deterministic():
    p = MixtureParams(0.5, 2.0)
    s1, l1 = simulate_mixture(p, 0, 200, 9)
    s2, l2 = simulate_mixture(p, 0, 200, 9)
    assert s1 == s2 and np.array_equal(l1.labels, l2.labels)
    assert simulate_sfp(1.0, 0, 50, 4) == simulate_sfp(1.0, 0, 50, 4)
    h = HawkesParams(0.5, 0.5, 1.0)
    assert simulate_hawkes(h, 0, 100, 2) == simulate_hawkes(h, 0, 100, 2)


def test_mixture_is_union_of_components():
    p = MixtureParams(0.5, 2.0)
    s, lab = simulate_mixture(p, 0, 200, 11)
    assert len(lab) == s.n
    rng = np.random.default_rng(11)
    from busca.simulate import poisson_times
    pp = poisson_times(0.5, 0, 200, rng)
    sf = sfp_times(2.0, 0, 200, rng)
    np.testing.assert_allclose(s.timestamps, np.sort(np.r_[pp, sf]))
    assert (lab.labels == Label.POISSON).sum() == len(pp)


def test_pure_poisson_labels():
    _, lab = simulate_mixture(MixtureParams(1.0, math.inf), 0, 50, 1)
    assert np.all(lab.labels == Label.POISSON)


def test_planted_psi_fraction():
    p = pick_params_for_psi(50, 1000)
    fracs = [simulate_mixture(p, 0, 1000, s)[1].sfp_fraction for s in range(100)]
    assert 0.45 <= np.mean(fracs) <= 0.55


def test_pick_params_edges():
    p = pick_params_for_psi(0, 100, (0, 100))
    assert p.lambda_p == 1.0 and math.isinf(p.mu)
    assert pick_params_for_psi(100, 100, (0, 100)).lambda_p == 0.0


def test_pick_params_psi50():
    p = pick_params_for_psi(50, 1000)
    assert p.lambda_p == 0.5
    counts = [simulate_sfp(p.mu, 0, 1000, s).n for s in range(50)]
    assert 400 <= np.median(counts) <= 600


def test_small_psi_scenario():
    p = pick_params_for_psi(25, 100, (0, 100))
    fracs = [simulate_mixture(p, 0, 100, s)[1].sfp_fraction for s in range(50)]
    assert abs(np.mean(fracs) - 0.25) < 0.10


def test_disjoint_poisson_counts_uncorrelated():
    rng = np.random.default_rng(0)
    left, right = [], []
    for _ in range(1000):
        t = simulate_poisson(1.0, 0, 100, rng).timestamps
        left.append(np.sum(t <= 50))
        right.append(np.sum(t > 50))
    assert abs(np.corrcoef(left, right)[0, 1]) < 0.1


def test_hawkes_alpha_zero_is_poisson_rate():
    s = simulate_hawkes(HawkesParams(2.0, 0.0, 1.0), 0, 500, 1)
    assert abs(s.n / 500 - 2.0) < 0.2
