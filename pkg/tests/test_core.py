import math

import numpy as np
import pytest

from busca.core import (DuplicateTimestamp, EmptySeries, EventSeries, InvalidParameters,
                        LabelAssignment, MixtureParams, NonFiniteTimestamp, SeriesError,
                        TimestampOutsideWindow, burstiness_scale, counting_function,
                        validate_series)


def test_well_formed_input():
    s = validate_series([1.0, 2.5, 7.0], 0, 10)
    assert s.n == 3 and (s.a, s.b) == (0.0, 10.0)


def test_duplicate_is_an_error():
    with pytest.raises(DuplicateTimestamp):
        validate_series([1.0, 1.0, 2.0])


def test_sort_normalises_order():
    s = validate_series([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(s.timestamps, [1.0, 2.0, 3.0])


@pytest.mark.parametrize("raw,a,b,err", [
    ([], None, None, EmptySeries),
    ([1.0, float("nan")], None, None, NonFiniteTimestamp),
    ([1.0, float("inf")], None, None, NonFiniteTimestamp),
    ([1.0, 5.0], 0.0, 4.0, TimestampOutsideWindow),
    ([1.0, 2.0], 3.0, 1.0, SeriesError),
    (["x"], None, None, SeriesError),
])
def test_rejections(raw, a, b, err):
    with pytest.raises(err):
        validate_series(raw, a, b)


def test_default_window():
    s = validate_series([2.0, 5.0])
    assert (s.a, s.b) == (0.0, 5.0)
    s = validate_series([-3.0, 5.0])
    assert s.a == -3.0


def test_series_is_immutable():
    s = validate_series([1.0, 2.0])
    with pytest.raises(ValueError):
        s.timestamps[0] = 0.5


def test_constructor_rechecks_order():
    with pytest.raises(SeriesError):
        EventSeries(np.array([2.0, 1.0]), 0, 3)


@pytest.mark.parametrize("t,expected", [(2.0, 2), (0.5, 0), (3.0, 3)])
def test_counting_function(t, expected):
    s = validate_series([1, 2, 3])
    assert counting_function(s, t) == expected


def test_counting_function_outside_window():
    with pytest.raises(ValueError):
        counting_function(validate_series([1, 2, 3]), 4.0)


def test_scaled_and_gaps():
    s = validate_series([1.0, 2.0, 4.0], 0, 5).scaled(60)
    assert s.b == 300.0
    np.testing.assert_allclose(s.gaps(), [60.0, 120.0])


def test_mixture_params_validation():
    assert MixtureParams(1, math.inf).is_pure_poisson
    assert MixtureParams(0, 2.0).is_pure_sfp
    for bad in [(-1, 1), (1, 0), (1, math.nan), (0, math.inf), (math.inf, 1)]:
        with pytest.raises(InvalidParameters):
            MixtureParams(*bad)


def test_burstiness_scale():
    assert burstiness_scale(0.5, 1000, 1000) == 50.0
    assert burstiness_scale(2.0, 10, 10) == 0.0
    assert burstiness_scale(0.0, 10, 10) == 100.0


def test_label_assignment_masks():
    lab = LabelAssignment([0, 1, 1, 0], 1.0, 1.0)
    assert lab.sfp_mask.sum() == 2 and lab.sfp_fraction == 0.5
