from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsexplain.series import (
    DegenerateInputError,
    TimeSeries,
    detrend,
    fit_line,
    moving_mean,
    resample,
    znormalize,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def series(min_size=2, max_size=64):
    return arrays(np.float64, st.integers(min_size, max_size), elements=finite)


class TestTimeSeries:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="index 1"):
            TimeSeries([1.0, np.nan, 2.0])

    def test_rejects_bad_period_and_empty(self):
        with pytest.raises(ValueError):
            TimeSeries([1.0], sample_period=0)
        with pytest.raises(DegenerateInputError):
            TimeSeries([])

    def test_values_are_read_only(self):
        ts = TimeSeries([1.0, 2.0])
        with pytest.raises(ValueError):
            ts.values[0] = 5.0

    def test_slice_keeps_time(self):
        ts = TimeSeries(np.arange(10.0), sample_period=60, start_time=datetime(2024, 1, 1))
        sub = ts[3:6]
        assert sub.start_time == datetime(2024, 1, 1, 0, 3)
        assert list(sub.values) == [3.0, 4.0, 5.0]
        assert ts[4] == 4.0


class TestZnormalize:
    def test_hand_example(self):
        np.testing.assert_allclose(znormalize([1, 2, 3]), [-1.2247449, 0, 1.2247449], atol=1e-7)

    def test_flat_is_zero(self):
        assert np.array_equal(znormalize([5, 5, 5, 5]), np.zeros(4))

    def test_flat_with_float_residue(self):
        # mean of a constant 0.1 run is not exactly 0.1
        assert np.array_equal(znormalize(np.full(7, 0.1)), np.zeros(7))

    def test_too_short(self):
        with pytest.raises(DegenerateInputError):
            znormalize([1.0])

    @given(series())
    def test_moments(self, x):
        z = znormalize(x)
        if np.all(z == 0):
            return
        assert abs(z.mean()) < 1e-9
        assert abs(z.std() - 1) < 1e-9

    @given(series())
    def test_idempotent(self, x):
        z = znormalize(x)
        np.testing.assert_allclose(znormalize(z), z, atol=1e-9)


class TestResample:
    def test_examples(self):
        assert list(resample([0, 2], 3)) == [0, 1, 2]
        np.testing.assert_allclose(resample([0, 1, 2, 3], 7), [0, 0.5, 1, 1.5, 2, 2.5, 3])

    def test_identity(self, rng):
        x = rng.standard_normal(20)
        assert np.array_equal(resample(x, 20), x)

    def test_too_short(self):
        with pytest.raises(DegenerateInputError):
            resample([1.0, 2.0], 1)

    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(2, 50), st.integers(2, 80))
    def test_exact_on_affine(self, a, b, n, target):
        x = a * np.arange(n) + b
        pos = np.arange(target) * (n - 1) / (target - 1)
        np.testing.assert_allclose(resample(x, target), a * pos + b, atol=1e-9)

    @given(series(max_size=40), st.integers(2, 60))
    def test_endpoints(self, x, target):
        y = resample(x, target)
        assert y[0] == x[0] and y[-1] == x[-1]


class TestMovingMean:
    def test_examples(self):
        assert list(moving_mean([1, 1, 1, 1], 3)) == [1, 1, 1, 1]
        np.testing.assert_allclose(moving_mean([0, 3, 0, 3, 0], 3), [1.5, 1, 2, 1, 1.5])

    def test_identity_window(self, rng):
        x = rng.standard_normal(9)
        assert np.array_equal(moving_mean(x, 1), x)

    def test_window_too_wide(self):
        with pytest.raises(DegenerateInputError):
            moving_mean([1, 2], 3)

    @given(finite, st.integers(1, 40), st.integers(0, 9))
    def test_constant_exact(self, c, n, half):
        w = min(2 * half + 1, n)
        assert np.array_equal(moving_mean(np.full(n, c), w), np.full(n, c))

    @given(series(3, 30), st.sampled_from([1, 3, 5]))
    def test_matches_definition(self, x, w):
        if w > x.size:
            return
        h = w // 2
        ref = [x[max(0, i - h):i + h + 1].mean() for i in range(x.size)]
        np.testing.assert_allclose(moving_mean(x, w), ref, atol=1e-9 * (1 + np.abs(x).max()))


class TestFitLine:
    def test_examples(self):
        f = fit_line([0, 1, 2, 3])
        assert f.slope == pytest.approx(1) and f.intercept == pytest.approx(0, abs=1e-12)
        f = fit_line([5, 5, 5])
        assert f.slope == 0 and f.intercept == 5
        f = fit_line([0, 2, 1, 3])
        assert f.slope == pytest.approx(0.8) and f.intercept == pytest.approx(0.3)

    def test_residual_beats_random_lines(self, rng):
        y = rng.standard_normal(12)
        t = np.arange(12)
        f = fit_line(y)
        best = np.sum((y - f(12)) ** 2)
        for s, b in rng.normal(0, 1, size=(1000, 2)):
            assert best <= np.sum((y - (s * t + b)) ** 2)

    def test_detrend_removes_line(self, rng):
        y = 0.3 * np.arange(30) + 2 + 0.01 * rng.standard_normal(30)
        assert abs(fit_line(detrend(y)).slope) < 1e-12
