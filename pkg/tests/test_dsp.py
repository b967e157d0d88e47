import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aririnterp.dsp import (centered_average, cos2_fade_in, delay_signal,
                            fractional_delay_kernel, odd_length, shift_integer)


def test_zero_fraction_is_exact_impulse():
    h = fractional_delay_kernel(0.0)
    assert h.sum() == 1.0 and np.count_nonzero(h) == 1


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.999), st.floats(100.0, 8000.0))
def test_fractional_delay_of_sinusoid(frac, f):
    # analytic oracle: a delayed sinusoid is the same sinusoid with a phase lag
    fs = 44100.0
    t = np.arange(2048)
    x = np.sin(2 * np.pi * f * t / fs)
    y = delay_signal(x, 5 + frac)
    ref = np.sin(2 * np.pi * f * (t - 5 - frac) / fs)
    inner = slice(64, -64)
    assert np.max(np.abs(y[inner] - ref[inner])) < 2e-3


def test_integer_delay_is_exact_shift():
    x = np.arange(10.0)
    np.testing.assert_array_equal(delay_signal(x, 3), shift_integer(x, 3))
    np.testing.assert_array_equal(shift_integer(x, -2)[:8], x[2:])
    assert not shift_integer(x, 20).any()


def test_delay_kernel_peaks_at_delay():
    x = np.zeros(128)
    x[40] = 1.0
    y = delay_signal(x, 10.5)
    assert y[50] == pytest.approx(y[51])
    assert np.argmax(y) in (50, 51)


def test_centered_average_is_zero_phase():
    x = np.zeros(51)
    x[25] = 1.0
    y = centered_average(x, 10)
    assert odd_length(10) == 11
    np.testing.assert_allclose(y[20:31], 1 / 11)
    np.testing.assert_allclose(y, y[::-1], atol=1e-15)


def test_fades_complement():
    f = cos2_fade_in(16)
    np.testing.assert_allclose(f + f[::-1], 1.0, atol=1e-15)
    assert np.all(np.diff(f) > 0)
