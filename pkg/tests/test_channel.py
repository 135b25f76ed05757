import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oneway_qkd.channel import ChannelParams, propagate, transmittance
from oneway_qkd.errors import InvalidParameterError
from oneway_qkd.optics import encode_pulse

# 10**(-0.205*L/10) evaluated with mpmath
T100 = 0.00891250938133745529953108681078
T50 = 0.0944060876285923380364380496602


def test_transmittance_values():
    assert transmittance(0.0, 0.205) == 1.0
    assert transmittance(100.0, 0.205) == pytest.approx(T100, rel=1e-13)
    assert transmittance(50.0, 0.205) == pytest.approx(T50, rel=1e-13)
    assert transmittance(50.0, 0.205) == pytest.approx(math.sqrt(transmittance(100.0, 0.205)), rel=1e-13)


@pytest.mark.parametrize("length, alpha", [(-1.0, 0.2), (10.0, 0.0), (10.0, -0.1)])
def test_transmittance_rejects_bad_input(length, alpha):
    with pytest.raises(InvalidParameterError):
        transmittance(length, alpha)


@given(st.floats(0, 300), st.floats(0, 300), st.floats(0.01, 1.0))
def test_transmittance_is_multiplicative(l1, l2, alpha):
    assert transmittance(l1 + l2, alpha) == pytest.approx(transmittance(l1, alpha) * transmittance(l2, alpha), rel=1e-12, abs=1e-300)


@given(st.floats(0, 300), st.floats(0.001, 50))
def test_transmittance_decreases(length, extra):
    assert transmittance(length + extra) < transmittance(length) <= 1.0


def test_propagate_scales_mean_and_keeps_phase():
    pulse = encode_pulse(1, 0, 0.1, 3)
    assert propagate(pulse, ChannelParams(0.0)).mean_photons == 0.1
    far = propagate(pulse, ChannelParams(100.0, 0.205))
    assert far.mean_photons == pytest.approx(0.1 * T100, rel=1e-13)
    assert far.phase_a == pulse.phase_a
    assert far.clock_index == 3
