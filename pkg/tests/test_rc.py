import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcwqd.errors import InsufficientSpan
from pcwqd.rc import (
    CUTOFF_NOTE,
    RcDrive,
    VoltageResponse,
    attenuated_amplitude,
    capacitance,
    cutoff_frequency,
    modulated_intensity,
    fit_tau_rc,
    synthesize_sweep,
    time_domain_oracle,
    window_average,
)

LOR = VoltageResponse(width_v=1e-3)
DRIVE = RcDrive(v_ac=0.1, tau_rc=0.4e-6, i0=1.0)


@pytest.mark.parametrize("a", [1e-5, 1e-3, 0.01, 0.05, 0.3])
def test_window_average_closed_form(a):
    assert window_average(LOR, a) == pytest.approx(LOR.window_integral(a) / (2 * a), rel=1e-10)


def test_flat_response_averages_to_one():
    assert window_average(VoltageResponse(kind="flat"), 0.05) == pytest.approx(1.0, rel=1e-12)


def test_table_response_matches_lorentzian():
    v = np.linspace(-0.1, 0.1, 20001)
    tab = VoltageResponse(kind="table", table_v=tuple(v), table_s=tuple(LOR(v)))
    assert window_average(tab, 0.05) == pytest.approx(window_average(LOR, 0.05), rel=1e-5)


@given(st.floats(1.0, 1e8), st.floats(1.0, 10.0))
def test_intensity_rises_with_frequency(f, k):
    # a faster drive is attenuated more, the window shrinks, the average grows
    assert modulated_intensity(DRIVE, LOR, f * k) >= modulated_intensity(DRIVE, LOR, f) - 1e-15


def test_limits():
    assert modulated_intensity(DRIVE, LOR, 0.0) == pytest.approx(LOR.window_integral(0.05) / 0.1, rel=1e-10)
    assert modulated_intensity(DRIVE, LOR, 1e9) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("f", [1e2, 1e5, 4e5, 1e6, 3e6])
def test_uniform_kernel_oracle(f):
    assert modulated_intensity(DRIVE, LOR, f) == pytest.approx(time_domain_oracle(DRIVE, LOR, f), rel=1e-6)


def test_sinusoid_kernel_ratio():
    # arcsine dwell density: average of a Lorentzian is 1/sqrt(1 + k^2) with
    # k = 2A/width, against atan(k)/k for the uniform window
    d = RcDrive(v_ac=0.1, tau_rc=0.0)
    ratio = time_domain_oracle(d, LOR, 1.0, "sinusoid") / time_domain_oracle(d, LOR, 1.0, "uniform")
    k = 100.0
    assert ratio == pytest.approx((1 / math.sqrt(1 + k * k)) / (math.atan(k) / k), rel=1e-5)


@pytest.mark.parametrize("att, f, expected", [
    ("exponential", 0.0, 0.05),
    ("exponential", 1 / (2 * math.pi * 0.4e-6), 0.05 / math.e),
    ("lowpass", 1 / (2 * math.pi * 0.4e-6), 0.05 / math.sqrt(2)),
])
def test_attenuation(att, f, expected):
    assert attenuated_amplitude(DRIVE, f, att) == pytest.approx(expected, rel=1e-12)


def test_attenuation_rejects_bad_input():
    with pytest.raises(ValueError):
        attenuated_amplitude(DRIVE, -1.0)
    with pytest.raises(ValueError):
        attenuated_amplitude(DRIVE, 1.0, "cubic")


@pytest.mark.parametrize("att", ["exponential", "lowpass"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fit_recovers_tau(att, seed):
    truth = RcDrive(v_ac=0.1, tau_rc=0.4e-6, i0=1e4)
    data = synthesize_sweep(truth, LOR, np.geomspace(1e3, 60e6, 40), noise=0.01, attenuation=att,
                            rng=np.random.default_rng(seed))
    fit = fit_tau_rc(data, RcDrive(v_ac=0.1, tau_rc=0.0, i0=0.0), LOR, attenuation=att)
    assert fit.tau_rc == pytest.approx(0.4e-6, rel=0.03)
    assert abs(fit.tau_rc - 0.4e-6) < 4 * fit.tau_sigma
    assert fit.i0 == pytest.approx(1e4, rel=0.01)


def test_fit_rejects_flat_sweep():
    data = np.column_stack([np.geomspace(1e3, 1e6, 20), np.full(20, 5.0)])
    with pytest.raises(InsufficientSpan):
        fit_tau_rc(data, DRIVE, LOR)


def test_capacitance_and_cutoff():
    assert capacitance(0.4e-6, 7e3) == pytest.approx(57.142857e-12, rel=1e-7)
    assert cutoff_frequency(0.4e-6) == pytest.approx(397887.36, rel=1e-8)
    assert cutoff_frequency(40e-9) == pytest.approx(3.979e6, rel=1e-3)
    assert "3.98 MHz" in CUTOFF_NOTE and "397.9 kHz" in CUTOFF_NOTE
    with pytest.raises(ValueError):
        capacitance(0.4e-6, 0.0)


@pytest.mark.parametrize("kwargs", [{"width_v": 0.0}, {"kind": "gauss"}, {"kind": "table"}])
def test_response_validation(kwargs):
    with pytest.raises(ValueError):
        VoltageResponse(**kwargs)


def test_asymmetric_table_uses_both_sides():
    tab = VoltageResponse(kind="table", table_v=(-0.01, 0.0, 0.02), table_s=(0.0, 1.0, 0.0))
    # triangle areas 0.005 (left) and 0.01 (right), window [-0.05, 0.05]
    assert window_average(tab, 0.05) == pytest.approx(0.015 / 0.1, rel=1e-12)
