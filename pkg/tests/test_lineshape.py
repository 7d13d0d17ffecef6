import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcwqd.lineshape import (
    DipCandidate,
    DipFit,
    GateConfig,
    _resolve_overlaps,
    canonical_branch,
    classify,
    detect_dips,
    equivalent_branches,
    estimate_noise,
    fit_dip,
    fit_dips,
    linewidth_statistics,
)
from pcwqd.wgqed import EmitterModel, ScanTrace, transmission_amplitude, transmission_spectrum

NU0 = 316e12


def _noisy_trace(emitters, axis, noise, seed):
    T = np.ones_like(axis)
    for m in emitters:
        t = transmission_amplitude(m, axis - m.nu0)
        T *= np.abs(t) ** 2
    rng = np.random.default_rng(seed)
    return ScanTrace(axis, np.maximum(T * (1 + noise * rng.standard_normal(axis.size)), 0.0))


def _curve(beta, fr, fi, x):
    return np.abs(1 + fr + 1j * fi - beta / (1 - 1j * x)) ** 2


@given(st.floats(0.05, 0.95), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_equivalent_branches_share_the_curve(beta, fr, fi):
    x = np.linspace(-20, 20, 201)
    ref = _curve(beta, fr, fi, x)
    for b, r, i in equivalent_branches(beta, fr, fi):
        assert np.allclose(_curve(b, r, i, x), ref, rtol=0, atol=1e-12)


@given(st.floats(0.05, 0.95), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_canonical_branch_is_idempotent(beta, fr, fi):
    once = canonical_branch(beta, fr, fi)
    twice = canonical_branch(*once)
    assert np.allclose(once, twice, atol=1e-12)
    assert once[0] <= 1.0 + 1e-9


def test_canonical_branch_prefers_weak_background():
    # a weak-background physical solution should come back unchanged
    b, r, i = canonical_branch(0.3, 0.01, -0.02)
    assert (b, r, i) == pytest.approx((0.3, 0.01, -0.02), abs=1e-12)


@pytest.mark.parametrize("beta, gamma, fano", [
    (0.5, 538e6, 0.0),
    (0.2, 150e6, 0.03),
    (0.8, 1.5e9, 0.05),
])
def test_fit_recovers_parameters(beta, gamma, fano):
    m = EmitterModel(nu0=NU0, gamma_tot=gamma, beta=beta, fano_amp=fano, fano_phase=0.4)
    axis = NU0 + np.linspace(-15 * gamma, 15 * gamma, 1501)
    tr = _noisy_trace([m], axis, 0.005, seed=3)
    (c,) = detect_dips(tr, min_prominence=0.05, baseline_window=60 * gamma)
    f = fit_dip(tr, c)
    assert f.converged
    for name, truth in (("center", NU0), ("gamma_rt", gamma), ("beta_eff", beta)):
        assert abs(getattr(f, name) - truth) < 5 * f.sigma[name] + 1e-9 * abs(truth)
    assert f.chi2_red == pytest.approx(1.0, abs=0.3)


def test_noiseless_fit_is_exact():
    m = EmitterModel(nu0=NU0, gamma_tot=700e6, beta=0.35)
    axis = NU0 + np.linspace(-8e9, 8e9, 801)
    f = fit_dip(transmission_spectrum(m, axis), DipCandidate(0, 801, 400, 0.5))
    assert f.gamma_rt == pytest.approx(700e6, rel=1e-9)
    assert f.beta_eff == pytest.approx(0.35, rel=1e-9)
    assert f.depth == pytest.approx(0.35 * 1.65, rel=1e-9)


def test_estimate_noise_recovers_white_noise():
    rng = np.random.default_rng(0)
    v = 1 + 0.01 * rng.standard_normal(100_000)
    assert estimate_noise(v) == pytest.approx(0.01, rel=0.02)


def test_no_false_dips_in_pure_noise():
    axis = NU0 + 100e6 * np.arange(20_000)
    rng = np.random.default_rng(11)
    tr = ScanTrace(axis, 1 + 0.01 * rng.standard_normal(axis.size))
    assert detect_dips(tr, min_prominence=0.03, smooth=7) == []


def test_detects_every_isolated_dip():
    gammas = [200e6, 500e6, 1e9, 1.6e9]
    ems = [EmitterModel(nu0=NU0 + k * 40e9, gamma_tot=g, beta=0.4) for k, g in enumerate(gammas)]
    axis = NU0 + np.arange(-200, 1800) * 100e6
    tr = _noisy_trace(ems, axis, 0.005, seed=5)
    cands = detect_dips(tr, min_prominence=0.05)
    assert len(cands) == 4
    fits = fit_dips(tr, cands)
    assert [f.gamma_rt for f in fits] == pytest.approx(gammas, rel=0.1)


def test_fit_dips_is_independent_of_workers():
    ems = [EmitterModel(nu0=NU0 + k * 30e9, gamma_tot=5e8, beta=0.5) for k in range(4)]
    axis = NU0 + np.arange(-100, 1300) * 100e6
    tr = _noisy_trace(ems, axis, 0.01, seed=1)
    cands = detect_dips(tr)
    serial = fit_dips(tr, cands)
    threaded = fit_dips(tr, cands, workers=3)
    assert [f.to_dict() for f in serial] == [f.to_dict() for f in threaded]


def test_overlap_split_keeps_each_minimum():
    v = np.ones(60)
    v[20], v[30] = 0.5, 0.6
    cands = [[5, 40, 20, 0.5], [15, 50, 30, 0.4]]
    out = _resolve_overlaps(cands, v)
    assert len(out) == 2
    for c in out:
        assert c.start <= c.index < c.stop
    assert out[0].stop == out[1].start


def test_overlap_too_close_drops_shallower():
    v = np.ones(40)
    v[20], v[22] = 0.5, 0.7
    out = _resolve_overlaps([[15, 25, 20, 0.5], [17, 27, 22, 0.3]], v)
    assert [c.index for c in out] == [20]


@pytest.mark.parametrize("kwargs", [
    {"start": 0, "stop": 5, "index": 2, "prominence": 0.1},
    {"start": 0, "stop": 10, "index": 2, "prominence": 0.0},
])
def test_candidate_validation(kwargs):
    with pytest.raises(ValueError):
        DipCandidate(**kwargs)


def _fit(**kw):
    base = dict(center=NU0, gamma_rt=5e8, beta_eff=0.3, fano_amp=0.0, fano_phase=0.0,
                sigma={"gamma_rt": 1e7}, chi2_red=1.0, converged=True, noise_rms=0.01)
    base.update(kw)
    return DipFit(**base)


@pytest.mark.parametrize("kw, reason", [
    ({}, None),
    ({"converged": False}, "unconverged"),
    ({"beta_eff": 0.02}, "shallow"),  # depth 0.0396 < 5 * 0.01
    ({"chi2_red": 6.0}, "noisy"),
    ({"sigma": {"gamma_rt": 3e8}}, "noisy"),
])
def test_classify(kw, reason):
    assert classify(_fit(**kw)) == reason


def test_gate_thresholds_are_configurable():
    loose = GateConfig(min_depth_snr=1.0, max_chi2_red=10.0, max_rel_sigma=1.0)
    assert classify(_fit(beta_eff=0.02, chi2_red=6.0), loose) is None


def test_linewidth_statistics_accounting():
    fits = [_fit(gamma_rt=g) for g in (2e8, 4e8, 9e8)] + [_fit(converged=False), _fit(chi2_red=9.0)]
    s = linewidth_statistics(fits)
    assert (s.total, s.fitted) == (5, 3)
    assert s.rejected == {"shallow": 0, "noisy": 1, "unconverged": 1}
    assert (s.min, s.median, s.max) == (2e8, 4e8, 9e8)
    assert s.fraction == pytest.approx(0.6)
    assert math.isnan(linewidth_statistics([]).fraction)
