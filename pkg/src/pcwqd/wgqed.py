"""
Forward models for an emitter in a single-mode photonic-crystal waveguide.

The transmission amplitude of a two-level emitter coupled with efficiency
``beta`` to the guided mode, with a weak coherent background reflection added
in amplitude, is::

    t(delta) = 1 - beta / (1 - 2j*delta/gamma_tot) + fano_amp * exp(1j*fano_phase)

With ``fano_amp = 0`` the dip ``1 - |t|**2`` has a half-depth exactly at
``delta = +-gamma_tot/2`` for every ``beta``, so its FWHM is ``gamma_tot``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

C_LIGHT = 299_792_458.0  # m/s


def wavelength_to_frequency(lam):
    return C_LIGHT / np.asarray(lam, dtype=float)


def frequency_to_wavelength(nu):
    return C_LIGHT / np.asarray(nu, dtype=float)


@dataclass(frozen=True)
class EmitterModel:
    """
    Parameters
    ----------
    nu0 : float
        Resonance frequency [Hz] at the plateau anchor ``plateau[0]``.
    gamma_tot : float
        Total linewidth, FWHM [Hz].
    beta : float
        Coupling fraction into the guided mode, 0..1.
    fano_amp, fano_phase : float
        Background reflection amplitude (>= 0) and phase [rad].
    stark_slope : float
        d(nu)/dV [Hz/V].
    plateau : (float, float)
        Gate voltages (V_on, V_off) bounding the charge plateau.
    """

    nu0: float
    gamma_tot: float
    beta: float = 1.0
    fano_amp: float = 0.0
    fano_phase: float = 0.0
    stark_slope: float = 0.0
    plateau: tuple = (-np.inf, np.inf)

    def __post_init__(self):
        if not self.gamma_tot > 0:
            raise ValueError(f"gamma_tot must be > 0, got {self.gamma_tot}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.fano_amp < 0:
            raise ValueError("fano_amp must be >= 0")
        v_on, v_off = self.plateau
        if not v_on < v_off:
            raise ValueError("plateau requires V_on < V_off")


@dataclass(frozen=True)
class BandEdgeModel:
    lambda_c: float  # cutoff wavelength [m]
    suppression_db: float = 20.0
    edge_width: float = 0.2e-9  # [m]

    def __post_init__(self):
        if self.suppression_db < 20:
            raise ValueError("suppression_db must be >= 20 dB")
        if not self.edge_width > 0:
            raise ValueError("edge_width must be > 0")

    @property
    def floor(self) -> float:
        return 10.0 ** (-self.suppression_db / 10.0)


@dataclass
class ScanTrace:
    axis: np.ndarray  # Hz, strictly increasing
    values: np.ndarray  # normalized transmission or counts/s
    step: float = 0.0
    meta: dict = field(default_factory=dict)  # gate_voltage_v, power_w, ...

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.axis.ndim != 1 or self.axis.shape != self.values.shape:
            raise ValueError("axis and values must be 1-D of equal length")
        if self.axis.size == 0:
            raise ValueError("empty trace")
        if self.axis.size > 1 and not np.all(np.diff(self.axis) > 0):
            raise ValueError("axis must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("values must be >= 0")
        if not self.step and self.axis.size > 1:
            self.step = float(np.median(np.diff(self.axis)))

    def __len__(self):
        return self.axis.size


def transmission_amplitude(m: EmitterModel, delta):
    """Complex transmission amplitude at detuning ``delta`` [Hz] from ``m.nu0``."""
    delta = np.asarray(delta, dtype=float)
    lorentz = 1.0 / (1.0 - 2j * delta / m.gamma_tot)
    return 1.0 - m.beta * lorentz + m.fano_amp * np.exp(1j * m.fano_phase)


def transmission_spectrum(m: EmitterModel, axis, meta: Optional[dict] = None) -> ScanTrace:
    """|t|^2 sampled on an absolute frequency ``axis``."""
    axis = np.asarray(axis, dtype=float)
    if axis.size == 0:
        raise ValueError("empty axis")
    t = transmission_amplitude(m, axis - m.nu0)
    return ScanTrace(axis, (t * t.conj()).real, meta=dict(meta or {}))


def _logistic(x):
    return 0.5 * (1.0 - np.tanh(0.5 * x))  # 1/(1+exp(x)) without overflow


def band_envelope(b: BandEdgeModel, lam):
    """Transmission factor of the waveguide band edge at wavelength ``lam``.

    A logistic step centred on ``lambda_c`` and renormalised so that it
    reaches exactly 1 at ``lambda_c - edge_width`` and exactly 0 at
    ``lambda_c + edge_width``; the stop band sits at the suppression floor.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("wavelength must be > 0")
    steep = 6.0  # logistic scale = edge_width / steep
    x = steep * (lam - b.lambda_c) / b.edge_width
    lo, hi = _logistic(steep), _logistic(-steep)
    s = np.clip((_logistic(x) - lo) / (hi - lo), 0.0, 1.0)
    out = b.floor + (1.0 - b.floor) * s
    return out if out.ndim else float(out)


def stark_resonance(m: EmitterModel, v_gate: float) -> Optional[float]:
    """Resonance frequency at gate voltage, or None outside the charge plateau."""
    v_on, v_off = m.plateau
    if not v_on <= v_gate <= v_off:
        return None
    if np.isinf(v_on):
        return m.nu0 + m.stark_slope * v_gate
    return m.nu0 + m.stark_slope * (v_gate - v_on)
