"""
Synthetic experiments: emitter populations in a transmission scan, gate-voltage
plateau maps, and their ground truth.

Noise is multiplicative Gaussian on the transmission. A configurable fraction
of emitters undergoes spectral diffusion during the scan: the resonance
follows an AR(1) jitter sample by sample, which distorts the recorded dip away
from a single lineshape (the population the quality gates call *noisy*).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientSpan
from .wgqed import (
    BandEdgeModel,
    EmitterModel,
    ScanTrace,
    band_envelope,
    frequency_to_wavelength,
    stark_resonance,
    transmission_amplitude,
    wavelength_to_frequency,
)


class OverlapWarning(UserWarning):
    """Two synthetic emitters sit closer than three times the larger linewidth."""


@dataclass(frozen=True)
class PopulationSpec:
    """
    Parameters
    ----------
    count : int
        Number of emitters.
    lambda_min, lambda_max : float
        Scan span [m].
    step : float
        Frequency step [Hz].
    gamma_min, gamma_max : float
        Linewidth range [Hz]; log-uniform, both endpoints included.
    beta_min, beta_max : float
        Coupling range.
    beta_dist : {"uniform", "loguniform"}
        Distribution of the coupling over its range.
    fano_max : float
        Upper bound of the background amplitude ``|exp(i theta) - 1|``; the
        background is a phase rotation so the off-resonance level stays 1.
        Explicit ``emitters`` are used as given.
    noise : float
        Relative RMS of the multiplicative noise.
    lambda_c : float
        Band-edge cutoff [m].
    min_spacing : float
        Minimum centre spacing in units of the larger linewidth of a pair.
    diffusion_fraction : float
        Fraction of emitters with spectral diffusion (exactly
        ``round(fraction * count)`` of them, chosen at random).
    diffusion_rms : float
        RMS of the resonance jitter, in units of the emitter's linewidth.
    diffusion_corr : float
        AR(1) correlation between consecutive samples.
    seed : int

    Notes
    -----
    Linewidths and couplings are stratified draws (one per quantile bin,
    randomly paired), so the population composition is nearly fixed and the
    seed mainly moves positions, pairings and noise.
    """

    count: int = 79
    lambda_min: float = 944e-9
    lambda_max: float = 950e-9
    step: float = 100e6
    gamma_min: float = 120e6
    gamma_max: float = 1660e6
    beta_min: float = 0.02
    beta_max: float = 0.6
    beta_dist: str = "uniform"
    fano_max: float = 0.05
    noise: float = 0.01
    lambda_c: float = 950.2e-9
    min_spacing: float = 3.0
    diffusion_fraction: float = 0.0
    diffusion_rms: float = 0.5
    diffusion_corr: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if not self.lambda_max > self.lambda_min > 0:
            raise ValueError("span must be > 0")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if not 0 < self.gamma_min <= self.gamma_max:
            raise ValueError("need 0 < gamma_min <= gamma_max")
        if not 0 <= self.beta_min <= self.beta_max <= 1:
            raise ValueError("need 0 <= beta_min <= beta_max <= 1")
        if self.beta_dist not in ("uniform", "loguniform"):
            raise ValueError(f"unknown beta_dist {self.beta_dist!r}")
        if self.beta_dist == "loguniform" and not self.beta_min > 0:
            raise ValueError("loguniform coupling needs beta_min > 0")
        if self.noise < 0 or self.fano_max < 0:
            raise ValueError("noise and fano_max must be >= 0")
        if not 0 <= self.diffusion_fraction <= 1:
            raise ValueError("diffusion_fraction must lie in [0, 1]")
        if not 0 <= self.diffusion_corr < 1:
            raise ValueError("diffusion_corr must lie in [0, 1)")


@dataclass
class SyntheticScan:
    trace: ScanTrace
    emitters: list  # EmitterModel, ordered by nu0
    diffusing: list  # bool per emitter
    spec: PopulationSpec

    def truth(self) -> dict:
        """Ground-truth sidecar (SI units)."""
        rows = []
        for m, dif in zip(self.emitters, self.diffusing):
            rows.append({
                "nu0_hz": m.nu0,
                "gamma_tot_hz": m.gamma_tot,
                "beta": m.beta,
                "fano_amp": m.fano_amp,
                "fano_phase_rad": m.fano_phase,
                "diffusing": bool(dif),
            })
        return {"spec": asdict(self.spec), "emitters": rows}


def scan_axis(spec: PopulationSpec) -> np.ndarray:
    f_lo = float(wavelength_to_frequency(spec.lambda_max))
    f_hi = float(wavelength_to_frequency(spec.lambda_min))
    n = int(math.floor((f_hi - f_lo) / spec.step)) + 1
    return f_lo + spec.step * np.arange(n)


def _stratified(rng, n):
    """One uniform draw per stratum [k/n, (k+1)/n), in random order."""
    return (rng.permutation(n) + rng.uniform(size=n)) / max(n, 1)


def _draw_population(spec: PopulationSpec, axis, rng) -> list[EmitterModel]:
    n = spec.count
    if n == 0:
        return []
    u = _stratified(rng, n)
    if n >= 2:
        u[np.argmin(u)], u[np.argmax(u)] = 0.0, 1.0  # pin the range endpoints
    gammas = spec.gamma_min * (spec.gamma_max / spec.gamma_min) ** u
    margin = 3.0 * spec.gamma_max
    lo, hi = axis[0] + margin, axis[-1] - margin
    centers: list[float] = []
    widths: list[float] = []
    for g in gammas:
        for _ in range(10_000):
            c = rng.uniform(lo, hi)
            if all(abs(c - c2) >= spec.min_spacing * max(g, g2) for c2, g2 in zip(centers, widths)):
                break
        else:
            raise ValueError("cannot place emitters with the requested spacing")
        centers.append(c)
        widths.append(g)
    ub = _stratified(rng, n)
    if spec.beta_dist == "loguniform":
        betas = spec.beta_min * (spec.beta_max / spec.beta_min) ** ub
    else:
        betas = spec.beta_min + (spec.beta_max - spec.beta_min) * ub
    # background as a pure phase rotation w = exp(i theta) of the guided field,
    # so |t|^2 -> 1 off resonance and the local baseline stays at unity
    theta_max = 2.0 * math.asin(min(spec.fano_max, 2.0) / 2.0)
    w = np.exp(1j * rng.uniform(-theta_max, theta_max, n)) - 1.0
    famp, fph = np.abs(w), np.angle(w)
    ems = [EmitterModel(nu0=c, gamma_tot=g, beta=b, fano_amp=a, fano_phase=p)
           for c, g, b, a, p in zip(centers, widths, betas, famp, fph)]
    return sorted(ems, key=lambda m: m.nu0)


def _check_overlaps(ems: list[EmitterModel]) -> None:
    for m1, m2 in zip(ems[:-1], ems[1:]):
        if m2.nu0 - m1.nu0 < 3.0 * max(m1.gamma_tot, m2.gamma_tot):
            warnings.warn(f"emitters at {m1.nu0:.6e} Hz and {m2.nu0:.6e} Hz overlap",
                          OverlapWarning, stacklevel=3)


def _ar1(rng, n, rho):
    e = rng.standard_normal(n) * math.sqrt(1.0 - rho * rho)
    x = np.empty(n)
    x[0] = rng.standard_normal()
    for i in range(1, n):
        x[i] = rho * x[i - 1] + e[i]
    return x


def synthesize_scan(spec: PopulationSpec, emitters: Optional[list[EmitterModel]] = None) -> SyntheticScan:
    """Transmission scan of a population over the band-edge envelope.

    ``emitters`` overrides the random population (``spec`` still sets the
    axis, noise, band edge and seed).
    """
    rng = np.random.default_rng(spec.seed)
    axis = scan_axis(spec)
    ems = _draw_population(spec, axis, rng) if emitters is None else sorted(emitters, key=lambda m: m.nu0)
    _check_overlaps(ems)
    n_dif = int(round(spec.diffusion_fraction * len(ems)))
    diffusing = [bool(x) for x in np.isin(np.arange(len(ems)), rng.permutation(len(ems))[:n_dif])]
    band = BandEdgeModel(lambda_c=spec.lambda_c)
    trans = np.asarray(band_envelope(band, frequency_to_wavelength(axis)), dtype=float).copy()
    for m, dif in zip(ems, diffusing):
        delta = axis - m.nu0
        if dif:
            delta = delta - spec.diffusion_rms * m.gamma_tot * _ar1(rng, delta.size, spec.diffusion_corr)
        t = transmission_amplitude(m, delta)
        trans *= (t * t.conj()).real
    noisy = trans * (1.0 + spec.noise * rng.standard_normal(axis.size))
    trace = ScanTrace(axis, np.maximum(noisy, 0.0), step=spec.step,
                      meta={"seed": spec.seed, "noise": spec.noise, "count": len(ems)})
    return SyntheticScan(trace=trace, emitters=ems, diffusing=[bool(d) for d in diffusing], spec=spec)


# ---------------------------------------------------------------------------
# charge plateau

@dataclass
class PlateauMap:
    v_grid: np.ndarray  # V
    nu_grid: np.ndarray  # Hz
    values: np.ndarray  # shape (len(v_grid), len(nu_grid))
    meta: dict = field(default_factory=dict)


def synthesize_plateau(m: EmitterModel, v_grid, nu_grid, noise: float = 0.0, seed: int = 0) -> PlateauMap:
    """Transmission vs (gate voltage, laser frequency).

    Inside the plateau each row carries the dip at the Stark-shifted
    resonance; outside, the row is flat (emitter dark).
    """
    v_grid = np.asarray(v_grid, dtype=float)
    nu_grid = np.asarray(nu_grid, dtype=float)
    for g, name in ((v_grid, "v_grid"), (nu_grid, "nu_grid")):
        if g.ndim != 1 or g.size < 2 or not np.all(np.diff(g) > 0):
            raise ValueError(f"{name} must be strictly increasing")
    rng = np.random.default_rng(seed)
    out = np.ones((v_grid.size, nu_grid.size))
    for i, v in enumerate(v_grid):
        nu = stark_resonance(m, float(v))
        if nu is not None:
            t = transmission_amplitude(m, nu_grid - nu)
            out[i] = (t * t.conj()).real
    if noise:
        out *= 1.0 + noise * rng.standard_normal(out.shape)
    return PlateauMap(v_grid, nu_grid, np.maximum(out, 0.0), meta={"seed": seed, "noise": noise})


def extract_ridge(pm: PlateauMap, min_depth: float = 0.1):
    """Per-row dip position and the plateau bounds re-extracted from a map.

    Returns ``(slope [Hz/V], intercept [Hz], v_on, v_off)``; the ridge is the
    parabolic-refined row minimum, fitted linearly over rows with a dip.
    """
    depth = 1.0 - pm.values.min(axis=1)
    rows = np.flatnonzero(depth > min_depth)
    if rows.size < 2:
        raise InsufficientSpan("no plateau in map")
    centers = []
    step = pm.nu_grid[1] - pm.nu_grid[0]
    for i in rows:
        y = pm.values[i]
        k = int(np.clip(np.argmin(y), 1, y.size - 2))
        den = y[k - 1] - 2 * y[k] + y[k + 1]
        off = 0.5 * (y[k - 1] - y[k + 1]) / den if den > 0 else 0.0
        centers.append(pm.nu_grid[k] + off * step)
    slope, icpt = np.polyfit(pm.v_grid[rows], centers, 1)
    return float(slope), float(icpt), float(pm.v_grid[rows[0]]), float(pm.v_grid[rows[-1]])
