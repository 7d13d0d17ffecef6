"""
Resonant-transmission dip detection and Fano lineshape fitting.

Each dip is fitted independently with the waveguide-QED amplitude model of
:mod:`pcwqd.wgqed` on a fixed unit baseline (the trace is assumed normalised).
The reported linewidth ``gamma_rt`` is the FWHM of the fitted curve with the
Fano background removed, which for this model is exactly the fitted
``gamma_tot``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage, optimize, signal

from .optimize import levenberg_marquardt
from .wgqed import EmitterModel, ScanTrace, transmission_amplitude

MIN_WINDOW = 7
PARAM_NAMES = ("center", "gamma_rt", "beta_eff", "fano_amp", "fano_phase")


@dataclass(frozen=True)
class DipCandidate:
    start: int  # window is trace[start:stop]
    stop: int
    index: int  # sample of the dip minimum
    prominence: float

    def __post_init__(self):
        if self.stop - self.start < MIN_WINDOW:
            raise ValueError(f"window shorter than {MIN_WINDOW} samples")
        if not self.prominence > 0:
            raise ValueError("prominence must be > 0")

    @property
    def window(self) -> slice:
        return slice(self.start, self.stop)


@dataclass
class DipFit:
    center: float  # Hz
    gamma_rt: float  # Hz, FWHM with the Fano background omitted
    beta_eff: float
    fano_amp: float
    fano_phase: float
    sigma: dict  # 1-sigma uncertainties keyed like PARAM_NAMES
    chi2_red: float
    converged: bool
    status: str = "ok"
    noise_rms: float = 0.0
    n_points: int = 0
    window: tuple = (0, 0)

    @property
    def depth(self) -> float:
        """Peak depth of the symmetric (Fano-free) fitted dip."""
        b = self.beta_eff
        return b * (2.0 - b)

    def model(self, fano: bool = True) -> EmitterModel:
        return EmitterModel(
            nu0=self.center,
            gamma_tot=self.gamma_rt,
            beta=float(np.clip(self.beta_eff, 0.0, 1.0)),
            fano_amp=self.fano_amp if fano else 0.0,
            fano_phase=self.fano_phase,
        )

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# widths

def grid_fwhm(axis, values, baseline: float = 1.0) -> float:
    """FWHM of a dip sampled on a grid, by linear interpolation of the crossings."""
    axis = np.asarray(axis, dtype=float)
    depth = baseline - np.asarray(values, dtype=float)
    i0 = int(np.argmax(depth))
    half = 0.5 * depth[i0]
    i = i0
    while i > 0 and depth[i] > half:
        i -= 1
    j = i0
    while j < depth.size - 1 and depth[j] > half:
        j += 1
    if depth[i] > half or depth[j] > half:
        raise ValueError("dip not resolved inside the grid")
    left = axis[i] + (half - depth[i]) * (axis[i + 1] - axis[i]) / (depth[i + 1] - depth[i])
    right = axis[j - 1] + (half - depth[j - 1]) * (axis[j] - axis[j - 1]) / (depth[j] - depth[j - 1])
    return float(right - left)


def numeric_fwhm(m: EmitterModel) -> float:
    """FWHM of the dip ``|t(inf)|^2 - |t(delta)|^2`` by root finding."""
    g = m.gamma_tot

    def trans(d):
        t = transmission_amplitude(m, d)
        return float((t * t.conjugate()).real)

    base = abs(1.0 + m.fano_amp * np.exp(1j * m.fano_phase)) ** 2
    res = optimize.minimize_scalar(trans, bounds=(-3 * g, 3 * g), method="bounded",
                                   options={"xatol": 1e-10 * g})
    d0, tmin = res.x, res.fun
    half = 0.5 * (base + tmin)
    f = lambda d: trans(d) - half
    span = 50 * g
    left = optimize.brentq(f, d0 - span, d0, xtol=1e-14 * g, rtol=1e-15)
    right = optimize.brentq(f, d0, d0 + span, xtol=1e-14 * g, rtol=1e-15)
    return right - left


def fwhm_symmetric(fit: DipFit) -> float:
    """FWHM of the fitted lineshape with the Fano term set to zero."""
    return fit.gamma_rt


# ---------------------------------------------------------------------------
# detection

def estimate_noise(values) -> float:
    """Robust white-noise RMS from the MAD of first differences."""
    d = np.diff(np.asarray(values, dtype=float))
    if d.size == 0:
        return 0.0
    mad = np.median(np.abs(d - np.median(d)))
    return float(1.4826 * mad / math.sqrt(2.0))


def local_baseline(values, size: int) -> np.ndarray:
    size = max(3, min(int(size) | 1, (len(values) - 1) | 1))
    return ndimage.median_filter(np.asarray(values, dtype=float), size=size, mode="nearest")


def detect_dips(
    trace: ScanTrace,
    min_prominence: float = 0.05,
    min_width: float = 0.0,
    *,
    baseline_window: float = 30e9,
    window_factor: float = 4.0,
    min_separation: float = 0.0,
    smooth: int = 3,
) -> list[DipCandidate]:
    """Find transmission dips.

    Parameters
    ----------
    min_prominence : float
        Minimum depth relative to the running-median baseline.
    min_width : float
        Minimum half-prominence width [Hz].
    baseline_window : float
        Span of the running median that defines the local baseline [Hz].
    window_factor : float
        Fit window half-length in units of the detected width.
    min_separation : float
        Minimum distance between candidate minima [Hz].
    smooth : int
        Length of the moving average applied before peak finding [samples].
    """
    v = trace.values
    n = v.size
    if n < MIN_WINDOW:
        return []
    step = trace.step
    base = local_baseline(v, round(baseline_window / step))
    base = np.where(base > 0, base, 1.0)
    depth = 1.0 - v / base
    smoothed = ndimage.uniform_filter1d(depth, max(int(smooth), 1), mode="nearest")
    distance = max(1, int(round(min_separation / step))) if min_separation else None
    peaks, props = signal.find_peaks(
        smoothed, prominence=min_prominence, width=max(min_width / step, 0.0),
        rel_height=0.5, distance=distance,
    )
    if peaks.size == 0:
        return []
    cands = []
    for p, prom, w in zip(peaks, props["prominences"], props["widths"]):
        half = max(int(math.ceil(window_factor * w)), MIN_WINDOW // 2 + 1)
        lo, hi = max(0, p - half), min(n, p + half + 1)
        # recentre on the raw minimum near the smoothed peak
        k = lo + int(np.argmin(v[lo:hi])) if hi - lo else p
        if abs(k - p) > max(1, int(w)):
            k = p
        cands.append([lo, hi, int(k), float(prom)])
    cands.sort(key=lambda c: c[2])
    return _resolve_overlaps(cands, v)


def _resolve_overlaps(cands, v) -> list[DipCandidate]:
    """Split overlapping windows at the highest sample between the two minima.

    If a split leaves a window shorter than MIN_WINDOW the shallower dip is
    dropped and the pass restarts.
    """
    i = 0
    while i < len(cands) - 1:
        a, b = cands[i], cands[i + 1]
        if a[1] <= b[0]:
            i += 1
            continue
        # each window must keep its own minimum: a[2] < cut <= b[2]
        cut = a[2] + 1 + int(np.argmax(v[a[2] + 1:b[2] + 1])) if b[2] > a[2] else a[2]
        if b[2] <= a[2] or cut - a[0] < MIN_WINDOW or b[1] - cut < MIN_WINDOW:
            del cands[i if a[3] < b[3] else i + 1]
            i = max(i - 1, 0)
            continue
        a[1], b[0] = cut, cut
        i += 1
    return [DipCandidate(int(lo), int(hi), int(k), float(p)) for lo, hi, k, p in cands]


# ---------------------------------------------------------------------------
# fitting

def _model_and_jac(u, p):
    """|t|^2 on scaled axis ``u`` and its Jacobian w.r.t. (uc, w, beta, fr, fi)."""
    uc, w, beta, fr, fi = p
    x = 2.0 * (u - uc) / w
    L = 1.0 / (1.0 - 1j * x)
    t = 1.0 + fr + 1j * fi - beta * L
    T = (t * t.conj()).real
    dt_dx = -1j * beta * L * L
    tc = t.conj()
    J = np.empty((u.size, 5))
    J[:, 0] = 2.0 * (tc * dt_dx * (-2.0 / w)).real
    J[:, 1] = 2.0 * (tc * dt_dx * (-x / w)).real
    J[:, 2] = 2.0 * (tc * -L).real
    J[:, 3] = 2.0 * tc.real
    J[:, 4] = 2.0 * (tc * 1j).real
    return T, J


def equivalent_branches(beta, fr, fi):
    """All (beta, fr, fi) giving the same ``|t|^2`` curve as the input.

    ``|w - beta*L|**2`` with ``w = 1 + fr + 1j*fi`` expands into the basis
    ``1, 1/(1+x^2), x/(1+x^2)`` with coefficients ``c0 = |w|^2``,
    ``c1 = beta^2 - 2*beta*wr``, ``c2 = -2*beta*wi``. These pin ``beta**2``
    only up to the two roots of ``b^2 - (2 c1 + 4 c0) b + c1^2 + c2^2 = 0``.
    """
    wr, wi = 1.0 + fr, fi
    c0 = wr * wr + wi * wi
    c1 = beta * beta - 2.0 * beta * wr
    c2 = -2.0 * beta * wi
    bsum = 2.0 * c1 + 4.0 * c0
    prod = c1 * c1 + c2 * c2
    big = 0.5 * (bsum + math.sqrt(max(bsum * bsum - 4.0 * prod, 0.0)))
    out = []
    for b2 in (big, prod / big if big > 0 else 0.0):
        b = math.sqrt(max(b2, 0.0))
        if b > 0:
            out.append((b, (b * b - c1) / (2.0 * b) - 1.0, -c2 / (2.0 * b)))
    return out or [(beta, fr, fi)]


def canonical_branch(beta, fr, fi):
    """Physical branch (beta <= 1) with the weaker background reflection."""
    roots = equivalent_branches(beta, fr, fi)
    phys = [r for r in roots if r[0] <= 1.0 + 1e-9]
    if not phys:
        return min(roots, key=lambda r: r[0])
    return min(phys, key=lambda r: math.hypot(r[1], r[2]))


def _initial_guess(nu, y, k):
    tmin = max(float(y[k]), 0.0)
    half = 0.5 * (1.0 + tmin)
    step = float(np.median(np.diff(nu)))

    def cross(i, di):
        while 0 <= i + di < y.size and y[i] < half:
            i += di
        j = i - di
        if y[i] < half or y[i] == y[j]:
            return nu[i]
        return nu[j] + (half - y[j]) * (nu[i] - nu[j]) / (y[i] - y[j])

    width = cross(k, 1) - cross(k, -1)
    if not width > step:
        width = 2.0 * step
    beta = float(np.clip(1.0 - math.sqrt(tmin), 0.05, 1.0))
    # skew sign: which side of the minimum sits higher
    m = min(k, y.size - 1 - k)
    skew = float(np.sum(y[k + 1:k + 1 + m] - y[k - m:k][::-1])) if m else 0.0
    return nu[k], width, beta, math.copysign(0.02, skew) if skew else 0.0


def fit_dip(
    trace: ScanTrace,
    candidate: DipCandidate,
    init: Optional[DipFit] = None,
    *,
    noise_rms: Optional[float] = None,
    max_iter: int = 200,
) -> DipFit:
    """Fit one dip window with the Fano waveguide-QED lineshape.

    Failures (iteration cap, singular normal equations) come back as
    ``converged=False`` with ``status`` set; nothing is raised.
    """
    sl = candidate.window
    nu = trace.axis[sl]
    y = trace.values[sl]
    k = candidate.index - candidate.start
    if init is not None:
        c0, w0, b0 = init.center, init.gamma_rt, init.beta_eff
        fr0 = init.fano_amp * math.cos(init.fano_phase)
        fi0 = init.fano_amp * math.sin(init.fano_phase)
    else:
        c0, w0, b0, fi0 = _initial_guess(nu, y, k)
        fr0 = 0.0
    ref, scale = nu[k], w0
    u = (nu - ref) / scale
    p0 = np.array([(c0 - ref) / scale, w0 / scale, b0, fr0, fi0])

    def resid(p):
        return _model_and_jac(u, p)[0] - y

    def jac(p):
        return _model_and_jac(u, p)[1]

    res = levenberg_marquardt(resid, p0, jac, max_iter=max_iter)
    uc, w, beta, fr, fi = res.x
    if w < 0:  # the model is invariant under (w, fi) -> (-w, -fi)
        w, fi = -w, -fi
    beta, fr, fi = canonical_branch(beta, fr, fi)
    res.x[:] = uc, w, beta, fr, fi
    res.jac = _model_and_jac(u, res.x)[1]
    n, npar = y.size, 5
    dof = max(n - npar, 1)
    ssr = 2.0 * res.cost
    s2 = ssr / dof
    cov = res.covariance(s2)
    diag = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    amp = math.hypot(fr, fi)
    phase = math.atan2(fi, fr)
    if amp > 0:
        g_amp = np.array([fr, fi]) / amp
        g_ph = np.array([-fi, fr]) / amp**2
        c2 = cov[3:, 3:]
        s_amp = math.sqrt(max(g_amp @ c2 @ g_amp, 0.0))
        s_ph = math.sqrt(max(g_ph @ c2 @ g_ph, 0.0))
    else:
        s_amp, s_ph = float(max(diag[3], diag[4])), math.inf
    if noise_rms is None:
        lo = max(0, sl.start - 5 * n)
        noise_rms = estimate_noise(trace.values[lo:sl.stop + 5 * n])
    chi2 = s2 / noise_rms**2 if noise_rms > 0 else (0.0 if ssr == 0 else math.inf)
    converged = res.converged and res.status != "ill_conditioned"
    return DipFit(
        center=float(ref + uc * scale),
        gamma_rt=float(w * scale),
        beta_eff=float(beta),
        fano_amp=float(amp),
        fano_phase=float(phase),
        sigma={
            "center": float(diag[0] * scale),
            "gamma_rt": float(diag[1] * scale),
            "beta_eff": float(diag[2]),
            "fano_amp": float(s_amp),
            "fano_phase": float(s_ph),
        },
        chi2_red=float(chi2),
        converged=bool(converged),
        status="ok" if converged else res.status,
        noise_rms=float(noise_rms),
        n_points=int(n),
        window=(candidate.start, candidate.stop),
    )


def fit_dips(trace: ScanTrace, candidates: Sequence[DipCandidate], *, workers: int = 1,
             noise_rms: Optional[float] = None) -> list[DipFit]:
    """Fit all candidates; output ordered by fitted centre."""
    if noise_rms is None:
        noise_rms = estimate_noise(trace.values)
    job: Callable[[DipCandidate], DipFit] = lambda c: fit_dip(trace, c, noise_rms=noise_rms)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            fits = list(ex.map(job, candidates))
    else:
        fits = [job(c) for c in candidates]
    return sorted(fits, key=lambda f: f.center)


# ---------------------------------------------------------------------------
# statistics

@dataclass(frozen=True)
class GateConfig:
    """Dip acceptance thresholds.

    A dip is *shallow* if its fitted depth is below ``min_depth_snr`` times the
    noise RMS, and *noisy* if ``chi2_red > max_chi2_red`` or the relative
    linewidth error exceeds ``max_rel_sigma``.
    """

    min_depth_snr: float = 5.0
    max_chi2_red: float = 5.0
    max_rel_sigma: float = 0.5


def classify(fit: DipFit, gate: GateConfig = GateConfig()) -> Optional[str]:
    """Rejection reason, or None when the fit passes."""
    if not fit.converged:
        return "unconverged"
    if fit.depth < gate.min_depth_snr * fit.noise_rms:
        return "shallow"
    rel = fit.sigma["gamma_rt"] / fit.gamma_rt if fit.gamma_rt > 0 else math.inf
    if fit.chi2_red > gate.max_chi2_red or not rel <= gate.max_rel_sigma:
        return "noisy"
    return None


@dataclass
class LinewidthSummary:
    total: int
    fitted: int
    rejected: dict = field(default_factory=dict)
    min: float = math.nan
    max: float = math.nan
    median: float = math.nan

    @property
    def fraction(self) -> float:
        return self.fitted / self.total if self.total else math.nan


def linewidth_statistics(fits: Sequence[DipFit], gate: GateConfig = GateConfig()) -> LinewidthSummary:
    reasons = {"shallow": 0, "noisy": 0, "unconverged": 0}
    good = []
    for f in fits:
        why = classify(f, gate)
        if why is None:
            good.append(f.gamma_rt)
        else:
            reasons[why] += 1
    s = LinewidthSummary(total=len(fits), fitted=len(good), rejected=reasons)
    if good:
        s.min, s.max, s.median = float(np.min(good)), float(np.max(good)), float(np.median(good))
    return s
