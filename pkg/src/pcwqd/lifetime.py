"""
Time-resolved fluorescence: single-exponential decay convolved with a measured
IRF, Poisson maximum-likelihood fitting, and the transform-limited linewidth
``gamma / 2pi``.

The IRF is treated as a piecewise-constant density over its bins, so the
convolution with ``exp(-gamma t)`` and the integration over the output bins
are done in closed form. The pulse train is periodic with ``rep_period``;
earlier pulses contribute through a geometric tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientCounts, NonConvergence
from .lineshape import DipFit

MIN_COUNTS = 1000
BG_PIN = 1e-4  # background below this fraction of mean counts/bin is pinned to 0


@dataclass
class DecayHistogram:
    bin_edges: np.ndarray  # s, uniform
    counts: np.ndarray
    irf: np.ndarray  # counts on the same bins
    rep_period: float  # s

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        self.irf = np.asarray(self.irf, dtype=float)
        n = self.counts.size
        if self.bin_edges.size != n + 1 or self.irf.size != n:
            raise ValueError("need len(bin_edges) == len(counts) + 1 == len(irf) + 1")
        w = np.diff(self.bin_edges)
        if not np.allclose(w, w[0], rtol=1e-6, atol=0):
            raise ValueError("bins must be uniform")
        if np.any(self.counts < 0) or np.any(self.irf < 0):
            raise ValueError("counts and irf must be >= 0")
        if self.irf.sum() <= 0:
            raise ValueError("irf is empty")
        if self.bin_edges[-1] - self.bin_edges[0] > self.rep_period * (1 + 1e-9):
            raise ValueError("histogram span exceeds the repetition period")

    @property
    def bin_width(self) -> float:
        return float((self.bin_edges[-1] - self.bin_edges[0]) / self.counts.size)

    @property
    def times(self) -> np.ndarray:
        return self.bin_edges[:-1]

    @property
    def irf_normalized(self) -> np.ndarray:
        return self.irf / self.irf.sum()

    @property
    def n_period(self) -> int:
        return max(int(round(self.rep_period / self.bin_width)), self.counts.size)


@dataclass
class DecayFit:
    gamma: float  # 1/s
    amplitude: float  # counts per bin at the decay onset
    t0: float  # s, delay of the decay onset relative to the IRF
    background: float  # counts per bin
    sigma: dict = field(default_factory=dict)
    converged: bool = True
    identifiable: bool = True
    nll: float = 0.0
    n_iter: int = 0

    @property
    def transform_limit(self) -> float:
        """Transform-limited linewidth [Hz]; a lower bound if non-radiative decay exists."""
        return self.gamma / (2.0 * math.pi)

    @property
    def transform_limit_sigma(self) -> float:
        return self.sigma.get("gamma", math.nan) / (2.0 * math.pi)

    @property
    def tau(self) -> float:
        return 1.0 / self.gamma


# ---------------------------------------------------------------------------
# model

def _pair_integral(x, gamma, dt):
    """``D(x) = int_0^dt int_0^dt exp(-gamma u) H(u) ds dt`` with ``u = x + t - s``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    far = x >= dt
    c = (2.0 * math.sinh(0.5 * gamma * dt) / gamma) ** 2
    out[far] = c * np.exp(-gamma * x[far])
    near = (x > -dt) & ~far
    xn = x[near]

    def phi(u):
        u = np.maximum(u, 0.0)
        # u/g - (1 - exp(-g u))/g^2
        return (gamma * u + np.expm1(-gamma * u)) / gamma**2

    out[near] = phi(xn + dt) - 2.0 * phi(xn) + phi(xn - dt)
    out[~(far | near)] = 0.0
    return out


def decay_kernel(gamma: float, t0: float, dt: float, n_period: int, period: float) -> np.ndarray:
    """Bin-to-bin response of a unit-amplitude decay to one IRF bin, periodic."""
    m = np.arange(n_period) * dt - t0
    xr = np.mod(m + dt, period) - dt
    k = _pair_integral(xr, gamma, dt)
    c = (2.0 * math.sinh(0.5 * gamma * dt) / gamma) ** 2
    k += c * np.exp(-gamma * (xr + period)) / -math.expm1(-gamma * period)
    return k / dt**2


def convolve_model(gamma: float, amplitude: float, t0: float, background: float,
                   hist: DecayHistogram) -> np.ndarray:
    """Expected counts per bin."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    n, n_p, dt = hist.counts.size, hist.n_period, hist.bin_width
    kern = decay_kernel(gamma, t0, dt, n_p, hist.rep_period)
    irf = np.zeros(n_p)
    irf[:n] = hist.irf_normalized
    conv = np.fft.irfft(np.fft.rfft(irf) * np.fft.rfft(kern), n_p)[:n]
    np.maximum(conv, 0.0, out=conv)  # FFT round-off ahead of the pulse
    return amplitude * conv + background


# ---------------------------------------------------------------------------
# fitting

def _initial(hist: DecayHistogram):
    c = hist.counts
    dt = hist.bin_width
    n = c.size
    bg = float(np.median(np.sort(c)[: max(n // 10, 1)]))
    ipk = int(np.argmax(c))
    tail = np.arange(ipk, n)
    y = c[tail] - bg
    ok = y > max(3.0 * math.sqrt(max(bg, 1.0)), 0.05 * (c[ipk] - bg))
    gamma = 1.0 / (0.2 * n * dt)
    if ok.sum() >= 3:
        sl = np.polyfit(tail[ok] * dt, np.log(y[ok]), 1, w=np.sqrt(y[ok]))[0]
        if sl < 0:
            gamma = -sl
    irf_pk = int(np.argmax(hist.irf))
    t0 = 0.0 if abs(ipk - irf_pk) * dt < 3.0 / gamma else (ipk - irf_pk) * dt
    unit = convolve_model(gamma, 1.0, t0, 0.0, hist)
    amp = max(float(np.sum(c - bg) / max(unit.sum(), 1e-300)), 1.0)
    return gamma, amp, t0, max(bg, 1e-3)


def _jacobian(theta, hist, mu0):
    """d(model)/d(theta) with theta = (log gamma, amplitude, t0/dt, background)."""
    lg, amp, s, bg = theta
    dt = hist.bin_width
    J = np.empty((mu0.size, 4))
    J[:, 1] = (mu0 - bg) / amp if amp != 0 else convolve_model(math.exp(lg), 1.0, s * dt, 0.0, hist)
    J[:, 3] = 1.0
    for col, h in ((0, 1e-6), (2, 1e-4)):
        tp, tm = np.array(theta), np.array(theta)
        tp[col] += h
        tm[col] -= h
        J[:, col] = (_mu(tp, hist) - _mu(tm, hist)) / (2 * h)
    return J


def _mu(theta, hist):
    lg, amp, s, bg = theta
    return convolve_model(math.exp(lg), amp, s * hist.bin_width, bg, hist)


def _nll(c, mu):
    mu = np.maximum(mu, 1e-300)
    return float(np.sum(mu - c * np.log(mu)))


def fit_decay(hist: DecayHistogram, *, max_iter: int = 200, method: str = "mle") -> DecayFit:
    """Fit gamma, amplitude, t0 and background.

    ``method="mle"`` maximises the Poisson likelihood by Fisher scoring with
    Marquardt damping; ``method="lsq"`` minimises unweighted squared residuals
    with the same iteration (kept for comparison).
    """
    c = hist.counts
    if c.sum() < MIN_COUNTS:
        raise InsufficientCounts(f"{c.sum():.0f} counts < {MIN_COUNTS}")
    g0, a0, t00, b0 = _initial(hist)
    theta = np.array([math.log(g0), a0, t00 / hist.bin_width, b0])
    mle = method == "mle"
    bg_pin = BG_PIN * float(c.mean())

    def objective(mu):
        return _nll(c, mu) if mle else 0.5 * float(np.sum((c - mu) ** 2))

    mu = _mu(theta, hist)
    obj = objective(mu)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(theta, hist, mu)
        w = 1.0 / np.maximum(mu, 1e-6) if mle else np.ones_like(mu)
        F = J.T @ (J * w[:, None])
        g = J.T @ (w * (c - mu))
        d = np.diag(F).copy()
        d[d <= 0] = 1.0
        accepted = False
        while lam < 1e12:
            step = np.linalg.lstsq(F + lam * np.diag(d), g, rcond=None)[0]
            if theta[3] + step[3] < bg_pin:
                # background bound active: pin it at zero, re-solve the rest
                A = F[:3, :3] + lam * np.diag(d[:3])
                rhs = g[:3] + F[:3, 3] * theta[3]
                step = np.append(np.linalg.lstsq(A, rhs, rcond=None)[0], -theta[3])
            trial = theta + step
            mu_t = _mu(trial, hist)
            if np.all(mu_t >= 0) and np.all(np.isfinite(mu_t)):
                obj_t = objective(mu_t)
                if obj_t <= obj:
                    accepted = True
                    break
            lam *= 4.0
        if not accepted:
            converged = True
            break
        rel = np.abs(step) / np.maximum(np.abs(theta), [1.0, 1.0, 1.0, 1.0])
        theta, mu, dobj, obj = trial, mu_t, obj - obj_t, obj_t
        lam = max(lam / 3.0, 1e-9)
        if np.max(rel) < 1e-8 or dobj < 1e-11 * max(abs(obj), 1.0):
            converged = True
            break
    if not converged:
        raise NonConvergence(f"decay fit did not converge in {max_iter} iterations")
    J = _jacobian(theta, hist, mu)
    if mle:
        w = 1.0 / np.maximum(mu, 1e-6)
        cov = np.linalg.pinv(J.T @ (J * w[:, None]))
    else:
        s2 = float(np.sum((c - mu) ** 2)) / max(c.size - 4, 1)
        cov = s2 * np.linalg.pinv(J.T @ J)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    gamma = math.exp(theta[0])
    dt = hist.bin_width
    ident = bool(theta[1] > 3.0 * err[1] and err[0] < 1.0)
    return DecayFit(
        gamma=gamma,
        amplitude=float(theta[1]),
        t0=float(theta[2] * dt),
        background=float(theta[3]),
        sigma={"gamma": gamma * float(err[0]), "amplitude": float(err[1]),
               "t0": float(err[2] * dt), "background": float(err[3])},
        converged=True,
        identifiable=ident,
        nll=_nll(c, mu),
        n_iter=it,
    )


def transform_ratio(dip: DipFit, decay: DecayFit) -> tuple[float, float]:
    """``gamma_rt / (gamma/2pi)`` and its 1-sigma error (independent errors)."""
    if not (dip.converged and decay.converged):
        raise ValueError("both fits must be converged")
    ref = decay.transform_limit
    r = dip.gamma_rt / ref
    rel_dip = dip.sigma.get("gamma_rt", 0.0) / dip.gamma_rt
    rel_dec = decay.transform_limit_sigma / ref
    return r, r * math.hypot(rel_dip, rel_dec)


# ---------------------------------------------------------------------------
# synthesis

def gaussian_irf(bin_edges, center: float, sigma: float) -> np.ndarray:
    """Bin-integrated Gaussian, unit area."""
    from scipy.special import ndtr

    p = ndtr((np.asarray(bin_edges) - center) / sigma)
    return np.diff(p)


def synthesize_decay(
    gamma: float,
    *,
    total_counts: float = 1e5,
    t0: float = 0.0,
    background: float = 0.0,
    irf_sigma: float = 50e-12,
    irf_center: float = 1e-9,
    bin_width: Optional[float] = None,
    n_bins: int = 1024,
    rep_period: float = 1.0 / 72.6e6,
    irf_counts: Optional[float] = None,
    fixed_total: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> DecayHistogram:
    """Poisson-sampled decay histogram with a Gaussian IRF.

    ``total_counts`` is the expected number of signal counts (excluding
    background) inside the histogram. By default the bins tile the repetition
    period with ``2 * n_bins`` bins and the histogram covers the first half.
    With ``fixed_total`` the acquisition stops after exactly the expected
    number of photons (multinomial instead of Poisson sampling).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if bin_width is None:
        bin_width = rep_period / (2 * n_bins)
    edges = np.arange(n_bins + 1) * bin_width
    irf = gaussian_irf(edges, irf_center, irf_sigma)
    shell = DecayHistogram(edges, np.zeros(n_bins), irf, rep_period)
    unit = convolve_model(gamma, 1.0, t0, 0.0, shell)
    mu = unit * (total_counts / unit.sum()) + background
    counts = rng.poisson(mu).astype(float)
    if fixed_total:
        counts = rng.multinomial(int(round(mu.sum())), mu / mu.sum()).astype(float)
    if irf_counts:
        irf = rng.poisson(irf * irf_counts).astype(float)
    return DecayHistogram(edges, counts, irf, rep_period)
