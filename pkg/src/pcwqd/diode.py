"""
p-i-n diode I-V: ideal diode with series and parallel resistance.

The current solves the implicit equation

    I = i_sat * (exp((V - I r_s) / (n V_T)) - 1) + (V - I r_s) / r_p

At 1.6 K the thermal voltage is ~138 uV, so the exponent reaches thousands
for ordinary forward biases. The exponential is only ever evaluated inside a
bracket whose upper end is derived in the log domain, which keeps it finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import e as Q_E, k as K_B

from .errors import InsufficientSpan, NonConvergence
from .optimize import levenberg_marquardt

T_DEFAULT = 1.6  # K


@dataclass(frozen=True)
class DiodeParams:
    i_sat: float  # A
    n_ideality: float
    temperature: float = T_DEFAULT  # K
    r_s: float = 7e3  # ohm
    r_p: float = 10e9  # ohm

    def __post_init__(self):
        for name in ("i_sat", "n_ideality", "temperature", "r_s", "r_p"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def v_t(self) -> float:
        return K_B * self.temperature / Q_E

    @property
    def n_vt(self) -> float:
        return self.n_ideality * self.v_t


def _residual(i, v, p: DiodeParams, log_isat):
    """g(I) = diode(Vd) + Vd/r_p - I, strictly decreasing in I."""
    vd = v - i * p.r_s
    ex = np.exp(np.minimum(log_isat + vd / p.n_vt, 700.0))
    diode = ex - p.i_sat
    g = diode + vd / p.r_p - i
    dg = -(ex * p.r_s / p.n_vt + p.r_s / p.r_p + 1.0)
    return g, dg


def diode_current(p: DiodeParams, v, *, rtol: float = 1e-12, max_iter: int = 200):
    """Current [A] at applied voltage(s) ``v`` [V].

    Safeguarded Newton on the monotone residual with bisection fallback.
    """
    v_in = np.asarray(v, dtype=float)
    v = np.atleast_1d(v_in).astype(float)
    log_isat = math.log(p.i_sat)
    # the junction voltage can never push more than V/r_s through the diode
    vd_max = p.n_vt * np.logaddexp(0.0, np.log(np.abs(v) / p.r_s + 1e-300) - log_isat)
    lo = np.where(v >= 0, (v - np.minimum(vd_max, v)) / p.r_s, v / p.r_s)
    hi = np.where(v >= 0, v / p.r_s, 0.0)
    # reverse side: |I| <= |V|/r_s; Vd in [V, 0]
    i = np.where(v >= 0, 0.5 * (lo + hi), v / (p.r_s + p.r_p) - p.i_sat)
    i = np.clip(i, lo, hi)
    done = np.zeros(v.shape, dtype=bool)
    for _ in range(max_iter):
        g, dg = _residual(i, v, p, log_isat)
        scale = np.maximum(np.abs(i), p.i_sat)
        done |= np.abs(g) <= rtol * scale
        if done.all():
            break
        # g decreasing: g > 0 means the root is above i
        lo = np.where(g > 0, np.maximum(lo, i), lo)
        hi = np.where(g < 0, np.minimum(hi, i), hi)
        newton = i - g / dg
        bad = ~((newton > lo) & (newton < hi))
        nxt = np.where(bad, 0.5 * (lo + hi), newton)
        i = np.where(done, i, nxt)
        stuck = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi))
        done |= stuck
    else:
        raise NonConvergence("diode solver exceeded max_iter")
    return i.reshape(v_in.shape) if v_in.ndim else float(i[0])


def solver_residual(p: DiodeParams, v, i):
    """Residual of the implicit equation at a returned current."""
    return _residual(np.asarray(i, dtype=float), np.asarray(v, dtype=float), p, math.log(p.i_sat))[0]


@dataclass
class IVFit:
    params: DiodeParams
    sigma: dict = field(default_factory=dict)
    cost: float = 0.0
    n_iter: int = 0


def _initial_params(v, i, temperature):
    rev = v < 0
    r_p = 10e9
    if rev.sum() >= 2:
        slope = np.polyfit(v[rev], i[rev], 1)[0]
        if slope > 0:
            r_p = 1.0 / slope
    order = np.argsort(v)
    vs, is_ = v[order], i[order]
    top = vs > 0
    r_s = 1e3
    if top.sum() >= 3:
        dv = vs[top][-1] - vs[top][-3]
        di = is_[top][-1] - is_[top][-3]
        if di > 0 and dv > 0:
            r_s = dv / di
    # exponential region: current well above leakage, well below the ohmic limit
    leak = np.abs(vs) / r_p
    vd = vs - is_ * r_s
    mid = (is_ > 30 * leak + 1e-15) & (is_ < 0.1 * is_.max()) & (vs > 0)
    n_vt = 0.02
    log_isat = math.log(1e-20)
    if mid.sum() >= 3:
        sl, ic = np.polyfit(vd[mid], np.log(is_[mid]), 1)
        if sl > 0:
            n_vt, log_isat = 1.0 / sl, ic
    v_t = K_B * temperature / Q_E
    return np.array([log_isat, math.log(n_vt / v_t), math.log(r_s), math.log(r_p)])


def fit_iv(data, init: DiodeParams | None = None, *, noise_floor: float = 1e-12,
           temperature: float = T_DEFAULT) -> IVFit:
    """Fit (i_sat, n, r_s, r_p) at fixed temperature.

    Residuals are ``asinh(I / noise_floor)`` differences: logarithmic well
    above the source-meter floor, linear below it. ``n`` and ``T`` are
    degenerate, so ``n`` is reported at the fixed ``temperature``.
    """
    arr = np.asarray(data, dtype=float)
    v, i = arr[:, 0], arr[:, 1]
    if (v < 0).sum() < 3 or (v > 0).sum() < 3:
        raise InsufficientSpan("need >= 3 points on each of the reverse and forward branches")
    if init is None:
        x0 = _initial_params(v, i, temperature)
    else:
        x0 = np.array([math.log(init.i_sat), math.log(init.n_ideality),
                       math.log(init.r_s), math.log(init.r_p)])
    r_p0 = math.exp(x0[3])
    vmax = v.max()
    if i[v > 0].max() < 10.0 * vmax / r_p0:
        raise InsufficientSpan("forward branch shows no diode turn-on")
    target = np.arcsinh(i / noise_floor)

    def make(x):
        return DiodeParams(i_sat=math.exp(x[0]), n_ideality=math.exp(x[1]),
                           temperature=temperature, r_s=math.exp(x[2]), r_p=math.exp(x[3]))

    def resid(x):
        return np.arcsinh(diode_current(make(x), v) / noise_floor) - target

    res = levenberg_marquardt(resid, x0, max_iter=300)
    if not res.converged:
        raise NonConvergence(f"I-V fit: {res.status}")
    p = make(res.x)
    dof = max(v.size - 4, 1)
    cov = res.covariance(2.0 * res.cost / dof)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    sigma = {
        "i_sat": p.i_sat * err[0],
        "n_ideality": p.n_ideality * err[1],
        "r_s": p.r_s * err[2],
        "r_p": p.r_p * err[3],
    }
    return IVFit(params=p, sigma=sigma, cost=res.cost, n_iter=res.nit)


def reference_params(temperature: float = T_DEFAULT) -> DiodeParams:
    """Scenario diode: turn-on near 0.7 V, 7 kOhm series, 10 GOhm parallel."""
    n_vt = 0.02
    v_t = K_B * temperature / Q_E
    return DiodeParams(i_sat=1e-9 * math.exp(-0.7 / n_vt), n_ideality=n_vt / v_t,
                       temperature=temperature, r_s=7e3, r_p=10e9)
