"""
W1 photonic-crystal waveguide geometry: area of material farther than ``d``
from every etched hole surface, its inverse, and a band-edge Purcell envelope.

Lattice convention: the waveguide runs along x, the missing row sits at
y = 0, hole row k (k = +-1, +-2, ...) sits at y = k * sqrt(3)/2 * a with
x-offset a/2 on odd rows. The analysis region is the rectangle
``0 <= x < a``, ``|y| <= halfwidth``; by default the strip between the
centres of the outermost included rows.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import Unreachable, ValidationError

ROW_PITCH = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class PcwGeometry:
    a: float = 248e-9  # lattice constant [m]
    r: float = 70e-9  # hole radius [m]
    rows_per_side: int = 1
    halfwidth: Optional[float] = None  # strip half-height [m]

    def __post_init__(self):
        if not 0 < self.r < self.a / 2:
            raise ValueError("need 0 < r < a/2")
        if self.rows_per_side < 1:
            raise ValueError("rows_per_side must be >= 1")
        if self.halfwidth is not None and not self.halfwidth > 0:
            raise ValueError("halfwidth must be > 0")

    @property
    def h(self) -> float:
        return self.halfwidth if self.halfwidth is not None else self.rows_per_side * ROW_PITCH * self.a

    @property
    def region_area(self) -> float:
        return self.a * 2.0 * self.h

    @property
    def half_diagonal(self) -> float:
        return math.hypot(0.5 * self.a, self.h)

    def hole_centers(self, reach: float = 0.0) -> np.ndarray:
        """Centres of every hole whose disk of radius ``r + reach`` can touch the region."""
        rr = self.r + reach
        kmax = int(math.ceil((self.h + rr) / (ROW_PITCH * self.a))) + 1
        out = []
        for k in range(-kmax, kmax + 1):
            if k == 0:
                continue
            y = k * ROW_PITCH * self.a
            if abs(y) - rr >= self.h:
                continue
            off = 0.5 * self.a if k % 2 else 0.0
            m0 = int(math.floor((-rr - off) / self.a))
            m1 = int(math.ceil((self.a + rr - off) / self.a))
            for m in range(m0, m1 + 1):
                x = m * self.a + off
                if x + rr > 0 and x - rr < self.a:
                    out.append((x, y))
        return np.array(out).reshape(-1, 2)

    def scaled(self, s: float) -> "PcwGeometry":
        return PcwGeometry(self.a * s, self.r * s, self.rows_per_side,
                           None if self.halfwidth is None else self.halfwidth * s)


PRESETS = {
    "first-row": PcwGeometry(rows_per_side=1),
    "second-row": PcwGeometry(rows_per_side=2),
}


# ---------------------------------------------------------------------------
# exact disk-rectangle intersection

def _G(x, R):
    """Antiderivative of sqrt(R^2 - x^2).

    Written with ``(R - x)(R + x)`` and ``atan2`` so it stays accurate next to
    ``x = +-R``, where ``R*R - x*x`` and ``asin(x/R)`` lose half their digits.
    """
    x = min(max(x, -R), R)
    s = math.sqrt((R - x) * (R + x))
    return 0.5 * (x * s + R * R * math.atan2(x, s))


def disk_rect_area(cx, cy, R, x0, x1, y0, y1) -> float:
    """Area of the disk (cx, cy, R) inside [x0, x1] x [y0, y1], exact."""
    if R <= 0:
        return 0.0
    X0, X1 = max(x0 - cx, -R), min(x1 - cx, R)
    Y0, Y1 = y0 - cy, y1 - cy
    if X0 >= X1 or Y0 >= R or Y1 <= -R:
        return 0.0
    # the clipped chord length is piecewise in {const, s(x), 2 s(x)} with
    # breakpoints where s(x) = |Y0| or |Y1|
    bps = {X0, X1}
    for Y in (Y0, Y1):
        if abs(Y) < R:
            xb = math.sqrt(R * R - Y * Y)
            bps.update(b for b in (-xb, xb) if X0 < b < X1)
    bps = sorted(bps)
    total = 0.0
    for lo, hi in zip(bps[:-1], bps[1:]):
        xm = 0.5 * (lo + hi)
        s = math.sqrt(max(R * R - xm * xm, 0.0))
        top_arc = s < Y1  # upper limit is the arc, else the rectangle edge
        bot_arc = -s > Y0
        if (s if top_arc else Y1) <= (-s if bot_arc else Y0):
            continue
        arc_part = _G(hi, R) - _G(lo, R)
        width = hi - lo
        total += (arc_part if top_arc else Y1 * width) - (-arc_part if bot_arc else Y0 * width)
    return total


def _disks_area(g: PcwGeometry, radius: float) -> float:
    h = g.h
    return sum(disk_rect_area(x, y, radius, 0.0, g.a, -h, h) for x, y in g.hole_centers(radius - g.r))


def _union_area_exact(g: PcwGeometry, radius: float) -> float:
    """Exact area of the union of equal disks clipped to the region.

    The y axis is cut at every disk top/bottom, pairwise disk intersection
    and disk/clip-line intersection. Inside each slab the union is a fixed
    set of intervals whose ends are either clip lines or disk arcs, so the
    covered length integrates in closed form.
    """
    h, a, R = g.h, g.a, radius
    c = g.hole_centers(radius - g.r)
    ys = {-h, h}
    for cx, cy in c:
        ys.update((cy - R, cy + R))
        for xl in (0.0, a):
            dx = xl - cx
            if abs(dx) < R:
                q = math.sqrt(R * R - dx * dx)
                ys.update((cy - q, cy + q))
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            dx, dy = c[j] - c[i]
            dd = math.hypot(dx, dy)
            if 0 < dd < 2 * R:
                q = math.sqrt(R * R - 0.25 * dd * dd) / dd
                my = c[i][1] + 0.5 * dy
                ys.update((my - q * dx, my + q * dx))
    ys = sorted(y for y in ys if -h <= y <= h)

    def arc_int(k, y0, y1):  # int sqrt(R^2 - (y - cy_k)^2) dy
        return _G(y1 - c[k][1], R) - _G(y0 - c[k][1], R)

    total = 0.0
    for y0, y1 in zip(ys[:-1], ys[1:]):
        if y1 - y0 <= 0:
            continue
        ym = 0.5 * (y0 + y1)
        ends = []  # (lo value, lo term, hi value, hi term); term = (sign, k) or const
        for k, (cx, cy) in enumerate(c):
            dy = ym - cy
            if abs(dy) >= R:
                continue
            sq = math.sqrt(R * R - dy * dy)
            lo, hi = cx - sq, cx + sq
            lo_t = ("arc", -1, k) if lo > 0 else ("const", 0.0)
            hi_t = ("arc", 1, k) if hi < a else ("const", a)
            lo, hi = max(lo, 0.0), min(hi, a)
            if hi > lo:
                ends.append((lo, lo_t, hi, hi_t))
        ends.sort(key=lambda e: e[0])
        merged = []
        for e in ends:
            if merged and e[0] <= merged[-1][2]:
                if e[2] > merged[-1][2]:
                    merged[-1] = (merged[-1][0], merged[-1][1], e[2], e[3])
            else:
                merged.append(e)
        for _, lo_t, _, hi_t in merged:
            for term, sgn in ((hi_t, 1.0), (lo_t, -1.0)):
                if term[0] == "const":
                    total += sgn * term[1] * (y1 - y0)
                else:
                    k = term[2]
                    total += sgn * (c[k][0] * (y1 - y0) + term[1] * arc_int(k, y0, y1))
    return total


def area_fraction(g: PcwGeometry, d: float) -> float:
    """Fraction of region material (outside holes) farther than ``d`` from any hole edge."""
    if d < 0:
        raise ValueError("d must be >= 0")
    if d == 0:
        return 1.0
    rd = g.r + d
    if rd >= g.half_diagonal + g.a:
        return 0.0
    a_total = g.region_area - _disks_area(g, g.r)
    if rd < 0.5 * g.a:
        # neighbouring exclusion disks (centre spacing >= a) are disjoint
        excluded = _disks_area(g, rd)
    else:
        excluded = _union_area_exact(g, rd)
    return float(min(max((g.region_area - excluded) / a_total, 0.0), 1.0))


def monte_carlo_fraction(g: PcwGeometry, d: float, n_samples: int = 1_000_000, seed: int = 0,
                         *, batch: int = 1 << 16, workers: int = 1) -> tuple[float, float]:
    """Rejection-sampled estimate of :func:`area_fraction` and its binomial sigma.

    ``n_samples`` uniform points are drawn in the region; points inside holes
    are discarded. Batches have fixed size and their own seed streams, so the
    result does not depend on ``workers``.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    centers = g.hole_centers(d)
    n_batches = -(-n_samples // batch)
    seeds = np.random.SeedSequence(seed).spawn(n_batches)
    sizes = [batch] * (n_batches - 1) + [n_samples - batch * (n_batches - 1)]
    r2, rd2 = g.r**2, (g.r + d) ** 2

    def run(job):
        ss, size = job
        rng = np.random.default_rng(ss)
        x = rng.uniform(0.0, g.a, size)
        y = rng.uniform(-g.h, g.h, size)
        dist2 = np.min((x[:, None] - centers[:, 0]) ** 2 + (y[:, None] - centers[:, 1]) ** 2, axis=1)
        material = dist2 >= r2
        return int(material.sum()), int((dist2 > rd2).sum())

    jobs = list(zip(seeds, sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    n_mat = sum(p[0] for p in parts)
    n_far = sum(p[1] for p in parts)
    f = n_far / n_mat
    return f, math.sqrt(max(f * (1.0 - f), 0.0) / n_mat)


def solve_distance(g: PcwGeometry, f_target: float, *, d_max: Optional[float] = None) -> float:
    """Distance ``d`` with ``area_fraction(g, d) == f_target`` (bisection/Brent)."""
    if not 0.0 < f_target <= 1.0:
        raise ValueError("f_target must lie in (0, 1]")
    if f_target == 1.0:
        return 0.0
    if d_max is None:
        d_max = g.half_diagonal + g.a - g.r
    f_floor = area_fraction(g, d_max)
    if f_target < f_floor:
        raise Unreachable(f"f_target {f_target:g} below attainable floor {f_floor:g} at d_max")
    if f_target == f_floor:
        return d_max
    return optimize.brentq(lambda d: area_fraction(g, d) - f_target, 0.0, d_max,
                           xtol=1e-16, rtol=1e-12)


def read_geometry_spec(path) -> PcwGeometry:
    """Key-value text (``key = value`` or ``key value``, ``#`` comments):
    a_nm, r_nm, rows_per_side, strip_halfwidth_nm (optional)."""
    vals = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValidationError(f"cannot read geometry spec {path}: {exc.strerror}") from None
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            key, _, val = line.partition(" ")
        vals[key.strip()] = val.strip()
    extra = set(vals) - {"a_nm", "r_nm", "rows_per_side", "strip_halfwidth_nm"}
    if extra:
        raise ValidationError(f"unknown geometry keys: {sorted(extra)}")
    try:
        hw = vals.get("strip_halfwidth_nm")
        return PcwGeometry(
            a=float(vals.get("a_nm", 248)) / 1e9,
            r=float(vals.get("r_nm", 70)) / 1e9,
            rows_per_side=int(vals.get("rows_per_side", 1)),
            halfwidth=float(hw) / 1e9 if hw else None,
        )
    except ValueError as exc:
        raise ValidationError(f"geometry spec {path}: {exc}") from None


def write_geometry_spec(g: PcwGeometry, path) -> None:
    lines = [f"a_nm = {g.a * 1e9:.12g}", f"r_nm = {g.r * 1e9:.12g}",
             f"rows_per_side = {g.rows_per_side}"]
    if g.halfwidth is not None:
        lines.append(f"strip_halfwidth_nm = {g.halfwidth * 1e9:.12g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Purcell envelope

@dataclass(frozen=True)
class PurcellEnvelope:
    """Upper envelope of the Purcell-enhanced linewidth near the band edge.

    ``gamma_hom * min(cap, scale / sqrt((lambda_c - lambda)/lambda_c))``:
    the inverse-square-root divergence of the group index at the edge, capped.
    """

    gamma_hom: float = 230e6  # Hz
    lambda_c: float = 950.2e-9  # m
    scale: float = 0.05
    cap: float = 8.0

    def __post_init__(self):
        for name in ("gamma_hom", "lambda_c", "scale", "cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


def purcell_envelope(p: PurcellEnvelope, lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam >= p.lambda_c):
        raise ValueError("envelope defined only below the cutoff wavelength")
    detune = (p.lambda_c - lam) / p.lambda_c
    out = p.gamma_hom * np.minimum(p.cap, p.scale / np.sqrt(detune))
    return out if out.ndim else float(out)
