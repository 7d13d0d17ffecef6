"""
Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Small dense problems only: the normal equations are formed explicitly and
solved with a Cholesky-free ``lstsq`` so that rank deficiency shows up as a
condition number rather than an exception.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass
class LMResult:
    x: Array
    cost: float  # 0.5 * sum(residual**2)
    jac: Array
    nfev: int
    nit: int
    converged: bool
    status: str
    cond: float
    residual: Array = field(repr=False)

    def covariance(self, scale: float = 1.0) -> Array:
        """Inverse of J^T J times ``scale``; pseudo-inverse if singular."""
        jtj = self.jac.T @ self.jac
        return scale * np.linalg.pinv(jtj, rcond=1e-15)


def numeric_jacobian(fun: Callable[[Array], Array], x: Array, f0: Array | None = None,
                     rel_step: float = 1e-7, central: bool = True) -> Array:
    x = np.asarray(x, dtype=float)
    if f0 is None and not central:
        f0 = fun(x)
    cols = []
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1.0)
        xp = x.copy()
        xp[i] += h
        if central:
            xm = x.copy()
            xm[i] -= h
            cols.append((fun(xp) - fun(xm)) / (2 * h))
        else:
            cols.append((fun(xp) - f0) / h)
    return np.column_stack(cols)


def levenberg_marquardt(
    residual: Callable[[Array], Array],
    x0,
    jac: Callable[[Array], Array] | None = None,
    *,
    max_iter: int = 200,
    xtol: float = 1e-12,
    ftol: float = 1e-15,
    gtol: float = 1e-14,
    lam0: float = 1e-3,
    cond_limit: float = 1e14,
) -> LMResult:
    """Minimise ``0.5 * |residual(x)|**2``.

    The damping uses Marquardt's diagonal scaling: the step solves
    ``(J^T J + lam * diag(J^T J)) dx = -J^T r``. ``lam`` is divided by 3 on an
    accepted step and multiplied by 4 on a rejected one.
    """
    x = np.array(x0, dtype=float)
    jac_fn = jac if jac is not None else (lambda p: numeric_jacobian(residual, p))
    r = np.asarray(residual(x), dtype=float)
    nfev = 1
    cost = 0.5 * float(r @ r)
    J = jac_fn(x)
    lam = lam0
    status = "max_iter"
    converged = False
    nit = 0
    for nit in range(1, max_iter + 1):
        g = J.T @ r
        if np.max(np.abs(g), initial=0.0) <= gtol * max(1.0, cost):
            status, converged = "gtol", True
            break
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = 1.0
        accepted = False
        while lam < 1e16:
            step = np.linalg.lstsq(A + lam * np.diag(d), -g, rcond=None)[0]
            x_new = x + step
            r_new = np.asarray(residual(x_new), dtype=float)
            nfev += 1
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 4.0
        if not accepted:
            # no decrease even for a vanishing gradient step: minimum to rounding
            status, converged = "stalled", True
            break
        dcost = cost - cost_new
        small_step = np.all(np.abs(step) <= xtol * (np.abs(x) + xtol))
        x, r, cost = x_new, r_new, cost_new
        J = jac_fn(x)
        lam = max(lam / 3.0, 1e-12)
        if small_step:
            status, converged = "xtol", True
            break
        if dcost <= ftol * max(cost, 1e-300) and dcost >= 0 and nit > 1:
            status, converged = "ftol", True
            break
    sv = np.linalg.svd(J, compute_uv=False)
    cond = float(sv[0] / sv[-1]) ** 2 if sv.size and sv[-1] > 0 else np.inf
    if converged and cond > cond_limit:
        status = "ill_conditioned"
    return LMResult(x=x, cost=cost, jac=J, nfev=nfev, nit=nit, converged=converged,
                    status=status, cond=cond, residual=r)
