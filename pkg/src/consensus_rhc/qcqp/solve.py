"""Barrier solve orchestration: phase 1, kernel call, KKT certificate."""
from __future__ import annotations

import numpy as np

from ..errors import NumericalFailureError
from . import backend
from .phase1 import phase1
from .problem import CondensedProblem, SolveReport

KKT_TOL = 1e-7
GAP_TOL = 1e-9


def _recover_multipliers(p: CondensedProblem, z: np.ndarray, t: float,
                         A2, b2, has_quad: bool):
    """Dual estimates at the final iterate.

    Barrier values 1/(t s) serve for inactive constraints; for numerically
    active ones (slack at the floating-point floor, where centering cannot
    place z precisely enough) the multipliers are re-fit by least squares so
    the reported stationarity residual is a genuine certificate.
    """
    slack_lo = z - p.box_lo
    slack_hi = p.box_hi - z
    mu_lo = 1.0 / (t * slack_lo)
    mu_hi = 1.0 / (t * slack_hi)
    width = p.box_hi - p.box_lo
    act_lo = slack_lo <= 1e-6 * (1.0 + width)
    act_hi = slack_hi <= 1e-6 * (1.0 + width)
    grad_q = None
    mu_q = 0.0
    act_q = False
    if has_quad:
        s = p.beta ** 2 - p.quad_value(z)
        mu_q = 1.0 / (t * s)
        grad_q = 2.0 * (A2 @ z + b2)
        act_q = s <= 1e-6 * (1.0 + p.beta ** 2)
    # residual with inactive-constraint contributions folded in
    r0 = p.Hc @ z + p.fc
    r0 = r0 - np.where(act_lo, 0.0, mu_lo) + np.where(act_hi, 0.0, mu_hi)
    if has_quad and not act_q:
        r0 = r0 + mu_q * grad_q
    cols = []
    for i in np.flatnonzero(act_lo):
        e = np.zeros(p.dim)
        e[i] = -1.0
        cols.append(e)
    for i in np.flatnonzero(act_hi):
        e = np.zeros(p.dim)
        e[i] = 1.0
        cols.append(e)
    if act_q:
        cols.append(grad_q)
    if cols:
        A = np.stack(cols, axis=1)
        fit, *_ = np.linalg.lstsq(A, -r0, rcond=None)
        fit = np.maximum(fit, 0.0)
        stat = r0 + A @ fit
        k = 0
        for i in np.flatnonzero(act_lo):
            mu_lo[i] = fit[k]
            k += 1
        for i in np.flatnonzero(act_hi):
            mu_hi[i] = fit[k]
            k += 1
        if act_q:
            mu_q = float(fit[k])
    else:
        stat = r0
    multipliers = {"box_lo": mu_lo, "box_hi": mu_hi}
    if has_quad:
        multipliers["quad"] = mu_q
    return float(np.linalg.norm(stat)), multipliers


def solve(p: CondensedProblem, backend_name: str | None = None,
          gap_tol: float = GAP_TOL) -> SolveReport:
    """Minimize the condensed objective over box and ball.

    Raises InfeasibleError (from phase 1) when the constraint set is empty,
    NumericalFailureError when the Newton iteration breaks down.  Identical
    inputs produce bitwise-identical reports: the path is deterministic.
    """
    z0 = phase1(p)
    d = p.dim
    if p.has_quad:
        A2, b2, c2 = p._quad_coeffs
        has_quad = True
    else:
        A2 = np.zeros((d, d))
        b2 = np.zeros(d)
        c2 = 0.0
        has_quad = False
    beta2 = p.beta ** 2 if p.has_quad else 1.0
    kern = backend.kernel(backend_name)
    z, iters, code, t = kern(p.Hc, p.fc, p.box_lo, p.box_hi, has_quad,
                             A2, b2, c2, beta2, z0, 1.0, 10.0, gap_tol)
    z = np.asarray(z, dtype=float)
    if code == 2:
        raise NumericalFailureError("barrier Newton step failed to make progress")
    kkt, multipliers = _recover_multipliers(p, z, t, A2, b2, has_quad)
    feasible = p.box_violation(z) <= 1e-9 and p.quad_violation(z) <= 1e-9
    status = "optimal" if (code == 0 and kkt <= KKT_TOL and feasible) else "max_iter"
    return SolveReport(z=z, objective=p.objective(z), iterations=iters,
                       status=status, kkt_residual=kkt, multipliers=multipliers)
