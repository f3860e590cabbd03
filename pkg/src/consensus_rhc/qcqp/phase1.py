"""Strictly feasible starting points for the barrier solver.

The box midpoint short-circuits when it already clears the ball; otherwise
the ball residual ||G z + h||^2_Sq is minimized over the (slightly shrunk)
box by projected gradient with Barzilai-Borwein steps.  Failure to reach
slack certifies infeasibility: the quadratic is convex, so its
box-constrained minimum is global.
"""
from __future__ import annotations

import numpy as np

from ..errors import InfeasibleError
from .problem import CondensedProblem

SLACK_MIN = 1e-9
MAX_ITER = 10000


def phase1(p: CondensedProblem) -> np.ndarray:
    mid = 0.5 * (p.box_lo + p.box_hi)
    if not p.has_quad:
        return mid
    beta2 = p.beta ** 2
    if p.quad_value(mid) <= beta2 - SLACK_MIN:
        return mid
    A2, b2, _ = p._quad_coeffs
    margin = np.minimum(SLACK_MIN, 0.25 * (p.box_hi - p.box_lo))
    lo = p.box_lo + margin
    hi = p.box_hi - margin
    target = beta2 - max(SLACK_MIN, 0.01 * beta2)
    z = mid
    q = p.quad_value(z)
    grad = 2.0 * (A2 @ z + b2)
    step = 1.0 / max(np.linalg.norm(A2, ord=np.inf), 1e-30)
    best_q = q
    for _ in range(MAX_ITER):
        if q <= target:
            return z
        z_new = np.clip(z - step * grad, lo, hi)
        s = z_new - z
        if np.linalg.norm(s) <= 1e-15 * (1.0 + np.linalg.norm(z)):
            break
        grad_new = 2.0 * (A2 @ z_new + b2)
        y = grad_new - grad
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 1e-30 else step
        step = min(max(step, 1e-12), 1e12)
        z, grad = z_new, grad_new
        q = p.quad_value(z)
        best_q = min(best_q, q)
    if best_q <= beta2 - SLACK_MIN:
        return z
    raise InfeasibleError(
        f"box-constrained minimum of the terminal quadratic is {best_q:.6g}, "
        f"which does not clear beta^2 = {beta2:.6g} with slack {SLACK_MIN:g}")
