"""Independent reference computations used to pin expected test values.

Everything here is deliberately written against the math, not against the
package internals: polynomial bisection for eigenvalues, brute-force cost
roll-outs, a projected-Newton box solver, grid search, and a
convergence-classifying bisection for the modified Riccati equation.
"""
import numpy as np


def bisect_root(f, lo, hi, tol=1e-12):
    """Root of a scalar function by bisection; f(lo) and f(hi) must differ in sign."""
    flo = f(lo)
    assert flo * f(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if flo * f(mid) <= 0:
            hi = mid
        else:
            lo, flo = mid, f(mid)
    return 0.5 * (lo + hi)


def char_poly_coeffs(A):
    """Characteristic polynomial by the trace (Faddeev-LeVerrier) recursion."""
    n = A.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(A)
    for k in range(1, n + 1):
        Mk = A @ Mk + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(A @ Mk) / k)
    return np.array(coeffs)  # monic, highest power first


def rollout_cost(A, B, Qg, Rg, Sg, x0, zbar, N):
    """Simulate the stacked dynamics under zbar and sum the quadratic costs."""
    n = A.shape[0]
    m = B.shape[1]
    x = np.asarray(x0, dtype=float).copy()
    J = float(x @ Qg @ x)
    for i in range(N):
        u = zbar[i * m:(i + 1) * m]
        J += float(u @ Rg @ u)
        x = A @ x + B @ u
        if i < N - 1:
            J += float(x @ Qg @ x)
    J += float(x @ Sg @ x)
    return J


def projected_newton_box(H, f, lo, hi, tol=1e-12, max_iter=500):
    """Box-constrained strictly convex QP by projected Newton on the free set."""
    z = np.clip(np.zeros_like(f), lo, hi)
    n = z.shape[0]
    for _ in range(max_iter):
        g = H @ z + f
        at_lo = (z <= lo + 1e-12) & (g > 0)
        at_hi = (z >= hi - 1e-12) & (g < 0)
        free = ~(at_lo | at_hi)
        pg = g.copy()
        pg[at_lo | at_hi] = 0.0
        if np.linalg.norm(pg) <= tol * (1.0 + np.linalg.norm(f)):
            return z
        if not free.any():
            return z
        d = np.zeros(n)
        d[free] = -np.linalg.solve(H[np.ix_(free, free)], g[free])
        alpha = 1.0
        obj = 0.5 * z @ H @ z + f @ z
        for _ in range(60):
            z_try = np.clip(z + alpha * d, lo, hi)
            if 0.5 * z_try @ H @ z_try + f @ z_try <= obj - 1e-16:
                z = z_try
                break
            alpha *= 0.5
        else:
            z = np.clip(z + d, lo, hi)
    return z


def grid_min_2d(objective, feasible, lo, hi, resolution=1e-2):
    """Dense grid search over a 2-D box, restricted to a feasible predicate."""
    xs = np.arange(lo[0], hi[0] + resolution / 2, resolution)
    ys = np.arange(lo[1], hi[1] + resolution / 2, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    mask = feasible(pts)
    vals = objective(pts[mask])
    return float(vals.min()), pts[mask][int(vals.argmin())]


def mare_iteration_converges(A, B, Q, delta, alpha=0.0, max_iter=60000):
    """Classify convergence of the modified-Riccati fixed point from S = Q.

    Near the critical discount the contraction rate approaches one, so the
    verdict combines hard norm bounds with the slope of log(increment norm)
    over a trailing window.
    """
    S = 0.5 * (Q + Q.T)
    incs = []
    for k in range(max_iter):
        BS = B.T @ S
        Snew = A.T @ S @ A + Q - delta / (1.0 + alpha) * (
            A.T @ S @ B @ np.linalg.solve(BS @ B, BS @ A))
        Snew = 0.5 * (Snew + Snew.T)
        inc = float(np.linalg.norm(Snew - S))
        S = Snew
        if inc < 1e-12:
            return True
        if not np.isfinite(inc) or np.linalg.norm(S) > 1e11:
            return False
        incs.append(inc)
        if k >= 3000 and k % 500 == 0:
            window = np.log(np.maximum(incs[-500:], 1e-300))
            slope = np.polyfit(np.arange(500), window, 1)[0]
            if slope > 1e-5:
                return False
            if slope < -1e-5:
                return True
    window = np.log(np.maximum(incs[-500:], 1e-300))
    return bool(np.polyfit(np.arange(500), window, 1)[0] < 0)


def bisect_delta_c(A, B, Q, alpha=0.0, gap=2e-4):
    """Critical discount by bisection on iteration convergence."""
    lo, hi = 0.0, 1.0
    assert mare_iteration_converges(A, B, Q, hi, alpha)
    while hi - lo > gap:
        mid = 0.5 * (lo + hi)
        if mare_iteration_converges(A, B, Q, mid, alpha):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
