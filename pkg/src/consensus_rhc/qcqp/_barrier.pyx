# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled barrier kernel.

Same algorithm as _barrier_py.barrier_solve, written with typed loops and a
hand-rolled Cholesky: problems stay at desk scale (a few hundred unknowns),
so avoiding per-iteration Python overhead matters more than BLAS.  Keep in
lockstep with the pure-Python kernel.
"""
from libc.math cimport log, sqrt

import numpy as np

BACKEND_NAME = "compiled"


cdef int _cholesky(double[:, ::1] a, double[:, ::1] l, int n) noexcept nogil:
    """Lower Cholesky of a into l; returns 1 when a is not positive definite."""
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= l[i, k] * l[j, k]
            if i == j:
                if s <= 0.0:
                    return 1
                l[i, i] = sqrt(s)
            else:
                l[i, j] = s / l[j, j]
    return 0


cdef void _chol_solve(double[:, ::1] l, double[::1] b, double[::1] x, int n) noexcept nogil:
    """Solve (L L') x = b given the lower factor."""
    cdef int i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= l[i, k] * x[k]
        x[i] = s / l[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= l[k, i] * x[k]
        x[i] = s / l[i, i]


cdef double _quad_form(double[:, ::1] a, double[::1] z, int n) noexcept nogil:
    cdef int i, j
    cdef double s = 0.0, row
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += a[i, j] * z[j]
        s += row * z[i]
    return s


cdef void _symv(double[:, ::1] a, double[::1] x, double[::1] out, int n) noexcept nogil:
    cdef int i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i, j] * x[j]
        out[i] = s


cdef double _dot(double[::1] x, double[::1] y, int n) noexcept nogil:
    cdef int i
    cdef double s = 0.0
    for i in range(n):
        s += x[i] * y[i]
    return s


def barrier_solve(H, f, lo, hi, has_quad, A2, b2, c2, beta2, z0,
                  t0=1.0, t_mul=10.0, gap_tol=1e-9, newton_tol=1e-10,
                  armijo=0.25, shrink=0.5, reg=1e-10, max_newton=250):
    cdef double[:, ::1] Hv = np.ascontiguousarray(H, dtype=np.float64)
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef double[:, ::1] A2v = np.ascontiguousarray(A2, dtype=np.float64)
    cdef double[::1] b2v = np.ascontiguousarray(b2, dtype=np.float64)
    cdef bint quad = bool(has_quad)
    cdef double c2v = c2, beta2v = beta2
    cdef double t = t0, tmul = t_mul, gap = gap_tol, ntol = newton_tol
    cdef double arm = armijo, shr = shrink, reg0 = reg
    cdef int nmax = max_newton
    cdef int d = fv.shape[0]
    cdef int m_constr = 2 * d + (1 if quad else 0)

    z_arr = np.array(z0, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double[:, ::1] hess = np.empty((d, d))
    cdef double[:, ::1] lfac = np.empty((d, d))
    cdef double[::1] grad = np.empty(d)
    cdef double[::1] step = np.empty(d)
    cdef double[::1] gq = np.empty(d)
    cdef double[::1] ztry = np.empty(d)
    cdef double[::1] work = np.empty(d)

    cdef int total_newton = 0, status = 0
    cdef int it, i, j, bt, rtry, flat
    cdef double s_ball = 1.0, qv, gnorm, lam2, alpha, r, psi0, psi_try
    cdef double descent, sl, sh, s_try, ok, val, prev_gnorm, noise

    while True:
        prev_gnorm = 1e300
        flat = 0
        for it in range(nmax):
            # gradient and Hessian of the barrier objective at z
            _symv(Hv, z, grad, d)
            for i in range(d):
                grad[i] = t * (grad[i] + fv[i])
                for j in range(d):
                    hess[i, j] = t * Hv[i, j]
            for i in range(d):
                sl = z[i] - lov[i]
                sh = hiv[i] - z[i]
                grad[i] += -1.0 / sl + 1.0 / sh
                hess[i, i] += 1.0 / (sl * sl) + 1.0 / (sh * sh)
            if quad:
                _symv(A2v, z, gq, d)
                qv = _dot(gq, z, d) + 2.0 * _dot(b2v, z, d) + c2v
                s_ball = beta2v - qv
                for i in range(d):
                    gq[i] = 2.0 * (gq[i] + b2v[i])
                for i in range(d):
                    grad[i] += gq[i] / s_ball
                    for j in range(d):
                        hess[i, j] += (2.0 / s_ball) * A2v[i, j] \
                            + gq[i] * gq[j] / (s_ball * s_ball)
            gnorm = sqrt(_dot(grad, grad, d))
            if gnorm <= ntol * (1.0 + t):
                break
            r = reg0
            val = 0.0  # regularization already applied to the diagonal
            ok = 0.0
            for rtry in range(6):
                for i in range(d):
                    hess[i, i] += r - val
                val = r
                if _cholesky(hess, lfac, d) == 0:
                    ok = 1.0
                    break
                r *= 100.0
            if ok == 0.0:
                return np.asarray(z), total_newton, 2, t
            _chol_solve(lfac, grad, step, d)
            for i in range(d):
                step[i] = -step[i]
            total_newton += 1
            lam2 = -_dot(grad, step, d)
            if lam2 / 2.0 <= 1e-16 * (1.0 + t):
                break
            # fraction-to-boundary cap for the box
            alpha = 1.0
            for i in range(d):
                if step[i] < 0.0:
                    val = 0.99 * (z[i] - lov[i]) / (-step[i])
                    if val < alpha:
                        alpha = val
                elif step[i] > 0.0:
                    val = 0.99 * (hiv[i] - z[i]) / step[i]
                    if val < alpha:
                        alpha = val
            if lam2 <= 0.0625:  # Newton decrement <= 1/4: quadratic regime
                # full (capped) step, no sufficient-decrease test: at large t
                # the merit value is too noisy to certify the tiny decreases
                # taken here, while the gradient still contracts cleanly
                for bt in range(80):
                    for i in range(d):
                        ztry[i] = z[i] + alpha * step[i]
                    if quad:
                        _symv(A2v, ztry, work, d)
                        s_try = beta2v - (_dot(work, ztry, d)
                                          + 2.0 * _dot(b2v, ztry, d) + c2v)
                        if s_try <= 0.0:
                            alpha *= shr
                            continue
                    break
                for i in range(d):
                    z[i] = ztry[i]
                if gnorm > 0.5 * prev_gnorm:
                    flat += 1
                    if flat >= 3:  # at the floating-point floor of grad
                        break
                else:
                    flat = 0
                prev_gnorm = gnorm
                continue
            _symv(Hv, z, work, d)
            psi0 = t * (0.5 * _dot(work, z, d) + _dot(fv, z, d))
            for i in range(d):
                psi0 -= log(z[i] - lov[i]) + log(hiv[i] - z[i])
            if quad:
                psi0 -= log(s_ball)
            noise = 1e-14 * (1.0 + (psi0 if psi0 >= 0 else -psi0))
            descent = _dot(grad, step, d)
            ok = 0.0
            for bt in range(80):
                for i in range(d):
                    ztry[i] = z[i] + alpha * step[i]
                val = 1.0
                for i in range(d):
                    if ztry[i] <= lov[i] or ztry[i] >= hiv[i]:
                        val = 0.0
                        break
                if val == 1.0:
                    if quad:
                        _symv(A2v, ztry, work, d)
                        s_try = beta2v - (_dot(work, ztry, d)
                                          + 2.0 * _dot(b2v, ztry, d) + c2v)
                    else:
                        s_try = 1.0
                    if s_try > 0.0:
                        _symv(Hv, ztry, work, d)
                        psi_try = t * (0.5 * _dot(work, ztry, d) + _dot(fv, ztry, d))
                        for i in range(d):
                            psi_try -= log(ztry[i] - lov[i]) + log(hiv[i] - ztry[i])
                        if quad:
                            psi_try -= log(s_try)
                        if psi_try <= psi0 + arm * alpha * descent + noise:
                            for i in range(d):
                                z[i] = ztry[i]
                            ok = 1.0
                            break
                alpha *= shr
            if ok == 0.0:
                if gnorm <= sqrt(ntol) * (1.0 + t):
                    break
                return np.asarray(z), total_newton, 2, t
            prev_gnorm = gnorm
        else:
            status = 1
        if m_constr / t < gap:
            break
        t *= tmul
    return np.asarray(z), total_newton, status, t
