"""Pure-numpy barrier kernel.

Reference implementation of the primal log-barrier path: for a growing
sequence of barrier weights t the centering problem

    min  t (1/2 z'Hz + f'z) - sum log(z - lo) - sum log(hi - z)
         - log(beta^2 - q(z))                      [if a ball is present]

is solved by damped Newton with Armijo backtracking.  The compiled kernel
in _barrier.pyx implements exactly this loop; both must stay in lockstep.

Status codes: 0 centered every stage, 1 ran out of Newton iterations,
2 Newton system or line search failed.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def barrier_solve(H, f, lo, hi, has_quad, A2, b2, c2, beta2, z0,
                  t0=1.0, t_mul=10.0, gap_tol=1e-9, newton_tol=1e-10,
                  armijo=0.25, shrink=0.5, reg=1e-10, max_newton=250):
    z = np.array(z0, dtype=float)
    d = z.shape[0]
    m_constr = 2 * d + (1 if has_quad else 0)
    t = float(t0)
    total_newton = 0
    status = 0

    def quad(zv):
        return float(zv @ A2 @ zv + 2.0 * b2 @ zv + c2)

    def psi(zv, slack_lo, slack_hi, s_ball):
        val = t * (0.5 * zv @ H @ zv + f @ zv)
        val -= np.log(slack_lo).sum() + np.log(slack_hi).sum()
        if has_quad:
            val -= np.log(s_ball)
        return float(val)

    while True:
        prev_gnorm = np.inf
        flat = 0
        for _ in range(max_newton):
            slack_lo = z - lo
            slack_hi = hi - z
            grad = t * (H @ z + f) - 1.0 / slack_lo + 1.0 / slack_hi
            hess = t * H + np.diag(1.0 / slack_lo ** 2 + 1.0 / slack_hi ** 2)
            if has_quad:
                s = beta2 - quad(z)
                gq = 2.0 * (A2 @ z + b2)
                grad += gq / s
                hess = hess + (2.0 / s) * A2 + np.outer(gq, gq) / (s * s)
            else:
                s = 1.0
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= newton_tol * (1.0 + t):
                break
            r = reg
            step = None
            for _ in range(6):
                try:
                    L = np.linalg.cholesky(hess + r * np.eye(d))
                    step = -np.linalg.solve(L.T, np.linalg.solve(L, grad))
                    break
                except np.linalg.LinAlgError:
                    r *= 100.0
            if step is None:
                return z, total_newton, 2, t
            total_newton += 1
            lam2 = float(-grad @ step)
            if lam2 / 2.0 <= 1e-16 * (1.0 + t):
                break
            # fraction-to-boundary cap for the box
            alpha = 1.0
            neg = step < 0
            pos = step > 0
            if neg.any():
                alpha = min(alpha, 0.99 * np.min(slack_lo[neg] / -step[neg]))
            if pos.any():
                alpha = min(alpha, 0.99 * np.min(slack_hi[pos] / step[pos]))
            if lam2 <= 0.0625:  # Newton decrement <= 1/4: quadratic regime
                # full (capped) step, no sufficient-decrease test: at large t
                # the merit value is too noisy to certify the tiny decreases
                # taken here, while the gradient still contracts cleanly
                for _ in range(80):
                    z_try = z + alpha * step
                    if has_quad and beta2 - quad(z_try) <= 0.0:
                        alpha *= shrink
                        continue
                    break
                z = z_try
                if gnorm > 0.5 * prev_gnorm:
                    flat += 1
                    if flat >= 3:  # at the floating-point floor of grad
                        break
                else:
                    flat = 0
                prev_gnorm = gnorm
                continue
            psi0 = psi(z, slack_lo, slack_hi, s)
            noise = 1e-14 * (1.0 + abs(psi0))
            descent = float(grad @ step)
            accepted = False
            for _ in range(80):
                z_try = z + alpha * step
                sl = z_try - lo
                sh = hi - z_try
                if (sl > 0).all() and (sh > 0).all():
                    s_try = beta2 - quad(z_try) if has_quad else 1.0
                    if s_try > 0 and psi(z_try, sl, sh, s_try) \
                            <= psi0 + armijo * alpha * descent + noise:
                        z = z_try
                        accepted = True
                        break
                alpha *= shrink
            if not accepted:
                # stalled: accept the stage if the gradient is already tiny
                if gnorm <= np.sqrt(newton_tol) * (1.0 + t):
                    break
                return z, total_newton, 2, t
            prev_gnorm = gnorm
        else:
            status = 1
        if m_constr / t < gap_tol:
            break
        t *= t_mul
    return z, total_newton, status, t
