"""Horizon condensation: eliminate the predicted states into the inputs.

With stacked predictions Xbar = Phi x0 + Gamma Ubar the finite-horizon cost

    sum_{i=0}^{N-1} ||X_i||^2_Q + ||U_i||^2_R  +  ||X_N||^2_S

becomes 1/2 Ubar'Hc Ubar + fc'Ubar + c0 with Hc = 2(Gamma'Qbar Gamma + Rbar),
and the terminal ball ||X_N||_S <= beta turns into the quadratic constraint
of the condensed problem with G the last block row of Gamma.
"""
from __future__ import annotations

import numpy as np

from .. import linalg
from ..design import ProtocolDesign, SubsystemModel
from ..errors import DimensionError
from ..graphs import GraphModel
from .problem import CondensedProblem


def prediction_matrices(A: np.ndarray, B: np.ndarray, N: int):
    """Phi (N n x n) and Gamma (N n x N m) of the stacked prediction map."""
    n, m = B.shape
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    phi = np.vstack(powers[1:])
    gamma = np.zeros((N * n, N * m))
    for i in range(N):
        for j in range(i + 1):
            gamma[i * n:(i + 1) * n, j * m:(j + 1) * m] = powers[i - j] @ B
    return phi, gamma


def stack_boxes(boxes, num_agents: int, m: int, N: int):
    """Per-agent (u_lo, u_hi) pairs -> stacked horizon bounds."""
    lo, hi = boxes
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.ndim == 1:
        lo = np.tile(lo, (num_agents, 1))
        hi = np.tile(hi, (num_agents, 1))
    if lo.shape != (num_agents, m) or hi.shape != (num_agents, m):
        raise DimensionError(f"boxes must be ({num_agents}, {m}) or ({m},)")
    if np.any(lo >= 0.0) or np.any(hi <= 0.0):
        raise DimensionError("input boxes must contain 0 strictly inside")
    return np.tile(lo.reshape(-1), N), np.tile(hi.reshape(-1), N)


def condense(sys: SubsystemModel, g: GraphModel, d: ProtocolDesign,
             x0, N: int, boxes, terminal) -> CondensedProblem:
    """Condense one centralized receding-horizon step into a box/ball QP.

    ``terminal`` is (S, beta).  The initial state is centered on the agent
    mean whenever the design's weights annihilate the consensus subspace;
    the optimizer and the cost value are unchanged by that, but the large
    common mode no longer enters the arithmetic.
    """
    if N < 1:
        raise DimensionError("horizon N must be >= 1")
    M, n, m = g.num_agents, sys.n, sys.m
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != M * n:
        raise DimensionError(f"x0 has length {x0.shape[0]}, expected {M * n}")
    S_term, beta = terminal if isinstance(terminal, tuple) else (terminal.Sg, terminal.beta)
    Ag = linalg.kron(np.eye(M), sys.A)
    Bg = linalg.kron(np.eye(M), sys.B)
    phi, gamma = prediction_matrices(Ag, Bg, N)
    x0c = d.center(x0)
    qbar_blocks = [d.Qg] * (N - 1) + [S_term]
    # Gamma'Qbar Gamma assembled blockwise to avoid materializing Qbar
    dim = N * M * m
    HQ = np.zeros((dim, dim))
    fQ = np.zeros(dim)
    px = phi @ x0c
    c0 = float(x0c @ d.Qg @ x0c)
    Mn = M * n
    for i, Qi in enumerate(qbar_blocks):
        Gi = gamma[i * Mn:(i + 1) * Mn]
        QG = Qi @ Gi
        HQ += Gi.T @ QG
        xi = px[i * Mn:(i + 1) * Mn]
        fQ += QG.T @ xi
        c0 += float(xi @ Qi @ xi)
    Rbar = linalg.kron(np.eye(N), d.Rg)
    Hc = linalg.symmetrize(2.0 * (HQ + Rbar))
    fc = 2.0 * fQ
    lo, hi = stack_boxes(boxes, M, m, N)
    G_ball = gamma[(N - 1) * Mn:]
    h_ball = px[(N - 1) * Mn:]
    return CondensedProblem(Hc=Hc, fc=fc, c0=c0, box_lo=lo, box_hi=hi,
                            G=G_ball, h=h_ball, Sq=S_term, beta=float(beta))
