"""Receding-horizon consensus engine.

Terminal-set sizing, the centralized step, the distributed per-agent step
with one-step-delayed neighbor plans, the cost decomposition, and the
diagnostics used to certify invariance, recursive feasibility, and cost
decrease at runtime.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import linalg, qcqp
from .design import ProtocolDesign, SubsystemModel
from .errors import (AgentInfeasibleError, DegenerateBoxError, DimensionError,
                     InfeasibleError, ModeUnsupportedError,
                     RowOutsideRangeError)
from .graphs import GraphModel
from .qcqp import CondensedProblem, prediction_matrices

log = logging.getLogger("consensus_rhc")

BETA_CAP = 1e6


@dataclass(frozen=True)
class TerminalSet:
    Sg: np.ndarray
    beta: float

    def contains(self, design: ProtocolDesign, X, slack_rel: float = 1e-9) -> bool:
        return design.terminal_norm2(X) <= self.beta ** 2 * (1.0 + slack_rel)


def normalize_boxes(boxes, num_agents: int, m: int):
    """Accept (m,) or (M, m) bounds; return per-agent (M, m) arrays."""
    lo, hi = boxes
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.ndim == 1:
        lo = np.tile(lo, (num_agents, 1))
        hi = np.tile(hi, (num_agents, 1))
    if lo.shape != (num_agents, m) or hi.shape != (num_agents, m):
        raise DimensionError(f"boxes must have shape ({num_agents}, {m})")
    if np.any(lo >= 0.0) or np.any(hi <= 0.0):
        raise DegenerateBoxError("input boxes must contain 0 strictly inside")
    return lo, hi


def compute_beta(d: ProtocolDesign, boxes, cap: float = BETA_CAP) -> float:
    """Largest level-set radius on which the optimal protocol is admissible.

    For each input row k_j of the global gain the support of k_j'X over
    ||X||_Sg <= beta is beta * sqrt(k_j' Sg^+ k_j), so the radius is the
    minimum of bound_j over that square root.  Rows must lie in range(Sg);
    vanishing rows impose nothing and an all-zero gain yields the cap.
    """
    lo, hi = normalize_boxes(boxes, d.num_agents, d.m)
    bounds = np.minimum(-lo.reshape(-1), hi.reshape(-1))
    if np.any(bounds <= 0.0):
        raise DegenerateBoxError("every input bound must be positive")
    sg_pinv = linalg.pinv(d.Sg)
    kg_scale = np.linalg.norm(d.Kg)
    best = np.inf
    for j, kj in enumerate(d.Kg):
        nk = np.linalg.norm(kj)
        if nk <= 1e-14 * (1.0 + kg_scale):
            continue
        if np.linalg.norm(kj - d.Sg @ (sg_pinv @ kj)) > 1e-8 * nk:
            raise RowOutsideRangeError(f"gain row {j} is not in range(Sg)")
        support = np.sqrt(float(kj @ sg_pinv @ kj))
        best = min(best, bounds[j] / support)
    if not np.isfinite(best):
        log.warning("all gain rows vanish; terminal radius unbounded, "
                    "clamping to %g", cap)
        return cap
    return float(min(best, cap))


@dataclass(frozen=True)
class RhcController:
    design: ProtocolDesign
    sys: SubsystemModel
    graph: GraphModel
    horizon: int
    box_lo: np.ndarray  # (M, m)
    box_hi: np.ndarray
    terminal: TerminalSet
    mode: str = "centralized"

    @property
    def boxes(self):
        return self.box_lo, self.box_hi


def make_controller(design: ProtocolDesign, sys: SubsystemModel, g: GraphModel,
                    horizon: int, boxes, mode: str = "centralized",
                    beta: float | None = None) -> RhcController:
    if horizon < 1:
        raise DimensionError("horizon must be >= 1")
    if mode not in ("centralized", "distributed"):
        raise ValueError(f"unknown mode {mode!r}")
    lo, hi = normalize_boxes(boxes, g.num_agents, sys.m)
    if beta is None:
        beta = compute_beta(design, (lo, hi))
    ctrl = RhcController(design=design, sys=sys, graph=g, horizon=horizon,
                         box_lo=lo, box_hi=hi,
                         terminal=TerminalSet(Sg=design.Sg, beta=float(beta)),
                         mode=mode)
    if mode == "distributed":
        _validate_distributed(ctrl)
    return ctrl


@dataclass
class StepReport:
    step: int
    mode: str
    J_star: float
    terminal_slack: float
    feasible: bool
    solver_iters: int
    solver_status: str = "optimal"
    kkt_residual: float = 0.0
    note: str = ""

    def to_json_dict(self) -> dict:
        return {"step": self.step, "mode": self.mode, "J_star": self.J_star,
                "terminal_slack": self.terminal_slack, "feasible": self.feasible,
                "solver_iters": self.solver_iters}


# --------------------------------------------------------------------------
# centralized step
# --------------------------------------------------------------------------
def step_centralized(ctrl: RhcController, Xk, backend: str | None = None):
    """Solve the condensed problem at Xk and return the first input block.

    Returns (Uk, z_star, StepReport).  Infeasibility propagates as
    InfeasibleError for the caller to handle.
    """
    Xk = np.asarray(Xk, dtype=float).reshape(-1)
    p = qcqp.condense(ctrl.sys, ctrl.graph, ctrl.design, Xk, ctrl.horizon,
                      ctrl.boxes, (ctrl.terminal.Sg, ctrl.terminal.beta))
    rep = qcqp.solve(p, backend_name=backend)
    Mm = ctrl.graph.num_agents * ctrl.sys.m
    Uk = rep.z[:Mm].copy()
    slack = ctrl.terminal.beta ** 2 - p.quad_value(rep.z)
    report = StepReport(step=-1, mode="centralized", J_star=rep.objective,
                        terminal_slack=float(slack), feasible=True,
                        solver_iters=rep.iterations, solver_status=rep.status,
                        kkt_residual=rep.kkt_residual)
    return Uk, rep.z, report


def predicted_states(ctrl: RhcController, Xk, zbar) -> np.ndarray:
    """Stacked predictions X_{1..N} under the decision vector zbar."""
    M = ctrl.graph.num_agents
    Ag = linalg.kron(np.eye(M), ctrl.sys.A)
    Bg = linalg.kron(np.eye(M), ctrl.sys.B)
    Mn, Mm = M * ctrl.sys.n, M * ctrl.sys.m
    out = np.empty((ctrl.horizon, Mn))
    x = np.asarray(Xk, dtype=float).reshape(-1)
    for i in range(ctrl.horizon):
        x = Ag @ x + Bg @ zbar[i * Mm:(i + 1) * Mm]
        out[i] = x
    return out


def shifted_candidate(ctrl: RhcController, Xk, zbar):
    """Theorem-style feasibility candidate for the next step.

    Drops the first input of the current optimizer and appends the optimal
    protocol evaluated at the predicted terminal state.  Returns the stacked
    candidate and a feasibility verdict at the successor state.
    """
    preds = predicted_states(ctrl, Xk, zbar)
    XN = preds[-1]
    Mm = ctrl.graph.num_agents * ctrl.sys.m
    u_tail = ctrl.design.protocol_input(XN)
    cand = np.concatenate([zbar[Mm:], u_tail])
    lo = np.tile(ctrl.box_lo.reshape(-1), ctrl.horizon)
    hi = np.tile(ctrl.box_hi.reshape(-1), ctrl.horizon)
    box_ok = bool(np.all(cand >= lo - 1e-9) and np.all(cand <= hi + 1e-9))
    M = ctrl.graph.num_agents
    Ag = linalg.kron(np.eye(M), ctrl.sys.A)
    Bg = linalg.kron(np.eye(M), ctrl.sys.B)
    X_end = Ag @ XN + Bg @ u_tail
    term_ok = ctrl.terminal.contains(ctrl.design, X_end)
    return cand, box_ok and term_ok


# --------------------------------------------------------------------------
# distributed step
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AgentPlan:
    agent: int
    states: np.ndarray  # (N + 1, n)
    inputs: np.ndarray  # (N, m)

    def dynamics_residual(self, sys: SubsystemModel) -> float:
        pred = self.states[:-1] @ sys.A.T + self.inputs @ sys.B.T
        return float(np.abs(pred - self.states[1:]).max())


def _validate_distributed(ctrl: RhcController):
    d = ctrl.design
    lap = ctrl.graph.laplacian
    if not linalg.is_symmetric(lap):
        raise ModeUnsupportedError("distributed mode needs a symmetric Laplacian")
    if np.linalg.norm(d.S1 - d.mu * lap) > 1e-9 * (1.0 + np.linalg.norm(d.S1)):
        raise ModeUnsupportedError("distributed mode needs W = mu * I")
    for i in range(ctrl.graph.num_agents):
        P, Ru = _agent_stage_weights(ctrl, int(ctrl.graph.degrees[i]))
        if not linalg.is_psd(P):
            raise ModeUnsupportedError(
                f"agent {i} stage weight is indefinite (c*deg < delta); the "
                "per-agent split of this design is not convex")
        if not linalg.is_pd(Ru):
            raise ModeUnsupportedError(f"agent {i} input weight is not PD")


def _stage_q2(d: ProtocolDesign) -> np.ndarray:
    if d.mode == "unstable":
        return d.Q2 - d.delta * d.H / (1.0 + d.alpha)
    return d.Q2


def _agent_stage_weights(ctrl: RhcController, deg: int):
    # graph-symmetric split: pairwise difference forms, which sum to the
    # same global cost on a common trajectory but are stationary at
    # agreement, so agents at consensus have nothing to gain by deviating
    d = ctrl.design
    P = d.mu * (0.5 * deg * _stage_q2(d)
                + d.c * deg * deg * d.H / (1.0 + d.alpha))
    Ru = d.mu * ((1.0 + d.alpha) / (d.c * d.alpha)
                 - 0.5 * deg / d.alpha) * d.R2
    return linalg.symmetrize(P), linalg.symmetrize(Ru)


def initial_plans(ctrl: RhcController, Xk) -> list[AgentPlan]:
    """Zero-input open-loop plans; used at k = 0 when nothing was exchanged."""
    M, n, m = ctrl.graph.num_agents, ctrl.sys.n, ctrl.sys.m
    Xk = np.asarray(Xk, dtype=float).reshape(M, n)
    plans = []
    for i in range(M):
        states = np.empty((ctrl.horizon + 1, n))
        states[0] = Xk[i]
        for l in range(ctrl.horizon):
            states[l + 1] = ctrl.sys.A @ states[l]
        plans.append(AgentPlan(agent=i, states=states,
                               inputs=np.zeros((ctrl.horizon, m))))
    return plans


def shift_plans(ctrl: RhcController, plans: list[AgentPlan]) -> list[AgentPlan]:
    """Advance published plans one step, extending with the optimal protocol."""
    XN = np.concatenate([p.states[-1] for p in plans])
    U_ext = ctrl.design.protocol_input(XN).reshape(ctrl.graph.num_agents, ctrl.sys.m)
    out = []
    for p in plans:
        x_ext = ctrl.sys.A @ p.states[-1] + ctrl.sys.B @ U_ext[p.agent]
        out.append(AgentPlan(
            agent=p.agent,
            states=np.vstack([p.states[1:], x_ext[None, :]]),
            inputs=np.vstack([p.inputs[1:], U_ext[p.agent][None, :]])))
    return out


def _agent_problem(ctrl: RhcController, i: int, x0_i,
                   neighbor_plans: list[AgentPlan]) -> CondensedProblem:
    """Condense agent i's subproblem with neighbor trajectories frozen.

    The cost charges the pairwise-difference (graph-symmetric) split of the
    global stage weights against the frozen neighbor plans; the terminal
    constraint keeps the published split with the uniform beta^2 / M
    allocation, completed into a ball around the neighbor mean.
    """
    d, sys, N = ctrl.design, ctrl.sys, ctrl.horizon
    deg = len(neighbor_plans)
    if deg == 0:
        raise ModeUnsupportedError(f"agent {i} has no neighbors")
    mu, c, alpha = d.mu, d.c, d.alpha
    P, Ru = _agent_stage_weights(ctrl, deg)
    Q2x = _stage_q2(d)
    Hw = d.H / (1.0 + alpha)
    phi, gamma = prediction_matrices(sys.A, sys.B, N)
    n, m = sys.n, sys.m
    x0_i = np.asarray(x0_i, dtype=float)
    px = phi @ x0_i
    nbr_states = sum(p.states for p in neighbor_plans)     # (N+1, n)
    nbr_inputs = sum(p.inputs for p in neighbor_plans)     # (N, m)

    def stage_linear(l):
        sx = nbr_states[l]
        return -mu * (Q2x @ sx) - 2.0 * c * mu * deg * (Hw @ sx)

    def stage_const(l):
        # frozen-neighbor contributions of the symmetric split
        sx = nbr_states[l]
        val = 0.5 * mu * sum(float(p.states[l] @ Q2x @ p.states[l])
                             for p in neighbor_plans)
        val += c * mu * float(sx @ Hw @ sx)
        if l < N:
            val -= 0.5 * (mu / alpha) * sum(
                float(p.inputs[l] @ d.R2 @ p.inputs[l]) for p in neighbor_plans)
        return val

    dim = N * m
    HQ = np.zeros((dim, dim))
    fQ = np.zeros(dim)
    c0 = float(x0_i @ P @ x0_i) + float(stage_linear(0) @ x0_i) + stage_const(0)
    qbar = [(P, stage_linear(l)) for l in range(1, N)]
    sxN = nbr_states[N]
    qbar.append((0.5 * mu * deg * d.S2, -mu * (d.S2 @ sxN)))
    for idx, (Qi, qi) in enumerate(qbar):
        Gi = gamma[idx * n:(idx + 1) * n]
        xi = px[idx * n:(idx + 1) * n]
        QG = Qi @ Gi
        HQ += Gi.T @ QG
        fQ += QG.T @ xi + 0.5 * (Gi.T @ qi)
        c0 += float(xi @ Qi @ xi) + float(qi @ xi)
    for l in range(1, N):
        c0 += stage_const(l)
    c0 += 0.5 * mu * sum(float(p.states[N] @ d.S2 @ p.states[N])
                         for p in neighbor_plans)
    # input terms: own quadratic plus the frozen-neighbor cross term
    Rbar = linalg.kron(np.eye(N), Ru)
    r_lin = np.concatenate([(mu / alpha) * (d.R2 @ nbr_inputs[l])
                            for l in range(N)])
    Hc = linalg.symmetrize(2.0 * (HQ + Rbar))
    fc = 2.0 * fQ + r_lin
    lo = np.tile(ctrl.box_lo[i], N)
    hi = np.tile(ctrl.box_hi[i], N)
    # terminal split: mu sum_j a_ij x_N'S2(x_N - x_N^j) <= beta^2 / M,
    # completed to a ball around sxN / (2 deg)
    beta2_i = ctrl.terminal.beta ** 2 / ctrl.graph.num_agents \
        + mu * float(sxN @ d.S2 @ sxN) / (4.0 * deg)
    G = np.sqrt(mu * deg) * gamma[(N - 1) * n:]
    h = np.sqrt(mu * deg) * (px[(N - 1) * n:] - sxN / (2.0 * deg))
    return CondensedProblem(Hc=Hc, fc=fc, c0=c0, box_lo=lo, box_hi=hi,
                            G=G, h=h, Sq=d.S2, beta=float(np.sqrt(beta2_i)))


def step_distributed(ctrl: RhcController, plans: list[AgentPlan] | None, Xk,
                     backend: str | None = None):
    """One distributed step with one-step-delayed neighbor information.

    ``plans`` are the plans published at the previous step; they are shifted
    by one (extended with the optimal protocol) to align with the current
    time, then every agent solves its subproblem against the frozen shifted
    neighbor plans.  ``plans=None`` marks the first step, where nothing was
    exchanged yet and zero-input open-loop plans stand in, already aligned.
    Returns (Uk, new_plans, reports).
    """
    if ctrl.mode != "distributed":
        raise ModeUnsupportedError("controller was not built in distributed mode")
    M, n, m, N = ctrl.graph.num_agents, ctrl.sys.n, ctrl.sys.m, ctrl.horizon
    Xk = np.asarray(Xk, dtype=float).reshape(M, n)
    shifted = initial_plans(ctrl, Xk) if plans is None else shift_plans(ctrl, plans)
    adj = ctrl.graph.adjacency
    new_plans = []
    Uk = np.empty((M, m))
    reports = []
    for i in range(M):
        neighbors = [shifted[j] for j in range(M) if adj[i, j]]
        prob = _agent_problem(ctrl, i, Xk[i], neighbors)
        try:
            rep = qcqp.solve(prob, backend_name=backend)
        except InfeasibleError as exc:
            raise AgentInfeasibleError(i, str(exc)) from exc
        u = rep.z.reshape(N, m)
        states = np.empty((N + 1, n))
        states[0] = Xk[i]
        for l in range(N):
            states[l + 1] = ctrl.sys.A @ states[l] + ctrl.sys.B @ u[l]
        new_plans.append(AgentPlan(agent=i, states=states, inputs=u.copy()))
        Uk[i] = u[0]
        reports.append(StepReport(
            step=-1, mode="distributed", J_star=rep.objective,
            terminal_slack=prob.beta ** 2 - prob.quad_value(rep.z),
            feasible=True, solver_iters=rep.iterations,
            solver_status=rep.status, kkt_residual=rep.kkt_residual,
            note="one-step-delayed neighbor plans"))
    return Uk.reshape(-1), new_plans, reports


# --------------------------------------------------------------------------
# cost decomposition and terminal-set certification
# --------------------------------------------------------------------------
def decompose_cost(d: ProtocolDesign, states, inputs):
    """Global finite-horizon cost and its per-agent split.

    ``states`` is (T+1, M n), ``inputs`` (T, M m); the cost charges the
    stage weights over steps 0..T-1 and the terminal weight at T.  Needs
    W = mu I and a symmetric Laplacian; their failure is ModeUnsupported.
    """
    M, n, m = d.num_agents, d.n, d.m
    if M < 2:
        raise ModeUnsupportedError("decomposition needs at least two agents")
    lap = d.S1 / d.mu
    if not linalg.is_symmetric(lap):
        raise ModeUnsupportedError("decomposition needs a symmetric Laplacian")
    adj = -lap.copy()
    np.fill_diagonal(adj, 0.0)
    deg = np.diag(lap)
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    T = inputs.shape[0]
    Q2x = _stage_q2(d)
    Hw = d.H / (1.0 + d.alpha)
    mu, c, alpha = d.mu, d.c, d.alpha
    per_agent = np.zeros(M)
    J = 0.0
    for k in range(T + 1):
        X = states[k].reshape(M, n)
        terminal = k == T
        for i in range(M):
            nbr = adj[i] @ X
            di = deg[i]
            if terminal:
                per_agent[i] += mu * float(X[i] @ (di * d.S2 @ X[i] - d.S2 @ nbr))
            else:
                per_agent[i] += mu * float(X[i] @ (di * Q2x @ X[i] - Q2x @ nbr))
                diff = di * X[i] - nbr
                per_agent[i] += c * mu * float(diff @ Hw @ diff)
        if terminal:
            J += d.terminal_norm2(states[k])
        else:
            J += d.state_cost(states[k])
        if not terminal:
            U = inputs[k].reshape(M, m)
            for i in range(M):
                nbr_u = adj[i] @ U
                per_agent[i] += mu * (1.0 + alpha) / (c * alpha) * float(U[i] @ d.R2 @ U[i])
                per_agent[i] -= (mu / alpha) * float(U[i] @ d.R2 @ (deg[i] * U[i] - nbr_u))
            J += d.input_cost(inputs[k])
    return float(J), per_agent


def sample_level_set(d: ProtocolDesign, beta: float, samples: int,
                     seed: int = 0) -> np.ndarray:
    """Gaussian samples in range(Sg) scaled onto the level-set boundary."""
    w, v = np.linalg.eigh(d.Sg)
    keep = w > 1e-10 * max(w.max(), np.finfo(float).tiny)
    basis = v[:, keep]
    vals = w[keep]
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((samples, int(keep.sum())))
    X = g @ basis.T
    norms = np.sqrt(np.einsum("ij,j,ij->i", g, vals, g))
    return X * (beta / norms)[:, None]


def check_terminal_invariance(d: ProtocolDesign, sys: SubsystemModel,
                              g: GraphModel, t: TerminalSet, boxes,
                              samples: int = 10000, seed: int = 0,
                              inflate: float = 1.0) -> bool:
    """Monte-Carlo certificate for forward invariance and input admissibility.

    Samples the (possibly inflated) level-set boundary, applies the optimal
    protocol once, and demands every input inside its box and every
    successor inside the set.  True only with zero violations.
    """
    beta = t.beta * inflate
    if beta == 0.0:
        return True
    lo, hi = normalize_boxes(boxes, d.num_agents, sys.m)
    lo = lo.reshape(-1)
    hi = hi.reshape(-1)
    X = sample_level_set(d, beta, samples, seed)
    U = X @ d.Kg.T
    if np.any(U < lo - 1e-9) or np.any(U > hi + 1e-9):
        return False
    M = g.num_agents
    Ag = linalg.kron(np.eye(M), sys.A)
    Bg = linalg.kron(np.eye(M), sys.B)
    Xn = X @ Ag.T + U @ Bg.T
    vals = np.einsum("ij,jk,ik->i", Xn, d.Sg, Xn)
    return bool(np.all(vals <= beta ** 2 * (1.0 + 1e-9)))
