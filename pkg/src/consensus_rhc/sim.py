"""Closed-loop simulation harness.

Advances the true multi-agent dynamics under either the receding-horizon
controller or the plain linear protocol, records everything, and computes
the consensus metrics and runtime certificates.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .design import ProtocolDesign, SubsystemModel
from .errors import InfeasibleError
from .graphs import GraphModel
from .rhc import (RhcController, StepReport, shifted_candidate,
                  step_centralized, step_distributed)

log = logging.getLogger("consensus_rhc")


@dataclass(frozen=True)
class LinearProtocol:
    """Closed loop under U = Kg X, no constraint handling."""
    design: ProtocolDesign
    sys: SubsystemModel
    graph: GraphModel


@dataclass
class SimConfig:
    steps: int
    X0: np.ndarray
    controller: RhcController | LinearProtocol
    record_plans: bool = False
    seed: int = 0
    check_candidates: bool = True


@dataclass
class SimResult:
    mode: str  # "centralized" | "distributed" | "linear"
    states: np.ndarray        # (T+1, M n)
    inputs: np.ndarray        # (T, M m)
    costs: np.ndarray         # (T,) optimal costs, nan in linear mode
    disagreement: np.ndarray  # (T+1,)
    saturated: np.ndarray     # (T,) bool
    terminal_entry_step: int | None
    feasible_all: bool
    reports: list = field(default_factory=list, repr=False)
    candidate_feasible: np.ndarray | None = None
    plans_log: list = field(default_factory=list, repr=False)
    num_agents: int = 0
    n: int = 0
    m: int = 0

    @property
    def steps_completed(self) -> int:
        return self.inputs.shape[0]


def disagreement_of(X, num_agents: int, n: int) -> float:
    """Largest pairwise distance between agent states."""
    blocks = np.asarray(X, dtype=float).reshape(num_agents, n)
    diff = blocks[:, None, :] - blocks[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())


def run(cfg: SimConfig) -> SimResult:
    """Simulate ``cfg.steps`` closed-loop steps.

    RHC infeasibility halts the run early with feasible_all set false; that
    situation signals a bad initial condition, not a controller fault, so it
    is surfaced rather than patched over.
    """
    ctrl = cfg.controller
    linear = isinstance(ctrl, LinearProtocol)
    design = ctrl.design
    M, n, m = ctrl.graph.num_agents, ctrl.sys.n, ctrl.sys.m
    T = int(cfg.steps)
    if T < 1:
        raise ValueError("steps must be >= 1")
    X0 = np.asarray(cfg.X0, dtype=float).reshape(-1)
    if X0.shape[0] != M * n:
        raise ValueError(f"X0 has length {X0.shape[0]}, expected {M * n}")
    Ag = linalg.kron(np.eye(M), ctrl.sys.A)
    Bg = linalg.kron(np.eye(M), ctrl.sys.B)

    states = np.empty((T + 1, M * n))
    inputs = np.empty((T, M * m))
    costs = np.full(T, np.nan)
    sat = np.zeros(T, dtype=bool)
    check_cand = (not linear and cfg.check_candidates
                  and ctrl.mode == "centralized")
    cand_ok = np.ones(T, dtype=bool) if check_cand else None
    reports: list[StepReport] = []
    plans_log = []
    states[0] = X0
    mode = "linear" if linear else ctrl.mode
    feasible_all = True
    terminal_entry = None
    beta2 = None if linear else ctrl.terminal.beta ** 2
    if not linear:
        lo = ctrl.box_lo.reshape(-1)
        hi = ctrl.box_hi.reshape(-1)
    plans = None
    steps_done = T
    for k in range(T):
        Xk = states[k]
        if (terminal_entry is None and beta2 is not None
                and design.terminal_norm2(Xk) <= beta2 * (1 + 1e-9)):
            terminal_entry = k
        if linear:
            Uk = design.protocol_input(Xk)
        else:
            try:
                if ctrl.mode == "centralized":
                    Uk, zbar, rep = step_centralized(ctrl, Xk)
                    rep.step = k
                    reports.append(rep)
                    costs[k] = rep.J_star
                    if check_cand:
                        _, ok = shifted_candidate(ctrl, Xk, zbar)
                        cand_ok[k] = ok
                else:
                    Uk, plans, agent_reps = step_distributed(ctrl, plans, Xk)
                    for r in agent_reps:
                        r.step = k
                    reports.extend(agent_reps)
                    costs[k] = float(sum(r.J_star for r in agent_reps))
                    if cfg.record_plans:
                        plans_log.append(plans)
            except InfeasibleError as exc:
                log.warning("infeasible at step %d: %s", k, exc)
                feasible_all = False
                steps_done = k
                break
            sat[k] = bool(np.any(Uk <= lo + 1e-9) or np.any(Uk >= hi - 1e-9))
        inputs[k] = Uk
        states[k + 1] = Ag @ Xk + Bg @ Uk
    states = states[:steps_done + 1]
    inputs = inputs[:steps_done]
    costs = costs[:steps_done]
    sat = sat[:steps_done]
    if cand_ok is not None:
        cand_ok = cand_ok[:steps_done]
    dis = np.array([disagreement_of(x, M, n) for x in states])
    if linear:
        terminal_entry = 0
    return SimResult(mode=mode, states=states, inputs=inputs, costs=costs,
                     disagreement=dis, saturated=sat,
                     terminal_entry_step=terminal_entry,
                     feasible_all=feasible_all, reports=reports,
                     candidate_feasible=cand_ok, plans_log=plans_log,
                     num_agents=M, n=n, m=m)


def replay(result: SimResult, sys: SubsystemModel, g: GraphModel) -> np.ndarray:
    """Re-roll the dynamics from X0 under the recorded inputs.

    Uses the same matrix path as run(), so the output must match the
    recorded states bit for bit.
    """
    M = g.num_agents
    Ag = linalg.kron(np.eye(M), sys.A)
    Bg = linalg.kron(np.eye(M), sys.B)
    out = np.empty_like(result.states)
    out[0] = result.states[0]
    for k in range(result.inputs.shape[0]):
        out[k + 1] = Ag @ out[k] + Bg @ result.inputs[k]
    return out


def consensus_verdict(r: SimResult, tol: float = 1e-3, window: int = 20) -> str:
    """Finite-run verdict: no_consensus, consensus, or convergent_consensus.

    Consensus needs the disagreement below tol over the last ``window``
    steps; the convergent flavor additionally needs the windowed state norms
    bounded by ten times their run-wide median (a finite-horizon proxy for
    boundedness).
    """
    if window > r.disagreement.shape[0]:
        raise ValueError("window exceeds the recorded run length")
    if not np.all(r.disagreement[-window:] < tol):
        return "no_consensus"
    norms = np.linalg.norm(r.states, axis=1)
    if norms[-window:].max() <= 10.0 * np.median(norms) + 1e-12:
        return "convergent_consensus"
    return "consensus"


def lyapunov_certificate(r: SimResult, d: ProtocolDesign, slack: float = 1e-6) -> bool:
    """Per-step decrease of the closed-loop certificate function.

    Linear runs check ||X||^2_Sg from step 0; RHC runs check the optimal
    cost from the terminal-entry step on.
    """
    if r.mode == "linear":
        v = np.array([d.terminal_norm2(x) for x in r.states])
        return bool(np.all(np.diff(v) <= slack))
    start = r.terminal_entry_step if r.terminal_entry_step is not None else 0
    v = r.costs[start:]
    if v.size < 2:
        return True
    return bool(np.all(np.diff(v) <= slack))


# --------------------------------------------------------------------------
# output files
# --------------------------------------------------------------------------
def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(r: SimResult, path):
    """Trajectory table, one row per (step, agent).

    The final recorded step of each agent carries the terminal state with
    empty input and cost columns; when the run halted on infeasibility that
    row reports feasible=false.
    """
    M, n, m = r.num_agents, r.n, r.m
    header = (["step", "agent"] + [f"x_{i+1}" for i in range(n)]
              + [f"u_{i+1}" for i in range(m)]
              + ["disagreement", "J_star", "feasible"])
    T = r.inputs.shape[0]
    lines = [",".join(header)]
    for k in range(T + 1):
        X = r.states[k].reshape(M, n)
        U = r.inputs[k].reshape(M, m) if k < T else None
        feas = "true" if (k < T or r.feasible_all) else "false"
        for i in range(M):
            row = [str(k), str(i)]
            row += [_fmt(v) for v in X[i]]
            row += [_fmt(v) for v in U[i]] if U is not None else [""] * m
            row.append(_fmt(r.disagreement[k]))
            row.append(_fmt(r.costs[k]) if k < T and np.isfinite(r.costs[k]) else "")
            row.append(feas)
            lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_jsonl(r: SimResult, path):
    with open(path, "w") as fh:
        for rep in r.reports:
            fh.write(json.dumps(rep.to_json_dict()) + "\n")


def summarize(r: SimResult, tol: float = 1e-3, window: int = 20) -> dict:
    window = min(window, r.disagreement.shape[0])
    return {
        "mode": r.mode,
        "steps": int(r.inputs.shape[0]),
        "feasible_all": bool(r.feasible_all),
        "verdict": consensus_verdict(r, tol=tol, window=window),
        "terminal_entry_step": r.terminal_entry_step,
        "max_input_magnitude": float(np.abs(r.inputs).max()) if r.inputs.size else 0.0,
        "final_disagreement": float(r.disagreement[-1]),
        "max_state_norm": float(np.abs(r.states).max()),
    }
