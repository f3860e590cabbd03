"""Inverse-optimal consensus protocol synthesis.

Builds the per-agent gain and every cost matrix of the global performance
index so that the coupled protocol U = c (L (x) K2) X is the exact optimizer
of an infinite-horizon quadratic cost, for subsystems that are semistable
(Lyapunov-like equation route) or unstable (modified Riccati route).

Conventions used throughout:

* the Lyapunov-like equation is A' S A - S + C'C = 0, the sign under which
  the series construction actually closes;
* R1 = W ((1+alpha) I - c L) / (c alpha).  This is the unique choice for
  which (S1 + alpha R1)^-1 S1 = c L / (1+alpha) holds and the lifted Riccati
  equation is satisfied exactly by Sg = S1 (x) S2; it also keeps R1 positive
  definite on the whole admissible coupling range, including the boundary
  c = 1/sigma_max.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (ConditionViolatedError, ConsensusRhcError, DimensionError,
                     DivergedError, GeneralBUnsupportedError,
                     InfeasibleCouplingError, MalformedDesignError,
                     NotObservableError, NotSemiObservableError,
                     NotSemistableError, NoUnstableEigenvalueError,
                     NumericalFailureError, RankDeficientQ2Error)
from .graphs import GraphModel, analyze_spectrum, check_wl_symmetrizable

log = logging.getLogger("consensus_rhc")

ARE_TOL = 1e-7
BOUNDARY_REL_TOL = 1e-9


# --------------------------------------------------------------------------
# subsystem model
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class SubsystemModel:
    """Agent dynamics x+ = A x + B u with a stability classification."""

    A: np.ndarray
    B: np.ndarray
    classification: str  # "stable" | "semistable" | "unstable"

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def make_subsystem(A, B) -> SubsystemModel:
    """Validate (A, B) and classify A.

    Requires (A, B) controllable and B of full column rank.  A matrix with a
    repeated eigenvalue at 1 is neither semistable nor unstable and is
    rejected outright.
    """
    A = linalg.as_square(A, "A")
    B = linalg.as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
    n = A.shape[0]
    if linalg.rank(B) != B.shape[1]:
        raise ConditionViolatedError(0, "B must have full column rank")
    if linalg.rank(linalg.controllability_matrix(A, B)) != n:
        raise ConditionViolatedError(0, "(A, B) must be controllable")
    summary = linalg.eig(A)
    if summary.unstable_eigenvalues.size:
        cls = "unstable"
    elif summary.is_semistable:
        cls = "stable" if summary.spectral_radius < 1.0 - linalg.TOL_EIG else "semistable"
    else:
        raise ValueError("A has a repeated eigenvalue at 1; the model is "
                         "neither semistable nor unstable")
    return SubsystemModel(A=A, B=B, classification=cls)


@dataclass
class DesignParams:
    """Scalars and the stage-cost seed entering the synthesis.

    ``W`` defaults to mu * I; a general symmetric W is only meaningful for
    centralized operation.  ``delta`` is required in the unstable mode.
    """

    alpha: float
    c: float
    mu: float
    Q2: np.ndarray
    a: float = 1.0
    delta: float | None = None
    W: np.ndarray | None = None

    def weight_matrix(self, num_agents: int) -> np.ndarray:
        if self.W is not None:
            return linalg.as_square(self.W, "W")
        return self.mu * np.eye(num_agents)

    def validate(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.a <= 0:
            raise ValueError("a must be positive")


# --------------------------------------------------------------------------
# protocol design result
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ProtocolDesign:
    """Everything the controller and simulator need, fully materialized."""

    mode: str  # "semistable" | "unstable"
    K2: np.ndarray
    S2: np.ndarray
    Q2: np.ndarray
    R2: np.ndarray
    H: np.ndarray
    S1: np.ndarray
    R1: np.ndarray
    Qg: np.ndarray
    Rg: np.ndarray
    Sg: np.ndarray
    Kg: np.ndarray
    alpha: float
    c: float
    mu: float
    a: float
    delta: float | None
    annihilates_consensus: bool = field(default=False)

    @property
    def num_agents(self) -> int:
        return self.S1.shape[0]

    @property
    def n(self) -> int:
        return self.S2.shape[0]

    @property
    def m(self) -> int:
        return self.K2.shape[0]

    # -- cancellation-safe quadratic forms --------------------------------
    # For a valid design the consensus subspace is in the kernel of Qg, Sg
    # and Kg, so quadratic forms and the protocol gain can be evaluated on
    # agent-mean-centered states.  That is exact in real arithmetic and
    # avoids catastrophic cancellation when the common mode grows large.
    def center(self, X: np.ndarray) -> np.ndarray:
        if not self.annihilates_consensus:
            return X
        blocks = np.asarray(X, dtype=float).reshape(self.num_agents, self.n)
        return (blocks - blocks.mean(axis=0)).reshape(-1)

    def state_cost(self, X) -> float:
        Xc = self.center(np.asarray(X, dtype=float))
        return float(Xc @ self.Qg @ Xc)

    def terminal_norm2(self, X) -> float:
        Xc = self.center(np.asarray(X, dtype=float))
        return float(Xc @ self.Sg @ Xc)

    def protocol_input(self, X) -> np.ndarray:
        return self.Kg @ self.center(np.asarray(X, dtype=float))

    def input_cost(self, U) -> float:
        U = np.asarray(U, dtype=float)
        return float(U @ self.Rg @ U)

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "alpha": self.alpha, "c": self.c, "mu": self.mu, "a": self.a,
            "delta": self.delta,
        }
        for name in ("K2", "S2", "Q2", "R2", "H", "S1", "R1",
                     "Qg", "Rg", "Sg", "Kg"):
            d[name] = getattr(self, name).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolDesign":
        try:
            mats = {name: np.asarray(d[name], dtype=float)
                    for name in ("K2", "S2", "Q2", "R2", "H", "S1", "R1",
                                 "Qg", "Rg", "Sg", "Kg")}
            mode = d["mode"]
            scalars = {k: d[k] for k in ("alpha", "c", "mu", "a")}
            delta = d.get("delta")
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedDesignError(f"design document is malformed: {exc}") from exc
        if mode not in ("semistable", "unstable"):
            raise MalformedDesignError(f"unknown design mode {mode!r}")
        for name, m in mats.items():
            if m.ndim != 2 or not np.isfinite(m).all():
                raise MalformedDesignError(f"matrix {name} is not a finite 2-D array")
        design = cls(mode=mode, **mats, **scalars, delta=delta)
        object.__setattr__(design, "annihilates_consensus",
                           _annihilates_consensus(design))
        return design


def consensus_basis(num_agents: int, n: int) -> np.ndarray:
    """Orthonormal basis of the consensus subspace {1 (x) v}."""
    ones = np.ones((num_agents, 1)) / np.sqrt(num_agents)
    return np.kron(ones, np.eye(n))


def _annihilates_consensus(d: ProtocolDesign) -> bool:
    basis = consensus_basis(d.num_agents, d.n)
    scale = 1.0 + max(np.linalg.norm(d.Qg), np.linalg.norm(d.Sg), np.linalg.norm(d.Kg))
    worst = max(np.abs(d.Qg @ basis).max(), np.abs(d.Sg @ basis).max(),
                np.abs(d.Kg @ basis).max())
    return bool(worst <= 1e-10 * scale)


# --------------------------------------------------------------------------
# semi-observability and the Lyapunov-like equation
# --------------------------------------------------------------------------
def _null_space(m: np.ndarray, cutoff_rel: float = 1e-9) -> np.ndarray:
    """Orthonormal kernel basis via SVD with a relative singular-value cutoff."""
    if m.size == 0:
        return np.eye(m.shape[1])
    u, sv, vt = np.linalg.svd(m)
    if sv.size == 0 or sv[0] == 0.0:
        return vt.T
    r = int(np.sum(sv > cutoff_rel * sv[0]))
    return vt[r:].T


def check_semi_observable(C, A) -> bool:
    """Kernel test: Ker(A - I) equals the joint kernel of C (A - I)^i.

    Both kernels come from rank-revealing SVDs; subspace equality is decided
    by dimension match plus containment of one orthonormal basis in the
    other.
    """
    A = linalg.as_square(A, "A")
    C = linalg.as_matrix(C, "C")
    if C.shape[1] != A.shape[0]:
        raise DimensionError(f"C has {C.shape[1]} columns, A is {A.shape[0]}x{A.shape[0]}")
    n = A.shape[0]
    shifted = A - np.eye(n)
    ker_shift = _null_space(shifted)
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ shifted)
    ker_joint = _null_space(np.vstack(blocks))
    if ker_shift.shape[1] != ker_joint.shape[1]:
        return False
    if ker_shift.shape[1] == 0:
        return True
    resid = ker_shift - ker_joint @ (ker_joint.T @ ker_shift)
    return bool(np.linalg.norm(resid) <= 1e-8)


def factor_stage_cost(Q2, drop_below: float = 1e-10) -> np.ndarray:
    """Symmetric factorization Q2 = C2' C2, dropping eigenvalues < drop_below."""
    Q2 = linalg.as_square(Q2, "Q2")
    if not linalg.is_symmetric(Q2):
        raise DimensionError("Q2 must be symmetric")
    w, v = np.linalg.eigh(linalg.symmetrize(Q2))
    if w.min() < -1e-9 * max(1.0, abs(w).max()):
        raise DimensionError("Q2 must be positive semidefinite")
    keep = w > drop_below
    return (np.sqrt(w[keep])[:, None] * v.T[keep])


def solve_semistable_lyapunov(sys: SubsystemModel, Q2, a: float = 1.0) -> np.ndarray:
    """Positive-definite S2 with A' S2 A - S2 + Q2 = 0 for semistable A.

    S2 is the convergent series sum((A^k)' Q2 A^k) plus a * L'L where
    L = I - (A - I)(A - I)^# projects onto Ker(A - I).  The correction term
    is invisible to the equation because L A = L.
    """
    if sys.classification == "unstable":
        raise NotSemistableError("A has eigenvalues outside the unit circle")
    if a <= 0:
        raise ValueError("series weight a must be positive")
    A = sys.A
    n = sys.n
    C2 = factor_stage_cost(Q2)
    if not check_semi_observable(C2, A):
        raise NotSemiObservableError("(C2, A) is not semi-observable for the "
                                     "given Q2 = C2'C2")
    sigma = linalg.stein_series(A, linalg.symmetrize(np.asarray(Q2, dtype=float)))
    L = np.eye(n) - (A - np.eye(n)) @ linalg.group_inverse(A - np.eye(n))
    S2 = linalg.symmetrize(sigma + a * (L.T @ L))
    w = np.linalg.eigvalsh(S2)
    if w.min() <= 0:
        raise NumericalFailureError(f"S2 is not positive definite "
                                    f"(min eigenvalue {w.min():.3g})")
    resid = np.linalg.norm(A.T @ S2 @ A - S2 + np.asarray(Q2, dtype=float))
    if resid > ARE_TOL * (1.0 + np.linalg.norm(S2)):
        raise NumericalFailureError(f"Lyapunov residual {resid:.3g} too large")
    return S2


def fit_series_weight(sys: SubsystemModel, Q2, S2_target) -> float:
    """Least-squares fit of the series weight a against a target S2.

    One-dimensional: minimizes ||series + a L'L - S2_target||_F over a.
    """
    A = sys.A
    sigma = linalg.stein_series(A, linalg.symmetrize(np.asarray(Q2, dtype=float)))
    L = np.eye(sys.n) - (A - np.eye(sys.n)) @ linalg.group_inverse(A - np.eye(sys.n))
    LTL = L.T @ L
    denom = float(np.sum(LTL * LTL))
    if denom <= 1e-14:
        return 1.0
    return float(np.sum(LTL * (np.asarray(S2_target, dtype=float) - sigma)) / denom)


# --------------------------------------------------------------------------
# modified Riccati equation (unstable subsystems)
# --------------------------------------------------------------------------
def _mare_step(A, B, Q2, alpha, delta, S):
    BS = B.T @ S
    gain_term = A.T @ S @ B @ np.linalg.solve(BS @ B, BS @ A)
    return linalg.symmetrize(A.T @ S @ A + Q2 - delta / (1.0 + alpha) * gain_term)


def solve_modified_are(sys: SubsystemModel, Q2, alpha: float, delta: float,
                       diff_tol: float = 1e-11, max_iter: int = 100000) -> np.ndarray:
    """Fixed-point solve of A'SA - S + Q2 - delta/(1+alpha) A'SB(B'SB)^-1 B'SA = 0.

    Iterates from S = Q2.  Solvability requires delta above a critical value
    set by the unstable eigenvalues; note the effective discount is
    delta/(1+alpha), so for a given alpha the iteration needs
    delta > (1+alpha) * delta_c where delta_c is the alpha-free closed form
    of compute_delta_c.
    """
    Q2 = linalg.as_square(Q2, "Q2")
    if not linalg.is_symmetric(Q2):
        raise DimensionError("Q2 must be symmetric")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    A, B = sys.A, sys.B
    if sys.classification == "unstable":
        C = factor_stage_cost(Q2)
        if linalg.rank(linalg.observability_matrix(C, A)) != sys.n:
            raise NotObservableError("(A, Q2^(1/2)) must be observable when A "
                                     "is unstable")
    S = linalg.symmetrize(Q2)
    inc0 = None
    grew = 0
    for k in range(max_iter):
        try:
            S_next = _mare_step(A, B, Q2, alpha, delta, S)
        except np.linalg.LinAlgError as exc:
            raise DivergedError(f"B'SB became singular at iteration {k}") from exc
        inc = float(np.linalg.norm(S_next - S))
        S = S_next
        if inc < diff_tol:
            resid = np.linalg.norm(_mare_step(A, B, Q2, alpha, delta, S) - S)
            if resid > 1e-8 * (1.0 + np.linalg.norm(S)):
                raise NumericalFailureError(f"fixed point reached but residual "
                                            f"{resid:.3g} too large")
            return S
        if not np.isfinite(inc) or np.linalg.norm(S) > 1e13:
            raise DivergedError(
                f"iteration diverged at step {k}; delta={delta} is at or below "
                "the critical value for this system (or Q2 is unsuitable)")
        if inc0 is None:
            inc0 = inc
        grew = grew + 1 if inc > 10.0 * inc0 else 0
        if grew >= 200:
            raise DivergedError(
                f"increments grew persistently; delta={delta} is at or below "
                "the critical value for this system")
    raise DivergedError(f"no convergence within {max_iter} iterations")


def compute_delta_c(sys: SubsystemModel, alpha: float = 0.0) -> float:
    """Critical discount for the modified Riccati equation, closed form.

    1 - 1/max|lam_u|^2 for square invertible B, 1 - 1/prod|lam_u|^2 for rank
    one B.  The value characterizes solvability of the equation with the
    discount applied directly (the alpha = 0 reading); for alpha > 0 the
    equation above is solvable iff delta/(1+alpha) exceeds this value.
    ``alpha`` is accepted for interface symmetry and reported in the hint
    only.
    """
    summary = linalg.eig(sys.A)
    lam_u = summary.unstable_eigenvalues
    if lam_u.size == 0:
        raise NoUnstableEigenvalueError("A has no eigenvalue with |lam| > 1")
    mods2 = np.abs(lam_u) ** 2
    n, m = sys.n, sys.m
    if n == m and linalg.rank(sys.B) == n:
        dc = 1.0 - 1.0 / float(mods2.max())
    elif linalg.rank(sys.B) == 1:
        dc = 1.0 - 1.0 / float(mods2.prod())
    else:
        raise GeneralBUnsupportedError(
            "closed form needs B square invertible or rank one; supply delta "
            "directly (solvability requires delta/(1+alpha) above the "
            "system's critical discount)")
    if alpha:
        log.debug("delta_c=%.6g; with alpha=%.3g the equation needs delta > %.6g",
                  dc, alpha, (1.0 + alpha) * dc)
    return dc


# --------------------------------------------------------------------------
# protocol synthesis
# --------------------------------------------------------------------------
def _fail_collector(enforce: bool):
    """Raise when enforcing, log-and-continue when conditions are overridden."""
    def fail(exc: ConsensusRhcError):
        if enforce:
            raise exc
        log.warning("condition overridden: %s", exc)
    return fail


def _check_assumptions(sys: SubsystemModel, g: GraphModel, fail):
    if linalg.rank(sys.B) != sys.m:
        fail(ConditionViolatedError(0, "B must have full column rank"))
    if linalg.rank(linalg.controllability_matrix(sys.A, sys.B)) != sys.n:
        fail(ConditionViolatedError(0, "(A, B) must be controllable"))
    spec = analyze_spectrum(g)
    if not spec.has_spanning_tree:
        fail(ConditionViolatedError(0, "graph must contain a spanning tree "
                                       f"(zero multiplicity {spec.zero_multiplicity})"))
    return spec


def _check_coupling(c: float, lo: float, hi: float, allow_boundary_c: bool,
                    fail):
    """Condition 6.  Strict at the upper end unless explicitly overridden."""
    if lo > hi * (1.0 + BOUNDARY_REL_TOL):
        fail(InfeasibleCouplingError(
            f"no admissible coupling: delta/sigma_min = {lo:.6g} exceeds "
            f"1/sigma_max = {hi:.6g}"))
    if c > hi * (1.0 + BOUNDARY_REL_TOL):
        fail(ConditionViolatedError(6, f"c = {c:.6g} exceeds 1/sigma_max(L) = {hi:.6g}"))
    if c < lo * (1.0 - BOUNDARY_REL_TOL):
        fail(ConditionViolatedError(6, f"c = {c:.6g} is below delta/sigma_min(L) = {lo:.6g}"))
    at_boundary = c >= hi * (1.0 - BOUNDARY_REL_TOL)
    if at_boundary and not allow_boundary_c:
        fail(ConditionViolatedError(
            6, f"c = {c:.6g} sits on the boundary 1/sigma_max(L) = {hi:.6g}; "
               "pass allow_boundary_c=True to accept it"))
    elif at_boundary:
        log.warning("coupling c = %.6g accepted on the boundary 1/sigma_max = %.6g",
                    c, hi)


def _condition_matrices(sys: SubsystemModel, g: GraphModel, p: DesignParams,
                        S2: np.ndarray, fail):
    """Conditions 3-5 plus the matrices shared by both modes."""
    M = g.num_agents
    W = p.weight_matrix(M)
    if linalg.rank(W) != M:
        fail(ConditionViolatedError(3, "W must be invertible"))
    if not check_wl_symmetrizable(g, W):
        fail(ConditionViolatedError(3, "W L must be symmetric"))
    S1 = linalg.symmetrize(W @ g.laplacian)
    if not linalg.is_psd(S1):
        fail(ConditionViolatedError(3, "S1 = W L must be positive semidefinite"))
    R1 = linalg.symmetrize(
        W @ ((1.0 + p.alpha) * np.eye(M) - p.c * g.laplacian) / (p.c * p.alpha))
    if not linalg.is_pd(R1):
        fail(ConditionViolatedError(4, "R1 is not positive definite"))
    BtSB = sys.B.T @ S2 @ sys.B
    R2 = linalg.symmetrize(p.alpha * BtSB)
    if not linalg.is_pd(R2):
        fail(ConditionViolatedError(5, "R2 = alpha B'S2B is not positive definite"))
    K2 = -np.linalg.solve(BtSB + R2, sys.B.T @ S2 @ sys.A)
    H = linalg.symmetrize(sys.A.T @ S2 @ sys.B @ np.linalg.solve(BtSB, sys.B.T @ S2 @ sys.A))
    return W, S1, R1, R2, K2, H


def _assemble(mode: str, sys: SubsystemModel, g: GraphModel, p: DesignParams,
              S2, Q2, S1, R1, R2, K2, H, Qg, fail) -> ProtocolDesign:
    Sg = linalg.kron(S1, S2)
    Rg = linalg.kron(R1, R2)
    Kg = p.c * linalg.kron(g.laplacian, K2)
    design = ProtocolDesign(
        mode=mode, K2=K2, S2=S2, Q2=np.asarray(Q2, dtype=float), R2=R2, H=H,
        S1=S1, R1=R1, Qg=Qg, Rg=Rg, Sg=Sg, Kg=Kg,
        alpha=p.alpha, c=p.c, mu=p.mu, a=p.a, delta=p.delta)
    object.__setattr__(design, "annihilates_consensus",
                       _annihilates_consensus(design))
    resid = verify_global_are(design, sys, g)
    if resid > ARE_TOL:
        fail(NumericalFailureError(f"global Riccati residual {resid:.3g} "
                                   f"exceeds {ARE_TOL}"))
    gain_err = _gain_identity_error(design, sys, g)
    if gain_err > ARE_TOL:
        fail(NumericalFailureError(f"gain identity residual {gain_err:.3g} "
                                   f"exceeds {ARE_TOL}"))
    return design


def design_semistable(sys: SubsystemModel, g: GraphModel, p: DesignParams,
                      allow_boundary_c: bool = False,
                      override_conditions: bool = False) -> ProtocolDesign:
    """Optimal consensus protocol for semistable subsystem dynamics.

    Conditions, in the numbering used by ConditionViolatedError:
      1. Q2 = C2'C2 with rank(C2) = n - 1 and (C2, A) semi-observable;
      2. S2 > 0 solves the Lyapunov-like equation (built here);
      3. W symmetric invertible with W L symmetric and W L >= 0;
      4. R1 = W((1+alpha) I - c L)/(c alpha) > 0;
      5. R2 = alpha B'S2B > 0;
      6. c <= 1/sigma_max(L), strict unless allow_boundary_c.

    With ``override_conditions`` failed conditions are logged instead of
    raised and the construction proceeds as far as the algebra allows; the
    result then carries no optimality or consensus guarantee.
    """
    p.validate()
    fail = _fail_collector(not override_conditions)
    if sys.classification == "unstable":
        raise NotSemistableError("subsystem is unstable; use design_unstable")
    spec = _check_assumptions(sys, g, fail)
    C2 = factor_stage_cost(p.Q2)
    r = C2.shape[0]
    if sys.n < 2 or r != sys.n - 1 or r == 0:
        fail(RankDeficientQ2Error(f"rank(C2) = {r}, need n - 1 = {sys.n - 1} "
                                  "with n >= 2"))
    if not check_semi_observable(C2, sys.A):
        fail(ConditionViolatedError(1, "(C2, A) is not semi-observable"))
    _check_coupling(p.c, 0.0, 1.0 / spec.sigma_max, allow_boundary_c, fail)
    try:
        S2 = solve_semistable_lyapunov(sys, p.Q2, p.a)
    except (NotSemiObservableError, DivergedError) as exc:
        raise ConditionViolatedError(2, str(exc)) from exc
    W, S1, R1, R2, K2, H = _condition_matrices(sys, g, p, S2, fail)
    Qg = linalg.symmetrize(
        linalg.kron(S1, np.asarray(p.Q2, dtype=float))
        + linalg.kron(p.c * S1 @ g.laplacian / (1.0 + p.alpha), H))
    if not linalg.is_psd(Qg):
        fail(ConditionViolatedError(6, "global state weight is not PSD"))
    return _assemble("semistable", sys, g, p, S2, p.Q2, S1, R1, R2, K2, H, Qg,
                     fail)


def design_unstable(sys: SubsystemModel, g: GraphModel, p: DesignParams,
                    allow_boundary_c: bool = False,
                    override_conditions: bool = False) -> ProtocolDesign:
    """Optimal consensus protocol for unstable subsystem dynamics.

    Same numbered conditions as the semistable mode except:
      1. Q2 > 0 with (A, Q2^(1/2)) observable;
      2. S2 > 0 solves the modified Riccati equation at the given delta;
      6. delta/sigma_min(L) <= c <= 1/sigma_max(L).
    """
    p.validate()
    fail = _fail_collector(not override_conditions)
    if sys.classification != "unstable":
        raise ValueError("subsystem is not unstable; use design_semistable")
    if p.delta is None:
        raise ValueError("unstable mode requires delta (see compute_delta_c)")
    spec = _check_assumptions(sys, g, fail)
    Q2 = linalg.as_square(p.Q2, "Q2")
    if not (linalg.is_symmetric(Q2) and linalg.is_pd(Q2)):
        fail(ConditionViolatedError(1, "Q2 must be symmetric positive definite"))
    C = factor_stage_cost(Q2)
    if linalg.rank(linalg.observability_matrix(C, sys.A)) != sys.n:
        fail(ConditionViolatedError(1, "(A, Q2^(1/2)) must be observable"))
    _check_coupling(p.c, p.delta / spec.sigma_min_nonzero, 1.0 / spec.sigma_max,
                    allow_boundary_c, fail)
    try:
        S2 = solve_modified_are(sys, Q2, p.alpha, p.delta)
    except (DivergedError, NotObservableError) as exc:
        raise ConditionViolatedError(2, str(exc)) from exc
    W, S1, R1, R2, K2, H = _condition_matrices(sys, g, p, S2, fail)
    Qg = linalg.symmetrize(
        linalg.kron(S1, Q2)
        + linalg.kron((p.c * S1 @ g.laplacian - p.delta * S1) / (1.0 + p.alpha), H))
    if not linalg.is_psd(Qg):
        fail(ConditionViolatedError(6, "global state weight is not PSD "
                                       "(c below delta/sigma_min?)"))
    # kernel of the state weight must be exactly the consensus subspace
    Mn = g.num_agents * sys.n
    if linalg.rank(Qg) != Mn - sys.n:
        fail(ConditionViolatedError(1, "Ker(Qg) is larger than the consensus "
                                       "subspace; Q2 too weak"))
    return _assemble("unstable", sys, g, p, S2, Q2, S1, R1, R2, K2, H, Qg,
                     fail)


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------
def verify_global_are(d: ProtocolDesign, sys: SubsystemModel, g: GraphModel) -> float:
    """Frobenius residual of the lifted Riccati identity, scaled by 1 + ||Sg||."""
    M = g.num_agents
    Ag = linalg.kron(np.eye(M), sys.A)
    Bg = linalg.kron(np.eye(M), sys.B)
    Sg, Rg, Qg = d.Sg, d.Rg, d.Qg
    BtS = Bg.T @ Sg
    mid = Ag.T @ Sg @ Bg @ np.linalg.solve(Rg + BtS @ Bg, BtS @ Ag)
    resid = Ag.T @ Sg @ Ag - Sg - mid + Qg
    return float(np.linalg.norm(resid) / (1.0 + np.linalg.norm(Sg)))


def check_conditions(sys: SubsystemModel, g: GraphModel, p: DesignParams,
                     mode: str, allow_boundary_c: bool = False) -> list[dict]:
    """Evaluate every design condition without raising.

    Returns one entry per assumption/condition with a pass flag and the
    computed quantity it was judged against; the CLI turns this into the
    design report.  Condition 2 actually attempts the equation solve.
    """
    entries: list[dict] = []

    def add(cond, label, passed, detail=""):
        entries.append({"condition": cond, "label": label,
                        "passed": bool(passed), "detail": detail})

    add(0, "B full column rank", linalg.rank(sys.B) == sys.m)
    add(0, "(A, B) controllable",
        linalg.rank(linalg.controllability_matrix(sys.A, sys.B)) == sys.n)
    spec = analyze_spectrum(g)
    add(0, "graph contains a spanning tree", spec.has_spanning_tree,
        f"zero eigenvalue multiplicity {spec.zero_multiplicity}")
    if mode == "semistable":
        add(0, "A semistable", sys.classification != "unstable",
            f"classification: {sys.classification}")
        try:
            C2 = factor_stage_cost(p.Q2)
            rank_ok = C2.shape[0] == sys.n - 1 and C2.shape[0] > 0
            semi = check_semi_observable(C2, sys.A)
            add(1, "rank(C2) = n-1 and (C2, A) semi-observable",
                rank_ok and semi, f"rank(C2) = {C2.shape[0]}, n = {sys.n}")
        except (DimensionError, ValueError) as exc:
            add(1, "Q2 factorization", False, str(exc))
    else:
        pd_ok = linalg.is_symmetric(np.asarray(p.Q2, dtype=float)) \
            and linalg.is_pd(np.asarray(p.Q2, dtype=float))
        obs = False
        if pd_ok:
            C = factor_stage_cost(p.Q2)
            obs = linalg.rank(linalg.observability_matrix(C, sys.A)) == sys.n
        add(1, "Q2 > 0 and (A, Q2^(1/2)) observable", pd_ok and obs)
        add(0, "A unstable", sys.classification == "unstable",
            f"classification: {sys.classification}")
    # condition 2: attempt the equation solve
    S2 = None
    try:
        if mode == "semistable":
            S2 = solve_semistable_lyapunov(sys, p.Q2, p.a)
            add(2, "S2 > 0 solves the Lyapunov-like equation", True)
        else:
            if p.delta is None:
                add(2, "S2 > 0 solves the modified Riccati equation", False,
                    "delta not supplied")
            else:
                S2 = solve_modified_are(sys, p.Q2, p.alpha, p.delta)
                add(2, "S2 > 0 solves the modified Riccati equation", True)
    except (ConsensusRhcError, ValueError) as exc:
        add(2, "S2 equation solve", False, str(exc))
    W = p.weight_matrix(g.num_agents)
    try:
        wl_ok = linalg.rank(W) == g.num_agents and check_wl_symmetrizable(g, W) \
            and linalg.is_psd(linalg.symmetrize(W @ g.laplacian))
    except ConsensusRhcError:
        wl_ok = False
    add(3, "W symmetric invertible, W L symmetric, W L >= 0", wl_ok)
    R1 = linalg.symmetrize(W @ ((1.0 + p.alpha) * np.eye(g.num_agents)
                                - p.c * g.laplacian) / (p.c * p.alpha))
    add(4, "R1 positive definite", linalg.is_pd(R1))
    if S2 is not None:
        add(5, "R2 = alpha B'S2B positive definite",
            p.alpha > 0 and linalg.is_pd(p.alpha * sys.B.T @ S2 @ sys.B))
    else:
        add(5, "R2 = alpha B'S2B positive definite", False, "no S2")
    lo = 0.0 if mode == "semistable" or p.delta is None \
        else p.delta / spec.sigma_min_nonzero
    hi = 1.0 / spec.sigma_max
    at_boundary = p.c >= hi * (1.0 - BOUNDARY_REL_TOL)
    ok6 = (lo * (1.0 - BOUNDARY_REL_TOL) <= p.c <= hi * (1.0 + BOUNDARY_REL_TOL)
           and (not at_boundary or allow_boundary_c))
    detail6 = f"admissible interval [{lo:.6g}, {hi:.6g}], c = {p.c:.6g}"
    if at_boundary:
        detail6 += " (boundary" + (", accepted by override)" if allow_boundary_c
                                   else "; needs allow_boundary_c)")
    add(6, "coupling bound", ok6, detail6)
    return entries


def _gain_identity_error(d: ProtocolDesign, sys: SubsystemModel, g: GraphModel) -> float:
    M = g.num_agents
    Ag = linalg.kron(np.eye(M), sys.A)
    Bg = linalg.kron(np.eye(M), sys.B)
    BtS = Bg.T @ d.Sg
    K_opt = -np.linalg.solve(d.Rg + BtS @ Bg, BtS @ Ag)
    return float(np.linalg.norm(d.Kg - K_opt) / (1.0 + np.linalg.norm(d.Kg)))
