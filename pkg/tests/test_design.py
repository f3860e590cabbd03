import json

import numpy as np
import pytest

from consensus_rhc import linalg
from consensus_rhc.design import (DesignParams, ProtocolDesign,
                                  check_conditions, check_semi_observable,
                                  compute_delta_c, consensus_basis,
                                  design_semistable, design_unstable,
                                  factor_stage_cost, fit_series_weight,
                                  make_subsystem, solve_modified_are,
                                  solve_semistable_lyapunov, verify_global_are)
from consensus_rhc.errors import (ConditionViolatedError, DivergedError,
                                  GeneralBUnsupportedError,
                                  InfeasibleCouplingError,
                                  MalformedDesignError,
                                  NotSemiObservableError, NotSemistableError,
                                  NoUnstableEigenvalueError,
                                  RankDeficientQ2Error)
from consensus_rhc.graphs import build_graph, coupling_bounds
from consensus_rhc.scenarios import (SEMI_S2_REFERENCE, UNST_S2_REFERENCE,
                                     UNST_ALPHA, UNST_NOMINAL_DELTA)
from oracles import bisect_root

K3 = np.ones((3, 3)) - np.eye(3)
PATH2 = np.array([[0, 1], [1, 0]], dtype=float)


def scalar_mare_solution(a, q, delta, alpha):
    """For scalar dynamics the equation is linear in S."""
    denom = 1.0 - a * a * (1.0 - delta / (1.0 + alpha))
    assert denom > 0
    return q / denom


class TestSemiObservable:
    def test_stable_fully_observable(self, rng):
        A = 0.5 * rng.standard_normal((3, 3))
        A *= 0.8 / max(np.abs(np.linalg.eigvals(A)).max(), 1e-9)
        assert check_semi_observable(np.eye(3), A)

    def test_identity_with_partial_output(self):
        assert not check_semi_observable(np.array([[1.0, 0.0]]), np.eye(2))

    def test_semistable_example(self, cfg_semistable):
        c = cfg_semistable
        C2 = factor_stage_cost(c.params.Q2)
        assert C2.shape[0] == 4  # rank n - 1
        assert check_semi_observable(C2, c.sys.A)


class TestSemistableLyapunov:
    def test_stable_matrix_no_correction(self):
        sys = make_subsystem(np.zeros((2, 2)), np.eye(2))
        S2 = solve_semistable_lyapunov(sys, np.eye(2), a=1.0)
        assert np.allclose(S2, np.eye(2), atol=1e-12)

    def test_pure_projector_correction(self):
        sys = make_subsystem([[1.0]], [[1.0]])
        S2 = solve_semistable_lyapunov(sys, [[0.0]], a=2.0)
        assert S2[0, 0] == pytest.approx(2.0, abs=1e-14)

    def test_reference_reproduction(self, cfg_semistable):
        c = cfg_semistable
        a = fit_series_weight(c.sys, c.params.Q2, SEMI_S2_REFERENCE)
        S2 = solve_semistable_lyapunov(c.sys, c.params.Q2, a)
        assert np.max(np.abs(S2 - SEMI_S2_REFERENCE)) <= 5e-3
        resid = np.linalg.norm(c.sys.A.T @ S2 @ c.sys.A - S2 + c.params.Q2)
        assert resid <= 1e-7 * (1 + np.linalg.norm(S2))
        assert np.linalg.eigvalsh(S2).min() > 0

    def test_unstable_rejected(self, cfg_unstable):
        with pytest.raises(NotSemistableError):
            solve_semistable_lyapunov(cfg_unstable.sys, np.eye(3))

    def test_not_semi_observable_rejected(self):
        sys = make_subsystem(np.diag([1.0, 0.5]), [[1.0], [1.0]])
        with pytest.raises(NotSemiObservableError):
            solve_semistable_lyapunov(sys, np.diag([1.0, 0.0]))


class TestDesignSemistable:
    def test_example_large_coupling_rejected(self, cfg_semistable):
        c = cfg_semistable
        params = DesignParams(alpha=10.0, c=10.0, mu=0.5, Q2=c.params.Q2,
                              a=c.params.a)
        with pytest.raises(ConditionViolatedError) as exc:
            design_semistable(c.sys, c.graph, params)
        assert exc.value.condition == 6

    def test_boundary_needs_override(self, cfg_semistable):
        c = cfg_semistable
        with pytest.raises(ConditionViolatedError) as exc:
            design_semistable(c.sys, c.graph, c.params, allow_boundary_c=False)
        assert exc.value.condition == 6

    def test_example_design_valid(self, cfg_semistable, design_semi):
        c = cfg_semistable
        assert verify_global_are(design_semi, c.sys, c.graph) <= 1e-7
        assert linalg.is_psd(design_semi.Qg)
        assert design_semi.annihilates_consensus

    def test_degenerate_dimension_rejected(self):
        sys = make_subsystem([[1.0]], [[1.0]])
        g = build_graph(PATH2)
        params = DesignParams(alpha=1.0, c=0.4, mu=1.0, Q2=[[0.0]])
        with pytest.raises(RankDeficientQ2Error):
            design_semistable(sys, g, params)

    def test_random_stable_design(self, rng):
        A = rng.standard_normal((3, 3))
        A *= 0.75 / np.abs(np.linalg.eigvals(A)).max()
        B = rng.standard_normal((3, 2))
        sys = make_subsystem(A, B)
        C2 = np.eye(3)[:2]
        assert check_semi_observable(C2, A)
        g = build_graph(K3)
        params = DesignParams(alpha=1.0, c=0.25, mu=1.0, Q2=C2.T @ C2)
        d = design_semistable(sys, g, params)
        assert verify_global_are(d, sys, g) <= 1e-7
        assert linalg.is_psd(d.Qg)

    def test_kronecker_identity(self, design_semi, cfg_semistable):
        d = design_semi
        lap = cfg_semistable.graph.laplacian
        lhs = np.linalg.solve(d.S1 + d.alpha * d.R1, d.S1)
        rhs = d.c * lap / (1.0 + d.alpha)
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * (1 + np.linalg.norm(rhs))

    def test_consensus_kernel_property(self, design_semi):
        d = design_semi
        basis = consensus_basis(d.num_agents, d.n)
        scale = 1 + np.linalg.norm(d.Qg)
        assert np.abs(d.Qg @ basis).max() <= 1e-10 * scale
        assert np.abs(d.Kg @ basis).max() <= 1e-10 * (1 + np.linalg.norm(d.Kg))


class TestGainFormulas:
    def test_k2_two_ways(self, design_semi, design_unst, cfg_semistable,
                         cfg_unstable):
        for d, cfg in ((design_semi, cfg_semistable), (design_unst, cfg_unstable)):
            B, A = cfg.sys.B, cfg.sys.A
            BtSB = B.T @ d.S2 @ B
            k_a = -np.linalg.solve(BtSB + d.R2, B.T @ d.S2 @ A)
            k_b = -np.linalg.solve((1.0 + d.alpha) * BtSB, B.T @ d.S2 @ A)
            assert np.abs(k_a - k_b).max() <= 1e-10 * (1 + np.abs(k_a).max())
            assert np.abs(d.K2 - k_a).max() <= 1e-12 * (1 + np.abs(k_a).max())


class TestDeltaC:
    def test_scalar_square(self):
        sys = make_subsystem([[2.0]], [[1.0]])
        assert compute_delta_c(sys) == pytest.approx(0.75, abs=1e-12)

    def test_max_rule_ignores_stable_modes(self):
        sys = make_subsystem(np.diag([2.0, 0.5]), np.eye(2))
        assert compute_delta_c(sys) == pytest.approx(0.75, abs=1e-12)

    def test_rank_one_example(self, cfg_unstable):
        root = bisect_root(lambda x: x ** 3 - 1.1 * x ** 2 - 0.2 * x + 0.2,
                           1.05, 1.3)
        dc = compute_delta_c(cfg_unstable.sys)
        assert dc == pytest.approx(1.0 - 1.0 / root ** 2, abs=1e-9)
        # the commonly quoted 0.1634 sits below the critical value for
        # these dynamics; both values are reported rather than reconciled
        assert dc > UNST_NOMINAL_DELTA

    def test_unsupported_shapes(self, rng):
        sys = make_subsystem(np.diag([2.0, 0.5, 0.3]),
                             rng.standard_normal((3, 2)))
        with pytest.raises(GeneralBUnsupportedError):
            compute_delta_c(sys)
        stable = make_subsystem(np.diag([0.5, 0.1]), np.eye(2))
        with pytest.raises(NoUnstableEigenvalueError):
            compute_delta_c(stable)


class TestModifiedAre:
    def test_scalar_against_closed_form(self):
        sys = make_subsystem([[0.5]], [[1.0]])
        for delta, alpha in ((1.0, 0.0), (0.3, 0.0), (0.6, 0.5), (0.0, 0.2)):
            S = solve_modified_are(sys, [[1.0]], alpha, delta)
            assert S[0, 0] == pytest.approx(
                scalar_mare_solution(0.5, 1.0, delta, alpha), abs=1e-10)

    def test_zero_delta_reduces_to_stein(self, rng):
        A = rng.standard_normal((3, 3))
        A *= 0.7 / np.abs(np.linalg.eigvals(A)).max()
        sys = make_subsystem(A, np.eye(3))
        Q2 = np.eye(3)
        S = solve_modified_are(sys, Q2, alpha=0.3, delta=0.0)
        assert np.allclose(S, linalg.stein_series(A, Q2), atol=1e-9)

    def test_reference_pair_satisfies_equation_at_delta_one(self, cfg_unstable):
        A, B = cfg_unstable.sys.A, cfg_unstable.sys.B
        Q2 = cfg_unstable.params.Q2
        S2 = UNST_S2_REFERENCE
        H = A.T @ S2 @ B @ np.linalg.inv(B.T @ S2 @ B) @ B.T @ S2 @ A
        lhs = A.T @ S2 @ A - S2 + Q2
        # least-squares fit of the discount the bundled pair satisfies
        implied = float(np.sum(lhs * H) / np.sum(H * H)) * (1.0 + UNST_ALPHA)
        assert implied == pytest.approx(1.0, abs=2e-3)
        resid = lhs - 1.0 / (1.0 + UNST_ALPHA) * H
        assert np.linalg.norm(resid) <= 5e-3

    def test_reference_reproduction_at_delta_one(self, cfg_unstable):
        c = cfg_unstable
        S2 = solve_modified_are(c.sys, c.params.Q2, UNST_ALPHA, 1.0)
        assert np.max(np.abs(S2 - UNST_S2_REFERENCE)) <= 5e-3

    def test_nominal_delta_diverges(self, cfg_unstable):
        c = cfg_unstable
        with pytest.raises(DivergedError):
            solve_modified_are(c.sys, c.params.Q2, UNST_ALPHA,
                               UNST_NOMINAL_DELTA)

    def test_monotone_bounded_iterates(self, cfg_unstable):
        c = cfg_unstable
        A, B, Q2 = c.sys.A, c.sys.B, np.asarray(c.params.Q2)
        S = Q2.copy()
        prev_norm = 0.0
        for _ in range(40):
            BS = B.T @ S
            Snew = A.T @ S @ A + Q2 - 1.0 / (1.0 + UNST_ALPHA) * (
                A.T @ S @ B @ np.linalg.solve(BS @ B, BS @ A))
            Snew = 0.5 * (Snew + Snew.T)
            assert np.linalg.eigvalsh(Snew - S).min() >= -1e-9
            assert np.linalg.norm(Snew) < 1e6
            S, prev_norm = Snew, np.linalg.norm(Snew)


class TestDesignUnstable:
    def test_example_design(self, cfg_unstable, design_unst):
        c = cfg_unstable
        assert verify_global_are(design_unst, c.sys, c.graph) <= 1e-7
        assert linalg.is_psd(design_unst.Qg)
        Mn = c.graph.num_agents * c.sys.n
        assert linalg.rank(design_unst.Qg) == Mn - c.sys.n

    def test_coupling_interval_nominal_delta(self, cfg_unstable):
        lo, hi = coupling_bounds(cfg_unstable.graph, UNST_NOMINAL_DELTA)
        assert lo == pytest.approx(0.0327, abs=1e-4)
        assert hi == pytest.approx(0.2, abs=1e-4)

    def test_infeasible_coupling(self, cfg_unstable):
        # on the five-cycle sigma_min/sigma_max ~ 0.382, so delta = 0.9
        # leaves no admissible coupling
        cycle = np.array([[0, 1, 0, 1, 0], [1, 0, 1, 0, 0], [0, 1, 0, 0, 1],
                          [1, 0, 0, 0, 1], [0, 0, 1, 1, 0]], dtype=float)
        g = build_graph(cycle)
        params = DesignParams(alpha=UNST_ALPHA, c=0.2, mu=0.5,
                              Q2=cfg_unstable.params.Q2, delta=0.9)
        with pytest.raises(InfeasibleCouplingError):
            design_unstable(cfg_unstable.sys, g, params)

    def test_random_unstable_design(self, rng):
        theta = 0.4
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        A = rot @ np.diag([1.2, 0.5]) @ rot.T
        sys = make_subsystem(A, np.eye(2))
        assert sys.classification == "unstable"
        g = build_graph(K3)
        alpha = 0.05
        delta = compute_delta_c(sys) + 0.05
        params = DesignParams(alpha=alpha, c=0.3, mu=1.0, Q2=np.eye(2),
                              delta=delta)
        d = design_unstable(sys, g, params)
        assert verify_global_are(d, sys, g) <= 1e-7

    def test_edgeless_graph_rejected(self, cfg_unstable):
        g = build_graph(np.zeros((2, 2)))
        params = DesignParams(alpha=UNST_ALPHA, c=0.2, mu=0.5,
                              Q2=cfg_unstable.params.Q2, delta=1.0)
        with pytest.raises(ConditionViolatedError) as exc:
            design_unstable(cfg_unstable.sys, g, params)
        assert exc.value.condition == 0  # spanning-tree assumption

    def test_wrong_class_rejected(self, cfg_semistable, cfg_unstable):
        with pytest.raises(ValueError):
            design_unstable(cfg_semistable.sys, cfg_semistable.graph,
                            cfg_semistable.params)
        with pytest.raises(NotSemistableError):
            design_semistable(cfg_unstable.sys, cfg_unstable.graph,
                              cfg_unstable.params)


class TestVerification:
    def test_perturbation_sensitivity(self, design_semi, cfg_semistable):
        d, c = design_semi, cfg_semistable
        base = verify_global_are(d, c.sys, c.graph)
        bumped = ProtocolDesign(**{**d.__dict__,
                                   "Sg": d.Sg * 1.01,
                                   "annihilates_consensus": d.annihilates_consensus})
        worse = verify_global_are(bumped, c.sys, c.graph)
        assert worse >= 10 * max(base, 1e-12)

    def test_zero_protocol_on_decoupled_system(self):
        sys = make_subsystem([[0.5]], [[1.0]])
        g = build_graph(np.zeros((2, 2)))
        zero = np.zeros((2, 2))
        d = ProtocolDesign(mode="semistable", K2=np.zeros((1, 1)),
                           S2=np.zeros((1, 1)), Q2=np.zeros((1, 1)),
                           R2=np.eye(1), H=np.zeros((1, 1)),
                           S1=zero, R1=np.eye(2), Qg=zero, Rg=np.eye(2),
                           Sg=zero, Kg=np.zeros((2, 2)), alpha=1.0, c=0.1,
                           mu=1.0, a=1.0, delta=None)
        assert verify_global_are(d, sys, g) == 0.0

    def test_document_round_trip(self, design_unst):
        doc = json.loads(json.dumps(design_unst.to_dict()))
        back = ProtocolDesign.from_dict(doc)
        for name in ("K2", "S2", "Qg", "Rg", "Sg", "Kg"):
            assert np.array_equal(getattr(back, name), getattr(design_unst, name))
        assert back.annihilates_consensus == design_unst.annihilates_consensus

    def test_malformed_document(self):
        with pytest.raises(MalformedDesignError):
            ProtocolDesign.from_dict({"mode": "semistable"})
        with pytest.raises(MalformedDesignError):
            ProtocolDesign.from_dict({"mode": "bogus"})


class TestConditionReport:
    def test_semistable_report_all_pass(self, cfg_semistable):
        c = cfg_semistable
        entries = check_conditions(c.sys, c.graph, c.params, "semistable",
                                   allow_boundary_c=True)
        assert all(e["passed"] for e in entries)

    def test_large_coupling_flagged(self, cfg_semistable):
        c = cfg_semistable
        params = DesignParams(alpha=10.0, c=10.0, mu=0.5, Q2=c.params.Q2,
                              a=c.params.a)
        entries = check_conditions(c.sys, c.graph, params, "semistable")
        failed = {e["condition"] for e in entries if not e["passed"]}
        # the oversized coupling breaks the bound itself and drags R1 with it
        assert 6 in failed and failed <= {4, 6}
