import numpy as np
import pytest

from consensus_rhc import qcqp
from consensus_rhc.design import ProtocolDesign, make_subsystem
from consensus_rhc.errors import DimensionError, InfeasibleError
from consensus_rhc.graphs import build_graph
from consensus_rhc.qcqp import CondensedProblem, condense, phase1, solve
from oracles import grid_min_2d, projected_newton_box, rollout_cost

HUGE = 1e8


def box_problem(H, f, lo, hi):
    return CondensedProblem(Hc=H, fc=f, c0=0.0, box_lo=lo, box_hi=hi)


def dummy_single_agent_design():
    """Scalar one-agent design carrier for the condensation tests."""
    one = np.ones((1, 1))
    return ProtocolDesign(mode="semistable", K2=-0.5 * one, S2=one, Q2=one,
                          R2=one, H=one, S1=one, R1=one, Qg=one, Rg=one,
                          Sg=one, Kg=-0.5 * one, alpha=1.0, c=1.0, mu=1.0,
                          a=1.0, delta=None)


class TestCondense:
    def test_scalar_single_step(self, backends):
        sys = make_subsystem([[1.0]], [[1.0]])
        g = build_graph([[0.0]])
        d = dummy_single_agent_design()
        p = condense(sys, g, d, [1.0], 1, ([-HUGE], [HUGE]), (d.Sg, 1e6))
        # J(u) = x0^2 + u^2 + (x0 + u)^2 -> Hc = 4, fc = 2, c0 = 2
        assert np.allclose(p.Hc, [[4.0]])
        assert np.allclose(p.fc, [2.0])
        assert p.c0 == pytest.approx(2.0)
        for backend in backends:
            rep = solve(p, backend_name=backend)
            assert rep.z[0] == pytest.approx(-0.5, abs=1e-8)
            assert rep.objective == pytest.approx(1.5, abs=1e-8)

    def test_objective_matches_rollout(self, cfg_unstable, design_unst, rng):
        """Primary correctness anchor: the condensed quadratic evaluates to
        the simulated cost for arbitrary inputs."""
        c, d = cfg_unstable, design_unst
        N = 5
        M = c.graph.num_agents
        Ag = np.kron(np.eye(M), c.sys.A)
        Bg = np.kron(np.eye(M), c.sys.B)
        x0 = rng.uniform(-1, 1, M * c.sys.n)
        p = condense(c.sys, c.graph, d, x0, N, (c.u_lo, c.u_hi), (d.Sg, 3.0))
        for _ in range(20):
            z = rng.uniform(-1, 1, p.dim)
            J_sim = rollout_cost(Ag, Bg, d.Qg, d.Rg, d.Sg, x0, z, N)
            J_quad = p.objective(z)
            assert abs(J_quad - J_sim) <= 1e-10 * (1 + abs(J_sim))

    def test_consensus_state_gives_zero_cost(self, cfg_unstable, design_unst,
                                             backends, rng):
        c, d = cfg_unstable, design_unst
        v = rng.uniform(-1, 1, c.sys.n)
        x0 = np.tile(v, c.graph.num_agents)
        p = condense(c.sys, c.graph, d, x0, 4, (c.u_lo, c.u_hi), (d.Sg, 3.0))
        assert np.abs(p.fc).max() == 0.0
        for backend in backends:
            rep = solve(p, backend_name=backend)
            assert np.abs(rep.z).max() <= 1e-9
            assert rep.objective == pytest.approx(0.0, abs=1e-12)

    def test_dimension_errors(self, cfg_unstable, design_unst):
        c, d = cfg_unstable, design_unst
        with pytest.raises(DimensionError):
            condense(c.sys, c.graph, d, np.zeros(7), 4, (c.u_lo, c.u_hi),
                     (d.Sg, 3.0))
        with pytest.raises(DimensionError):
            condense(c.sys, c.graph, d, np.zeros(15), 0, (c.u_lo, c.u_hi),
                     (d.Sg, 3.0))


class TestSolveUnconstrained:
    def test_matches_closed_form(self, backends, rng):
        for trial in range(50):
            dim = int(rng.integers(2, 9))
            root = rng.standard_normal((dim, dim))
            H = root @ root.T + 0.5 * np.eye(dim)
            f = rng.standard_normal(dim)
            p = box_problem(H, f, -HUGE * np.ones(dim), HUGE * np.ones(dim))
            z_star = -np.linalg.solve(H, f)
            rep = solve(p, backend_name=backends[trial % len(backends)])
            assert np.abs(rep.z - z_star).max() <= 1e-7 * (1 + np.abs(z_star).max())

    def test_one_dimensional_clipping(self, backends):
        # minimize (z - 2)^2 over [-1, 1]
        p = box_problem(np.array([[2.0]]), np.array([-4.0]),
                        np.array([-1.0]), np.array([1.0]))
        for backend in backends:
            rep = solve(p, backend_name=backend)
            assert rep.z[0] == pytest.approx(1.0, abs=1e-8)


class TestSolveBoxOnly:
    def test_matches_projected_newton(self, backends, rng):
        for trial in range(20):
            dim = int(rng.integers(3, 11))
            root = rng.standard_normal((dim, dim))
            H = root @ root.T + 1.0 * np.eye(dim)
            f = 3.0 * rng.standard_normal(dim)
            lo = -rng.uniform(0.1, 1.0, dim)
            hi = rng.uniform(0.1, 1.0, dim)
            p = box_problem(H, f, lo, hi)
            z_ref = projected_newton_box(H, f, lo, hi)
            rep = solve(p, backend_name=backends[trial % len(backends)])
            assert np.abs(rep.z - z_ref).max() <= 1e-6


class TestSolveWithBall:
    def test_small_instance_matches_grid(self, backends):
        # six unknowns, four pinned by near-degenerate boxes, so the active
        # search space is the first two coordinates
        rng = np.random.default_rng(5)
        root = rng.standard_normal((6, 6))
        H = root @ root.T + np.eye(6)
        f = rng.standard_normal(6)
        lo = np.concatenate([[-1.0, -1.0], -1e-9 * np.ones(4)])
        hi = np.concatenate([[1.0, 1.0], 1e-9 * np.ones(4)])
        G = np.eye(6)
        h = np.zeros(6)
        Sq = np.diag([1.0, 1.0, 0, 0, 0, 0])
        beta = 0.6  # tight: the ball binds inside the box
        p = CondensedProblem(Hc=H, fc=f, c0=0.0, box_lo=lo, box_hi=hi,
                             G=G, h=h, Sq=Sq, beta=beta)

        def obj(pts):
            z = np.zeros((pts.shape[0], 6))
            z[:, :2] = pts
            return 0.5 * np.einsum("ij,jk,ik->i", z, H, z) + z @ f

        def feas(pts):
            return (pts ** 2).sum(axis=1) <= beta ** 2

        J_grid, _ = grid_min_2d(obj, feas, [-1, -1], [1, 1], resolution=1e-2)
        for backend in backends:
            rep = solve(p, backend_name=backend)
            assert rep.objective <= J_grid + 1e-9
            assert rep.objective >= J_grid - 1e-3 * (1 + abs(J_grid))

    def test_kkt_certificate(self, cfg_unstable, design_unst, backends, rng):
        c, d = cfg_unstable, design_unst
        x0 = rng.uniform(-1, 1, 15) * 1.5
        p = condense(c.sys, c.graph, d, x0, 6, (c.u_lo, c.u_hi), (d.Sg, 3.32))
        for backend in backends:
            rep = solve(p, backend_name=backend)
            assert rep.status == "optimal"
            assert rep.kkt_residual <= 1e-6
            for mu in rep.multipliers.values():
                assert np.all(np.asarray(mu) >= -1e-9)
            assert p.box_violation(rep.z) <= 1e-9
            assert p.quad_violation(rep.z) <= 1e-9


class TestPhase1:
    def test_midpoint_short_circuit(self):
        p = CondensedProblem(Hc=np.eye(2), fc=np.zeros(2), c0=0.0,
                             box_lo=-np.ones(2), box_hi=np.ones(2),
                             G=np.eye(2), h=np.zeros(2), Sq=np.eye(2),
                             beta=1.0)
        assert np.array_equal(phase1(p), np.zeros(2))

    def test_disjoint_box_and_ball(self):
        p = CondensedProblem(Hc=np.eye(2), fc=np.zeros(2), c0=0.0,
                             box_lo=np.array([1.0, 1.0]),
                             box_hi=np.array([2.0, 2.0]),
                             G=np.eye(2), h=np.zeros(2), Sq=np.eye(2),
                             beta=0.5)
        with pytest.raises(InfeasibleError):
            phase1(p)

    def test_shrunk_terminal_set_infeasible(self, cfg_unstable, design_unst,
                                            rng):
        c, d = cfg_unstable, design_unst
        x0 = rng.uniform(-1, 1, 15)
        base = condense(c.sys, c.graph, d, x0, 3, (c.u_lo, c.u_hi), (d.Sg, 3.3))
        assert phase1(base) is not None
        beta = 3.3
        tight = None
        for _ in range(40):
            beta *= 0.5
            tight = condense(c.sys, c.graph, d, x0, 3, (c.u_lo, c.u_hi),
                             (d.Sg, beta))
            try:
                phase1(tight)
            except InfeasibleError:
                break
        else:
            pytest.fail("shrinking the terminal set never became infeasible")
        with pytest.raises(InfeasibleError):
            solve(tight)


class TestSolverProperties:
    def test_central_path_objective_monotone(self, cfg_unstable, design_unst,
                                             rng):
        # tightening the gap tolerance extends the same deterministic path,
        # so the returned objective must be non-increasing in the tolerance
        c, d = cfg_unstable, design_unst
        x0 = rng.uniform(-1, 1, 15) * 1.2
        p = condense(c.sys, c.graph, d, x0, 5, (c.u_lo, c.u_hi), (d.Sg, 3.32))
        objs = [solve(p, gap_tol=gap).objective
                for gap in (1e-1, 1e-3, 1e-5, 1e-7, 1e-9)]
        diffs = np.diff(objs)
        assert np.all(diffs <= 1e-10 * (1 + np.abs(objs[0])))

    def test_deterministic_bitwise(self, cfg_unstable, design_unst, backends,
                                   rng):
        c, d = cfg_unstable, design_unst
        x0 = rng.uniform(-1, 1, 15)
        p = condense(c.sys, c.graph, d, x0, 5, (c.u_lo, c.u_hi), (d.Sg, 3.32))
        for backend in backends:
            r1 = solve(p, backend_name=backend)
            r2 = solve(p, backend_name=backend)
            assert np.array_equal(r1.z, r2.z)
            assert r1.objective == r2.objective
            assert r1.iterations == r2.iterations

    def test_backends_agree(self, cfg_unstable, design_unst, backends, rng):
        if len(backends) < 2:
            pytest.skip("only one backend available")
        c, d = cfg_unstable, design_unst
        x0 = rng.uniform(-1, 1, 15) * 1.4
        p = condense(c.sys, c.graph, d, x0, 6, (c.u_lo, c.u_hi), (d.Sg, 3.32))
        reps = [solve(p, backend_name=b) for b in backends]
        for rep in reps[1:]:
            assert abs(rep.objective - reps[0].objective) \
                <= 1e-8 * (1 + abs(reps[0].objective))
            assert np.abs(rep.z - reps[0].z).max() <= 1e-6


class TestProblemValidation:
    def test_box_ordering_enforced(self):
        with pytest.raises(DimensionError):
            box_problem(np.eye(2), np.zeros(2), np.ones(2), -np.ones(2))

    def test_indefinite_hessian_rejected(self):
        with pytest.raises(DimensionError):
            box_problem(np.diag([1.0, -1.0]), np.zeros(2),
                        -np.ones(2), np.ones(2))
