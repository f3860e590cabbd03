"""Compare the compiled and pure-Python barrier kernels on realistic steps.

Builds the condensed problems the two bundled scenarios actually solve at
every receding-horizon step (decision dimensions 90 and 45) plus a crop of
synthetic box-QP sizes, and times both backends on identical inputs.

Run:  python benchmarks/bench_solver.py [--repeat 20]
"""
import argparse
import time

import numpy as np

from consensus_rhc import qcqp
from consensus_rhc.design import design_semistable, design_unstable
from consensus_rhc.qcqp import CondensedProblem, condense, solve
from consensus_rhc.scenarios import get_scenario


def scenario_problem(name):
    sc = get_scenario(name)
    cfg = sc.parsed()
    builder = design_unstable if name == "unstable" else design_semistable
    design = builder(cfg.sys, cfg.graph, cfg.params, allow_boundary_c=True)
    from consensus_rhc.rhc import compute_beta
    beta = compute_beta(design, (cfg.u_lo, cfg.u_hi))
    return condense(cfg.sys, cfg.graph, design, cfg.X0, cfg.horizon,
                    (cfg.u_lo, cfg.u_hi), (design.Sg, beta))


def synthetic_box_qp(dim, seed):
    rng = np.random.default_rng(seed)
    root = rng.standard_normal((dim, dim))
    H = root @ root.T + np.eye(dim)
    f = 3.0 * rng.standard_normal(dim)
    return CondensedProblem(Hc=H, fc=f, c0=0.0,
                            box_lo=-np.ones(dim), box_hi=np.ones(dim))


def time_solve(problem, backend, repeat):
    solve(problem, backend_name=backend)  # warm up / JIT import costs
    t0 = time.perf_counter()
    for _ in range(repeat):
        rep = solve(problem, backend_name=backend)
    elapsed = (time.perf_counter() - t0) / repeat
    return elapsed, rep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = qcqp.available_backends()
    print(f"available backends: {', '.join(backends)}")
    cases = [("rhc step semistable (dim 90)", scenario_problem("semistable")),
             ("rhc step unstable  (dim 45)", scenario_problem("unstable")),
             ("box qp dim 30", synthetic_box_qp(30, 1)),
             ("box qp dim 120", synthetic_box_qp(120, 2))]
    header = f"{'case':32s}" + "".join(f"{b:>14s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name, problem in cases:
        times = {}
        objs = {}
        for b in backends:
            times[b], rep = time_solve(problem, b, args.repeat)
            objs[b] = rep.objective
        row = f"{name:32s}" + "".join(f"{times[b] * 1e3:12.2f}ms" for b in backends)
        if len(backends) == 2:
            tc = times.get("compiled")
            tp = times.get("python")
            if tc and tp:
                row += f"{tp / tc:9.1f}x"
        print(row)
        vals = list(objs.values())
        spread = max(vals) - min(vals)
        assert spread <= 1e-8 * (1 + abs(vals[0])), \
            f"backends disagree on {name}: {objs}"
    print("objective agreement across backends verified")


if __name__ == "__main__":
    main()
