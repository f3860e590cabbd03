"""Command-line front end.

Subcommands: design, simulate, verify, example.  Exit codes: 0 success,
1 runtime failure, 2 design-condition violation, 3 infeasible RHC problem.
Set CONSENSUS_RHC_LOG=debug|info|warning for verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys as _sys
from pathlib import Path

from .config import ScenarioConfig, load_config
from .design import (ConditionViolatedError, check_conditions,
                     design_semistable, design_unstable)
from .errors import (ConsensusRhcError, InfeasibleCouplingError,
                     InfeasibleError, SchemaError)
from .rhc import compute_beta, make_controller
from .scenarios import SCENARIO_NAMES, get_scenario
from .sim import (SimConfig, lyapunov_certificate, run, summarize, write_csv,
                  write_jsonl)
from .verify import design_document, load_design_document, verify_design

log = logging.getLogger("consensus_rhc")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONDITION = 2
EXIT_INFEASIBLE = 3


def _setup_logging(verbosity: str | None):
    level = (verbosity or os.environ.get("CONSENSUS_RHC_LOG", "warning")).upper()
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(getattr(logging, level, logging.WARNING))


def _print_report(entries):
    for e in entries:
        mark = "pass" if e["passed"] else "FAIL"
        detail = f"  [{e['detail']}]" if e.get("detail") else ""
        print(f"  condition {e['condition']}: {mark}  {e['label']}{detail}")


def _build_design(cfg: ScenarioConfig, allow_boundary_c: bool,
                  override_conditions: bool):
    mode = "unstable" if cfg.sys.classification == "unstable" else "semistable"
    report = check_conditions(cfg.sys, cfg.graph, cfg.params, mode,
                              allow_boundary_c=allow_boundary_c)
    failed = [e for e in report if not e["passed"]]
    if failed and not override_conditions:
        return None, report, mode
    if failed:
        log.warning("building despite %d failed condition(s) (override)",
                    len(failed))
    builder = design_unstable if mode == "unstable" else design_semistable
    design = builder(cfg.sys, cfg.graph, cfg.params,
                     allow_boundary_c=allow_boundary_c,
                     override_conditions=override_conditions)
    return design, report, mode


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    allow_boundary = args.allow_boundary_c or cfg.allow_boundary_c
    try:
        design, report, mode = _build_design(cfg, allow_boundary,
                                             args.override_conditions)
    except (ConditionViolatedError, InfeasibleCouplingError) as exc:
        print(f"design rejected: {exc}")
        return EXIT_CONDITION
    print(f"design mode: {mode}")
    _print_report(report)
    if design is None:
        print("design rejected; rerun with --override-conditions to force")
        return EXIT_CONDITION
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    beta = compute_beta(design, (cfg.u_lo, cfg.u_hi))
    doc = design_document(design, cfg.sys, cfg.graph,
                          boxes=(cfg.u_lo, cfg.u_hi), beta=beta)
    doc["condition_report"] = report
    path = out_dir / "design.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    print(f"terminal radius beta = {beta:.6g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    design, sys_doc, g_doc, boxes, beta = load_design_document(args.design)
    ctrl = make_controller(design, sys_doc, g_doc, horizon=cfg.horizon,
                           boxes=(cfg.u_lo, cfg.u_hi), mode=cfg.mode,
                           beta=beta)
    result = run(SimConfig(steps=cfg.steps, X0=cfg.X0, controller=ctrl))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(result, out_dir / "trajectory.csv")
    write_jsonl(result, out_dir / "steps.jsonl")
    summary = summarize(result, tol=cfg.consensus_tol,
                        window=min(cfg.consensus_window, cfg.steps))
    summary["lyapunov_certificate"] = lyapunov_certificate(result, design)
    if result.candidate_feasible is not None:
        summary["shifted_candidates_feasible"] = bool(result.candidate_feasible.all())
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    print(json.dumps(summary, indent=1))
    print(f"wrote {out_dir / 'trajectory.csv'}")
    return EXIT_OK if result.feasible_all else EXIT_INFEASIBLE


def cmd_verify(args) -> int:
    design, sys_doc, g_doc, boxes, beta = load_design_document(args.design)
    report = verify_design(design, sys_doc, g_doc, boxes=boxes, beta=beta)
    print(json.dumps(report, indent=1, default=float))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "verification.json", "w") as fh:
            json.dump(report, fh, indent=1, default=float)
    return EXIT_OK if report["all_pass"] else EXIT_RUNTIME


def cmd_example(args) -> int:
    scenario = get_scenario(args.name)
    out_dir = Path(args.out_dir) / scenario.name
    out_dir.mkdir(parents=True, exist_ok=True)
    config_path = out_dir / "config.json"
    with open(config_path, "w") as fh:
        json.dump(scenario.config, fh, indent=1)
    print(f"scenario: {scenario.name}")
    for note in scenario.notes:
        print(f"  note: {note}")
    ns = argparse.Namespace(config=config_path, out_dir=out_dir,
                            allow_boundary_c=True, override_conditions=False)
    rc = cmd_design(ns)
    if rc != EXIT_OK:
        return rc
    ns = argparse.Namespace(config=config_path, design=out_dir / "design.json",
                            out_dir=out_dir)
    rc = cmd_simulate(ns)
    if rc != EXIT_OK:
        return rc
    ns = argparse.Namespace(design=out_dir / "design.json", out_dir=out_dir)
    return cmd_verify(ns)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="consensus-rhc",
        description="Inverse-optimal consensus protocol design and "
                    "receding-horizon consensus simulation")
    ap.add_argument("--log", default=None, help="log level (overrides "
                    "CONSENSUS_RHC_LOG)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="synthesize a protocol from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--allow-boundary-c", action="store_true",
                   help="accept c exactly on 1/sigma_max(L)")
    p.add_argument("--override-conditions", action="store_true",
                   help="build even if numbered conditions fail (reported)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="closed-loop run from a design")
    p.add_argument("--config", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="re-check a design document")
    p.add_argument("--design", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example", help="run a built-in scenario end to end")
    p.add_argument("name", choices=SCENARIO_NAMES)
    p.add_argument("--out-dir", default="consensus-rhc-out")
    p.set_defaults(func=cmd_example)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_RUNTIME
    except (ConditionViolatedError, InfeasibleCouplingError) as exc:
        print(f"design rejected: {exc}", file=_sys.stderr)
        return EXIT_CONDITION
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=_sys.stderr)
        return EXIT_INFEASIBLE
    except ConsensusRhcError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
