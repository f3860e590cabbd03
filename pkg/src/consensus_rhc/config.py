"""Scenario configuration: JSON schema, validation, object construction.

Validation errors carry a JSON-pointer path to the offending element so a
bad config can be fixed without reading source code.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .design import DesignParams, SubsystemModel, make_subsystem
from .errors import ConsensusRhcError, SchemaError
from .graphs import GraphModel, build_graph


@dataclass
class ScenarioConfig:
    sys: SubsystemModel
    graph: GraphModel
    params: DesignParams
    u_lo: np.ndarray  # (M, m)
    u_hi: np.ndarray
    horizon: int
    mode: str
    steps: int
    X0: np.ndarray
    allow_boundary_c: bool = False
    solver: dict = field(default_factory=dict)
    consensus_tol: float = 1e-3
    consensus_window: int = 20


def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise SchemaError(path or "/", "expected an object")
    if key not in obj:
        raise SchemaError(f"{path}/{key}", "missing required field")
    return obj[key]


def _matrix(value, path: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, f"not a numeric matrix: {exc}") from exc
    if arr.ndim != 2:
        raise SchemaError(path, f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise SchemaError(path, "matrix has non-finite entries")
    if rows is not None and arr.shape[0] != rows:
        raise SchemaError(path, f"expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise SchemaError(path, f"expected {cols} columns, got {arr.shape[1]}")
    return arr


def _vector(value, path: str, length: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, f"not a numeric vector: {exc}") from exc
    if arr.ndim != 1:
        raise SchemaError(path, f"expected a 1-D vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise SchemaError(path, "vector has non-finite entries")
    if length is not None and arr.shape[0] != length:
        raise SchemaError(path, f"expected length {length}, got {arr.shape[0]}")
    return arr


def _number(value, path: str, positive: bool = False):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(path, "expected a number")
    if positive and value <= 0:
        raise SchemaError(path, "must be positive")
    return float(value)


def _int(value, path: str, minimum: int = 1):
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(path, "expected an integer")
    if value < minimum:
        raise SchemaError(path, f"must be >= {minimum}")
    return value


def parse_config(doc: dict) -> ScenarioConfig:
    """Validate a configuration document and build the typed objects."""
    if not isinstance(doc, dict):
        raise SchemaError("/", "top-level document must be an object")
    system = _require(doc, "system", "")
    A = _matrix(_require(system, "A", "/system"), "/system/A")
    if A.shape[0] != A.shape[1]:
        raise SchemaError("/system/A", "A must be square")
    n = A.shape[0]
    B = _matrix(_require(system, "B", "/system"), "/system/B", rows=n)
    m = B.shape[1]

    graph = _require(doc, "graph", "")
    adjacency = _matrix(_require(graph, "adjacency", "/graph"), "/graph/adjacency")
    if adjacency.shape[0] != adjacency.shape[1]:
        raise SchemaError("/graph/adjacency", "adjacency must be square")
    M = adjacency.shape[0]

    params = _require(doc, "params", "")
    alpha = _number(_require(params, "alpha", "/params"), "/params/alpha", positive=True)
    c = _number(_require(params, "c", "/params"), "/params/c", positive=True)
    mu = _number(_require(params, "mu", "/params"), "/params/mu", positive=True)
    Q2 = _matrix(_require(params, "Q2", "/params"), "/params/Q2", rows=n, cols=n)
    a = _number(params.get("a", 1.0), "/params/a", positive=True)
    delta = None
    if params.get("delta") is not None:
        delta = _number(params["delta"], "/params/delta")
        if not 0.0 < delta <= 1.0:
            raise SchemaError("/params/delta", "must lie in (0, 1]")
    W = None
    if params.get("W") is not None:
        W = _matrix(params["W"], "/params/W", rows=M, cols=M)

    constraints = _require(doc, "constraints", "")
    u_lo = np.asarray(_require(constraints, "u_lo", "/constraints"), dtype=float)
    u_hi = np.asarray(_require(constraints, "u_hi", "/constraints"), dtype=float)
    for name, arr in (("u_lo", u_lo), ("u_hi", u_hi)):
        if arr.ndim == 1:
            if arr.shape[0] != m:
                raise SchemaError(f"/constraints/{name}", f"expected length {m}")
        elif arr.shape != (M, m):
            raise SchemaError(f"/constraints/{name}", f"expected shape ({M}, {m})")
        if not np.isfinite(arr).all():
            raise SchemaError(f"/constraints/{name}", "non-finite entries")
    if u_lo.ndim == 1:
        u_lo = np.tile(u_lo, (M, 1))
        u_hi = np.tile(u_hi, (M, 1))
    if np.any(u_lo >= 0) or np.any(u_hi <= 0):
        raise SchemaError("/constraints", "input boxes must contain 0 strictly")

    rhc = _require(doc, "rhc", "")
    horizon = _int(_require(rhc, "horizon", "/rhc"), "/rhc/horizon")
    steps = _int(_require(rhc, "steps", "/rhc"), "/rhc/steps")
    mode = rhc.get("mode", "centralized")
    if mode not in ("centralized", "distributed"):
        raise SchemaError("/rhc/mode", "must be 'centralized' or 'distributed'")
    X0 = _vector(_require(rhc, "X0", "/rhc"), "/rhc/X0", length=M * n)

    overrides = doc.get("overrides", {})
    if not isinstance(overrides, dict):
        raise SchemaError("/overrides", "expected an object")
    allow_boundary = bool(overrides.get("allow_boundary_c", False))

    solver = doc.get("solver", {})
    if not isinstance(solver, dict):
        raise SchemaError("/solver", "expected an object")
    consensus_tol = _number(solver.get("consensus_tol", 1e-3),
                            "/solver/consensus_tol", positive=True)
    consensus_window = _int(solver.get("consensus_window", 20),
                            "/solver/consensus_window")

    try:
        sys = make_subsystem(A, B)
        g = build_graph(adjacency)
    except ConsensusRhcError as exc:
        raise SchemaError("/system" if "adjacency" not in str(exc) else "/graph",
                          str(exc)) from exc
    except ValueError as exc:
        raise SchemaError("/system/A", str(exc)) from exc
    p = DesignParams(alpha=alpha, c=c, mu=mu, Q2=Q2, a=a, delta=delta, W=W)
    return ScenarioConfig(sys=sys, graph=g, params=p, u_lo=u_lo, u_hi=u_hi,
                          horizon=horizon, mode=mode, steps=steps, X0=X0,
                          allow_boundary_c=allow_boundary, solver=solver,
                          consensus_tol=consensus_tol,
                          consensus_window=consensus_window)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("/", f"invalid JSON: {exc}") from exc
    return parse_config(doc)
