"""Condensed QCQP solver: quadratic cost, input box, one terminal ball."""
from .backend import BACKEND_NAME, available_backends, default_backend, kernel
from .condense import condense, prediction_matrices, stack_boxes
from .phase1 import phase1
from .problem import CondensedProblem, SolveReport
from .solve import solve

__all__ = [
    "BACKEND_NAME", "CondensedProblem", "SolveReport", "available_backends",
    "condense", "default_backend", "kernel", "phase1", "prediction_matrices",
    "solve", "stack_boxes",
]
