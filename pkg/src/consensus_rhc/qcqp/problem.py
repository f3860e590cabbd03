"""Condensed problem container and solve report.

A condensed problem is  min 1/2 z'Hc z + fc'z + c0  subject to the box
box_lo <= z <= box_hi and, optionally, one convex quadratic ball
||G z + h||_Sq <= beta.  The objective convention is chosen so that the
value of ``objective`` equals the physical receding-horizon cost of the
trajectory generated by z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .. import linalg
from ..errors import DimensionError


@dataclass(frozen=True)
class CondensedProblem:
    Hc: np.ndarray
    fc: np.ndarray
    c0: float
    box_lo: np.ndarray
    box_hi: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    Sq: np.ndarray | None = None
    beta: float | None = None

    def __post_init__(self):
        d = self.fc.shape[0]
        if self.Hc.shape != (d, d):
            raise DimensionError(f"Hc {self.Hc.shape} does not match fc ({d},)")
        if self.box_lo.shape != (d,) or self.box_hi.shape != (d,):
            raise DimensionError("box bounds must match the decision dimension")
        if not np.all(self.box_lo < self.box_hi):
            raise DimensionError("need box_lo < box_hi componentwise")
        w = np.linalg.eigvalsh(linalg.symmetrize(self.Hc))
        if w.min() < -1e-9 * max(1.0, w.max()):
            raise DimensionError(f"Hc must be PSD (min eigenvalue {w.min():.3g})")
        if self.has_quad:
            if self.G.shape[1] != d or self.h.shape[0] != self.G.shape[0]:
                raise DimensionError("quadratic map G/h dimensions inconsistent")
            if self.Sq.shape != (self.G.shape[0],) * 2:
                raise DimensionError("Sq must be square matching G rows")
            if not linalg.is_psd(self.Sq):
                raise DimensionError("Sq must be PSD")
            if not self.beta > 0:
                raise DimensionError("beta must be positive")

    @property
    def dim(self) -> int:
        return self.fc.shape[0]

    @property
    def has_quad(self) -> bool:
        return self.G is not None

    # quadratic constraint in expanded form  q(z) = z'A2 z + 2 b2'z + c2
    @cached_property
    def _quad_coeffs(self):
        GS = self.G.T @ self.Sq
        return linalg.symmetrize(GS @ self.G), GS @ self.h, float(self.h @ self.Sq @ self.h)

    def quad_value(self, z) -> float:
        if not self.has_quad:
            return 0.0
        A2, b2, c2 = self._quad_coeffs
        return float(z @ A2 @ z + 2.0 * b2 @ z + c2)

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.Hc @ z + self.fc @ z + self.c0)

    def box_violation(self, z) -> float:
        return float(max(np.max(self.box_lo - z, initial=0.0),
                         np.max(z - self.box_hi, initial=0.0)))

    def quad_violation(self, z) -> float:
        if not self.has_quad:
            return 0.0
        return max(0.0, self.quad_value(z) - self.beta ** 2)


@dataclass(frozen=True)
class SolveReport:
    z: np.ndarray
    objective: float
    iterations: int
    status: str  # "optimal" | "max_iter"
    kkt_residual: float
    multipliers: dict = field(default_factory=dict, repr=False)
