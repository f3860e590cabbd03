"""Communication graph model: Laplacian, spectrum, structural predicates.

Only unit edge weights are supported; weighted adjacency matrices are
rejected rather than silently accepted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionError, NonBinaryWeightError, SelfLoopError

ZERO_CLUSTER_TOL = 1e-7


@dataclass(frozen=True)
class GraphModel:
    adjacency: np.ndarray
    laplacian: np.ndarray
    degrees: np.ndarray

    @property
    def num_agents(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class LaplacianSpectrum:
    eigenvalues: np.ndarray
    sigma_min_nonzero: float
    sigma_max: float
    has_spanning_tree: bool
    is_symmetric: bool
    zero_multiplicity: int


def build_graph(adjacency) -> GraphModel:
    """Validate a 0/1 adjacency matrix and derive degrees and Laplacian.

    Entry (i, j) = 1 means agent i receives information from agent j.
    """
    a = linalg.as_square(adjacency, "adjacency")
    if np.any(np.diag(a) != 0):
        raise SelfLoopError("adjacency diagonal must be zero (no self loops)")
    if not np.all((a == 0) | (a == 1)):
        raise NonBinaryWeightError("adjacency entries must be 0 or 1")
    degrees = a.sum(axis=1)
    laplacian = np.diag(degrees) - a
    return GraphModel(adjacency=a, laplacian=laplacian, degrees=degrees)


def analyze_spectrum(g: GraphModel) -> LaplacianSpectrum:
    """Laplacian spectrum plus the quantities the design conditions need.

    sigma_max is the Laplacian spectral radius, sigma_min the smallest
    nonzero eigenvalue modulus; a simple zero eigenvalue is equivalent to
    the graph containing a spanning tree.
    """
    summary = linalg.eig(g.laplacian)
    vals = summary.eigenvalues
    mods = np.abs(vals)
    zero_mult = int(np.sum(mods <= ZERO_CLUSTER_TOL))
    nonzero = mods[mods > ZERO_CLUSTER_TOL]
    sigma_max = float(mods.max()) if mods.size else 0.0
    sigma_min = float(nonzero.min()) if nonzero.size else 0.0
    return LaplacianSpectrum(
        eigenvalues=vals,
        sigma_min_nonzero=sigma_min,
        sigma_max=sigma_max,
        has_spanning_tree=zero_mult == 1,
        is_symmetric=linalg.is_symmetric(g.laplacian),
        zero_multiplicity=zero_mult,
    )


def check_wl_symmetrizable(g: GraphModel, w) -> bool:
    """True when W @ L is symmetric (W symmetric, same size as L).

    Symmetry of W @ L together with symmetry of W forces W @ L^2 symmetric
    as well; that implication is asserted rather than re-checked by the
    caller.
    """
    w = linalg.as_square(w, "W")
    lap = g.laplacian
    if w.shape != lap.shape:
        raise DimensionError(f"W {w.shape} does not match Laplacian {lap.shape}")
    if not linalg.is_symmetric(w):
        raise DimensionError("W must be symmetric")
    wl = w @ lap
    ok = linalg.is_symmetric(wl)
    if ok:
        wl2 = w @ lap @ lap
        assert linalg.is_symmetric(wl2), "W L symmetric but W L^2 is not"
    return ok


def coupling_bounds(g: GraphModel, delta: float | None = None) -> tuple[float, float]:
    """Admissible coupling interval [delta/sigma_min, 1/sigma_max].

    With ``delta`` omitted the lower end is 0 (the semistable case).
    """
    spec = analyze_spectrum(g)
    if spec.sigma_max <= 0.0:
        raise DimensionError("graph has no edges; coupling bound undefined")
    lo = 0.0 if delta is None else float(delta) / spec.sigma_min_nonzero
    hi = 1.0 / spec.sigma_max
    return lo, hi
