"""Dense real-matrix kernels used by every other module.

Eigendecomposition with a semistability verdict, group inverse, Kronecker
products, the infinite quadratic-form series solved by Smith doubling, and
a pseudoinverse.  Everything operates on plain float64 ndarrays; matrices
are validated, never wrapped.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionError, DivergedError, IndexTooHighError,
                     NonSquareError, SingularCoreError)

TOL_EIG = 1e-10
CLUSTER_TOL = 1e-7


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_square(m, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise NonSquareError(f"{name} must be square, got shape {a.shape}")
    return a


def frob_close(x, y, atol: float = 1e-10, rtol: float = 1e-8) -> bool:
    """Frobenius-norm comparison with mixed absolute/relative tolerance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.linalg.norm(x - y) <= atol + rtol * max(np.linalg.norm(x), np.linalg.norm(y))


def is_symmetric(m, rtol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=float)
    return np.linalg.norm(m - m.T) <= rtol * (1.0 + np.linalg.norm(m))


def symmetrize(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SpectralSummary:
    """Eigenvalues of a square matrix plus the semistability verdict.

    ``is_semistable`` is true when the spectral radius is at most 1 (within
    ``TOL_EIG``) and any eigenvalue sitting at 1 is simple, where simplicity
    is judged by clustering eigenvalues within ``CLUSTER_TOL``.
    """

    eigenvalues: np.ndarray
    spectral_radius: float
    is_semistable: bool
    unstable_eigenvalues: np.ndarray = field(default_factory=lambda: np.empty(0, complex))


def eig(m) -> SpectralSummary:
    """Eigenvalues of a square matrix with stability classification.

    Symmetric inputs are routed to the symmetric solver; the general path
    uses the standard Hessenberg + shifted-QR LAPACK driver.  Eigenvalues
    are returned sorted by (real, imag) so repeated calls are deterministic.
    """
    m = as_square(m)
    if is_symmetric(m, rtol=1e-12):
        vals = np.linalg.eigvalsh(symmetrize(m)).astype(complex)
    else:
        try:
            vals = np.linalg.eigvals(m)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK cap
            from .errors import ConvergenceError
            raise ConvergenceError(str(exc)) from exc
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    radius = float(np.max(np.abs(vals))) if vals.size else 0.0
    unstable = vals[np.abs(vals) > 1.0 + TOL_EIG]
    at_one = np.abs(vals - 1.0) <= TOL_EIG
    if at_one.any():
        # multiplicity of the eigenvalue 1 judged within the cluster tolerance
        cluster = np.abs(vals - 1.0) <= CLUSTER_TOL
        one_simple = int(cluster.sum()) == 1
    else:
        one_simple = True
    semistable = radius <= 1.0 + TOL_EIG and one_simple
    return SpectralSummary(eigenvalues=vals, spectral_radius=radius,
                           is_semistable=bool(semistable),
                           unstable_eigenvalues=unstable)


def rank(m, cutoff_rel: float = 1e-9) -> int:
    """Numerical rank with singular values below cutoff_rel * sigma_max dropped."""
    m = as_matrix(m)
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > cutoff_rel * sv[0]))


def group_inverse(m) -> np.ndarray:
    """Group inverse of a square matrix with index at most 1.

    Uses the full-rank factorization m = F @ G (F full column rank, G full
    row rank, both from the SVD) and returns F @ (G @ F)^-2 @ G.  Requires
    rank(m) == rank(m @ m); the zero matrix maps to itself.
    """
    m = as_square(m)
    n = m.shape[0]
    r = rank(m)
    if r != rank(m @ m):
        raise IndexTooHighError(
            f"rank(m)={r} != rank(m^2)={rank(m @ m)}; group inverse undefined")
    if r == 0:
        return np.zeros_like(m)
    u, sv, vt = np.linalg.svd(m)
    f = u[:, :r] * sv[:r]
    g = vt[:r, :]
    gf = g @ f
    sv_core = np.linalg.svd(gf, compute_uv=False)
    if sv_core[-1] <= 1e-12 * sv_core[0]:
        raise SingularCoreError("core factor G @ F is numerically singular")
    x = f @ np.linalg.solve(gf @ gf, g)
    # defining identities, each to Frobenius residual <= 1e-9 * (1 + ||m||)
    tol = 1e-9 * (1.0 + np.linalg.norm(m))
    if (np.linalg.norm(m @ x @ m - m) > tol
            or np.linalg.norm(x @ m @ x - x) > tol * max(1.0, np.linalg.norm(x))
            or np.linalg.norm(m @ x - x @ m) > tol):
        raise SingularCoreError("group-inverse identities not met at the "
                                "requested accuracy")
    return x


def kron(a, b) -> np.ndarray:
    """Kronecker product: block (i, j) equals a[i, j] * b."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def stein_series(a, q, inc_tol: float = 1e-13, max_doublings: int = 60) -> np.ndarray:
    """Sum of (a^k)^T q a^k over k >= 0, by Smith doubling.

    Starts from sigma = q, p = a and repeats sigma += p^T sigma p, p = p^2
    until the increment's Frobenius norm drops below ``inc_tol``.  Converges
    whenever the accumulated quadratic form annihilates every eigendirection
    of ``a`` with modulus >= 1.
    """
    a = as_square(a, "a")
    q = as_square(q, "q")
    if a.shape != q.shape:
        raise DimensionError(f"a {a.shape} and q {q.shape} must match")
    sigma = symmetrize(q)
    p = a.copy()
    prev_inc = np.inf
    grew = 0
    for _ in range(max_doublings):
        inc = p.T @ sigma @ p
        inc_norm = float(np.linalg.norm(inc))
        if not np.isfinite(inc_norm) or np.linalg.norm(sigma) > 1e14:
            raise DivergedError("series terms blew up; the quadratic form "
                                "does not kill the non-contracting modes")
        sigma = symmetrize(sigma + inc)
        if inc_norm < inc_tol:
            resid = np.linalg.norm(a.T @ sigma @ a - sigma + q)
            if resid > 1e-8 * (1.0 + np.linalg.norm(sigma)):
                raise DivergedError(f"series converged but the fixed-point "
                                    f"residual {resid:.3g} is too large")
            return sigma
        grew = grew + 1 if inc_norm > prev_inc else 0
        if grew >= 8:
            raise DivergedError("series increments are growing")
        prev_inc = inc_norm
        p = p @ p
    raise DivergedError(f"no convergence within {max_doublings} doublings")


def pinv(m, rcond: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudoinverse.

    Symmetric inputs go through the symmetric eigendecomposition with
    eigenvalues below rcond * max|eig| truncated; everything else falls back
    to the SVD route.
    """
    m = as_matrix(m)
    if m.shape[0] == m.shape[1] and is_symmetric(m):
        w, v = np.linalg.eigh(symmetrize(m))
        big = np.abs(w) > rcond * max(np.abs(w).max(), np.finfo(float).tiny)
        inv = np.zeros_like(w)
        inv[big] = 1.0 / w[big]
        return (v * inv) @ v.T
    return np.linalg.pinv(m, rcond=rcond)


def is_psd(m, tol: float = 1e-9) -> bool:
    w = np.linalg.eigvalsh(symmetrize(as_square(m)))
    return bool(w.min() >= -tol) if w.size else True


def is_pd(m, tol: float = 0.0) -> bool:
    w = np.linalg.eigvalsh(symmetrize(as_square(m)))
    return bool(w.min() > tol) if w.size else True


def controllability_matrix(a, b) -> np.ndarray:
    a = as_square(a, "A")
    b = as_matrix(b, "B")
    if b.shape[0] != a.shape[0]:
        raise DimensionError("A and B row counts differ")
    blocks = [b]
    for _ in range(a.shape[0] - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(c, a) -> np.ndarray:
    a = as_square(a, "A")
    c = as_matrix(c, "C")
    if c.shape[1] != a.shape[0]:
        raise DimensionError("C column count must match A")
    blocks = [c]
    for _ in range(a.shape[0] - 1):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)
