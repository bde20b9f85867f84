"""Preconditioned conjugate gradients for the Newton inner solves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class IndefiniteOperatorError(ArithmeticError):
    def __init__(self, iteration: int, curvature: float, kind: str = "operator"):
        self.iteration = iteration
        self.curvature = curvature
        super().__init__(f"{kind} is not positive definite: p^T A p = {curvature:.3e} at CG iterate {iteration}")


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    rel_residual: float
    converged: bool


def _as_apply(op):
    if callable(op):
        return op
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return lambda v: op @ v
    raise TypeError("operator must be a matrix or a callable")


def linear_solve_spd(op, rhs, tol: float = 1e-10, maxiter: int | None = None, precond=None,
                     x0=None) -> CGResult:
    """PCG to relative residual ``tol``; raises on a nonpositive curvature direction.

    ``op`` may be a sparse/dense matrix or a callable ``v -> A v``.  All
    reductions are plain ``np.dot`` in fixed order, so results are
    reproducible at a fixed thread count.
    """
    apply = _as_apply(op)
    M = (lambda v: v) if precond is None else _as_apply(precond)
    b = np.asarray(rhs, dtype=float)
    n = b.size
    maxiter = 10 * n if maxiter is None else maxiter
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - apply(x) if x0 is not None else b.copy()
    bnorm = float(np.sqrt(np.dot(b, b)))
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0, True)
    z = M(r)
    rz = float(np.dot(r, z))
    if rz < 0:
        raise IndefiniteOperatorError(0, rz, "preconditioner")
    p = z.copy()
    rel = float(np.sqrt(np.dot(r, r))) / bnorm
    k = 0
    while rel > tol and k < maxiter:
        Ap = apply(p)
        pAp = float(np.dot(p, Ap))
        if not pAp > 0:
            raise IndefiniteOperatorError(k, pAp)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        k += 1
        rel = float(np.sqrt(np.dot(r, r))) / bnorm
        if rel <= tol:
            break
        z = M(r)
        rz_new = float(np.dot(r, z))
        if rz_new < 0:
            raise IndefiniteOperatorError(k, rz_new, "preconditioner")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(x, k, rel, rel <= tol)


def amg_preconditioner(A):
    """Smoothed-aggregation V-cycle (symmetric smoothing, so usable in PCG)."""
    A = sp.csr_matrix(A)
    if A.shape[0] < 64:
        # tiny systems: a direct factorization is the best preconditioner
        lu = spla.splu(A.tocsc())
        return lu.solve
    # Gershgorin row weights instead of the default spectral-radius estimate,
    # which starts from a random vector and would break bitwise reproducibility
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=200,
                                           smooth=("jacobi", {"omega": 4.0 / 3.0, "weighting": "local"}))
    return ml.aspreconditioner(cycle="V")
