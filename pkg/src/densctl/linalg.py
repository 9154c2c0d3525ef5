"""Sparse solves shared by the equilibrium, adjoint, and stepping code."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = ["SolverError", "lu_factor", "bordered_solve"]


class SolverError(Exception):
    """A linear solve failed or produced an inconsistent result."""


def lu_factor(matrix):
    """Sparse LU of a square matrix; raises SolverError when singular."""
    try:
        return splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise SolverError(f"sparse LU factorization failed: {exc}") from exc


def bordered_solve(matrix, border, rhs, rhs_scalar):
    """Solve the bordered system [[K, f], [f^T, 0]] [x; s] = [rhs; rhs_scalar].

    K may be singular with a 1-D kernel; the border restores unique
    solvability.  One step of iterative refinement is applied.  Returns
    (x, s, residual_norm).
    """
    f = np.asarray(border, dtype=float)
    n = f.size
    K = sp.bmat(
        [[sp.csc_matrix(matrix), f[:, None]], [f[None, :], None]], format="csc"
    )
    lu = lu_factor(K)
    b = np.concatenate([np.asarray(rhs, dtype=float), [float(rhs_scalar)]])
    x = lu.solve(b)
    r = b - K @ x
    x = x + lu.solve(r)
    r = b - K @ x
    scale = max(np.abs(b).max(), np.abs(x).max(), 1e-300)
    if not np.isfinite(x).all():
        raise SolverError("bordered solve produced non-finite values")
    return x[:n], float(x[n]), float(np.abs(r).max() / scale)
