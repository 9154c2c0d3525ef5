"""Static velocity-field optimization by a preconditioned quasi-Newton method.

The reduced cost of a control u is

    J(u) = alpha/2 (q(u) - z)^T M (q(u) - z)
         + beta/2 (ux^T M_u ux + uy^T M_u uy)
         + beta_g/2 (ux^T A_u ux + uy^T A_u uy)

where q(u) is the unit-mass equilibrium.  Its gradient is assembled from the
static adjoint and the advection-tensor contraction; descent directions come
from the constant surrogate Hessian H = beta M_u + beta_g A_u (factorized
once) and steps are safeguarded by Armijo backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointField, solve_adjoint_static
from .fem import ControlField, FemOperators
from .linalg import SolverError, lu_factor
from .state import DensityField, solve_equilibrium

__all__ = [
    "ArmijoParams",
    "OcpConfig",
    "IterationRecord",
    "StaticSolution",
    "LineSearchError",
    "NotDescentError",
    "evaluate_cost",
    "reduced_gradient",
    "armijo_backtracking",
    "solve_static_ocp",
]


class LineSearchError(SolverError):
    """Backtracking exhausted without satisfying the Armijo condition."""


class NotDescentError(ValueError):
    """The supplied direction is not a descent direction."""


@dataclass(frozen=True)
class ArmijoParams:
    c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if not 0.0 < self.c1 < 1.0:
            raise ValueError(f"c1 must lie in (0, 1), got {self.c1}")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError(f"shrink must lie in (0, 1), got {self.shrink}")


@dataclass(frozen=True)
class OcpConfig:
    """Weights, tolerances, and discretization settings shared by both OCPs."""

    alpha: float = 1.0
    beta: float = 1e-3
    beta_g: float = 1e-5
    tol: float = 1e-6
    max_iter: int = 200
    armijo: ArmijoParams = field(default_factory=ArmijoParams)
    theta: float = 1.0
    dt: float = 0.03
    T: float = 3.0
    mu: float = 1.0
    lumped: bool = True

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.beta_g < 0:
            raise ValueError(
                f"weights must satisfy alpha>0, beta>0, beta_g>=0, got "
                f"({self.alpha}, {self.beta}, {self.beta_g})"
            )
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    J: float
    grad_norm: float
    step_size: float


@dataclass(frozen=True)
class StaticSolution:
    q_star: DensityField
    u_star: ControlField
    adjoint: AdjointField
    history: list[IterationRecord]
    converged: bool

    @property
    def lambda_m(self) -> float:
        return self.adjoint.lambda_m

    def control_magnitude_bound(self) -> float:
        return float(self.u_star.magnitudes().max())


def _vals(x):
    return x.values if isinstance(x, DensityField) else np.asarray(x, dtype=float)


def evaluate_cost(ops: FemOperators, q, z, u: ControlField, config: OcpConfig) -> float:
    dq = _vals(q) - _vals(z)
    J = 0.5 * config.alpha * float(dq @ (ops.M @ dq))
    J += 0.5 * config.beta * float(u.ux @ (ops.M_u @ u.ux) + u.uy @ (ops.M_u @ u.uy))
    if config.beta_g:
        J += 0.5 * config.beta_g * float(
            u.ux @ (ops.A_u @ u.ux) + u.uy @ (ops.A_u @ u.uy)
        )
    return J


def reduced_gradient(ops: FemOperators, u: ControlField, z, config: OcpConfig):
    """Gradient of the reduced cost at u.

    Returns (grad, J, q, adjoint) with grad stacked as [gx, gy].  The
    gradient of each component c is beta M_u u_c + beta_g A_u u_c plus the
    tensor contraction of the adjoint with the equilibrium.
    """
    q, _ = solve_equilibrium(ops, u)
    adj = solve_adjoint_static(ops, u, q, z, config.alpha)
    gx_t, gy_t = ops.tensor.gradient_contraction(adj.values, q.values)
    gx = config.beta * (ops.M_u @ u.ux) + gx_t
    gy = config.beta * (ops.M_u @ u.uy) + gy_t
    if config.beta_g:
        gx = gx + config.beta_g * (ops.A_u @ u.ux)
        gy = gy + config.beta_g * (ops.A_u @ u.uy)
    J = evaluate_cost(ops, q, z, u, config)
    return np.concatenate([gx, gy]), J, q, adj


def armijo_backtracking(j_fun, u, d, grad, params: ArmijoParams, f0=None):
    """Largest step tau in {1, shrink, shrink^2, ...} passing the Armijo test.

    ``j_fun`` maps a stacked control vector to a cost value.  Returns
    (tau, f_new).  Raises NotDescentError when grad.d >= 0 and
    LineSearchError when max_backtracks trials all fail.
    """
    slope = float(np.dot(grad, d))
    if slope >= 0:
        raise NotDescentError(f"direction has nonnegative slope {slope:.3e}")
    if f0 is None:
        f0 = j_fun(u)
    tau = 1.0
    for _ in range(params.max_backtracks + 1):
        f_new = j_fun(u + tau * d)
        if np.isfinite(f_new) and f_new <= f0 + params.c1 * tau * slope:
            return tau, f_new
        tau *= params.shrink
    raise LineSearchError(
        f"no Armijo step after {params.max_backtracks} backtracks (slope {slope:.3e})"
    )


def solve_static_ocp(
    ops: FemOperators, z, config: OcpConfig, u0: ControlField | None = None
) -> StaticSolution:
    """Quasi-Newton iteration on the reduced cost.

    H d = -grad with the constant SPD surrogate H = beta M_u + beta_g A_u;
    accepted iterates have nonincreasing cost.  Stops when the Euclidean norm
    of the stacked gradient drops below config.tol or max_iter is reached
    (flagged through ``converged``).
    """
    n = ops.n
    zv = _vals(z)
    u = u0.stacked() if u0 is not None else np.zeros(2 * n)
    H = (config.beta * ops.M_u + config.beta_g * ops.A_u).tocsc()
    H_lu = lu_factor(H)

    def j_of(u_vec):
        cf = ControlField.from_stacked(u_vec)
        q, _ = solve_equilibrium(ops, cf)
        return evaluate_cost(ops, q, zv, cf, config)

    history: list[IterationRecord] = []
    converged = False
    q = adj = None
    for it in range(config.max_iter + 1):
        cf = ControlField.from_stacked(u)
        grad, J, q, adj = reduced_gradient(ops, cf, zv, config)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < config.tol:
            history.append(IterationRecord(it, J, gnorm, 0.0))
            converged = True
            break
        if it == config.max_iter:
            history.append(IterationRecord(it, J, gnorm, 0.0))
            break
        d = -np.concatenate([H_lu.solve(grad[:n]), H_lu.solve(grad[n:])])
        try:
            tau, _ = armijo_backtracking(j_of, u, d, grad, config.armijo, f0=J)
        except LineSearchError:
            history.append(IterationRecord(it, J, gnorm, 0.0))
            break
        history.append(IterationRecord(it, J, gnorm, tau))
        u = u + tau * d

    return StaticSolution(
        q_star=q,
        u_star=ControlField.from_stacked(u),
        adjoint=adj,
        history=history,
        converged=converged,
    )
