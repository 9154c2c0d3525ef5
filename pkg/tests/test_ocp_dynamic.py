import numpy as np
import pytest
from numpy.testing import assert_allclose

import densctl as dc
from densctl.adjoint import solve_adjoint_dynamic
from densctl.ocp_dynamic import (
    TimeVaryingControl,
    _dynamic_gradient,
    _forward,
    evaluate_dynamic_cost,
    project_to_magnitude_ball,
    solve_dynamic_ocp,
)
from densctl.ocp_static import OcpConfig, solve_static_ocp

from conftest import random_control


@pytest.fixture(scope="module")
def static_solution(small_ops):
    z = dc.gaussian_density(small_ops, (0.7, 0.7), 0.2)
    cfg = OcpConfig(alpha=1.0, beta=1e-3, beta_g=1e-5, tol=1e-7, max_iter=200)
    return solve_static_ocp(small_ops, z, cfg)


def test_time_varying_control_grid_check(small_ops):
    u = dc.ControlField.zeros(small_ops.n)
    with pytest.raises(ValueError):
        TimeVaryingControl([u] * 5, dt=0.1, T=1.0)
    tvc = TimeVaryingControl([u] * 11, dt=0.1, T=1.0)
    assert tvc.n_steps == 10


def test_dynamic_cost_zero_at_turnpike(small_ops, static_solution):
    cfg = OcpConfig(theta=0.5, lumped=False, dt=0.05, T=0.5)
    traj = dc.simulate(
        small_ops, static_solution.q_star, static_solution.u_star, T=0.5, dt=0.05,
        theta=0.5, lumped=False,
    )
    U = np.tile(static_solution.u_star.stacked(), (11, 1))
    assert evaluate_dynamic_cost(small_ops, traj, U, static_solution, cfg) == pytest.approx(0.0, abs=1e-18)


def test_dynamic_cost_zero_weights(small_ops, static_solution, rng):
    cfg = OcpConfig(alpha=1e-300, beta=1e-300, beta_g=0.0, dt=0.05, T=0.5)
    q0 = dc.gaussian_density(small_ops, (0.3, 0.3), 0.2)
    u = random_control(small_ops, rng, 0.2)
    traj = dc.simulate(small_ops, q0, u, T=0.5, dt=0.05)
    U = np.tile(u.stacked(), (11, 1))
    assert evaluate_dynamic_cost(small_ops, traj, U, static_solution, cfg) < 1e-200


def test_dynamic_cost_trapezoid_oracle(small_ops, static_solution, rng):
    cfg = OcpConfig(alpha=1.3, beta=2e-3, beta_g=1e-4, dt=0.1, T=0.3)
    q0 = dc.gaussian_density(small_ops, (0.4, 0.6), 0.25)
    controls = [random_control(small_ops, rng, 0.3) for _ in range(4)]
    traj = dc.simulate(small_ops, q0, controls, T=0.3, dt=0.1, theta=0.5, lumped=False)
    U = np.stack([c.stacked() for c in controls])
    got = evaluate_dynamic_cost(small_ops, traj, U, static_solution, cfg)

    n = small_ops.n
    qs, us = static_solution.q_star.values, static_solution.u_star.stacked()
    Md, Mu, Au = small_ops.M.toarray(), small_ops.M_u.toarray(), small_ops.A_u.toarray()
    expected = 0.0
    for i, w in enumerate([0.5, 1.0, 1.0, 0.5]):
        dq = traj.states[i] - qs
        du = U[i] - us
        term = 1.3 * dq @ Md @ dq
        term += 2e-3 * (du[:n] @ Mu @ du[:n] + du[n:] @ Mu @ du[n:])
        term += 1e-4 * (du[:n] @ Au @ du[:n] + du[n:] @ Au @ du[n:])
        expected += 0.5 * w * 0.1 * term
    assert got == pytest.approx(expected, rel=1e-12)


def test_dynamic_cost_grid_mismatch(small_ops, static_solution, rng):
    cfg = OcpConfig(dt=0.1, T=0.3)
    q0 = dc.uniform_density(small_ops)
    traj = dc.simulate(small_ops, q0, static_solution.u_star, T=0.3, dt=0.1)
    with pytest.raises(ValueError):
        evaluate_dynamic_cost(
            small_ops, traj, np.zeros((7, 2 * small_ops.n)), static_solution, cfg
        )


def test_projection_magnitudes(small_ops, rng):
    n = small_ops.n
    U = 3.0 * rng.standard_normal((4, 2 * n))
    P = project_to_magnitude_ball(U, n, radius=1.0)
    mags = np.hypot(P[:, :n], P[:, n:])
    assert mags.max() <= 1.0 + 1e-12
    # directions preserved where clipped, values preserved where feasible
    inside = np.hypot(U[:, :n], U[:, n:]) <= 1.0
    assert_allclose(P[:, :n][inside], U[:, :n][inside], rtol=0, atol=0)


@pytest.mark.parametrize("theta,lumped", [(1.0, True), (0.5, False)])
def test_dynamic_gradient_matches_finite_differences(
    tiny_ops, rng, theta, lumped
):
    # space-time gradient exactness on a tiny instance
    z = dc.gaussian_density(tiny_ops, (0.7, 0.7), 0.3)
    scfg = OcpConfig(alpha=1.0, beta=1e-3, beta_g=1e-5, tol=1e-8, max_iter=100)
    static = solve_static_ocp(tiny_ops, z, scfg)
    cfg = OcpConfig(
        alpha=1.0, beta=1e-3, beta_g=1e-5, dt=0.05, T=0.25, theta=theta, lumped=lumped
    )
    n = tiny_ops.n
    n_steps = 5
    q0 = dc.gaussian_density(tiny_ops, (0.3, 0.3), 0.25)
    U = np.tile(static.u_star.stacked(), (n_steps + 1, 1)) + 0.4 * rng.standard_normal(
        (n_steps + 1, 2 * n)
    )

    def jt(u_flat):
        Um = u_flat.reshape(n_steps + 1, 2 * n)
        traj, _ = _forward(tiny_ops, q0.values, Um, cfg.dt, theta, lumped)
        return evaluate_dynamic_cost(tiny_ops, traj, Um, static, cfg)

    traj, factors = _forward(tiny_ops, q0.values, U, cfg.dt, theta, lumped)
    lams = solve_adjoint_dynamic(
        tiny_ops, traj, [dc.ControlField.from_stacked(r) for r in U],
        static.q_star, cfg.alpha, cfg.dt, theta, lumped, factors=factors,
    )
    G = _dynamic_gradient(tiny_ops, traj, lams, U, static, cfg)
    for _ in range(10):
        D = rng.standard_normal(U.shape)
        D /= np.linalg.norm(D)
        slope = float((G * D).sum())
        best = np.inf
        for h in (1e-3, 1e-4, 1e-5, 1e-6):
            fd = (jt((U + h * D).ravel()) - jt((U - h * D).ravel())) / (2 * h)
            best = min(best, abs(fd - slope) / max(abs(fd), 1e-300))
        assert best < 1e-5


def test_warm_start_is_optimal(small_ops, static_solution):
    cfg = OcpConfig(
        alpha=1.0, beta=1e-3, beta_g=1e-5, tol=1e-6, max_iter=10,
        theta=0.5, lumped=False, dt=0.05, T=0.5,
    )
    dyn = solve_dynamic_ocp(small_ops, static_solution.q_star, static_solution, cfg)
    assert dyn.converged
    assert len(dyn.history) == 1
    assert dyn.history[0].grad_norm < cfg.tol
    assert_allclose(
        dyn.control.stacked(),
        np.tile(static_solution.u_star.stacked(), (11, 1)),
        rtol=0,
        atol=0,
    )


def test_dynamic_ocp_descends_and_respects_box(small_ops, static_solution):
    cfg = OcpConfig(
        alpha=1.0, beta=1e-3, beta_g=1e-5, tol=1e-9, max_iter=8,
        theta=0.5, lumped=False, dt=0.05, T=1.0,
    )
    q0 = dc.gaussian_density(small_ops, (0.25, 0.25), 0.15)
    dyn = solve_dynamic_ocp(small_ops, q0, static_solution, cfg)
    costs = [h.J for h in dyn.history]
    assert all(b <= a + 1e-15 for a, b in zip(costs, costs[1:]))
    assert costs[-1] < costs[0]
    radius = static_solution.control_magnitude_bound()
    for cf in dyn.control.controls:
        assert cf.magnitudes().max() <= radius + 1e-12
    # improvement over the constant static control on the same cost
    traj_const = dc.simulate(
        small_ops, q0, static_solution.u_star, T=1.0, dt=0.05, theta=0.5, lumped=False
    )
    U_const = np.tile(static_solution.u_star.stacked(), (21, 1))
    j_const = evaluate_dynamic_cost(small_ops, traj_const, U_const, static_solution, cfg)
    assert costs[-1] <= j_const
    # turnpike tail: final-node control distance no bigger than the first
    assert dyn.control_distances[-1] <= dyn.control_distances[0]


def test_dynamic_solution_mass_conserved(small_ops, static_solution):
    cfg = OcpConfig(
        alpha=1.0, beta=1e-3, beta_g=1e-5, tol=1e-9, max_iter=3,
        theta=0.5, lumped=False, dt=0.05, T=0.5,
    )
    q0 = dc.gaussian_density(small_ops, (0.3, 0.6), 0.2)
    dyn = solve_dynamic_ocp(small_ops, q0, static_solution, cfg)
    assert dyn.trajectory.mass_errors().max() < 1e-11
