import numpy as np
import pytest
from numpy.testing import assert_allclose

import densctl as dc

from densctl.state import NegativeDensityWarning, step_theta

from conftest import random_control


def test_equilibrium_zero_control_uniform(holed_ops):
    q, v = dc.solve_equilibrium(holed_ops, dc.ControlField.zeros(holed_ops.n))
    expected = 1.0 / holed_ops.mesh.domain_area
    assert_allclose(q.values, expected, rtol=1e-10)
    assert q.mass == pytest.approx(1.0, abs=1e-12)
    assert (v > 0).all()


def test_equilibrium_matches_dense_svd(tiny_ops, rng):
    for _ in range(5):
        u = random_control(tiny_ops, rng, scale=0.7)
        q, _ = dc.solve_equilibrium(tiny_ops, u)
        L = dc.state_matrix(tiny_ops, u).toarray()
        _, _, vt = np.linalg.svd(L)
        null = vt[-1]
        null = null / (tiny_ops.F @ null)
        assert_allclose(q.values, null, rtol=0, atol=1e-10)


def test_equilibrium_unit_mass_and_residual(small_ops, rng):
    u = random_control(small_ops, rng)
    q, v = dc.solve_equilibrium(small_ops, u)
    assert small_ops.F @ q.values == pytest.approx(1.0, abs=1e-13)
    L = dc.state_matrix(small_ops, u)
    rel = np.abs(L @ q.values).max() / (np.abs(L).max() * np.abs(q.values).max())
    assert rel < 1e-10


def test_step_theta_fixed_point(small_ops, rng):
    u = random_control(small_ops, rng, scale=0.5)
    q, _ = dc.solve_equilibrium(small_ops, u)
    for theta, lumped in ((1.0, True), (0.5, False), (0.0, False)):
        q1 = step_theta(small_ops, q, u, u, dt=0.01, theta=theta, lumped=lumped)
        assert_allclose(q1.values, q.values, rtol=0, atol=1e-10)


def test_step_theta_mass_conservation(small_ops, rng):
    q = dc.gaussian_density(small_ops, (0.4, 0.6), 0.2)
    for theta in (0.0, 0.5, 1.0):
        u0 = random_control(small_ops, rng)
        u1 = random_control(small_ops, rng)
        q1 = step_theta(small_ops, q, u0, u1, dt=0.02, theta=theta, lumped=theta == 1.0)
        assert abs(q1.mass - 1.0) < 1e-12


def test_step_theta_matches_dense_implicit_euler(tiny_ops, rng):
    u = random_control(tiny_ops, rng)
    q0 = dc.uniform_density(tiny_ops).values + 0.01 * rng.standard_normal(tiny_ops.n)
    dt = 0.005
    L = dc.state_matrix(tiny_ops, u).toarray()
    M = tiny_ops.M.toarray()
    expected = np.linalg.solve(M + dt * L, M @ q0)
    got = step_theta(tiny_ops, q0, u, u, dt=dt, theta=1.0, lumped=False)
    assert_allclose(got.values, expected, rtol=0, atol=1e-12)


def test_step_theta_validates_inputs(small_ops):
    u = dc.ControlField.zeros(small_ops.n)
    q = dc.uniform_density(small_ops)
    with pytest.raises(ValueError):
        step_theta(small_ops, q, u, u, dt=-1.0)
    with pytest.raises(ValueError):
        step_theta(small_ops, q, u, u, dt=0.1, theta=1.5)


def test_simulate_stationary(small_ops, rng):
    u = random_control(small_ops, rng, scale=0.5)
    q, _ = dc.solve_equilibrium(small_ops, u)
    traj = dc.simulate(small_ops, q, u, T=0.5, dt=0.05, theta=1.0, lumped=True)
    assert traj.n_steps == 10
    assert np.abs(traj.states - q.values).max() < 1e-9


def test_simulate_grid_and_mass(small_ops, rng):
    q0 = dc.gaussian_density(small_ops, (0.3, 0.3), 0.15)
    u = random_control(small_ops, rng, scale=0.3)
    traj = dc.simulate(small_ops, q0, u, T=3.0, dt=0.03, theta=1.0, lumped=True)
    assert traj.n_steps == 100
    assert traj.mass_errors().max() < 1e-12
    assert len(traj.times) == 101
    assert traj.times[-1] == pytest.approx(3.0)


def test_simulate_time_varying_control(small_ops, rng):
    q0 = dc.uniform_density(small_ops)
    controls = [random_control(small_ops, rng, scale=0.2) for _ in range(11)]
    traj = dc.simulate(small_ops, q0, controls, T=1.0, dt=0.1, theta=0.5, lumped=False)
    assert traj.mass_errors().max() < 1e-12
    with pytest.raises(ValueError):
        dc.simulate(small_ops, q0, controls[:5], T=1.0, dt=0.1)


def test_simulate_bad_grid(small_ops):
    q0 = dc.uniform_density(small_ops)
    with pytest.raises(ValueError):
        dc.simulate(small_ops, q0, dc.ControlField.zeros(small_ops.n), T=1.0, dt=0.3)


def test_positivity_lumped_implicit_euler(small_mesh):
    # strict-Delaunay mesh + lumped implicit Euler keeps densities nonnegative
    assert dc.check_mesh_quality(small_mesh).is_strict_delaunay
    ops = dc.assemble_operators(small_mesh, mu=1.0)
    verts = ops.mesh.vertices
    u = dc.ControlField(-(verts[:, 1] - 0.5), verts[:, 0] - 0.5)
    q0 = dc.gaussian_density(ops, (0.25, 0.25), 0.1)
    assert q0.min_value >= 0.0
    traj = dc.simulate(ops, q0, u, T=2.0, dt=0.05, theta=1.0, lumped=True)
    assert traj.min_values.min() >= -1e-12


def test_lyapunov_decay_under_constant_control(small_ops, rng):
    u = random_control(small_ops, rng, scale=0.4)
    qeq, _ = dc.solve_equilibrium(small_ops, u)
    q0 = dc.gaussian_density(small_ops, (0.7, 0.3), 0.15)
    traj = dc.simulate(small_ops, q0, u, T=1.0, dt=0.02, theta=1.0, lumped=True)
    lyap = dc.lyapunov_values(traj, qeq, small_ops.M)
    assert np.all(np.diff(lyap) <= 1e-12 * max(1.0, lyap[0]))


def test_negative_density_warning(tiny_ops, rng):
    # strong advection on a very coarse mesh produces undershoots
    with pytest.warns(NegativeDensityWarning):
        for _ in range(20):
            u = random_control(tiny_ops, rng, scale=8.0)
            dc.solve_equilibrium(tiny_ops, u)


def test_normalized_density_rejects_zero(small_ops):
    with pytest.raises(ValueError):
        dc.normalized_density(small_ops, np.zeros(small_ops.n))
