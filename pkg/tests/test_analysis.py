import numpy as np
import pytest
from numpy.testing import assert_allclose

import densctl as dc
from densctl.analysis import (
    boundary_node_normals,
    certify,
    certify_kernel,
    certify_spectral_positivity,
    convergence_report,
    l2_distance,
    lyapunov_values,
    zero_mean_basis,
)

from conftest import random_control


def test_kernel_zero_control(small_ops):
    cert = certify_kernel(small_ops, dc.ControlField.zeros(small_ops.n))
    assert cert.dim == 1
    assert cert.gap_ratio > 1e6
    assert cert.left_kernel_residual < 1e-12
    assert cert.adjoint_kernel_residual < 1e-12
    # kernel of the unadvected operator is the constant vector
    v = cert.kernel_vector
    assert np.abs(v - v.mean()).max() < 1e-10 * np.abs(v).max()


def test_kernel_random_controls(small_ops, rng):
    for _ in range(5):
        u = random_control(small_ops, rng)
        cert = certify_kernel(small_ops, u)
        assert cert.dim == 1
        assert cert.gap_ratio > 1e6
        assert cert.left_kernel_residual < 1e-12
        assert cert.kernel_min_entry > 0  # equilibrium is one-signed


def test_kernel_residual_only_path(small_ops, rng):
    u = random_control(small_ops, rng)
    cert = certify_kernel(small_ops, u, dense_limit=10)
    assert not cert.dense_path
    assert cert.dim is None
    assert cert.left_kernel_residual < 1e-12


def test_zero_mean_basis(small_ops):
    B = zero_mean_basis(small_ops.F)
    n = small_ops.n
    assert B.shape == (n, n - 1)
    assert_allclose(B.T @ B, np.eye(n - 1), atol=1e-12)
    assert np.abs(small_ops.F @ B).max() < 1e-12


def test_spectral_positivity_zero_control(small_ops):
    lam = certify_spectral_positivity(small_ops, dc.ControlField.zeros(small_ops.n))
    assert lam > 0  # reduced Neumann stiffness is PD on the zero-mean subspace


def test_spectral_positivity_reported_for_random_control(small_ops, rng):
    val = certify_spectral_positivity(small_ops, random_control(small_ops, rng, 0.3))
    assert np.isfinite(val)


def test_l2_distance_properties(small_ops, rng):
    a = rng.random(small_ops.n)
    b = rng.random(small_ops.n)
    c = rng.random(small_ops.n)
    M = small_ops.M
    assert l2_distance(a, a, M) == 0.0
    assert l2_distance(a, b, M) == pytest.approx(l2_distance(b, a, M), rel=1e-14)
    assert l2_distance(a, c, M) <= l2_distance(a, b, M) + l2_distance(b, c, M) + 1e-14
    # matches dense quadrature of the squared P1 difference
    d = a - b
    dense = np.sqrt(d @ (M.toarray() @ d))
    assert l2_distance(a, b, M) == pytest.approx(dense, rel=1e-13)


def test_convergence_report(small_ops, rng):
    u = random_control(small_ops, rng, 0.3)
    qeq, _ = dc.solve_equilibrium(small_ops, u)
    q0 = dc.gaussian_density(small_ops, (0.3, 0.3), 0.2)
    traj = dc.simulate(small_ops, q0, u, T=1.0, dt=0.05, theta=1.0, lumped=True)
    rows, monotone, final = convergence_report(traj, qeq, small_ops)
    assert len(rows) == 21
    assert monotone
    assert final < rows[0][2]
    lyap = lyapunov_values(traj, qeq, small_ops.M)
    assert rows[5][3] == pytest.approx(lyap[5], rel=1e-12)


def test_certify_aggregate(small_ops, rng):
    u = random_control(small_ops, rng, 0.3)
    qeq, _ = dc.solve_equilibrium(small_ops, u)
    q0 = dc.uniform_density(small_ops)
    traj = dc.simulate(small_ops, q0, u, T=0.5, dt=0.05, theta=1.0, lumped=True)
    rep = certify(small_ops, u, trajectory=traj, reference=qeq)
    assert rep.kernel_dim_state == 1
    assert rep.left_kernel_residual < 1e-12
    assert rep.lyapunov_monotone
    assert np.isfinite(rep.min_symmetric_eigenvalue_on_M0)
    assert "final_l2_distance" in rep.details


def test_boundary_normals_outward(small_mesh):
    nodes, normals = boundary_node_normals(small_mesh)
    assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)
    # on the unit square, outward normals point away from the centroid
    center = np.array([0.5, 0.5])
    outward = ((small_mesh.vertices[nodes] - center) * normals).sum(axis=1)
    assert (outward > 0).all()


def test_kernel_residual_scale_independent(small_mesh, rng):
    # residuals are algebraic identities: they stay at round-off level for
    # both mu = 1 and mu = 100
    for mu in (1.0, 100.0):
        ops = dc.assemble_operators(small_mesh, mu=mu)
        cert = certify_kernel(ops, random_control(ops, rng))
        assert cert.left_kernel_residual < 1e-12
