import math

import numpy as np
import pytest

from dgrod.basis import (AffineMap, edge_quadrature, element_mass_matrix,
                         nodal_basis, reference_nodes, volume_quadrature)


def simplex_monomial_integral(a, b):
    """Closed form: integral of xi^a eta^b over the unit triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_reference_nodes_small_degrees():
    n1 = reference_nodes(1)
    assert np.allclose(sorted(map(tuple, n1)), [(0, 0), (0, 1), (1, 0)])
    n2 = set(map(tuple, np.round(reference_nodes(2), 12)))
    assert {(0.5, 0.0), (0.0, 0.5), (0.5, 0.5)} <= n2
    assert len(reference_nodes(4)) == 15
    with pytest.raises(ValueError):
        reference_nodes(5)
    with pytest.raises(ValueError):
        reference_nodes(0)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_lagrange_delta_property(N):
    b = nodal_basis(N)
    assert b.n_p == (N + 1) * (N + 2) // 2
    V = b.eval_basis(b.nodes)
    assert np.max(np.abs(V - np.eye(b.n_p))) <= 1e-10


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_partition_of_unity_and_derivative_sums(N, rng):
    b = nodal_basis(N)
    pts = rng.uniform(-0.2, 1.1, size=(50, 2))  # includes extrapolation range
    assert np.max(np.abs(b.eval_basis(pts).sum(axis=1) - 1.0)) <= 1e-12
    assert np.max(np.abs(b.eval_grad(pts).sum(axis=1))) <= 1e-12
    assert np.max(np.abs(b.eval_hess(pts).sum(axis=1))) <= 1e-11


def test_barycentric_linear_basis():
    b = nodal_basis(1)
    vals = b.eval_basis([(1 / 3, 1 / 3)])[0]
    assert np.allclose(vals, [1 / 3, 1 / 3, 1 / 3], atol=1e-14)


def test_edge_node_lists_lie_on_edges():
    for N in (1, 2, 3, 4):
        b = nodal_basis(N)
        for loc, ids in enumerate(b.edge_nodes):
            assert len(ids) == N + 1
            pts = b.nodes[ids]
            if loc == 0:
                assert np.allclose(pts[:, 1], 0.0)
            elif loc == 1:
                assert np.allclose(pts.sum(axis=1), 1.0)
            else:
                assert np.allclose(pts[:, 0], 0.0)


@pytest.mark.parametrize("degree", range(1, 13))
def test_volume_quadrature_monomial_exactness(degree):
    rule = volume_quadrature(degree)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = np.sum(rule.weights * rule.points[:, 0] ** a
                         * rule.points[:, 1] ** b)
            assert got == pytest.approx(simplex_monomial_integral(a, b),
                                        abs=1e-13)


def test_volume_quadrature_degree_range():
    with pytest.raises(ValueError):
        volume_quadrature(0)
    with pytest.raises(ValueError):
        volume_quadrature(13)


def test_edge_quadrature_basics():
    r1 = edge_quadrature(1)
    assert np.allclose(r1.points, [0.5]) and np.allclose(r1.weights, [1.0])
    for n in range(1, 11):
        r = edge_quadrature(n)
        assert np.sum(r.weights * r.points) == pytest.approx(0.5, abs=1e-14)
    r3 = edge_quadrature(3)
    assert np.sum(r3.weights * r3.points**4) == pytest.approx(0.2, abs=1e-14)
    with pytest.raises(ValueError):
        edge_quadrature(0)


def test_mass_matrix_linear_reference():
    amap = AffineMap.from_vertices([(0, 0), (1, 0), (0, 1)])
    M = element_mass_matrix(nodal_basis(1), amap)
    expect = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    assert np.allclose(M, expect, atol=1e-14)
    # row sums: integral of each hat function = area / 3
    assert np.allclose(M.sum(axis=1), 0.5 / 3, atol=1e-14)


def test_mass_matrix_scales_with_area(rng):
    b = nodal_basis(2)
    amap1 = AffineMap.from_vertices([(0, 0), (1, 0), (0, 1)])
    amap2 = AffineMap.from_vertices([(0, 0), (3, 0), (0, 3)])
    M1 = element_mass_matrix(b, amap1)
    M2 = element_mass_matrix(b, amap2)
    assert np.allclose(M2, 9.0 * M1, atol=1e-13)
    w = np.linalg.eigvalsh(M1)
    assert w.min() > 0  # SPD


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_physical_gradient_finite_difference(N, rng):
    b = nodal_basis(N)
    verts = np.array([(0.1, -0.2), (1.3, 0.1), (0.4, 0.9)])
    amap = AffineMap.from_vertices(verts)

    def phys_basis(x):
        return b.eval_basis(amap.to_reference(np.atleast_2d(x)))[0]

    pts = rng.uniform(0.05, 0.4, size=(10, 2))
    step = 1e-6
    for p in pts:
        x = amap.to_physical(p[None, :])[0]
        grad = np.einsum('pj,ji->pi', b.eval_grad(p[None, :])[0],
                         amap.inv_jacobian)
        fd_x = (phys_basis(x + [step, 0]) - phys_basis(x - [step, 0])) / (2 * step)
        fd_y = (phys_basis(x + [0, step]) - phys_basis(x - [0, step])) / (2 * step)
        scale = np.maximum(1.0, np.abs(grad))
        assert np.max(np.abs(grad[:, 0] - fd_x) / scale[:, 0]) <= 1e-6
        assert np.max(np.abs(grad[:, 1] - fd_y) / scale[:, 1]) <= 1e-6


@pytest.mark.parametrize("N", [2, 3, 4])
def test_hessian_finite_difference(N, rng):
    b = nodal_basis(N)
    pts = rng.uniform(0.1, 0.4, size=(5, 2))
    step = 1e-5
    for p in pts:
        hess = b.eval_hess(p[None, :])[0]

        def val(q):
            return b.eval_basis(np.atleast_2d(q))[0]

        fd_xx = (val(p + [step, 0]) - 2 * val(p) + val(p - [step, 0])) / step**2
        fd_yy = (val(p + [0, step]) - 2 * val(p) + val(p - [0, step])) / step**2
        fd_xy = (val(p + [step, step]) - val(p + [step, -step])
                 - val(p + [-step, step]) + val(p - [step, step])) / (4 * step**2)
        scale = np.maximum(1.0, np.abs(hess))
        assert np.max(np.abs(hess[:, 0] - fd_xx) / scale[:, 0]) <= 1e-5
        assert np.max(np.abs(hess[:, 1] - fd_xy) / scale[:, 1]) <= 1e-5
        assert np.max(np.abs(hess[:, 2] - fd_yy) / scale[:, 2]) <= 1e-5


def test_affine_map_roundtrip_and_validation(rng):
    verts = np.array([(0.2, 0.1), (1.1, 0.3), (0.5, 1.2)])
    amap = AffineMap.from_vertices(verts)
    assert amap.det > 0
    ref = np.array([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    assert np.allclose(amap.to_physical(ref), verts, atol=1e-15)
    pts = rng.random((20, 2)) * 0.5
    assert np.allclose(amap.to_reference(amap.to_physical(pts)), pts, atol=1e-13)
    with pytest.raises(ValueError):
        AffineMap.from_vertices(verts[[0, 2, 1]])
