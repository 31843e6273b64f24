"""Acceptance suite: one test per criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.  Tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np
import pytest

from dgrod import analysis, linsolve
from dgrod.assembly import (DGSystemSpec, assemble_boundary_faces_classical,
                            assemble_interior_faces, assemble_volume,
                            solve_rod_global, solve_rod_iterative)
from dgrod.basis import (AffineMap, edge_quadrature, nodal_basis,
                         volume_quadrature)
from dgrod.problems import make_case
from dgrod.rodspace import build_boundary_constraints, rod_reconstruct
from dgrod.study import run_patch_test

from conftest import make_domain, make_mesh, run_levels

DISK_LEVELS = (3, 6, 12, 24)
RING_LEVELS = (2, 4, 8, 16)   # annulus and rose


def report(num, name, ok):
    print(f"\n[acceptance] criterion {num} ({name}): "
          f"{'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num} ({name}) failed"


@pytest.fixture(scope="module")
def disk_case1_sweeps():
    t0 = time.perf_counter()
    out = {}
    for N in (2, 3, 4):
        for method in ("classical", "rod_global"):
            out[(N, method)] = run_levels("disk", N, method, DISK_LEVELS)
    out["elapsed"] = time.perf_counter() - t0
    return out


def test_criterion_01_patch_test():
    t0 = time.perf_counter()
    result = run_patch_test(rings=(2, 4), degree=2, eta0=10.0)
    elapsed = time.perf_counter() - t0
    ok = all(e2 <= 1e-9 for e2 in result.rod_global.values())
    ok = ok and elapsed < 10.0
    # the classical variant cannot be exact here: its boundary data lives on
    # the polygon where the quadratic is O(h^2) away from zero; check the
    # second-order pollution instead of the (unattainable) 1e-9
    e2, e4 = result.classical[2], result.classical[4]
    ok = ok and e2 > 1e-4 and e4 > 1e-4 and 1.5 <= math.log2(e2 / e4) <= 2.7
    print(f"\n  rod_global E2: { {r: f'{v:.2e}' for r, v in result.rod_global.items()} }"
          f" classical E2: { {r: f'{v:.2e}' for r, v in result.classical.items()} }"
          f" ({elapsed:.1f}s)")
    report(1, "patch test, consistency", ok)


def test_criterion_02_disk_optimal_orders(disk_case1_sweeps):
    ok = disk_case1_sweeps["elapsed"] < 300.0
    for N in (2, 3, 4):
        _, rod_orders = disk_case1_sweeps[(N, "rod_global")]
        _, cls_orders = disk_case1_sweeps[(N, "classical")]
        print(f"  N={N}: rod finest O2={rod_orders[-1]:.2f} "
              f"classical finest O2={cls_orders[-1]:.2f}")
        ok = ok and rod_orders[-1] >= N + 0.7
        ok = ok and 1.6 <= cls_orders[-1] <= 2.7
    rows, _ = disk_case1_sweeps[(2, "rod_global")]
    level = min(rows, key=lambda r: abs(r[1] - 0.12))
    print(f"  magnitude check at h={level[1]:.3f}: E2={level[2]:.2e} "
          f"(sweep {disk_case1_sweeps['elapsed']:.0f}s)")
    ok = ok and 1e-6 <= level[2] <= 1e-4
    report(2, "disk optimal orders", ok)


def test_criterion_03_coefficient_robustness():
    ok = True
    for case in (2, 3):
        _, rod_orders = run_levels("disk", 2, "rod_global", DISK_LEVELS,
                                   coeff_case=case)
        _, cls_orders = run_levels("disk", 2, "classical", DISK_LEVELS,
                                   coeff_case=case)
        print(f"  case {case}: rod finest O2={rod_orders[-1]:.2f} "
              f"classical finest O2={cls_orders[-1]:.2f}")
        ok = ok and rod_orders[-1] >= 2.7
        ok = ok and 1.6 <= cls_orders[-1] <= 2.7
    report(3, "coefficient robustness", ok)


def test_criterion_04_annulus_orders():
    ok = True
    for N in (2, 3, 4):
        _, rod_orders = run_levels("annulus", N, "rod_global", RING_LEVELS)
        _, cls_orders = run_levels("annulus", N, "classical", RING_LEVELS)
        print(f"  N={N}: rod finest O2={rod_orders[-1]:.2f} "
              f"classical finest O2={cls_orders[-1]:.2f}")
        ok = ok and rod_orders[-1] >= N + 0.7
        ok = ok and 1.6 <= cls_orders[-1] <= 2.7
    report(4, "annulus orders", ok)


def test_criterion_05_rose_nonconvex():
    _, rod_orders = run_levels("rose", 2, "rod_global", RING_LEVELS)
    _, cls_orders = run_levels("rose", 2, "classical", RING_LEVELS)
    print(f"  rose N=2: rod finest O2={rod_orders[-1]:.2f} "
          f"classical finest O2={cls_orders[-1]:.2f}")
    ok = rod_orders[-1] >= 2.8 and 1.6 <= cls_orders[-1] <= 2.7
    report(5, "rose non-convex orders", ok)


def test_criterion_06_reconstruction_properties():
    rng = np.random.default_rng(42)
    pool = []
    for kind in ("disk", "annulus", "rose"):
        dom = make_domain(kind)
        tri = make_mesh(kind, 3)
        prob = make_case(kind, 1)
        for N in (2, 3, 4):
            cons = build_boundary_constraints(tri, dom, nodal_basis(N),
                                              dirichlet=prob.u_D)
            pool.extend(cons.by_element.values())
    picks = rng.choice(len(pool), size=50, replace=False)
    ok = True
    for idx in picks:
        con = pool[idx]
        n_p = con.C.shape[1]
        u = rng.standard_normal(n_p)
        # projector idempotence with homogeneous data
        a0 = rod_reconstruct(u, con.C, np.zeros_like(con.d))
        a00 = rod_reconstruct(a0, con.C, np.zeros_like(con.d))
        ok = ok and np.max(np.abs(a00 - a0)) <= 1e-11
        # constraint residual with the real data
        a = rod_reconstruct(u, con.C, con.d)
        ok = ok and np.max(np.abs(con.C @ a - con.d)) <= 1e-11
        # minimal-norm property against feasible perturbations
        gram = con.C @ con.C.T
        null_proj = np.eye(n_p) - con.C.T @ np.linalg.solve(gram, con.C)
        dist = np.linalg.norm(a - u)
        for _ in range(100):
            other = a + null_proj @ rng.standard_normal(n_p)
            ok = ok and np.linalg.norm(other - u) >= dist - 1e-12
    report(6, "reconstruction properties", ok)


def test_criterion_07_quadrature_basis_suite():
    ok = True
    for d in range(1, 13):
        rule = volume_quadrature(d)
        for a in range(d + 1):
            for b in range(d + 1 - a):
                exact = (math.factorial(a) * math.factorial(b)
                         / math.factorial(a + b + 2))
                got = float(np.sum(rule.weights * rule.points[:, 0]**a
                                   * rule.points[:, 1]**b))
                ok = ok and abs(got - exact) <= 1e-13
    for n in range(1, 11):
        rule = edge_quadrature(n)
        for p in range(2 * n):
            got = float(np.sum(rule.weights * rule.points**p))
            ok = ok and abs(got - 1.0 / (p + 1)) <= 1e-13
    rng = np.random.default_rng(3)
    for N in (1, 2, 3, 4):
        bas = nodal_basis(N)
        V = bas.eval_basis(bas.nodes)
        ok = ok and np.max(np.abs(V - np.eye(bas.n_p))) <= 1e-10
        # derivative checks against central differences
        pts = rng.uniform(0.1, 0.4, size=(5, 2))
        step = 1e-6
        for p in pts:
            grad = bas.eval_grad(p[None, :])[0]
            fx = (bas.eval_basis([p + [step, 0]])[0]
                  - bas.eval_basis([p - [step, 0]])[0]) / (2 * step)
            fy = (bas.eval_basis([p + [0, step]])[0]
                  - bas.eval_basis([p - [0, step]])[0]) / (2 * step)
            scale = np.maximum(1.0, np.abs(grad))
            ok = ok and np.max(np.abs(grad[:, 0] - fx) / scale[:, 0]) <= 1e-6
            ok = ok and np.max(np.abs(grad[:, 1] - fy) / scale[:, 1]) <= 1e-6
        hstep = 1e-5
        for p in pts:
            hess = bas.eval_hess(p[None, :])[0]
            v0 = bas.eval_basis([p])[0]
            fxx = (bas.eval_basis([p + [hstep, 0]])[0] - 2 * v0
                   + bas.eval_basis([p - [hstep, 0]])[0]) / hstep**2
            scale = np.maximum(1.0, np.abs(hess[:, 0]))
            ok = ok and np.max(np.abs(hess[:, 0] - fxx) / scale) <= 1e-6 * 10
    report(7, "quadrature and basis suite", ok)


def test_criterion_08_assembly_structure():
    from test_assembly import diffusion_problem, global_polynomial_nodal_vector

    tri = make_mesh("disk", 2)
    bas = nodal_basis(2)
    spec = DGSystemSpec(N=2)
    n = tri.n_elements * bas.n_p
    prob0 = diffusion_problem()

    # SIP symmetry with b = 0 (volume + faces + boundary, homogeneous data)
    rows, cols, vals, _ = assemble_volume(prob0, tri, bas, spec)
    fr, fc, fv = assemble_interior_faces(tri, bas, spec, None)
    g0 = {int(k): np.zeros(3) for k in tri.boundary_elements}
    br, bc, bv, _ = assemble_boundary_faces_classical(tri, bas, spec, g0, None)
    A = linsolve.to_compressed(np.concatenate((rows, fr, br)),
                               np.concatenate((cols, fc, bc)),
                               np.concatenate((vals, fv, bv)), n).csr.toarray()
    ok = np.max(np.abs(A - A.T)) <= 1e-12 * np.max(np.abs(A))

    # zero jump-driven interior-face residual for a globally smooth input
    def u_fn(x, y):
        return 1.0 - x + 2 * y + x * y

    def grad_fn(x, y):
        return np.stack((-1.0 + y, 2.0 + x), axis=-1)

    u = global_polynomial_nodal_vector(tri, bas, u_fn)
    fr, fc, fv = assemble_interior_faces(tri, bas, spec, None)
    Aface = linsolve.to_compressed(fr, fc, fv, n)
    applied = Aface.matvec(u.ravel())
    rule = edge_quadrature(spec.edge_points or 4)
    expected = np.zeros(n)
    for e in tri.interior_edges:
        va, vb = tri.vertices[tri.edge_vertices[e]]
        X = va[None, :] + rule.points[:, None] * (vb - va)[None, :]
        W = rule.weights * tri.edge_length[e]
        nrm = tri.edge_normal[e]
        gu = grad_fn(X[:, 0], X[:, 1]) @ nrm
        for k, sgn in ((tri.edge_left[e], 1.0), (tri.edge_right[e], -1.0)):
            amap = AffineMap.from_vertices(tri.element_vertices(int(k)))
            phi = bas.eval_basis(amap.to_reference(X))
            expected[int(k) * bas.n_p:(int(k) + 1) * bas.n_p] += \
                -sgn * phi.T @ (W * gu)
    scale = max(1.0, float(np.max(np.abs(expected))))
    ok = ok and np.max(np.abs(applied - expected)) / scale <= 1e-12

    # doubling eta0 doubles the penalty sub-block
    def faces(eta0):
        r, c, v = assemble_interior_faces(tri, bas,
                                          DGSystemSpec(N=2, eta0=eta0), None)
        return linsolve.to_compressed(r, c, v, n).csr

    A1, A2, A4 = faces(1.0), faces(2.0), faces(4.0)
    diff = ((A4 - A2) - 2.0 * (A2 - A1)).toarray()
    ok = ok and np.max(np.abs(diff)) <= 1e-12 * np.max(np.abs(A2.toarray()))
    report(8, "assembly structure", ok)


def test_criterion_09_source_term_oracle():
    from test_problems import fd_gradient, fd_laplacian, sample_interior

    rng = np.random.default_rng(11)
    ok = True
    for kind in ("disk", "annulus", "rose"):
        for case in (1, 2, 3):
            prob = make_case(kind, case)
            pts = sample_interior(kind, 1000, rng)
            x, y = pts[:, 0], pts[:, 1]
            gx, gy = fd_gradient(prob.u, x, y)
            lap = fd_laplacian(prob.u, x, y)
            f_fd = (-lap + prob.b1(x, y) * gx + prob.b2(x, y) * gy
                    + (prob.div_b(x, y) + prob.c(x, y)) * prob.u(x, y))
            rel = np.abs(prob.f(x, y) - f_fd) / np.maximum(1.0,
                                                           np.abs(prob.f(x, y)))
            worst = float(np.max(rel))
            ok = ok and worst <= 1e-5
    report(9, "source-term oracle", ok)


def test_criterion_10_iterative_global_agreement():
    dom = make_domain("disk")
    tri = make_mesh("disk", 4)
    bas = nodal_basis(2)
    prob = make_case("disk", 1)
    it = solve_rod_iterative(prob, tri, dom, bas,
                             DGSystemSpec(N=2, method="rod_iterative",
                                          stop_tol=1e-12))
    gl = solve_rod_global(prob, tri, dom, bas, DGSystemSpec(N=2))
    e_it = analysis.l2_error(it.u, prob, tri, bas)
    e_gl = analysis.l2_error(gl.u, prob, tri, bas)
    ratio = e_it / e_gl
    print(f"\n  E2 iterative={e_it:.3e} global={e_gl:.3e} "
          f"ratio={ratio:.3f} iterations={it.iterations}")
    ok = 0.5 <= ratio <= 2.0 and it.iterations <= 50
    report(10, "iterative/global agreement", ok)
