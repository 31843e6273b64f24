import numpy as np
import pytest

from dgrod import analysis, assembly, basis, geometry, mesh, problems

GENERATORS = {
    "disk": mesh.generate_disk_mesh,
    "annulus": mesh.generate_annulus_mesh,
    "rose": mesh.generate_rose_mesh,
}


def make_domain(kind):
    if kind == "disk":
        return geometry.disk(1.0)
    if kind == "annulus":
        return geometry.annulus(0.5, 1.0)
    return geometry.rose(0.5, 1.0, petals=8, magnitude=0.1)


def make_mesh(kind, rings):
    return GENERATORS[kind](make_domain(kind), rings)


SOLVERS = {
    "classical": assembly.solve_classical,
    "rod_global": assembly.solve_rod_global,
    "rod_iterative": assembly.solve_rod_iterative,
}


def run_levels(kind, N, method, levels, coeff_case=1, eta0=10.0):
    """Solve a refinement ladder; returns list of (K, h, E2) and the orders."""
    domain = make_domain(kind)
    problem = problems.make_case(kind, coeff_case)
    bas = basis.nodal_basis(N)
    rows = []
    for rings in levels:
        tri = GENERATORS[kind](domain, rings)
        spec = assembly.DGSystemSpec(N=N, eta0=eta0, method=method)
        result = SOLVERS[method](problem, tri, domain, bas, spec)
        e2 = analysis.l2_error(result.u, problem, tri, bas)
        rows.append((tri.n_elements, tri.h, e2))
    orders = [analysis.convergence_order(rows[i - 1][2], rows[i][2],
                                         rows[i - 1][1], rows[i][1])
              for i in range(1, len(rows))]
    return rows, orders


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
