"""Assembly of the DG bilinear form and the three solvable systems.

The discretization combines symmetric interior penalty diffusion with
upwind-stabilized advection.  Volume and interior-face contributions are
shared by all methods; the methods differ only in how boundary data enters:

* ``classical``      -- boundary-edge face terms with nodal Dirichlet data
  transferred from the physical boundary, full trial/test space;
* ``rod_global``     -- no boundary-edge terms at all: the trial space is
  constrained to match the data at projected physical-boundary points, the
  test space vanishes on the computational boundary, and the square reduced
  system is obtained by eliminating the boundary-edge nodal values (any
  would-be boundary integrals vanish because the test trace is zero there);
* ``rod_iterative``  -- alternates the classical solve with the boundary
  reconstruction until the boundary data stops changing.

Global degrees of freedom are numbered ``element * N_p + local_node``.
Face traces are matched by physical quadrature points: each side pulls the
same physical points back through its own affine map, which is robust to
any edge orientation convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linsolve
from .basis import NodalBasis, edge_quadrature, volume_quadrature
from .geometry import CurvedDomain
from .mesh import Triangulation
from .problems import ManufacturedProblem
from .rodspace import (BoundaryConstraintSet, boundary_edge_local_index,
                       build_boundary_constraints, projected_points,
                       rod_reconstruct)

METHODS = ("classical", "rod_global", "rod_iterative")


class TraceMismatch(Exception):
    """The two face parameterizations disagree at a quadrature point."""


class NonConvergence(Exception):
    """The iterative variant did not reach the stopping tolerance."""

    def __init__(self, trace: list[float], max_iter: int):
        super().__init__(f"boundary data still changing by {trace[-1]:.3e} "
                         f"after {max_iter} iterations")
        self.trace = trace


@dataclass(frozen=True)
class DGSystemSpec:
    """Discretization parameters shared by the assembly routines."""

    N: int
    eta0: float = 10.0
    method: str = "rod_global"
    volume_degree: int | None = None   # default 2N + 3
    edge_points: int | None = None     # default N + 2
    max_iter: int = 50
    stop_tol: float = 1e-12

    def __post_init__(self):
        if self.eta0 <= 0.0:
            raise ValueError("penalty base must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    @property
    def eta(self) -> float:
        """Effective penalty: eta0 * (N+1)^2 (standard trace-inequality scaling)."""
        return self.eta0 * (self.N + 1) ** 2

    def volume_rule(self):
        return volume_quadrature(self.volume_degree or 2 * self.N + 3)

    def edge_rule(self):
        return edge_quadrature(self.edge_points or self.N + 2)


@dataclass
class AssembledSystem:
    """Triplet-form global system, plus the reduced system for rod_global."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    load: np.ndarray
    matrix_red: linsolve.SparseMatrix | None = None
    rhs_red: np.ndarray | None = None
    trial_map: sp.csr_matrix | None = None
    test_map: sp.csr_matrix | None = None
    lift: np.ndarray | None = None

    def full_matrix(self) -> linsolve.SparseMatrix:
        return linsolve.to_compressed(self.rows, self.cols, self.vals, self.n)

    def recover_full(self, u_red: np.ndarray) -> np.ndarray:
        return self.trial_map @ u_red + self.lift


@dataclass
class SolveResult:
    """Nodal solution (element-major) and solver diagnostics."""

    u: np.ndarray                     # (K, N_p)
    method: str
    iterations: int = 0
    trace: list[float] = field(default_factory=list)
    residual: float = 0.0             # achieved relative linear-solve residual


def _rel_residual(A: linsolve.SparseMatrix, x, rhs) -> float:
    nb = float(np.linalg.norm(rhs))
    if nb == 0.0:
        return 0.0
    return float(np.linalg.norm(rhs - A.matvec(x))) / nb


def _element_geometry(tri: Triangulation):
    """Vectorized affine-map data: v0, Jacobians, determinants, inverses."""
    v = tri.vertices[tri.triangles]
    J = np.stack((v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJ = np.empty_like(J)
    invJ[:, 0, 0] = J[:, 1, 1] / det
    invJ[:, 0, 1] = -J[:, 0, 1] / det
    invJ[:, 1, 0] = -J[:, 1, 0] / det
    invJ[:, 1, 1] = J[:, 0, 0] / det
    return v[:, 0, :], J, det, invJ


def _block_triplets(elem_rows, elem_cols, blocks):
    """Flatten per-element dense blocks into triplet arrays."""
    rows = np.broadcast_to(elem_rows[..., :, None], blocks.shape)
    cols = np.broadcast_to(elem_cols[..., None, :], blocks.shape)
    return rows.ravel(), cols.ravel(), blocks.ravel()


def assemble_volume(problem: ManufacturedProblem, tri: Triangulation,
                    basis: NodalBasis, spec: DGSystemSpec):
    """Volume blocks (diffusion, advection, reaction) and the source load.

    Returns ``(rows, cols, vals, load)`` with ``load`` over all global DOFs.
    """
    rule = spec.volume_rule()
    phi = basis.eval_basis(rule.points)            # (Q, Np)
    dphi = basis.eval_grad(rule.points)            # (Q, Np, 2)
    v0, J, det, invJ = _element_geometry(tri)
    K, n_p = tri.n_elements, basis.n_p

    X = np.einsum('kij,qj->kqi', J, rule.points) + v0[:, None, :]
    gp = np.einsum('qpj,kji->kqpi', dphi, invJ)    # physical gradients
    wdet = rule.weights[None, :] * det[:, None]    # (K, Q)

    x, y = X[..., 0], X[..., 1]
    b1, b2 = problem.b1(x, y), problem.b2(x, y)
    cc, ff = problem.c(x, y), problem.f(x, y)

    blocks = np.einsum('kq,kqid,kqjd->kij', wdet, gp, gp)
    bgrad = b1[..., None] * gp[..., 0] + b2[..., None] * gp[..., 1]
    blocks -= np.einsum('kq,kqi,qj->kij', wdet, bgrad, phi)
    blocks += np.einsum('kq,qi,qj->kij', wdet * cc, phi, phi)

    load = np.zeros(K * n_p)
    load_k = np.einsum('kq,qi->ki', wdet * ff, phi)
    load[:] = load_k.ravel()

    gdofs = (np.arange(K)[:, None] * n_p + np.arange(n_p)[None, :])
    rows, cols, vals = _block_triplets(gdofs, gdofs, blocks)
    return rows, cols, vals, load


def _edge_traces(tri, basis, spec, edge_ids):
    """Physical quadrature data on a set of edges, pulled back per side.

    Returns a dict with quadrature points X (E, Q, 2), arc weights W (E, Q),
    per-side basis traces and normal gradients, and edge metadata.  Only the
    left side is populated for boundary edges.
    """
    rule = spec.edge_rule()
    v0, _, _, invJ = _element_geometry(tri)
    va = tri.vertices[tri.edge_vertices[edge_ids, 0]]
    vb = tri.vertices[tri.edge_vertices[edge_ids, 1]]
    t = rule.points
    X = va[:, None, :] + t[None, :, None] * (vb - va)[:, None, :]
    he = tri.edge_length[edge_ids]
    W = rule.weights[None, :] * he[:, None]
    nrm = tri.edge_normal[edge_ids]

    h = tri.h
    E, Q = X.shape[0], X.shape[1]

    def side(elems):
        iJ = invJ[elems]
        ref = np.einsum('eij,eqj->eqi', iJ, X - v0[elems][:, None, :])
        J = np.stack((tri.vertices[tri.triangles[elems, 1]]
                      - tri.vertices[tri.triangles[elems, 0]],
                      tri.vertices[tri.triangles[elems, 2]]
                      - tri.vertices[tri.triangles[elems, 0]]), axis=-1)
        back = np.einsum('eij,eqj->eqi', J, ref) + v0[elems][:, None, :]
        if np.max(np.abs(back - X)) > 1e-12 * max(h, 1.0):
            raise TraceMismatch("face parameterizations disagree at "
                                "quadrature points")
        flat = ref.reshape(-1, 2)
        tr = basis.eval_basis(flat).reshape(E, Q, basis.n_p)
        gref = basis.eval_grad(flat).reshape(E, Q, basis.n_p, 2)
        gphys = np.einsum('eqpj,eji->eqpi', gref, iJ)
        gn = np.einsum('eqpi,ei->eqp', gphys, nrm)
        return tr, gn

    return dict(X=X, W=W, he=he, nrm=nrm, side=side, E=E, Q=Q)


def assemble_interior_faces(tri: Triangulation, basis: NodalBasis,
                            spec: DGSystemSpec, b=None):
    """Interior-face coupling blocks (consistency, penalty, upwind).

    ``b`` is an optional advection field given as a pair of callables
    ``(b1, b2)``; ``None`` means pure diffusion-reaction.
    Returns ``(rows, cols, vals)``.
    """
    eidx = tri.interior_edges
    if len(eidx) == 0:
        return (np.empty(0, dtype=int),) * 2 + (np.empty(0),)
    data = _edge_traces(tri, basis, spec, eidx)
    kL, kR = tri.edge_left[eidx], tri.edge_right[eidx]

    trL, gnL = data["side"](kL)
    trR, gnR = data["side"](kR)
    tr = np.stack((trL, trR), axis=2)   # (E, Q, side, Np)
    gn = np.stack((gnL, gnR), axis=2)
    sg = np.array([1.0, -1.0])
    W = data["W"]
    eta_he = spec.eta / data["he"]

    if b is not None:
        x, y = data["X"][..., 0], data["X"][..., 1]
        bn = (b[0](x, y) * data["nrm"][:, None, 0]
              + b[1](x, y) * data["nrm"][:, None, 1])
    else:
        bn = np.zeros_like(W)

    blocks = -0.5 * np.einsum('eq,t,eqtj,eqsi->esitj', W, sg, tr, gn)
    blocks += -0.5 * np.einsum('eq,s,eqsi,eqtj->esitj', W, sg, tr, gn)
    blocks += np.einsum('eq,s,t,eqsi,eqtj->esitj', W * eta_he[:, None],
                        sg, sg, tr, tr)
    blocks += 0.5 * np.einsum('eq,s,eqsi,eqtj->esitj', W * bn, sg, tr, tr)
    blocks += 0.5 * np.einsum('eq,s,t,eqsi,eqtj->esitj', W * np.abs(bn),
                              sg, sg, tr, tr)

    n_p = basis.n_p
    elems = np.stack((kL, kR), axis=1)              # (E, 2)
    dofs = elems[:, :, None] * n_p + np.arange(n_p)  # (E, 2, Np)
    rows = np.broadcast_to(dofs[:, :, :, None, None], blocks.shape)
    cols = np.broadcast_to(dofs[:, None, None, :, :], blocks.shape)
    return rows.ravel(), cols.ravel(), blocks.ravel()


def classical_boundary_values(problem: ManufacturedProblem, tri: Triangulation,
                              domain: CurvedDomain,
                              basis: NodalBasis) -> dict[int, np.ndarray]:
    """Nodal Dirichlet data per boundary element, in boundary-edge node order.

    Every node on the boundary edge is mapped to the physical boundary (the
    vertices already lie there; interior edge nodes are ray-projected) and
    the exact Dirichlet data is evaluated at the mapped point.
    """
    N = basis.N
    out = {}
    for k in tri.boundary_elements:
        pts = projected_points(int(k), tri, domain, basis)
        vals = problem.u_D(pts[:, 0], pts[:, 1])
        edge_order = np.concatenate(([vals[N - 1]], vals[:N - 1], [vals[N]]))
        out[int(k)] = edge_order
    return out


def _boundary_face_data(tri, basis, spec, b=None):
    """Shared boundary-edge quadrature data for LHS blocks and g-dependent loads."""
    bedges = tri.boundary_edges
    data = _edge_traces(tri, basis, spec, bedges)
    kB = tri.edge_left[bedges]
    tr, gnm = data["side"](kB)
    W = data["W"]
    eta_he = spec.eta / data["he"]
    if b is not None:
        x, y = data["X"][..., 0], data["X"][..., 1]
        bn = (b[0](x, y) * data["nrm"][:, None, 0]
              + b[1](x, y) * data["nrm"][:, None, 1])
    else:
        bn = np.zeros_like(W)
    # Edge-node local indices per boundary element (edge order).
    ids = np.array([basis.edge_nodes[boundary_edge_local_index(tri, int(k))]
                    for k in kB])
    return dict(elems=kB, tr=tr, gn=gnm, W=W, eta_he=eta_he, bn=bn, ids=ids)


def _boundary_lhs_triplets(bdata, n_p):
    tr, gn, W = bdata["tr"], bdata["gn"], bdata["W"]
    Weta = W * bdata["eta_he"][:, None]
    blocks = -np.einsum('eq,eqj,eqi->eij', W, tr, gn)
    blocks -= np.einsum('eq,eqi,eqj->eij', W, tr, gn)
    blocks += np.einsum('eq,eqi,eqj->eij', Weta, tr, tr)
    dofs = bdata["elems"][:, None] * n_p + np.arange(n_p)
    return _block_triplets(dofs, dofs, blocks)


def _boundary_load(bdata, g_D, n: int, n_p: int):
    """Load contribution of the boundary data ``g_D`` (linear in the data)."""
    elems, ids = bdata["elems"], bdata["ids"]
    gfull = np.zeros((len(elems), n_p))
    for e, k in enumerate(elems):
        gfull[e, ids[e]] = g_D[int(k)]
    gq = np.einsum('eqp,ep->eq', bdata["tr"], gfull)
    W, tr, gn = bdata["W"], bdata["tr"], bdata["gn"]
    load_k = -np.einsum('eq,eqi->ei', W * gq, gn)
    load_k += np.einsum('eq,eqi->ei', W * gq * bdata["eta_he"][:, None], tr)
    load_k -= np.einsum('eq,eqi->ei', W * gq * bdata["bn"], tr)
    load = np.zeros(n)
    dofs = elems[:, None] * n_p + np.arange(n_p)
    np.add.at(load, dofs.ravel(), load_k.ravel())
    return load


def assemble_boundary_faces_classical(tri: Triangulation, basis: NodalBasis,
                                      spec: DGSystemSpec, g_D, b=None):
    """Boundary-edge LHS terms and the Dirichlet-data load increments.

    ``g_D`` maps boundary element index to its N+1 nodal values in
    boundary-edge node order.  Returns ``(rows, cols, vals, load)``.
    """
    n = tri.n_elements * basis.n_p
    bdata = _boundary_face_data(tri, basis, spec, b)
    rows, cols, vals = _boundary_lhs_triplets(bdata, basis.n_p)
    load = _boundary_load(bdata, g_D, n, basis.n_p)
    return rows, cols, vals, load


def build_rod_global_system(rows, cols, vals, load,
                            constraints: BoundaryConstraintSet,
                            tri: Triangulation,
                            basis: NodalBasis) -> AssembledSystem:
    """Reduce the volume+interior system to the constrained trial/test pair.

    Trial: full coefficient vector ``a = R_w a_red + lift`` where boundary
    edge-node values follow the elimination maps.  Test: boundary edge-node
    rows are dropped.  No boundary-edge face terms belong in this system.
    """
    n_p = basis.n_p
    n = tri.n_elements * n_p
    eliminated = np.zeros(n, dtype=bool)
    for k, con in constraints.by_element.items():
        eliminated[k * n_p + con.edge_nodes] = True
    free = ~eliminated
    n_red = int(free.sum())
    red_index = np.cumsum(free) - 1

    r_rows = [np.flatnonzero(free)]
    r_cols = [red_index[free]]
    r_vals = [np.ones(n_red)]
    lift = np.zeros(n)
    for k, con in constraints.by_element.items():
        gr = k * n_p + con.edge_nodes
        gc = red_index[k * n_p + con.interior_nodes]
        rr, cc = np.meshgrid(gr, gc, indexing="ij")
        r_rows.append(rr.ravel())
        r_cols.append(cc.ravel())
        r_vals.append(con.G.ravel())
        lift[gr] = con.g0

    test_map = sp.csr_matrix(
        (r_vals[0], (r_rows[0], r_cols[0])), shape=(n, n_red))
    trial_map = sp.csr_matrix(
        (np.concatenate(r_vals), (np.concatenate(r_rows), np.concatenate(r_cols))),
        shape=(n, n_red))

    A = linsolve.to_compressed(rows, cols, vals, n)
    A_red = (test_map.T @ A.csr @ trial_map).tocsr()
    A_red.sort_indices()
    rhs_red = test_map.T @ (load - A.csr @ lift)
    return AssembledSystem(
        n=n, rows=rows, cols=cols, vals=vals, load=load,
        matrix_red=linsolve.SparseMatrix(A_red), rhs_red=rhs_red,
        trial_map=trial_map, test_map=test_map, lift=lift)


def solve_classical(problem: ManufacturedProblem, tri: Triangulation,
                    domain: CurvedDomain, basis: NodalBasis,
                    spec: DGSystemSpec, solver_tol: float = 1e-11) -> SolveResult:
    """Classical DG solve with boundary data transferred to boundary nodes."""
    n = tri.n_elements * basis.n_p
    b = (problem.b1, problem.b2)
    rows, cols, vals, load = assemble_volume(problem, tri, basis, spec)
    fr, fc, fv = assemble_interior_faces(tri, basis, spec, b)
    g_D = classical_boundary_values(problem, tri, domain, basis)
    br, bc, bv, bload = assemble_boundary_faces_classical(tri, basis, spec, g_D, b)
    A = linsolve.to_compressed(np.concatenate((rows, fr, br)),
                               np.concatenate((cols, fc, bc)),
                               np.concatenate((vals, fv, bv)), n)
    rhs = load + bload
    x = linsolve.solve(A, rhs, tol=solver_tol)
    return SolveResult(u=x.reshape(tri.n_elements, basis.n_p),
                       method="classical", residual=_rel_residual(A, x, rhs))


def solve_rod_global(problem: ManufacturedProblem, tri: Triangulation,
                     domain: CurvedDomain, basis: NodalBasis,
                     spec: DGSystemSpec, solver_tol: float = 1e-11,
                     constraints: BoundaryConstraintSet | None = None) -> SolveResult:
    """One-shot constrained Petrov-Galerkin solve."""
    if constraints is None:
        constraints = build_boundary_constraints(tri, domain, basis,
                                                 dirichlet=problem.u_D)
    b = (problem.b1, problem.b2)
    rows, cols, vals, load = assemble_volume(problem, tri, basis, spec)
    fr, fc, fv = assemble_interior_faces(tri, basis, spec, b)
    system = build_rod_global_system(
        np.concatenate((rows, fr)), np.concatenate((cols, fc)),
        np.concatenate((vals, fv)), load, constraints, tri, basis)
    x_red = linsolve.solve(system.matrix_red, system.rhs_red, tol=solver_tol)
    u = system.recover_full(x_red)
    return SolveResult(u=u.reshape(tri.n_elements, basis.n_p),
                       method="rod_global",
                       residual=_rel_residual(system.matrix_red, x_red,
                                              system.rhs_red))


def solve_rod_iterative(problem: ManufacturedProblem, tri: Triangulation,
                        domain: CurvedDomain, basis: NodalBasis,
                        spec: DGSystemSpec, solver_tol: float = 1e-11,
                        constraints: BoundaryConstraintSet | None = None) -> SolveResult:
    """Alternate the classical solve with the boundary reconstruction.

    Starts from the classical nodal data; each pass reconstructs new
    boundary-edge data from the current solution and re-solves.  Stops when
    the boundary data changes by at most ``stop_tol`` in the max norm.
    Raises :class:`NonConvergence` (carrying the change trace) at
    ``max_iter``.
    """
    if constraints is None:
        constraints = build_boundary_constraints(tri, domain, basis,
                                                 dirichlet=problem.u_D)
    n_p = basis.n_p
    n = tri.n_elements * n_p
    b = (problem.b1, problem.b2)
    rows, cols, vals, load = assemble_volume(problem, tri, basis, spec)
    fr, fc, fv = assemble_interior_faces(tri, basis, spec, b)
    bdata = _boundary_face_data(tri, basis, spec, b)
    br, bc, bv = _boundary_lhs_triplets(bdata, n_p)
    A = linsolve.to_compressed(np.concatenate((rows, fr, br)),
                               np.concatenate((cols, fc, bc)),
                               np.concatenate((vals, fv, bv)), n)

    g = classical_boundary_values(problem, tri, domain, basis)
    edge_ids = {
        int(k): np.asarray(basis.edge_nodes[boundary_edge_local_index(tri, int(k))])
        for k in tri.boundary_elements}

    trace: list[float] = []
    for it in range(1, spec.max_iter + 1):
        rhs = load + _boundary_load(bdata, g, n, n_p)
        x = linsolve.solve(A, rhs, tol=solver_tol)
        u = x.reshape(tri.n_elements, n_p)
        g_new = {}
        delta = 0.0
        for k, con in constraints.by_element.items():
            a = rod_reconstruct(u[k], con.C, con.d)
            g_new[k] = a[edge_ids[k]]
            delta = max(delta, float(np.max(np.abs(g_new[k] - g[k]))))
        trace.append(delta)
        g = g_new
        if delta <= spec.stop_tol:
            return SolveResult(u=u, method="rod_iterative",
                               iterations=it, trace=trace,
                               residual=_rel_residual(A, x, rhs))
    raise NonConvergence(trace, spec.max_iter)
