"""Constrained trial/test spaces realized through boundary-point constraints.

For every element with an edge on the computational boundary, the trial
space requires the local polynomial to match the Dirichlet data at N+1
points of the *physical* (curved) boundary: the two edge vertices (which
lie on the curve) plus the ray projections of the N-1 interior edge nodes
through the element's off-edge vertex.  The test space instead vanishes on
the computational boundary edge.

This module computes the projected points, the constraint matrix
``C[r, j] = basis_j(P_r)`` (polynomial extrapolation when a projection
falls outside the element), the standalone least-squares reconstruction
(the Euclidean-closest coefficient vector satisfying the constraints), and
the elimination map expressing the edge-node values of a constrained
polynomial through its remaining nodal values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .basis import AffineMap, NodalBasis
from .geometry import CurvedDomain, ray_boundary_intersect
from .mesh import Triangulation


class RankDeficientConstraints(Exception):
    """The constraint matrix does not have full row rank."""


class IllConditionedConstraintBlock(Exception):
    """The edge-node constraint block is not safely invertible."""

    def __init__(self, element: int, cond: float):
        super().__init__(f"element {element}: constraint block condition "
                         f"number {cond:.3e} exceeds 1e8")
        self.element = element
        self.cond = cond


@dataclass
class ElementConstraint:
    """Boundary constraint data of one boundary element."""

    element: int
    edge_nodes: np.ndarray       # local indices of the N+1 nodes on the boundary edge
    interior_nodes: np.ndarray   # the remaining m_N local indices
    points: np.ndarray           # (N+1, 2) physical boundary points P_1..P_{N+1}
    C: np.ndarray                # (N+1, N_p) constraint matrix
    d: np.ndarray                # (N+1,) boundary data at the points
    G: np.ndarray                # (N+1, m_N) elimination map
    g0: np.ndarray               # (N+1,) affine part of the elimination map
    cond_edge_block: float


@dataclass
class BoundaryConstraintSet:
    """Per-boundary-element constraints for a whole triangulation."""

    N: int
    by_element: dict[int, ElementConstraint] = field(default_factory=dict)

    @property
    def n_constrained(self) -> int:
        return len(self.by_element)

    def dofs_removed(self) -> int:
        return self.n_constrained * (self.N + 1)


def boundary_edge_local_index(tri: Triangulation, k: int) -> int:
    """Which local edge (0: v0v1, 1: v1v2, 2: v2v0) lies on the boundary."""
    e = tri.boundary_edge_of_elem[k]
    if e < 0:
        raise ValueError(f"element {k} has no boundary edge")
    return int(np.flatnonzero(tri.elem_edges[k] == e)[0])


def edge_node_points(tri: Triangulation, k: int, basis: NodalBasis,
                     amap: AffineMap) -> tuple[np.ndarray, np.ndarray]:
    """Local indices and physical coordinates of the boundary-edge nodes.

    Ordered along the edge from its first vertex to its second (element's
    CCW orientation).
    """
    loc = boundary_edge_local_index(tri, k)
    ids = np.asarray(basis.edge_nodes[loc])
    return ids, amap.to_physical(basis.nodes[ids])


def projected_points(k: int, tri: Triangulation, domain: CurvedDomain,
                     basis: NodalBasis) -> np.ndarray:
    """Physical boundary points P_1..P_{N+1} for boundary element ``k``.

    The N-1 interior edge nodes are projected onto the curve along rays from
    the off-edge vertex; the two edge vertices already lie on the curve and
    pass through unchanged.  Ordered: interior projections first (edge
    order), then the two vertices.
    """
    amap = AffineMap.from_vertices(tri.element_vertices(k))
    ids, phys = edge_node_points(tri, k, basis, amap)
    origin = tri.vertices[tri.opposite_vertex[k]]
    pts = [ray_boundary_intersect(domain, origin, phys[i]).point
           for i in range(1, basis.N)]
    pts.append(tuple(phys[0]))
    pts.append(tuple(phys[-1]))
    return np.asarray(pts)


def constraint_matrix(points: np.ndarray, basis: NodalBasis,
                      amap: AffineMap) -> np.ndarray:
    """C[r, j] = value of physical basis function j at boundary point r."""
    return basis.eval_basis(amap.to_reference(points))


def rod_reconstruct(u: np.ndarray, C: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Coefficients closest to ``u`` (Euclidean) satisfying ``C a = d``.

    Solves the saddle-point first-order conditions; equivalently
    ``a = u - C^T (C C^T)^{-1} (C u - d)``.  With feasible ``u`` this
    returns ``u`` itself, and with ``d = 0`` it is an orthogonal projector.
    """
    u = np.asarray(u, dtype=float)
    gram = C @ C.T
    try:
        f = cho_factor(gram)
    except np.linalg.LinAlgError:
        raise RankDeficientConstraints(
            "constraint rows are linearly dependent") from None
    return u - C.T @ cho_solve(f, C @ u - d)


def elimination_map(C: np.ndarray, d: np.ndarray, edge_nodes, interior_nodes,
                    element: int = -1) -> tuple[np.ndarray, np.ndarray, float]:
    """Express edge-node values through interior-node values.

    Splitting ``C a = d`` into edge (E) and interior (I) node columns,
    returns ``(G, g0, cond)`` with ``a_E = G a_I + g0`` where
    ``G = -C_EE^{-1} C_EI`` and ``g0 = C_EE^{-1} d``.

    Raises :class:`IllConditionedConstraintBlock` when cond(C_EE) > 1e8.
    """
    C_ee = C[:, edge_nodes]
    C_ei = C[:, interior_nodes]
    cond = float(np.linalg.cond(C_ee))
    if not np.isfinite(cond) or cond > 1e8:
        raise IllConditionedConstraintBlock(element, cond)
    G = -np.linalg.solve(C_ee, C_ei)
    g0 = np.linalg.solve(C_ee, np.asarray(d, dtype=float))
    return G, g0, cond


def build_boundary_constraints(tri: Triangulation, domain: CurvedDomain,
                               basis: NodalBasis,
                               dirichlet=None) -> BoundaryConstraintSet:
    """Constraints for every boundary element of the mesh.

    ``dirichlet`` is a callable ``(x, y) -> value`` evaluated at the
    physical boundary points (``None`` means homogeneous data).
    """
    out = BoundaryConstraintSet(N=basis.N)
    for k in tri.boundary_elements:
        if tri.n_boundary_edges_of_elem[k] != 1:
            raise ValueError(f"element {k} has "
                             f"{tri.n_boundary_edges_of_elem[k]} boundary edges")
        amap = AffineMap.from_vertices(tri.element_vertices(k))
        ids, _ = edge_node_points(tri, k, basis, amap)
        pts = projected_points(k, tri, domain, basis)
        C = constraint_matrix(pts, basis, amap)
        if dirichlet is None:
            d = np.zeros(basis.N + 1)
        else:
            d = np.asarray(dirichlet(pts[:, 0], pts[:, 1]), dtype=float)
        # Edge-node columns ordered to match the points: interior edge nodes
        # first, then the two vertices.
        edge_cols = np.concatenate((ids[1:-1], [ids[0], ids[-1]]))
        interior = np.setdiff1d(np.arange(basis.n_p), ids)
        G, g0, cond = elimination_map(C, d, edge_cols, interior, element=int(k))
        out.by_element[int(k)] = ElementConstraint(
            element=int(k), edge_nodes=edge_cols, interior_nodes=interior,
            points=pts, C=C, d=d, G=G, g0=g0, cond_edge_block=cond)
    return out
