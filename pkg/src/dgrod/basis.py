"""Nodal Lagrange basis on the reference triangle, quadrature, affine maps.

The reference triangle is the unit simplex {(xi, eta): xi, eta >= 0,
xi + eta <= 1} with equispaced principal-lattice nodes.  Evaluation goes
through an orthogonal modal basis (Jacobi polynomials in collapsed
coordinates) and a generalized Vandermonde transform, which keeps the
Lagrange property well conditioned through degree 4 and extends cleanly to
points outside the triangle (the boundary-projection construction needs
polynomial extrapolation there).

Quadrature: triangle rules are collapsed Gauss-Legendre x Gauss-Jacobi
products, exact for any requested total degree with positive weights; edge
rules are Gauss-Legendre on [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi, roots_jacobi, roots_legendre

MAX_DEGREE = 4


@dataclass(frozen=True)
class QuadratureRule:
    """Points, weights, and the guaranteed polynomial exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int


@dataclass(frozen=True)
class AffineMap:
    """Affine reference-to-physical map of a straight-sided triangle."""

    vertices: np.ndarray      # (3, 2)
    jacobian: np.ndarray      # (2, 2)
    inv_jacobian: np.ndarray  # (2, 2)
    det: float                # = 2 * area > 0

    @classmethod
    def from_vertices(cls, verts) -> "AffineMap":
        verts = np.asarray(verts, dtype=float)
        J = np.column_stack((verts[1] - verts[0], verts[2] - verts[0]))
        det = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
        if det <= 0.0:
            raise ValueError("triangle is not positively oriented")
        inv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / det
        return cls(vertices=verts, jacobian=J, inv_jacobian=inv, det=det)

    def to_physical(self, ref_pts) -> np.ndarray:
        ref_pts = np.asarray(ref_pts, dtype=float)
        return ref_pts @ self.jacobian.T + self.vertices[0]

    def to_reference(self, phys_pts) -> np.ndarray:
        phys_pts = np.asarray(phys_pts, dtype=float)
        return (phys_pts - self.vertices[0]) @ self.inv_jacobian.T


def _homogenized_legendre(N, u, w):
    """Tables of H_m = P_m(a) * w^m and its partials, m = 0..N.

    ``u = (2r + s + 1)/2`` and ``w = (1 - s)/2`` in biunit coordinates; the
    Legendre three-term recurrence survives the homogenization, so H_m and
    all its derivatives are polynomial-stable anywhere in the plane.
    Returns dict of arrays keyed by '', 'r', 's', 'rr', 'rs', 'ss', each of
    shape (N+1, npts).
    """
    n = u.shape[0]
    ur, us = 1.0, 0.5
    wr, ws = 0.0, -0.5
    H = {key: np.zeros((N + 1, n)) for key in ("", "r", "s", "rr", "rs", "ss")}
    H[""][0] = 1.0
    if N >= 1:
        H[""][1] = u
        H["r"][1] = ur
        H["s"][1] = us
    for m in range(1, N):
        c1, c2 = (2 * m + 1) / (m + 1), m / (m + 1)
        Hm, Hp = {k: H[k][m] for k in H}, {k: H[k][m - 1] for k in H}
        w2 = w * w
        H[""][m + 1] = c1 * u * Hm[""] - c2 * w2 * Hp[""]
        H["r"][m + 1] = c1 * (ur * Hm[""] + u * Hm["r"]) - c2 * (
            2 * w * wr * Hp[""] + w2 * Hp["r"])
        H["s"][m + 1] = c1 * (us * Hm[""] + u * Hm["s"]) - c2 * (
            2 * w * ws * Hp[""] + w2 * Hp["s"])
        H["rr"][m + 1] = c1 * (2 * ur * Hm["r"] + u * Hm["rr"]) - c2 * (
            2 * wr * wr * Hp[""] + 4 * w * wr * Hp["r"] + w2 * Hp["rr"])
        H["rs"][m + 1] = c1 * (ur * Hm["s"] + us * Hm["r"] + u * Hm["rs"]) - c2 * (
            2 * wr * ws * Hp[""] + 2 * w * ws * Hp["r"] + 2 * w * wr * Hp["s"]
            + w2 * Hp["rs"])
        H["ss"][m + 1] = c1 * (2 * us * Hm["s"] + u * Hm["ss"]) - c2 * (
            2 * ws * ws * Hp[""] + 4 * w * ws * Hp["s"] + w2 * Hp["ss"])
    return H


def _modal_tables(N, pts):
    """Evaluate the orthonormal modal basis and derivatives at unit-triangle points.

    Returns arrays (npts, N_p) for values, d/dxi, d/deta, and the three
    second derivatives, with modes (m, n), m + n <= N, ordered n-major.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    r = 2.0 * pts[:, 0] - 1.0
    s = 2.0 * pts[:, 1] - 1.0
    u = (2.0 * r + s + 1.0) / 2.0
    w = (1.0 - s) / 2.0
    H = _homogenized_legendre(N, u, w)

    npts = pts.shape[0]
    n_p = (N + 1) * (N + 2) // 2
    out = {k: np.empty((npts, n_p)) for k in ("v", "x", "y", "xx", "xy", "yy")}
    col = 0
    for m in range(N + 1):
        a = 2 * m + 1
        for q in range(N - m + 1):
            J = eval_jacobi(q, a, 0, s)
            if q >= 1:
                Jp = 0.5 * (q + a + 1) * eval_jacobi(q - 1, a + 1, 1, s)
            else:
                Jp = np.zeros_like(s)
            if q >= 2:
                Jpp = 0.25 * (q + a + 1) * (q + a + 2) * eval_jacobi(
                    q - 2, a + 2, 2, s)
            else:
                Jpp = np.zeros_like(s)
            c = 0.5 * math.sqrt((2 * m + 1) * (2 * q + 2 * m + 2))
            v = H[""][m] * J
            vr = H["r"][m] * J
            vs = H["s"][m] * J + H[""][m] * Jp
            vrr = H["rr"][m] * J
            vrs = H["rs"][m] * J + H["r"][m] * Jp
            vss = H["ss"][m] * J + 2.0 * H["s"][m] * Jp + H[""][m] * Jpp
            # Unit -> biunit chain rule: d/dxi = 2 d/dr, d/deta = 2 d/ds.
            out["v"][:, col] = c * v
            out["x"][:, col] = 2.0 * c * vr
            out["y"][:, col] = 2.0 * c * vs
            out["xx"][:, col] = 4.0 * c * vrr
            out["xy"][:, col] = 4.0 * c * vrs
            out["yy"][:, col] = 4.0 * c * vss
            col += 1
    return out


def reference_nodes(N: int) -> np.ndarray:
    """Equispaced principal-lattice nodes, lattice rows bottom-up."""
    if not 1 <= N <= MAX_DEGREE:
        raise ValueError(f"degree must be in 1..{MAX_DEGREE}")
    return np.array([(i / N, j / N)
                     for j in range(N + 1) for i in range(N + 1 - j)])


class NodalBasis:
    """Lagrange P_N basis on the reference triangle (equispaced nodes).

    Evaluation, gradients and second derivatives are available at arbitrary
    points in the plane.  Edge node index lists follow the reference edges
    (0,1) -> (1,0) -> (0,1) -> back, each ordered from the edge's first
    vertex to its second.
    """

    def __init__(self, N: int):
        if not 1 <= N <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}")
        self.N = N
        self.nodes = reference_nodes(N)
        self.n_p = len(self.nodes)

        V = _modal_tables(N, self.nodes)["v"]
        self._vinv = np.linalg.inv(V)

        # Lattice coordinates (i, j) per node for edge bookkeeping.
        lattice = [(i, j) for j in range(N + 1) for i in range(N + 1 - j)]
        index = {ij: idx for idx, ij in enumerate(lattice)}
        self.vertex_nodes = (index[(0, 0)], index[(N, 0)], index[(0, N)])
        self.edge_nodes = (
            [index[(i, 0)] for i in range(N + 1)],            # (0,0) -> (1,0)
            [index[(N - j, j)] for j in range(N + 1)],        # (1,0) -> (0,1)
            [index[(0, N - j)] for j in range(N + 1)],        # (0,1) -> (0,0)
        )

    def eval_basis(self, pts) -> np.ndarray:
        """Lagrange values at ``pts``; shape (npts, N_p)."""
        return _modal_tables(self.N, pts)["v"] @ self._vinv

    def eval_grad(self, pts) -> np.ndarray:
        """Reference gradients at ``pts``; shape (npts, N_p, 2)."""
        t = _modal_tables(self.N, pts)
        return np.stack((t["x"] @ self._vinv, t["y"] @ self._vinv), axis=-1)

    def eval_hess(self, pts) -> np.ndarray:
        """Reference second derivatives (xx, xy, yy) at ``pts``; (npts, N_p, 3)."""
        t = _modal_tables(self.N, pts)
        return np.stack((t["xx"] @ self._vinv, t["xy"] @ self._vinv,
                         t["yy"] @ self._vinv), axis=-1)


@lru_cache(maxsize=None)
def nodal_basis(N: int) -> NodalBasis:
    return NodalBasis(N)


@lru_cache(maxsize=None)
def volume_quadrature(degree: int) -> QuadratureRule:
    """Triangle rule exact for total degree <= ``degree``, positive weights.

    Built as a collapsed Gauss-Legendre (xi direction) x Gauss-Jacobi
    (weight 1 - eta) product, so exactness holds by construction for any
    supported degree.
    """
    if not 1 <= degree <= 12:
        raise ValueError("volume quadrature supports degrees 1..12")
    n = (degree + 2) // 2
    xg, wg = roots_legendre(n)
    x = 0.5 * (xg + 1.0)
    wx = 0.5 * wg
    yg, wyg = roots_jacobi(n, 1.0, 0.0)
    y = 0.5 * (yg + 1.0)
    wy = 0.25 * wyg
    pts = np.array([(xi * (1.0 - eta), eta) for eta in y for xi in x])
    wts = np.array([a * b for b in wy for a in wx])
    return QuadratureRule(points=pts, weights=wts, exactness_degree=degree)


@lru_cache(maxsize=None)
def edge_quadrature(n: int) -> QuadratureRule:
    """Gauss-Legendre on [0, 1] with ``n`` points (exact to degree 2n - 1)."""
    if not 1 <= n <= 10:
        raise ValueError("edge quadrature supports 1..10 points")
    xg, wg = roots_legendre(n)
    return QuadratureRule(points=0.5 * (xg + 1.0), weights=0.5 * wg,
                          exactness_degree=2 * n - 1)


def element_mass_matrix(basis: NodalBasis, amap: AffineMap) -> np.ndarray:
    """Local mass matrix of the physical element (symmetric positive definite)."""
    rule = volume_quadrature(2 * basis.N)
    phi = basis.eval_basis(rule.points)
    return (phi * (rule.weights * amap.det)[:, None]).T @ phi
