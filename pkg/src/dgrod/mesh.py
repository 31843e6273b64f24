"""Conforming straight-sided triangulations of curved domains.

Provides deterministic built-in generators (disk, annulus, rose), a reader
for the Gmsh MSH 2.2 ASCII subset, edge-based connectivity with oriented
normals, and a validator that measures the mesh-quality quantities the
scheme relies on (element diameters, inradii, edge/diameter ratios,
boundary-vertex placement).

Conventions: triangles are counterclockwise; every interior edge stores one
unit normal pointing from its "left" element to its "right" element; a
boundary edge stores the outward normal of its only element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import INNER, OUTER, CurvedDomain

# Curve codes for Triangulation.edge_curve.
INTERIOR_EDGE = -1
CURVE_OUTER = 0
CURVE_INNER = 1
_CURVE_NAMES = {CURVE_OUTER: OUTER, CURVE_INNER: INNER}


class NonConformingMesh(Exception):
    """An edge is shared by more than two triangles."""


class UnsupportedVersion(Exception):
    """The MSH file is not ASCII version 2.2."""


class MalformedSection(Exception):
    """A section of the MSH file could not be parsed (carries a line number)."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NonTriangleElement(Exception):
    """The MSH file contains elements other than 2-node lines / 3-node triangles."""


@dataclass
class Triangulation:
    """Conforming triangle mesh with edge connectivity and metrics.

    Treated as immutable after construction.
    """

    vertices: np.ndarray        # (V, 2)
    triangles: np.ndarray       # (K, 3) CCW vertex indices
    edge_vertices: np.ndarray   # (E, 2)
    edge_left: np.ndarray       # (E,)  element owning the edge
    edge_right: np.ndarray      # (E,)  neighbour or -1 for boundary
    edge_normal: np.ndarray     # (E, 2) unit, left -> right / outward
    edge_length: np.ndarray     # (E,)
    edge_curve: np.ndarray      # (E,)  INTERIOR_EDGE / CURVE_OUTER / CURVE_INNER
    elem_edges: np.ndarray      # (K, 3) edge index of local edges (01, 12, 20)
    h_k: np.ndarray             # (K,) element diameters
    rho_k: np.ndarray           # (K,) element inradii
    boundary_edge_of_elem: np.ndarray  # (K,) edge index or -1
    n_boundary_edges_of_elem: np.ndarray  # (K,)
    opposite_vertex: np.ndarray  # (K,) vertex off the boundary edge, or -1
    boundary_elements: np.ndarray  # indices of elements with a boundary edge

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)

    @property
    def h(self) -> float:
        return float(self.h_k.max())

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_right >= 0)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_right < 0)

    def element_vertices(self, k: int) -> np.ndarray:
        return self.vertices[self.triangles[k]]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def boundary_vertex_indices(self) -> np.ndarray:
        return np.unique(self.edge_vertices[self.boundary_edges].ravel())


@dataclass
class MeshQualityReport:
    """Measured mesh metrics plus any invariant violations."""

    K: int
    h: float
    rho_ratio_max: float
    mu_min: float
    boundary_vertex_residual_max: float
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def build_connectivity(vertices, triangles, edge_curve_hint=None) -> Triangulation:
    """Assemble a Triangulation from raw vertices and CCW triangles.

    Edges are deduplicated by their sorted vertex pair; the first incident
    element becomes the edge's left side and fixes the normal orientation.
    ``edge_curve_hint`` optionally maps a sorted vertex pair to a curve code
    for boundary tagging.

    Raises :class:`NonConformingMesh` if an edge has more than two incident
    elements, and ``ValueError`` for non-positively-oriented triangles.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    K = len(triangles)

    p = vertices[triangles]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise ValueError(f"triangle {bad} is not positively oriented "
                         f"(signed area {areas[bad]:.3e})")

    edge_map: dict[tuple[int, int], int] = {}
    edge_vertices: list[tuple[int, int]] = []   # directed, from the left element
    edge_left: list[int] = []
    edge_right: list[int] = []
    elem_edges = np.empty((K, 3), dtype=int)

    for k in range(K):
        tri = triangles[k]
        for loc, (a, b) in enumerate(((tri[0], tri[1]), (tri[1], tri[2]),
                                      (tri[2], tri[0]))):
            key = (a, b) if a < b else (b, a)
            e = edge_map.get(key)
            if e is None:
                e = len(edge_vertices)
                edge_map[key] = e
                edge_vertices.append((a, b))
                edge_left.append(k)
                edge_right.append(-1)
            else:
                if edge_right[e] != -1:
                    raise NonConformingMesh(
                        f"edge {key} is shared by more than two triangles")
                edge_right[e] = k
            elem_edges[k, loc] = e

    edge_vertices = np.asarray(edge_vertices, dtype=int)
    edge_left = np.asarray(edge_left, dtype=int)
    edge_right = np.asarray(edge_right, dtype=int)

    tang = vertices[edge_vertices[:, 1]] - vertices[edge_vertices[:, 0]]
    edge_length = np.hypot(tang[:, 0], tang[:, 1])
    # Outward normal of the left element: rotate the directed edge by -90 deg.
    edge_normal = np.column_stack((tang[:, 1], -tang[:, 0])) / edge_length[:, None]

    edge_curve = np.full(len(edge_vertices), INTERIOR_EDGE, dtype=int)
    boundary_mask = edge_right < 0
    if edge_curve_hint:
        for e in np.flatnonzero(boundary_mask):
            a, b = edge_vertices[e]
            key = (a, b) if a < b else (b, a)
            edge_curve[e] = edge_curve_hint.get(key, CURVE_OUTER)
    else:
        edge_curve[boundary_mask] = CURVE_OUTER

    side = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)  # (K, 3)
    h_k = side.max(axis=1)
    rho_k = 2.0 * areas / side.sum(axis=1)

    boundary_edge_of_elem = np.full(K, -1, dtype=int)
    n_bedges = np.zeros(K, dtype=int)
    opposite_vertex = np.full(K, -1, dtype=int)
    for e in np.flatnonzero(boundary_mask):
        k = edge_left[e]
        n_bedges[k] += 1
        if boundary_edge_of_elem[k] == -1:
            boundary_edge_of_elem[k] = e
    for k in np.flatnonzero(n_bedges == 1):
        a, b = edge_vertices[boundary_edge_of_elem[k]]
        rest = [v for v in triangles[k] if v != a and v != b]
        opposite_vertex[k] = rest[0]

    return Triangulation(
        vertices=vertices, triangles=triangles,
        edge_vertices=edge_vertices, edge_left=edge_left, edge_right=edge_right,
        edge_normal=edge_normal, edge_length=edge_length, edge_curve=edge_curve,
        elem_edges=elem_edges, h_k=h_k, rho_k=rho_k,
        boundary_edge_of_elem=boundary_edge_of_elem,
        n_boundary_edges_of_elem=n_bedges,
        opposite_vertex=opposite_vertex,
        boundary_elements=np.flatnonzero(n_bedges > 0),
    )


def _band(tris, inner_ring, outer_ring):
    """Merge-walk triangulation of the band between two equispaced vertex rings."""
    m, n = len(inner_ring), len(outer_ring)
    a = b = 0
    while a < m or b < n:
        adv_out = (b + 1) / n if b < n else math.inf
        adv_in = (a + 1) / m if a < m else math.inf
        if adv_out <= adv_in:
            tris.append((outer_ring[b % n], outer_ring[(b + 1) % n],
                         inner_ring[a % m]))
            b += 1
        else:
            tris.append((inner_ring[a % m], outer_ring[b % n],
                         inner_ring[(a + 1) % m]))
            a += 1


def generate_disk_mesh(domain: CurvedDomain, rings: int) -> Triangulation:
    """Concentric-ring triangulation of a disk: ring i carries 6*i vertices.

    All outermost vertices are placed on the circle by the polar formula, so
    they lie on the boundary exactly. Produces ``6*rings**2`` triangles.
    """
    if domain.kind != "disk":
        raise ValueError("generate_disk_mesh needs a disk domain")
    if rings < 1:
        raise ValueError("rings must be >= 1")
    R = domain.outer_radius

    verts = [(0.0, 0.0)]
    ring_ids = [[0]]
    for i in range(1, rings + 1):
        r = R * i / rings
        ids = []
        for j in range(6 * i):
            th = 2.0 * math.pi * j / (6 * i)
            ids.append(len(verts))
            verts.append((r * math.cos(th), r * math.sin(th)))
        ring_ids.append(ids)

    tris: list[tuple[int, int, int]] = []
    for b in range(6):
        tris.append((ring_ids[1][b], ring_ids[1][(b + 1) % 6], 0))
    for i in range(2, rings + 1):
        _band(tris, ring_ids[i - 1], ring_ids[i])

    outer = ring_ids[-1]
    hint = {}
    for j in range(len(outer)):
        a, b = outer[j], outer[(j + 1) % len(outer)]
        hint[(a, b) if a < b else (b, a)] = CURVE_OUTER
    return build_connectivity(np.asarray(verts), np.asarray(tris), hint)


def _annulus_points(domain: CurvedDomain, rings: int):
    """Vertex rings and polar coordinates shared by the annulus/rose generators."""
    if rings < 1:
        raise ValueError("rings must be >= 1")
    M = max(16, 8 * rings)
    r_i, r_e = domain.inner_radius, domain.outer_radius
    radii = [r_i + (r_e - r_i) * g / rings for g in range(rings + 1)]
    thetas = [2.0 * math.pi * j / M for j in range(M)]
    return M, radii, thetas


def generate_annulus_mesh(domain: CurvedDomain, rings: int) -> Triangulation:
    """Structured annulus triangulation with max(16, 8*rings) vertices per ring.

    Both extreme vertex rings lie exactly on the two boundary circles.
    Produces ``2 * max(16, 8*rings) * rings`` triangles.
    """
    if domain.kind != "annulus":
        raise ValueError("generate_annulus_mesh needs an annulus domain")
    M, radii, thetas = _annulus_points(domain, rings)
    verts = [(r * math.cos(th), r * math.sin(th)) for r in radii for th in thetas]
    tris, hint = _annulus_triangles(M, rings)
    return build_connectivity(np.asarray(verts), np.asarray(tris), hint)


def _annulus_triangles(M: int, rings: int):
    """Triangle list and boundary-curve hints for the structured annulus grid."""
    def vid(ring, j):
        return ring * M + j % M

    tris = []
    for g in range(rings):
        for j in range(M):
            tris.append((vid(g, j), vid(g + 1, j + 1), vid(g, j + 1)))
            tris.append((vid(g, j), vid(g + 1, j), vid(g + 1, j + 1)))
    hint = {}
    for j in range(M):
        a, b = vid(0, j), vid(0, j + 1)
        hint[(a, b) if a < b else (b, a)] = CURVE_INNER
        a, b = vid(rings, j), vid(rings, j + 1)
        hint[(a, b) if a < b else (b, a)] = CURVE_OUTER
    return tris, hint


def generate_rose_mesh(domain: CurvedDomain, rings: int) -> Triangulation:
    """Rose mesh: the structured annulus grid pushed through the radial map.

    Every vertex at polar coordinates (r', theta) moves to radius
    ``r' * (1 - beta + beta*cos(alpha*theta))``, so boundary vertices land
    exactly on the rose boundary. Raises ``ValueError`` if the mapped mesh
    has non-positive triangle areas (too coarse for the petal count).
    """
    if domain.kind != "rose":
        raise ValueError("generate_rose_mesh needs a rose domain")
    M, radii, thetas = _annulus_points(domain, rings)
    a, b = domain.petals, domain.magnitude
    verts = []
    for r in radii:
        for th in thetas:
            rr = r * (1.0 - b + b * math.cos(a * th))
            verts.append((rr * math.cos(th), rr * math.sin(th)))
    tris, hint = _annulus_triangles(M, rings)
    return build_connectivity(np.asarray(verts), np.asarray(tris), hint)


def validate(tri: Triangulation, domain: CurvedDomain) -> MeshQualityReport:
    """Check mesh invariants against the domain and measure quality metrics.

    Never raises: every failed invariant appends to ``violations``.
    """
    violations: list[str] = []

    areas = tri.signed_areas()
    if np.any(areas <= 0.0):
        violations.append(f"{int(np.sum(areas <= 0))} non-positive triangle areas")

    multi = np.flatnonzero(tri.n_boundary_edges_of_elem > 1)
    if len(multi):
        violations.append(
            f"elements with more than one boundary edge: {multi.tolist()}")

    h = tri.h
    bres = 0.0
    for v in tri.boundary_vertex_indices():
        bres = max(bres, domain.boundary_residual(tri.vertices[v]))
    if bres > 1e-12 * h:
        violations.append(
            f"boundary vertex off the curved boundary (residual {bres:.3e})")

    # Interior-edge length consistency (h_e vs endpoint distance) is exact by
    # construction; re-check to guard readers.
    d = (tri.vertices[tri.edge_vertices[:, 1]]
         - tri.vertices[tri.edge_vertices[:, 0]])
    if np.max(np.abs(np.hypot(d[:, 0], d[:, 1]) - tri.edge_length)) > 1e-14 * h:
        violations.append("stored edge lengths disagree with vertex distances")

    rho_ratio_max = float(np.max(tri.h_k / tri.rho_k))
    mu_min = float(np.min(tri.edge_length[tri.elem_edges]
                          / tri.h_k[:, None]))

    return MeshQualityReport(
        K=tri.n_elements, h=h, rho_ratio_max=rho_ratio_max, mu_min=mu_min,
        boundary_vertex_residual_max=bres, violations=violations)


def classify_boundary_curves(tri: Triangulation, domain: CurvedDomain) -> None:
    """Assign each boundary edge to the nearest domain curve (in place)."""
    for e in tri.boundary_edges:
        mid = tri.vertices[tri.edge_vertices[e]].mean(axis=0)
        r = math.hypot(*mid)
        th = math.atan2(mid[1], mid[0])
        best, code = math.inf, CURVE_OUTER
        for cid, ccode in ((OUTER, CURVE_OUTER), (INNER, CURVE_INNER)):
            if cid == INNER and domain.kind == "disk":
                continue
            res = abs(r - float(domain.curve_radius(cid, th)))
            if res < best:
                best, code = res, ccode
        tri.edge_curve[e] = code


def read_gmsh(text: str, domain: CurvedDomain | None = None) -> Triangulation:
    """Read a Gmsh MSH 2.2 ASCII mesh (2-node lines and 3-node triangles only).

    Line elements only mark boundary edges; triangles are reoriented CCW.
    When ``domain`` is given, boundary vertices within ``1e-8 * h`` of a
    boundary curve are snapped onto it (radial projection) and the edges are
    tagged by curve.
    """
    lines = text.splitlines()
    i = 0

    def expect(tag):
        nonlocal i
        if i >= len(lines) or lines[i].strip() != tag:
            raise MalformedSection(f"expected {tag}", i + 1)
        i += 1

    expect("$MeshFormat")
    fmt = lines[i].split()
    if not fmt or fmt[0] != "2.2":
        raise UnsupportedVersion(f"MSH version {fmt[0] if fmt else '?'} "
                                 "is not supported (need 2.2 ASCII)")
    if len(fmt) >= 2 and fmt[1] != "0":
        raise UnsupportedVersion("binary MSH 2.2 is not supported")
    i += 1
    expect("$EndMeshFormat")

    expect("$Nodes")
    try:
        n_nodes = int(lines[i])
    except (ValueError, IndexError):
        raise MalformedSection("bad node count", i + 1) from None
    i += 1
    id_map: dict[int, int] = {}
    coords = []
    for _ in range(n_nodes):
        if i >= len(lines):
            raise MalformedSection("unexpected end of file in $Nodes", i + 1)
        parts = lines[i].split()
        if len(parts) < 4:
            raise MalformedSection("node needs 'id x y z'", i + 1)
        try:
            nid = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise MalformedSection("bad node entry", i + 1) from None
        id_map[nid] = len(coords)
        coords.append((x, y))
        i += 1
    expect("$EndNodes")

    expect("$Elements")
    try:
        n_elems = int(lines[i])
    except (ValueError, IndexError):
        raise MalformedSection("bad element count", i + 1) from None
    i += 1
    tris = []
    boundary_pairs = []
    for _ in range(n_elems):
        if i >= len(lines):
            raise MalformedSection("unexpected end of file in $Elements", i + 1)
        parts = lines[i].split()
        if len(parts) < 3:
            raise MalformedSection("bad element entry", i + 1)
        try:
            etype = int(parts[1])
            ntags = int(parts[2])
            nodes = [id_map[int(t)] for t in parts[3 + ntags:]]
        except (ValueError, KeyError):
            raise MalformedSection("bad element entry", i + 1) from None
        if etype == 1:
            if len(nodes) != 2:
                raise MalformedSection("2-node line expected", i + 1)
            boundary_pairs.append(tuple(sorted(nodes)))
        elif etype == 2:
            if len(nodes) != 3:
                raise MalformedSection("3-node triangle expected", i + 1)
            tris.append(nodes)
        else:
            raise NonTriangleElement(f"element type {etype} is not supported")
        i += 1
    expect("$EndElements")

    if not tris:
        raise MalformedSection("no triangles in file", i)

    vertices = np.asarray(coords, dtype=float)
    triangles = np.asarray(tris, dtype=int)
    p = vertices[triangles]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flip = areas < 0.0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    tri = build_connectivity(vertices, triangles)

    if domain is not None:
        h = tri.h
        vertices = tri.vertices.copy()
        for v in tri.boundary_vertex_indices():
            x, y = vertices[v]
            res = domain.boundary_residual((x, y))
            if 0.0 < res <= 1e-8 * h:
                r = math.hypot(x, y)
                th = math.atan2(y, x)
                cid = min(domain.curve_ids,
                          key=lambda c: abs(r - float(domain.curve_radius(c, th))))
                vertices[v] = domain.boundary_point(cid, th)
        tri = build_connectivity(vertices, triangles)
        classify_boundary_curves(tri, domain)
    return tri


def dump_mesh(tri: Triangulation) -> str:
    """Line-oriented debug dump: ``v x y`` then ``t i j k``."""
    out = [f"v {x:.17g} {y:.17g}" for x, y in tri.vertices]
    out += [f"t {a} {b} {c}" for a, b, c in tri.triangles]
    return "\n".join(out) + "\n"
