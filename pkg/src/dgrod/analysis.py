"""Error norms, convergence orders, and report emission.

Errors are integrated element by element over the computational domain
(the union of triangles) with a quadrature finer than the assembly rule.
The mesh-dependent norm combines broken H1, a diameter-weighted broken H2
seminorm, and the scaled jump seminorms over all edges; since the exact
solution is continuous, its interior jumps vanish and only the numerical
solution contributes there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import NodalBasis, edge_quadrature, volume_quadrature
from .mesh import Triangulation
from .problems import ManufacturedProblem, MissingDerivatives

#: Below this, an error is reported as "exact" and orders are suppressed.
EXACT_THRESHOLD = 1e-14


class DegenerateLevels(Exception):
    """Convergence order is undefined for these inputs."""


@dataclass
class LevelResult:
    """One mesh level of a refinement study."""

    K: int
    h: float
    E2: float
    order: float | None = None
    dg_norm: float | None = None
    dg_breakdown: dict | None = None
    stats: dict = field(default_factory=dict)   # volatile: timings, residuals


@dataclass
class ConvergenceReport:
    """Refinement-study results plus the configuration that produced them."""

    levels: list[LevelResult]
    metadata: dict

    def sorted_levels(self) -> list[LevelResult]:
        return sorted(self.levels, key=lambda lv: -lv.h)


def _error_rule(basis: NodalBasis, degree: int | None):
    return volume_quadrature(degree or max(2 * basis.N + 4, 10))


def _element_fields(tri, basis, rule):
    v = tri.vertices[tri.triangles]
    J = np.stack((v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJ = np.empty_like(J)
    invJ[:, 0, 0] = J[:, 1, 1] / det
    invJ[:, 0, 1] = -J[:, 0, 1] / det
    invJ[:, 1, 0] = -J[:, 1, 0] / det
    invJ[:, 1, 1] = J[:, 0, 0] / det
    X = np.einsum('kij,qj->kqi', J, rule.points) + v[:, None, 0, :]
    wdet = rule.weights[None, :] * det[:, None]
    return X, wdet, invJ


def l2_error(u_h: np.ndarray, problem: ManufacturedProblem,
             tri: Triangulation, basis: NodalBasis,
             degree: int | None = None) -> float:
    """L2 norm of ``u - u_h`` over the union of elements."""
    rule = _error_rule(basis, degree)
    X, wdet, _ = _element_fields(tri, basis, rule)
    phi = basis.eval_basis(rule.points)
    uh_q = np.einsum('qp,kp->kq', phi, u_h)
    diff = problem.u(X[..., 0], X[..., 1]) - uh_q
    return float(np.sqrt(np.sum(wdet * diff**2)))


def dg_norm_error(u_h: np.ndarray, problem: ManufacturedProblem,
                  tri: Triangulation, basis: NodalBasis, b=None,
                  degree: int | None = None) -> tuple[float, dict]:
    """Mesh-dependent norm of the error, with its component breakdown.

    Components: broken L2 and H1 seminorm, the h_k-weighted broken H2
    seminorm (mixed derivative counted once), and the two jump seminorms
    (inverse-edge-length scaled, and advective).  Requires the problem's
    exact gradient and second derivatives.
    """
    for name in ("ux", "uy", "uxx", "uxy", "uyy"):
        if getattr(problem, name) is None:
            raise MissingDerivatives(f"problem lacks {name}")

    rule = _error_rule(basis, degree)
    X, wdet, invJ = _element_fields(tri, basis, rule)
    x, y = X[..., 0], X[..., 1]
    phi = basis.eval_basis(rule.points)
    dphi = basis.eval_grad(rule.points)
    hphi = basis.eval_hess(rule.points)

    e_val = problem.u(x, y) - np.einsum('qp,kp->kq', phi, u_h)
    l2_sq = float(np.sum(wdet * e_val**2))

    gp = np.einsum('qpj,kji->kqpi', dphi, invJ)
    uh_grad = np.einsum('kqpi,kp->kqi', gp, u_h)
    e_gx = problem.ux(x, y) - uh_grad[..., 0]
    e_gy = problem.uy(x, y) - uh_grad[..., 1]
    h1_sq = float(np.sum(wdet * (e_gx**2 + e_gy**2)))

    # Physical second derivatives: invJ^T H_ref invJ per element.
    Href = np.empty(hphi.shape[:2] + (2, 2))
    Href[..., 0, 0] = hphi[..., 0]
    Href[..., 0, 1] = Href[..., 1, 0] = hphi[..., 1]
    Href[..., 1, 1] = hphi[..., 2]
    Hp = np.einsum('qpij,kia,kjb->kqpab', Href, invJ, invJ)
    uh_hess = np.einsum('kqpab,kp->kqab', Hp, u_h)
    e_xx = problem.uxx(x, y) - uh_hess[..., 0, 0]
    e_xy = problem.uxy(x, y) - uh_hess[..., 0, 1]
    e_yy = problem.uyy(x, y) - uh_hess[..., 1, 1]
    h2_sq = float(np.sum(wdet * tri.h_k[:, None] ** 2
                         * (e_xx**2 + e_xy**2 + e_yy**2)))

    jump_star_sq, jump_b_sq = _jump_seminorms(u_h, problem, tri, basis, b)
    total = float(np.sqrt(l2_sq + h1_sq + h2_sq + jump_star_sq + jump_b_sq))
    return total, dict(l2=np.sqrt(l2_sq), h1=np.sqrt(h1_sq),
                       h2_scaled=np.sqrt(h2_sq),
                       jump_star=np.sqrt(jump_star_sq),
                       jump_b=np.sqrt(jump_b_sq))


def _jump_seminorms(u_h, problem, tri, basis, b):
    rule = edge_quadrature(basis.N + 2)
    star = 0.0
    badv = 0.0
    for e in range(tri.n_edges):
        a_, b_ = tri.edge_vertices[e]
        va, vb = tri.vertices[a_], tri.vertices[b_]
        X = va[None, :] + rule.points[:, None] * (vb - va)[None, :]
        W = rule.weights * tri.edge_length[e]
        kL = tri.edge_left[e]

        def trace(k):
            verts = tri.vertices[tri.triangles[k]]
            J = np.column_stack((verts[1] - verts[0], verts[2] - verts[0]))
            ref = np.linalg.solve(J, (X - verts[0]).T).T
            return basis.eval_basis(ref) @ u_h[k]

        if tri.edge_right[e] >= 0:
            jump = trace(kL) - trace(int(tri.edge_right[e]))
        else:
            jump = problem.u(X[:, 0], X[:, 1]) - trace(kL)
        star += float(np.sum(W * jump**2)) / tri.edge_length[e]
        if b is not None:
            n = tri.edge_normal[e]
            bn = b[0](X[:, 0], X[:, 1]) * n[0] + b[1](X[:, 0], X[:, 1]) * n[1]
            badv += 0.5 * float(np.sum(W * np.abs(bn) * jump**2))
    return star, badv


def convergence_order(e_coarse: float, e_fine: float,
                      h_coarse: float, h_fine: float) -> float:
    """Observed order between two refinement levels."""
    if h_coarse <= h_fine:
        raise DegenerateLevels("need h_coarse > h_fine")
    if e_coarse <= 0.0 or e_fine <= 0.0:
        raise DegenerateLevels("orders need positive errors "
                               "(zero error is reported as 'exact')")
    return float(np.log(e_coarse / e_fine) / np.log(h_coarse / h_fine))


def attach_orders(levels: list[LevelResult]) -> None:
    """Fill per-level orders between consecutive levels (in place)."""
    levels.sort(key=lambda lv: -lv.h)
    levels[0].order = None
    for prev, cur in zip(levels, levels[1:]):
        if (prev.E2 < EXACT_THRESHOLD or cur.E2 < EXACT_THRESHOLD
                or prev.h <= cur.h):
            cur.order = None
        else:
            cur.order = convergence_order(prev.E2, cur.E2, prev.h, cur.h)


def _fmt_err(e: float) -> str:
    return "exact" if e < EXACT_THRESHOLD else f"{e:.2E}"


def _fmt_order(o: float | None) -> str:
    return "---" if o is None else f"{o:.1f}"


def emit_report(report: ConvergenceReport, fmt: str) -> str:
    """Render the study as ``csv`` or ``markdown`` text.

    The CSV echoes the (deterministic) configuration as ``#`` comment
    lines; volatile statistics (timings, residuals) are excluded so that
    identical configurations produce identical bytes.
    """
    levels = report.sorted_levels()
    has_dg = any(lv.dg_norm is not None for lv in levels)
    if fmt == "csv":
        lines = [f"# {key} = {report.metadata[key]}"
                 for key in sorted(report.metadata)]
        header = "K,h,E2,O2" + (",DGnorm" if has_dg else "")
        lines.append(header)
        for lv in levels:
            row = f"{lv.K},{lv.h:.2E},{_fmt_err(lv.E2)},{_fmt_order(lv.order)}"
            if has_dg:
                row += "," + ("" if lv.dg_norm is None else _fmt_err(lv.dg_norm))
            lines.append(row)
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| key | value |", "| --- | --- |"]
        lines += [f"| {key} | {report.metadata[key]} |"
                  for key in sorted(report.metadata)]
        lines.append("")
        header = "| K | h | E2 | O2 |" + (" DGnorm |" if has_dg else "")
        rule = "| ---:| --- | --- | ---:|" + (" --- |" if has_dg else "")
        lines += [header, rule]
        for lv in levels:
            row = (f"| {lv.K} | {lv.h:.2E} | {_fmt_err(lv.E2)} "
                   f"| {_fmt_order(lv.order)} |")
            if has_dg:
                row += ("  |" if lv.dg_norm is None
                        else f" {_fmt_err(lv.dg_norm)} |")
            lines.append(row)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
