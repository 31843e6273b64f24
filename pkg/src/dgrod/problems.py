"""Manufactured benchmark problems: exact solutions, coefficients, sources.

Each problem packages a closed-form exact solution with its derivatives,
an advection field ``b``, a reaction coefficient ``c``, and the source
``f = -lap(u) + div(b u) + c u`` synthesized from the closed-form parts
(never transcribed), so a finite-difference check of ``u`` alone validates
``f``.  The Dirichlet data is the trace of the exact solution.

Solution families: ``x*sin(1 - x^2 - y^2)`` on the unit disk (vanishes on
the boundary) and ``log(x^2 + y^2)`` on the annulus/rose (nonzero boundary
data).  Coefficient cases: (1) ``b=(1,1), c=1``; (2) ``b=(e^x, 0),
c=e^x/2``; (3) ``b=(2-y^2, 2-x), c=1+(1+x)(1+y)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import CurvedDomain

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class MissingDerivatives(Exception):
    """The requested norm needs exact derivatives the problem lacks."""


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution with derivatives, coefficients, and synthesized source."""

    name: str
    domain_kind: str
    coeff_case: int
    u: Field
    ux: Field
    uy: Field
    uxx: Field
    uxy: Field
    uyy: Field
    b1: Field
    b2: Field
    div_b: Field
    c: Field

    def laplacian(self, x, y):
        return self.uxx(x, y) + self.uyy(x, y)

    def f(self, x, y):
        """Source term: -lap(u) + b . grad(u) + (div b) u + c u."""
        return (-self.laplacian(x, y)
                + self.b1(x, y) * self.ux(x, y) + self.b2(x, y) * self.uy(x, y)
                + (self.div_b(x, y) + self.c(x, y)) * self.u(x, y))

    def u_D(self, x, y):
        """Dirichlet data: the trace of the exact solution."""
        return self.u(x, y)


def _coefficients(case: int):
    if case == 1:
        return dict(
            b1=lambda x, y: np.ones_like(x + y),
            b2=lambda x, y: np.ones_like(x + y),
            div_b=lambda x, y: np.zeros_like(x + y),
            c=lambda x, y: np.ones_like(x + y),
        )
    if case == 2:
        return dict(
            b1=lambda x, y: np.exp(x) * np.ones_like(y),
            b2=lambda x, y: np.zeros_like(x + y),
            div_b=lambda x, y: np.exp(x) * np.ones_like(y),
            c=lambda x, y: 0.5 * np.exp(x) * np.ones_like(y),
        )
    if case == 3:
        return dict(
            b1=lambda x, y: 2.0 - y**2 + 0.0 * x,
            b2=lambda x, y: 2.0 - x + 0.0 * y,
            div_b=lambda x, y: np.zeros_like(x + y),
            c=lambda x, y: 1.0 + (1.0 + x) * (1.0 + y) ** 2,
        )
    raise ValueError(f"coefficient case must be 1, 2 or 3 (got {case})")


def _disk_solution():
    # u = x sin(s), s = 1 - x^2 - y^2; vanishes on the unit circle.
    def s(x, y):
        return 1.0 - x**2 - y**2

    return dict(
        u=lambda x, y: x * np.sin(s(x, y)),
        ux=lambda x, y: np.sin(s(x, y)) - 2.0 * x**2 * np.cos(s(x, y)),
        uy=lambda x, y: -2.0 * x * y * np.cos(s(x, y)),
        uxx=lambda x, y: -6.0 * x * np.cos(s(x, y)) - 4.0 * x**3 * np.sin(s(x, y)),
        uxy=lambda x, y: -2.0 * y * np.cos(s(x, y)) - 4.0 * x**2 * y * np.sin(s(x, y)),
        uyy=lambda x, y: -2.0 * x * np.cos(s(x, y)) - 4.0 * x * y**2 * np.sin(s(x, y)),
    )


def _log_solution():
    # u = log(x^2 + y^2); harmonic away from the origin.
    def r2(x, y):
        return x**2 + y**2

    return dict(
        u=lambda x, y: np.log(r2(x, y)),
        ux=lambda x, y: 2.0 * x / r2(x, y),
        uy=lambda x, y: 2.0 * y / r2(x, y),
        uxx=lambda x, y: 2.0 / r2(x, y) - 4.0 * x**2 / r2(x, y) ** 2,
        uxy=lambda x, y: -4.0 * x * y / r2(x, y) ** 2,
        uyy=lambda x, y: 2.0 / r2(x, y) - 4.0 * y**2 / r2(x, y) ** 2,
    )


def _quadratic_solution():
    # u = 1 - x^2 - y^2; vanishes on the unit circle and lies in P_2.
    return dict(
        u=lambda x, y: 1.0 - x**2 - y**2,
        ux=lambda x, y: -2.0 * x + 0.0 * y,
        uy=lambda x, y: -2.0 * y + 0.0 * x,
        uxx=lambda x, y: -2.0 * np.ones_like(x + y),
        uxy=lambda x, y: np.zeros_like(x + y),
        uyy=lambda x, y: -2.0 * np.ones_like(x + y),
    )


def make_case(domain_kind: str, coeff_case: int) -> ManufacturedProblem:
    """Benchmark problem for a domain family and coefficient case."""
    if domain_kind == "disk":
        sol = _disk_solution()
    elif domain_kind in ("annulus", "rose"):
        sol = _log_solution()
    else:
        raise ValueError(f"unknown domain kind {domain_kind!r}")
    return ManufacturedProblem(name=f"{domain_kind}_case{coeff_case}",
                               domain_kind=domain_kind, coeff_case=coeff_case,
                               **sol, **_coefficients(coeff_case))


def make_patch_problem(coeff_case: int = 1) -> ManufacturedProblem:
    """Quadratic disk problem used by the patch (exact-reproduction) test."""
    return ManufacturedProblem(name=f"disk_patch_case{coeff_case}",
                               domain_kind="disk", coeff_case=coeff_case,
                               **_quadratic_solution(),
                               **_coefficients(coeff_case))


def source_term(problem: ManufacturedProblem, x) -> float:
    """Source ``f`` at a single point."""
    return float(problem.f(np.asarray(x[0]), np.asarray(x[1])))


def check_wellposedness(problem: ManufacturedProblem, domain: CurvedDomain,
                        grid_n: int = 100) -> float:
    """Sampled minimum of ``c + div(b)/2`` over the domain.

    A negative minimum signals a configuration outside the coercivity
    assumption; it is reported, not asserted.
    """
    r = domain.outer_radius
    xs = np.linspace(-r, r, grid_n)
    best = np.inf
    for x in xs:
        for y in xs:
            if domain.contains((x, y)):
                v = float(problem.c(np.float64(x), np.float64(y))
                          + 0.5 * problem.div_b(np.float64(x), np.float64(y)))
                best = min(best, v)
    return best
