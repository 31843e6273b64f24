"""Curved physical boundaries and the geometric queries the solver needs.

Three domain families are supported, all described in polar coordinates:

* ``disk``    -- a disk of radius ``R`` centred at the origin,
* ``annulus`` -- the region between two concentric circles,
* ``rose``    -- an annulus whose radius is modulated by a periodic
  perturbation ``r' * (1 - beta + beta*cos(alpha*theta))``, producing a
  petal-shaped (generally non-convex) domain.

Every boundary curve carries an identifier (``"outer"`` or ``"inner"``).
The central query is :func:`ray_boundary_intersect`: given a ray, find the
boundary intersection nearest to a reference point on the ray.  Circles are
solved in closed form; the rose radius oscillates, so its intersections are
bracketed by sampling and refined by bisection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

OUTER = "outer"
INNER = "inner"

#: Relative tolerance for "this point lies on the boundary" checks.
BOUNDARY_RTOL = 1e-12


class NoIntersection(Exception):
    """The query ray does not meet the boundary within the search bracket."""


class TangentAmbiguity(UserWarning):
    """Two candidate boundary intersections are nearly equidistant.

    Raised as a warning, not an error: the result is still returned
    deterministically (smallest ray parameter wins).
    """


@dataclass(frozen=True)
class BoundaryHit:
    """Result of a ray/boundary intersection query.

    ``ray_parameter`` is the distance from the ray origin to ``point``
    (always positive).
    """

    point: tuple[float, float]
    ray_parameter: float
    curve_id: str


@dataclass(frozen=True)
class CurvedDomain:
    """Smooth curved domain described in polar coordinates.

    Use the :func:`disk`, :func:`annulus` and :func:`rose` constructors
    rather than instantiating directly.
    """

    kind: str
    outer_radius: float
    inner_radius: float = 0.0
    petals: int = 0
    magnitude: float = 0.0

    def __post_init__(self):
        if self.kind == "disk":
            if not self.outer_radius > 0.0:
                raise ValueError("disk radius must be positive")
        elif self.kind in ("annulus", "rose"):
            if not 0.0 < self.inner_radius < self.outer_radius:
                raise ValueError("need 0 < inner radius < outer radius")
            if self.kind == "rose":
                if self.petals < 1 or self.petals != int(self.petals):
                    raise ValueError("petal count must be an integer >= 1")
                if not 0.0 <= self.magnitude < 0.5:
                    raise ValueError("perturbation magnitude must be in [0, 1/2)")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @property
    def curve_ids(self) -> tuple[str, ...]:
        return (OUTER,) if self.kind == "disk" else (OUTER, INNER)

    def _base_radius(self, curve_id: str) -> float:
        if curve_id == OUTER:
            return self.outer_radius
        if curve_id == INNER and self.kind != "disk":
            return self.inner_radius
        raise ValueError(f"unknown curve id {curve_id!r} for {self.kind}")

    def curve_radius(self, curve_id: str, theta):
        """Polar radius of the named boundary curve at angle ``theta``.

        Vectorised over ``theta``.  For the rose this is the perturbed
        radius ``r' * (1 - beta + beta*cos(alpha*theta))``; for circles it
        is constant.
        """
        base = self._base_radius(curve_id)
        if self.kind == "rose":
            b = self.magnitude
            return base * (1.0 - b + b * np.cos(self.petals * np.asarray(theta)))
        return base * np.ones_like(np.asarray(theta, dtype=float))

    def boundary_point(self, curve_id: str, theta: float) -> tuple[float, float]:
        """Boundary point of the named curve at polar angle ``theta``."""
        r = float(self.curve_radius(curve_id, theta))
        return (r * math.cos(theta), r * math.sin(theta))

    def boundary_residual(self, p) -> float:
        """Signed distance proxy: radius of ``p`` minus the nearest curve radius.

        The minimum of ``| |p| - R_c(angle(p)) |`` over the domain's curves.
        Zero (to :data:`BOUNDARY_RTOL` relative) means ``p`` is on the
        boundary.
        """
        x, y = p
        r = math.hypot(x, y)
        th = math.atan2(y, x)
        return min(abs(r - float(self.curve_radius(c, th))) for c in self.curve_ids)

    def contains(self, p) -> bool:
        """True iff ``p`` lies in the closed domain.

        Points within ``1e-12 * outer_radius`` of a boundary curve count as
        contained.
        """
        x, y = p
        r = math.hypot(x, y)
        th = math.atan2(y, x)
        tol = BOUNDARY_RTOL * self.outer_radius
        if r > float(self.curve_radius(OUTER, th)) + tol:
            return False
        if self.kind != "disk" and r < float(self.curve_radius(INNER, th)) - tol:
            return False
        return True


def disk(radius: float = 1.0) -> CurvedDomain:
    return CurvedDomain("disk", outer_radius=radius)


def annulus(inner_radius: float = 0.5, outer_radius: float = 1.0) -> CurvedDomain:
    return CurvedDomain("annulus", outer_radius=outer_radius, inner_radius=inner_radius)


def rose(inner_radius: float = 0.5, outer_radius: float = 1.0,
         petals: int = 8, magnitude: float = 0.1) -> CurvedDomain:
    return CurvedDomain("rose", outer_radius=outer_radius, inner_radius=inner_radius,
                        petals=petals, magnitude=magnitude)


def _circle_ray_hits(origin, direction, radius):
    """Positive ray parameters where ``origin + t*direction`` meets the circle."""
    ox, oy = origin
    dx, dy = direction
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - radius * radius
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    s = math.sqrt(disc)
    # Stable quadratic roots.
    q = -0.5 * (b + math.copysign(s, b))
    roots = []
    if a != 0.0:
        roots.append(q / a)
    if q != 0.0:
        roots.append(c / q)
    return [t for t in roots if t > 1e-14]


def _rose_ray_hits(domain, origin, direction, curve_id, t_lo, t_hi, n_samples=64):
    """Bracketed bisection roots of |ray(t)| - R_curve(angle(ray(t))) in [t_lo, t_hi]."""
    ts = np.linspace(t_lo, t_hi, n_samples)
    pts = np.asarray(origin)[None, :] + ts[:, None] * np.asarray(direction)[None, :]
    radii = np.hypot(pts[:, 0], pts[:, 1])
    angles = np.arctan2(pts[:, 1], pts[:, 0])
    g = radii - domain.curve_radius(curve_id, angles)

    def g_at(t):
        x = origin[0] + t * direction[0]
        y = origin[1] + t * direction[1]
        return math.hypot(x, y) - float(domain.curve_radius(curve_id, math.atan2(y, x)))

    hits = []
    for i in range(n_samples - 1):
        ga, gb = g[i], g[i + 1]
        if ga == 0.0:
            hits.append(float(ts[i]))
            continue
        if ga * gb < 0.0:
            lo, hi = float(ts[i]), float(ts[i + 1])
            glo = ga
            # Bisection to 1e-14 relative in t.
            while hi - lo > 1e-14 * max(1.0, abs(hi)):
                mid = 0.5 * (lo + hi)
                gm = g_at(mid)
                if gm == 0.0:
                    lo = hi = mid
                    break
                if glo * gm < 0.0:
                    hi = mid
                else:
                    lo, glo = mid, gm
            hits.append(0.5 * (lo + hi))
    if g[-1] == 0.0:
        hits.append(float(ts[-1]))
    return hits


def ray_boundary_intersect(domain: CurvedDomain, origin, through) -> BoundaryHit:
    """Boundary intersection of the ray from ``origin`` through ``through``.

    Among the intersections of the ray (parameter t > 0, with t = 1 at
    ``through``) with all boundary curves, returns the one nearest to
    ``through`` in Euclidean distance.  Equidistant candidates are resolved
    deterministically in favour of the smaller ray parameter, with a
    :class:`TangentAmbiguity` warning.

    For circles the intersections are the roots of a quadratic; for the
    rose they are found by sampling/bisection on a bracket between 0.5x and
    2x of the distance ``|through - origin|``.

    Raises :class:`NoIntersection` if no candidate exists in the search
    range.
    """
    ox, oy = float(origin[0]), float(origin[1])
    tx, ty = float(through[0]), float(through[1])
    dx, dy = tx - ox, ty - oy
    chord = math.hypot(dx, dy)
    if chord == 0.0:
        raise ValueError("origin and through coincide")

    candidates = []  # (t, curve_id)
    if domain.kind == "rose":
        # Primary bracket: 0.5x..2x the chord; widen geometrically as a
        # fallback so that rescaling `through` along the ray cannot change
        # the answer (sampling density grows with the bracket).
        for t_lo, t_hi, n in ((0.5, 2.0, 64), (0.125, 8.0, 256),
                              (0.03125, 32.0, 1024)):
            for cid in domain.curve_ids:
                for t in _rose_ray_hits(domain, (ox, oy), (dx, dy), cid,
                                        t_lo, t_hi, n_samples=n):
                    candidates.append((t, cid))
            if candidates:
                break
    else:
        for cid in domain.curve_ids:
            for t in _circle_ray_hits((ox, oy), (dx, dy), domain._base_radius(cid)):
                candidates.append((t, cid))
    if not candidates:
        raise NoIntersection(
            f"ray from {origin} through {through} misses the {domain.kind} boundary")

    # Nearest to `through` (t = 1), ties to the smaller ray parameter.
    candidates.sort(key=lambda tc: (abs(tc[0] - 1.0), tc[0]))
    t_best, cid_best = candidates[0]
    if len(candidates) > 1:
        t_next = candidates[1][0]
        if abs(t_next - t_best) * chord < 1e-10 * chord:
            warnings.warn(
                f"nearly tangent ray: intersections at t={t_best:.15g} and "
                f"t={t_next:.15g}", TangentAmbiguity, stacklevel=2)
            t_best = min(t_best, t_next)

    point = (ox + t_best * dx, oy + t_best * dy)
    return BoundaryHit(point=point, ray_parameter=t_best * chord, curve_id=cid_best)
