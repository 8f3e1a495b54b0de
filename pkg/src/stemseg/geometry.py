"""Exact polygon area primitives plus a Monte Carlo area oracle.

Rings are (V, 2) float arrays of vertices, closed implicitly (the first
vertex is not repeated).  Signed area follows the shoelace convention:
positive for counter-clockwise rings, negative for clockwise ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

CLIP_EPS = 1e-9  # tolerance for collinear/degenerate clip intersections


@dataclass(frozen=True)
class RectPoly:
    """Rectangle shape: side lengths (a along the axis, b across), center, orientation.

    ``rho`` is canonicalized to [0, pi); rectangles are symmetric under 180
    degree rotation.  Optimizer states keep a and b integral (in pixels);
    evaluation-only rectangles (oriented bounding boxes, metric ground truth)
    may carry continuous side lengths.
    """

    a: float
    b: float
    center: tuple[float, float]
    rho: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"side lengths must be non-negative, got a={self.a}, b={self.b}")
        object.__setattr__(self, "rho", canonical_angle(self.rho))

    @property
    def active(self) -> bool:
        return self.b > 0


def canonical_angle(rho: float) -> float:
    """Reduce an orientation to [0, pi)."""
    r = float(rho) % np.pi
    if r >= np.pi:  # guards the rare rho % pi == pi float case
        r = 0.0
    return r


def angle_diff(r1: float, r2: float) -> float:
    """Mod-pi angular deviation in [0, pi/2]."""
    d = abs(r1 - r2) % np.pi
    return min(d, np.pi - d)


def axis_dir(rho: float) -> np.ndarray:
    return np.array([np.cos(rho), np.sin(rho)])


def decode_rect(shape: RectPoly) -> np.ndarray:
    """Decode to a CCW 4-vertex ring; empty (0, 2) array if degenerate."""
    if shape.a <= 0 or shape.b <= 0:
        return np.empty((0, 2))
    ha, hb = shape.a / 2.0, shape.b / 2.0
    local = np.array([[-ha, -hb], [ha, -hb], [ha, hb], [-ha, hb]])
    c, s = np.cos(shape.rho), np.sin(shape.rho)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.asarray(shape.center)


def signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area (positive = CCW)."""
    if len(ring) < 3:
        return 0.0
    x, y = ring[:, 0], ring[:, 1]
    cross = float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))
    cross += float(x[-1] * y[0] - x[0] * y[-1])
    return 0.5 * cross


def polygon_area(ring: np.ndarray) -> float:
    """Absolute shoelace area."""
    return abs(signed_area(ring))


def ring_bbox(ring: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(ring[:, 0].min()),
        float(ring[:, 1].min()),
        float(ring[:, 0].max()),
        float(ring[:, 1].max()),
    )


def bbox_disjoint(b1, b2) -> bool:
    return b1[2] < b2[0] or b2[2] < b1[0] or b1[3] < b2[1] or b2[3] < b1[1]


def rect_bbox(shape: RectPoly) -> tuple[float, float, float, float]:
    ha, hb = shape.a / 2.0, shape.b / 2.0
    c, s = abs(np.cos(shape.rho)), abs(np.sin(shape.rho))
    ex = ha * c + hb * s
    ey = ha * s + hb * c
    cx, cy = shape.center
    return (cx - ex, cy - ey, cx + ex, cy + ey)


def clip_ring_halfplanes(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` against a convex CCW ``clipper``.

    Works for non-convex subjects too: the output may contain zero-width
    bridge edges, which contribute zero signed area, so downstream area sums
    stay exact.  Only areas are ever consumed from the result.
    """
    pts = [(float(p[0]), float(p[1])) for p in subject]
    clip = [(float(p[0]), float(p[1])) for p in clipper]
    return np.asarray(_clip_loop(pts, clip), dtype=float).reshape(-1, 2)


def _clip_loop(pts: list, clip: list) -> list:
    # plain float tuples: the polygons here are tiny and python-level
    # arithmetic beats numpy dispatch overhead
    n = len(clip)
    output = pts
    for k in range(n):
        if not output:
            break
        cx1, cy1 = clip[k]
        k2 = k + 1 if k + 1 < n else 0
        ex = clip[k2][0] - cx1
        ey = clip[k2][1] - cy1
        pts_k = output
        # cross > 0 means strictly left of the (CCW) clip edge, i.e. inside
        cross = [ex * (py - cy1) - ey * (px - cx1) for px, py in pts_k]
        result = []
        m = len(pts_k)
        for i in range(m):
            j = i + 1 if i + 1 < m else 0
            ci, cj = cross[i], cross[j]
            ins_i = ci >= -CLIP_EPS
            ins_j = cj >= -CLIP_EPS
            if ins_i:
                result.append(pts_k[i])
            if ins_i != ins_j:
                # ci and cj straddle zero; the denominator cannot vanish
                t = ci / (ci - cj)
                xi, yi = pts_k[i]
                xj, yj = pts_k[j]
                result.append((xi + t * (xj - xi), yi + t * (yj - yi)))
        output = result
    return output


def _signed_area_list(pts: list) -> float:
    if len(pts) < 3:
        return 0.0
    total = 0.0
    x0, y0 = pts[-1]
    for x1, y1 in pts:
        total += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return 0.5 * total


def convex_intersection(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Intersection polygon of two convex CCW rings (possibly empty)."""
    out = clip_ring_halfplanes(r1, r2)
    if len(out) < 3:
        return np.empty((0, 2))
    return out


def rect_rect_area(r1: RectPoly, r2: RectPoly) -> float:
    """Intersection area of two rectangles."""
    if r1.a <= 0 or r1.b <= 0 or r2.a <= 0 or r2.b <= 0:
        return 0.0
    if bbox_disjoint(rect_bbox(r1), rect_bbox(r2)):
        return 0.0
    poly = clip_ring_halfplanes(decode_rect(r1), decode_rect(r2))
    if len(poly) < 3:
        return 0.0
    return max(0.0, signed_area(poly))


@dataclass(frozen=True)
class TargetRegion:
    """High-probability polygon: outer ring (CCW), holes (CW), cached area/bbox."""

    outer: np.ndarray
    holes: tuple[np.ndarray, ...]
    area: float
    bbox: tuple[float, float, float, float]
    region_id: int = 0

    @staticmethod
    def from_rings(outer: np.ndarray, holes: Sequence[np.ndarray] = (), region_id: int = 0) -> "TargetRegion":
        area = signed_area(outer) + sum(signed_area(h) for h in holes)
        if area <= 0:
            raise ValueError("region has non-positive area")
        return TargetRegion(
            outer=np.asarray(outer, dtype=float),
            holes=tuple(np.asarray(h, dtype=float) for h in holes),
            area=float(area),
            bbox=ring_bbox(np.asarray(outer, dtype=float)),
            region_id=region_id,
        )

    @cached_property
    def clip_rings(self) -> tuple[list, ...]:
        """Outer + hole rings as tuple lists, precomputed for the clipper."""
        rings = [[(float(x), float(y)) for x, y in self.outer]]
        for hole in self.holes:
            rings.append([(float(x), float(y)) for x, y in hole])
        return tuple(rings)


def clip_area_convex(region: TargetRegion, clipper: np.ndarray) -> float:
    """Area of region (outer minus holes) intersected with a convex CCW ring."""
    if len(clipper) < 3:
        return 0.0
    if bbox_disjoint(region.bbox, ring_bbox(clipper)):
        return 0.0
    clip = [(float(p[0]), float(p[1])) for p in clipper]
    total = 0.0
    for ring in region.clip_rings:
        total += _signed_area_list(_clip_loop(ring, clip))
    cap = min(region.area, polygon_area(clipper))
    return min(max(total, 0.0), cap)


def clip_area_rect(region: TargetRegion, rect: RectPoly) -> float:
    """Area of region ∩ rect."""
    if rect.a <= 0 or rect.b <= 0:
        return 0.0
    if bbox_disjoint(region.bbox, rect_bbox(rect)):
        return 0.0
    area = clip_area_convex(region, decode_rect(rect))
    return min(area, rect.a * rect.b)


def triple_area(region: TargetRegion, r1: RectPoly, r2: RectPoly) -> float:
    """Area of region ∩ r1 ∩ r2 via the convex r1∩r2 polygon."""
    if r1.a <= 0 or r1.b <= 0 or r2.a <= 0 or r2.b <= 0:
        return 0.0
    if bbox_disjoint(rect_bbox(r1), rect_bbox(r2)):
        return 0.0
    inter = convex_intersection(decode_rect(r1), decode_rect(r2))
    if len(inter) < 3:
        return 0.0
    inter = _dedupe_ring(inter)
    if len(inter) < 3:
        return 0.0
    return clip_area_convex(region, inter)


def _dedupe_ring(ring: np.ndarray, tol: float = CLIP_EPS) -> np.ndarray:
    """Drop consecutive duplicate vertices (closing edge included)."""
    if len(ring) == 0:
        return ring
    keep = [0]
    for i in range(1, len(ring)):
        if np.abs(ring[i] - ring[keep[-1]]).max() > tol:
            keep.append(i)
    while len(keep) > 1 and np.abs(ring[keep[-1]] - ring[keep[0]]).max() <= tol:
        keep.pop()
    return ring[keep]


def point_in_ring(point, ring: np.ndarray) -> bool:
    """Even-odd ray cast for a single point."""
    x, y = point
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xi:
                inside = not inside
    return inside


def points_in_ring(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Vectorized even-odd test: (N, 2) points against one ring."""
    x = points[:, 0]
    y = points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > y) != (y2 > y)
        xi = x1 + (y - y1) * ((x2 - x1) / (y2 - y1))
        inside ^= crosses & (x < xi)
    return inside


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns CCW hull vertices."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                u = out[-1] - out[-2]
                w = p - out[-2]
                if u[0] * w[1] - u[1] * w[0] <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    return np.asarray(lower[:-1] + upper[:-1])


def oriented_bbox(ring: np.ndarray) -> RectPoly:
    """Minimum-area enclosing rectangle via rotating calipers on the hull.

    The longer extent is returned as ``a`` with ``rho`` along it; square ties
    keep the candidate edge direction.
    """
    hull = convex_hull(ring)
    if len(hull) == 0:
        raise ValueError("empty ring")
    if len(hull) == 1:
        return RectPoly(a=0.0, b=0.0, center=(float(hull[0, 0]), float(hull[0, 1])), rho=0.0)
    if len(hull) == 2:
        d = hull[1] - hull[0]
        length = float(np.hypot(*d))
        center = (hull[0] + hull[1]) / 2.0
        return RectPoly(a=length, b=0.0, center=(float(center[0]), float(center[1])), rho=float(np.arctan2(d[1], d[0])))

    best = None
    n = len(hull)
    for i in range(n):
        edge = hull[(i + 1) % n] - hull[i]
        norm = np.hypot(*edge)
        if norm < 1e-12:
            continue
        u = edge / norm
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        du = pu.max() - pu.min()
        dv = pv.max() - pv.min()
        area = du * dv
        if best is None or area < best[0] - 1e-12:
            cu = (pu.max() + pu.min()) / 2.0
            cv = (pv.max() + pv.min()) / 2.0
            center = cu * u + cv * v
            best = (area, du, dv, u, v, center)

    _, du, dv, u, v, center = best
    if du >= dv:
        a, b = du, dv
        rho = float(np.arctan2(u[1], u[0]))
    else:
        a, b = dv, du
        rho = float(np.arctan2(v[1], v[0]))
    return RectPoly(a=float(a), b=float(b), center=(float(center[0]), float(center[1])), rho=rho)


def mc_area_oracle(
    predicate: Callable[[np.ndarray], np.ndarray],
    bbox: tuple[float, float, float, float],
    n: int,
    seed: int,
) -> tuple[float, float]:
    """Uniform-sampling area estimate of a predicate set within a bbox.

    ``predicate`` receives an (n, 2) point array and returns a boolean mask.
    Returns (estimate, standard error).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, y0, x1, y1 = bbox
    box_area = (x1 - x0) * (y1 - y0)
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    pts[:, 0] = x0 + pts[:, 0] * (x1 - x0)
    pts[:, 1] = y0 + pts[:, 1] * (y1 - y0)
    hits = np.asarray(predicate(pts), dtype=bool)
    p = hits.mean()
    est = p * box_area
    se = box_area * float(np.sqrt(p * (1.0 - p) / n))
    return float(est), se
