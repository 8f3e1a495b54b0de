"""Greedy sample-consensus line detection and initial model construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import RectPoly, canonical_angle


@dataclass(frozen=True)
class LineSegment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    inlier_count: int

    @property
    def length(self) -> float:
        return float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))

    @property
    def midpoint(self) -> tuple[float, float]:
        return ((self.p0[0] + self.p1[0]) / 2.0, (self.p0[1] + self.p1[1]) / 2.0)

    @property
    def angle(self) -> float:
        return canonical_angle(np.arctan2(self.p1[1] - self.p0[1], self.p1[0] - self.p0[0]))


@dataclass(frozen=True)
class ConstraintBox:
    """Rectangle the shape center must stay inside during optimization."""

    center0: tuple[float, float]
    rho0: float
    l0: float
    w0: float

    def __post_init__(self):
        if self.l0 <= 0 or self.w0 <= 0:
            raise ValueError("constraint box must have positive extents")

    def contains(self, point) -> bool:
        dx = point[0] - self.center0[0]
        dy = point[1] - self.center0[1]
        c, s = np.cos(self.rho0), np.sin(self.rho0)
        along = dx * c + dy * s
        across = -dx * s + dy * c
        return abs(along) <= self.l0 / 2.0 and abs(across) <= self.w0 / 2.0


@dataclass(frozen=True)
class ShapeBounds:
    """Integer pixel bounds for rectangle side lengths; b_lo is always 0 so
    redundant shapes can be disabled."""

    a_lo: int
    a_hi: int
    b_lo: int
    b_hi: int

    def __post_init__(self):
        if self.a_lo < 0 or self.b_lo != 0:
            raise ValueError("bounds require a_lo >= 0 and b_lo == 0")
        if self.a_hi < self.a_lo or self.b_hi < 1:
            raise ValueError("inconsistent bounds")


@dataclass
class ModelState:
    shapes: list[RectPoly]
    boxes: list[ConstraintBox]
    bounds: ShapeBounds

    def active_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.shapes) if s.active]

    def copy(self) -> "ModelState":
        return ModelState(shapes=list(self.shapes), boxes=self.boxes, bounds=self.bounds)


def detect_lines(
    mask_or_pixels,
    d_sac: float,
    l_sac: float,
    n_sac: int,
    budget: int = 500,
    seed: int = 0,
) -> list[LineSegment]:
    """Iterative greedy sample consensus over foreground pixels.

    Each greedy round draws ``budget`` two-point line hypotheses from the
    remaining foreground pixels; a pixel is an inlier when its distance to the
    hypothesis line is <= d_sac.  The segment extent is the interval of inlier
    projections onto the line.  The round's highest-inlier hypothesis with
    extent >= l_sac and >= n_sac inliers is accepted and its inliers removed;
    detection stops when a round yields no valid hypothesis.

    Accepts a BinaryMask or an (N, 2) pixel-center array.
    """
    if d_sac <= 0 or l_sac <= 0 or n_sac < 2:
        raise ValueError("require d_sac > 0, l_sac > 0, n_sac >= 2")
    if hasattr(mask_or_pixels, "foreground_pixels"):
        pts = mask_or_pixels.foreground_pixels()
    else:
        pts = np.asarray(mask_or_pixels, dtype=np.float64).reshape(-1, 2)
    rng = np.random.default_rng(seed)

    segments: list[LineSegment] = []
    while len(pts) >= max(2, n_sac):
        n = len(pts)
        i = rng.integers(0, n, size=budget)
        j = rng.integers(0, n, size=budget)

        best = None  # (count, inlier_mask, p_lo, p_hi)
        for k in range(budget):
            if i[k] == j[k]:
                continue
            p = pts[i[k]]
            q = pts[j[k]]
            d = q - p
            norm = np.hypot(d[0], d[1])
            if norm < 1e-12:
                continue
            u = d / norm
            rel = pts - p
            dist = np.abs(rel[:, 0] * u[1] - rel[:, 1] * u[0])
            inliers = dist <= d_sac
            count = int(inliers.sum())
            if count < n_sac or (best is not None and count <= best[0]):
                continue
            proj = rel[inliers] @ u
            lo, hi = float(proj.min()), float(proj.max())
            if hi - lo < l_sac:
                continue
            best = (count, inliers, p + lo * u, p + hi * u)

        if best is None:
            break
        count, inliers, p_lo, p_hi = best
        segments.append(
            LineSegment(p0=(float(p_lo[0]), float(p_lo[1])), p1=(float(p_hi[0]), float(p_hi[1])), inlier_count=count)
        )
        pts = pts[~inliers]
    return segments


def init_shapes(
    segments: list[LineSegment],
    default_width: int,
    w0: float,
    bounds: ShapeBounds,
) -> ModelState:
    """One rectangle per accepted segment, with its center-constraint box.

    Length, center and orientation are inherited from the segment; the width
    starts at ``default_width``.  Lengths are rounded to integers and clamped
    into the bounds; the constraint box keeps the raw segment length.
    """
    if not bounds.b_lo <= default_width <= bounds.b_hi:
        raise ValueError(f"default_width {default_width} outside width bounds")
    shapes = []
    boxes = []
    for seg in segments:
        a = int(np.clip(round(seg.length), bounds.a_lo, bounds.a_hi))
        shapes.append(RectPoly(a=a, b=int(default_width), center=seg.midpoint, rho=seg.angle))
        boxes.append(ConstraintBox(center0=seg.midpoint, rho0=seg.angle, l0=seg.length, w0=w0))
    return ModelState(shapes=shapes, boxes=boxes, bounds=bounds)
