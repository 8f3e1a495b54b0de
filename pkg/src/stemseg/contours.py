"""Level-set contour extraction, simplification, and target region assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MalformedContourError
from .geometry import TargetRegion, point_in_ring, polygon_area, ring_bbox, signed_area
from .raster import ProbabilityRaster

# Directed marching-squares segments per cell case, with foreground kept on
# the left of the travel direction (left of d = (dx, dy) is n = (dy, -dx) in
# image coordinates with y growing downward).  Corner bits: TL=1 TR=2 BR=4
# BL=8; edges named T, R, B, L.  Saddle cases 5 and 10 are resolved at
# runtime from the cell-center average.
_CASE_SEGMENTS = {
    0: [],
    1: [("L", "T")],
    2: [("T", "R")],
    3: [("L", "R")],
    4: [("R", "B")],
    6: [("T", "B")],
    7: [("L", "B")],
    8: [("B", "L")],
    9: [("B", "T")],
    11: [("B", "R")],
    12: [("R", "L")],
    13: [("R", "T")],
    14: [("T", "L")],
    15: [],
}
_CASE5_CONNECTED = [("L", "B"), ("R", "T")]  # center >= q: TL and BR join
_CASE5_SPLIT = [("L", "T"), ("R", "B")]
_CASE10_CONNECTED = [("T", "L"), ("B", "R")]  # center >= q: TR and BL join
_CASE10_SPLIT = [("T", "R"), ("B", "L")]


def _edge_key(edge: str, r: int, c: int):
    # canonical ids: horizontal pair (r, c)-(r, c+1) or vertical (r, c)-(r+1, c)
    if edge == "T":
        return ("h", r, c)
    if edge == "B":
        return ("h", r + 1, c)
    if edge == "L":
        return ("v", r, c)
    return ("v", r, c + 1)


def extract_level_contours(raster: ProbabilityRaster, q: float) -> list[np.ndarray]:
    """Trace the q-superlevel boundary with marching squares.

    Vertices are linearly interpolated between adjacent pixel centers.  The
    grid is padded with a below-threshold border so every foreground
    component is enclosed by a ring.  Outer rings come out counter-clockwise
    (positive shoelace area), holes clockwise.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q}")
    grid = np.full((raster.height + 2, raster.width + 2), q - 1.0)
    grid[1:-1, 1:-1] = raster.values.astype(np.float64)

    fg = grid >= q
    # candidate cells: any corner pair differing
    a = fg[:-1, :-1]
    b = fg[:-1, 1:]
    c = fg[1:, 1:]
    d = fg[1:, :-1]
    mixed = ~((a == b) & (b == c) & (c == d))
    cells = np.argwhere(mixed)

    # vertex on the crossing edge between centers p1 (value v1) and p2 (v2)
    def edge_point(edge: str, r: int, c_: int) -> np.ndarray:
        kind, er, ec = _edge_key(edge, r, c_)
        if kind == "h":
            v1, v2 = grid[er, ec], grid[er, ec + 1]
            p1 = np.array([ec - 1.0, er - 1.0])
            p2 = np.array([ec, er - 1.0])
        else:
            v1, v2 = grid[er, ec], grid[er + 1, ec]
            p1 = np.array([ec - 1.0, er - 1.0])
            p2 = np.array([ec - 1.0, er])
        t = (q - v1) / (v2 - v1)
        return p1 + t * (p2 - p1)

    # segments keyed by their origin edge; each crossing edge hosts exactly
    # one outgoing segment, so loops can be followed edge-to-edge
    seg_from: dict[tuple, tuple] = {}
    for r, c_ in cells:
        case = (
            (1 if fg[r, c_] else 0)
            | (2 if fg[r, c_ + 1] else 0)
            | (4 if fg[r + 1, c_ + 1] else 0)
            | (8 if fg[r + 1, c_] else 0)
        )
        if case == 5:
            center = (grid[r, c_] + grid[r, c_ + 1] + grid[r + 1, c_ + 1] + grid[r + 1, c_]) / 4.0
            segs = _CASE5_CONNECTED if center >= q else _CASE5_SPLIT
        elif case == 10:
            center = (grid[r, c_] + grid[r, c_ + 1] + grid[r + 1, c_ + 1] + grid[r + 1, c_]) / 4.0
            segs = _CASE10_CONNECTED if center >= q else _CASE10_SPLIT
        else:
            segs = _CASE_SEGMENTS[case]
        for e_from, e_to in segs:
            seg_from[_edge_key(e_from, r, c_)] = (_edge_key(e_to, r, c_), edge_point(e_from, r, c_))

    rings: list[np.ndarray] = []
    visited = set()
    for start in list(seg_from.keys()):
        if start in visited:
            continue
        points = []
        key = start
        while True:
            visited.add(key)
            nxt, pt = seg_from[key]
            points.append(pt)
            key = nxt
            if key == start:
                break
        # the fg-on-left table traces outer loops clockwise in image
        # coordinates; reverse so outer rings carry positive shoelace area
        ring = _drop_duplicate_vertices(np.asarray(points)[::-1])
        if len(ring) >= 3 and abs(signed_area(ring)) > 0:
            rings.append(ring)
    return rings


def _drop_duplicate_vertices(ring: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if len(ring) == 0:
        return ring
    keep = [0]
    for i in range(1, len(ring)):
        if np.abs(ring[i] - ring[keep[-1]]).max() > tol:
            keep.append(i)
    while len(keep) > 1 and np.abs(ring[keep[-1]] - ring[keep[0]]).max() <= tol:
        keep.pop()
    return ring[keep]


def _point_segment_distance(points: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    d = p1 - p0
    len2 = float(d @ d)
    if len2 == 0.0:
        return np.hypot(points[:, 0] - p0[0], points[:, 1] - p0[1])
    t = np.clip(((points - p0) @ d) / len2, 0.0, 1.0)
    proj = p0 + t[:, None] * d
    return np.hypot(points[:, 0] - proj[:, 0], points[:, 1] - proj[:, 1])


def _douglas_peucker_open(points: np.ndarray, eps: float) -> np.ndarray:
    """Iterative Douglas-Peucker on an open polyline; keeps both endpoints."""
    n = len(points)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i0, i1 = stack.pop()
        if i1 - i0 < 2:
            continue
        mid = points[i0 + 1:i1]
        dists = _point_segment_distance(mid, points[i0], points[i1])
        k = int(np.argmax(dists))
        if dists[k] > eps:
            split = i0 + 1 + k
            keep[split] = True
            stack.append((i0, split))
            stack.append((split, i1))
    return points[keep]


def simplify_polygon(ring: np.ndarray, eps_d: float) -> np.ndarray | None:
    """Douglas-Peucker simplification of a closed ring.

    Anchors are vertex 0 and the vertex farthest from it, which makes the
    operation deterministic and idempotent at a fixed eps_d.  Returns None if
    the simplified ring degenerates (< 3 vertices or zero area).
    """
    if eps_d < 0:
        raise ValueError("eps_d must be >= 0")
    if eps_d == 0:
        return ring
    if len(ring) < 3:
        return None
    d2 = (ring[:, 0] - ring[0, 0]) ** 2 + (ring[:, 1] - ring[0, 1]) ** 2
    far = int(np.argmax(d2))
    if far == 0:
        return None
    first = _douglas_peucker_open(ring[: far + 1], eps_d)
    second = _douglas_peucker_open(np.vstack([ring[far:], ring[:1]]), eps_d)
    out = np.vstack([first[:-1], second[:-1]])
    out = _drop_duplicate_vertices(out)
    if len(out) < 3 or polygon_area(out) == 0.0:
        return None
    return out


def build_regions(rings: list[np.ndarray], min_area: float = 0.0) -> list[TargetRegion]:
    """Assemble rings into regions: each CW ring becomes a hole of the
    smallest enclosing CCW outer ring.  Regions are sorted by descending area.

    ``min_area`` drops regions (after hole subtraction) too small to contain
    a valid detection.
    """
    outers = []
    holes = []
    for ring in rings:
        area = signed_area(ring)
        if area > 0:
            outers.append((ring, area, ring_bbox(ring)))
        elif area < 0:
            holes.append((ring, ring_bbox(ring)))

    assigned: list[list[np.ndarray]] = [[] for _ in outers]
    for hole, hbox in holes:
        best = -1
        best_area = np.inf
        probe = hole[0]
        for idx, (outer, oarea, obox) in enumerate(outers):
            if oarea < best_area and _bbox_contains(obox, hbox) and point_in_ring(probe, outer):
                best = idx
                best_area = oarea
        if best < 0:
            raise MalformedContourError("hole ring has no enclosing outer ring")
        assigned[best].append(hole)

    regions = []
    for idx, (outer, _, _) in enumerate(outers):
        region = TargetRegion.from_rings(outer, assigned[idx])
        if region.area >= min_area:
            regions.append(region)
    regions.sort(key=lambda r: -r.area)
    return [
        TargetRegion(outer=r.outer, holes=r.holes, area=r.area, bbox=r.bbox, region_id=i)
        for i, r in enumerate(regions)
    ]


def _bbox_contains(outer_box, inner_box) -> bool:
    return (
        outer_box[0] <= inner_box[0]
        and outer_box[1] <= inner_box[1]
        and outer_box[2] >= inner_box[2]
        and outer_box[3] >= inner_box[3]
    )


@dataclass(frozen=True)
class ContourParams:
    q: float = 0.5
    eps_d: float = 1.0


def extract_regions(raster: ProbabilityRaster, params: ContourParams, min_area: float = 0.0) -> list[TargetRegion]:
    """raster -> contours -> simplification -> regions."""
    rings = extract_level_contours(raster, params.q)
    simplified = []
    for ring in rings:
        out = simplify_polygon(ring, params.eps_d)
        if out is not None:
            simplified.append(out)
    return build_regions(simplified, min_area=min_area)
