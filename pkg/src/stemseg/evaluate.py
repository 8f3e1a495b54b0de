"""Polygon- and line-level detection metrics plus a synthetic scene generator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    RectPoly,
    angle_diff,
    axis_dir,
    clip_ring_halfplanes,
    decode_rect,
    oriented_bbox,
    points_in_ring,
    polygon_area,
    signed_area,
)
from .raster import ProbabilityRaster

# ---------------------------------------------------------------------------
# general polygon intersection area
# ---------------------------------------------------------------------------


def _ensure_ccw(ring: np.ndarray) -> np.ndarray:
    return ring if signed_area(ring) >= 0 else ring[::-1]


def _is_convex(ring: np.ndarray) -> bool:
    n = len(ring)
    for i in range(n):
        a, b, c = ring[i], ring[(i + 1) % n], ring[(i + 2) % n]
        u = b - a
        v = c - b
        if u[0] * v[1] - u[1] * v[0] < -1e-12:
            return False
    return True


def _triangulate(ring: np.ndarray) -> list[np.ndarray]:
    """Ear clipping of a simple CCW polygon."""
    idx = list(range(len(ring)))
    tris = []
    guard = 0
    while len(idx) > 3 and guard < 10000:
        guard += 1
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = ring[i0], ring[i1], ring[i2]
            u = b - a
            v = c - a
            cross = u[0] * v[1] - u[1] * v[0]
            if cross <= 1e-12:
                continue
            tri = np.array([a, b, c])
            others = [ring[j] for j in idx if j not in (i0, i1, i2)]
            if others and points_in_ring(np.asarray(others), tri).any():
                continue
            tris.append(tri)
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            break
    if len(idx) >= 3:
        tris.append(ring[idx[:3]])
    return tris


def polygon_intersection_area(p: np.ndarray, q: np.ndarray) -> float:
    """Intersection area of two simple polygons (orientation-insensitive)."""
    p = _ensure_ccw(np.asarray(p, dtype=float))
    q = _ensure_ccw(np.asarray(q, dtype=float))
    if _is_convex(q):
        return max(0.0, signed_area(clip_ring_halfplanes(p, q)))
    if _is_convex(p):
        return max(0.0, signed_area(clip_ring_halfplanes(q, p)))
    total = 0.0
    for tri in _triangulate(q):
        if signed_area(tri) <= 0:
            continue
        total += max(0.0, signed_area(clip_ring_halfplanes(p, tri)))
    return total


def polygon_iou(p: np.ndarray, q: np.ndarray) -> float:
    inter = polygon_intersection_area(p, q)
    union = polygon_area(p) + polygon_area(q) - inter
    return inter / union if union > 0 else 0.0


# ---------------------------------------------------------------------------
# polygon-level matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolygonEvalReport:
    precision: float | None
    recall: float | None
    mean_iou_matched: float | None
    ref_matched: tuple[bool, ...]
    det_matched: tuple[bool, ...]


def match_polygons(refs, dets) -> PolygonEvalReport:
    """Existence-based polygon matching.

    A reference matches when some detection covers strictly more than half of
    its area; a detection matches when some reference covers strictly more
    than half of the detection.  Mean IoU is taken over matched references
    with their best-IoU detection.
    """
    refs = [np.asarray(r, dtype=float) for r in refs]
    dets = [np.asarray(d, dtype=float) for d in dets]
    ref_areas = [polygon_area(r) for r in refs]
    det_areas = [polygon_area(d) for d in dets]

    inter = np.zeros((len(refs), len(dets)))
    for i, r in enumerate(refs):
        for j, d in enumerate(dets):
            inter[i, j] = polygon_intersection_area(r, d)

    ref_matched = []
    ious = []
    for i, r in enumerate(refs):
        matched = any(inter[i, j] / ref_areas[i] > 0.5 for j in range(len(dets)))
        ref_matched.append(matched)
        if matched:
            best = max(
                inter[i, j] / (ref_areas[i] + det_areas[j] - inter[i, j])
                for j in range(len(dets))
                if ref_areas[i] + det_areas[j] - inter[i, j] > 0
            )
            ious.append(best)
    det_matched = [
        any(inter[i, j] / det_areas[j] > 0.5 for i in range(len(refs))) if det_areas[j] > 0 else False
        for j in range(len(dets))
    ]

    precision = sum(det_matched) / len(dets) if dets else None
    recall = sum(ref_matched) / len(refs) if refs else None
    mean_iou = float(np.mean(ious)) if ious else None
    return PolygonEvalReport(
        precision=precision,
        recall=recall,
        mean_iou_matched=mean_iou,
        ref_matched=tuple(ref_matched),
        det_matched=tuple(det_matched),
    )


def classify_complexity(refs) -> list[bool]:
    """True = complex: the polygon intersects (positive area) any other ref."""
    refs = [np.asarray(r, dtype=float) for r in refs]
    n = len(refs)
    complex_flags = [False] * n
    for i in range(n):
        for j in range(i + 1, n):
            if complex_flags[i] and complex_flags[j]:
                continue
            if polygon_intersection_area(refs[i], refs[j]) > 1e-9:
                complex_flags[i] = True
                complex_flags[j] = True
    return complex_flags


# ---------------------------------------------------------------------------
# line-level matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    p0: tuple[float, float]
    p1: tuple[float, float]

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def angle(self) -> float:
        return math.atan2(self.p1[1] - self.p0[1], self.p1[0] - self.p0[0])

    def as_arrays(self):
        return np.asarray(self.p0, dtype=float), np.asarray(self.p1, dtype=float)


def ref_centerline(ref: np.ndarray) -> Segment:
    """Centerline of the polygon's oriented bounding box, along its longer side."""
    return det_centerline(oriented_bbox(np.asarray(ref, dtype=float)))


def det_centerline(det: RectPoly) -> Segment:
    """Midline parallel to the longer rectangle edge (ties follow stored rho)."""
    if det.a >= det.b:
        half, rho = det.a / 2.0, det.rho
    else:
        half, rho = det.b / 2.0, det.rho + math.pi / 2.0
    u = axis_dir(rho)
    c = np.asarray(det.center)
    return Segment(p0=tuple(c - half * u), p1=tuple(c + half * u))


def _point_line_distance(points: np.ndarray, seg: Segment) -> np.ndarray:
    p0, p1 = seg.as_arrays()
    d = p1 - p0
    norm = np.hypot(*d)
    if norm < 1e-12:
        return np.hypot(points[:, 0] - p0[0], points[:, 1] - p0[1])
    u = d / norm
    rel = points - p0
    return np.abs(rel[:, 0] * u[1] - rel[:, 1] * u[0])


def _sample_points(seg: Segment, n: int = 10) -> np.ndarray:
    p0, p1 = seg.as_arrays()
    t = np.linspace(0.0, 1.0, n)[:, None]
    return p0 + t * (p1 - p0)


def _projected_interval(src: Segment, onto: Segment) -> tuple[float, float]:
    """Parameter interval (clipped to [0, length]) of src's endpoints projected
    onto the line of ``onto``."""
    p0, p1 = onto.as_arrays()
    d = p1 - p0
    norm = np.hypot(*d)
    if norm < 1e-12:
        return 0.0, 0.0
    u = d / norm
    s0, s1 = src.as_arrays()
    t0 = float((s0 - p0) @ u)
    t1 = float((s1 - p0) @ u)
    lo, hi = min(t0, t1), max(t0, t1)
    return max(lo, 0.0), min(hi, norm)


def line_pair_matches(
    ref: Segment,
    det: Segment,
    angle_max: float = math.radians(5.0),
    dist_max: float = 0.35,
    cover_min: float = 0.6,
) -> bool:
    """Reference/detection match test: angular deviation strictly below
    angle_max, mean projected distance strictly below dist_max, and the
    projection of the reference covering at least cover_min of the detection."""
    if angle_diff(ref.angle, det.angle) >= angle_max:
        return False
    mean_dist = float(_point_line_distance(_sample_points(ref), det).mean())
    if mean_dist >= dist_max:
        return False
    lo, hi = _projected_interval(ref, det)
    det_len = det.length
    if det_len <= 0:
        return False
    return (hi - lo) >= cover_min * det_len


def ref_coverage(ref: Segment, det: Segment) -> float:
    """Fraction of the reference's length covered by the detection's projection."""
    lo, hi = _projected_interval(det, ref)
    ref_len = ref.length
    return (hi - lo) / ref_len if ref_len > 0 else 0.0


@dataclass(frozen=True)
class LineEvalReport:
    precision: float | None
    precision_simple: float | None
    precision_complex: float | None
    recall_at_cover: float | None
    coverage_curve: tuple[tuple[float, float], ...]
    ref_matched: tuple[bool, ...]
    det_matched: tuple[bool, ...]
    ref_coverage: tuple[float, ...]


def match_lines(
    ref_segs,
    det_segs,
    angle_max: float = math.radians(5.0),
    dist_max: float = 0.35,
    cover_min: float = 0.6,
    recall_cover: float = 0.65,
    ref_complex=None,
    curve_step: float = 0.05,
) -> LineEvalReport:
    """Line-segment matching report.

    ``recall_at_cover`` counts references whose matched detection's projection
    covers at least ``recall_cover`` of their length; the coverage curve maps
    each threshold to the fraction of references matched at that coverage.
    Stratified precision requires ``ref_complex`` flags; detections not
    matching any reference are assigned the stratum of the nearest reference
    line.
    """
    refs = list(ref_segs)
    dets = list(det_segs)
    matches = np.zeros((len(refs), len(dets)), dtype=bool)
    for i, r in enumerate(refs):
        for j, d in enumerate(dets):
            matches[i, j] = line_pair_matches(r, d, angle_max, dist_max, cover_min)

    ref_matched = matches.any(axis=1)
    det_matched = matches.any(axis=0)
    coverage = np.zeros(len(refs))
    for i, r in enumerate(refs):
        covs = [ref_coverage(r, dets[j]) for j in range(len(dets)) if matches[i, j]]
        coverage[i] = max(covs) if covs else 0.0

    precision = float(det_matched.mean()) if dets else None
    recall_at = float((ref_matched & (coverage >= recall_cover)).mean()) if refs else None

    thresholds = np.arange(0.0, 1.0 + 1e-9, curve_step)
    if refs:
        curve = tuple((float(t), float((ref_matched & (coverage >= t)).mean())) for t in thresholds)
    else:
        curve = tuple((float(t), 0.0) for t in thresholds)

    prec_simple = prec_complex = None
    if ref_complex is not None and refs and dets:
        strata = _det_strata(refs, dets, matches, list(ref_complex))
        simple_idx = [j for j in range(len(dets)) if not strata[j]]
        complex_idx = [j for j in range(len(dets)) if strata[j]]
        if simple_idx:
            prec_simple = float(np.mean([det_matched[j] for j in simple_idx]))
        if complex_idx:
            prec_complex = float(np.mean([det_matched[j] for j in complex_idx]))

    return LineEvalReport(
        precision=precision,
        precision_simple=prec_simple,
        precision_complex=prec_complex,
        recall_at_cover=recall_at,
        coverage_curve=curve,
        ref_matched=tuple(bool(x) for x in ref_matched),
        det_matched=tuple(bool(x) for x in det_matched),
        ref_coverage=tuple(float(c) for c in coverage),
    )


def _det_strata(refs, dets, matches, ref_complex) -> list[bool]:
    """Complexity stratum per detection: its best-matching reference when
    matched, otherwise the reference with the smallest mean line distance."""
    strata = []
    for j, d in enumerate(dets):
        candidates = [i for i in range(len(refs)) if matches[i, j]]
        if not candidates:
            dists = [float(_point_line_distance(_sample_points(d), r).mean()) for r in refs]
            candidates = [int(np.argmin(dists))]
        best = min(candidates, key=lambda i: float(_point_line_distance(_sample_points(refs[i]), d).mean()))
        strata.append(bool(ref_complex[best]))
    return strata


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSceneSpec:
    """Synthetic probability-raster scene with rectangular ground truth.

    Lengths/widths are in meters; stems are placed in world coordinates with
    origin (0, 0).  ``overlap_mode`` is one of disjoint, crossing_pairs,
    clusters.  Fragmentation gaps reset a band across a stem to p_out.
    """

    width_px: int = 512
    height_px: int = 512
    gsd: float = 0.1
    n_stems: int = 20
    length_range_m: tuple[float, float] = (3.0, 15.0)
    width_range_m: tuple[float, float] = (0.3, 0.6)
    overlap_mode: str = "disjoint"
    p_in: float = 0.95
    p_out: float = 0.02
    noise_sigma: float = 0.05
    frag_gap_prob: float = 0.0
    gap_width_range_m: tuple[float, float] = (0.3, 0.6)
    margin_m: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p_out < 0.5 < self.p_in <= 1.0):
            raise ValueError("require p_out < 0.5 < p_in so the default threshold separates them")
        if self.overlap_mode not in ("disjoint", "crossing_pairs", "clusters"):
            raise ValueError(f"unknown overlap mode {self.overlap_mode!r}")


def _fits_inside(rect: RectPoly, w_m: float, h_m: float, border: float) -> bool:
    verts = decode_rect(rect)
    if len(verts) == 0:
        return False
    return (
        verts[:, 0].min() >= border
        and verts[:, 1].min() >= border
        and verts[:, 0].max() <= w_m - border
        and verts[:, 1].max() <= h_m - border
    )


def _sample_stem(rng, spec: SynthSceneSpec, w_m: float, h_m: float) -> RectPoly:
    for _ in range(1000):
        length = float(rng.uniform(*spec.length_range_m))
        width = float(rng.uniform(*spec.width_range_m))
        rho = float(rng.uniform(0.0, math.pi))
        cx = float(rng.uniform(0.0, w_m))
        cy = float(rng.uniform(0.0, h_m))
        rect = RectPoly(a=length, b=width, center=(cx, cy), rho=rho)
        if _fits_inside(rect, w_m, h_m, spec.margin_m):
            return rect
    raise RuntimeError("could not place a stem inside the scene; enlarge the raster")


def _separated(rect: RectPoly, placed: list[RectPoly], margin: float) -> bool:
    from .geometry import rect_rect_area

    grown = RectPoly(a=rect.a + margin, b=rect.b + margin, center=rect.center, rho=rect.rho)
    for other in placed:
        grown_other = RectPoly(a=other.a + margin, b=other.b + margin, center=other.center, rho=other.rho)
        if rect_rect_area(grown, grown_other) > 0:
            return False
    return True


def _place_stems(rng, spec: SynthSceneSpec, w_m: float, h_m: float) -> list[RectPoly]:
    stems: list[RectPoly] = []
    if spec.overlap_mode == "disjoint":
        while len(stems) < spec.n_stems:
            rect = _sample_stem(rng, spec, w_m, h_m)
            if _separated(rect, stems, spec.margin_m):
                stems.append(rect)
    elif spec.overlap_mode == "crossing_pairs":
        while len(stems) < spec.n_stems:
            first = _sample_stem(rng, spec, w_m, h_m)
            length = float(rng.uniform(*spec.length_range_m))
            width = float(rng.uniform(*spec.width_range_m))
            jitter = float(rng.uniform(-math.radians(2.0), math.radians(2.0)))
            off = rng.uniform(-0.5, 0.5, size=2)
            partner = RectPoly(
                a=length,
                b=width,
                center=(first.center[0] + float(off[0]), first.center[1] + float(off[1])),
                rho=first.rho + math.pi / 2.0 + jitter,
            )
            if not _fits_inside(partner, w_m, h_m, spec.margin_m):
                continue
            if _separated(first, stems, spec.margin_m) and _separated(partner, stems, spec.margin_m):
                stems.extend([first, partner])
    else:  # clusters
        while len(stems) < spec.n_stems:
            k = min(int(rng.integers(2, 5)), spec.n_stems - len(stems))
            anchor = _sample_stem(rng, spec, w_m, h_m)
            group = [anchor]
            tries = 0
            while len(group) < k and tries < 200:
                tries += 1
                length = float(rng.uniform(*spec.length_range_m))
                width = float(rng.uniform(*spec.width_range_m))
                rho = float(rng.uniform(0.0, math.pi))
                off = rng.uniform(-1.5, 1.5, size=2)
                cand = RectPoly(
                    a=length,
                    b=width,
                    center=(anchor.center[0] + float(off[0]), anchor.center[1] + float(off[1])),
                    rho=rho,
                )
                if _fits_inside(cand, w_m, h_m, spec.margin_m):
                    group.append(cand)
            if all(_separated(g, stems, spec.margin_m) for g in group):
                stems.extend(group)
    return stems[: spec.n_stems]


def generate_scene(spec: SynthSceneSpec) -> tuple[ProbabilityRaster, list[RectPoly]]:
    """Deterministic synthetic scene: raster plus ground-truth rectangles (meters)."""
    rng = np.random.default_rng(spec.seed)
    w_m = spec.width_px * spec.gsd
    h_m = spec.height_px * spec.gsd
    stems = _place_stems(rng, spec, w_m, h_m)

    values = np.full((spec.height_px, spec.width_px), spec.p_out, dtype=np.float64)
    xs = np.arange(spec.width_px) * spec.gsd
    ys = np.arange(spec.height_px) * spec.gsd

    for stem in stems:
        _paint_rect(values, xs, ys, stem, spec.p_in)

    for stem in stems:
        if spec.frag_gap_prob > 0 and rng.random() < spec.frag_gap_prob:
            gap_u = float(rng.uniform(-0.2, 0.2)) * stem.a
            gap_w = float(rng.uniform(*spec.gap_width_range_m))
            _paint_gap(values, xs, ys, stem, gap_u, gap_w, spec.p_out)

    if spec.noise_sigma > 0:
        values = values + rng.normal(0.0, spec.noise_sigma, size=values.shape)
    values = np.clip(values, 0.0, 1.0)

    raster = ProbabilityRaster(
        width=spec.width_px,
        height=spec.height_px,
        gsd=spec.gsd,
        origin=(0.0, 0.0),
        values=values.astype(np.float32),
    )
    return raster, stems


def _local_coords(xs, ys, stem: RectPoly):
    u = axis_dir(stem.rho)
    gx, gy = np.meshgrid(xs, ys)
    dx = gx - stem.center[0]
    dy = gy - stem.center[1]
    along = dx * u[0] + dy * u[1]
    across = -dx * u[1] + dy * u[0]
    return along, across


def _paint_rect(values, xs, ys, stem: RectPoly, value: float):
    along, across = _local_coords(xs, ys, stem)
    inside = (np.abs(along) <= stem.a / 2.0) & (np.abs(across) <= stem.b / 2.0)
    values[inside] = value


def _paint_gap(values, xs, ys, stem: RectPoly, gap_u: float, gap_w: float, value: float):
    along, across = _local_coords(xs, ys, stem)
    band = (
        (np.abs(along - gap_u) <= gap_w / 2.0)
        & (np.abs(along) <= stem.a / 2.0)
        & (np.abs(across) <= stem.b / 2.0)
    )
    values[band] = value
