"""End-to-end orchestration: raster -> regions -> init -> annealing -> output."""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .anneal import AnnealConfig, TraceRow, anneal
from .contours import ContourParams, extract_regions
from .energy import EnergyBreakdown, EnergyConfig
from .errors import InputError
from .evaluate import SynthSceneSpec
from .geometry import TargetRegion, decode_rect, points_in_ring
from .priors import BoundPriors, PriorSet
from .raster import BinaryMask, ProbabilityRaster, threshold_mask
from .sac import ShapeBounds, detect_lines, init_shapes


@dataclass(frozen=True)
class PipelineConfig:
    """Full pipeline configuration.

    Metric parameters are converted to pixels per raster using its ground
    sampling distance, so one config works across resolutions.
    """

    q: float = 0.5
    eps_d: float = 1.0
    min_len_m: float = 2.0
    max_len_m: float = 30.0
    max_width_m: float = 0.7
    min_width_m: float = 0.3
    sac_inlier_m: float = 0.7
    sac_min_len_m: float = 2.0
    sac_min_inliers: int = 30
    sac_budget: int = 500
    default_width_m: float = 0.4
    box_width_m: float = 1.0
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    anneal: AnnealConfig = field(default_factory=AnnealConfig)
    workers: int = 1
    seed: int = 0


@dataclass(frozen=True)
class DerivedParams:
    """Pixel-space parameters for one raster's gsd."""

    bounds: ShapeBounds
    d_sac: float
    l_sac: float
    n_sac: int
    default_width: int
    w0: float
    min_region_area: float


def derive_params(config: PipelineConfig, gsd: float) -> DerivedParams:
    bounds = ShapeBounds(
        a_lo=int(math.ceil(config.min_len_m / gsd)),
        a_hi=int(math.floor(config.max_len_m / gsd)),
        b_lo=0,
        b_hi=int(math.ceil(config.max_width_m / gsd)),
    )
    default_width = max(1, round(config.default_width_m / gsd))
    if default_width > bounds.b_hi:
        default_width = bounds.b_hi
    return DerivedParams(
        bounds=bounds,
        d_sac=float(math.ceil(config.sac_inlier_m / gsd)),
        l_sac=config.sac_min_len_m / gsd,
        n_sac=config.sac_min_inliers,
        default_width=default_width,
        w0=max(1.0, round(config.box_width_m / gsd)),
        min_region_area=(config.min_len_m * config.min_width_m) / (gsd * gsd),
    )


@dataclass(frozen=True)
class Detection:
    """One delineated object, in world coordinates (meters)."""

    id: int
    region_id: int
    shape_index: int
    polygon: np.ndarray  # (4, 2) world meters
    length_m: float
    width_m: float
    angle_deg: float
    energy: EnergyBreakdown


def region_seed(master_seed: int, region_id: int, stream: int) -> int:
    """Stable per-region seed so ordering and parallelism cannot change results."""
    ss = np.random.SeedSequence([int(master_seed), int(region_id), int(stream)])
    return int(ss.generate_state(1, np.uint32)[0])


def region_pixels(raster: ProbabilityRaster, mask: BinaryMask, region: TargetRegion) -> np.ndarray:
    """Foreground pixel centers belonging to this region (outer minus holes)."""
    x0 = max(0, int(math.floor(region.bbox[0])))
    y0 = max(0, int(math.floor(region.bbox[1])))
    x1 = min(raster.width - 1, int(math.ceil(region.bbox[2])))
    y1 = min(raster.height - 1, int(math.ceil(region.bbox[3])))
    if x1 < x0 or y1 < y0:
        return np.empty((0, 2))
    sub = mask.bits[y0 : y1 + 1, x0 : x1 + 1]
    ys, xs = np.nonzero(sub)
    pts = np.column_stack([xs + x0, ys + y0]).astype(np.float64)
    if len(pts) == 0:
        return pts
    inside = points_in_ring(pts, region.outer)
    for hole in region.holes:
        inside &= ~points_in_ring(pts, hole)
    return pts[inside]


def _process_region(args) -> tuple[int, list[tuple[int, object, EnergyBreakdown]], list[TraceRow]]:
    (region, pixels, derived, priors, config) = args
    sac_seed = region_seed(config.seed, region.region_id, 0)
    anneal_seed = region_seed(config.seed, region.region_id, 1)

    segments = detect_lines(
        pixels,
        d_sac=derived.d_sac,
        l_sac=derived.l_sac,
        n_sac=derived.n_sac,
        budget=config.sac_budget,
        seed=sac_seed,
    )
    if not segments:
        return region.region_id, [], []
    state = init_shapes(segments, derived.default_width, derived.w0, derived.bounds)
    anneal_cfg = dataclasses.replace(config.anneal, seed=anneal_seed)
    best, breakdown, trace = anneal(region, state, priors, anneal_cfg, config.energy)
    # active shapes carry the region-level breakdown
    out = [(i, s, breakdown) for i, s in enumerate(best.shapes) if s.active]
    return region.region_id, out, trace


def run(
    raster: ProbabilityRaster,
    priors: PriorSet,
    config: PipelineConfig,
    collect_trace: bool = False,
) -> tuple[list[Detection], list[TraceRow]]:
    """Run the full pipeline; detections come back in (region, shape) order.

    Each target region is processed independently with its own derived seeds,
    so the worker count and region ordering cannot change the result.
    """
    derived = derive_params(config, raster.gsd)
    mask = threshold_mask(raster, config.q)
    regions = extract_regions(raster, ContourParams(q=config.q, eps_d=config.eps_d), derived.min_region_area)
    bound = BoundPriors(priors, raster.gsd)

    anneal_cfg = config.anneal
    if collect_trace and not anneal_cfg.keep_trace:
        anneal_cfg = dataclasses.replace(anneal_cfg, keep_trace=True)
    run_config = dataclasses.replace(config, anneal=anneal_cfg)

    jobs = []
    for region in regions:
        pixels = region_pixels(raster, mask, region)
        jobs.append((region, pixels, derived, bound, run_config))

    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_process_region, jobs))
    else:
        results = [_process_region(job) for job in jobs]

    results.sort(key=lambda r: r[0])
    trace: list[TraceRow] = []
    for _, _, region_trace in results:
        trace.extend(region_trace)
    return assemble_detections(results, raster.gsd, raster.origin, config), trace


def assemble_detections(results, gsd: float, origin, config: PipelineConfig) -> list[Detection]:
    """Convert per-region (region_id, [(shape_index, shape, breakdown)], trace)
    results into world-coordinate detections, applying the length filter."""
    detections: list[Detection] = []
    det_id = 0
    for rid, shapes, _ in results:
        for shape_index, shape, breakdown in shapes:
            length_m = shape.a * gsd
            width_m = shape.b * gsd
            if not (config.min_len_m <= length_m <= config.max_len_m):
                continue
            poly_m = decode_rect(shape) * gsd + np.asarray(origin)
            detections.append(
                Detection(
                    id=det_id,
                    region_id=rid,
                    shape_index=shape_index,
                    polygon=poly_m,
                    length_m=float(length_m),
                    width_m=float(width_m),
                    angle_deg=float(math.degrees(shape.rho)),
                    energy=breakdown,
                )
            )
            det_id += 1
    return detections


# ---------------------------------------------------------------------------
# GeoJSON output
# ---------------------------------------------------------------------------


def export_geojson(detections: list[Detection], path) -> None:
    """Write detections as a GeoJSON FeatureCollection (closed polygon rings)."""
    features = []
    for det in detections:
        ring = [[float(x), float(y)] for x, y in det.polygon]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "id": det.id,
                    "length_m": det.length_m,
                    "width_m": det.width_m,
                    "angle_deg": det.angle_deg,
                    "region_id": det.region_id,
                    "e_data": det.energy.e_data,
                    "e_shape": det.energy.e_shape,
                    "e_overlap": det.energy.e_overlap,
                    "e_collin": det.energy.e_collin,
                    "total": det.energy.total,
                },
            }
        )
    payload = {"type": "FeatureCollection", "features": features}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_geojson_polygons(path) -> list[tuple[np.ndarray, dict]]:
    """Read polygon outer rings (+properties) from a GeoJSON FeatureCollection."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read GeoJSON {path}: {exc}") from exc
    if payload.get("type") != "FeatureCollection":
        raise InputError(f"{path}: expected a FeatureCollection")
    out = []
    for feature in payload.get("features", []):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Polygon":
            continue
        coords = geom.get("coordinates") or []
        if not coords:
            continue
        ring = np.asarray(coords[0], dtype=float)
        if len(ring) >= 2 and np.allclose(ring[0], ring[-1]):
            ring = ring[:-1]
        if len(ring) >= 3:
            out.append((ring, feature.get("properties") or {}))
    return out


def export_trace_csv(trace: list[TraceRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,temperature,total_energy,accepted\n")
        for row in trace:
            fh.write(f"{row.iteration},{row.temperature!r},{row.total!r},{int(row.accepted)}\n")


# ---------------------------------------------------------------------------
# config / scene-spec JSON loading
# ---------------------------------------------------------------------------


def _dataclass_from_dict(cls, data: dict, context: str):
    if not isinstance(data, dict):
        raise InputError(f"{context}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise InputError(f"{context}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.name == "energy":
            value = _dataclass_from_dict(EnergyConfig, value, f"{context}.energy")
        elif f.name == "anneal":
            value = _dataclass_from_dict(AnnealConfig, value, f"{context}.anneal")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{context}: {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    return _dataclass_from_dict(PipelineConfig, data, "config")


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def load_scene_spec(path) -> SynthSceneSpec:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read scene spec {path}: {exc}") from exc
    return _dataclass_from_dict(SynthSceneSpec, data, "scene spec")
