"""Segmentation of elongated object instances from class-probability rasters.

The pipeline extracts high-probability regions from a raster, seeds one
rectangle per sample-consensus line segment, and evolves the rectangle set by
simulated annealing under an aggregate energy (data fit, learned shape prior,
angle-gated overlap, collinearity).
"""

from .anneal import AnnealConfig, anneal, calibrate_t0, propose_move
from .contours import build_regions, extract_level_contours, extract_regions, simplify_polygon
from .energy import (
    EnergyBreakdown,
    EnergyCache,
    EnergyConfig,
    approx_phi_tau,
    audit_cache,
    data_fit,
    evaluate_delta,
    evaluate_full,
    overlap_term,
)
from .errors import InputError, MalformedContourError, RasterFormatError
from .evaluate import (
    LineEvalReport,
    PolygonEvalReport,
    Segment,
    SynthSceneSpec,
    classify_complexity,
    det_centerline,
    generate_scene,
    match_lines,
    match_polygons,
    ref_centerline,
)
from .geometry import (
    RectPoly,
    TargetRegion,
    clip_area_rect,
    decode_rect,
    mc_area_oracle,
    oriented_bbox,
    polygon_area,
    rect_rect_area,
    triple_area,
)
from .moves import Move, MoveKind
from .pipeline import Detection, PipelineConfig, export_geojson, load_geojson_polygons, run
from .priors import (
    BoundPriors,
    CollinearityModel,
    PairFeatures,
    PriorSet,
    ShapePrior,
    fit_collinearity,
    fit_shape_prior,
    load_priors,
    p_same_object,
    pair_features,
    save_priors,
    shape_log_density,
)
from .raster import BinaryMask, ProbabilityRaster, load_raster, save_raster, threshold_mask
from .sac import ConstraintBox, LineSegment, ModelState, ShapeBounds, detect_lines, init_shapes

__version__ = "0.1.0"
