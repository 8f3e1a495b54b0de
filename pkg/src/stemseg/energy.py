"""Normalized aggregate energy with cached, incrementally updatable terms.

The union areas entering the data-fit potential are approximated by the
first two terms of the inclusion-exclusion expansion (unary minus pairwise),
an underestimate that ignores triple-and-higher overlaps.  All pair terms are
cached so re-evaluating a move touches one row of each pair matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    RectPoly,
    TargetRegion,
    angle_diff,
    bbox_disjoint,
    clip_area_convex,
    convex_intersection,
    decode_rect,
    polygon_area,
    rect_bbox,
)
from .moves import Move, apply_move_to_shapes
from .priors import BoundPriors
from .sac import ModelState


@dataclass(frozen=True)
class EnergyConfig:
    """Coefficients and parameters of the aggregate energy.

    gamma_d defaults to -log(epsilon); gamma_o always equals gamma_d so both
    potentials keep the same area-unit semantics.
    """

    gamma_s: float = 0.3
    gamma_c: float = 0.3
    pi_p: float = 0.5
    sigma_o: float = np.deg2rad(10.0)
    epsilon: float = 1e-6
    gamma_d: float | None = None
    gamma_o: float | None = None
    merge_threshold: float | None = None  # None -> taken from the priors file

    def __post_init__(self):
        gd = -np.log(self.epsilon) if self.gamma_d is None else float(self.gamma_d)
        go = gd if self.gamma_o is None else float(self.gamma_o)
        if abs(go - gd) > 1e-12:
            raise ValueError("gamma_o must equal gamma_d (same area-unit semantics)")
        if gd < 0 or self.gamma_s < 0 or self.gamma_c < 0:
            raise ValueError("energy coefficients must be non-negative")
        if not 0.0 <= self.pi_p <= 1.0:
            raise ValueError("pi_p must be in [0, 1]")
        if self.sigma_o <= 0:
            raise ValueError("sigma_o must be positive")
        object.__setattr__(self, "gamma_d", gd)
        object.__setattr__(self, "gamma_o", go)


@dataclass(frozen=True)
class EnergyBreakdown:
    e_data: float
    e_shape: float
    e_overlap: float
    e_collin: float
    total: float


@dataclass
class EnergyCache:
    """Per-shape and per-pair terms of the current state.

    Entries of inactive shapes (width 0) are zero.  Pair matrices are
    symmetric with zero diagonals; p_eq stores the collinearity classifier
    output and collin the pair penalty -log(1 - p_eq).
    """

    tau_area: float
    active: np.ndarray  # (M,) bool
    unary_tau: np.ndarray  # (M,) |tau ∩ F_i|
    rect_area: np.ndarray  # (M,) |F_i|
    shape_logp: np.ndarray  # (M,)
    pair_rect: np.ndarray  # (M, M) |F_i ∩ F_j|
    pair_tau: np.ndarray  # (M, M) |tau ∩ F_i ∩ F_j|
    overlap: np.ndarray  # (M, M) angle-gated |F_i ∩ F_j|
    p_eq: np.ndarray  # (M, M)
    collin: np.ndarray  # (M, M)
    bboxes: np.ndarray  # (M, 4)

    def copy(self) -> "EnergyCache":
        return EnergyCache(
            tau_area=self.tau_area,
            active=self.active.copy(),
            unary_tau=self.unary_tau.copy(),
            rect_area=self.rect_area.copy(),
            shape_logp=self.shape_logp.copy(),
            pair_rect=self.pair_rect.copy(),
            pair_tau=self.pair_tau.copy(),
            overlap=self.overlap.copy(),
            p_eq=self.p_eq.copy(),
            collin=self.collin.copy(),
            bboxes=self.bboxes.copy(),
        )


@dataclass(frozen=True)
class StagedMove:
    move: Move
    new_shapes: dict[int, RectPoly]
    cache: EnergyCache
    breakdown: EnergyBreakdown
    delta: float


def resolve_merge_threshold(config: EnergyConfig, priors: BoundPriors) -> float:
    return config.merge_threshold if config.merge_threshold is not None else priors.merge_threshold


def _overlap_gate(r1: float, r2: float, sigma_o: float) -> float:
    d = angle_diff(r1, r2)
    return float(np.exp(-(d * d) / (2.0 * sigma_o * sigma_o)))


def overlap_term(s_i: RectPoly, s_j: RectPoly, sigma_o: float) -> float:
    """Angle-gated pairwise intersection area (px^2, unnormalized)."""
    from .geometry import rect_rect_area

    return _overlap_gate(s_i.rho, s_j.rho, sigma_o) * rect_rect_area(s_i, s_j)


def _softplus(z: float) -> float:
    # -log(1 - sigmoid(z)) computed stably
    if z > 0:
        return float(z + np.log1p(np.exp(-z)))
    return float(np.log1p(np.exp(z)))


def _pair_terms(region, ring_i, ring_j, box_i, box_j):
    """(|F_i ∩ F_j|, |tau ∩ F_i ∩ F_j|) with bbox prefiltering."""
    if bbox_disjoint(box_i, box_j):
        return 0.0, 0.0
    inter = convex_intersection(ring_i, ring_j)
    if len(inter) < 3:
        return 0.0, 0.0
    area = polygon_area(inter)
    if area <= 0.0:
        return 0.0, 0.0
    return area, clip_area_convex(region, inter)


def build_cache(state: ModelState, region: TargetRegion, priors: BoundPriors, config: EnergyConfig) -> EnergyCache:
    """Populate every cached term from scratch."""
    shapes = state.shapes
    m = len(shapes)
    cache = EnergyCache(
        tau_area=region.area,
        active=np.zeros(m, dtype=bool),
        unary_tau=np.zeros(m),
        rect_area=np.zeros(m),
        shape_logp=np.zeros(m),
        pair_rect=np.zeros((m, m)),
        pair_tau=np.zeros((m, m)),
        overlap=np.zeros((m, m)),
        p_eq=np.zeros((m, m)),
        collin=np.zeros((m, m)),
        bboxes=np.zeros((m, 4)),
    )
    rings = [None] * m
    for i, s in enumerate(shapes):
        if not s.active:
            continue
        cache.active[i] = True
        rings[i] = decode_rect(s)
        cache.bboxes[i] = rect_bbox(s)
        cache.rect_area[i] = s.a * s.b
        cache.unary_tau[i] = clip_area_convex(region, rings[i])
        cache.shape_logp[i] = priors.shape_logp(s)
    for i in range(m):
        if not cache.active[i]:
            continue
        for j in range(i + 1, m):
            if not cache.active[j]:
                continue
            pr, pt = _pair_terms(region, rings[i], rings[j], cache.bboxes[i], cache.bboxes[j])
            gate = _overlap_gate(shapes[i].rho, shapes[j].rho, config.sigma_o)
            logit = priors.pair_logit(shapes[i], shapes[j])
            _set_pair(cache, i, j, pr, pt, gate * pr, logit)
    return cache


def _set_pair(cache: EnergyCache, i: int, j: int, pair_rect: float, pair_tau: float, overlap: float, logit: float):
    cache.pair_rect[i, j] = cache.pair_rect[j, i] = pair_rect
    cache.pair_tau[i, j] = cache.pair_tau[j, i] = pair_tau
    cache.overlap[i, j] = cache.overlap[j, i] = overlap
    p = 1.0 / (1.0 + np.exp(-np.clip(logit, -500, 500)))
    cache.p_eq[i, j] = cache.p_eq[j, i] = p
    cache.collin[i, j] = cache.collin[j, i] = _softplus(logit)


def approx_phi_tau(cache: EnergyCache) -> tuple[float, float]:
    """Second-order inclusion-exclusion estimates of (|phi ∩ tau|, |phi|)."""
    # pair matrices are symmetric with zero diagonals: triangle sum = sum / 2
    phi_tau = float(cache.unary_tau.sum() - cache.pair_tau.sum() / 2.0)
    phi = float(cache.rect_area.sum() - cache.pair_rect.sum() / 2.0)
    return phi_tau, phi


def data_fit(cache: EnergyCache, pi_p: float) -> float:
    """Normalized data-fit potential 2[(1-pi_p)|tau\\phi| + pi_p |phi\\tau|] / |tau|.

    |phi\\tau| is clamped at zero: with three or more mutually overlapping
    shapes both truncated expansions underestimate, and their difference can
    go negative.
    """
    phi_tau, phi = approx_phi_tau(cache)
    missed = cache.tau_area - phi_tau
    excess = max(0.0, phi - phi_tau)
    return 2.0 * ((1.0 - pi_p) * missed + pi_p * excess) / cache.tau_area


def breakdown_from_cache(cache: EnergyCache, config: EnergyConfig) -> EnergyBreakdown:
    n_active = int(cache.active.sum())
    e_data = data_fit(cache, config.pi_p)
    e_shape = float(-cache.shape_logp.sum() / n_active) if n_active > 0 else 0.0
    e_overlap = float(cache.overlap.sum() / 2.0 / cache.tau_area)
    n_pairs = n_active * (n_active - 1) // 2
    e_collin = float(cache.collin.sum() / 2.0 / n_pairs) if n_pairs > 0 else 0.0
    total = (
        config.gamma_d * e_data
        + config.gamma_s * e_shape
        + config.gamma_o * e_overlap
        + config.gamma_c * e_collin
    )
    return EnergyBreakdown(e_data=e_data, e_shape=e_shape, e_overlap=e_overlap, e_collin=e_collin, total=total)


def evaluate_full(
    state: ModelState, region: TargetRegion, priors: BoundPriors, config: EnergyConfig
) -> tuple[EnergyBreakdown, EnergyCache]:
    """Evaluate the aggregate energy from scratch."""
    if region.area <= 0:
        raise ValueError("region has zero area")
    cache = build_cache(state, region, priors, config)
    return breakdown_from_cache(cache, config), cache


def stage_move(
    state: ModelState,
    region: TargetRegion,
    priors: BoundPriors,
    config: EnergyConfig,
    cache: EnergyCache,
    move: Move,
) -> StagedMove | None:
    """Compute the candidate cache and energy delta for a move.

    Only the rows/columns of the moved shape(s) are recomputed; pairs with
    disjoint bounding boxes are skipped.  Returns None for moves that violate
    the bounds or a constraint box.
    """
    new_shapes = apply_move_to_shapes(state, move)
    if new_shapes is None:
        return None

    shapes = list(state.shapes)
    for idx, s in new_shapes.items():
        shapes[idx] = s

    cand = cache.copy()
    m = len(shapes)
    rings = {}
    for idx in sorted(new_shapes):
        s = shapes[idx]
        if s.active:
            cand.active[idx] = True
            rings[idx] = decode_rect(s)
            cand.bboxes[idx] = rect_bbox(s)
            cand.rect_area[idx] = s.a * s.b
            cand.unary_tau[idx] = clip_area_convex(region, rings[idx])
            cand.shape_logp[idx] = priors.shape_logp(s)
        else:
            cand.active[idx] = False
            cand.bboxes[idx] = 0.0
            cand.rect_area[idx] = 0.0
            cand.unary_tau[idx] = 0.0
            cand.shape_logp[idx] = 0.0
            for j in range(m):
                _set_pair_zero(cand, idx, j)

    for idx in sorted(new_shapes):
        s = shapes[idx]
        if not s.active:
            continue
        ring_i = rings[idx]
        for j in range(m):
            if j == idx or not cand.active[j]:
                continue
            if j in new_shapes and j < idx and shapes[j].active:
                continue  # pair already refreshed from j's pass
            ring_j = rings[j] if j in rings else decode_rect(shapes[j])
            pr, pt = _pair_terms(region, ring_i, ring_j, cand.bboxes[idx], cand.bboxes[j])
            gate = _overlap_gate(s.rho, shapes[j].rho, config.sigma_o)
            logit = priors.pair_logit(s, shapes[j])
            _set_pair(cand, idx, j, pr, pt, gate * pr, logit)

    before = breakdown_from_cache(cache, config)
    after = breakdown_from_cache(cand, config)
    return StagedMove(
        move=move,
        new_shapes=new_shapes,
        cache=cand,
        breakdown=after,
        delta=after.total - before.total,
    )


def _set_pair_zero(cache: EnergyCache, i: int, j: int):
    cache.pair_rect[i, j] = cache.pair_rect[j, i] = 0.0
    cache.pair_tau[i, j] = cache.pair_tau[j, i] = 0.0
    cache.overlap[i, j] = cache.overlap[j, i] = 0.0
    cache.p_eq[i, j] = cache.p_eq[j, i] = 0.0
    cache.collin[i, j] = cache.collin[j, i] = 0.0


def commit_move(state: ModelState, cache: EnergyCache, staged: StagedMove) -> None:
    """Write a staged move into the live state and cache."""
    for idx, s in staged.new_shapes.items():
        state.shapes[idx] = s
    src = staged.cache
    cache.active[:] = src.active
    cache.unary_tau[:] = src.unary_tau
    cache.rect_area[:] = src.rect_area
    cache.shape_logp[:] = src.shape_logp
    cache.pair_rect[:] = src.pair_rect
    cache.pair_tau[:] = src.pair_tau
    cache.overlap[:] = src.overlap
    cache.p_eq[:] = src.p_eq
    cache.collin[:] = src.collin
    cache.bboxes[:] = src.bboxes


def evaluate_delta(
    state: ModelState,
    region: TargetRegion,
    priors: BoundPriors,
    config: EnergyConfig,
    cache: EnergyCache,
    move: Move,
) -> float | None:
    """Energy change of a move, or None when the move is invalid."""
    staged = stage_move(state, region, priors, config, cache, move)
    return None if staged is None else staged.delta


def audit_cache(
    state: ModelState,
    region: TargetRegion,
    priors: BoundPriors,
    config: EnergyConfig,
    cache: EnergyCache,
) -> float:
    """Worst relative discrepancy between cached terms and a fresh rebuild."""
    fresh = build_cache(state, region, priors, config)
    worst = abs(cache.tau_area - fresh.tau_area) / max(1.0, abs(fresh.tau_area))
    for name in ("unary_tau", "rect_area", "shape_logp", "pair_rect", "pair_tau", "overlap", "p_eq", "collin"):
        c = getattr(cache, name)
        f = getattr(fresh, name)
        rel = np.abs(c - f) / np.maximum(1.0, np.abs(f))
        if rel.size:
            worst = max(worst, float(rel.max()))
    if (cache.active != fresh.active).any():
        worst = max(worst, 1.0)
    return worst
