"""Simulated annealing over model states with the five solution moves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import (
    EnergyBreakdown,
    EnergyCache,
    EnergyConfig,
    breakdown_from_cache,
    commit_move,
    evaluate_full,
    resolve_merge_threshold,
    stage_move,
)
from .geometry import TargetRegion
from .moves import Move, MoveKind, merge_shapes
from .priors import BoundPriors
from .sac import ModelState

apply_merge = merge_shapes


@dataclass(frozen=True)
class AnnealConfig:
    """Schedule and move-step parameters.

    Defaults follow the reference configuration (16 restarts, 15000 inner
    iterations per temperature level, cooling 0.9); tests and small scenes
    should pass something much lighter.
    """

    restarts: int = 16
    iters_per_temp: int = 15000
    cooling: float = 0.9
    t0: float | None = None  # None -> calibrated
    t_min_ratio: float = 1e-4
    delta_l: int = 10
    delta_w: int = 2
    delta_rho: float = math.radians(5.0)
    delta_ax: float = 10.0
    delta_xy: float = 3.0
    seed: int = 0
    audit_every: int = 1000  # accepted moves between spot audits; 0 disables
    keep_trace: bool = False
    disabled_mass: float = 0.1  # target-selection mass given to disabled shapes

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must be in (0, 1)")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    temperature: float
    total: float
    accepted: bool


_LOCAL_KINDS = (MoveKind.LENGTH_WIDTH, MoveKind.ANGLE, MoveKind.SHIFT_AXIS, MoveKind.SHIFT_FREE)


def propose_move(
    state: ModelState,
    priors: BoundPriors,
    rng: np.random.Generator,
    config: AnnealConfig,
    cache: EnergyCache,
    merge_threshold: float,
) -> Move | None:
    """Draw one candidate move.

    A disabled shape is picked with ``disabled_mass`` probability and can only
    receive a width-raising length/width move.  For active targets the kind is
    uniform over the four local moves plus merge/absorb when the target has a
    partner with collinearity probability above the merge threshold.
    Parameters violating bounds or the constraint box are resampled up to 10
    times, then the proposal is skipped.
    """
    m = len(state.shapes)
    if m == 0:
        return None
    active = [i for i in range(m) if state.shapes[i].active]
    disabled = [i for i in range(m) if not state.shapes[i].active]

    if active and disabled:
        pick_disabled = rng.random() < config.disabled_mass
    else:
        pick_disabled = not active
    if pick_disabled and not disabled:
        return None

    if pick_disabled:
        u = disabled[int(rng.integers(0, len(disabled)))]
        for _ in range(10):
            da = int(rng.integers(-config.delta_l, config.delta_l + 1))
            db = int(rng.integers(1, config.delta_w + 1))
            move = Move(kind=MoveKind.LENGTH_WIDTH, target=u, da=da, db=db)
            if _valid(state, move):
                return move
        return None

    u = active[int(rng.integers(0, len(active)))]
    partners = [
        v
        for v in active
        if v != u and cache.p_eq[u, v] > merge_threshold
    ]
    kinds = list(_LOCAL_KINDS) + ([MoveKind.MERGE_ABSORB] if partners else [])
    kind = kinds[int(rng.integers(0, len(kinds)))]

    if kind is MoveKind.MERGE_ABSORB:
        v = partners[int(rng.integers(0, len(partners)))]
        move = Move(kind=kind, target=u, partner=v)
        return move if _valid(state, move) else None

    for _ in range(10):
        if kind is MoveKind.LENGTH_WIDTH:
            da = int(rng.integers(-config.delta_l, config.delta_l + 1))
            db = int(rng.integers(-config.delta_w, config.delta_w + 1))
            if da == 0 and db == 0:
                continue
            move = Move(kind=kind, target=u, da=da, db=db)
        elif kind is MoveKind.ANGLE:
            move = Move(kind=kind, target=u, drho=float(rng.uniform(-config.delta_rho, config.delta_rho)))
        elif kind is MoveKind.SHIFT_AXIS:
            move = Move(kind=kind, target=u, dax=float(rng.uniform(-config.delta_ax, config.delta_ax)))
        else:
            move = Move(
                kind=kind,
                target=u,
                dx=float(rng.uniform(-config.delta_xy, config.delta_xy)),
                dy=float(rng.uniform(-config.delta_xy, config.delta_xy)),
            )
        if _valid(state, move):
            return move
    return None


def _valid(state: ModelState, move: Move) -> bool:
    from .moves import apply_move_to_shapes

    return apply_move_to_shapes(state, move) is not None


def calibrate_t0(
    state: ModelState,
    cache: EnergyCache,
    rng: np.random.Generator,
    config: AnnealConfig,
    region: TargetRegion,
    priors: BoundPriors,
    energy_config: EnergyConfig,
    merge_threshold: float,
    samples: int = 100,
) -> float:
    """Initial temperature from 100 sampled moves: the median uphill |delta|
    scaled so the initial uphill acceptance probability is about 0.8.
    Falls back to 1.0 when no uphill move is found."""
    uphill = []
    for _ in range(samples):
        move = propose_move(state, priors, rng, config, cache, merge_threshold)
        if move is None:
            continue
        staged = stage_move(state, region, priors, energy_config, cache, move)
        if staged is not None and staged.delta > 0:
            uphill.append(staged.delta)
    if not uphill:
        return 1.0
    return float(np.median(uphill) / math.log(1.0 / 0.8))


@dataclass
class _RestartResult:
    shapes: list
    breakdown: EnergyBreakdown
    trace: list[TraceRow] = field(default_factory=list)


def _run_restart(
    region: TargetRegion,
    init_state: ModelState,
    priors: BoundPriors,
    config: AnnealConfig,
    energy_config: EnergyConfig,
    seed: int,
    iteration_base: int,
) -> _RestartResult:
    rng = np.random.default_rng(seed)
    state = init_state.copy()
    breakdown, cache = evaluate_full(state, region, priors, energy_config)
    merge_threshold = resolve_merge_threshold(energy_config, priors)

    result = _RestartResult(shapes=list(state.shapes), breakdown=breakdown)
    if not state.shapes:
        return result

    t0 = config.t0
    if t0 is None:
        t0 = calibrate_t0(state, cache, rng, config, region, priors, energy_config, merge_threshold)
    t = t0
    current = breakdown
    it = iteration_base
    since_audit = 0

    while t >= t0 * config.t_min_ratio:
        accepted_this_level = 0
        for _ in range(config.iters_per_temp):
            it += 1
            move = propose_move(state, priors, rng, config, cache, merge_threshold)
            staged = None
            if move is not None:
                staged = stage_move(state, region, priors, energy_config, cache, move)
            accept = False
            if staged is not None:
                if staged.delta <= 0:
                    accept = True
                else:
                    ratio = staged.delta / t
                    accept = ratio < 700 and rng.random() < math.exp(-ratio)
            if accept:
                commit_move(state, cache, staged)
                current = staged.breakdown
                accepted_this_level += 1
                since_audit += 1
                if current.total < result.breakdown.total:
                    result.breakdown = current
                    result.shapes = list(state.shapes)
                if config.audit_every and since_audit >= config.audit_every:
                    since_audit = 0
                    fresh = breakdown_from_cache(
                        evaluate_full(state, region, priors, energy_config)[1], energy_config
                    )
                    if abs(fresh.total - current.total) > 1e-6 * max(1.0, abs(fresh.total)):
                        raise RuntimeError(
                            f"cached energy drifted: cached={current.total!r} fresh={fresh.total!r}"
                        )
            if config.keep_trace:
                result.trace.append(TraceRow(iteration=it, temperature=t, total=current.total, accepted=accept))
        t *= config.cooling
        if accepted_this_level == 0:
            break
    return result


def anneal(
    region: TargetRegion,
    init_state: ModelState,
    priors: BoundPriors,
    config: AnnealConfig,
    energy_config: EnergyConfig,
) -> tuple[ModelState, EnergyBreakdown, list[TraceRow]]:
    """Metropolis annealing with restarts; returns the best state found.

    Restart r uses seed ``config.seed + r``; the best result is chosen by
    total energy with ties broken by the lowest restart index, so the outcome
    is deterministic for fixed inputs and seed.
    """
    best: _RestartResult | None = None
    trace: list[TraceRow] = []
    levels = _schedule_levels(config)
    for r in range(config.restarts):
        res = _run_restart(
            region,
            init_state,
            priors,
            config,
            energy_config,
            seed=config.seed + r,
            iteration_base=r * levels * config.iters_per_temp,
        )
        trace.extend(res.trace)
        if best is None or res.breakdown.total < best.breakdown.total:
            best = res
    state = ModelState(shapes=list(best.shapes), boxes=init_state.boxes, bounds=init_state.bounds)
    return state, best.breakdown, trace


def _schedule_levels(config: AnnealConfig) -> int:
    # upper bound on temperature levels, used only to offset trace iteration ids
    return int(math.ceil(math.log(config.t_min_ratio) / math.log(config.cooling))) + 1
