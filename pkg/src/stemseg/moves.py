"""Solution-altering moves and their geometric application to model states."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import RectPoly, axis_dir, canonical_angle, decode_rect
from .sac import ModelState


class MoveKind(enum.Enum):
    LENGTH_WIDTH = "length_width"
    ANGLE = "angle"
    SHIFT_AXIS = "shift_axis"
    SHIFT_FREE = "shift_free"
    MERGE_ABSORB = "merge_absorb"


@dataclass(frozen=True)
class Move:
    kind: MoveKind
    target: int
    da: int = 0
    db: int = 0
    drho: float = 0.0
    dax: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    partner: int = -1


def apply_move_to_shapes(state: ModelState, move: Move) -> dict[int, RectPoly] | None:
    """Resulting shapes for the move, or None when it violates the integer
    bounds or a center-constraint box.  Does not mutate the state."""
    u = move.target
    shape = state.shapes[u]
    bounds = state.bounds

    if move.kind is MoveKind.LENGTH_WIDTH:
        a = shape.a + move.da
        b = shape.b + move.db
        if not (bounds.a_lo <= a <= bounds.a_hi and bounds.b_lo <= b <= bounds.b_hi):
            return None
        return {u: RectPoly(a=a, b=b, center=shape.center, rho=shape.rho)}

    # remaining kinds only act on active shapes
    if not shape.active:
        return None

    if move.kind is MoveKind.ANGLE:
        return {u: RectPoly(a=shape.a, b=shape.b, center=shape.center, rho=canonical_angle(shape.rho + move.drho))}

    if move.kind is MoveKind.SHIFT_AXIS:
        d = axis_dir(shape.rho) * move.dax
        center = (shape.center[0] + d[0], shape.center[1] + d[1])
        if not state.boxes[u].contains(center):
            return None
        return {u: RectPoly(a=shape.a, b=shape.b, center=center, rho=shape.rho)}

    if move.kind is MoveKind.SHIFT_FREE:
        center = (shape.center[0] + move.dx, shape.center[1] + move.dy)
        if not state.boxes[u].contains(center):
            return None
        return {u: RectPoly(a=shape.a, b=shape.b, center=center, rho=shape.rho)}

    if move.kind is MoveKind.MERGE_ABSORB:
        v = move.partner
        if v < 0 or v == u or not state.shapes[v].active:
            return None
        return merge_shapes(state, u, v)

    raise ValueError(f"unknown move kind {move.kind}")


def merge_shapes(state: ModelState, u: int, v: int) -> dict[int, RectPoly] | None:
    """Absorb shape v into shape u.

    All 8 vertices of both rectangles are projected onto u's axis; u's new
    extent is the smallest interval containing the projections (length
    rounded up to an integer, clamped to a_hi, center at the interval
    midpoint).  v is disabled by zeroing its width.  Returns None when the
    merged shape would violate the length bounds or u's constraint box.
    """
    su, sv = state.shapes[u], state.shapes[v]
    if not su.active or not sv.active:
        return None
    bounds = state.bounds
    axis = axis_dir(su.rho)
    cu = np.asarray(su.center)
    verts = np.vstack([decode_rect(su), decode_rect(sv)])
    proj = (verts - cu) @ axis
    lo, hi = float(proj.min()), float(proj.max())
    new_a = int(np.ceil(hi - lo - 1e-9))
    if new_a < bounds.a_lo:
        return None
    new_a = min(new_a, bounds.a_hi)
    mid = (lo + hi) / 2.0
    center = (float(cu[0] + mid * axis[0]), float(cu[1] + mid * axis[1]))
    if not state.boxes[u].contains(center):
        return None
    merged = RectPoly(a=new_a, b=su.b, center=center, rho=su.rho)
    disabled = RectPoly(a=sv.a, b=0, center=sv.center, rho=sv.rho)
    return {u: merged, v: disabled}
