import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stemseg.geometry import RectPoly, TargetRegion
from stemseg.priors import BoundPriors, CollinearityModel, PriorSet, ShapePrior
from stemseg.sac import ConstraintBox, ModelState, ShapeBounds


@pytest.fixture
def default_priors() -> PriorSet:
    rng = np.random.default_rng(11)
    lengths = rng.uniform(3.0, 15.0, size=60)
    widths = rng.uniform(0.3, 0.6, size=60)
    prior = ShapePrior(points=np.column_stack([lengths, widths]), H=np.diag([1.0, 0.01]))
    model = CollinearityModel(bias=3.0, w_angle=-10.0, w_dist=-4.0)
    return PriorSet(shape=prior, collinearity=model, merge_threshold=0.5)


@pytest.fixture
def bound_priors(default_priors) -> BoundPriors:
    return BoundPriors(default_priors, gsd=0.1)


def make_region(x0=10.0, y0=20.0, length=40.0, width=5.0) -> TargetRegion:
    return TargetRegion.from_rings(
        np.array([[x0, y0], [x0 + length, y0], [x0 + length, y0 + width], [x0, y0 + width]])
    )


def make_state(shapes, bounds=None, box_margin=12.0) -> ModelState:
    bounds = bounds or ShapeBounds(a_lo=5, a_hi=300, b_lo=0, b_hi=8)
    boxes = [
        ConstraintBox(center0=s.center, rho0=s.rho, l0=max(s.a, 1.0), w0=box_margin)
        for s in shapes
    ]
    return ModelState(shapes=list(shapes), boxes=boxes, bounds=bounds)


def random_region(rng, n_vertices=10, radius=12.0, center=(20.0, 20.0)) -> TargetRegion:
    """Random star-shaped polygon region.

    Angles come from a jittered regular grid so every angular gap stays well
    below pi, which guarantees the polygon is simple.
    """
    base = (np.arange(n_vertices) + rng.uniform(0.05, 0.95, size=n_vertices)) / n_vertices
    angles = base * 2 * np.pi
    radii = rng.uniform(0.35 * radius, radius, size=n_vertices)
    xs = center[0] + radii * np.cos(angles)
    ys = center[1] + radii * np.sin(angles)
    return TargetRegion.from_rings(np.column_stack([xs, ys]))


def random_rect(rng, span=30.0, a_range=(2.0, 18.0), b_range=(1.0, 8.0)) -> RectPoly:
    return RectPoly(
        a=float(rng.uniform(*a_range)),
        b=float(rng.uniform(*b_range)),
        center=(float(rng.uniform(5, span)), float(rng.uniform(5, span))),
        rho=float(rng.uniform(0, np.pi)),
    )
