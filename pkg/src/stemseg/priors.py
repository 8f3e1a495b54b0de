"""Learned priors: KDE over (length, width) and a collinearity classifier."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import RectPoly, angle_diff, axis_dir

LOG_DENSITY_FLOOR = np.log(1e-300)


@dataclass(frozen=True)
class ShapePrior:
    """Kernel density over training (length_m, width_m) pairs.

    The density is a mixture of bivariate Gaussians: each training point
    contributes |H|^(-1/2) * K(H^(-1/2)(x - x_k)) / n with K the standard
    bivariate normal kernel.
    """

    points: np.ndarray  # (n, 2) in meters
    H: np.ndarray  # 2x2 SPD bandwidth matrix, meters^2

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        H = np.asarray(self.H, dtype=float)
        if pts.shape[0] < 1 or pts.shape[1] != 2:
            raise ValueError("need at least one (length, width) training point")
        if H.shape != (2, 2) or not np.allclose(H, H.T):
            raise ValueError("H must be a symmetric 2x2 matrix")
        eigvals = np.linalg.eigvalsh(H)
        if eigvals.min() <= 0:
            raise ValueError("H must be positive definite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "_Hinv", np.linalg.inv(H))
        log_norm = -0.5 * np.log(np.linalg.det(H)) - np.log(2.0 * np.pi) - np.log(len(pts))
        object.__setattr__(self, "_log_norm", float(log_norm))


def fit_shape_prior(shapes, bandwidth=None) -> ShapePrior:
    """Store training shapes; derive a diagonal rule-of-thumb bandwidth when
    none is given: H_jj = (sigma_j * n^(-1/6))^2 with sigma_j the sample std.
    """
    pts = np.atleast_2d(np.asarray(shapes, dtype=float))
    if bandwidth is not None:
        return ShapePrior(points=pts, H=np.asarray(bandwidth, dtype=float))
    n = len(pts)
    if n < 2:
        raise InputError("need >= 2 shapes to derive a bandwidth; pass H explicitly")
    sigma = pts.std(axis=0, ddof=1)
    if (sigma <= 0).any():
        raise InputError("zero variance in a coordinate; pass an explicit bandwidth H")
    h = sigma * n ** (-1.0 / 6.0)
    return ShapePrior(points=pts, H=np.diag(h**2))


def shape_log_density(prior: ShapePrior, a_m: float, b_m: float) -> float:
    """Log KDE density at (a_m, b_m), floored at log(1e-300)."""
    dx = np.array([a_m, b_m]) - prior.points
    hinv = prior._Hinv
    # quadratic form per training point, expanded for the 2x2 case
    q00, q01, q11 = hinv[0, 0], hinv[0, 1], hinv[1, 1]
    u, v = dx[:, 0], dx[:, 1]
    exponents = -0.5 * (q00 * u * u + 2.0 * q01 * u * v + q11 * v * v)
    m = float(exponents.max())
    if m < LOG_DENSITY_FLOOR:
        return float(LOG_DENSITY_FLOOR)
    log_p = prior._log_norm + m + float(np.log(np.exp(exponents - m).sum()))
    return float(max(log_p, LOG_DENSITY_FLOOR))


@dataclass(frozen=True)
class PairFeatures:
    d_angle: float  # radians, in [0, pi/2]
    d_axis: float  # meters

    def __post_init__(self):
        if self.d_angle < 0 or self.d_axis < 0:
            raise ValueError("features must be non-negative")


@dataclass(frozen=True)
class CollinearityModel:
    """Logistic model of the probability that two shapes are one object."""

    bias: float
    w_angle: float  # per radian of angular deviation
    w_dist: float  # per meter of mean axis distance

    def __post_init__(self):
        if not np.all(np.isfinite([self.bias, self.w_angle, self.w_dist])):
            raise ValueError("model weights must be finite")

    def logit(self, f: PairFeatures) -> float:
        return self.bias + self.w_angle * f.d_angle + self.w_dist * f.d_axis


def _axis_endpoints(shape: RectPoly) -> np.ndarray:
    u = axis_dir(shape.rho)
    c = np.asarray(shape.center)
    return np.array([c - (shape.a / 2.0) * u, c + (shape.a / 2.0) * u])


def _dist_to_axis_line(points: np.ndarray, shape: RectPoly) -> np.ndarray:
    u = axis_dir(shape.rho)
    rel = points - np.asarray(shape.center)
    return np.abs(rel[:, 0] * u[1] - rel[:, 1] * u[0])


def pair_features(s1: RectPoly, s2: RectPoly, gsd: float) -> PairFeatures:
    """Differential features of a shape pair: mod-pi angular deviation and the
    symmetric mean distance of axis endpoints to the other shape's axis line,
    converted to meters."""
    d_angle = angle_diff(s1.rho, s2.rho)
    m1 = _dist_to_axis_line(_axis_endpoints(s1), s2).mean()
    m2 = _dist_to_axis_line(_axis_endpoints(s2), s1).mean()
    return PairFeatures(d_angle=float(d_angle), d_axis=float((m1 + m2) / 2.0 * gsd))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def p_same_object(model: CollinearityModel, f: PairFeatures) -> float:
    """Probability the two shapes belong to the same physical object."""
    p = _sigmoid(model.logit(f))
    # keep strictly inside (0, 1)
    return float(min(max(p, 1e-15), 1.0 - 1e-15))


def fit_collinearity(pairs) -> CollinearityModel:
    """Penalized maximum-likelihood logistic fit.

    ``pairs`` is a sequence of (PairFeatures, label).  Fits by Newton
    iterations until the penalized log-likelihood gradient norm drops to
    1e-8, with an L2 penalty of 1e-4 on all three coefficients.
    """
    feats = []
    labels = []
    for f, y in pairs:
        feats.append([1.0, f.d_angle, f.d_axis])
        labels.append(float(y))
    X = np.asarray(feats)
    y = np.asarray(labels)
    if len(np.unique(y)) < 2:
        raise InputError("training labels must include both classes")
    if len(np.unique(X[:, 1:], axis=0)) < 2:
        raise InputError("need at least 2 distinct feature vectors")

    lam = 1e-4
    beta = np.zeros(3)
    for _ in range(200):
        z = X @ beta
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        grad = X.T @ (y - p) - lam * beta
        if np.linalg.norm(grad) <= 1e-8:
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        hess = X.T @ (X * w[:, None]) + lam * np.eye(3)
        beta = beta + np.linalg.solve(hess, grad)
    else:
        if np.linalg.norm(grad) > 1e-6:
            raise RuntimeError("logistic fit did not converge")
    return CollinearityModel(bias=float(beta[0]), w_angle=float(beta[1]), w_dist=float(beta[2]))


@dataclass(frozen=True)
class PriorSet:
    """Everything learned offline: shape prior, collinearity model, merge gate."""

    shape: ShapePrior
    collinearity: CollinearityModel
    merge_threshold: float = 0.5


class BoundPriors:
    """Priors bound to a raster's ground sampling distance.

    The shape prior is trained in meters, so pixel-space shapes are scaled by
    gsd before evaluation; pair features are likewise returned in meters.
    """

    def __init__(self, priors: PriorSet, gsd: float):
        if gsd <= 0:
            raise ValueError("gsd must be positive")
        self.priors = priors
        self.gsd = gsd

    @property
    def merge_threshold(self) -> float:
        return self.priors.merge_threshold

    def shape_logp(self, shape: RectPoly) -> float:
        return shape_log_density(self.priors.shape, shape.a * self.gsd, shape.b * self.gsd)

    def pair_logit(self, s1: RectPoly, s2: RectPoly) -> float:
        return self.priors.collinearity.logit(pair_features(s1, s2, self.gsd))

    def p_same(self, s1: RectPoly, s2: RectPoly) -> float:
        return p_same_object(self.priors.collinearity, pair_features(s1, s2, self.gsd))


def save_priors(priors: PriorSet, path) -> None:
    payload = {
        "shape_prior": {
            "points": [[float(a), float(b)] for a, b in priors.shape.points],
            "H": priors.shape.H.tolist(),
        },
        "collinearity": {
            "bias": priors.collinearity.bias,
            "w_angle": priors.collinearity.w_angle,
            "w_dist": priors.collinearity.w_dist,
        },
        "merge_threshold": priors.merge_threshold,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_priors(path) -> PriorSet:
    try:
        with open(path) as fh:
            payload = json.load(fh)
        shape = ShapePrior(
            points=np.asarray(payload["shape_prior"]["points"], dtype=float),
            H=np.asarray(payload["shape_prior"]["H"], dtype=float),
        )
        coll = payload["collinearity"]
        model = CollinearityModel(bias=coll["bias"], w_angle=coll["w_angle"], w_dist=coll["w_dist"])
        return PriorSet(shape=shape, collinearity=model, merge_threshold=float(payload.get("merge_threshold", 0.5)))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"invalid priors file {path}: {exc}") from exc


def read_shapes_csv(path) -> np.ndarray:
    """shapes.csv with columns length_m,width_m."""
    rows = _read_csv(path, ("length_m", "width_m"))
    return np.asarray(rows, dtype=float)


def read_pairs_csv(path) -> list[tuple[PairFeatures, int]]:
    """pairs.csv with columns d_angle_rad,d_axis_m,label."""
    rows = _read_csv(path, ("d_angle_rad", "d_axis_m", "label"))
    return [(PairFeatures(d_angle=r[0], d_axis=r[1]), int(r[2])) for r in rows]


def _read_csv(path, columns) -> list[list[float]]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(columns) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                out.append([float(row[c]) for c in columns])
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}:{line_no}: {exc}") from exc
    if not out:
        raise InputError(f"{path}: no data rows")
    return out
