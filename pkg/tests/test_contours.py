import numpy as np
import pytest

from oracles import points_in_polygon, shoelace
from stemseg.contours import build_regions, extract_level_contours, extract_regions, ContourParams, simplify_polygon
from stemseg.errors import MalformedContourError
from stemseg.geometry import signed_area
from stemseg.raster import ProbabilityRaster


def make_raster(values, gsd=0.1):
    values = np.asarray(values, dtype=np.float32)
    return ProbabilityRaster(width=values.shape[1], height=values.shape[0], gsd=gsd, origin=(0, 0), values=values)


class TestMarchingSquares:
    def test_all_background(self):
        assert extract_level_contours(make_raster(np.zeros((5, 5))), 0.5) == []

    def test_single_pixel_diamond(self):
        # hand-traced: crossings at half distance toward the 4 neighbors
        vals = np.zeros((3, 3))
        vals[1, 1] = 1.0
        rings = extract_level_contours(make_raster(vals), 0.5)
        assert len(rings) == 1
        ring = rings[0]
        assert signed_area(ring) > 0
        expected = {(1.0, 0.5), (1.5, 1.0), (1.0, 1.5), (0.5, 1.0)}
        assert {tuple(np.round(v, 9)) for v in ring} == expected

    def test_all_foreground_enclosed_by_padding(self):
        rings = extract_level_contours(make_raster(np.ones((4, 6))), 0.5)
        assert len(rings) == 1
        # every pixel center inside the single outer ring
        xs, ys = np.meshgrid(np.arange(6), np.arange(4))
        centers = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
        assert points_in_polygon(centers, rings[0]).all()

    def test_disk_area(self):
        n = 81
        yy, xx = np.mgrid[0:n, 0:n]
        disk = (((xx - 40) ** 2 + (yy - 40) ** 2) <= 30**2).astype(float)
        rings = extract_level_contours(make_raster(disk), 0.5)
        assert len(rings) == 1
        area = signed_area(rings[0])
        assert abs(area - np.pi * 900) / (np.pi * 900) < 0.02

    def test_hole_orientation(self):
        vals = np.ones((7, 7))
        vals[3, 3] = 0.0
        rings = extract_level_contours(make_raster(vals), 0.5)
        areas = sorted(signed_area(r) for r in rings)
        assert len(rings) == 2
        assert areas[0] < 0 < areas[1]  # one CW hole, one CCW outer

    def test_every_foreground_center_in_exactly_one_outer(self):
        rng = np.random.default_rng(17)
        vals = (rng.random((24, 24)) > 0.62).astype(float)
        raster = make_raster(vals)
        rings = extract_level_contours(raster, 0.5)
        outers = [r for r in rings if signed_area(r) > 0]
        holes = [r for r in rings if signed_area(r) < 0]
        ys, xs = np.nonzero(vals >= 0.5)
        centers = np.column_stack([xs, ys]).astype(float)
        counts = np.zeros(len(centers), dtype=int)
        for outer in outers:
            counts += points_in_polygon(centers, outer)
        assert (counts == 1).all()
        for hole in holes:
            assert not points_in_polygon(centers, hole).any()

    def test_interpolation_position(self):
        vals = np.zeros((3, 3))
        vals[1, 1] = 0.75  # crossing at t = (0.5-0)/0.75 from the zero neighbor
        rings = extract_level_contours(make_raster(vals), 0.5)
        xs = {round(float(v[0]), 6) for v in rings[0]}
        assert min(xs) == round(0.5 / 0.75, 6)


class TestSimplify:
    def test_collinear_vertex_removed(self):
        ring = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
        out = simplify_polygon(ring, 0.1)
        assert len(out) == 4
        assert abs(shoelace(out)) == 4.0

    def test_eps_zero_identity(self):
        ring = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
        assert simplify_polygon(ring, 0.0) is ring

    def test_noisy_circle_deviation_bound(self):
        rng = np.random.default_rng(2)
        t = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
        radii = 20.0 + rng.uniform(-0.2, 0.2, size=1000)
        ring = np.column_stack([radii * np.cos(t), radii * np.sin(t)])
        out = simplify_polygon(ring, 0.5)
        assert len(out) < len(ring)
        # every original vertex within eps of the simplified polyline
        worst = 0.0
        closed = np.vstack([out, out[:1]])
        for p in ring:
            d = np.inf
            for k in range(len(out)):
                a, b = closed[k], closed[k + 1]
                ab = b - a
                tt = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-12), 0, 1)
                d = min(d, float(np.hypot(*(p - (a + tt * ab)))))
            worst = max(worst, d)
        assert worst <= 0.5 + 1e-9

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        t = np.linspace(0, 2 * np.pi, 300, endpoint=False)
        ring = np.column_stack([np.cos(t) * (10 + rng.uniform(-1, 1, 300)), np.sin(t) * (10 + rng.uniform(-1, 1, 300))])
        once = simplify_polygon(ring, 0.8)
        twice = simplify_polygon(once, 0.8)
        assert np.array_equal(once, twice)

    def test_degenerate_dropped(self):
        sliver = np.array([[0.0, 0.0], [10.0, 0.005], [20.0, 0.0]])
        assert simplify_polygon(sliver, 0.5) is None


class TestBuildRegions:
    def square(self, x0, y0, size, ccw=True):
        ring = np.array([[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size]], dtype=float)
        return ring if ccw else ring[::-1]

    def test_single_outer(self):
        regions = build_regions([self.square(0, 0, 4)])
        assert len(regions) == 1
        assert regions[0].area == 16.0
        assert regions[0].holes == ()

    def test_hole_assignment(self):
        regions = build_regions([self.square(0, 0, 6), self.square(2, 2, 2, ccw=False)])
        assert len(regions) == 1
        assert regions[0].area == 36.0 - 4.0
        assert len(regions[0].holes) == 1

    def test_hole_goes_to_smallest_enclosing(self):
        rings = [self.square(0, 0, 10), self.square(1, 1, 6), self.square(2, 2, 1, ccw=False)]
        regions = build_regions(rings)
        # hole must land in the 6x6 ring, not the 10x10 one
        by_outer = sorted(regions, key=lambda r: -r.area)
        assert len(by_outer[0].holes) == 0
        assert len(by_outer[1].holes) == 1

    def test_two_disjoint(self):
        regions = build_regions([self.square(0, 0, 3), self.square(10, 0, 2)])
        assert len(regions) == 2
        assert regions[0].area >= regions[1].area  # sorted descending
        assert [r.region_id for r in regions] == [0, 1]

    def test_orphan_hole_rejected(self):
        with pytest.raises(MalformedContourError):
            build_regions([self.square(0, 0, 2, ccw=False)])

    def test_min_area_filter(self):
        regions = build_regions([self.square(0, 0, 2), self.square(10, 0, 6)], min_area=10.0)
        assert len(regions) == 1
        assert regions[0].area == 36.0

    def test_region_area_bounded_by_raster(self):
        rng = np.random.default_rng(4)
        vals = (rng.random((20, 20)) > 0.5).astype(float)
        raster = make_raster(vals)
        regions = extract_regions(raster, ContourParams(q=0.5, eps_d=0.0))
        assert sum(r.area for r in regions) <= 400.0
