import math

import numpy as np
import pytest

from stemseg.evaluate import (
    Segment,
    SynthSceneSpec,
    classify_complexity,
    det_centerline,
    generate_scene,
    line_pair_matches,
    match_lines,
    match_polygons,
    polygon_intersection_area,
    polygon_iou,
    ref_centerline,
    ref_coverage,
)
from stemseg.geometry import RectPoly, decode_rect


def square(x0, y0, size):
    return np.array([[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size]], dtype=float)


class TestPolygonIntersection:
    def test_shifted_squares(self):
        assert polygon_intersection_area(square(0, 0, 2), square(1, 1, 2)) == pytest.approx(1.0)

    def test_orientation_insensitive(self):
        a = square(0, 0, 2)
        assert polygon_intersection_area(a[::-1], square(1, 0, 2)) == pytest.approx(2.0)

    def test_nonconvex_subject(self):
        # L-shape vs square covering its notch
        lshape = np.array([[0.0, 0], [4, 0], [4, 1], [1, 1], [1, 4], [0, 4]])
        assert polygon_intersection_area(lshape, square(0, 0, 4)) == pytest.approx(7.0)
        assert polygon_intersection_area(square(0, 0, 4), lshape) == pytest.approx(7.0)

    def test_two_nonconvex(self):
        lshape1 = np.array([[0.0, 0], [4, 0], [4, 1], [1, 1], [1, 4], [0, 4]])
        lshape2 = lshape1 + np.array([0.5, 0.0])
        inter = polygon_intersection_area(lshape1, lshape2)
        # overlap: bottom bar [0.5,4]x[0,1] = 3.5 plus column [1,1.5]x[1,4] = 1.5
        assert inter == pytest.approx(5.0)


class TestMatchPolygons:
    def test_identical(self):
        report = match_polygons([square(0, 0, 4)], [square(0, 0, 4)])
        assert report.precision == 1.0 and report.recall == 1.0
        assert report.mean_iou_matched == pytest.approx(1.0)

    def test_exact_half_is_not_a_match(self):
        ref = square(0, 0, 2)  # area 4
        det = np.array([[0.0, 0], [2, 0], [2, 1], [0, 1]])  # inside ref, area 2 = 50% of ref
        report = match_polygons([ref], [det])
        assert report.ref_matched == (False,)  # strictly more than half required
        assert report.det_matched == (True,)  # det is fully inside ref

    def test_empty_sides(self):
        report = match_polygons([], [square(0, 0, 1)])
        assert report.recall is None and report.precision == 0.0
        report = match_polygons([square(0, 0, 1)], [])
        assert report.precision is None and report.recall == 0.0

    def test_double_match_implies_iou_above_third(self):
        rng = np.random.default_rng(1)
        checked = 0
        for _ in range(4000):
            a = float(rng.uniform(2, 12))
            b = float(rng.uniform(0.5, 3))
            ref = decode_rect(RectPoly(a=a, b=b, center=(0, 0), rho=float(rng.uniform(0, np.pi))))
            det = decode_rect(
                RectPoly(
                    a=a * float(rng.uniform(0.5, 1.6)),
                    b=b * float(rng.uniform(0.5, 1.6)),
                    center=(float(rng.uniform(-2, 2)), float(rng.uniform(-1, 1))),
                    rho=float(rng.uniform(0, np.pi)),
                )
            )
            inter = polygon_intersection_area(ref, det)
            ra = polygon_intersection_area(ref, ref)
            da = polygon_intersection_area(det, det)
            if inter / ra > 0.5 and inter / da > 0.5:
                checked += 1
                assert polygon_iou(ref, det) > 1 / 3
        assert checked > 200

    def test_permutation_invariant(self):
        refs = [square(0, 0, 2), square(5, 5, 3)]
        dets = [square(5, 5, 3), square(0.2, 0.2, 2)]
        r1 = match_polygons(refs, dets)
        r2 = match_polygons(refs[::-1], dets[::-1])
        assert r1.precision == r2.precision and r1.recall == r2.recall


class TestComplexity:
    def test_disjoint_simple(self):
        assert classify_complexity([square(0, 0, 2), square(5, 0, 2)]) == [False, False]

    def test_crossing_complex(self):
        r1 = decode_rect(RectPoly(a=10, b=1, center=(0, 0), rho=0.0))
        r2 = decode_rect(RectPoly(a=10, b=1, center=(0, 0), rho=np.pi / 2))
        assert classify_complexity([r1, r2]) == [True, True]

    def test_chain_pairwise(self):
        a = square(0, 0, 2)
        b = square(1.5, 0, 2)
        c = square(3.0, 0, 2)  # touches b, not a
        flags = classify_complexity([a, b, c])
        assert flags == [True, True, True]
        # and a-c alone do not intersect
        assert polygon_intersection_area(a, c) == 0.0


class TestCenterlines:
    def test_axis_aligned(self):
        seg = det_centerline(RectPoly(a=4, b=2, center=(0, 0), rho=0.0))
        assert np.allclose(sorted([seg.p0, seg.p1]), [(-2.0, 0.0), (2.0, 0.0)])

    def test_wide_rect_uses_longer_edge(self):
        seg = det_centerline(RectPoly(a=2, b=6, center=(0, 0), rho=0.0))
        assert seg.length == pytest.approx(6.0)
        assert abs(abs(seg.p1[1] - seg.p0[1]) - 6.0) < 1e-9  # runs vertically

    def test_square_tie_follows_rho(self):
        seg = det_centerline(RectPoly(a=3, b=3, center=(0, 0), rho=0.7))
        assert seg.angle % np.pi == pytest.approx(0.7)

    def test_rotation_equivariance(self):
        for deg in (0, 30, 77, 145):
            rho = math.radians(deg)
            seg = ref_centerline(decode_rect(RectPoly(a=8, b=2, center=(5, 5), rho=rho)))
            d = abs(seg.angle - rho) % np.pi
            assert min(d, np.pi - d) < 1e-6
            assert seg.length == pytest.approx(8.0)


class TestLineMatching:
    def seg(self, x0, y0, x1, y1):
        return Segment(p0=(x0, y0), p1=(x1, y1))

    def test_identical_match(self):
        s = self.seg(0, 0, 10, 0)
        assert line_pair_matches(s, s)

    def test_distance_boundary(self):
        ref = self.seg(0, 0.34, 10, 0.34)
        det = self.seg(0, 0, 10, 0)
        assert line_pair_matches(ref, det)
        assert not line_pair_matches(self.seg(0, 0.35, 10, 0.35), det)  # strictly below 35 cm
        assert not line_pair_matches(self.seg(0, 0.40, 10, 0.40), det)

    def test_angle_boundary(self):
        det = self.seg(0, 0, 10, 0)
        ok = math.radians(4.9)
        bad = math.radians(5.0)
        ref_ok = Segment(p0=(0, 0), p1=(10 * math.cos(ok), 10 * math.sin(ok)))
        ref_bad = Segment(p0=(0, 0), p1=(10 * math.cos(bad), 10 * math.sin(bad)))
        ref_worse = Segment(p0=(0, 0), p1=(10 * math.cos(math.radians(6)), 10 * math.sin(math.radians(6))))
        assert line_pair_matches(ref_ok, det, dist_max=1e9)
        assert not line_pair_matches(ref_bad, det, dist_max=1e9)
        assert not line_pair_matches(ref_worse, det, dist_max=1e9)

    def test_cover_boundary(self):
        det = self.seg(0, 0, 10, 0)
        assert line_pair_matches(self.seg(0, 0, 6.0, 0), det)  # exactly 60% covers
        assert not line_pair_matches(self.seg(0, 0, 5.9, 0), det)

    def test_ref_coverage(self):
        ref = self.seg(0, 0, 10, 0)
        det = self.seg(2, 0, 8, 0)
        assert ref_coverage(ref, det) == pytest.approx(0.6)

    def test_report_and_curve(self):
        refs = [self.seg(0, 0, 10, 0), self.seg(0, 5, 10, 5)]
        dets = [self.seg(0, 0, 10, 0)]
        report = match_lines(refs, dets, ref_complex=[False, False])
        assert report.precision == 1.0
        assert report.ref_matched == (True, False)
        assert report.recall_at_cover == 0.5
        fracs = [f for _, f in report.coverage_curve]
        assert all(a >= b for a, b in zip(fracs, fracs[1:]))
        assert fracs[0] == 0.5

    def test_far_distractor_stable(self):
        refs = [self.seg(0, 0, 10, 0)]
        dets = [self.seg(0, 0, 10, 0)]
        with_distractor = dets + [self.seg(500, 500, 520, 500)]
        r1 = match_lines(refs, dets)
        r2 = match_lines(refs, with_distractor)
        assert r1.ref_matched == r2.ref_matched
        assert r1.recall_at_cover == r2.recall_at_cover

    def test_stratified_precision(self):
        refs = [self.seg(0, 0, 10, 0), self.seg(0, 50, 10, 50)]
        dets = [self.seg(0, 0, 10, 0), self.seg(0, 50.1, 10, 50.1), self.seg(0, 80, 10, 80)]
        report = match_lines(refs, dets, ref_complex=[True, False])
        assert report.precision == pytest.approx(2 / 3)
        assert report.precision_complex == 1.0  # det 0 assigned to complex ref
        assert report.precision_simple == pytest.approx(0.5)  # dets 1 (match) and 2 (nearest=simple)


class TestSceneGenerator:
    def test_deterministic(self):
        spec = SynthSceneSpec(width_px=128, height_px=128, n_stems=4, seed=9)
        r1, t1 = generate_scene(spec)
        r2, t2 = generate_scene(spec)
        assert np.array_equal(r1.values, r2.values)
        assert t1 == t2

    def test_zero_stems(self):
        spec = SynthSceneSpec(width_px=64, height_px=64, n_stems=0, noise_sigma=0.0, seed=1)
        raster, truth = generate_scene(spec)
        assert truth == []
        assert (raster.values == np.float32(0.02)).all()

    def test_single_stem_pixel_count(self):
        spec = SynthSceneSpec(
            width_px=160,
            height_px=160,
            n_stems=1,
            length_range_m=(10.0, 10.0),
            width_range_m=(0.4, 0.4),
            noise_sigma=0.0,
            seed=3,
        )
        raster, truth = generate_scene(spec)
        count = int((raster.values > 0.5).sum())
        # 100 x 4 px nominal, boundary-dependent
        assert abs(count - 400) <= 120

    def test_disjoint_truths_disjoint(self):
        spec = SynthSceneSpec(width_px=256, height_px=256, n_stems=8, seed=5, length_range_m=(3.0, 8.0))
        _, truth = generate_scene(spec)
        polys = [decode_rect(t) for t in truth]
        assert classify_complexity(polys) == [False] * len(polys)

    def test_crossing_pairs_complex(self):
        spec = SynthSceneSpec(
            width_px=256,
            height_px=256,
            n_stems=4,
            overlap_mode="crossing_pairs",
            seed=6,
            length_range_m=(4.0, 8.0),
        )
        _, truth = generate_scene(spec)
        flags = classify_complexity([decode_rect(t) for t in truth])
        assert all(flags)

    def test_fragmentation_splits_foreground(self):
        base = dict(
            width_px=128,
            height_px=128,
            n_stems=1,
            length_range_m=(8.0, 8.0),
            width_range_m=(0.4, 0.4),
            noise_sigma=0.0,
            seed=12,
        )
        solid, _ = generate_scene(SynthSceneSpec(**base))
        gapped, _ = generate_scene(SynthSceneSpec(**base, frag_gap_prob=1.0))
        assert (gapped.values > 0.5).sum() < (solid.values > 0.5).sum()

    def test_invariant_checked(self):
        with pytest.raises(ValueError):
            SynthSceneSpec(p_in=0.4)
        with pytest.raises(ValueError):
            SynthSceneSpec(overlap_mode="stacked")
