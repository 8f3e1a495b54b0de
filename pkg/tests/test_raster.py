import numpy as np
import pytest

from stemseg.errors import RasterFormatError
from stemseg.raster import BinaryMask, ProbabilityRaster, load_raster, save_raster, threshold_mask


def make_raster(values, gsd=0.1, origin=(0.0, 0.0)):
    values = np.asarray(values, dtype=np.float32)
    return ProbabilityRaster(width=values.shape[1], height=values.shape[0], gsd=gsd, origin=origin, values=values)


class TestFormat:
    def test_minimal_round_trip(self, tmp_path):
        r = make_raster([[0.0, 1.0]])
        path = tmp_path / "mini.prb"
        save_raster(r, path)
        back = load_raster(path)
        assert back.width == 2 and back.height == 1
        assert back.values.tolist() == [[0.0, 1.0]]

    def test_round_trip_bit_exact_random(self, tmp_path):
        rng = np.random.default_rng(5)
        for seed in range(5):
            vals = rng.random((64, 64), dtype=np.float32)
            r = make_raster(vals, gsd=0.07, origin=(123.25, -7.5))
            path = tmp_path / f"r{seed}.prb"
            save_raster(r, path)
            back = load_raster(path)
            assert np.array_equal(back.values, vals)
            assert back.gsd == r.gsd and back.origin == r.origin

    def test_header_layout(self, tmp_path):
        r = make_raster([[0.5]], gsd=0.1, origin=(1.0, 2.0))
        path = tmp_path / "h.prb"
        save_raster(r, path)
        raw = path.read_bytes()
        header, _, body = raw.partition(b"\n\n")
        lines = header.split(b"\n")
        assert lines[0] == b"PRB1"
        assert lines[1] == b"width=1" and lines[2] == b"height=1"
        assert len(body) == 4

    def test_value_out_of_range_reports_offset(self, tmp_path):
        r = make_raster([[0.25, 0.75]])
        path = tmp_path / "bad.prb"
        save_raster(r, path)
        raw = bytearray(path.read_bytes())
        header_len = len(raw) - 8
        raw[header_len + 4 : header_len + 8] = np.float32(1.5).tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(RasterFormatError) as exc:
            load_raster(path)
        assert "out of range" in str(exc.value)
        assert exc.value.byte_offset == header_len + 4

    def test_nan_rejected(self, tmp_path):
        r = make_raster([[0.25]])
        path = tmp_path / "nan.prb"
        save_raster(r, path)
        raw = bytearray(path.read_bytes())
        raw[-4:] = np.float32(np.nan).tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(RasterFormatError, match="NaN"):
            load_raster(path)

    def test_wrong_value_count(self, tmp_path):
        r = make_raster([[0.25, 0.5]])
        path = tmp_path / "c.prb"
        save_raster(r, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(RasterFormatError, match="payload"):
            load_raster(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.prb"
        path.write_bytes(b"PRBX\nwidth=1\n")
        with pytest.raises(RasterFormatError) as exc:
            load_raster(path)
        assert exc.value.byte_offset == 0

    def test_malformed_header_line(self, tmp_path):
        path = tmp_path / "m2.prb"
        path.write_bytes(b"PRB1\nwidth=abc\n")
        with pytest.raises(RasterFormatError, match="width"):
            load_raster(path)


class TestInvariants:
    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            ProbabilityRaster(width=0, height=1, gsd=0.1, origin=(0, 0), values=np.zeros((1, 0), np.float32))
        with pytest.raises(ValueError):
            make_raster([[0.5]], gsd=0.0)

    def test_value_validation(self):
        with pytest.raises(ValueError):
            make_raster([[1.5]])
        with pytest.raises(ValueError):
            make_raster([[np.nan]])


class TestThreshold:
    def test_below_threshold_all_background(self):
        mask = threshold_mask(make_raster(np.full((4, 4), 0.4)), 0.5)
        assert not mask.bits.any()

    def test_inclusive_boundary(self):
        mask = threshold_mask(make_raster(np.full((4, 4), 0.5)), 0.5)
        assert mask.bits.all()

    def test_checkerboard(self):
        vals = np.full((6, 6), 0.1, dtype=np.float32)
        vals[::2, ::2] = 0.9
        vals[1::2, 1::2] = 0.9
        mask = threshold_mask(make_raster(vals), 0.5)
        assert np.array_equal(mask.bits, vals > 0.5)

    def test_q_bounds_checked(self):
        r = make_raster([[0.5]])
        with pytest.raises(ValueError):
            threshold_mask(r, 0.0)
        with pytest.raises(ValueError):
            threshold_mask(r, 1.0)

    def test_foreground_monotone_in_q(self):
        rng = np.random.default_rng(3)
        r = make_raster(rng.random((32, 32), dtype=np.float32))
        counts = [threshold_mask(r, q).bits.sum() for q in np.linspace(0.05, 0.95, 19)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_foreground_pixels_xy_order(self):
        vals = np.zeros((3, 4), dtype=np.float32)
        vals[2, 1] = 1.0
        pts = threshold_mask(make_raster(vals), 0.5).foreground_pixels()
        assert pts.tolist() == [[1.0, 2.0]]

    def test_mask_shape_checked(self):
        with pytest.raises(ValueError):
            BinaryMask(width=2, height=2, bits=np.zeros((1, 2), dtype=bool))
