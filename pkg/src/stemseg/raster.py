"""Probability raster I/O (PRB1 format) and foreground masking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RasterFormatError

MAGIC = b"PRB1"


@dataclass(frozen=True)
class ProbabilityRaster:
    """Gridded per-pixel class probabilities.

    ``values`` is a (height, width) float32 array, row-major with the top row
    first.  ``origin`` holds the world coordinates (meters) of the top-left
    pixel corner; ``gsd`` is the ground sampling distance in meters per pixel.
    World coordinates grow with pixel indices on both axes.
    """

    width: int
    height: int
    gsd: float
    origin: tuple[float, float]
    values: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"raster dimensions must be >= 1, got {self.width}x{self.height}")
        if not self.gsd > 0:
            raise ValueError(f"gsd must be positive, got {self.gsd}")
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.shape != (self.height, self.width):
            raise ValueError(f"values shape {vals.shape} != (height, width) = ({self.height}, {self.width})")
        if np.isnan(vals).any():
            raise ValueError("raster contains NaN values")
        if (vals < 0.0).any() or (vals > 1.0).any():
            raise ValueError("raster contains values outside [0, 1]")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class BinaryMask:
    """Boolean foreground mask with the dimensions of its source raster."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise ValueError(f"mask shape {bits.shape} != ({self.height}, {self.width})")
        object.__setattr__(self, "bits", bits)

    def foreground_pixels(self) -> np.ndarray:
        """Return (N, 2) array of foreground pixel centers as (x, y)."""
        ys, xs = np.nonzero(self.bits)
        return np.column_stack([xs, ys]).astype(np.float64)


def _format_decimal(x: float) -> str:
    # repr round-trips float64 exactly through float()
    return repr(float(x))


def save_raster(raster: ProbabilityRaster, path) -> None:
    """Write a raster in the PRB1 format (bit-exact for float32 values)."""
    header = (
        b"PRB1\n"
        + f"width={raster.width}\n".encode("ascii")
        + f"height={raster.height}\n".encode("ascii")
        + f"gsd={_format_decimal(raster.gsd)}\n".encode("ascii")
        + f"origin_x={_format_decimal(raster.origin[0])}\n".encode("ascii")
        + f"origin_y={_format_decimal(raster.origin[1])}\n".encode("ascii")
        + b"\n"
    )
    body = np.ascontiguousarray(raster.values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def _take_line(data: bytes, pos: int) -> tuple[bytes, int]:
    end = data.find(b"\n", pos)
    if end < 0:
        raise RasterFormatError("unterminated header line", pos)
    return data[pos:end], end + 1


def _parse_field(line: bytes, key: str, pos: int) -> str:
    prefix = key.encode("ascii") + b"="
    if not line.startswith(prefix):
        raise RasterFormatError(f"expected '{key}=' header line", pos)
    return line[len(prefix):].decode("ascii", errors="replace")


def load_raster(path) -> ProbabilityRaster:
    """Load a PRB1 raster, validating header, value count and value range.

    Raises RasterFormatError with the byte offset of the first defect.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0
    line, pos = _take_line(data, pos)
    if line != MAGIC:
        raise RasterFormatError("missing PRB1 magic", 0)

    fields = {}
    for key in ("width", "height", "gsd", "origin_x", "origin_y"):
        start = pos
        line, pos = _take_line(data, pos)
        raw = _parse_field(line, key, start)
        try:
            if key in ("width", "height"):
                value = int(raw)
                if value < 0 or value > 0xFFFFFFFF:
                    raise ValueError
            else:
                value = float(raw)
        except ValueError:
            raise RasterFormatError(f"cannot parse {key} value {raw!r}", start) from None
        fields[key] = value

    start = pos
    line, pos = _take_line(data, pos)
    if line != b"":
        raise RasterFormatError("expected empty separator line after header", start)

    width, height = fields["width"], fields["height"]
    expected = width * height * 4
    body = data[pos:]
    if len(body) != expected:
        raise RasterFormatError(
            f"value payload is {len(body)} bytes, expected {expected} for {width}x{height} floats", pos
        )
    values = np.frombuffer(body, dtype="<f4").reshape(height, width)

    bad = np.isnan(values)
    if bad.any():
        idx = int(np.argmax(bad))
        raise RasterFormatError("NaN value", pos + 4 * idx)
    bad = (values < 0.0) | (values > 1.0)
    if bad.any():
        idx = int(np.argmax(bad))
        raise RasterFormatError(f"value out of range: {float(values.flat[idx])!r}", pos + 4 * idx)

    try:
        return ProbabilityRaster(
            width=width,
            height=height,
            gsd=fields["gsd"],
            origin=(fields["origin_x"], fields["origin_y"]),
            values=values.copy(),
        )
    except ValueError as exc:
        raise RasterFormatError(str(exc), 0) from None


def threshold_mask(raster: ProbabilityRaster, q: float) -> BinaryMask:
    """Binarize: a pixel is foreground iff its value >= q (inclusive)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q}")
    # comparison promotes to float64 so q is not re-quantized
    return BinaryMask(width=raster.width, height=raster.height, bits=raster.values >= q)
