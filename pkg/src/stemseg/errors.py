"""Exception types shared across the package."""


class InputError(Exception):
    """Invalid user-supplied input (file, config, CLI argument)."""


class RasterFormatError(InputError):
    """Malformed PRB1 raster file. Carries the byte offset of the defect."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte {byte_offset})")
        self.byte_offset = byte_offset


class MalformedContourError(InputError):
    """Contour set that cannot be assembled into valid regions."""
