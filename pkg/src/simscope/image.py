"""Single-channel float raster with pixel-pitch metadata."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from simscope.errors import DataError, DimensionMismatchError


@dataclass(frozen=True)
class Image2D:
    """2D single-channel image. `data` is float64, `pixel_size` in micrometers."""

    data: np.ndarray
    pixel_size: float

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"Image2D requires a 2D array, got ndim={arr.ndim}")
        if self.pixel_size <= 0:
            raise DataError(f"pixel_size must be > 0, got {self.pixel_size}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "Image2D":
        return Image2D(data=data, pixel_size=self.pixel_size)

    def rescaled(self) -> "Image2D":
        """Min-max rescale to [0, 1]. Constant images map to zeros."""
        lo = float(self.data.min())
        hi = float(self.data.max())
        if hi == lo:
            return self.with_data(np.zeros_like(self.data))
        return self.with_data((self.data - lo) / (hi - lo))


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "image"):
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(f"{what} rows", a.shape[0], b.shape[0])
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(f"{what} cols", a.shape[1], b.shape[1])
