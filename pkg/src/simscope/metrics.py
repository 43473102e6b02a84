"""PSNR and SSIM image quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from simscope.errors import DataError
from simscope.image import Image2D, check_same_shape

# SSIM defaults from the original publication: 11x11 Gaussian window with
# sigma 1.5, K1=0.01, K2=0.03, dynamic range 1 for normalized images.
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: Image2D, b: Image2D, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE). Identical images return +inf."""
    check_same_shape(a.data, b.data, "psnr input")
    if peak <= 0:
        raise DataError(f"peak must be > 0, got {peak}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: Image2D, b: Image2D) -> float:
    """Mean local SSIM over valid window positions (no padding)."""
    check_same_shape(a.data, b.data, "ssim input")
    h, w = a.data.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise DataError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    x = np.lib.stride_tricks.sliding_window_view(a.data, (SSIM_WINDOW, SSIM_WINDOW))
    y = np.lib.stride_tricks.sliding_window_view(b.data, (SSIM_WINDOW, SSIM_WINDOW))
    mu_x = np.tensordot(x, win, axes=([2, 3], [0, 1]))
    mu_y = np.tensordot(y, win, axes=([2, 3], [0, 1]))
    xx = np.tensordot(x * x, win, axes=([2, 3], [0, 1]))
    yy = np.tensordot(y * y, win, axes=([2, 3], [0, 1]))
    xy = np.tensordot(x * y, win, axes=([2, 3], [0, 1]))
    var_x = xx - mu_x**2
    var_y = yy - mu_y**2
    cov = xy - mu_x * mu_y

    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass
class QualityRecord:
    item_id: str
    method: str
    psnr_db: float
    ssim: float


@dataclass
class QualityReport:
    """Per-item metric records plus per-method aggregates.

    Infinite PSNR values (identical images) are excluded from the PSNR
    aggregate and flagged in `warnings`.
    """

    records: list[QualityRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add(self, item_id: str, method: str, psnr_db: float, ssim_score: float):
        if math.isinf(psnr_db):
            self.warnings.append(f"{item_id}/{method}: identical images (infinite PSNR)")
        self.records.append(QualityRecord(item_id, method, psnr_db, ssim_score))

    def methods(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def mean_psnr(self, method: str) -> float:
        vals = [r.psnr_db for r in self.records if r.method == method and math.isfinite(r.psnr_db)]
        if not vals:
            return math.nan
        return float(np.mean(vals))

    def mean_ssim(self, method: str) -> float:
        vals = [r.ssim for r in self.records if r.method == method]
        if not vals:
            return math.nan
        return float(np.mean(vals))

    def as_rows(self) -> list[dict]:
        return [
            {"id": r.item_id, "method": r.method, "psnr_db": r.psnr_db, "ssim": r.ssim}
            for r in self.records
        ]
