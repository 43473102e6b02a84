"""Ideal incoherent OTF / PSF generation and the diffraction cutoff."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from simscope.errors import DataError
from simscope.image import Image2D


@dataclass(frozen=True)
class OpticalConfig:
    """Objective NA, emission wavelength and sampling of the image grid.

    Units: wavelength and pixel size in micrometers, frequencies in
    cycles per micrometer.
    """

    na: float
    wavelength_em: float
    pixel_size: float
    width: int
    height: int

    def __post_init__(self):
        if self.na <= 0:
            raise DataError(f"na must be > 0, got {self.na}")
        if self.wavelength_em <= 0:
            raise DataError(f"wavelength_em must be > 0, got {self.wavelength_em}")
        if self.pixel_size <= 0:
            raise DataError(f"pixel_size must be > 0, got {self.pixel_size}")
        for name, n in (("width", self.width), ("height", self.height)):
            if n < 16 or n % 2 != 0:
                raise DataError(f"{name} must be even and >= 16, got {n}")
        kd = 2.0 * self.na / self.wavelength_em
        nyquist = 1.0 / (2.0 * self.pixel_size)
        if kd >= nyquist:
            raise DataError(
                f"cutoff frequency {kd:.4f} cyc/um exceeds grid Nyquist "
                f"{nyquist:.4f} cyc/um; decrease pixel_size"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def to_dict(self) -> dict:
        return {
            "na": self.na,
            "wavelength_em": self.wavelength_em,
            "pixel_size": self.pixel_size,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OpticalConfig":
        return cls(
            na=d["na"],
            wavelength_em=d["wavelength_em"],
            pixel_size=d["pixel_size"],
            width=d["width"],
            height=d["height"],
        )


@dataclass(frozen=True)
class TransferFunction:
    """DC-centered frequency raster of the system transfer function."""

    grid: np.ndarray
    config: OpticalConfig

    def __post_init__(self):
        arr = np.asarray(self.grid, dtype=np.float64)
        if arr.shape != self.config.shape:
            raise DataError(f"OTF grid {arr.shape} does not match config grid {self.config.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", arr)


def cutoff_frequency(config: OpticalConfig) -> float:
    """Incoherent diffraction cutoff k_d = 2 NA / lambda_em (cycles/um)."""
    return 2.0 * config.na / config.wavelength_em


def frequency_grids(config: OpticalConfig) -> tuple[np.ndarray, np.ndarray]:
    """DC-centered (kx, ky) grids in cycles/um, shaped (height, width)."""
    kx = np.fft.fftshift(np.fft.fftfreq(config.width, d=config.pixel_size))
    ky = np.fft.fftshift(np.fft.fftfreq(config.height, d=config.pixel_size))
    return np.meshgrid(kx, ky)


def radial_frequency(config: OpticalConfig) -> np.ndarray:
    kx, ky = frequency_grids(config)
    return np.hypot(kx, ky)


def otf_profile(rho: np.ndarray) -> np.ndarray:
    """Diffraction-limited incoherent 2D OTF vs normalized radius rho = |k|/k_d."""
    rho = np.asarray(rho, dtype=np.float64)
    inside = np.clip(rho, 0.0, 1.0)
    chi = (2.0 / np.pi) * (np.arccos(inside) - inside * np.sqrt(1.0 - inside**2))
    return np.where(rho >= 1.0, 0.0, chi)


def ideal_otf(config: OpticalConfig) -> TransferFunction:
    """Ideal incoherent OTF sampled on the DC-centered frequency grid."""
    kd = cutoff_frequency(config)
    rho = radial_frequency(config) / kd
    return TransferFunction(grid=otf_profile(rho), config=config)


def shifted_otf(config: OpticalConfig, shift: tuple[float, float]) -> np.ndarray:
    """OTF grid evaluated at (k + shift); used for side-band Wiener weights."""
    kd = cutoff_frequency(config)
    kx, ky = frequency_grids(config)
    rho = np.hypot(kx + shift[0], ky + shift[1]) / kd
    return otf_profile(rho)


def psf_from_otf(otf: TransferFunction) -> Image2D:
    """Centered real-space PSF; normalized so pixels sum to 1."""
    psf = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(otf.grid)))
    psf = np.real(psf)
    total = psf.sum()
    if total == 0:
        raise DataError("OTF integrates to zero; cannot normalize PSF")
    return Image2D(data=psf / total, pixel_size=otf.config.pixel_size)
