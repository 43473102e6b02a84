"""Image formation: excitation x sample, PSF blur, additive Gaussian noise.

D = IFFT(FFT(S * I) * OTF) + N, with N ~ Normal(0, eta * sigma) where sigma
is the standard deviation of the noiseless blurred frame. Convolution is
circular (frequency-domain product, no padding).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from simscope.errors import DataError
from simscope.illumination import IlluminationParams, JitterSpec, pattern_set
from simscope.image import Image2D, check_same_shape
from simscope.optics import OpticalConfig, TransferFunction, ideal_otf

_IMAG_RMS_TOL = 1e-9


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise multiplier eta; std of added noise is eta * sigma(clean frame)."""

    eta: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise DataError(f"eta must be >= 0, got {self.eta}")

    def to_dict(self) -> dict:
        return {"eta": self.eta}


@dataclass(frozen=True)
class RawSimStack:
    """Ordered raw frames plus the parameters that produced them.

    Frames are angle-major, phase-minor: frame f -> (angle f // n_phases,
    phase f % n_phases).
    """

    frames: tuple[Image2D, ...]
    params: tuple[IlluminationParams, ...]
    config: OpticalConfig
    noise: NoiseSpec
    seed: int | None
    n_angles: int
    n_phases: int

    def __post_init__(self):
        frames = tuple(self.frames)
        params = tuple(self.params)
        if len(frames) == 0:
            raise DataError("stack must contain at least one frame")
        if len(frames) != self.n_angles * self.n_phases:
            raise DataError(
                f"frame count {len(frames)} != n_angles*n_phases "
                f"({self.n_angles}*{self.n_phases})"
            )
        if len(params) != len(frames):
            raise DataError(f"{len(params)} param records for {len(frames)} frames")
        shape = frames[0].shape
        for i, fr in enumerate(frames):
            if fr.shape != shape:
                raise DataError(f"frame {i} shape {fr.shape} != frame 0 shape {shape}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "params", params)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def angle_frames(self, angle: int) -> tuple[Image2D, ...]:
        lo = angle * self.n_phases
        return self.frames[lo : lo + self.n_phases]

    def angle_params(self, angle: int) -> tuple[IlluminationParams, ...]:
        lo = angle * self.n_phases
        return self.params[lo : lo + self.n_phases]


def blur(field_: np.ndarray, otf: TransferFunction) -> np.ndarray:
    """Circular convolution with the PSF via frequency-domain product."""
    spec = np.fft.fft2(field_) * np.fft.ifftshift(otf.grid)
    out = np.fft.ifft2(spec)
    imag_rms = np.sqrt(np.mean(out.imag**2))
    scale = max(np.sqrt(np.mean(out.real**2)), 1e-300)
    if imag_rms / scale > _IMAG_RMS_TOL:
        raise DataError(f"unexpected imaginary residue in blurred frame (RMS {imag_rms:.3e})")
    return out.real


def simulate_frame(
    sample: Image2D,
    pattern_img: Image2D,
    otf: TransferFunction,
    noise: NoiseSpec = NoiseSpec(),
    rng: np.random.Generator | None = None,
) -> Image2D:
    """One raw frame: blur(sample * pattern) plus Gaussian noise."""
    check_same_shape(sample.data, pattern_img.data, "sample/pattern")
    check_same_shape(sample.data, otf.grid, "sample/otf")
    clean = blur(sample.data * pattern_img.data, otf)
    if noise.eta > 0:
        if rng is None:
            raise DataError("rng required when eta > 0")
        sigma = float(np.std(clean))
        clean = clean + rng.normal(0.0, noise.eta * sigma, size=clean.shape)
    return Image2D(data=clean, pixel_size=sample.pixel_size)


def simulate_stack(
    sample: Image2D,
    config: OpticalConfig,
    base_params: IlluminationParams,
    n_angles: int = 3,
    n_phases: int = 3,
    jitter_spec: JitterSpec = JitterSpec(),
    noise: NoiseSpec = NoiseSpec(),
    seed: int | None = 0,
    angle_offset: float = 0.0,
) -> RawSimStack:
    """Simulate the full raw acquisition; deterministic for a given seed."""
    if sample.shape != config.shape:
        raise DataError(f"sample shape {sample.shape} != config grid {config.shape}")
    rng = np.random.default_rng(seed)
    otf = ideal_otf(config)
    frames = []
    params = []
    for p, pat in pattern_set(
        config, base_params, n_angles, n_phases, jitter_spec, rng, angle_offset
    ):
        frames.append(simulate_frame(sample, pat, otf, noise, rng))
        params.append(p)
    return RawSimStack(
        frames=tuple(frames),
        params=tuple(params),
        config=config,
        noise=noise,
        seed=seed,
        n_angles=n_angles,
        n_phases=n_phases,
    )


def widefield(stack: RawSimStack) -> Image2D:
    """Pixel-wise mean over all raw frames (diffraction-limited baseline)."""
    data = np.mean([fr.data for fr in stack.frames], axis=0)
    return Image2D(data=data, pixel_size=stack.frames[0].pixel_size)
