"""Sinusoidal excitation patterns and randomized parameter errors.

Pattern model: I(x, y) = I0 * (1 - (m/2) * cos(2*pi*(kx*x + ky*y) + phi))
with kx = k0*cos(theta), ky = k0*sin(theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from simscope.errors import DataError
from simscope.image import Image2D
from simscope.optics import OpticalConfig

# Defaults used by the dataset generator. The jitter magnitudes produce
# visible but recoverable pattern irregularity; k0 backs off 20% from the
# cutoff so jittered draws stay inside the passband.
DEFAULT_MODULATION = 0.8
DEFAULT_INTENSITY = 1.0
DEFAULT_K0_FRACTION = 0.8
DEFAULT_JITTER = None  # set below, after JitterSpec is defined


@dataclass(frozen=True)
class IlluminationParams:
    """Per-frame stripe pattern parameters."""

    i0: float
    m: float
    k0: float
    theta: float
    phi: float

    def __post_init__(self):
        if self.i0 <= 0:
            raise DataError(f"i0 must be > 0, got {self.i0}")
        if not 0.0 <= self.m <= 1.0:
            raise DataError(f"m must be in [0, 1], got {self.m}")
        if self.k0 < 0:
            raise DataError(f"k0 must be >= 0, got {self.k0}")

    @property
    def k_vector(self) -> tuple[float, float]:
        return (self.k0 * math.cos(self.theta), self.k0 * math.sin(self.theta))

    def to_dict(self) -> dict:
        return {"i0": self.i0, "m": self.m, "k0": self.k0, "theta": self.theta, "phi": self.phi}

    @classmethod
    def from_dict(cls, d: dict) -> "IlluminationParams":
        return cls(i0=d["i0"], m=d["m"], k0=d["k0"], theta=d["theta"], phi=d["phi"])


@dataclass(frozen=True)
class JitterSpec:
    """Symmetric uniform error bounds on (k0, theta, phi)."""

    dk_rel: float = 0.0
    dtheta: float = 0.0
    dphi: float = 0.0

    def __post_init__(self):
        for name in ("dk_rel", "dtheta", "dphi"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return {"dk_rel": self.dk_rel, "dtheta": self.dtheta, "dphi": self.dphi}

    @classmethod
    def from_dict(cls, d: dict) -> "JitterSpec":
        return cls(dk_rel=d["dk_rel"], dtheta=d["dtheta"], dphi=d["dphi"])


DEFAULT_JITTER = JitterSpec(dk_rel=0.03, dtheta=0.03, dphi=0.25)


def pattern(config: OpticalConfig, p: IlluminationParams) -> Image2D:
    """Sample the stripe pattern on the physical grid of `config`."""
    x = np.arange(config.width) * config.pixel_size
    y = np.arange(config.height) * config.pixel_size
    xx, yy = np.meshgrid(x, y)
    kx, ky = p.k_vector
    data = p.i0 * (1.0 - (p.m / 2.0) * np.cos(2.0 * np.pi * (kx * xx + ky * yy) + p.phi))
    return Image2D(data=data, pixel_size=config.pixel_size)


def ideal_phase_set(n_phases: int) -> list[float]:
    """Evenly spaced phases {j * 2*pi/n : j = 0..n-1}."""
    if n_phases < 1:
        raise DataError(f"n_phases must be >= 1, got {n_phases}")
    return [2.0 * math.pi * j / n_phases for j in range(n_phases)]


def ideal_angle_set(n_angles: int, offset: float = 0.0) -> list[float]:
    """Stripe orientations spaced pi/n apart (orientations are pi-periodic)."""
    if n_angles < 1:
        raise DataError(f"n_angles must be >= 1, got {n_angles}")
    return [offset + math.pi * j / n_angles for j in range(n_angles)]


def jitter(p: IlluminationParams, spec: JitterSpec, rng: np.random.Generator) -> IlluminationParams:
    """Perturb (k0, theta, phi) with independent uniform draws in [-1, 1].

    Always consumes three draws so the stream position is independent of
    which bounds are zero.
    """
    u = rng.uniform(-1.0, 1.0, size=3)
    return replace(
        p,
        k0=p.k0 * (1.0 + u[0] * spec.dk_rel),
        theta=p.theta + u[1] * spec.dtheta,
        phi=p.phi + u[2] * spec.dphi,
    )


def pattern_set(
    config: OpticalConfig,
    base: IlluminationParams,
    n_angles: int = 3,
    n_phases: int = 3,
    spec: JitterSpec = JitterSpec(),
    rng: np.random.Generator | None = None,
    angle_offset: float = 0.0,
) -> list[tuple[IlluminationParams, Image2D]]:
    """Full frame set, ordered angle-major then phase-minor.

    Stripe frequency and orientation are set by the pattern-generation
    optics and are stable within one orientation, so (k0, theta) jitter is
    drawn once per angle; the phase is stepped between frames and its
    jitter is drawn per frame.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    angle_spec = JitterSpec(dk_rel=spec.dk_rel, dtheta=spec.dtheta, dphi=0.0)
    phase_spec = JitterSpec(dk_rel=0.0, dtheta=0.0, dphi=spec.dphi)
    frames = []
    for theta in ideal_angle_set(n_angles, angle_offset):
        angle_base = jitter(replace(base, theta=theta, phi=0.0), angle_spec, rng)
        for phi in ideal_phase_set(n_phases):
            p = jitter(replace(angle_base, phi=phi), phase_spec, rng)
            frames.append((p, pattern(config, p)))
    return frames
