import math

import numpy as np
import pytest

from simscope.forward import NoiseSpec, simulate_stack
from simscope.illumination import DEFAULT_JITTER, IlluminationParams, JitterSpec
from simscope.image import Image2D
from simscope.optics import OpticalConfig, cutoff_frequency

PIXEL_SIZE = 0.08
NA = 1.2
WAVELENGTH = 0.51


def make_config(size: int = 128, pixel_size: float = PIXEL_SIZE) -> OpticalConfig:
    return OpticalConfig(
        na=NA, wavelength_em=WAVELENGTH, pixel_size=pixel_size, width=size, height=size
    )


def make_sample(size: int = 128, seed: int = 0, pixel_size: float = PIXEL_SIZE) -> Image2D:
    """Natural-image-like sample: filtered 1/f noise, min-max scaled to [0,1]."""
    rng = np.random.default_rng(seed)
    freq = np.hypot(np.fft.fftfreq(size)[:, None], np.fft.fftfreq(size)[None, :])
    spectrum = (
        rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    ) / (freq + 1.0 / size)
    img = np.real(np.fft.ifft2(spectrum))
    img = (img - img.min()) / (img.max() - img.min())
    return Image2D(data=img, pixel_size=pixel_size)


def default_params(config: OpticalConfig, m: float = 0.8) -> IlluminationParams:
    return IlluminationParams(
        i0=1.0, m=m, k0=0.8 * cutoff_frequency(config), theta=0.0, phi=0.0
    )


def make_stack(
    size: int = 128,
    seed: int = 0,
    eta: float = 0.0,
    jitter_spec: JitterSpec = DEFAULT_JITTER,
    angle_offset: float | None = None,
    m: float = 0.8,
):
    """Simulated stack with a per-seed sample and (by default) a random
    per-stack orientation offset, mirroring the dataset generator."""
    config = make_config(size)
    sample = make_sample(size, seed=seed)
    if angle_offset is None:
        angle_offset = float(np.random.default_rng(1000 + seed).uniform(0.0, math.pi))
    stack = simulate_stack(
        sample,
        config,
        default_params(config, m=m),
        jitter_spec=jitter_spec,
        noise=NoiseSpec(eta=eta),
        seed=seed,
        angle_offset=angle_offset,
    )
    return stack, sample


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return float(math.remainder(a, 2.0 * math.pi))


def estimate_errors(stack, estimates):
    """Per-angle (relative k0 error, theta error, max phase error) against
    the stack's own parameter records.

    A stripe pattern is invariant under (k, phi) -> (-k, -phi), so the
    estimate is sign-aligned with the truth before comparing.
    """
    rows = []
    for a, est in enumerate(estimates):
        params = stack.angle_params(a)
        true_vec = params[0].k_vector
        ex, ey = est.k0_vec
        phases = list(est.phases)
        if ex * true_vec[0] + ey * true_vec[1] < 0:
            ex, ey = -ex, -ey
            phases = [-p for p in phases]
        k_true = math.hypot(*true_vec)
        k_err = abs(math.hypot(ex, ey) - k_true) / k_true
        theta_err = abs(
            math.atan2(
                ex * true_vec[1] - ey * true_vec[0],
                ex * true_vec[0] + ey * true_vec[1],
            )
        )
        phi_err = max(abs(wrap_angle(p - q.phi)) for p, q in zip(phases, params))
        rows.append((k_err, theta_err, phi_err))
    return rows


@pytest.fixture()
def config128():
    return make_config(128)
