"""Classical frequency-domain SIM reconstruction.

Pipeline: per-orientation band separation (3x3 phase mixing matrix),
illumination parameter estimation, subpixel band shifting, generalized
Wiener recombination with apodization.

Conventions: spectra are stored DC-centered. The mixing matrix rows are
[1, (m/2) e^{+i phi_j}, (m/2) e^{-i phi_j}] for bands (0, +1, -1). With the
pattern model I = i0 (1 - (m/2) cos(...)), the physical coefficients carry
an extra factor of -1/2 relative to these entries, so separated side bands
equal -(i0/2) * shifted-spectrum * OTF; recombination rescales them by -2
to put all bands on the center band's footing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from simscope.errors import DataError, DegeneratePhaseSetError, PatternNotFoundError
from simscope.forward import RawSimStack
from simscope.image import Image2D
from simscope.optics import (
    OpticalConfig,
    TransferFunction,
    cutoff_frequency,
    frequency_grids,
    ideal_otf,
    radial_frequency,
    shifted_otf,
)

# Exponent applied to the triangle apodization window. The plain triangle
# over-attenuates recovered content near the extended cutoff; the square
# root keeps near-limit stripe contrast while still falling to zero at
# k_d + k0.
APOD_POWER = 0.5

# Mixing-matrix modulation is floored to bound noise amplification when the
# estimated m is small; the raw estimate is kept in the BandSet.
MIN_MIXING_MODULATION = 0.3

# Border width (pixels) blended toward the frame mean before separation in
# the full pipeline. The stripe pattern is generally not periodic on the
# grid, so the spectra carry boundary ringing that min-max normalization is
# sensitive to; the taper suppresses it.
EDGE_TAPER_MARGIN = 8

_COND_LIMIT = 1e6


def edge_taper(data: np.ndarray, margin: int = EDGE_TAPER_MARGIN) -> np.ndarray:
    """Blend a frame's borders toward its mean with a cosine ramp."""
    h, w = data.shape
    if margin <= 0 or 2 * margin >= min(h, w):
        return data

    def ramp(n):
        win = np.ones(n)
        t = 0.5 * (1.0 - np.cos(np.pi * (np.arange(margin) + 0.5) / margin))
        win[:margin] = t
        win[n - margin :] = t[::-1]
        return win

    window = np.outer(ramp(h), ramp(w))
    mean = float(data.mean())
    return mean + (data - mean) * window


@dataclass(frozen=True)
class ReconParams:
    wiener_w: float = 0.1
    use_known_params: bool = False

    def __post_init__(self):
        if self.wiener_w <= 0:
            raise DataError(f"wiener_w must be > 0, got {self.wiener_w}")


@dataclass
class PatternEstimate:
    """Per-orientation illumination estimate."""

    k0_vec: tuple[float, float]
    phases: list[float]
    modulation: float
    peak_snr: float
    k_vectors: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class BandSet:
    """Separated spectra for one orientation (DC-centered)."""

    center: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    k0_vec: tuple[float, float]
    phases: list[float]
    modulation: float


def _mixing_matrix(phases, m: float) -> np.ndarray:
    ph = np.asarray(phases, dtype=np.float64)
    return np.stack(
        [
            np.ones_like(ph, dtype=np.complex128),
            (m / 2.0) * np.exp(1j * ph),
            (m / 2.0) * np.exp(-1j * ph),
        ],
        axis=1,
    )


def separate_bands(frames, phases, m: float = 1.0):
    """Unmix center and side bands from three phase-shifted frames.

    Returns DC-centered complex spectra (center, plus, minus).
    """
    if len(frames) != 3 or len(phases) != 3:
        raise DegeneratePhaseSetError(
            f"band separation needs exactly 3 frames/phases per orientation, "
            f"got {len(frames)} (degenerate phase set)"
        )
    mix = _mixing_matrix(phases, max(m, 1e-9))
    if np.linalg.cond(mix) > _COND_LIMIT:
        raise DegeneratePhaseSetError(f"degenerate phase set {list(phases)}: mixing matrix is near-singular")
    spectra = np.stack([np.fft.fftshift(np.fft.fft2(fr.data)) for fr in frames])
    shape = spectra.shape[1:]
    bands = np.linalg.solve(mix, spectra.reshape(3, -1)).reshape(3, *shape)
    return bands[0], bands[1], bands[2]


def remix_bands(bands, phases, m: float = 1.0) -> np.ndarray:
    """Forward mixing (inverse of separate_bands); for round-trip checks."""
    mix = _mixing_matrix(phases, m)
    stacked = np.stack(bands)
    return (mix @ stacked.reshape(3, -1)).reshape(3, *stacked.shape[1:])


def shift_band(band: np.ndarray, k0_vec, config: OpticalConfig) -> np.ndarray:
    """Shift a DC-centered spectrum: output(k) = input(k + k0_vec).

    Implemented as a real-space phase ramp, exact for integer-bin shifts
    and subpixel-accurate for fractional ones.
    """
    sx, sy = k0_vec
    x = np.arange(config.width) * config.pixel_size
    y = np.arange(config.height) * config.pixel_size
    ramp = np.exp(-2j * np.pi * (sx * x[None, :] + sy * y[:, None]))
    real_space = np.fft.ifft2(np.fft.ifftshift(band))
    return np.fft.fftshift(np.fft.fft2(real_space * ramp))


def _upsample2(data: np.ndarray, pixel_size: float) -> tuple[np.ndarray, float]:
    """2x Fourier upsampling (zero-padded spectrum), same field of view.

    The squared frame carries content up to twice the OTF cutoff, which
    aliases on the native grid; squaring the upsampled frame is alias-free.
    """
    h, w = data.shape
    spec = np.fft.fftshift(np.fft.fft2(data))
    padded = np.zeros((2 * h, 2 * w), dtype=np.complex128)
    padded[h // 2 : h // 2 + h, w // 2 : w // 2 + w] = spec
    up = np.fft.ifft2(np.fft.ifftshift(padded)).real * 4.0
    return up, pixel_size / 2.0


def _spectrum_autocorr_peak(frame_sq_spec: np.ndarray, mask: np.ndarray):
    mag = np.abs(frame_sq_spec)
    masked = np.where(mask, mag, 0.0)
    idx = np.unravel_index(int(np.argmax(masked)), masked.shape)
    floor = float(np.median(mag[mask]))
    snr = float(masked[idx] / max(floor, 1e-300))
    return idx, snr


def _fractional_dft(field_: np.ndarray, kx: float, ky: float, pixel_size: float) -> complex:
    """Explicit DFT of a real-space field at an arbitrary frequency (cyc/um)."""
    x = np.arange(field_.shape[1]) * pixel_size
    y = np.arange(field_.shape[0]) * pixel_size
    ex = np.exp(-2j * np.pi * kx * x)
    ey = np.exp(-2j * np.pi * ky * y)
    return complex(ey @ (field_ @ ex))


def _refine_peak(field_sq: np.ndarray, k_start, pixel_size: float, fov: float):
    """Continuous-frequency refinement of the autocorrelation peak."""
    dk = 1.0 / fov

    def neg_power(k):
        return -abs(_fractional_dft(field_sq, k[0], k[1], pixel_size)) ** 2

    res = minimize(
        neg_power,
        x0=np.asarray(k_start, dtype=np.float64),
        method="Nelder-Mead",
        options={"xatol": dk * 1e-3, "fatol": 0.0, "maxiter": 200},
    )
    return float(res.x[0]), float(res.x[1])


def _frame_phase(frame_data: np.ndarray, k_vec, pixel_size: float) -> float:
    """Phase of one frame read from its spectrum autocorrelation at k_vec.

    The autocorrelation of the frame spectrum (the DFT of the squared frame)
    sums the pattern's phase factor coherently over every frequency pair
    separated by k_vec, so the read is robust to the sample's own spectral
    content at any single frequency. The squared frame is mean-subtracted
    and edge-tapered first: the pattern is generally not periodic on the
    grid, and the resulting boundary seam otherwise biases the read when
    the stripes align with a grid axis.
    """
    sq = frame_data * frame_data
    sq = edge_taper(sq - sq.mean()).astype(np.complex128)
    return float(np.angle(-_fractional_dft(sq, k_vec[0], k_vec[1], pixel_size)))


def _refine_by_phase_ramp(frames, phases, k_start, config: OpticalConfig, otf):
    """Refine k0 by fitting the residual phase ramp between matched bands.

    After filtering the center band with the shifted OTF and the shifted
    side band with the unshifted OTF, the two real-space fields are
    pointwise proportional at the true k0; a residual frequency error
    delta-k appears as a phase ramp e^{2*pi*i delta-k . x} on their
    pointwise product. The stripe pattern's frequency is generally not
    commensurate with the grid, so circular convolution wraps a phase seam
    at the frame borders; the seam corruption is spatially localized, and
    fitting the ramp on an interior mask excludes it.
    """
    h, w = config.shape
    margin = max(4, min(20, min(h, w) // 8))
    px = config.pixel_size
    x = np.arange(w) * px
    y = np.arange(h) * px
    xx = np.broadcast_to(x[None, :], (h, w))
    yy = np.broadcast_to(y[:, None], (h, w))
    interior = np.zeros((h, w), dtype=bool)
    interior[margin : h - margin, margin : w - margin] = True
    xm = xx[interior]
    ym = yy[interior]
    psf0 = np.fft.ifft2(np.fft.ifftshift(otf.grid)).real  # origin at (0, 0)
    otf_flat = np.fft.ifftshift(otf.grid)
    dk = 1.0 / (w * px)

    c0, cp, _ = separate_bands(frames, phases, m=1.0)
    cp_real = np.fft.ifft2(np.fft.ifftshift(cp))

    k_vec = (float(k_start[0]), float(k_start[1]))
    for _ in range(2):
        ramp = np.exp(-2j * np.pi * (k_vec[0] * xx + k_vec[1] * yy))
        otf_shift = np.fft.fftshift(np.fft.fft2(psf0 * ramp))
        center_f = np.fft.ifft2(np.fft.ifftshift(c0 * otf_shift))
        side_f = np.fft.ifft2(np.fft.fft2(cp_real * ramp) * otf_flat)
        prod = (np.conj(center_f) * side_f)[interior]

        def neg_coherence(d):
            return -abs(np.sum(prod * np.exp(-2j * np.pi * (d[0] * xm + d[1] * ym))))

        res = minimize(
            neg_coherence,
            x0=np.zeros(2),
            method="Nelder-Mead",
            options={"xatol": dk * 1e-5, "fatol": 0.0, "maxiter": 300},
        )
        k_vec = (k_vec[0] + float(res.x[0]), k_vec[1] + float(res.x[1]))
    return k_vec


def _canonical_halfplane(kx: float, ky: float):
    if ky < 0 or (ky == 0 and kx < 0):
        return -kx, -ky, True
    return kx, ky, False


def estimate_pattern_params(
    stack: RawSimStack,
    otf: TransferFunction | None = None,
    min_peak_snr: float = 5.0,
) -> list[PatternEstimate]:
    """Estimate per-orientation (k0 vector, per-frame phases, modulation).

    The squared frame's spectrum carries the spectrum autocorrelation; its
    off-DC peak sits at the pattern frequency and its complex argument
    encodes the frame phase, with no equidistant-phase assumption.
    """
    if stack.n_phases < 3:
        raise DegeneratePhaseSetError(
            f"parameter estimation needs >= 3 phases per orientation, got {stack.n_phases}"
        )
    config = stack.config
    if otf is None:
        otf = ideal_otf(config)
    kd = cutoff_frequency(config)
    fov = config.width * config.pixel_size

    # grids for the 2x upsampled frame
    up_pitch = config.pixel_size / 2.0
    kx_up = np.fft.fftshift(np.fft.fftfreq(2 * config.width, d=up_pitch))
    ky_up = np.fft.fftshift(np.fft.fftfreq(2 * config.height, d=up_pitch))
    kx_grid, ky_grid = np.meshgrid(kx_up, ky_up)
    kr = np.hypot(kx_grid, ky_grid)
    mask = (kr > 0.25 * kd) & (kr < 1.05 * kd)

    estimates = []
    for a in range(stack.n_angles):
        frames = stack.angle_frames(a)
        k_vectors = []
        snrs = []
        for fr in frames:
            up, _ = _upsample2(fr.data.astype(np.float64), config.pixel_size)
            sq = up**2
            spec = np.fft.fftshift(np.fft.fft2(sq))
            idx, snr = _spectrum_autocorr_peak(spec, mask)
            snrs.append(snr)
            if snr < min_peak_snr:
                raise PatternNotFoundError(
                    f"pattern not found for orientation {a}", peak_snr=snr
                )
            k_coarse = (kx_grid[idx], ky_grid[idx])
            kx, ky = _refine_peak(sq, k_coarse, up_pitch, fov)
            # The spectrum is Hermitian, so the +-k0 peaks are equivalent;
            # fold every frame's peak into the upper half-plane.
            kx, ky, _ = _canonical_halfplane(kx, ky)
            kr = math.hypot(kx, ky)
            if not (0.2 * kd < kr < 1.1 * kd):
                raise PatternNotFoundError(
                    f"pattern not found for orientation {a}: refined peak left the "
                    f"search annulus (|k0| = {kr:.3f} cyc/um)",
                    peak_snr=snr,
                )
            k_vectors.append((kx, ky))
        # The half-plane fold is unstable when the pattern is near-horizontal
        # (ky ~ 0), so align every frame's vector with the first frame's
        # before averaging; the mean is re-canonicalized after refinement.
        ref = k_vectors[0]
        aligned = [
            k if (k[0] * ref[0] + k[1] * ref[1]) >= 0 else (-k[0], -k[1])
            for k in k_vectors
        ]
        k0_vec = (
            float(np.mean([k[0] for k in aligned])),
            float(np.mean([k[1] for k in aligned])),
        )
        # Second stage: alternate the phase-ramp frequency refinement with
        # per-frame phase re-reads at the current frequency; the phases feed
        # the band separation inside the refinement. A spurious peak (e.g.
        # sample structure with no real stripe pattern) yields near-identical
        # phases across the triple, which is reported as a missing pattern.
        try:
            for _ in range(2):
                phases = [
                    _frame_phase(fr.data, k0_vec, config.pixel_size) for fr in frames
                ]
                k0_vec = _refine_by_phase_ramp(frames, phases, k0_vec, config, otf)
        except DegeneratePhaseSetError as exc:
            raise PatternNotFoundError(
                f"pattern not found for orientation {a}: recovered per-frame "
                f"phases are degenerate ({exc})",
                peak_snr=float(min(snrs)),
            ) from exc
        kx, ky, _ = _canonical_halfplane(*k0_vec)
        k0_vec = (kx, ky)
        phases = [_frame_phase(fr.data, k0_vec, config.pixel_size) for fr in frames]
        modulation = _estimate_modulation(frames, phases, k0_vec, config, otf)
        estimates.append(
            PatternEstimate(
                k0_vec=k0_vec,
                phases=phases,
                modulation=modulation,
                peak_snr=float(min(snrs)),
                k_vectors=[k0_vec] * len(frames),
            )
        )
    return estimates


def _estimate_modulation(frames, phases, k0_vec, config, otf) -> float:
    """Least-squares amplitude ratio of the shifted side band to the center band."""
    c0, cp, _ = separate_bands(frames, phases, m=1.0)
    cps = shift_band(cp, k0_vec, config)
    otf_p = shifted_otf(config, k0_vec)
    w = (otf.grid > 0.15) & (otf_p > 0.15)
    a = (c0 * otf_p)[w]
    b = (cps * otf.grid)[w]
    denom = float(np.sum(np.abs(a) ** 2))
    if denom == 0.0:
        return 0.0
    beta = complex(np.sum(np.conj(a) * b)) / denom
    return float(min(abs(2.0 * beta), 1.0))


def known_param_estimates(stack: RawSimStack) -> list[PatternEstimate]:
    """Build per-orientation estimates from the stack's own parameter records."""
    estimates = []
    for a in range(stack.n_angles):
        params = stack.angle_params(a)
        k_vectors = [p.k_vector for p in params]
        k0_vec = (
            float(np.mean([k[0] for k in k_vectors])),
            float(np.mean([k[1] for k in k_vectors])),
        )
        estimates.append(
            PatternEstimate(
                k0_vec=k0_vec,
                phases=[p.phi for p in params],
                modulation=float(np.mean([p.m for p in params])),
                peak_snr=math.inf,
                k_vectors=[tuple(k) for k in k_vectors],
            )
        )
    return estimates


def make_bandsets(stack: RawSimStack, estimates: list[PatternEstimate]) -> list[BandSet]:
    bandsets = []
    for a, est in enumerate(estimates):
        m_mix = max(est.modulation, MIN_MIXING_MODULATION)
        c0, cp, cm = separate_bands(stack.angle_frames(a), est.phases, m=m_mix)
        bandsets.append(
            BandSet(
                center=c0,
                plus=cp,
                minus=cm,
                k0_vec=est.k0_vec,
                phases=list(est.phases),
                modulation=est.modulation,
            )
        )
    return bandsets


def apodization(config: OpticalConfig, k_max: float) -> np.ndarray:
    """Radial window falling to zero at k_max (powered triangle)."""
    kr = radial_frequency(config)
    tri = np.clip(1.0 - kr / k_max, 0.0, None)
    return tri**APOD_POWER


def wiener_recombine(
    bandsets: list[BandSet],
    otf: TransferFunction,
    params: ReconParams = ReconParams(),
    rescale: bool = True,
) -> Image2D:
    """Generalized Wiener merge of all shifted bands, apodized and
    transformed back to real space (min-max rescaled to [0, 1] unless
    `rescale` is false)."""
    config = otf.config
    num = np.zeros(config.shape, dtype=np.complex128)
    den = np.full(config.shape, params.wiener_w**2, dtype=np.float64)
    k0_mags = []
    for bs in bandsets:
        k0 = np.asarray(bs.k0_vec, dtype=np.float64)
        k0_mags.append(float(np.hypot(*k0)))
        # Side bands come out of the mixing matrix scaled by -1/2 relative
        # to the center band (see module docstring).
        contributions = (
            (bs.center, otf.grid),
            (shift_band(-2.0 * bs.plus, tuple(k0), config), shifted_otf(config, tuple(k0))),
            (shift_band(-2.0 * bs.minus, tuple(-k0), config), shifted_otf(config, tuple(-k0))),
        )
        for band, otf_b in contributions:
            num += np.conj(otf_b) * band
            den += np.abs(otf_b) ** 2
    k_max = cutoff_frequency(config) + (max(k0_mags) if k0_mags else 0.0)
    spec = apodization(config, k_max) * num / den
    img = np.real(np.fft.ifft2(np.fft.ifftshift(spec)))
    result = Image2D(data=img, pixel_size=config.pixel_size)
    return result.rescaled() if rescale else result


def reconstruct(stack: RawSimStack, params: ReconParams = ReconParams()) -> Image2D:
    """Full classical reconstruction: estimate (or read) pattern parameters,
    separate, shift and recombine."""
    if stack.n_phases < 3:
        raise DegeneratePhaseSetError(
            f"degenerate phase set: {stack.n_phases} phases per orientation is "
            "underdetermined for 3-band separation"
        )
    if params.use_known_params:
        estimates = known_param_estimates(stack)
    else:
        estimates = estimate_pattern_params(stack)
    # Estimation runs on the raw frames; separation and recombination use
    # edge-tapered frames to suppress boundary ringing in the output.
    tapered = replace(
        stack,
        frames=tuple(
            Image2D(data=edge_taper(fr.data), pixel_size=fr.pixel_size)
            for fr in stack.frames
        ),
    )
    bandsets = make_bandsets(tapered, estimates)
    return wiener_recombine(bandsets, ideal_otf(stack.config), params)
