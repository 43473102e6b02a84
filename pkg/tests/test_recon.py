import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import estimate_errors, make_config, make_sample, make_stack
from oracles import negated_frequency
from simscope.errors import (
    DataError,
    DegeneratePhaseSetError,
    PatternNotFoundError,
)
from simscope.forward import simulate_stack
from simscope.illumination import IlluminationParams, JitterSpec
from simscope.image import Image2D
from simscope.metrics import psnr
from simscope.optics import ideal_otf
from simscope.recon import (
    ReconParams,
    estimate_pattern_params,
    known_param_estimates,
    make_bandsets,
    reconstruct,
    remix_bands,
    separate_bands,
    shift_band,
    wiener_recombine,
)


def commensurate_stack(size=128, cycles=(36, 14), sample=None, m=0.8, n_angles=1):
    """Noiseless stack whose stripe frequency is an exact grid frequency."""
    config = make_config(size)
    fov = size * config.pixel_size
    kx, ky = cycles[0] / fov, cycles[1] / fov
    base = IlluminationParams(
        i0=1.0, m=m, k0=math.hypot(kx, ky), theta=0.0, phi=0.0
    )
    if sample is None:
        sample = make_sample(size, seed=12)
    return simulate_stack(
        sample,
        config,
        base,
        n_angles=n_angles,
        jitter_spec=JitterSpec(),
        seed=0,
        angle_offset=math.atan2(ky, kx),
    ), sample


class TestSeparateBands:
    def test_duplicate_phases_rejected(self):
        stack, _ = make_stack(64, seed=0)
        with pytest.raises(DegeneratePhaseSetError):
            separate_bands(stack.angle_frames(0), [0.0, 0.0, 2 * math.pi / 3])

    def test_wrong_frame_count_rejected(self):
        stack, _ = make_stack(64, seed=0)
        with pytest.raises(DegeneratePhaseSetError):
            separate_bands(stack.frames[:2], [0.0, 2 * math.pi / 3])

    def test_round_trip_through_mixing(self):
        stack, _ = make_stack(128, seed=3)
        for a in range(stack.n_angles):
            frames = stack.angle_frames(a)
            phases = [p.phi for p in stack.angle_params(a)]
            m = stack.angle_params(a)[0].m
            bands = separate_bands(frames, phases, m=m)
            spectra = np.stack(
                [np.fft.fftshift(np.fft.fft2(fr.data)) for fr in frames]
            )
            remixed = remix_bands(bands, phases, m=m)
            rel = np.linalg.norm(remixed - spectra) / np.linalg.norm(spectra)
            assert rel < 1e-12

    def test_m_zero_side_bands_vanish(self):
        stack, _ = make_stack(128, seed=4, m=0.0, jitter_spec=JitterSpec())
        frames = stack.angle_frames(0)
        phases = [p.phi for p in stack.angle_params(0)]
        c0, cp, cm = separate_bands(frames, phases, m=1.0)
        ref = np.linalg.norm(c0)
        assert np.linalg.norm(cp) < 1e-9 * ref
        assert np.linalg.norm(cm) < 1e-9 * ref

    def test_conjugate_symmetry_of_side_bands(self):
        stack, _ = make_stack(128, seed=5)
        for a in range(stack.n_angles):
            phases = [p.phi for p in stack.angle_params(a)]
            _, cp, cm = separate_bands(stack.angle_frames(a), phases, m=0.8)
            diff = cp - np.conj(negated_frequency(cm))
            rel = np.linalg.norm(diff) / np.linalg.norm(cp)
            assert rel < 1e-6


class TestShiftBand:
    def test_zero_shift_is_identity(self, config128):
        rng = np.random.default_rng(0)
        band = np.fft.fftshift(np.fft.fft2(rng.random(config128.shape)))
        out = shift_band(band, (0.0, 0.0), config128)
        assert np.max(np.abs(out - band)) < 1e-12 * np.max(np.abs(band))

    def test_integer_bin_shift_matches_roll(self, config128):
        rng = np.random.default_rng(1)
        band = np.fft.fftshift(np.fft.fft2(rng.random(config128.shape)))
        fov = config128.width * config128.pixel_size
        p, q = 5, -3  # bins along x (cols) and y (rows)
        out = shift_band(band, (p / fov, q / fov), config128)
        # output(k) = input(k + k0): index roll of the unshifted spectrum
        expected = np.fft.fftshift(
            np.roll(np.fft.ifftshift(band), (-q, -p), axis=(0, 1))
        )
        assert np.max(np.abs(out - expected)) < 1e-9 * np.max(np.abs(band))

    def test_shift_then_inverse_is_identity(self, config128):
        rng = np.random.default_rng(2)
        band = np.fft.fftshift(np.fft.fft2(rng.random(config128.shape)))
        k0 = (1.37, -2.11)
        back = shift_band(shift_band(band, k0, config128), (-k0[0], -k0[1]), config128)
        rms = np.sqrt(np.mean(np.abs(back - band) ** 2))
        assert rms < 1e-9 * np.sqrt(np.mean(np.abs(band) ** 2))


class TestWienerRecombine:
    def test_flat_sample_reconstructs_constant(self):
        flat = Image2D(data=np.full((128, 128), 0.7), pixel_size=0.08)
        stack, _ = commensurate_stack(sample=flat, n_angles=1)
        bandsets = make_bandsets(stack, known_param_estimates(stack))
        out = wiener_recombine(
            bandsets, ideal_otf(stack.config), ReconParams(), rescale=False
        )
        relvar = (out.data.max() - out.data.min()) / abs(out.data.mean())
        assert relvar < 1e-6

    def test_wiener_w_must_be_positive(self):
        with pytest.raises(DataError):
            ReconParams(wiener_w=0.0)


class TestReconstruct:
    def test_six_frame_stack_rejected(self):
        config = make_config(64)
        sample = make_sample(64)
        stack = simulate_stack(
            sample,
            config,
            IlluminationParams(i0=1.0, m=0.8, k0=3.0, theta=0.0, phi=0.0),
            n_angles=3,
            n_phases=2,
            seed=0,
        )
        with pytest.raises(DegeneratePhaseSetError):
            reconstruct(stack)

    def test_no_pattern_raises_not_silently_widefield(self):
        stack, _ = make_stack(128, seed=7, m=0.0, jitter_spec=JitterSpec())
        with pytest.raises(PatternNotFoundError):
            reconstruct(stack)

    def test_linearity_under_input_scaling(self):
        stack, _ = make_stack(128, seed=8)
        scaled = replace(
            stack,
            frames=tuple(fr.with_data(2.0 * fr.data) for fr in stack.frames),
        )
        params = ReconParams(use_known_params=True)
        a = reconstruct(stack, params)
        b = reconstruct(scaled, params)
        assert np.max(np.abs(a.data - b.data)) < 1e-9

    def test_known_vs_estimated_within_tolerance(self):
        stack, sample = make_stack(256, seed=21)
        gt = sample.rescaled()
        known = reconstruct(stack, ReconParams(use_known_params=True))
        estimated = reconstruct(stack, ReconParams(use_known_params=False))
        assert abs(psnr(gt, known) - psnr(gt, estimated)) <= 0.2


class TestEstimatePatternParams:
    def test_zero_jitter_accuracy(self):
        # includes the axis-aligned orientation (offset 0), the hardest case
        for seed, offset in ((30, 0.0), (31, 1.1)):
            stack, _ = make_stack(
                256, seed=seed, jitter_spec=JitterSpec(), angle_offset=offset
            )
            errors = estimate_errors(stack, estimate_pattern_params(stack))
            for k_err, theta_err, phi_err in errors:
                assert k_err < 0.005
                assert theta_err < 0.01
                assert phi_err < 0.02

    def test_modulation_recovered(self):
        stack, _ = make_stack(256, seed=32, jitter_spec=JitterSpec(), angle_offset=0.7)
        for est in estimate_pattern_params(stack):
            assert est.modulation == pytest.approx(0.8, abs=0.1)

    def test_noisy_estimates_valid_or_flagged(self):
        # eta=2: a reported estimate must never be silently off by > 5% in k0
        for seed in range(5):
            stack, _ = make_stack(128, seed=40 + seed, eta=2.0)
            try:
                estimates = estimate_pattern_params(stack)
            except PatternNotFoundError as exc:
                assert exc.peak_snr is not None
                continue
            for k_err, _, _ in estimate_errors(stack, estimates):
                assert k_err < 0.05

    def test_two_phase_groups_rejected(self):
        config = make_config(64)
        stack = simulate_stack(
            make_sample(64),
            config,
            IlluminationParams(i0=1.0, m=0.8, k0=3.0, theta=0.0, phi=0.0),
            n_angles=1,
            n_phases=2,
            seed=0,
        )
        with pytest.raises(DegeneratePhaseSetError):
            estimate_pattern_params(stack)
