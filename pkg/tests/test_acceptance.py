"""End-to-end acceptance checks for the full toolkit.

Each test corresponds to one headline guarantee and enforces both the
numeric tolerance and a runtime budget.
"""

import csv
import math
import time

import numpy as np
import pytest

from conftest import (
    default_params,
    estimate_errors,
    make_config,
    make_sample,
    make_stack,
)
from oracles import circular_convolve, ssim_reference
from simscope.bench import (
    SweepSpec,
    compare_methods,
    noise_sweep,
    resolution_target,
    stripe_contrast,
    target_layout,
)
from simscope.datagen import (
    DatasetSpec,
    generate_dataset,
    load_manifest,
    make_synthetic_corpus,
)
from simscope.forward import NoiseSpec, simulate_frame, simulate_stack, widefield
from simscope.illumination import (
    IlluminationParams,
    JitterSpec,
    ideal_phase_set,
    pattern,
)
from simscope.image import Image2D
from simscope.metrics import psnr, ssim
from simscope.optics import (
    cutoff_frequency,
    ideal_otf,
    otf_profile,
    radial_frequency,
)
from simscope.recon import (
    ReconParams,
    estimate_pattern_params,
    reconstruct,
    remix_bands,
    separate_bands,
)


class Budget:
    """Context manager asserting wall-clock runtime stays under a limit."""

    def __init__(self, seconds: float):
        self.limit = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            elapsed = time.monotonic() - self.start
            assert elapsed < self.limit, f"runtime {elapsed:.1f}s over {self.limit}s budget"


def test_pattern_homogeneity():
    config = make_config(64)
    kd = cutoff_frequency(config)
    rng = np.random.default_rng(0)
    with Budget(5.0):
        for _ in range(100):
            theta = float(rng.uniform(0.0, math.pi))
            k0 = float(rng.uniform(0.3, 0.95) * kd)
            total = sum(
                pattern(
                    config,
                    IlluminationParams(i0=1.0, m=0.8, k0=k0, theta=theta, phi=phi),
                ).data
                for phi in ideal_phase_set(3)
            )
            assert (total.max() - total.min()) / total.mean() < 1e-9


def test_otf_contract():
    with Budget(1.0):
        config = make_config(256)
        otf = ideal_otf(config)
        kd = cutoff_frequency(config)
        kr = radial_frequency(config)
        assert otf.grid[128, 128] == pytest.approx(1.0, abs=1e-12)
        assert np.all(otf.grid[kr >= kd] == 0.0)
        # monotone along a dense radial line
        profile = otf_profile(np.linspace(0.0, 1.0, 2001))
        assert np.all(np.diff(profile) <= 0.0)
        assert otf_profile(np.array(0.5)) == pytest.approx(0.39100, abs=1e-5)


def test_convolution_oracle():
    config = make_config(32)
    otf = ideal_otf(config)
    psf_origin = np.fft.ifft2(np.fft.ifftshift(otf.grid)).real
    flat = pattern(
        config, IlluminationParams(i0=1.0, m=0.0, k0=0.0, theta=0.0, phi=0.0)
    )
    with Budget(10.0):
        for seed in range(20):
            field = np.random.default_rng(seed).random((32, 32))
            sample = Image2D(data=field, pixel_size=config.pixel_size)
            fast = simulate_frame(sample, flat, otf).data
            direct = circular_convolve(field, psf_origin)
            rms = math.sqrt(np.mean((fast - direct) ** 2))
            assert rms < 1e-9


def test_noise_model():
    config = make_config(64)
    otf = ideal_otf(config)
    sample = make_sample(64, seed=0)
    pat = pattern(config, default_params(config))
    clean = simulate_frame(sample, pat, otf)
    sigma = float(np.std(clean.data))
    with Budget(30.0):
        for eta in (0.5, 2.0, 9.0):
            residuals = []
            for seed in range(100):
                noisy = simulate_frame(
                    sample, pat, otf, NoiseSpec(eta=eta), np.random.default_rng(seed)
                )
                residuals.append(noisy.data - clean.data)
            measured = float(np.std(np.concatenate(residuals)))
            assert abs(measured / (eta * sigma) - 1.0) < 0.03


def test_band_separation_round_trip():
    with Budget(10.0):
        stack, _ = make_stack(128, seed=17)
        for a in range(stack.n_angles):
            frames = stack.angle_frames(a)
            phases = [p.phi for p in stack.angle_params(a)]
            m = stack.angle_params(a)[0].m
            bands = separate_bands(frames, phases, m=m)
            spectra = np.stack(
                [np.fft.fftshift(np.fft.fft2(fr.data)) for fr in frames]
            )
            rel = np.linalg.norm(remix_bands(bands, phases, m=m) - spectra)
            assert rel / np.linalg.norm(spectra) < 1e-6
        # zero modulation: no side information leaks into the side bands
        flat_stack, _ = make_stack(128, seed=18, m=0.0, jitter_spec=JitterSpec())
        frames = flat_stack.angle_frames(0)
        phases = [p.phi for p in flat_stack.angle_params(0)]
        c0, cp, cm = separate_bands(frames, phases, m=1.0)
        assert np.linalg.norm(cp) < 1e-9 * np.linalg.norm(c0)
        assert np.linalg.norm(cm) < 1e-9 * np.linalg.norm(c0)


def test_parameter_estimation_20_jittered_stacks():
    with Budget(120.0):
        for seed in range(20):
            stack, _ = make_stack(256, seed=seed)  # default jitter, random offset
            estimates = estimate_pattern_params(stack)
            for k_err, theta_err, phi_err in estimate_errors(stack, estimates):
                assert k_err < 0.005
                assert theta_err < 0.01
                assert phi_err < 0.05


def test_resolution_extension():
    with Budget(60.0):
        size = 512
        config = make_config(size)
        kd = cutoff_frequency(config)
        target = resolution_target(size, config)
        layout = target_layout(size, config)
        stack = simulate_stack(
            target,
            config,
            default_params(config),
            jitter_spec=JitterSpec(),
            seed=0,
            angle_offset=0.0,
        )
        wf = widefield(stack).rescaled()
        recon = reconstruct(stack, ReconParams(use_known_params=True))

        def contrast(img, frac):
            y0, y1, x0, x1, freq = layout["stripes"][frac]
            dy, dx = (y1 - y0) // 8, (x1 - x0) // 8
            return stripe_contrast(img, freq, 0.0, (y0 + dy, y1 - dy, x0 + dx, x1 - dx))

        assert contrast(wf, 0.6) > 0.2       # inside the wide-field passband
        assert contrast(wf, 1.3) < 0.05
        assert contrast(recon, 1.3) > 0.2
        assert contrast(wf, 1.6) < 0.01
        assert contrast(recon, 1.6) > 0.1

        spec = np.abs(np.fft.fftshift(np.fft.fft2(recon.data))) ** 2
        kr = radial_frequency(config)
        k0 = default_params(config).k0
        assert np.sum(spec[kr > kd + k0]) < 1e-6 * np.sum(spec)
        # extended support actually carries energy
        annulus = (kr >= kd) & (kr <= kd + k0)
        assert np.sum(spec[annulus]) > 0.01 * np.sum(spec)
        wf_spec = np.abs(np.fft.fftshift(np.fft.fft2(wf.data))) ** 2
        assert np.sum(wf_spec[annulus]) < 1e-6 * np.sum(wf_spec)


def test_table_ordering(tmp_path):
    with Budget(300.0):
        corpus = tmp_path / "corpus"
        make_synthetic_corpus(corpus, count=12, size=256, seed=4)
        spec = DatasetSpec(
            source_dir=corpus,
            out_dir=tmp_path / "ds",
            count=10,
            target_size=256,
            eta_range=(0.0, 0.0),
            master_seed=11,
            split=0.2,
        )
        generate_dataset(spec)
        manifest = load_manifest(tmp_path / "ds")
        report = compare_methods(manifest, ["widefield", "classic"], split=None)
        assert len([r for r in report.records if r.method == "classic"]) == 10
        assert report.mean_psnr("classic") >= report.mean_psnr("widefield") + 1.0
        assert report.mean_ssim("classic") > report.mean_ssim("widefield")


def test_noise_sweep_shape(tmp_path):
    with Budget(900.0):
        corpus = tmp_path / "corpus"
        make_synthetic_corpus(corpus, count=3, size=128, seed=5)
        spec = DatasetSpec(
            source_dir=corpus,
            out_dir=tmp_path / "ds",
            count=2,
            target_size=128,
            eta_range=(0.0, 0.0),
            master_seed=3,
            split=0.0,
        )
        generate_dataset(spec)
        manifest = load_manifest(tmp_path / "ds")
        sweep = SweepSpec(
            etas=tuple(float(e) for e in range(10)), seeds=5, manifest=manifest
        )
        rows = noise_sweep(sweep, tmp_path / "sweep.csv", master_seed=9)
        noise_sweep(sweep, tmp_path / "sweep2.csv", master_seed=9)
        assert (tmp_path / "sweep.csv").read_bytes() == (
            tmp_path / "sweep2.csv"
        ).read_bytes()

        def ssim_at(method, eta, seed):
            for r in rows:
                if r["method"] == method and r["eta"] == eta and r["seed"] == seed:
                    return float(r["ssim"])
            raise AssertionError("row missing")

        for seed in range(5):
            assert ssim_at("widefield", 9.0, seed) < ssim_at("widefield", 0.0, seed)
            drop = ssim_at("classic", 0.0, seed) - ssim_at("classic", 9.0, seed)
            assert drop > 0.1
        with (tmp_path / "sweep.csv").open() as fh:
            n_rows = sum(1 for _ in csv.DictReader(fh))
        assert n_rows == 10 * 5 * 2


def test_metric_oracles():
    with Budget(5.0):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = Image2D(data=rng.random((16, 16)), pixel_size=0.08)
            b = Image2D(data=rng.random((16, 16)), pixel_size=0.08)
            assert ssim(a, b) == pytest.approx(
                ssim_reference(a.data, b.data), abs=1e-9
            )
        zero = Image2D(data=np.zeros((16, 16)), pixel_size=0.08)
        half = Image2D(data=np.full((16, 16), 0.5), pixel_size=0.08)
        tenth = Image2D(data=np.full((16, 16), 0.1), pixel_size=0.08)
        assert psnr(zero, half) == pytest.approx(10 * math.log10(4.0), abs=1e-6)
        assert psnr(zero, tenth) == pytest.approx(20.0, abs=1e-6)


def test_dataset_reproducibility(tmp_path):
    with Budget(120.0):
        corpus = tmp_path / "corpus"
        make_synthetic_corpus(corpus, count=12, size=128, seed=6)

        def build(out):
            spec = DatasetSpec(
                source_dir=corpus,
                out_dir=out,
                count=10,
                target_size=128,
                master_seed=13,
            )
            generate_dataset(spec)

        build(tmp_path / "a")
        build(tmp_path / "b")
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes(), f"{name} differs between runs"
