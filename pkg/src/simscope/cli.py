"""Command-line interface.

Subcommands: dataset, simulate, widefield, reconstruct, metrics,
bench table|sweep|target, otf. Configuration is layered: built-in defaults
< JSON config file (--config or SIMSCOPE_CONFIG) < command-line flags.
Exit codes: 0 success, 2 usage error, 3 data error, 4 reconstruction failure.
"""

from __future__ import annotations

import functools
import json
import logging
import math
import sys
from dataclasses import dataclass, replace
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from simscope.errors import DataError, ReconstructionError, SimscopeError, UsageError
from simscope.forward import NoiseSpec, simulate_stack, widefield as widefield_op
from simscope.illumination import (
    DEFAULT_INTENSITY,
    DEFAULT_JITTER,
    DEFAULT_K0_FRACTION,
    DEFAULT_MODULATION,
    IlluminationParams,
    JitterSpec,
)
from simscope.io import read_image, read_stack, write_image, write_stack
from simscope.metrics import psnr, ssim
from simscope.optics import OpticalConfig, cutoff_frequency, ideal_otf, psf_from_otf
from simscope.recon import ReconParams, reconstruct

logger = logging.getLogger("simscope")

CONFIG_ENV_VAR = "SIMSCOPE_CONFIG"


def _version() -> str:
    try:
        return metadata.version("simscope")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "unknown"


@dataclass(frozen=True)
class ToolConfig:
    """Resolved tool-level defaults (optics, illumination, jitter, recon)."""

    na: float = 1.2
    wavelength_em: float = 0.51
    pixel_size: float = 0.08
    modulation: float = DEFAULT_MODULATION
    intensity: float = DEFAULT_INTENSITY
    k0_fraction: float = DEFAULT_K0_FRACTION
    jitter_dk_rel: float = DEFAULT_JITTER.dk_rel
    jitter_dtheta: float = DEFAULT_JITTER.dtheta
    jitter_dphi: float = DEFAULT_JITTER.dphi
    wiener_w: float = 0.1
    log_level: str = "WARNING"

    def jitter(self) -> JitterSpec:
        return JitterSpec(
            dk_rel=self.jitter_dk_rel, dtheta=self.jitter_dtheta, dphi=self.jitter_dphi
        )

    def optics(self, width: int, height: int) -> OpticalConfig:
        return OpticalConfig(
            na=self.na,
            wavelength_em=self.wavelength_em,
            pixel_size=self.pixel_size,
            width=width,
            height=height,
        )

    def base_params(self, config: OpticalConfig) -> IlluminationParams:
        return IlluminationParams(
            i0=self.intensity,
            m=self.modulation,
            k0=self.k0_fraction * cutoff_frequency(config),
            theta=0.0,
            phi=0.0,
        )


def load_tool_config(path: str | None) -> ToolConfig:
    cfg = ToolConfig()
    if path is None:
        import os

        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return cfg
    file_ = Path(path)
    if not file_.exists():
        raise UsageError(f"config file not found: {file_}")
    try:
        overrides = json.loads(file_.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON config {file_}: {exc}") from exc
    known = set(ToolConfig.__dataclass_fields__)
    unknown = set(overrides) - known
    if unknown:
        raise UsageError(f"unknown config keys in {file_}: {sorted(unknown)}")
    return replace(cfg, **overrides)


def handle_errors(fn):
    """Map toolkit exceptions to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except UsageError as exc:
            click.echo(f"usage error: {exc}", err=True)
            sys.exit(2)
        except ReconstructionError as exc:
            click.echo(f"reconstruction failed: {exc}", err=True)
            sys.exit(4)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(3)
        except SimscopeError as exc:  # pragma: no cover - fallback
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


@click.group()
@click.version_option(version=_version(), prog_name="simscope")
@click.option("--config", "config_path", type=str, default=None,
              help=f"JSON config file (or set {CONFIG_ENV_VAR}).")
@click.option("--log-level", default=None, help="Logging level override.")
@click.pass_context
def main(ctx, config_path, log_level):
    """Structured-illumination microscopy simulation and reconstruction."""
    try:
        cfg = load_tool_config(config_path)
    except UsageError as exc:
        click.echo(f"usage error: {exc}", err=True)
        sys.exit(2)
    level = log_level or cfg.log_level
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING))
    ctx.obj = cfg


@main.command()
@click.option("--source", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--count", required=True, type=int)
@click.option("--size", default=512, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--eta-max", default=1.5, show_default=True, type=float)
@click.option("--split", default=0.2, show_default=True, type=float)
@click.option("--frames", default=9, show_default=True, type=int,
              help="Frames per stack (angles x 3 phases).")
@click.pass_obj
@handle_errors
def dataset(cfg: ToolConfig, source, out_dir, count, size, seed, eta_max, split, frames):
    """Generate a training dataset from an image corpus."""
    from simscope.datagen import DatasetSpec, generate_dataset

    if frames % 3 != 0 or frames < 3:
        raise UsageError(f"--frames must be a positive multiple of 3, got {frames}")
    spec = DatasetSpec(
        source_dir=Path(source),
        out_dir=Path(out_dir),
        count=count,
        target_size=size,
        na=cfg.na,
        wavelength_em=cfg.wavelength_em,
        pixel_size=cfg.pixel_size,
        modulation=cfg.modulation,
        intensity=cfg.intensity,
        k0_fraction=cfg.k0_fraction,
        jitter=cfg.jitter(),
        eta_range=(0.0, eta_max),
        master_seed=seed,
        split=split,
        n_angles=frames // 3,
        n_phases=3,
    )
    manifest = generate_dataset(spec)
    click.echo(f"wrote {len(manifest['items'])} items to {out_dir}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--eta", default=0.0, show_default=True, type=float)
@click.option("--size", default=None, type=int, help="Resize sample to this square size.")
@click.option("--frames", default=9, show_default=True, type=int)
@click.pass_obj
@handle_errors
def simulate(cfg: ToolConfig, in_path, out_path, seed, eta, size, frames):
    """Simulate a raw acquisition stack from a sample image."""
    from simscope.datagen import load_raster, prepare_sample

    if frames % 3 != 0 or frames < 3:
        raise UsageError(f"--frames must be a positive multiple of 3, got {frames}")
    raster = load_raster(Path(in_path))
    target = size if size is not None else min(raster.shape[:2])
    target -= target % 2
    sample = prepare_sample(raster, target, cfg.pixel_size)
    config = cfg.optics(*sample.shape[::-1])
    rng = np.random.default_rng(seed)
    offset = float(rng.uniform(0.0, math.pi))
    stack = simulate_stack(
        sample,
        config,
        cfg.base_params(config),
        n_angles=frames // 3,
        n_phases=3,
        jitter_spec=cfg.jitter(),
        noise=NoiseSpec(eta=eta),
        seed=seed,
        angle_offset=offset,
    )
    write_stack(stack, out_path)
    click.echo(f"wrote {frames}-frame stack to {out_path}")


@main.command("widefield")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--frames", default=9, show_default=True, type=int)
@click.pass_obj
@handle_errors
def widefield_cmd(cfg: ToolConfig, in_path, out_path, frames):
    """Write the wide-field image (mean of raw frames)."""
    stack = read_stack(in_path, frames_per_stack=frames, config=cfg.optics(16, 16))
    write_image(widefield_op(stack).rescaled(), out_path)
    click.echo(f"wrote wide-field image to {out_path}")


@main.command("reconstruct")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--wiener", default=None, type=float, help="Wiener regularization.")
@click.option("--known-params", is_flag=True, default=False,
              help="Use sidecar ground-truth pattern parameters.")
@click.option("--frames", default=9, show_default=True, type=int)
@click.pass_obj
@handle_errors
def reconstruct_cmd(cfg: ToolConfig, in_path, out_path, wiener, known_params, frames):
    """Classical frequency-domain reconstruction of a raw stack."""
    stack = read_stack(in_path, frames_per_stack=frames, config=cfg.optics(16, 16))
    from simscope.io import sidecar_path

    if known_params and not sidecar_path(in_path).exists():
        raise UsageError(f"--known-params requires a sidecar at {sidecar_path(in_path)}")
    params = ReconParams(
        wiener_w=wiener if wiener is not None else cfg.wiener_w,
        use_known_params=known_params,
    )
    result = reconstruct(stack, params)
    write_image(result, out_path)
    click.echo(f"wrote reconstruction to {out_path}")


@main.command("metrics")
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False))
@handle_errors
def metrics_cmd(ref_path, test_path, csv_path):
    """PSNR/SSIM of a test image against a reference."""
    ref = read_image(ref_path).rescaled()
    test = read_image(test_path).rescaled()
    p = psnr(ref, test)
    s = ssim(ref, test)
    click.echo(f"psnr_db={p:.4f} ssim={s:.6f}")
    if csv_path:
        import csv as _csv

        path = Path(csv_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["ref", "test", "psnr_db", "ssim"])
            writer.writerow([ref_path, test_path, f"{p:.6f}", f"{s:.8f}"])


@main.group()
def bench():
    """Benchmark harness (method table, noise sweep, resolution target)."""


@bench.command("table")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--methods", default="widefield,classic", show_default=True)
@click.option("--external-dir", default=None, type=click.Path(file_okay=False))
@click.option("--split", default="val", show_default=True,
              help="Manifest split to score ('val', 'train', or 'all').")
@click.option("--out", "csv_path", default=None, type=click.Path(dir_okay=False))
@click.pass_obj
@handle_errors
def bench_table(cfg: ToolConfig, manifest_path, methods, external_dir, split, csv_path):
    """Method comparison table over a dataset manifest."""
    from simscope.bench import compare_methods, format_table, write_report_csv
    from simscope.datagen import load_manifest

    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    if not method_list:
        raise UsageError("--methods must name at least one method")
    manifest = load_manifest(manifest_path)
    report = compare_methods(
        manifest,
        method_list,
        external_dir=external_dir,
        wiener_w=cfg.wiener_w,
        split=None if split == "all" else split,
    )
    click.echo(format_table(report))
    if csv_path:
        write_report_csv(report, csv_path)


@bench.command("sweep")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--etas", default="0:9:1", show_default=True,
              help="Noise levels as lo:hi:step or comma list.")
@click.option("--seeds", default=5, show_default=True, type=int)
@click.option("--methods", default="widefield,classic", show_default=True)
@click.option("--seed", "master_seed", default=0, show_default=True, type=int)
@click.option("--out", "csv_path", required=True, type=click.Path(dir_okay=False))
@click.option("--plot", "plot_path", default=None, type=click.Path(dir_okay=False))
@click.pass_obj
@handle_errors
def bench_sweep(cfg: ToolConfig, manifest_path, etas, seeds, methods, master_seed,
                csv_path, plot_path):
    """Noise sweep: re-simulate at each eta and score every method."""
    from simscope.bench import SweepSpec, noise_sweep
    from simscope.datagen import load_manifest

    eta_values = _parse_etas(etas)
    manifest = load_manifest(manifest_path)
    spec = SweepSpec(
        etas=tuple(eta_values),
        seeds=seeds,
        manifest=manifest,
        methods=tuple(m.strip() for m in methods.split(",") if m.strip()),
        wiener_w=cfg.wiener_w,
    )
    noise_sweep(spec, csv_path, plot_path=plot_path, master_seed=master_seed)
    click.echo(f"wrote sweep CSV to {csv_path}")


def _parse_etas(text: str) -> list[float]:
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError("empty range")
            values = []
            v = lo
            while v <= hi + 1e-12:
                values.append(round(v, 10))
                v += step
            return values
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"invalid --etas '{text}': {exc}") from exc


@bench.command("target")
@click.option("--size", default=512, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.pass_obj
@handle_errors
def bench_target(cfg: ToolConfig, size, out_path):
    """Write the synthetic resolution target."""
    from simscope.bench import resolution_target

    config = cfg.optics(size, size)
    write_image(resolution_target(size, config), out_path)
    click.echo(f"wrote resolution target to {out_path}")


@main.command("otf")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--psf", "psf_path", default=None, type=click.Path(dir_okay=False))
@click.option("--size", default=256, show_default=True, type=int)
@click.pass_obj
@handle_errors
def otf_cmd(cfg: ToolConfig, out_path, psf_path, size):
    """Write the ideal OTF (and optionally the PSF) as float32 TIFF."""
    from simscope.image import Image2D

    config = cfg.optics(size, size)
    otf = ideal_otf(config)
    write_image(Image2D(data=otf.grid, pixel_size=config.pixel_size), out_path)
    click.echo(f"wrote OTF to {out_path} (cutoff {cutoff_frequency(config):.4f} cyc/um)")
    if psf_path:
        write_image(psf_from_otf(otf), psf_path)
        click.echo(f"wrote PSF to {psf_path}")


if __name__ == "__main__":
    main()
