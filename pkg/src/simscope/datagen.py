"""Dataset generation: image corpus -> raw stacks + ground truths + manifest.

Each corpus image is converted to a normalized grayscale sample, imaged
through the simulated microscope with randomized pattern parameters and
noise, and written as a float32 TIFF stack alongside its ground truth.
A JSON manifest indexes the items and records the split assignment.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from simscope.errors import DataError
from simscope.forward import NoiseSpec, simulate_stack
from simscope.illumination import (
    DEFAULT_INTENSITY,
    DEFAULT_JITTER,
    DEFAULT_K0_FRACTION,
    DEFAULT_MODULATION,
    IlluminationParams,
    JitterSpec,
)
from simscope.image import Image2D
from simscope.io import read_stack, write_image, write_stack
from simscope.optics import OpticalConfig, cutoff_frequency

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"

# Rec. 709 luma weights for RGB -> grayscale conversion.
_LUMA = np.array([0.2126, 0.7152, 0.0722])

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")

DEFAULT_ETA_RANGE = (0.0, 1.5)
DEFAULT_PIXEL_SIZE = 0.08
DEFAULT_NA = 1.2
DEFAULT_WAVELENGTH = 0.51


@dataclass(frozen=True)
class DatasetSpec:
    source_dir: Path
    out_dir: Path
    count: int
    target_size: int = 512
    na: float = DEFAULT_NA
    wavelength_em: float = DEFAULT_WAVELENGTH
    pixel_size: float = DEFAULT_PIXEL_SIZE
    modulation: float = DEFAULT_MODULATION
    intensity: float = DEFAULT_INTENSITY
    k0_fraction: float = DEFAULT_K0_FRACTION
    jitter: JitterSpec = DEFAULT_JITTER
    eta_range: tuple[float, float] = DEFAULT_ETA_RANGE
    master_seed: int = 0
    split: float = 0.2
    n_angles: int = 3
    n_phases: int = 3

    def __post_init__(self):
        if self.count < 1:
            raise DataError(f"count must be >= 1, got {self.count}")
        if not 0.0 <= self.split < 1.0:
            raise DataError(f"split must be in [0, 1), got {self.split}")
        if self.eta_range[0] > self.eta_range[1] or self.eta_range[0] < 0:
            raise DataError(f"invalid eta_range {self.eta_range}")

    def optics(self) -> OpticalConfig:
        return OpticalConfig(
            na=self.na,
            wavelength_em=self.wavelength_em,
            pixel_size=self.pixel_size,
            width=self.target_size,
            height=self.target_size,
        )

    def base_params(self) -> IlluminationParams:
        k0 = self.k0_fraction * cutoff_frequency(self.optics())
        return IlluminationParams(
            i0=self.intensity, m=self.modulation, k0=k0, theta=0.0, phi=0.0
        )


def to_grayscale(arr: np.ndarray) -> np.ndarray:
    """Collapse an (H, W[, C]) array to (H, W) luminance (Rec. 709)."""
    if arr.ndim == 2:
        return arr.astype(np.float64)
    if arr.ndim == 3 and arr.shape[2] in (3, 4):
        return arr[:, :, :3].astype(np.float64) @ _LUMA
    raise DataError(f"unsupported raster shape {arr.shape}")


def prepare_sample(arr: np.ndarray, target_size: int, pixel_size: float) -> Image2D:
    """Grayscale, center-crop to square, bicubic resize, min-max normalize."""
    gray = to_grayscale(arr)
    h, w = gray.shape
    if min(h, w) < 64:
        raise DataError(f"image too small ({h}x{w}); minimum dimension is 64")
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    cropped = gray[y0 : y0 + side, x0 : x0 + side]
    if side != target_size:
        im = PILImage.fromarray(cropped.astype(np.float32), mode="F")
        im = im.resize((target_size, target_size), resample=PILImage.Resampling.BICUBIC)
        cropped = np.asarray(im, dtype=np.float64)
    lo, hi = float(cropped.min()), float(cropped.max())
    if hi <= lo:
        raise DataError("degenerate (constant) image has zero dynamic range")
    return Image2D(data=(cropped - lo) / (hi - lo), pixel_size=pixel_size)


def load_raster(path: Path) -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            return np.asarray(im)
    except Exception as exc:
        raise DataError(f"undecodable image {path}: {exc}") from exc


def _item_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


def _split_tag(index: int, count: int, split: float) -> str:
    n_train = count - int(round(count * split))
    return "train" if index < n_train else "val"


def _list_sources(source_dir: Path) -> list[Path]:
    files = [
        p
        for p in sorted(source_dir.iterdir())
        if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    ]
    if not files:
        raise DataError(f"no images found in {source_dir}")
    return files


def _outputs_valid(stack_path: Path, gt_path: Path) -> bool:
    if not (stack_path.exists() and gt_path.exists()):
        return False
    try:
        read_stack(stack_path)
        return True
    except DataError:
        return False


def generate_dataset(spec: DatasetSpec) -> dict:
    """Generate (or resume) the dataset; returns the manifest dict.

    Per-item randomness is a pure function of (master_seed, item index), so
    deleting any output and re-running regenerates it identically.
    """
    source_dir = Path(spec.source_dir)
    out_dir = Path(spec.out_dir)
    if not source_dir.is_dir():
        raise DataError(f"source directory not found: {source_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = _list_sources(source_dir)

    config = spec.optics()
    base = spec.base_params()

    entries = []
    index = 0
    skipped = []
    for src in sources:
        if index >= spec.count:
            break
        item_id = f"{index:04d}"
        stack_path = out_dir / f"{item_id}_stack.tif"
        gt_path = out_dir / f"{item_id}_gt.tif"
        try:
            sample = prepare_sample(load_raster(src), spec.target_size, spec.pixel_size)
        except DataError as exc:
            logger.warning("skipping %s: %s", src.name, exc)
            skipped.append({"source": src.name, "reason": str(exc)})
            continue

        rng = _item_rng(spec.master_seed, index)
        eta = float(rng.uniform(*spec.eta_range))
        angle_offset = float(rng.uniform(0.0, math.pi))
        sim_seed = int(rng.integers(0, 2**31 - 1))

        if not _outputs_valid(stack_path, gt_path):
            stack = simulate_stack(
                sample,
                config,
                base,
                n_angles=spec.n_angles,
                n_phases=spec.n_phases,
                jitter_spec=spec.jitter,
                noise=NoiseSpec(eta=eta),
                seed=sim_seed,
                angle_offset=angle_offset,
            )
            write_stack(stack, stack_path)
            write_image(sample, gt_path)

        entries.append(
            {
                "id": item_id,
                "source": src.name,
                "stack": stack_path.name,
                "ground_truth": gt_path.name,
                "eta": eta,
                "seed": sim_seed,
                "split": _split_tag(index, spec.count, spec.split),
            }
        )
        index += 1

    if len(entries) < spec.count:
        raise DataError(
            f"only {len(entries)} of {spec.count} requested items could be generated "
            f"from {len(sources)} source images ({len(skipped)} skipped)"
        )

    manifest = {
        "version": MANIFEST_VERSION,
        "target_size": spec.target_size,
        "optics": config.to_dict(),
        "base_params": base.to_dict(),
        "jitter": spec.jitter.to_dict(),
        "eta_range": list(spec.eta_range),
        "master_seed": spec.master_seed,
        "split": spec.split,
        "n_angles": spec.n_angles,
        "n_phases": spec.n_phases,
        "items": entries,
        "skipped": skipped,
    }
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_manifest(path) -> dict:
    """Read and minimally validate a dataset manifest."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid manifest {path}: {exc}") from exc
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataError(
            f"unsupported manifest version {manifest.get('version')!r} in {path} "
            f"(expected {MANIFEST_VERSION})"
        )
    manifest["_dir"] = str(path.parent)
    return manifest


def make_synthetic_corpus(out_dir, count: int, size: int = 128, seed: int = 0) -> list[Path]:
    """Write a small corpus of natural-image-like (1/f spectrum) PNGs.

    Used by tests and the demo workflow so no external image collection is
    required.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    freq = np.hypot(
        np.fft.fftfreq(size)[:, None], np.fft.fftfreq(size)[None, :]
    )
    for i in range(count):
        spectrum = (
            rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
        ) / (freq + 1.0 / size)
        img = np.real(np.fft.ifft2(spectrum))
        img = (img - img.min()) / (img.max() - img.min())
        path = out_dir / f"synthetic_{i:03d}.png"
        PILImage.fromarray(np.round(255 * img).astype(np.uint8), mode="L").save(path)
        paths.append(path)
    return paths
