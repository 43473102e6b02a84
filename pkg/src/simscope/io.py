"""File I/O: float32 multi-page TIFF stacks with JSON sidecars, PNG export.

The canonical interchange format is a multi-page 32-bit float TIFF (frames
in angle-major, phase-minor order) plus a JSON sidecar at `<path>.json`
carrying the optical config, per-frame illumination parameters, noise spec
and seed. Stacks without sidecars (externally acquired data) are loaded
with placeholder parameters and must go through the estimation path.
"""

from __future__ import annotations

import json
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np
import tifffile
from PIL import Image as PILImage

from simscope.errors import DataError
from simscope.forward import NoiseSpec, RawSimStack
from simscope.illumination import IlluminationParams, ideal_angle_set, ideal_phase_set
from simscope.image import Image2D
from simscope.optics import OpticalConfig

SIDECAR_VERSION = 1


def _tool_version() -> str:
    try:
        return metadata.version("simscope")
    except metadata.PackageNotFoundError:  # pragma: no cover - editable edge case
        return "unknown"


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_stack(stack: RawSimStack, path) -> Path:
    """Write a stack as float32 multi-page TIFF plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.stack([fr.data.astype(np.float32) for fr in stack.frames])
    tifffile.imwrite(path, data, photometric="minisblack")
    sidecar = {
        "format_version": SIDECAR_VERSION,
        "tool": {"name": "simscope", "version": _tool_version()},
        "config": stack.config.to_dict(),
        "n_angles": stack.n_angles,
        "n_phases": stack.n_phases,
        "noise": stack.noise.to_dict(),
        "seed": stack.seed,
        "params": [p.to_dict() for p in stack.params],
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def _placeholder_params(n_angles: int, n_phases: int) -> list[IlluminationParams]:
    params = []
    for theta in ideal_angle_set(n_angles):
        for phi in ideal_phase_set(n_phases):
            params.append(IlluminationParams(i0=1.0, m=0.0, k0=0.0, theta=theta, phi=phi))
    return params


def _frames_to_float(pages: np.ndarray, path: Path) -> np.ndarray:
    if pages.dtype == np.uint16:
        return pages.astype(np.float64) / 65535.0
    if pages.dtype in (np.float32, np.float64):
        return pages.astype(np.float64)
    raise DataError(
        f"{path}: unsupported TIFF sample format {pages.dtype}; "
        "expected 16-bit unsigned or 32-bit float"
    )


def read_stack(
    path,
    frames_per_stack: int = 9,
    config: OpticalConfig | None = None,
) -> RawSimStack:
    """Load a stack TIFF, attaching sidecar metadata when present.

    Without a sidecar the page count must be divisible by 3 and match
    `frames_per_stack`; pages are grouped as (frames/3) angles x 3 phases
    in page order, and `config` supplies the optical parameters (grid size
    always comes from the TIFF itself).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"stack file not found: {path}")
    try:
        pages = tifffile.imread(path)
    except Exception as exc:
        raise DataError(f"unreadable TIFF {path}: {exc}") from exc
    if pages.ndim == 2:
        pages = pages[None, :, :]
    if pages.ndim != 3:
        raise DataError(f"{path}: expected a stack of 2-D pages, got shape {pages.shape}")
    data = _frames_to_float(pages, path)
    n, h, w = data.shape

    sc_path = sidecar_path(path)
    if sc_path.exists():
        try:
            meta = json.loads(sc_path.read_text())
            cfg = OpticalConfig.from_dict(meta["config"])
            params = [IlluminationParams.from_dict(d) for d in meta["params"]]
            n_angles = int(meta["n_angles"])
            n_phases = int(meta["n_phases"])
            noise = NoiseSpec(eta=float(meta["noise"]["eta"]))
            seed = meta.get("seed")
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise DataError(f"invalid sidecar {sc_path}: {exc}") from exc
        if cfg.shape != (h, w):
            raise DataError(
                f"{path}: page size {(h, w)} does not match sidecar config grid {cfg.shape}"
            )
        if len(params) != n:
            raise DataError(f"{path}: {n} pages but sidecar lists {len(params)} frames")
    else:
        if n != frames_per_stack:
            raise DataError(
                f"{path}: {n} pages, expected {frames_per_stack} (no sidecar present)"
            )
        if n % 3 != 0:
            raise DataError(f"{path}: frame count {n} is not divisible into 3-phase groups")
        n_angles, n_phases = n // 3, 3
        if config is None:
            raise DataError(f"{path}: no sidecar; an optical config is required")
        cfg = OpticalConfig(
            na=config.na,
            wavelength_em=config.wavelength_em,
            pixel_size=config.pixel_size,
            width=w,
            height=h,
        )
        params = _placeholder_params(n_angles, n_phases)
        noise = NoiseSpec()
        seed = None

    frames = tuple(Image2D(data=fr, pixel_size=cfg.pixel_size) for fr in data)
    return RawSimStack(
        frames=frames,
        params=tuple(params),
        config=cfg,
        noise=noise,
        seed=seed,
        n_angles=n_angles,
        n_phases=n_phases,
    )


def write_image(img: Image2D, path) -> Path:
    """Write a single image: float32 TIFF, or 8-bit PNG (clipped to [0,1])."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix in (".tif", ".tiff"):
        tifffile.imwrite(path, img.data.astype(np.float32), photometric="minisblack")
        return path
    if suffix == ".png":
        data = img.data
        if data.min() < 0.0 or data.max() > 1.0:
            warnings.warn(f"{path}: values outside [0, 1] clipped for PNG export")
            data = np.clip(data, 0.0, 1.0)
        quantized = np.round(255.0 * data).astype(np.uint8)
        PILImage.fromarray(quantized, mode="L").save(path)
        return path
    raise DataError(f"unsupported image format '{path.suffix}' (use .tif/.tiff/.png)")


def read_image(path, pixel_size: float = 1.0) -> Image2D:
    """Read a single-page TIFF (float) or an 8-bit image file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"image file not found: {path}")
    suffix = path.suffix.lower()
    if suffix in (".tif", ".tiff"):
        try:
            data = tifffile.imread(path)
        except Exception as exc:
            raise DataError(f"unreadable TIFF {path}: {exc}") from exc
        if data.ndim != 2:
            raise DataError(f"{path}: expected a single 2-D page, got shape {data.shape}")
        if data.dtype == np.uint16:
            data = data.astype(np.float64) / 65535.0
        elif data.dtype == np.uint8:
            data = data.astype(np.float64) / 255.0
        else:
            data = data.astype(np.float64)
        return Image2D(data=data, pixel_size=pixel_size)
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"unreadable image {path}: {exc}") from exc
    return Image2D(data=arr, pixel_size=pixel_size)
