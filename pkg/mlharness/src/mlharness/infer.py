"""Inference: whole-frame or tiled with feathered overlap blending.

Outputs are min-max normalized and written as float32 TIFF so they can be
scored directly by the simulation toolkit's metrics and benchmark commands.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import tifffile
import torch

from mlharness.data import DatasetError, normalize, read_tiff
from mlharness.model import RCAN

TILE = 256
OVERLAP = 32


def _feather_window(h: int, w: int, margins: tuple[int, int, int, int]) -> np.ndarray:
    """Blending weights: linear ramps over the overlapped margins.

    margins = (top, bottom, left, right) overlap widths in pixels.
    """
    top, bottom, left, right = margins

    def ramp(n, lo, hi):
        win = np.ones(n)
        if lo > 0:
            win[:lo] = (np.arange(lo) + 1.0) / (lo + 1.0)
        if hi > 0:
            win[n - hi :] = ((np.arange(hi) + 1.0) / (hi + 1.0))[::-1]
        return win

    return np.outer(ramp(h, top, bottom), ramp(w, left, right))


def _forward(model: RCAN, stack: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        out = model(torch.from_numpy(stack[None].astype(np.float32)))
    return out.numpy()[0, 0]


def run_model(
    model: RCAN, stack: np.ndarray, tile: int = TILE, overlap: int = OVERLAP
) -> np.ndarray:
    """Apply the model to a (frames, H, W) stack; returns a normalized (H, W) image.

    Frames larger than `tile` are processed in overlapping tiles blended with
    a feathered window, so arbitrarily large inputs fit in memory.
    """
    model.eval()
    _, h, w = stack.shape
    if h <= tile and w <= tile:
        return normalize(_forward(model, stack))

    step = tile - overlap
    acc = np.zeros((h, w), dtype=np.float64)
    weight = np.zeros((h, w), dtype=np.float64)
    ys = sorted({min(y, max(h - tile, 0)) for y in range(0, h, step)})
    xs = sorted({min(x, max(w - tile, 0)) for x in range(0, w, step)})
    for y0 in ys:
        for x0 in xs:
            y1, x1 = min(y0 + tile, h), min(x0 + tile, w)
            out = _forward(model, stack[:, y0:y1, x0:x1])
            margins = (
                overlap if y0 > 0 else 0,
                overlap if y1 < h else 0,
                overlap if x0 > 0 else 0,
                overlap if x1 < w else 0,
            )
            win = _feather_window(y1 - y0, x1 - x0, margins)
            acc[y0:y1, x0:x1] += win * out
            weight[y0:y1, x0:x1] += win
    return normalize(acc / weight)


def infer_stack(model: RCAN, in_path, out_path) -> Path:
    """Read a raw stack TIFF, reconstruct, write a float32 TIFF."""
    stack = read_tiff(in_path)
    if stack.ndim != 3:
        raise DatasetError(f"{in_path}: expected a multi-page stack, got {stack.shape}")
    if stack.shape[0] != model.spec.in_frames:
        raise DatasetError(
            f"{in_path}: {stack.shape[0]} frames but the model expects "
            f"{model.spec.in_frames}"
        )
    out = run_model(model, normalize(stack))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tifffile.imwrite(out_path, out.astype(np.float32), photometric="minisblack")
    return out_path
