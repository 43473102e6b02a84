"""Dataset access through the file interface: TIFF stacks + JSON manifest.

The manifest format is the one written by the simulation toolkit's dataset
generator; this module reads the files directly and shares no code with it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tifffile

MANIFEST_VERSION = 1


class DatasetError(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetItem:
    item_id: str
    stack_path: Path
    gt_path: Path
    split: str


def load_manifest(path) -> list[DatasetItem]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise DatasetError(f"manifest not found: {path}")
    manifest = json.loads(path.read_text())
    version = manifest.get("version")
    if version != MANIFEST_VERSION:
        raise DatasetError(
            f"unsupported manifest version {version!r} (expected {MANIFEST_VERSION})"
        )
    root = path.parent
    return [
        DatasetItem(
            item_id=item["id"],
            stack_path=root / item["stack"],
            gt_path=root / item["ground_truth"],
            split=item["split"],
        )
        for item in manifest["items"]
    ]


def read_tiff(path) -> np.ndarray:
    """Read a TIFF as float32; 16-bit data is scaled by 1/65535."""
    data = tifffile.imread(path)
    if data.dtype == np.uint16:
        return data.astype(np.float32) / 65535.0
    return data.astype(np.float32)


def normalize(arr: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; constant arrays map to zeros."""
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


@dataclass
class LoadedItem:
    item_id: str
    stack: np.ndarray  # (frames, H, W), normalized jointly
    target: np.ndarray  # (H, W), normalized


def load_items(items: list[DatasetItem], in_frames: int) -> list[LoadedItem]:
    loaded = []
    for item in items:
        stack = read_tiff(item.stack_path)
        if stack.ndim != 3 or stack.shape[0] != in_frames:
            raise DatasetError(
                f"{item.stack_path}: expected {in_frames} pages, got shape {stack.shape}"
            )
        target = read_tiff(item.gt_path)
        if target.shape != stack.shape[1:]:
            raise DatasetError(
                f"{item.gt_path}: ground truth {target.shape} does not match "
                f"stack pages {stack.shape[1:]}"
            )
        loaded.append(
            LoadedItem(
                item_id=item.item_id,
                stack=normalize(stack),
                target=normalize(target),
            )
        )
    if not loaded:
        raise DatasetError("no items in the requested split")
    return loaded


def iterate_crops(
    items: list[LoadedItem], crop: int, batch_size: int, rng: np.random.Generator
):
    """One epoch of aligned random crops, shuffled deterministically.

    Yields (inputs, targets) float32 arrays shaped (B, frames, crop, crop)
    and (B, 1, crop, crop).
    """
    order = rng.permutation(len(items))
    batch_in, batch_out = [], []
    for idx in order:
        item = items[idx]
        h, w = item.target.shape
        if h < crop or w < crop:
            raise DatasetError(
                f"item {item.item_id} ({h}x{w}) smaller than crop {crop}"
            )
        y = int(rng.integers(0, h - crop + 1))
        x = int(rng.integers(0, w - crop + 1))
        batch_in.append(item.stack[:, y : y + crop, x : x + crop])
        batch_out.append(item.target[None, y : y + crop, x : x + crop])
        if len(batch_in) == batch_size:
            yield np.stack(batch_in), np.stack(batch_out)
            batch_in, batch_out = [], []
    if batch_in:
        yield np.stack(batch_in), np.stack(batch_out)
