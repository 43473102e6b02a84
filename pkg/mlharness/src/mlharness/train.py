"""Training loop: stepped learning-rate schedule, CSV metrics log,
best-by-validation checkpointing."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from mlharness.data import LoadedItem, iterate_crops
from mlharness.infer import run_model
from mlharness.model import RCAN, save_checkpoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainSpec:
    epochs: int = 30
    lr: float = 1e-4
    lr_halving_period: int = 20
    batch_size: int = 8
    crop: int = 64
    loss: str = "l1"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.crop < 1:
            raise ValueError("epochs, batch_size and crop must be >= 1")
        if self.lr <= 0 or self.lr_halving_period < 1:
            raise ValueError("lr must be > 0 and lr_halving_period >= 1")
        if self.loss not in ("l1", "l2"):
            raise ValueError(f"loss must be 'l1' or 'l2', got {self.loss!r}")


def lr_at_epoch(spec: TrainSpec, epoch: int) -> float:
    """Stepped schedule: halved after every `lr_halving_period` epochs."""
    return spec.lr * 2.0 ** (-(epoch // spec.lr_halving_period))


def _loss_fn(spec: TrainSpec):
    return torch.nn.L1Loss() if spec.loss == "l1" else torch.nn.MSELoss()


def validation_psnr(model: RCAN, val_items: list[LoadedItem]) -> float:
    """Mean PSNR (peak 1) of min-max normalized full-frame outputs."""
    scores = []
    for item in val_items:
        out = run_model(model, item.stack)
        mse = float(np.mean((out - item.target) ** 2))
        if mse == 0.0:
            continue
        scores.append(10.0 * math.log10(1.0 / mse))
    return float(np.mean(scores))


def train(
    model: RCAN,
    train_items: list[LoadedItem],
    val_items: list[LoadedItem],
    spec: TrainSpec,
    out_dir,
) -> list[dict]:
    """Train; returns the per-epoch log (epoch, lr, train_loss, val_psnr).

    Writes `log.csv` and the best-by-validation checkpoint `best.pt` (plus
    `last.pt`) into out_dir.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(spec.seed)
    rng = np.random.default_rng(spec.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.lr)
    criterion = _loss_fn(spec)

    rows = []
    best_psnr = -math.inf
    for epoch in range(spec.epochs):
        lr = lr_at_epoch(spec, epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        losses = []
        for inputs, targets in iterate_crops(
            train_items, spec.crop, spec.batch_size, rng
        ):
            optimizer.zero_grad()
            out = model(torch.from_numpy(inputs))
            loss = criterion(out, torch.from_numpy(targets))
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}: loss {loss.item()}"
                )
            loss.backward()
            optimizer.step()
            losses.append(float(loss.item()))
        val_psnr = validation_psnr(model, val_items)
        rows.append(
            {
                "epoch": epoch,
                "lr": lr,
                "train_loss": float(np.mean(losses)),
                "val_psnr": val_psnr,
            }
        )
        logger.info(
            "epoch %d lr %.2e loss %.5f val_psnr %.3f", epoch, lr, rows[-1]["train_loss"], val_psnr
        )
        if val_psnr > best_psnr:
            best_psnr = val_psnr
            save_checkpoint(model, out_dir / "best.pt")
    save_checkpoint(model, out_dir / "last.pt")

    with (out_dir / "log.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "lr", "train_loss", "val_psnr"])
        writer.writeheader()
        writer.writerows(rows)
    return rows
