"""Command-line entry points: mlsim-train and mlsim-infer."""

from __future__ import annotations

import logging
import sys

import click

from mlharness.data import DatasetError, load_items, load_manifest
from mlharness.infer import infer_stack
from mlharness.model import ModelSpec, build_model, load_checkpoint
from mlharness.train import TrainSpec, train


@click.command("mlsim-train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--epochs", default=30, show_default=True, type=int)
@click.option("--crop", default=64, show_default=True, type=int)
@click.option("--batch", default=8, show_default=True, type=int)
@click.option("--lr", default=1e-4, show_default=True, type=float)
@click.option("--loss", default="l1", show_default=True, type=click.Choice(["l1", "l2"]))
@click.option("--frames", default=9, show_default=True, type=int)
@click.option("--features", default=32, show_default=True, type=int)
@click.option("--groups", default=3, show_default=True, type=int)
@click.option("--blocks", default=3, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--log-level", default="INFO", show_default=True)
def train_cmd(manifest_path, out_dir, epochs, crop, batch, lr, loss, frames,
              features, groups, blocks, seed, log_level):
    """Train the network on a generated dataset manifest."""
    logging.basicConfig(level=getattr(logging, log_level.upper(), logging.INFO))
    try:
        items = load_manifest(manifest_path)
        train_items = load_items([i for i in items if i.split == "train"], frames)
        val_items = load_items([i for i in items if i.split == "val"], frames)
        model = build_model(
            ModelSpec(in_frames=frames, features=features, n_groups=groups, n_blocks=blocks)
        )
        spec = TrainSpec(
            epochs=epochs, lr=lr, batch_size=batch, crop=crop, loss=loss, seed=seed
        )
        rows = train(model, train_items, val_items, spec, out_dir)
    except (DatasetError, ValueError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    best = max(r["val_psnr"] for r in rows)
    click.echo(f"trained {epochs} epochs; best val PSNR {best:.3f} dB; "
               f"checkpoints and log in {out_dir}")


@click.command("mlsim-infer")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def infer_cmd(ckpt_path, in_path, out_path):
    """Reconstruct a raw stack TIFF with a trained checkpoint."""
    try:
        model = load_checkpoint(ckpt_path)
        infer_stack(model, in_path, out_path)
    except (DatasetError, ValueError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote reconstruction to {out_path}")
