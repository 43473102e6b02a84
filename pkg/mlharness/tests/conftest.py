"""Shared fixtures: a toy dataset generated through the simulation toolkit's
CLI (the only interface this package consumes) and small helper models."""

from __future__ import annotations

import json
import subprocess

import numpy as np
import pytest
import torch

from mlharness.data import LoadedItem
from mlharness.model import ModelSpec, build_model


def run_cli(*args: str) -> subprocess.CompletedProcess:
    proc = subprocess.run([str(a) for a in args], capture_output=True, text=True)
    if proc.returncode != 0:
        raise AssertionError(
            f"command {args} failed ({proc.returncode}):\n{proc.stderr}"
        )
    return proc


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """A 40-item simulated dataset written by the simulation toolkit CLI."""
    root = tmp_path_factory.mktemp("dataset")
    corpus = root / "corpus"
    out = root / "ds"
    run_cli(
        "python3", "-c",
        "import sys; from simscope.datagen import make_synthetic_corpus; "
        f"make_synthetic_corpus({str(corpus)!r}, count=45, size=128, seed=20)",
    )
    run_cli(
        "simscope", "dataset", "--source", corpus, "--out", out,
        "--count", "40", "--size", "128", "--seed", "21", "--split", "0.2",
    )
    return out


@pytest.fixture(scope="session")
def toy_manifest(toy_dataset):
    return json.loads((toy_dataset / "manifest.json").read_text())


@pytest.fixture()
def tiny_model():
    torch.manual_seed(0)
    return build_model(ModelSpec(in_frames=9, features=8, n_groups=1, n_blocks=1))


def synthetic_items(count: int, size: int = 64, seed: int = 0) -> list[LoadedItem]:
    """In-memory items where the target is the mean of the input frames."""
    rng = np.random.default_rng(seed)
    items = []
    for i in range(count):
        stack = rng.random((9, size, size)).astype(np.float32)
        items.append(LoadedItem(f"item_{i}", stack, stack.mean(axis=0)))
    return items
