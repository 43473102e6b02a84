"""Residual channel attention network without an upsampling module.

The network maps a multi-frame raw stack (in_frames channels) to a single
reconstructed channel at the same spatial size: residual groups of residual
channel-attention blocks, a long skip connection over the body, and plain
convolutional head/tail layers.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class ModelSpec:
    in_frames: int = 9
    features: int = 64
    n_groups: int = 10
    n_blocks: int = 3
    reduction: int = 16

    def __post_init__(self):
        for name in ("in_frames", "features", "n_groups", "n_blocks", "reduction"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)


class ChannelAttention(nn.Module):
    """Squeeze-and-excitation style gate over feature channels."""

    def __init__(self, features: int, reduction: int):
        super().__init__()
        hidden = max(features // reduction, 1)
        self.body = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.Conv2d(features, hidden, kernel_size=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, features, kernel_size=1),
            nn.Sigmoid(),
        )

    def forward(self, x):
        return x * self.body(x)


class ResidualChannelAttentionBlock(nn.Module):
    def __init__(self, features: int, reduction: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(features, features, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(features, features, kernel_size=3, padding=1),
            ChannelAttention(features, reduction),
        )

    def forward(self, x):
        return x + self.body(x)


class ResidualGroup(nn.Module):
    def __init__(self, features: int, n_blocks: int, reduction: int):
        super().__init__()
        layers = [
            ResidualChannelAttentionBlock(features, reduction) for _ in range(n_blocks)
        ]
        layers.append(nn.Conv2d(features, features, kernel_size=3, padding=1))
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return x + self.body(x)


class RCAN(nn.Module):
    """in_frames x H x W -> 1 x H x W; no spatial resampling anywhere."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        self.head = nn.Conv2d(spec.in_frames, spec.features, kernel_size=3, padding=1)
        groups = [
            ResidualGroup(spec.features, spec.n_blocks, spec.reduction)
            for _ in range(spec.n_groups)
        ]
        groups.append(nn.Conv2d(spec.features, spec.features, kernel_size=3, padding=1))
        self.body = nn.Sequential(*groups)
        self.tail = nn.Conv2d(spec.features, 1, kernel_size=3, padding=1)

    def forward(self, x):
        feat = self.head(x)
        return self.tail(feat + self.body(feat))


def build_model(spec: ModelSpec) -> RCAN:
    return RCAN(spec)


def save_checkpoint(model: RCAN, path) -> None:
    torch.save({"spec": model.spec.to_dict(), "state": model.state_dict()}, path)


def load_checkpoint(path) -> RCAN:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = build_model(ModelSpec.from_dict(payload["spec"]))
    model.load_state_dict(payload["state"])
    model.eval()
    return model
