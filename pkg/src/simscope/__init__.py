"""SIM simulation, classical frequency-domain reconstruction and benchmarking."""

__version__ = "0.1.0"

from simscope.image import Image2D
from simscope.optics import OpticalConfig, TransferFunction, cutoff_frequency, ideal_otf, psf_from_otf
from simscope.illumination import IlluminationParams, JitterSpec, pattern, pattern_set
from simscope.forward import NoiseSpec, RawSimStack, simulate_frame, simulate_stack, widefield
from simscope.recon import ReconParams, estimate_pattern_params, reconstruct
from simscope.metrics import psnr, ssim
from simscope.io import read_image, read_stack, write_image, write_stack

__all__ = [
    "Image2D",
    "OpticalConfig",
    "TransferFunction",
    "cutoff_frequency",
    "ideal_otf",
    "psf_from_otf",
    "IlluminationParams",
    "JitterSpec",
    "pattern",
    "pattern_set",
    "NoiseSpec",
    "RawSimStack",
    "simulate_frame",
    "simulate_stack",
    "widefield",
    "ReconParams",
    "estimate_pattern_params",
    "reconstruct",
    "psnr",
    "ssim",
    "read_image",
    "read_stack",
    "write_image",
    "write_stack",
]
