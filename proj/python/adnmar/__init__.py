"""CT metal artifact reduction: simulation, baselines, metrics and ADN inference.

Images are float32 HU arrays of shape (H, W); masks are boolean arrays.
"""

from ._core import (
    ArgumentError,
    DimensionError,
    FormatError,
    Model,
    baseline,
    fbp,
    hu_to_metric,
    psnr,
    radon,
    segment_metal,
    selfcheck,
    ssim,
    synthesize_pair,
)

__all__ = [
    "ArgumentError",
    "DimensionError",
    "FormatError",
    "Model",
    "baseline",
    "fbp",
    "hu_to_metric",
    "psnr",
    "radon",
    "segment_metal",
    "selfcheck",
    "ssim",
    "synthesize_pair",
]
