"""Convolutional sparse coding with stochastic subsampling.

Images are 2-D float arrays. Dictionaries are arrays of shape (K, m, m) and
code maps arrays of shape (K, H, W).
"""

from ._scsc import (
    ConfigError,
    IoError,
    NumericalError,
    ShapeError,
    __version__,
    contrast_normalize,
    infer_codes,
    inpaint,
    nonzero_fraction,
    objective,
    observation_mask,
    psnr,
    psnr_rescaled,
    random_dictionary,
    read_dictionary,
    read_image,
    reconstruct,
    synthetic_scene,
    train_batch,
    train_online,
    write_dictionary,
    write_image,
)

__all__ = [
    "ConfigError",
    "IoError",
    "NumericalError",
    "ShapeError",
    "__version__",
    "contrast_normalize",
    "infer_codes",
    "inpaint",
    "nonzero_fraction",
    "objective",
    "observation_mask",
    "psnr",
    "psnr_rescaled",
    "random_dictionary",
    "read_dictionary",
    "read_image",
    "reconstruct",
    "synthetic_scene",
    "train_batch",
    "train_online",
    "write_dictionary",
    "write_image",
]
