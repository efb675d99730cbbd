"""Localized learned tomographic reconstruction.

Volumes are numpy arrays shaped (nz, ny, nx); tilt stacks are shaped
(n_tilts, height, width). Angles are in radians.
"""

from ._core import (
    CorruptionError,
    DivergenceError,
    Error,
    FormatError,
    InvalidArgument,
    IoError,
    Model,
    add_noise,
    add_noise_pair,
    backproject,
    config_defaults,
    dwt3,
    fbp,
    filter_stack,
    fsc,
    idwt3,
    make_phantom,
    mse,
    pearson,
    project,
    psnr,
    read_mrc,
    read_tlt,
    simulate_to,
    tilt_range,
    train_to,
    write_mrc,
    write_tlt,
)

__all__ = [name for name in dir() if not name.startswith("_")]
