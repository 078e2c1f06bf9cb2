"""Static optimizer and runtime for high-dimensional binary vector computations."""

__version__ = "0.1.0"

from hdopt.hdvec import (
    Codebook,
    Hypervector,
    RngStream,
    bind,
    bundle,
    distance,
    invert,
    partial_distance,
    permute,
)

__all__ = [
    "__version__",
    "Codebook",
    "Hypervector",
    "RngStream",
    "bind",
    "bundle",
    "distance",
    "invert",
    "partial_distance",
    "permute",
]
