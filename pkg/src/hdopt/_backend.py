"""Kernel backend selection.

Prefers the compiled Cython kernels and falls back to the numpy
implementations when the extension is unavailable (source checkout without a
build, unsupported platform, ...).  Set ``HDOPT_FORCE_NUMPY=1`` to force the
fallback; this is what the kernel benchmark uses to time both paths.

Both backends are exact integer bit kernels, so results never depend on which
one is active.
"""

from __future__ import annotations

import os

from hdopt import _kernels_np

if os.environ.get("HDOPT_FORCE_NUMPY"):
    _impl = _kernels_np
else:
    try:
        from hdopt import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_np

BACKEND_NAME: str = _impl.BACKEND_NAME
popcount_words = _impl.popcount_words
hamming_words = _impl.hamming_words
hamming_prefix = _impl.hamming_prefix
hamming_many = _impl.hamming_many
majority_words = _impl.majority_words
rotate_words = _impl.rotate_words
