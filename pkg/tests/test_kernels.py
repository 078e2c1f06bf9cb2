"""The compiled kernels and the numpy fallback must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdopt import _kernels_np

compiled = pytest.importorskip("hdopt._kernels", reason="extension not built")


def _pack(rng: np.random.Generator, nbits: int, rows: int | None = None) -> np.ndarray:
    nwords = (nbits + 63) >> 6
    shape = (rows, nwords) if rows else (nwords,)
    w = rng.integers(0, 2**63, shape, dtype=np.uint64) * 2 + rng.integers(
        0, 2, shape, dtype=np.uint64
    )
    tail = nbits & 63
    if tail:
        w[..., -1] &= np.uint64((1 << tail) - 1)
    return w


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    nbits=st.integers(1, 520),
    rows=st.integers(1, 12),
    odd=st.integers(0, 40),
)
def test_backends_agree(seed, nbits, rows, odd):
    rng = np.random.default_rng(seed)
    a = _pack(rng, nbits)
    b = _pack(rng, nbits)
    mem = _pack(rng, nbits, rows)
    stack = _pack(rng, nbits, 2 * odd + 1)
    nq = int(rng.integers(1, nbits + 1))
    shift = int(rng.integers(-2 * nbits, 2 * nbits + 1))

    assert compiled.popcount_words(a) == _kernels_np.popcount_words(a)
    assert compiled.hamming_words(a, b) == _kernels_np.hamming_words(a, b)
    assert compiled.hamming_prefix(a, b, nq) == _kernels_np.hamming_prefix(a, b, nq)
    np.testing.assert_array_equal(
        compiled.hamming_many(mem, a, nq), _kernels_np.hamming_many(mem, a, nq)
    )
    np.testing.assert_array_equal(
        compiled.majority_words(stack, nbits), _kernels_np.majority_words(stack, nbits)
    )
    np.testing.assert_array_equal(
        compiled.rotate_words(a, nbits, shift), _kernels_np.rotate_words(a, nbits, shift)
    )


def test_even_majority_rejected_by_both():
    rng = np.random.default_rng(0)
    stack = _pack(rng, 64, 4)
    with pytest.raises(ValueError):
        _kernels_np.majority_words(stack, 64)
    with pytest.raises(ValueError):
        compiled.majority_words(stack, 64)


def test_backend_selector_honors_force_flag(monkeypatch):
    import importlib

    import hdopt._backend as backend

    monkeypatch.setenv("HDOPT_FORCE_NUMPY", "1")
    forced = importlib.reload(backend)
    assert forced.BACKEND_NAME == "numpy"
    monkeypatch.delenv("HDOPT_FORCE_NUMPY")
    restored = importlib.reload(backend)
    assert restored.BACKEND_NAME == "cython"
