"""Pure-numpy implementations of the packed-bit kernels.

Vectors are stored as little-endian packed words: logical bit ``i`` lives at
``(words[i >> 6] >> (i & 63)) & 1``.  Every kernel here has a compiled twin in
``hdopt._kernels`` (Cython); the two must agree bit-for-bit, which the test
suite and ``benchmarks/kernel_bench.py`` both check.  Backend selection happens
in :mod:`hdopt._backend`.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def popcount_words(words: np.ndarray) -> int:
    """Total number of set bits in a packed uint64 array."""
    return int(np.bitwise_count(words).sum())


def hamming_words(a: np.ndarray, b: np.ndarray) -> int:
    """Raw Hamming distance between two packed vectors of equal word length."""
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def hamming_prefix(a: np.ndarray, b: np.ndarray, nbits: int) -> int:
    """Hamming distance over the first ``nbits`` bits of two packed vectors."""
    nwords = (nbits + 63) >> 6
    x = np.bitwise_xor(a[:nwords], b[:nwords])
    tail = nbits & 63
    if tail:
        x[-1] &= np.uint64((1 << tail) - 1)
    return int(np.bitwise_count(x).sum())


def hamming_many(mem: np.ndarray, q: np.ndarray, nbits: int) -> np.ndarray:
    """Hamming distances from ``q`` to each row of ``mem`` over ``nbits`` bits.

    ``mem`` has shape (rows, words); rows may be longer than needed, only the
    prefix covering ``nbits`` is read.
    """
    nwords = (nbits + 63) >> 6
    x = np.bitwise_xor(mem[:, :nwords], q[:nwords])
    tail = nbits & 63
    if tail:
        x[:, -1] &= np.uint64((1 << tail) - 1)
    return np.bitwise_count(x).sum(axis=1, dtype=np.int64)


def majority_words(stack: np.ndarray, nbits: int) -> np.ndarray:
    """Bitwise majority vote over the rows of ``stack`` (shape (k, words)).

    ``k`` must be odd so no tie is possible.  Returns a packed row of the same
    word length.
    """
    k, nwords = stack.shape
    if k % 2 == 0:
        raise ValueError("majority vote needs an odd number of rows")
    bits = np.unpackbits(stack.view(np.uint8), axis=1, bitorder="little")
    counts = bits.sum(axis=0, dtype=np.int32)
    maj = (counts >= (k + 1) // 2).astype(np.uint8)
    out = np.packbits(maj, bitorder="little").view(np.uint64).copy()
    tail = nbits & 63
    if tail:
        out[-1] &= np.uint64((1 << tail) - 1)
    return out


def rotate_words(words: np.ndarray, nbits: int, shift: int) -> np.ndarray:
    """Circular shift of an ``nbits``-bit packed vector toward higher indices.

    Bit ``j`` of the result equals bit ``(j - shift) mod nbits`` of the input.
    Negative shifts rotate toward lower indices.
    """
    shift %= nbits
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:nbits]
    rolled = np.roll(bits, shift)
    out = np.packbits(rolled, bitorder="little")
    pad = len(words) * 8 - len(out)
    if pad:
        out = np.concatenate([out, np.zeros(pad, dtype=np.uint8)])
    return out.view(np.uint64).copy()
