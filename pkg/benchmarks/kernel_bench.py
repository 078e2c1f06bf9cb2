"""Time the compiled kernels against the numpy fallback.

Run as ``python3 benchmarks/kernel_bench.py``.  Sizes mirror what the
simulations actually do: ~10k-bit vectors, codebook scans a few hundred rows
deep, bundles a few dozen wide.  Agreement is asserted before timing; a
backend that is fast but wrong should fail here, not in a simulation.
"""

from __future__ import annotations

import timeit

import numpy as np

from hdopt import _kernels_np

try:
    from hdopt import _kernels
except ImportError:
    _kernels = None

NBITS = 10_048  # multiple of 64 plus a partial tail exercised via prefixes
NWORDS = (NBITS + 63) >> 6
ROWS = 400
ARITY = 21
PREFIX = 9_973


def _pack(rng: np.random.Generator, rows: int | None = None) -> np.ndarray:
    shape = (rows, NWORDS) if rows else (NWORDS,)
    w = rng.integers(0, 2**63, shape, dtype=np.uint64) * 2 + rng.integers(
        0, 2, shape, dtype=np.uint64
    )
    tail = NBITS & 63
    if tail:
        w[..., -1] &= np.uint64((1 << tail) - 1)
    return w


def main() -> None:
    if _kernels is None:
        print("compiled kernels unavailable; nothing to compare")
        return

    rng = np.random.default_rng(7)
    a = _pack(rng)
    b = _pack(rng)
    mem = _pack(rng, ROWS)
    stack = _pack(rng, ARITY)

    cases = {
        "popcount_words": (lambda m: m.popcount_words(a)),
        "hamming_words": (lambda m: m.hamming_words(a, b)),
        "hamming_prefix": (lambda m: m.hamming_prefix(a, b, PREFIX)),
        "hamming_many": (lambda m: m.hamming_many(mem, a, PREFIX)),
        "majority_words": (lambda m: m.majority_words(stack, NBITS)),
        "rotate_words": (lambda m: m.rotate_words(a, NBITS, 1)),
    }

    print(f"{'kernel':<16} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for name, call in cases.items():
        got_np, got_cy = call(_kernels_np), call(_kernels)
        same = (
            np.array_equal(got_np, got_cy)
            if isinstance(got_np, np.ndarray)
            else got_np == got_cy
        )
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        reps = 2000 if name != "hamming_many" else 200
        t_np = min(timeit.repeat(lambda: call(_kernels_np), number=reps, repeat=5)) / reps
        t_cy = min(timeit.repeat(lambda: call(_kernels), number=reps, repeat=5)) / reps
        print(
            f"{name:<16} {t_np * 1e6:>10.2f} {t_cy * 1e6:>10.2f} {t_np / t_cy:>7.1f}x"
        )


if __name__ == "__main__":
    main()
