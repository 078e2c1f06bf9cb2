# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled packed-bit kernels.

Must stay bit-for-bit identical to ``hdopt._kernels_np``; the benchmark and
the test suite compare the two on random inputs.  All word arrays are
little-endian packed uint64, logical bit ``i`` at ``(words[i >> 6] >> (i & 63)) & 1``.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

BACKEND_NAME = "cython"

cdef extern from *:
    """
    static inline uint64_t hdopt_popcnt64(uint64_t x) {
    #if defined(__GNUC__) || defined(__clang__)
        return (uint64_t)__builtin_popcountll(x);
    #else
        x = x - ((x >> 1) & 0x5555555555555555ULL);
        x = (x & 0x3333333333333333ULL) + ((x >> 2) & 0x3333333333333333ULL);
        x = (x + (x >> 4)) & 0x0f0f0f0f0f0f0f0fULL;
        return (x * 0x0101010101010101ULL) >> 56;
    #endif
    }
    """
    uint64_t hdopt_popcnt64(uint64_t x) nogil


cdef inline uint64_t _tail_mask(Py_ssize_t tail) nogil:
    # tail in [1, 63]; full-word callers never reach here
    return (<uint64_t>1 << tail) - 1


cdef inline uint64_t _read64(const uint64_t* w, Py_ssize_t nwords, Py_ssize_t bitpos) nogil:
    # 64 bits starting at bitpos; positions past the array read as zero
    cdef Py_ssize_t wi = bitpos >> 6
    cdef Py_ssize_t off = bitpos & 63
    cdef uint64_t lo = w[wi] if wi < nwords else 0
    cdef uint64_t hi
    if off == 0:
        return lo
    hi = w[wi + 1] if wi + 1 < nwords else 0
    return (lo >> off) | (hi << (64 - off))


def popcount_words(const uint64_t[::1] words):
    """Total number of set bits in a packed uint64 array."""
    cdef Py_ssize_t i
    cdef uint64_t total = 0
    with nogil:
        for i in range(words.shape[0]):
            total += hdopt_popcnt64(words[i])
    return int(total)


def hamming_words(const uint64_t[::1] a, const uint64_t[::1] b):
    """Raw Hamming distance between two packed vectors of equal word length."""
    cdef Py_ssize_t i
    cdef uint64_t total = 0
    with nogil:
        for i in range(a.shape[0]):
            total += hdopt_popcnt64(a[i] ^ b[i])
    return int(total)


def hamming_prefix(const uint64_t[::1] a, const uint64_t[::1] b, Py_ssize_t nbits):
    """Hamming distance over the first ``nbits`` bits of two packed vectors."""
    cdef Py_ssize_t nwords = (nbits + 63) >> 6
    cdef Py_ssize_t tail = nbits & 63
    cdef Py_ssize_t full = nwords - 1 if tail else nwords
    cdef Py_ssize_t i
    cdef uint64_t total = 0
    with nogil:
        for i in range(full):
            total += hdopt_popcnt64(a[i] ^ b[i])
        if tail:
            total += hdopt_popcnt64((a[full] ^ b[full]) & _tail_mask(tail))
    return int(total)


def hamming_many(const uint64_t[:, ::1] mem, const uint64_t[::1] q, Py_ssize_t nbits):
    """Hamming distances from ``q`` to each row of ``mem`` over ``nbits`` bits."""
    cdef Py_ssize_t nwords = (nbits + 63) >> 6
    cdef Py_ssize_t tail = nbits & 63
    cdef Py_ssize_t full = nwords - 1 if tail else nwords
    cdef Py_ssize_t rows = mem.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(rows, dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef Py_ssize_t r, i
    cdef Py_ssize_t stride = mem.shape[1]
    cdef const uint64_t* base = &mem[0, 0]
    cdef const uint64_t* qp = &q[0]
    cdef const uint64_t* row
    cdef uint64_t t0, t1
    with nogil:
        for r in range(rows):
            row = base + r * stride
            # two accumulators so xor+popcount chains overlap
            t0 = 0
            t1 = 0
            for i in range(0, full - 1, 2):
                t0 += hdopt_popcnt64(row[i] ^ qp[i])
                t1 += hdopt_popcnt64(row[i + 1] ^ qp[i + 1])
            if full & 1:
                t0 += hdopt_popcnt64(row[full - 1] ^ qp[full - 1])
            if tail:
                t1 += hdopt_popcnt64((row[full] ^ qp[full]) & _tail_mask(tail))
            ov[r] = <int64_t>(t0 + t1)
    return out


def majority_words(const uint64_t[:, ::1] stack, Py_ssize_t nbits):
    """Bitwise majority vote over the rows of ``stack`` (shape (k, words)).

    Counts are kept bit-sliced: plane ``p`` holds bit ``p`` of each of the 64
    per-position counters in a word, so adding a row is a ripple-carry over
    the planes instead of 64 scalar updates.
    """
    cdef Py_ssize_t k = stack.shape[0]
    cdef Py_ssize_t nwords = stack.shape[1]
    if k % 2 == 0:
        raise ValueError("majority vote needs an odd number of rows")
    cdef Py_ssize_t need = (k + 1) // 2
    cdef Py_ssize_t tail = nbits & 63
    cdef Py_ssize_t nplanes = 0
    cdef Py_ssize_t tmp = k
    while tmp:
        nplanes += 1
        tmp >>= 1
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.zeros(nwords, dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    cdef uint64_t planes[64]
    cdef Py_ssize_t w, r, p, b, count
    cdef uint64_t x, carry, word
    with nogil:
        for w in range(nwords):
            for p in range(nplanes):
                planes[p] = 0
            for r in range(k):
                x = stack[r, w]
                for p in range(nplanes):
                    carry = planes[p] & x
                    planes[p] ^= x
                    x = carry
            word = 0
            for b in range(64):
                count = 0
                for p in range(nplanes):
                    count |= (<Py_ssize_t>((planes[p] >> b) & 1)) << p
                if count >= need:
                    word |= <uint64_t>1 << b
            ov[w] = word
        if tail and nwords > 0:
            ov[nwords - 1] &= _tail_mask(tail)
    return out


def rotate_words(const uint64_t[::1] words, Py_ssize_t nbits, Py_ssize_t shift):
    """Circular shift of an ``nbits``-bit packed vector toward higher indices.

    Bit ``j`` of the result equals bit ``(j - shift) mod nbits`` of the input,
    copied as two word-aligned spans rather than per bit.
    """
    cdef Py_ssize_t nwords = words.shape[0]
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.zeros(nwords, dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    shift %= nbits
    if shift < 0:
        shift += nbits
    with nogil:
        # bits [0, nbits-shift) land at shift; bits [nbits-shift, nbits) wrap to 0
        _blit(&ov[0], &words[0], nwords, 0, shift, nbits - shift)
        if shift:
            _blit(&ov[0], &words[0], nwords, nbits - shift, 0, shift)
    return out


cdef void _blit(
    uint64_t* dst,
    const uint64_t* src,
    Py_ssize_t nwords,
    Py_ssize_t src_start,
    Py_ssize_t dst_start,
    Py_ssize_t length,
) nogil:
    # OR bits src[src_start : src_start+length) into dst at dst_start;
    # dst must be zero there.
    cdef Py_ssize_t end = dst_start + length
    cdef Py_ssize_t j = dst_start
    cdef Py_ssize_t off, take
    cdef uint64_t bits
    while j < end:
        off = j & 63
        take = 64 - off
        if take > end - j:
            take = end - j
        bits = _read64(src, nwords, src_start + (j - dst_start))
        if take < 64:
            bits &= (<uint64_t>1 << take) - 1
        dst[j >> 6] |= bits << off
        j += take
