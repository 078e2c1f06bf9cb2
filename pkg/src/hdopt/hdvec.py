"""Binary hypervector runtime: packed codes, codebooks, and the core algebra.

Vectors are dense binary strings of ``n`` bits packed into little-endian
uint64 words (logical bit ``i`` is ``(words[i >> 6] >> (i & 63)) & 1``).  The
operations are the usual binary spatter-code set:

    bind      element-wise XOR (self-inverse, distance-preserving)
    bundle    bitwise majority vote; even-arity bundles get exactly one random
              tie-breaker vector appended from a dedicated stream
    permute   circular shift toward higher bit indices (wraps around)
    distance  normalized Hamming distance, optionally over a prefix

Randomness flows through :class:`RngStream`, a splittable counter-based
generator: the same (seed, path) always reproduces the same bits, and child
streams are independent of their siblings regardless of draw order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from hdopt import _backend

__all__ = [
    "Hypervector",
    "RngStream",
    "Codebook",
    "rand_code",
    "bind",
    "bundle",
    "permute",
    "invert",
    "distance",
    "partial_distance",
    "prefix",
    "dump_vector",
    "load_vector",
    "HdvecError",
]

_WORD_BITS = 64

# Binary dump layout: 4-byte magic, u32 format version, u64 bit length,
# then the packed words.  Everything little-endian.
_MAGIC = b"HVEC"
_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


class HdvecError(ValueError):
    """Invalid argument to a hypervector operation."""


def _nwords(n: int) -> int:
    return (n + _WORD_BITS - 1) // _WORD_BITS


def _tail_mask(n: int) -> int:
    tail = n % _WORD_BITS
    return (1 << tail) - 1 if tail else (1 << _WORD_BITS) - 1


class Hypervector:
    """An immutable ``n``-bit binary vector backed by packed uint64 words.

    Bits past ``n`` in the last word are always zero; every constructor and
    operation maintains that invariant so popcounts never see garbage.
    """

    __slots__ = ("n", "words")

    def __init__(self, n: int, words: np.ndarray):
        if n <= 0:
            raise HdvecError(f"dimension must be positive, got {n}")
        if words.dtype != np.uint64 or words.shape != (_nwords(n),):
            raise HdvecError("words must be a uint64 array of matching length")
        self.n = n
        self.words = words
        words.flags.writeable = False

    def bit(self, i: int) -> int:
        """Value of logical bit ``i``."""
        if not 0 <= i < self.n:
            raise HdvecError(f"bit index {i} out of range for n={self.n}")
        return int(self.words[i >> 6] >> np.uint64(i & 63)) & 1

    def to_bits(self) -> np.ndarray:
        """Unpacked view as a (n,) uint8 array of 0/1 values."""
        return np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.n]

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Hypervector":
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise HdvecError("from_bits expects a non-empty 1-d bit sequence")
        packed = np.packbits(arr, bitorder="little")
        pad = _nwords(arr.size) * 8 - packed.size
        if pad:
            packed = np.concatenate([packed, np.zeros(pad, dtype=np.uint8)])
        return cls(arr.size, packed.view(np.uint64).copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hypervector):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.words, other.words))

    def __hash__(self) -> int:
        return hash((self.n, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"Hypervector(n={self.n})"


class RngStream:
    """Splittable deterministic random stream.

    Wraps a counter-based Philox generator keyed by ``(seed, *path)`` through
    ``numpy.random.SeedSequence``.  Identical keys reproduce identical bit
    sequences on any platform; ``child(i)`` derives an independent stream, so
    work can be split across workers without changing any results.

    One caveat inherited from SeedSequence: entropy is zero-padded, so a path
    aliases the same path extended by zeros (``child(1)`` == ``child(1, 0)``).
    Keep the arity fixed within a namespace (as every caller here does) and
    sibling streams never collide.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = seed
        self.path = path
        ss = np.random.SeedSequence(entropy=(seed, *path))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *ids: int) -> "RngStream":
        """Independent stream keyed by this stream's path plus ``ids``."""
        return RngStream(self.seed, self.path + ids)

    def words(self, count: int) -> np.ndarray:
        """``count`` uniform uint64 words."""
        return self._gen.integers(0, 1 << 64, size=count, dtype=np.uint64)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high), numpy semantics."""
        return self._gen.integers(low, high, size=size)

    def random(self, size=None):
        """Uniform floats in [0, 1)."""
        return self._gen.random(size=size)

    def shuffle(self, seq: list) -> None:
        self._gen.shuffle(seq)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


def rand_code(rng: RngStream, n: int) -> Hypervector:
    """A fresh uniform random ``n``-bit code drawn from ``rng``."""
    if n <= 0:
        raise HdvecError(f"dimension must be positive, got {n}")
    words = rng.words(_nwords(n))
    words[-1] &= np.uint64(_tail_mask(n))
    return Hypervector(n, words)


class Codebook:
    """A named table of independently drawn random codes.

    The codes are generated eagerly at construction from a stream derived
    from (rng, codebook name), so two codebooks with the same name and seed
    hold identical codes regardless of creation order.
    """

    __slots__ = ("name", "size", "n", "_mem")

    def __init__(self, name: str, size: int, n: int, rng: RngStream):
        if size <= 0:
            raise HdvecError(f"codebook size must be positive, got {size}")
        self.name = name
        self.size = size
        self.n = n
        nw = _nwords(n)
        words = rng.words(size * nw).reshape(size, nw)
        words[:, -1] &= np.uint64(_tail_mask(n))
        self._mem = words
        words.flags.writeable = False

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, i: int) -> Hypervector:
        if not 0 <= i < self.size:
            raise HdvecError(f"code index {i} out of range for size {self.size}")
        return Hypervector(self.n, self._mem[i])

    def __iter__(self) -> Iterator[Hypervector]:
        for i in range(self.size):
            yield self[i]

    @property
    def memory(self) -> np.ndarray:
        """The (size, words) packed matrix, useful for batched distance scans."""
        return self._mem


def _check_same_n(a: Hypervector, b: Hypervector) -> None:
    if a.n != b.n:
        raise HdvecError(f"dimension mismatch: {a.n} vs {b.n}")


def bind(a: Hypervector, b: Hypervector) -> Hypervector:
    """XOR binding.  Self-inverse: bind(bind(a, b), b) == a."""
    _check_same_n(a, b)
    return Hypervector(a.n, np.bitwise_xor(a.words, b.words))


def bundle(vs: Sequence[Hypervector], tiebreak_rng: RngStream | None = None) -> Hypervector:
    """Bitwise majority vote over ``vs``.

    An even number of inputs would allow ties, so exactly one extra random
    vector from ``tiebreak_rng`` is appended in that case (and the analytical
    model counts it as a set member).  Bundling an empty sequence is an error.
    """
    if len(vs) == 0:
        raise HdvecError("cannot bundle an empty sequence")
    n = vs[0].n
    for v in vs[1:]:
        if v.n != n:
            raise HdvecError(f"dimension mismatch in bundle: {v.n} vs {n}")
    if len(vs) == 1:
        return vs[0]
    rows = [v.words for v in vs]
    if len(rows) % 2 == 0:
        if tiebreak_rng is None:
            raise HdvecError("even-arity bundle requires a tie-break stream")
        rows.append(rand_code(tiebreak_rng, n).words)
    stack = np.stack(rows)
    return Hypervector(n, _backend.majority_words(stack, n))


def permute(v: Hypervector, shift: int) -> Hypervector:
    """Circular shift by ``shift`` positions toward higher bit indices.

    permute(permute(v, s), -s) == v for any s.
    """
    if shift % v.n == 0:
        return v
    return Hypervector(v.n, _backend.rotate_words(v.words, v.n, shift))


def invert(v: Hypervector) -> Hypervector:
    """Bitwise complement; distance(v, invert(v)) == 1."""
    words = np.bitwise_not(v.words)
    words[-1] &= np.uint64(_tail_mask(v.n))
    return Hypervector(v.n, words)


def distance(a: Hypervector, b: Hypervector) -> float:
    """Normalized Hamming distance in [0, 1]."""
    _check_same_n(a, b)
    return _backend.hamming_words(a.words, b.words) / a.n


def partial_distance(a: Hypervector, b: Hypervector, n_q: int) -> float:
    """Normalized Hamming distance over the first ``n_q`` bits.

    Sound for truncated queries because every bit of a random code is iid:
    a prefix of an ``n``-bit code is distributed exactly like an ``n_q``-bit
    code.
    """
    if n_q <= 0 or n_q > min(a.n, b.n):
        raise HdvecError(f"prefix length {n_q} out of range for n={min(a.n, b.n)}")
    return _backend.hamming_prefix(a.words, b.words, n_q) / n_q


def prefix(v: Hypervector, n_q: int) -> Hypervector:
    """The first ``n_q`` bits of ``v`` as a standalone vector."""
    if n_q <= 0 or n_q > v.n:
        raise HdvecError(f"prefix length {n_q} out of range for n={v.n}")
    if n_q == v.n:
        return v
    words = v.words[: _nwords(n_q)].copy()
    words[-1] &= np.uint64(_tail_mask(n_q))
    return Hypervector(n_q, words)


def dump_vector(v: Hypervector) -> bytes:
    """Serialize to the binary dump format (header + packed little-endian bits)."""
    header = _HEADER.pack(_MAGIC, _VERSION, v.n)
    return header + v.words.astype("<u8").tobytes()


def load_vector(buf: bytes) -> Hypervector:
    """Parse a vector from :func:`dump_vector` output, validating the header."""
    if len(buf) < _HEADER.size:
        raise HdvecError("truncated hypervector dump")
    magic, version, n = _HEADER.unpack_from(buf)
    if magic != _MAGIC:
        raise HdvecError(f"bad magic {magic!r} in hypervector dump")
    if version != _VERSION:
        raise HdvecError(f"unsupported hypervector dump version {version}")
    body = buf[_HEADER.size :]
    if len(body) != _nwords(n) * 8:
        raise HdvecError("hypervector dump length does not match header")
    words = np.frombuffer(body, dtype="<u8").astype(np.uint64)
    if int(words[-1]) & ~_tail_mask(n):
        raise HdvecError("nonzero padding bits in hypervector dump")
    return Hypervector(n, words)
