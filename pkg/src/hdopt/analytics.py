"""Analytical distance model for query/data-structure pairs.

Given a query expression, a data-structure expression, and a hardware noise
model, this module predicts the distribution of the normalized Hamming
distance between the query hypervector and the structure hypervector, for
both the matching ("in") and non-matching ("out") case.  The pipeline is:

1. ``eliminate_permutes`` rewrites permuted references into fresh virtual
   codebooks (a permuted random code is just another random code, independent
   of the original).
2. ``classify_qds`` sorts the pair into one of three shapes:
   * Type I  -- single element against an independent element set,
   * Type II -- element subset against an element set (k-of-s matching),
   * Type III -- single tuple against an independent product of sets,
   and derives the independence side condition the runtime must check.
3. The matching shape picks the exact combinatorial mean (below), noise is
   folded in with ``hw_err``, and ``to_normal`` yields the normal
   approximation N(mean, sqrt(mean(1-mean)/n)) for an n-bit vector.

All set sizes are "odd-augmented" first: bundling an even number of vectors
appends one random tie-breaker vector, so a declared bound of 4 behaves like
a 5-element set.  The combinatorial means are evaluated with normalized
binomial tables f(n,i) = C(n,i)/2^n and their prefix sums, never with raw
binomial coefficients, so set sizes up to 1e5 stay finite and accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as iter_product
from typing import Union

import numpy as np

from hdopt.speclang import Expr, HardwareModel, Perm, Prod, Ref, Sum, print_expr

__all__ = [
    "W_MAX",
    "Normal",
    "QdsError",
    "InvalidKError",
    "UnsupportedWidthError",
    "ParityError",
    "NoiseError",
    "TypeI",
    "TypeII",
    "TypeIII",
    "QdsClass",
    "IndependenceConstraint",
    "ModelResult",
    "half_binom_pmf",
    "half_binom_cdf",
    "effective_size",
    "mean_independent",
    "mean_set_recall",
    "mean_partial_subset",
    "mean_two_way_product",
    "mean_n_way_product",
    "hw_err",
    "derive_p",
    "to_normal",
    "eliminate_permutes",
    "classify_qds",
    "analytical_model",
]

# Largest supported number of factors in a product query.  The parity
# enumeration below is exponential in the factor count, and real workloads
# (key/value tuples, graph edges, automaton transitions) stay small.
W_MAX = 4


class QdsError(ValueError):
    """Query/data-structure pair outside the supported shapes."""


class InvalidKError(QdsError):
    """Match count k incompatible with the query/data-structure shape."""


class UnsupportedWidthError(QdsError):
    """Product has more factors than the parity enumeration supports."""


class ParityError(ValueError):
    """A set size that must be odd (post augmentation) is even."""


class NoiseError(ValueError):
    """Hardware noise too high for the distance model to say anything."""


@dataclass(frozen=True)
class Normal:
    """A normal distribution over normalized distances."""

    mu: float
    sigma: float

    def pdf(self, x: float) -> float:
        if self.sigma == 0.0:
            return math.inf if x == self.mu else 0.0
        z = (x - self.mu) / self.sigma
        return math.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))


# ---------------------------------------------------------------------------
# Normalized binomial tables
# ---------------------------------------------------------------------------

# Below this the pmf recurrence starts from f(n,0) = 2^-n directly, which is
# exact in binary floating point.  Past it 2^-n drifts toward the subnormal
# range, so the recurrence is anchored at the mode via lgamma instead.
_EXACT_LIMIT = 1000


@lru_cache(maxsize=256)
def _half_binom_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    """pmf[i] = C(n,i)/2^n and its prefix sums, for the symmetric binomial."""
    if n < 0:
        raise ValueError(f"negative table size {n}")
    if n == 0:
        pmf = np.ones(1)
    elif n <= _EXACT_LIMIT:
        i = np.arange(n, dtype=np.float64)
        ratios = (n - i) / (i + 1.0)
        pmf = np.concatenate(([1.0], np.cumprod(ratios))) * (0.5**n)
    else:
        mid = n // 2
        log_mid = (
            math.lgamma(n + 1)
            - math.lgamma(mid + 1)
            - math.lgamma(n - mid + 1)
            - n * math.log(2.0)
        )
        pmf = np.empty(n + 1)
        pmf[mid] = math.exp(log_mid)
        up = np.arange(mid, n, dtype=np.float64)
        pmf[mid + 1 :] = pmf[mid] * np.cumprod((n - up) / (up + 1.0))
        down = np.arange(mid, 0, -1, dtype=np.float64)
        pmf[mid - 1 :: -1] = pmf[mid] * np.cumprod(down / (n - down + 1.0))
    return pmf, np.cumsum(pmf)


def half_binom_pmf(n: int, i: int) -> float:
    """C(n, i) / 2^n, or 0 outside [0, n]."""
    if i < 0 or i > n:
        return 0.0
    return float(_half_binom_tables(n)[0][i])


def half_binom_cdf(n: int, t: int) -> float:
    """sum_{i<=t} C(n, i) / 2^n, clamped to [0, 1] outside the support."""
    if t < 0:
        return 0.0
    if t >= n:
        return 1.0
    return float(_half_binom_tables(n)[1][t])


# ---------------------------------------------------------------------------
# Distance means
# ---------------------------------------------------------------------------


def effective_size(bound: int) -> int:
    """Odd-augmented set size: the tie-breaker vector counts as a member."""
    if bound < 1:
        raise ValueError(f"set bound must be >= 1, got {bound}")
    return bound if bound % 2 else bound + 1


def _require_odd(name: str, value: int) -> None:
    if value % 2 == 0:
        raise ParityError(f"{name} must be odd after augmentation, got {value}")


def mean_independent() -> float:
    """Expected distance between independent codes: exactly 1/2."""
    return 0.5


def mean_set_recall(m: int) -> float:
    """Expected distance from a stored element to a bundled m-element set.

    1/2 - C(m-1, (m-1)/2) / 2^m for odd m; equals 0 at m=1 and approaches 1/2
    as the set grows.
    """
    if m < 1:
        raise ValueError(f"set size must be >= 1, got {m}")
    _require_odd("set size", m)
    return 0.5 - 0.5 * half_binom_pmf(m - 1, (m - 1) // 2)


def mean_partial_subset(l: int, p: int, m: int) -> float:
    """Expected distance between a bundled query and a bundled m-element set.

    The query bundles l elements that are in the set and p that are not.
    Needs l + p odd, m odd, and l <= m.  Special cases collapse to the other
    means: (l=1, p=0) is plain set recall and l=0 gives 1/2.
    """
    if l < 0 or p < 0 or l + p < 1:
        raise ValueError(f"bad query composition l={l}, p={p}")
    if l > m:
        raise ValueError(f"cannot share {l} elements with a set of {m}")
    _require_odd("query size", l + p)
    _require_odd("set size", m)
    lp_half = (l + p - 1) // 2
    m_half = (m - 1) // 2
    pmf_l = _half_binom_tables(l)[0]
    total = 0.0
    for i in range(l + 1):
        a = half_binom_cdf(p, lp_half - i)
        if a == 0.0:
            continue
        b = half_binom_cdf(m - l, m_half - i)
        if b == 0.0:
            continue
        total += pmf_l[i] * a * b
    return 1.0 - 2.0 * total


def _match_prob(l: int) -> float:
    """Per-dimension probability that an element agrees with its l-element bundle."""
    return half_binom_cdf(l - 1, (l - 1) // 2)


def _mismatch_prob(l: int) -> float:
    return half_binom_cdf(l - 1, (l - 3) // 2)


def mean_two_way_product(l: int, m: int) -> float:
    """Expected distance from a bound element pair to the product of two sets.

    The pair's components belong to the respective sets (sizes l and m, both
    odd).  A dimension differs when exactly one side disagrees with its
    bundle, hence the two cross terms.
    """
    _require_odd("first set size", l)
    _require_odd("second set size", m)
    if l < 1 or m < 1:
        raise ValueError("set sizes must be >= 1")
    return _match_prob(l) * _mismatch_prob(m) + _mismatch_prob(l) * _match_prob(m)


def mean_n_way_product(sizes: tuple[int, ...] | list[int], w_max: int = W_MAX) -> float:
    """Expected distance from a bound element tuple to a product of sets.

    Generalizes the two-way case by enumerating every mismatch pattern with
    odd parity across the factors.  The factor count is capped at ``w_max``
    because the enumeration is exponential.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two factors")
    if len(sizes) > w_max:
        raise UnsupportedWidthError(
            f"product width {len(sizes)} exceeds the supported maximum {w_max}"
        )
    for s in sizes:
        if s < 1:
            raise ValueError("set sizes must be >= 1")
        _require_odd("factor set size", s)
    match = [_match_prob(s) for s in sizes]
    mismatch = [_mismatch_prob(s) for s in sizes]
    total = 0.0
    for pattern in iter_product((0, 1), repeat=len(sizes)):
        if sum(pattern) % 2 == 0:
            continue
        term = 1.0
        for j, e in enumerate(pattern):
            term *= mismatch[j] if e else match[j]
        total += term
    return total


# ---------------------------------------------------------------------------
# Hardware noise
# ---------------------------------------------------------------------------


def hw_err(p: float, mean: float) -> float:
    """Distance mean after both vectors suffer independent bit flips at rate p.

    M' = (p^2 + (1-p)^2) M + 2 p (1-p) (1 - M).  Never decreases the mean for
    M <= 1/2 (the difference is 2p(1-p)(1-2M)), and fixes M = 1/2.
    """
    if not 0.0 <= p < 0.5:
        raise NoiseError(f"flip rate must be in [0, 0.5), got {p}")
    same = p * p + (1.0 - p) * (1.0 - p)
    return same * mean + 2.0 * p * (1.0 - p) * (1.0 - mean)


def derive_p(hw: HardwareModel) -> float:
    """Combined flip rate: one bit survives only if every stage preserves it.

    Composes all six rates (three operators, three memories) as
    p = 1 - prod(1 - err).  Rejects models whose combined rate reaches 0.5,
    where distances carry no signal.
    """
    keep = 1.0
    for r in hw.rates():
        if not 0.0 <= r < 0.5:
            raise NoiseError(f"flip rate must be in [0, 0.5), got {r}")
        keep *= 1.0 - r
    p = 1.0 - keep
    if p >= 0.5:
        raise NoiseError(f"combined flip rate {p:.4f} >= 0.5; no signal survives")
    return p


def to_normal(mean: float, n: int) -> Normal:
    """Normal model of the observed distance over an n-bit vector."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if not 0.0 <= mean <= 1.0:
        raise ValueError(f"mean distance must be in [0, 1], got {mean}")
    return Normal(mean, math.sqrt(mean * (1.0 - mean) / n))


# ---------------------------------------------------------------------------
# Expression classification
# ---------------------------------------------------------------------------


def eliminate_permutes(e: Expr) -> Expr:
    """Rewrite perm(i, v) into a reference to the virtual codebook ``v@i``.

    A circular shift of a random code is independent of the original (and of
    any differently-shifted copy), so each (name, shift) pair acts as its own
    codebook.  Shift 0 is the identity.
    """
    if isinstance(e, Ref):
        return e
    if isinstance(e, Perm):
        if e.shift == 0:
            return e.ref
        return Ref(f"{e.ref.name}@{e.shift}", e.pos)
    if isinstance(e, Sum):
        return Sum(e.bound, tuple(eliminate_permutes(t) for t in e.terms), e.pos)
    if isinstance(e, Prod):
        return Prod(tuple(eliminate_permutes(f) for f in e.factors), e.pos)
    raise TypeError(f"not an expression: {e!r}")


def _flatten_prod(e: Expr) -> Expr:
    """Collapse nested products (binding is associative)."""
    if isinstance(e, Prod):
        factors: list[Expr] = []
        for f in e.factors:
            f = _flatten_prod(f)
            if isinstance(f, Prod):
                factors.extend(f.factors)
            else:
                factors.append(f)
        return Prod(tuple(factors), e.pos)
    if isinstance(e, Sum):
        return Sum(e.bound, tuple(_flatten_prod(t) for t in e.terms), e.pos)
    return e


def _is_tuple_expr(e: Expr) -> bool:
    if isinstance(e, Ref):
        return True
    if isinstance(e, Prod):
        return all(isinstance(f, Ref) for f in e.factors)
    return False


@dataclass(frozen=True)
class TypeI:
    """Single element queried against an independent element set."""

    ds_bound: int


@dataclass(frozen=True)
class TypeII:
    """k-of-s subset query against an element set."""

    k: int
    query_bound: int
    ds_bound: int


@dataclass(frozen=True)
class TypeIII:
    """Single tuple queried against an independent product of element sets."""

    factor_bounds: tuple[int, ...]


QdsClass = Union[TypeI, TypeII, TypeIII]


@dataclass(frozen=True)
class IndependenceConstraint:
    """Runtime side condition: which expressions must be independent."""

    parts: tuple[tuple[str, Expr], ...]  # (kind, expr), kind in {iset, iproduct}

    def describe(self) -> str:
        return " and ".join(f"{kind}({print_expr(e)})" for kind, e in self.parts)


def classify_qds(query: Expr, ds: Expr, k: int) -> tuple[QdsClass, IndependenceConstraint]:
    """Sort an expanded query/ds pair into Type I/II/III.

    Expects variable-free expressions (run ``expand_vars`` first).  Permutes
    are eliminated here.  Raises :class:`QdsError` when the shapes fall
    outside the supported grammar or ``k`` is incompatible.
    """
    query = _flatten_prod(eliminate_permutes(query))
    ds = _flatten_prod(eliminate_permutes(ds))

    if isinstance(ds, Prod) and any(isinstance(f, Sum) for f in ds.factors):
        # Product of sets: only single-tuple queries are supported.
        if isinstance(query, Sum):
            raise QdsError("set query against a product data structure is unsupported")
        if not _is_tuple_expr(query):
            raise QdsError("product query must be a simple tuple of codes")
        if k != 1:
            raise InvalidKError(f"k must be 1 for a product data structure, got {k}")
        bounds = []
        for f in ds.factors:
            if isinstance(f, Sum):
                bounds.append(f.bound)
            elif isinstance(f, Ref):
                bounds.append(1)
            else:
                raise QdsError("product factors must be sets or simple references")
        if len(bounds) > W_MAX:
            raise UnsupportedWidthError(
                f"product width {len(bounds)} exceeds the supported maximum {W_MAX}"
            )
        return TypeIII(tuple(bounds)), IndependenceConstraint((("iproduct", ds),))

    if isinstance(ds, (Ref, Prod)):
        ds = Sum(1, (ds,), ds.pos)
    if not isinstance(ds, Sum):
        raise QdsError("data structure must be a set or a product of sets")
    for t in ds.terms:
        if not _is_tuple_expr(t):
            raise QdsError("set elements must be simple tuples of codes")

    if _is_tuple_expr(query):
        if k != 1:
            raise InvalidKError(f"k must be 1 for a single-element query, got {k}")
        return TypeI(ds.bound), IndependenceConstraint((("iset", ds),))

    if isinstance(query, Sum):
        for t in query.terms:
            if not _is_tuple_expr(t):
                raise QdsError("query set elements must be simple tuples of codes")
        if k > query.bound:
            raise InvalidKError(f"k={k} exceeds the query size bound {query.bound}")
        if k > ds.bound:
            raise InvalidKError(f"k={k} exceeds the data-structure size bound {ds.bound}")
        constraint = IndependenceConstraint((("iset", query), ("iset", ds)))
        return TypeII(k, query.bound, ds.bound), constraint

    raise QdsError("unsupported query shape")


# ---------------------------------------------------------------------------
# End-to-end model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelResult:
    """Distance distributions for the matching and non-matching case."""

    constraint: IndependenceConstraint
    dist_in: Normal
    dist_out: Normal
    qds: QdsClass


def qds_means(qds: QdsClass) -> tuple[float, float]:
    """Noise-free distance means (matching, non-matching) for a classified pair."""
    if isinstance(qds, TypeI):
        m = effective_size(qds.ds_bound)
        return mean_set_recall(m), mean_independent()
    if isinstance(qds, TypeII):
        s = effective_size(qds.query_bound)
        m = effective_size(qds.ds_bound)
        mean_in = mean_partial_subset(qds.k, s - qds.k, m)
        mean_out = mean_partial_subset(qds.k - 1, s - qds.k + 1, m)
        return mean_in, mean_out
    if isinstance(qds, TypeIII):
        sizes = tuple(effective_size(b) for b in qds.factor_bounds)
        return mean_n_way_product(sizes), mean_independent()
    raise TypeError(f"not a QDS class: {qds!r}")


def analytical_model(query: Expr, ds: Expr, k: int, n: int, p: float) -> ModelResult:
    """Predict distance distributions for a query at dimension ``n``.

    Classification, exact means, bit-flip folding at rate ``p`` (compose it
    from a hardware model with :func:`derive_p`), and the normal
    approximation in one call.  The returned constraint is what the runtime
    must check before trusting these distributions.
    """
    qds, constraint = classify_qds(query, ds, k)
    mean_in, mean_out = qds_means(qds)
    return ModelResult(
        constraint=constraint,
        dist_in=to_normal(hw_err(p, mean_in), n),
        dist_out=to_normal(hw_err(p, mean_out), n),
        qds=qds,
    )
