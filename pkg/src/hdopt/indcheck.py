"""Mutual-independence checking over concrete code tuples.

Bundled tuple sets only behave like sets (stored elements near, everything
else far) when no tuple can be assembled from the others by cancellation.
Since binding is XOR, that is a linear-algebra question: write each tuple as
the GF(2) indicator vector of the atomic codes it binds, and the set is
usable iff those vectors are linearly independent.

Codes are identified by (space, index) pairs, where the space is the
codebook name after permute elimination (so ``states`` and ``states@1`` are
different spaces on purpose).  A code appearing twice in one tuple cancels
itself out.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "Code",
    "CodeTuple",
    "DegenerateTupleError",
    "IncidenceMatrix",
    "canonical_tuple",
    "tuple_incidence",
    "gf2_rank",
    "check_independent_set",
    "check_independent_product",
]

Code = tuple[str, int]
CodeTuple = tuple[Code, ...]


class DegenerateTupleError(ValueError):
    """A tuple whose factors all cancel (binds to the all-zero vector)."""


def canonical_tuple(t: Iterable[Code]) -> frozenset[Code]:
    """Codes appearing an odd number of times; empty means the tuple is degenerate."""
    acc: set[Code] = set()
    for code in t:
        acc.symmetric_difference_update((code,))
    return frozenset(acc)


@dataclass(frozen=True)
class IncidenceMatrix:
    rows: tuple[int, ...]  # bit i set <=> code with column i is a factor
    code_index: dict[Code, int]


def tuple_incidence(tuples: Sequence[Iterable[Code]]) -> IncidenceMatrix:
    """One GF(2) row per tuple over the distinct codes that occur.

    Raises :class:`DegenerateTupleError` if any tuple cancels to nothing;
    such a tuple binds to the all-zero vector and can never act as a set
    element.
    """
    if not tuples:
        raise ValueError("need at least one tuple")
    code_index: dict[Code, int] = {}
    rows = []
    for t in tuples:
        canon = canonical_tuple(t)
        if not canon:
            raise DegenerateTupleError(f"tuple {tuple(t)!r} cancels to the empty product")
        row = 0
        for code in canon:
            if code not in code_index:
                code_index[code] = len(code_index)
            row |= 1 << code_index[code]
        rows.append(row)
    return IncidenceMatrix(tuple(rows), code_index)


def gf2_rank(m: IncidenceMatrix) -> int:
    """Rank over GF(2); elimination pivots on each row's lowest set bit."""
    pivots: dict[int, int] = {}
    rank = 0
    for row in m.rows:
        cur = row
        while cur:
            low = cur & -cur
            if low in pivots:
                cur ^= pivots[low]
            else:
                pivots[low] = cur
                rank += 1
                break
    return rank


def check_independent_set(tuples: Sequence[Iterable[Code]]) -> bool:
    """True iff no tuple is the XOR of other tuples in the collection."""
    m = tuple_incidence(tuples)
    return gf2_rank(m) == len(m.rows)


def check_independent_product(factors: Sequence[Sequence[Iterable[Code]]]) -> bool:
    """True iff the factor sets are pairwise disjoint and their union is independent.

    Factors are compared after cancellation, so (a, a, b) and (b,) collide.
    """
    if len(factors) < 2:
        raise ValueError("a product needs at least two factors")
    seen: set[frozenset[Code]] = set()
    union: list[Iterable[Code]] = []
    for factor in factors:
        for t in factor:
            canon = canonical_tuple(t)
            if not canon:
                raise DegenerateTupleError(f"tuple {tuple(t)!r} cancels to the empty product")
            if canon in seen:
                return False
            seen.add(canon)
            union.append(t)
    return check_independent_set(union)
