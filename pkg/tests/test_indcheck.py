"""GF(2) independence checking against exhaustive subset-XOR enumeration."""

import random

import pytest

from hdopt.indcheck import (
    DegenerateTupleError,
    canonical_tuple,
    check_independent_product,
    check_independent_set,
    gf2_rank,
    tuple_incidence,
)

a, b, c, d = ("a", 0), ("b", 0), ("c", 0), ("d", 0)


def oracle_independent(tuples) -> bool:
    """A set of GF(2) vectors is independent iff no nonempty subset XORs to zero."""
    masks = []
    index = {}
    for t in tuples:
        m = 0
        for code in canonical_tuple(t):
            m ^= 1 << index.setdefault(code, len(index))
        masks.append(m)
    for sub in range(1, 1 << len(masks)):
        acc = 0
        for i, m in enumerate(masks):
            if (sub >> i) & 1:
                acc ^= m
        if acc == 0:
            return False
    return True


def test_canonical_tuple_cancellation():
    assert canonical_tuple([a, a, b]) == frozenset({b})
    assert canonical_tuple([a, b]) == frozenset({a, b})
    assert canonical_tuple([a, a]) == frozenset()
    with pytest.raises(DegenerateTupleError):
        tuple_incidence([[a, a]])


def test_incidence_rows_hand_example():
    m = tuple_incidence([[a, c], [b, c], [a, b]])
    cols = {code: i for code, i in m.code_index.items()}
    want = []
    for t in ([a, c], [b, c], [a, b]):
        row = 0
        for code in t:
            row |= 1 << cols[code]
        want.append(row)
    assert list(m.rows) == want
    assert len(m.code_index) == 3


def test_rank_hand_examples():
    assert gf2_rank(tuple_incidence([[a, c], [b, c], [a, b]])) == 2
    assert gf2_rank(tuple_incidence([[a], [b], [c]])) == 3


def test_rank_matches_span_enumeration_random():
    rng = random.Random(7)
    for _ in range(50):
        ncodes = rng.randint(1, 8)
        codes = [(f"x{i}", 0) for i in range(ncodes)]
        tuples = []
        for _ in range(rng.randint(1, 8)):
            size = rng.randint(1, ncodes)
            tuples.append(rng.sample(codes, size))
        m = tuple_incidence(tuples)
        span = {0}
        for row in m.rows:
            span |= {v ^ row for v in span}
        assert 2 ** gf2_rank(m) == len(span)


def test_worked_set_verdicts():
    assert check_independent_set([[a, c], [b, c], [a, b]]) is False
    assert check_independent_set([[a], [b], [c]]) is True
    assert check_independent_set([[a, b], [c, d], [a, c]]) is True
    assert check_independent_set([[a]]) is True


def test_worked_product_verdicts():
    assert check_independent_product([[[a], [b]], [[c], [d]]]) is True
    bad = [[[a, b], [a, c]], [[b, c], [b, d]]]
    assert check_independent_product(bad) is False
    shared = [[[a], [b]], [[b], [c]]]
    assert check_independent_product(shared) is False


def test_product_needs_two_factors():
    with pytest.raises(ValueError):
        check_independent_product([[[a], [b]]])


def test_duplicate_tuple_is_dependent():
    assert check_independent_set([[a, b], [b, a]]) is False
    assert check_independent_product([[[a, b]], [[b, a]]]) is False


def test_checker_agrees_with_oracle_randomly():
    rng = random.Random(2025)
    for _ in range(500):
        ncodes = rng.randint(1, 10)
        codes = [(f"c{i}", 0) for i in range(ncodes)]
        tuples = [
            rng.sample(codes, rng.randint(1, ncodes))
            for _ in range(rng.randint(1, 10))
        ]
        assert check_independent_set(tuples) == oracle_independent(tuples)


def test_product_decision_matches_union_oracle():
    rng = random.Random(99)
    for _ in range(200):
        ncodes = rng.randint(2, 8)
        codes = [(f"c{i}", 0) for i in range(ncodes)]
        factors = []
        for _ in range(rng.randint(2, 3)):
            factors.append(
                [rng.sample(codes, rng.randint(1, ncodes)) for _ in range(rng.randint(1, 3))]
            )
        got = check_independent_product(factors)
        flat = [t for f in factors for t in f]
        seen = set()
        dup = False
        for t in flat:
            key = canonical_tuple(t)
            dup |= key in seen
            seen.add(key)
        want = (not dup) and oracle_independent(flat)
        assert got == want
