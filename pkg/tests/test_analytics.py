"""Distance-mean formulas against independent enumeration oracles.

Every mean here is a per-dimension disagreement probability of iid uniform
bits, so small cases can be computed exactly with Fractions by enumerating
the per-dimension count variables.  The closed forms must match those
enumerations, not just look plausible.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.stats

from hdopt.analytics import (
    W_MAX,
    InvalidKError,
    NoiseError,
    ParityError,
    TypeI,
    TypeII,
    TypeIII,
    UnsupportedWidthError,
    analytical_model,
    classify_qds,
    derive_p,
    effective_size,
    eliminate_permutes,
    half_binom_cdf,
    half_binom_pmf,
    hw_err,
    mean_independent,
    mean_n_way_product,
    mean_partial_subset,
    mean_set_recall,
    mean_two_way_product,
    to_normal,
)
from hdopt.speclang import HardwareModel, Perm, Prod, Ref, Sum


def binom_frac(n: int, k: int) -> Fraction:
    if k < 0 or k > n:
        return Fraction(0)
    return Fraction(math.comb(n, k), 2**n)


def tail_ge(n: int, lo: int) -> Fraction:
    """P(Bin(n, 1/2) >= lo)."""
    return sum((binom_frac(n, x) for x in range(max(lo, 0), n + 1)), Fraction(0))


def oracle_set_recall(m: int) -> Fraction:
    """P(majority of m iid bits differs from the first), m odd.

    Conditioning on the first element's bit, the majority agrees iff at
    least (m-1)/2 of the other m-1 bits equal it.
    """
    assert m % 2 == 1
    return 1 - tail_ge(m - 1, (m - 1) // 2)


def oracle_partial_subset(l: int, p: int, m: int) -> Fraction:
    """P(query majority differs from set majority), enumerated exactly.

    The query bundles l shared and p private elements (l+p odd); the set
    bundles the l shared plus m-l private ones (m odd).  Condition on the
    number of ones among the shared bits.
    """
    assert (l + p) % 2 == 1 and m % 2 == 1 and l <= m
    q_need = (l + p + 1) // 2
    d_need = (m + 1) // 2
    total = Fraction(0)
    for a in range(l + 1):
        pq = tail_ge(p, q_need - a)
        pd = tail_ge(m - l, d_need - a)
        total += binom_frac(l, a) * (pq * (1 - pd) + (1 - pq) * pd)
    return total


def oracle_n_way(sizes: tuple[int, ...]) -> Fraction:
    """P(bound tuple differs from product of bundles): odd-parity mix of
    per-factor disagreement probabilities."""
    rs = [oracle_set_recall(s) for s in sizes]
    total = Fraction(0)
    for pattern in range(1 << len(sizes)):
        if bin(pattern).count("1") % 2 == 0:
            continue
        term = Fraction(1)
        for j, r in enumerate(rs):
            term *= r if (pattern >> j) & 1 else 1 - r
        total += term
    return total


# --- binomial plumbing ------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2, 7, 64, 999, 1000, 1001, 5000])
def test_half_binom_matches_scipy(n):
    ks = sorted({0, 1, n // 3, n // 2, n - 1, n}) if n else [0]
    for k in ks:
        if not 0 <= k <= n:
            continue
        assert half_binom_pmf(n, k) == pytest.approx(
            scipy.stats.binom.pmf(k, n, 0.5), rel=1e-9, abs=1e-300
        )
        assert half_binom_cdf(n, k) == pytest.approx(
            scipy.stats.binom.cdf(k, n, 0.5), rel=1e-9
        )


def test_half_binom_edge_behavior():
    assert half_binom_cdf(5, -1) == 0.0
    assert half_binom_cdf(5, 5) == 1.0
    assert half_binom_pmf(4, 6) == 0.0
    assert sum(half_binom_pmf(9, i) for i in range(10)) == pytest.approx(1.0, abs=1e-12)


# --- distance means ---------------------------------------------------------


def test_mean_independent_is_half():
    assert mean_independent() == 0.5


@pytest.mark.parametrize("m,expect", [(1, 0.0), (3, 0.25), (5, 0.3125)])
def test_set_recall_pinned_values(m, expect):
    assert mean_set_recall(m) == pytest.approx(expect, abs=1e-15)


@pytest.mark.parametrize("m", [1, 3, 5, 7, 9, 11, 21])
def test_set_recall_matches_enumeration(m):
    assert mean_set_recall(m) == pytest.approx(float(oracle_set_recall(m)), abs=1e-12)


def test_set_recall_rejects_bad_sizes():
    with pytest.raises(ValueError):
        mean_set_recall(0)
    with pytest.raises(ParityError):
        mean_set_recall(4)


@pytest.mark.parametrize(
    "l,p,m",
    [
        (l, p, m)
        for l in range(0, 4)
        for p in range(0, 4)
        for m in (3, 5, 11)
        if (l + p) % 2 == 1 and l <= m
    ],
)
def test_partial_subset_matches_enumeration(l, p, m):
    assert mean_partial_subset(l, p, m) == pytest.approx(
        float(oracle_partial_subset(l, p, m)), abs=1e-12
    )


def test_partial_subset_pinned_values():
    assert mean_partial_subset(1, 0, 1) == 0.0
    assert mean_partial_subset(0, 1, 1) == pytest.approx(0.5, abs=1e-15)
    assert mean_partial_subset(1, 0, 3) == pytest.approx(0.25, abs=1e-15)


def test_partial_subset_domain_errors():
    with pytest.raises(ParityError):
        mean_partial_subset(1, 1, 3)
    with pytest.raises(ParityError):
        mean_partial_subset(1, 0, 4)
    with pytest.raises(ValueError):
        mean_partial_subset(5, 0, 3)
    with pytest.raises(ValueError):
        mean_partial_subset(0, 0, 3)


@pytest.mark.parametrize("l", [1, 3, 5])
@pytest.mark.parametrize("m", [1, 3, 5])
def test_two_way_product_matches_enumeration(l, m):
    want = float(oracle_n_way((l, m)))
    assert mean_two_way_product(l, m) == pytest.approx(want, abs=1e-12)


def test_two_way_product_pinned_values():
    assert mean_two_way_product(1, 1) == 0.0
    assert mean_two_way_product(1, 3) == pytest.approx(0.25, abs=1e-15)
    assert mean_two_way_product(3, 3) == pytest.approx(0.375, abs=1e-15)


@pytest.mark.parametrize("sizes", [(3, 3), (1, 5), (3, 5, 7), (3, 3, 3), (1, 1, 1), (3, 3, 3, 3)])
def test_n_way_product_matches_enumeration(sizes):
    assert mean_n_way_product(sizes) == pytest.approx(float(oracle_n_way(sizes)), abs=1e-12)


def test_n_way_product_width_and_parity_guards():
    with pytest.raises(UnsupportedWidthError):
        mean_n_way_product((3,) * (W_MAX + 1))
    with pytest.raises(ValueError):
        mean_n_way_product((3,))
    with pytest.raises(ParityError):
        mean_n_way_product((2, 3))


# --- cross-formula identities (exact) ---------------------------------------


@pytest.mark.parametrize("m", [1, 3, 5, 11, 21])
def test_cross_formula_identities(m):
    assert abs(mean_partial_subset(1, 0, m) - mean_set_recall(m)) < 1e-12
    assert abs(mean_two_way_product(1, m) - mean_set_recall(m)) < 1e-12
    for l in (1, 3, 5):
        assert abs(mean_n_way_product((l, m)) - mean_two_way_product(l, m)) < 1e-12


# --- hardware noise ---------------------------------------------------------


def test_hw_err_pinned_values():
    assert hw_err(0.0, 0.3125) == 0.3125
    assert hw_err(0.1, 0.25) == pytest.approx(0.34, abs=1e-15)
    assert hw_err(0.49999, 0.1) == pytest.approx(0.5, abs=1e-4)
    assert hw_err(0.2, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_hw_err_monte_carlo_both_sides_corrupted():
    # The closed form models each compared vector flipping independently at
    # p, so the oracle must corrupt both sides.
    rng = np.random.default_rng(123)
    n, p, M = 200_000, 0.1, 0.25
    a = rng.integers(0, 2, n)
    b = np.where(rng.random(n) < M, 1 - a, a)
    a_noisy = np.where(rng.random(n) < p, 1 - a, a)
    b_noisy = np.where(rng.random(n) < p, 1 - b, b)
    got = np.mean(a_noisy != b_noisy)
    want = hw_err(p, M)
    sigma = math.sqrt(want * (1 - want) / n)
    assert abs(got - want) < 4 * sigma


def test_derive_p_composition():
    assert derive_p(HardwareModel.ideal()) == 0.0
    hw = HardwareModel.ideal()
    hw.mem_err["item-mem"] = 0.0215
    assert derive_p(hw) == pytest.approx(0.0215, abs=1e-15)
    hw2 = HardwareModel.ideal()
    hw2.op_err["bind"] = 0.1
    hw2.mem_err["query"] = 0.2
    assert derive_p(hw2) == pytest.approx(0.28, abs=1e-15)


def test_derive_p_rejects_noise_floor():
    hw = HardwareModel.ideal()
    hw.op_err["bind"] = 0.3
    hw.mem_err["codebook"] = 0.3
    with pytest.raises(NoiseError):
        derive_p(hw)
    hw2 = HardwareModel.ideal()
    hw2.op_err["perm"] = 0.5
    with pytest.raises(NoiseError):
        derive_p(hw2)


def test_to_normal_sigmas():
    assert to_normal(0.5, 10_000).sigma == pytest.approx(0.005, abs=1e-15)
    assert to_normal(0.0, 123).sigma == 0.0
    assert to_normal(0.25, 100).sigma == pytest.approx(math.sqrt(0.1875 / 100), abs=1e-12)
    with pytest.raises(ValueError):
        to_normal(0.25, 0)


# --- classification ---------------------------------------------------------


def _edge_exprs():
    prod = Prod((Ref("a"), Ref("b"), Ref("c")))
    return prod, Sum(4, (prod,))


def test_classify_type_i():
    query, ds = _edge_exprs()
    qds, constraint = classify_qds(query, ds, 1)
    assert qds == TypeI(ds_bound=4)
    assert constraint.describe() == "iset(sum(4,prod(a,b,c)))"


def test_classify_type_ii():
    kv = Prod((Ref("keys"), Ref("vals")))
    qds, constraint = classify_qds(Sum(5, (kv,)), Sum(100, (kv,)), 3)
    assert qds == TypeII(k=3, query_bound=5, ds_bound=100)
    assert "iset" in constraint.describe()


def test_classify_type_iii():
    query = Prod((Ref("a"), Ref("b")))
    ds = Prod((Sum(3, (Ref("a"),)), Sum(5, (Ref("b"),))))
    qds, constraint = classify_qds(query, ds, 1)
    assert qds == TypeIII(factor_bounds=(3, 5))
    assert constraint.describe() == "iproduct(prod(sum(3,a),sum(5,b)))"


def test_classify_rejects_bad_k():
    query, ds = _edge_exprs()
    with pytest.raises(InvalidKError):
        classify_qds(query, ds, 2)
    kv = Prod((Ref("k"), Ref("v")))
    with pytest.raises(InvalidKError):
        classify_qds(Sum(3, (kv,)), Sum(9, (kv,)), 5)


def test_classify_rejects_wide_products():
    query = Prod(tuple(Ref(f"x{i}") for i in range(W_MAX + 1)))
    ds = Prod(tuple(Sum(3, (Ref(f"x{i}"),)) for i in range(W_MAX + 1)))
    with pytest.raises(UnsupportedWidthError):
        classify_qds(query, ds, 1)


def test_eliminate_permutes_builds_virtual_codebooks():
    e = Prod((Perm(1, Ref("states")), Ref("sym")))
    out = eliminate_permutes(e)
    assert out == Prod((Ref("states@1"), Ref("sym")))
    twice = eliminate_permutes(Sum(2, (Perm(1, Ref("x")), Perm(1, Ref("x")))))
    assert twice.terms[0] == twice.terms[1] == Ref("x@1")
    assert eliminate_permutes(Ref("plain")) == Ref("plain")


# --- end-to-end model -------------------------------------------------------


def test_analytical_model_edge_query():
    query, ds = _edge_exprs()
    p = 0.0215
    model = analytical_model(query, ds, 1, 175, p)
    assert isinstance(model.qds, TypeI)
    # bound 4 is even, so the analysed set size is 5 (tie-breaker element)
    assert model.dist_in.mu == pytest.approx(hw_err(p, mean_set_recall(5)), abs=1e-15)
    assert model.dist_out.mu == pytest.approx(hw_err(p, 0.5), abs=1e-15)
    assert model.dist_in.sigma == pytest.approx(
        to_normal(model.dist_in.mu, 175).sigma, abs=1e-15
    )


def test_analytical_model_noise_free_means_unchanged():
    query, ds = _edge_exprs()
    noisy = analytical_model(query, ds, 1, 500, 0.0)
    assert noisy.dist_in.mu == pytest.approx(mean_set_recall(5), abs=1e-15)
    assert noisy.dist_out.mu == 0.5


def test_effective_size_padding():
    assert effective_size(1) == 1
    assert effective_size(4) == 5
    assert effective_size(5) == 5
    assert effective_size(100) == 101
