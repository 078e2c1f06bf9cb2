"""Static dimension and threshold optimizer.

For every accuracy requirement in a spec this module finds the smallest
vector dimension at which an acceptance threshold exists that meets the
requested false-positive and accuracy targets, then fixes per-query
thresholds at that dimension.

A requirement whose data structure is a bounded set is expanded into one
query configuration per occupancy (1..bound): the runtime knows how many
elements a concrete structure actually holds and picks the matching
threshold, which is markedly sharper for lightly loaded structures.  The
dimension search runs the predicate over every occupancy, and all
occupancies share that requirement's dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy.special import ndtri

from hdopt.analytics import (
    IndependenceConstraint,
    Normal,
    TypeI,
    analytical_model,
    classify_qds,
    derive_p,
    hw_err,
    qds_means,
    to_normal,
)
from hdopt.speclang import AccuracySpec, HardwareModel, Requirement, expand_vars

__all__ = [
    "DEFAULT_MAX_N",
    "DimensionalConstraintError",
    "NoIntersectionError",
    "ThresholdResult",
    "GetAccuracyResult",
    "QueryParams",
    "OptimizationResult",
    "normal_cdf",
    "normal_ppf",
    "intersect_distributions",
    "optimize_threshold",
    "get_accuracy",
    "bin_search",
    "optimize",
    "params_at_dimension",
]

DEFAULT_MAX_N = 1_000_000


class DimensionalConstraintError(ValueError):
    """No dimension within the search bound satisfies a requirement."""


class NoIntersectionError(ValueError):
    """The two densities have no crossing point between their means."""


def normal_cdf(x: float, dist: Normal) -> float:
    """P(X <= x); a zero-sigma distribution is a point mass (step function)."""
    if dist.sigma == 0.0:
        return 1.0 if x >= dist.mu else 0.0
    return 0.5 * (1.0 + math.erf((x - dist.mu) / (dist.sigma * math.sqrt(2.0))))


def normal_ppf(q: float) -> float:
    """Standard normal quantile, with exact +-inf at the endpoints."""
    if q <= 0.0:
        return -math.inf
    if q >= 1.0:
        return math.inf
    return float(ndtri(q))


def intersect_distributions(d_in: Normal, d_out: Normal) -> float:
    """Crossing point of the two density functions between their means.

    Equal sigmas give the midpoint; a point mass pins the crossing at its
    own location (the limit of shrinking sigma).  Otherwise the log-density
    equality is a quadratic with exactly one root between the means; a tiny
    tolerance absorbs float round-off at the interval edges.
    """
    s1, s2 = d_in.sigma, d_out.sigma
    m1, m2 = d_in.mu, d_out.mu
    if s1 == s2:
        return 0.5 * (m1 + m2)
    if s1 == 0.0:
        return m1
    if s2 == 0.0:
        return m2
    a = s2 * s2 - s1 * s1
    b = -2.0 * (m1 * s2 * s2 - m2 * s1 * s1)
    c = m1 * m1 * s2 * s2 - m2 * m2 * s1 * s1 - 2.0 * s1 * s1 * s2 * s2 * math.log(s2 / s1)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NoIntersectionError(f"no density crossing between {m1} and {m2}")
    sq = math.sqrt(disc)
    lo, hi = min(m1, m2), max(m1, m2)
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    for root in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)):
        if lo - tol <= root <= hi + tol:
            return min(max(root, lo), hi)
    raise NoIntersectionError(f"no density crossing between {m1} and {m2}")


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    fp: float
    fn: float
    acc: float
    rates_feasible: bool


def optimize_threshold(
    d_in: Normal, d_out: Normal, req_fp: float, req_fn: float
) -> ThresholdResult:
    """Pick the acceptance threshold for one query.

    The false-negative cap admits thresholds at or above
    ``mu_in + sigma_in * ppf(1 - req_fn)`` and the false-positive cap admits
    those at or below ``mu_out + sigma_out * ppf(req_fp)``.  When that window
    is non-empty the density crossing point is clamped into it and
    ``rates_feasible`` is True; when the two caps cannot hold simultaneously
    the crossing point itself is used, since it maximizes balanced accuracy,
    and the flag is False so callers can decide whether the result is good
    enough or the dimension must grow.
    """
    if d_in.mu > d_out.mu:
        raise ValueError(f"matching mean {d_in.mu} exceeds non-matching mean {d_out.mu}")
    thr_low = d_in.mu if d_in.sigma == 0.0 else d_in.mu + d_in.sigma * normal_ppf(1.0 - req_fn)
    thr_high = d_out.mu if d_out.sigma == 0.0 else d_out.mu + d_out.sigma * normal_ppf(req_fp)
    x = intersect_distributions(d_in, d_out)
    if thr_low <= thr_high:
        threshold = min(max(x, thr_low), thr_high)
        feasible = True
    else:
        threshold = x
        feasible = False
    fp = normal_cdf(threshold, d_out)
    fn = 1.0 - normal_cdf(threshold, d_in)
    acc = 1.0 - 0.5 * (fp + fn)
    return ThresholdResult(float(threshold), float(fp), float(fn), float(acc), feasible)


@dataclass(frozen=True)
class GetAccuracyResult:
    success: bool
    constraint: IndependenceConstraint
    threshold: float
    fp: float
    fn: float
    acc: float
    rates_feasible: bool


def get_accuracy(
    hw: HardwareModel,
    query,
    ds,
    n: int,
    k: int,
    req_acc: float,
    req_fp: float,
    req_fn: float,
) -> GetAccuracyResult:
    """Evaluate one requirement at a fixed dimension.

    Runs the analytical model, places the threshold, and reports the verdict.
    Success binds the false-positive cap and the accuracy floor; the
    false-negative rate is reported alongside (the window clamp keeps it
    under its cap whenever both rate caps are jointly attainable at this n).
    A query accepts when the observed distance is at or below the threshold.
    """
    p = derive_p(hw)
    model = analytical_model(query, ds, k, n, p)
    t = optimize_threshold(model.dist_in, model.dist_out, req_fp, req_fn)
    success = t.fp <= req_fp and t.acc >= req_acc
    return GetAccuracyResult(
        success, model.constraint, t.threshold, t.fp, t.fn, t.acc, t.rates_feasible
    )


def bin_search(lo: int, hi: int, pred: Callable[[int], bool]) -> int:
    """Smallest value in [lo, hi] satisfying a monotone predicate, else hi + 1."""
    if lo > hi:
        return hi + 1
    last = hi
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo if pred(lo) else last + 1


@dataclass(frozen=True)
class QueryParams:
    """Frozen runtime configuration for one query variant."""

    id: str
    requirement: int
    size: int  # structure occupancy this threshold is tuned for (0 = fixed shape)
    n: int
    threshold: float
    fp: float
    fn: float
    acc: float
    rates_feasible: bool
    independence: str


@dataclass(frozen=True)
class OptimizationResult:
    n_opt: int
    queries: tuple[QueryParams, ...]

    def by_id(self, query_id: str) -> QueryParams:
        for q in self.queries:
            if q.id == query_id:
                return q
        raise KeyError(query_id)


@dataclass(frozen=True)
class _SizeModel:
    id: str
    size: int
    mean_in: float
    mean_out: float


def _requirement_models(
    p: float, index: int, req: Requirement
) -> tuple[list[_SizeModel], IndependenceConstraint]:
    """Noise-adjusted distance means for every occupancy of one requirement."""
    qds, constraint = classify_qds(req.query, req.ds, req.k)
    models: list[_SizeModel] = []
    if isinstance(qds, TypeI) and qds.ds_bound > 1:
        for size in range(1, qds.ds_bound + 1):
            mean_in, mean_out = qds_means(TypeI(size))
            models.append(
                _SizeModel(f"req{index}@{size}", size, hw_err(p, mean_in), hw_err(p, mean_out))
            )
    else:
        mean_in, mean_out = qds_means(qds)
        size = qds.ds_bound if isinstance(qds, TypeI) else 0
        models.append(_SizeModel(f"req{index}", size, hw_err(p, mean_in), hw_err(p, mean_out)))
    return models, constraint


def optimize(
    hw: HardwareModel | None, spec: AccuracySpec, max_n: int = DEFAULT_MAX_N
) -> OptimizationResult:
    """Resolve dimensions and thresholds for every requirement in a spec.

    Returns the overall dimension (the max over requirements, at least 1)
    and one :class:`QueryParams` per query variant.  ``hw=None`` means
    error-free hardware.  Raises :class:`DimensionalConstraintError` when
    some requirement stays infeasible all the way up to ``max_n``.
    """
    p = derive_p(hw if hw is not None else HardwareModel.ideal())
    spec = expand_vars(spec)
    n_opt = 1
    queries: list[QueryParams] = []
    for index, req in enumerate(spec.requirements):
        models, constraint = _requirement_models(p, index, req)

        def pred(n: int) -> bool:
            for m in models:
                d_in = to_normal(m.mean_in, n)
                d_out = to_normal(m.mean_out, n)
                t = optimize_threshold(d_in, d_out, req.fp, req.fn)
                if t.fp > req.fp or t.acc < req.acc:
                    return False
            return True

        n_q = bin_search(1, max_n, pred)
        if n_q > max_n:
            raise DimensionalConstraintError(
                f"violation of dimensional constraints: requirement {index} "
                f"cannot meet its targets at any dimension up to {max_n}"
            )
        n_opt = max(n_opt, n_q)
        for m in models:
            d_in = to_normal(m.mean_in, n_q)
            d_out = to_normal(m.mean_out, n_q)
            t = optimize_threshold(d_in, d_out, req.fp, req.fn)
            queries.append(
                QueryParams(
                    id=m.id,
                    requirement=index,
                    size=m.size,
                    n=n_q,
                    threshold=t.threshold,
                    fp=t.fp,
                    fn=t.fn,
                    acc=t.acc,
                    rates_feasible=t.rates_feasible,
                    independence=constraint.describe(),
                )
            )
    return OptimizationResult(n_opt=n_opt, queries=tuple(queries))


def params_at_dimension(
    hw: HardwareModel | None, spec: AccuracySpec, n: int
) -> OptimizationResult:
    """Place thresholds for every query variant at one pinned dimension.

    No dimension search happens and nothing raises on missed rate caps; the
    per-query ``rates_feasible`` flags carry that verdict instead.  Callers
    comparing against an externally fixed dimension still want the best
    threshold the analysis can put there.
    """
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    p = derive_p(hw if hw is not None else HardwareModel.ideal())
    spec = expand_vars(spec)
    queries: list[QueryParams] = []
    for index, req in enumerate(spec.requirements):
        models, constraint = _requirement_models(p, index, req)
        for m in models:
            t = optimize_threshold(
                to_normal(m.mean_in, n), to_normal(m.mean_out, n), req.fp, req.fn
            )
            queries.append(
                QueryParams(
                    id=m.id,
                    requirement=index,
                    size=m.size,
                    n=n,
                    threshold=t.threshold,
                    fp=t.fp,
                    fn=t.fn,
                    acc=t.acc,
                    rates_feasible=t.rates_feasible,
                    independence=constraint.describe(),
                )
            )
    return OptimizationResult(n_opt=n, queries=tuple(queries))
