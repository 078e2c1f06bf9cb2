"""Analysis-friendly HD data structures: set, analogical database, knowledge
graph, and NFA.

Each structure declares its queries up front, compiles them into an accuracy
spec, and runs the static optimizer once at construction.  The optimizer hands
back a dimension, plus a (threshold, query size) pair per query variant; the
structure then generates its codebooks at the optimal dimension and answers
queries by comparing partial distances against the precomputed thresholds.

Mutations are validated before they commit: capacity bounds, membership of
the declared code spaces, and the mutual-independence side conditions the
analysis relies on (via :mod:`hdopt.indcheck`).  A rejected mutation leaves
the structure unchanged.

Instances are single-writer.  Queries never mutate (the NFA's ``execute`` is
the one exception, since stepping is inherently a state update) and may be
issued concurrently once construction and loading are done.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from typing import Iterable, Sequence

from hdopt import hdvec
from hdopt._backend import hamming_many
from hdopt.hdvec import Codebook, Hypervector, RngStream
from hdopt.indcheck import (
    check_independent_product,
    check_independent_set,
)
from hdopt.optimizer import (
    DEFAULT_MAX_N,
    OptimizationResult,
    QueryParams,
    optimize,
)
from hdopt.speclang import (
    AccuracySpec,
    Expr,
    HardwareModel,
    Perm,
    Prod,
    Ref,
    Requirement,
    Sum,
    print_expr,
    print_spec,
)

__all__ = [
    "DsError",
    "CapacityError",
    "IndependenceError",
    "SpaceError",
    "DuplicateKeyError",
    "AmbiguousAnalogyError",
    "SetDs",
    "Database",
    "KnowledgeGraph",
    "Nfa",
    "emit_spec",
    "export_item_memory",
    "load_item_memory",
]


class DsError(ValueError):
    """Base class for data structure usage errors."""


class CapacityError(DsError):
    """A mutation would exceed the declared size bound."""


class IndependenceError(DsError):
    """A mutation would break the mutual-independence side condition."""


class SpaceError(DsError):
    """An element does not belong to the declared code space."""


class DuplicateKeyError(DsError):
    """A record already binds the given key."""


class AmbiguousAnalogyError(DsError):
    """More than one value matched an analogy query."""


# Child-stream tags, so every random draw in this module has a stable address.
_TAG_CODEBOOK = 0
_TAG_TIEBREAK = 1
_TAG_EMPTY_NODE = 2
_TAG_QUERY = 3
_TAG_STEP = 4


def _codebook_arg(arg, default_name: str) -> tuple[str, int]:
    if isinstance(arg, int):
        return default_name, arg
    name, size = arg
    return str(name), int(size)


def _space_parts(expr: Expr) -> tuple[tuple[str, int], ...]:
    """Flatten an element-space expression into (codebook, shift) slots.

    The element space must be a code or a tuple of codes; sums are data
    structures, not elements.
    """
    if isinstance(expr, Ref):
        return ((expr.name, 0),)
    if isinstance(expr, Perm):
        return ((expr.ref.name, expr.shift),)
    if isinstance(expr, Prod):
        parts: list[tuple[str, int]] = []
        for f in expr.factors:
            parts.extend(_space_parts(f))
        return tuple(parts)
    raise SpaceError(f"element space must be a code or tuple expression, got {expr!r}")


def _space_label(name: str, shift: int) -> str:
    return name if shift == 0 else f"{name}@{shift}"


class _Structure:
    """Shared plumbing: spec -> optimizer -> codebooks at n_opt."""

    spec: AccuracySpec
    result: OptimizationResult
    n_opt: int

    def _finalize(
        self,
        spec: AccuracySpec,
        hw: HardwareModel | None,
        seed: int,
        max_n: int,
    ) -> None:
        self.spec = spec
        self._hw = hw if hw is not None else HardwareModel.ideal()
        self._rng = RngStream(seed)
        self.result = optimize(self._hw, spec, max_n)
        self.n_opt = self.result.n_opt
        self._codebooks: dict[str, Codebook] = {}
        for i, (name, size) in enumerate(spec.codebooks.items()):
            self._codebooks[name] = Codebook(
                name, size, self.n_opt, self._rng.child(_TAG_CODEBOOK, i)
            )

    def spec_text(self) -> str:
        return print_spec(self.spec)

    def _param(self, req_index: int, size: int | None = None) -> QueryParams:
        qid = f"req{req_index}" if size is None else f"req{req_index}@{size}"
        return self.result.by_id(qid)

    def _code(self, name: str, shift: int, index: int) -> Hypervector:
        cb = self._codebooks[name]
        if not 0 <= index < cb.size:
            raise SpaceError(f"index {index} out of range for codebook {name}({cb.size})")
        v = cb[index]
        return hdvec.permute(v, shift) if shift else v

    def _bundle(self, vectors: Sequence[Hypervector], *tags: int) -> Hypervector:
        return hdvec.bundle(vectors, tiebreak_rng=self._rng.child(_TAG_TIEBREAK, *tags))

    # Subclasses list their item memory as (id, metadata, vector) rows.
    def _item_memory_entries(self) -> list[tuple[str, dict, Hypervector]]:
        raise NotImplementedError

    _KIND = "structure"


class SetDs(_Structure):
    """A bounded set of codes (or code tuples) stored in one hypervector.

    ``space`` is the element expression over ``codebooks``; elements are
    index tuples with one slot per code in the expression.  Membership is
    always queryable; pass ``subset_query=(max_query_size, k)`` to also allow
    k-of-subset queries.
    """

    _KIND = "set"

    def __init__(
        self,
        max_size: int,
        space: Expr,
        codebooks: dict[str, int],
        *,
        acc: float = 0.99,
        fp: float = 0.01,
        fn: float = 0.003,
        subset_query: tuple[int, int] | None = None,
        hw: HardwareModel | None = None,
        seed: int = 0,
        max_n: int = DEFAULT_MAX_N,
    ):
        if max_size < 1:
            raise DsError(f"set capacity must be at least 1, got {max_size}")
        self.max_size = max_size
        self.space = space
        self._parts = _space_parts(space)
        for name, _ in self._parts:
            if name not in codebooks:
                raise SpaceError(f"element space uses undeclared codebook {name!r}")

        bindings: dict[str, Expr] = {"ds": Sum(max_size, (space,))}
        reqs: list[Requirement] = [Requirement(space, Ref("ds"), 1, acc, fp, fn)]
        self._subset = None
        if subset_query is not None:
            mprime, k = subset_query
            if not 1 <= k <= mprime:
                raise DsError(f"subset query needs 1 <= k <= max query size, got ({mprime}, {k})")
            if k > max_size:
                raise DsError(f"subset match count {k} exceeds set capacity {max_size}")
            self._subset = (mprime, k)
            # One requirement per query size, largest first; requirement index
            # maps back to the size when looking up thresholds.
            self._subset_req_index = {}
            for s in range(mprime, k - 1, -1):
                self._subset_req_index[s] = len(reqs)
                reqs.append(Requirement(Sum(s, (space,)), Ref("ds"), k, acc, fp, fn))

        spec = AccuracySpec(dict(codebooks), bindings, tuple(reqs))
        self._finalize(spec, hw, seed, max_n)

        self._elements: list[tuple[int, ...]] = []
        self._version = 0
        self.ds_vector: Hypervector | None = None

    @property
    def elements(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self._elements)

    def _check_element(self, elem: Sequence[int]) -> tuple[int, ...]:
        elem = tuple(int(x) for x in elem)
        if len(elem) != len(self._parts):
            raise SpaceError(
                f"element has {len(elem)} slots, space {print_expr(self.space)} has {len(self._parts)}"
            )
        return elem

    def _elem_tuple(self, elem: tuple[int, ...]) -> frozenset:
        return frozenset(
            (_space_label(name, shift), idx) for (name, shift), idx in zip(self._parts, elem)
        )

    def _elem_vector(self, elem: tuple[int, ...]) -> Hypervector:
        vs = [self._code(name, shift, idx) for (name, shift), idx in zip(self._parts, elem)]
        out = vs[0]
        for v in vs[1:]:
            out = hdvec.bind(out, v)
        return out

    def add(self, elem: Sequence[int]) -> None:
        elem = self._check_element(elem)
        self._elem_vector(elem)  # range check before anything commits
        if len(self._elements) >= self.max_size:
            raise CapacityError(f"set already holds {self.max_size} elements")
        candidate = [self._elem_tuple(e) for e in self._elements]
        candidate.append(self._elem_tuple(elem))
        if not check_independent_set(candidate):
            raise IndependenceError(f"adding {elem} would make the element set dependent")
        self._elements.append(elem)
        self._version += 1
        self.ds_vector = self._bundle(
            [self._elem_vector(e) for e in self._elements], self._version
        )

    def in_set(self, elem: Sequence[int]) -> bool:
        elem = self._check_element(elem)
        q = self._elem_vector(elem)
        if not self._elements:
            return False
        p = self._param(0, len(self._elements))
        d = hdvec.partial_distance(q, self.ds_vector, p.n)
        return bool(d <= p.threshold)

    def subset(self, elems: Sequence[Sequence[int]], mprime: int | None = None, k: int | None = None) -> bool:
        """Do at least k of the query elements appear in the set?

        The query shape must match the one declared at construction; the
        optional arguments exist to make call sites explicit.
        """
        if self._subset is None:
            raise DsError("no subset query was declared for this set")
        dec_mprime, dec_k = self._subset
        if mprime is not None and mprime != dec_mprime:
            raise DsError(f"declared max query size is {dec_mprime}, got {mprime}")
        if k is not None and k != dec_k:
            raise DsError(f"declared match count is {dec_k}, got {k}")
        elems = [self._check_element(e) for e in elems]
        if not dec_k <= len(elems) <= dec_mprime:
            raise DsError(
                f"subset query size {len(elems)} outside declared range [{dec_k}, {dec_mprime}]"
            )
        qtuples = [self._elem_tuple(e) for e in elems]
        if not check_independent_set(qtuples):
            raise IndependenceError("subset query elements are not mutually independent")
        if not self._elements:
            return False
        p = self._param(self._subset_req_index[len(elems)])
        qvec = self._bundle([self._elem_vector(e) for e in elems], _TAG_QUERY, *[i for e in elems for i in e])
        d = hdvec.partial_distance(qvec, self.ds_vector, p.n)
        return bool(d <= p.threshold)

    def _item_memory_entries(self):
        if self.ds_vector is None:
            return []
        return [("ds", {"size": len(self._elements)}, self.ds_vector)]


class Database(_Structure):
    """Records of key-value pairs, one hypervector per record in item memory.

    ``matches`` finds the records sharing at least ``k`` pairs with a query
    set (declare the shape with ``match_query=(max_pairs, k)``); ``analogy``
    answers Kanerva-style mapping queries between two same-shaped records
    (declare with ``analogy_query=True``).
    """

    _KIND = "database"

    def __init__(
        self,
        capacity: int,
        keys,
        vals,
        *,
        match_query: tuple[int, int] | None = None,
        analogy_query: bool = False,
        acc: float = 0.99,
        fp: float = 0.01,
        fn: float = 0.003,
        hw: HardwareModel | None = None,
        seed: int = 0,
        max_n: int = DEFAULT_MAX_N,
    ):
        if capacity < 1:
            raise DsError(f"record capacity must be at least 1, got {capacity}")
        if match_query is None and not analogy_query:
            raise DsError("declare at least one query (match_query or analogy_query)")
        self.capacity = capacity
        kname, ksize = _codebook_arg(keys, "keys")
        vname, vsize = _codebook_arg(vals, "vals")
        self._kname, self._vname = kname, vname

        kv = Prod((Ref(kname), Ref(vname)))
        bindings: dict[str, Expr] = {
            "ds": Sum(capacity, (kv,)),
            "ds2": Prod((Ref("ds"), Ref("ds"))),
            "kv": kv,
            "val2": Prod((Ref(vname), Ref(vname))),
        }
        reqs: list[Requirement] = []
        self._match = None
        if match_query is not None:
            mprime, k = match_query
            if not 1 <= k <= mprime:
                raise DsError(f"match query needs 1 <= k <= max pairs, got ({mprime}, {k})")
            if k > capacity:
                raise DsError(f"match count {k} exceeds record capacity {capacity}")
            self._match = (mprime, k)
            self._match_req_index = {}
            for s in range(mprime, k - 1, -1):
                self._match_req_index[s] = len(reqs)
                reqs.append(Requirement(Sum(s, (Ref("kv"),)), Ref("ds"), k, acc, fp, fn))
        self._analogy_req_index = None
        if analogy_query:
            self._analogy_req_index = len(reqs)
            reqs.append(Requirement(Ref("val2"), Ref("ds2"), 1, acc, fp, fn))
            if hw is not None:
                # The analogy target binds two record vectors, so one
                # comparison reads item memory twice; compose that channel
                # per access.  Match queries over the same database then run
                # against a slightly pessimistic rate, which only widens
                # their margin.
                mem = dict(hw.mem_err)
                e = mem.get("item-mem", 0.0)
                mem["item-mem"] = 1.0 - (1.0 - e) ** 2
                hw = HardwareModel(op_err=dict(hw.op_err), mem_err=mem)

        spec = AccuracySpec({kname: ksize, vname: vsize}, bindings, tuple(reqs))
        self._finalize(spec, hw, seed, max_n)

        self._records: dict[int, dict[int, int]] = {}
        self._vectors: dict[int, Hypervector] = {}
        self._versions: dict[int, int] = {}

    @property
    def records(self) -> dict[int, dict[int, int]]:
        return {rid: dict(pairs) for rid, pairs in self._records.items()}

    def add_record(self, rid: int) -> None:
        rid = int(rid)
        if rid in self._records:
            raise DsError(f"record {rid} already exists")
        self._records[rid] = {}
        self._versions[rid] = 0

    @staticmethod
    def _pair_tuple(kname, vname, key, val) -> frozenset:
        return frozenset(((kname, key), (vname, val)))

    def _pair_vector(self, key: int, val: int) -> Hypervector:
        return hdvec.bind(self._code(self._kname, 0, key), self._code(self._vname, 0, val))

    def add_entry(self, rid: int, key: int, val: int) -> None:
        rid, key, val = int(rid), int(key), int(val)
        if rid not in self._records:
            raise DsError(f"no record {rid}; call add_record first")
        rec = self._records[rid]
        self._pair_vector(key, val)  # range check
        if key in rec:
            raise DuplicateKeyError(f"record {rid} already binds key {key}")
        if len(rec) >= self.capacity:
            raise CapacityError(f"record {rid} already holds {self.capacity} pairs")
        tuples = [self._pair_tuple(self._kname, self._vname, k, v) for k, v in rec.items()]
        tuples.append(self._pair_tuple(self._kname, self._vname, key, val))
        if not check_independent_set(tuples):
            raise IndependenceError(f"pair ({key}, {val}) would make record {rid} dependent")
        rec[key] = val
        self._versions[rid] += 1
        self._vectors[rid] = self._bundle(
            [self._pair_vector(k, v) for k, v in rec.items()], rid, self._versions[rid]
        )

    def matches(self, pairs: Sequence[tuple[int, int]], mprime: int | None = None, k: int | None = None) -> list[int]:
        """Record ids sharing at least k key-value pairs with the query, ascending."""
        if self._match is None:
            raise DsError("no match query was declared for this database")
        dec_mprime, dec_k = self._match
        if mprime is not None and mprime != dec_mprime:
            raise DsError(f"declared max query size is {dec_mprime}, got {mprime}")
        if k is not None and k != dec_k:
            raise DsError(f"declared match count is {dec_k}, got {k}")
        pairs = [(int(a), int(b)) for a, b in pairs]
        if not dec_k <= len(pairs) <= dec_mprime:
            raise DsError(
                f"match query size {len(pairs)} outside declared range [{dec_k}, {dec_mprime}]"
            )
        if len({a for a, _ in pairs}) != len(pairs):
            raise DuplicateKeyError("match query binds a key twice")
        qtuples = [self._pair_tuple(self._kname, self._vname, a, b) for a, b in pairs]
        if not check_independent_set(qtuples):
            raise IndependenceError("match query pairs are not mutually independent")

        p = self._param(self._match_req_index[len(pairs)])
        qvec = self._bundle(
            [self._pair_vector(a, b) for a, b in pairs],
            _TAG_QUERY,
            *[i for ab in pairs for i in ab],
        )
        out = []
        for rid in sorted(self._vectors):
            d = hdvec.partial_distance(qvec, self._vectors[rid], p.n)
            if d <= p.threshold:
                out.append(rid)
        return out

    def analogy(self, rid_a: int, rid_b: int, value: int) -> int | None:
        """Complete the analogy: ``value`` is to record a as which value is to record b?

        Scans every value code against the bound record pair and returns the
        single match, None when nothing matches, and raises when several do.
        """
        if self._analogy_req_index is None:
            raise DsError("no analogy query was declared for this database")
        rid_a, rid_b, value = int(rid_a), int(rid_b), int(value)
        for rid in (rid_a, rid_b):
            if rid not in self._vectors:
                raise DsError(f"record {rid} is missing or empty")
        rec_a, rec_b = self._records[rid_a], self._records[rid_b]
        if set(rec_a) != set(rec_b):
            raise DsError("analogy needs two records over the same key set")
        fac_a = [self._pair_tuple(self._kname, self._vname, k, v) for k, v in rec_a.items()]
        fac_b = [self._pair_tuple(self._kname, self._vname, k, v) for k, v in rec_b.items()]
        if not check_independent_product([fac_a, fac_b]):
            raise IndependenceError("record pair is not an independent product")

        p = self._param(self._analogy_req_index)
        known = self._code(self._vname, 0, value)
        target = hdvec.bind(hdvec.bind(self._vectors[rid_a], self._vectors[rid_b]), known)
        # d(known (x) v, A (x) B) == d(v, A (x) B (x) known), so one scan over
        # the value codebook memory covers every candidate.
        dists = hamming_many(self._codebooks[self._vname].memory, target.words, p.n)
        hits = [int(v) for v in range(len(dists)) if dists[v] / p.n <= p.threshold]
        if not hits:
            return None
        if len(hits) > 1:
            raise AmbiguousAnalogyError(f"values {hits} all match the analogy query")
        return hits[0]

    def _item_memory_entries(self):
        return [
            (str(rid), {"size": len(self._records[rid])}, self._vectors[rid])
            for rid in sorted(self._vectors)
        ]


class KnowledgeGraph(_Structure):
    """Directed labelled graph, one hypervector per vertex in item memory.

    An edge is an (interaction, relation, concept) index triple; each
    vertex's outgoing edges are bundled into its vector.  ``has_edge`` scans
    every vertex with the threshold tuned for that vertex's degree class.
    """

    _KIND = "knowledge-graph"

    def __init__(
        self,
        concepts,
        relations,
        interactions,
        max_degree: int,
        *,
        acc: float = 0.99,
        fp: float = 0.01,
        fn: float = 0.003,
        hw: HardwareModel | None = None,
        seed: int = 0,
        max_n: int = DEFAULT_MAX_N,
    ):
        if max_degree < 1:
            raise DsError(f"max degree must be at least 1, got {max_degree}")
        self.max_degree = max_degree
        cname, csize = _codebook_arg(concepts, "concepts")
        rname, rsize = _codebook_arg(relations, "relations")
        iname, isize = _codebook_arg(interactions, "interactions")
        self._names = (iname, rname, cname)

        edge = Prod((Ref(iname), Ref(rname), Ref(cname)))
        bindings: dict[str, Expr] = {
            "query": edge,
            "ds": Sum(max_degree, (edge,)),
        }
        reqs = (Requirement(Ref("query"), Ref("ds"), 1, acc, fp, fn),)
        spec = AccuracySpec(
            {iname: isize, rname: rsize, cname: csize}, bindings, reqs
        )
        self._finalize(spec, hw, seed, max_n)

        self._edges: dict[int, list[tuple[int, int, int]]] = {}
        self._vectors: dict[int, Hypervector] = {}

    def _edge_tuple(self, edge: tuple[int, int, int]) -> frozenset:
        i, r, c = edge
        return frozenset(((self._names[0], i), (self._names[1], r), (self._names[2], c)))

    def _edge_vector(self, edge: tuple[int, int, int]) -> Hypervector:
        i, r, c = edge
        v = hdvec.bind(self._code(self._names[0], 0, i), self._code(self._names[1], 0, r))
        return hdvec.bind(v, self._code(self._names[2], 0, c))

    def add_vertex(self, vid: int, edges: Iterable[tuple[int, int, int]]) -> None:
        vid = int(vid)
        if vid in self._edges:
            raise DsError(f"vertex {vid} already exists")
        edges = [tuple(int(x) for x in e) for e in edges]
        for e in edges:
            if len(e) != 3:
                raise SpaceError(f"edge {e} is not an (interaction, relation, concept) triple")
        if len(edges) > self.max_degree:
            raise CapacityError(f"vertex {vid} has degree {len(edges)} > bound {self.max_degree}")
        vecs = [self._edge_vector(e) for e in edges]  # range checks
        if edges and not check_independent_set([self._edge_tuple(e) for e in edges]):
            raise IndependenceError(f"edge set of vertex {vid} is not mutually independent")
        if vecs:
            vector = self._bundle(vecs, vid)
        else:
            # A degree-0 vertex still occupies item memory; an unrelated
            # random vector sits at distance ~1/2 from every query.
            vector = hdvec.rand_code(self._rng.child(_TAG_EMPTY_NODE, vid), self.n_opt)
        self._edges[vid] = edges
        self._vectors[vid] = vector

    def degree(self, vid: int) -> int:
        return len(self._edges[int(vid)])

    def has_edge(self, edge: tuple[int, int, int]) -> list[int]:
        """Vertex ids whose edge set contains the triple, ascending."""
        edge = tuple(int(x) for x in edge)
        q = self._edge_vector(edge)
        out = []
        for vid in sorted(self._vectors):
            # Threshold class: smallest modeled degree bound covering the
            # vertex's actual degree (degree 0 shares the class of degree 1).
            p = self._param(0, max(self.degree(vid), 1))
            d = hdvec.partial_distance(q, self._vectors[vid], p.n)
            if d <= p.threshold:
                out.append(vid)
        return out

    def _item_memory_entries(self):
        return [
            (str(vid), {"degree": len(self._edges[vid])}, self._vectors[vid])
            for vid in sorted(self._vectors)
        ]


class Nfa(_Structure):
    """Nondeterministic automaton over a bundled current-state-set vector.

    Transitions (state, symbol, next_state) are bundled into one transition
    vector; ``execute`` binds the state set with the symbol and the
    transitions, un-permutes, and then runs a cleanup pass that recalls each
    state code against the noisy result and rebuilds a clean (and possibly
    smaller) state vector.  Accuracy targets are end to end for a run of
    ``steps`` symbols, so each step gets the per-step share.
    """

    _KIND = "nfa"

    def __init__(
        self,
        states,
        symbols,
        max_transitions: int,
        *,
        steps: int,
        acc: float = 0.99,
        fp: float = 0.01,
        fn: float = 0.003,
        hw: HardwareModel | None = None,
        seed: int = 0,
        max_n: int = DEFAULT_MAX_N,
    ):
        if max_transitions < 1:
            raise DsError(f"transition bound must be at least 1, got {max_transitions}")
        if steps < 1:
            raise DsError(f"unroll length must be at least 1, got {steps}")
        self.max_transitions = max_transitions
        self.steps = steps
        sname, ssize = _codebook_arg(states, "state")
        aname, asize = _codebook_arg(symbols, "symbol")
        if "ds" in (sname, aname):
            raise DsError("codebook name 'ds' collides with the transition binding")
        self._sname, self._aname = sname, aname
        self._nstates = ssize

        # Budgets compose multiplicatively across the unrolled steps.  The
        # false-positive share also divides across the cleanup scan: every
        # step compares all ssize state codes against the noisy recall, and
        # any one of them sneaking in corrupts the final match count.
        ha = acc ** (1.0 / steps)
        hfp = 1.0 - (1.0 - fp) ** (1.0 / (steps * ssize))
        hfn = 1.0 - (1.0 - fn) ** (1.0 / steps)
        self.step_targets = (ha, hfp, hfn)

        trans = Sum(max_transitions, (Prod((Ref(sname), Ref(aname), Perm(1, Ref(sname)))),))
        bindings: dict[str, Expr] = {
            "ds": trans,
            "states": Sum(ssize, (Ref(sname),)),
        }
        # The step query recalls one state from perm(-1, css (x) symbol (x) ds),
        # which matches exactly when (symbol (x) perm(1, state)) falls in the
        # product of the current-state set and the transition set.  One
        # requirement per possible state-set size, largest first.
        step_query = Prod((Ref(aname), Perm(1, Ref(sname))))
        reqs: list[Requirement] = []
        self._step_req_index = {}
        for s in range(ssize, 0, -1):
            self._step_req_index[s] = len(reqs)
            reqs.append(
                Requirement(
                    step_query,
                    Prod((Sum(s, (Ref(sname),)), Ref("ds"))),
                    1,
                    ha,
                    hfp,
                    hfn,
                )
            )
        spec = AccuracySpec({sname: ssize, aname: asize}, bindings, tuple(reqs))
        self._finalize(spec, hw, seed, max_n)

        self._transitions: list[tuple[int, int, int]] = []
        self._trans_vector: Hypervector | None = None
        self._css: frozenset[int] = frozenset()
        self._css_vector: Hypervector | None = None
        self._started = False
        self._step = 0

    def _trans_tuple(self, t: tuple[int, int, int]) -> frozenset:
        s, a, s2 = t
        return frozenset(((self._sname, s), (self._aname, a), (f"{self._sname}@1", s2)))

    def _trans_vector_one(self, t: tuple[int, int, int]) -> Hypervector:
        s, a, s2 = t
        v = hdvec.bind(self._code(self._sname, 0, s), self._code(self._aname, 0, a))
        return hdvec.bind(v, self._code(self._sname, 1, s2))

    def set_transitions(self, triples: Iterable[tuple[int, int, int]]) -> None:
        triples = [tuple(int(x) for x in t) for t in triples]
        if len(triples) > self.max_transitions:
            raise CapacityError(
                f"{len(triples)} transitions exceed the declared bound {self.max_transitions}"
            )
        if not triples:
            raise DsError("an automaton needs at least one transition")
        vecs = [self._trans_vector_one(t) for t in triples]  # range checks
        if not check_independent_set([self._trans_tuple(t) for t in triples]):
            raise IndependenceError("transition tuples are not mutually independent")
        self._transitions = triples
        self._trans_vector = self._bundle(vecs, _TAG_STEP, 0)

    def _size_class(self, count: int) -> int:
        return min(max(count, 1), self._nstates)

    def start_states(self, ids: Iterable[int]) -> None:
        ids = sorted({int(i) for i in ids})
        if not ids:
            raise DsError("start state set cannot be empty")
        for i in ids:
            self._code(self._sname, 0, i)
        self._css = frozenset(ids)
        self._started = True
        self._step = 0
        p = self._param(self._step_req_index[self._size_class(len(ids))])
        self._rebuild_css_vector(p.n)

    def _rebuild_css_vector(self, n_q: int) -> None:
        vs = [
            hdvec.prefix(self._code(self._sname, 0, i), n_q) for i in sorted(self._css)
        ]
        self._css_vector = hdvec.bundle(
            vs, tiebreak_rng=self._rng.child(_TAG_TIEBREAK, _TAG_STEP, self._step, *sorted(self._css))
        )

    @property
    def state_estimate(self) -> frozenset[int]:
        return self._css

    def execute(self, symbol: int) -> frozenset[int]:
        """Apply one input symbol and return the new recalled state set."""
        if self._trans_vector is None:
            raise DsError("set_transitions must be called before execute")
        if not self._started:
            raise DsError("start_states must be called before execute")
        symbol = int(symbol)
        self._code(self._aname, 0, symbol)
        self._step += 1
        # An emptied state set is a terminal non-match, not an error.
        if not self._css:
            return self._css

        css_rows = [frozenset({(self._sname, i)}) for i in sorted(self._css)]
        if not check_independent_product(
            [css_rows, [self._trans_tuple(t) for t in self._transitions]]
        ):
            raise IndependenceError("state set and transition set are not an independent product")

        p = self._param(self._step_req_index[self._size_class(len(self._css))])
        n_q = min(p.n, self._css_vector.n)
        sym = hdvec.prefix(self._code(self._aname, 0, symbol), n_q)
        trans = hdvec.prefix(self._trans_vector, n_q)
        css = hdvec.prefix(self._css_vector, n_q)
        noisy = hdvec.permute(hdvec.bind(css, hdvec.bind(sym, trans)), -1)

        mem = self._codebooks[self._sname].memory
        dists = hamming_many(mem, noisy.words, n_q)
        recalled = frozenset(int(i) for i in range(self._nstates) if dists[i] / n_q <= p.threshold)

        self._css = recalled
        if recalled:
            p_next = self._param(self._step_req_index[self._size_class(len(recalled))])
            self._rebuild_css_vector(p_next.n)
        else:
            self._css_vector = None
        return recalled

    def _item_memory_entries(self):
        rows = []
        if self._trans_vector is not None:
            rows.append(("transitions", {"size": len(self._transitions)}, self._trans_vector))
        if self._css_vector is not None:
            rows.append(("states", {"size": len(self._css)}, self._css_vector))
        return rows


def emit_spec(structure: _Structure) -> AccuracySpec:
    """The accuracy spec a structure compiled for itself at construction."""
    return structure.spec


def export_item_memory(structure: _Structure, path: str) -> None:
    """Write a structure's item memory to ``path``.

    Produces ``manifest.json`` (ids, sizes/degrees, the per-query parameter
    table) plus ``vectors.bin``, a concatenation of binary vector dumps the
    manifest indexes by byte offset.
    """
    os.makedirs(path, exist_ok=True)
    entries = []
    blob = bytearray()
    for entry_id, meta, vector in structure._item_memory_entries():
        raw = hdvec.dump_vector(vector)
        entries.append(
            {"id": entry_id, **meta, "offset": len(blob), "nbytes": len(raw)}
        )
        blob.extend(raw)
    manifest = {
        "kind": structure._KIND,
        "n_opt": structure.n_opt,
        "vector_file": "vectors.bin",
        "entries": entries,
        "queries": [asdict(q) for q in structure.result.queries],
    }
    with open(os.path.join(path, "vectors.bin"), "wb") as f:
        f.write(bytes(blob))
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def load_item_memory(path: str) -> tuple[dict, dict[str, Hypervector]]:
    """Read back an exported item memory as (manifest, id -> vector)."""
    with open(os.path.join(path, "manifest.json")) as f:
        manifest = json.load(f)
    with open(os.path.join(path, manifest["vector_file"]), "rb") as f:
        blob = f.read()
    vectors = {}
    for entry in manifest["entries"]:
        off, nb = entry["offset"], entry["nbytes"]
        vectors[entry["id"]] = hdvec.load_vector(blob[off : off + nb])
    return manifest, vectors
