"""Parsing, printing, and expansion for accuracy specs and hardware models.

Two small languages live here.

An accuracy spec declares codebooks, named abstract-data expressions, and
accuracy requirements over them::

    spec {
        codebook keys(20), vals(40);
        abs-data kv = prod(keys,vals);
        abs-data ds = sum(20,kv);
        require-accuracy(kv, ds, 1, 0.99, 0.01, 0.01);
    }

A hardware model assigns bit-flip rates to operators and memories::

    hardware-model {
        mem codebook = 0.00;
        mem item-mem = 0.0215;
        op bind = 0.00;
        op bundle = 0.00;
    }

Identifiers are ``[A-Za-z][A-Za-z0-9_-]*`` (hyphens allowed, so ``item-mem``
is a single token), statements end with ``;``, ``//`` starts a line comment,
and whitespace is insignificant.  Spec files conventionally use the ``.heim``
extension and hardware models ``.hw``; both are required to be UTF-8.

Everything is parsed by a hand-rolled recursive-descent parser that reports
1-based line/column positions on error.  ``parse(print_spec(s))`` returns a
spec structurally equal to ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

__all__ = [
    "Ref",
    "Perm",
    "Sum",
    "Prod",
    "Expr",
    "Requirement",
    "AccuracySpec",
    "HardwareModel",
    "SpecError",
    "OP_NAMES",
    "MEM_NAMES",
    "parse_spec",
    "parse_hw_model",
    "parse_infix",
    "print_spec",
    "print_hw_model",
    "print_expr",
    "expand_vars",
]

OP_NAMES = ("bind", "bundle", "perm")
MEM_NAMES = ("codebook", "item-mem", "query")


class SpecError(ValueError):
    """Parse or validation failure, carrying a source position when known."""

    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            msg = f"{line}:{col}: {msg}"
        super().__init__(msg)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

# Positions are carried for error messages but excluded from equality so that
# round-tripping through the printer preserves structural equality.
_POS = dict(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ref:
    """A reference to a codebook or an abs-data variable."""

    name: str
    pos: tuple[int, int] | None = field(**_POS)


@dataclass(frozen=True)
class Perm:
    """A circular shift of a simple reference; perm(i, v) in the surface syntax."""

    shift: int
    ref: Ref
    pos: tuple[int, int] | None = field(**_POS)


@dataclass(frozen=True)
class Sum:
    """A set of at most ``bound`` elements drawn from the space of ``terms``."""

    bound: int
    terms: tuple["Expr", ...]
    pos: tuple[int, int] | None = field(**_POS)


@dataclass(frozen=True)
class Prod:
    """A tuple (XOR binding) of the factor expressions."""

    factors: tuple["Expr", ...]
    pos: tuple[int, int] | None = field(**_POS)


Expr = Union[Ref, Perm, Sum, Prod]


@dataclass(frozen=True)
class Requirement:
    """require-accuracy(query, ds, k, acc, fp, fn)."""

    query: Expr
    ds: Expr
    k: int
    acc: float
    fp: float
    fn: float
    pos: tuple[int, int] | None = field(**_POS)


@dataclass(frozen=True)
class AccuracySpec:
    codebooks: dict[str, int]
    bindings: dict[str, Expr]
    requirements: tuple[Requirement, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AccuracySpec):
            return NotImplemented
        return (
            self.codebooks == other.codebooks
            and self.bindings == other.bindings
            and self.requirements == other.requirements
        )


@dataclass(frozen=True)
class HardwareModel:
    """Per-operator and per-memory bit-flip rates, each in [0, 0.5)."""

    op_err: dict[str, float]
    mem_err: dict[str, float]

    @classmethod
    def ideal(cls) -> "HardwareModel":
        return cls(op_err=dict.fromkeys(OP_NAMES, 0.0), mem_err=dict.fromkeys(MEM_NAMES, 0.0))

    def rates(self) -> tuple[float, ...]:
        return tuple(self.op_err[o] for o in OP_NAMES) + tuple(self.mem_err[m] for m in MEM_NAMES)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------


def _is_ident_start(c: str) -> bool:
    return c.isalpha()


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c in "_-"


@dataclass
class _Token:
    kind: str  # 'ident' | 'int' | 'real' | punctuation | 'eof'
    text: str
    line: int
    col: int


def _lex(src: str) -> list[_Token]:
    toks: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c.isspace():
            i, col = i + 1, col + 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if _is_ident_start(c):
            j = i + 1
            while j < n and _is_ident_char(src[j]):
                j += 1
            toks.append(_Token("ident", src[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and src[i + 1].isdigit()):
            j = i + 1
            seen_dot = False
            while j < n and (src[j].isdigit() or (src[j] == "." and not seen_dot)):
                if src[j] == ".":
                    seen_dot = True
                j += 1
            text = src[i:j]
            kind = "real" if seen_dot else "int"
            toks.append(_Token(kind, text, start_line, start_col))
            col += j - i
            i = j
            continue
        if c in "{}(),;=":
            toks.append(_Token(c, c, start_line, start_col))
            i, col = i + 1, col + 1
            continue
        raise SpecError(f"unexpected character {c!r}", line, col)
    toks.append(_Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _lex(src)
        self.i = 0

    def peek(self) -> _Token:
        return self.toks[self.i]

    def next(self) -> _Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            want = what or repr(kind)
            raise SpecError(f"expected {want}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def expect_keyword(self, word: str) -> _Token:
        tok = self.expect("ident", f"'{word}'")
        if tok.text != word:
            raise SpecError(f"expected '{word}', found {tok.text!r}", tok.line, tok.col)
        return tok

    def accept(self, kind: str, text: str | None = None) -> _Token | None:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.next()
        return None

    def fail(self, msg: str) -> SpecError:
        tok = self.peek()
        return SpecError(msg, tok.line, tok.col)

    # numbers -------------------------------------------------------------

    def parse_int(self, what: str) -> tuple[int, _Token]:
        tok = self.expect("int", what)
        return int(tok.text), tok

    def parse_number(self, what: str) -> tuple[float, _Token]:
        tok = self.peek()
        if tok.kind not in ("int", "real"):
            raise self.fail(f"expected {what}, found {tok.text!r}")
        self.next()
        return float(tok.text), tok

    # expressions ----------------------------------------------------------

    def parse_expr(self) -> Expr:
        tok = self.expect("ident", "an expression")
        pos = (tok.line, tok.col)
        if tok.text == "sum":
            self.expect("(")
            bound, btok = self.parse_int("a set size bound")
            if bound < 1:
                raise SpecError(f"sum bound must be >= 1, got {bound}", btok.line, btok.col)
            terms = []
            while self.accept(","):
                terms.append(self.parse_expr())
            self.expect(")")
            if not terms:
                raise SpecError("sum needs at least one element expression", tok.line, tok.col)
            return Sum(bound, tuple(terms), pos)
        if tok.text == "prod":
            self.expect("(")
            factors = [self.parse_expr()]
            while self.accept(","):
                factors.append(self.parse_expr())
            self.expect(")")
            if len(factors) < 2:
                raise SpecError("prod needs at least two factors", tok.line, tok.col)
            return Prod(tuple(factors), pos)
        if tok.text == "perm":
            self.expect("(")
            shift_tok = self.peek()
            if shift_tok.kind != "int":
                raise self.fail("expected an integer shift")
            shift = int(self.next().text)
            self.expect(",")
            inner_tok = self.expect("ident", "a codebook or variable name")
            if inner_tok.text in ("sum", "prod", "perm"):
                raise SpecError(
                    "perm applies only to simple references", inner_tok.line, inner_tok.col
                )
            self.expect(")")
            return Perm(shift, Ref(inner_tok.text, (inner_tok.line, inner_tok.col)), pos)
        return Ref(tok.text, pos)


# ---------------------------------------------------------------------------
# Spec parsing
# ---------------------------------------------------------------------------

_RESERVED = {"spec", "hardware-model", "codebook", "abs-data", "require-accuracy",
             "sum", "prod", "perm", "op", "mem"}


def parse_spec(text: str) -> AccuracySpec:
    """Parse accuracy-spec source text.

    Raises :class:`SpecError` with a line/column on syntax errors, duplicate
    or reserved names, out-of-range requirement parameters, and references to
    names that are never declared.
    """
    p = _Parser(text)
    p.expect_keyword("spec")
    p.expect("{")
    codebooks: dict[str, int] = {}
    bindings: dict[str, Expr] = {}
    requirements: list[Requirement] = []
    declared_at: dict[str, tuple[int, int]] = {}
    uses: list[tuple[str, tuple[int, int]]] = []

    def declare(name: str, tok: _Token) -> None:
        if name in _RESERVED:
            raise SpecError(f"{name!r} is a reserved word", tok.line, tok.col)
        if name in declared_at:
            raise SpecError(f"duplicate declaration of {name!r}", tok.line, tok.col)
        declared_at[name] = (tok.line, tok.col)

    def collect_uses(e: Expr) -> None:
        if isinstance(e, Ref):
            uses.append((e.name, e.pos or (0, 0)))
        elif isinstance(e, Perm):
            uses.append((e.ref.name, e.ref.pos or (0, 0)))
        elif isinstance(e, Sum):
            for t in e.terms:
                collect_uses(t)
        elif isinstance(e, Prod):
            for f in e.factors:
                collect_uses(f)

    while not p.accept("}"):
        tok = p.expect("ident", "a statement")
        if tok.text == "codebook":
            while True:
                name_tok = p.expect("ident", "a codebook name")
                declare(name_tok.text, name_tok)
                p.expect("(")
                size, stok = p.parse_int("a codebook size")
                if size < 1:
                    raise SpecError(f"codebook size must be >= 1, got {size}", stok.line, stok.col)
                p.expect(")")
                codebooks[name_tok.text] = size
                if not p.accept(","):
                    break
            p.expect(";")
        elif tok.text == "abs-data":
            name_tok = p.expect("ident", "a variable name")
            declare(name_tok.text, name_tok)
            p.expect("=")
            expr = p.parse_expr()
            collect_uses(expr)
            bindings[name_tok.text] = expr
            p.expect(";")
        elif tok.text == "require-accuracy":
            p.expect("(")
            query = p.parse_expr()
            collect_uses(query)
            p.expect(",")
            ds = p.parse_expr()
            collect_uses(ds)
            p.expect(",")
            k, ktok = p.parse_int("the match count k")
            if k < 1:
                raise SpecError(f"k must be >= 1, got {k}", ktok.line, ktok.col)
            p.expect(",")
            acc, atok = p.parse_number("an accuracy target")
            if not 0.0 < acc <= 1.0:
                raise SpecError(f"accuracy must be in (0, 1], got {acc}", atok.line, atok.col)
            p.expect(",")
            fp, ftok = p.parse_number("a false-positive bound")
            if not 0.0 <= fp < 1.0:
                raise SpecError(f"fp bound must be in [0, 1), got {fp}", ftok.line, ftok.col)
            p.expect(",")
            fn, ntok = p.parse_number("a false-negative bound")
            if not 0.0 <= fn < 1.0:
                raise SpecError(f"fn bound must be in [0, 1), got {fn}", ntok.line, ntok.col)
            p.expect(")")
            p.expect(";")
            requirements.append(Requirement(query, ds, k, acc, fp, fn, (tok.line, tok.col)))
        else:
            raise SpecError(
                f"expected 'codebook', 'abs-data' or 'require-accuracy', found {tok.text!r}",
                tok.line,
                tok.col,
            )
    p.expect("eof", "end of input")

    for name, pos in uses:
        if name not in codebooks and name not in bindings:
            raise SpecError(f"reference to undefined name {name!r}", pos[0], pos[1])
    return AccuracySpec(codebooks, bindings, tuple(requirements))


def parse_hw_model(text: str) -> HardwareModel:
    """Parse hardware-model source text.

    Unassigned rates default to 0.  Each rate must lie in [0, 0.5); operator
    statements accept an optional ``op`` prefix, memory statements require
    ``mem``.
    """
    p = _Parser(text)
    p.expect_keyword("hardware-model")
    p.expect("{")
    hw = HardwareModel.ideal()
    assigned: set[str] = set()

    def set_rate(table: dict[str, float], key: str, tok: _Token) -> None:
        p.expect("=")
        rate, rtok = p.parse_number("a flip rate")
        p.expect(";")
        if not 0.0 <= rate < 0.5:
            raise SpecError(f"flip rate must be in [0, 0.5), got {rate}", rtok.line, rtok.col)
        if key in assigned:
            raise SpecError(f"duplicate rate for {key!r}", tok.line, tok.col)
        assigned.add(key)
        table[key] = rate

    while not p.accept("}"):
        tok = p.expect("ident", "an operator or 'mem' statement")
        if tok.text == "mem":
            name_tok = p.expect("ident", "a memory name")
            if name_tok.text not in MEM_NAMES:
                raise SpecError(f"unknown memory {name_tok.text!r}", name_tok.line, name_tok.col)
            set_rate(hw.mem_err, name_tok.text, name_tok)
        elif tok.text == "op":
            name_tok = p.expect("ident", "an operator name")
            if name_tok.text not in OP_NAMES:
                raise SpecError(f"unknown operator {name_tok.text!r}", name_tok.line, name_tok.col)
            set_rate(hw.op_err, name_tok.text, name_tok)
        elif tok.text in OP_NAMES:
            set_rate(hw.op_err, tok.text, tok)
        else:
            raise SpecError(f"unknown operator {tok.text!r}", tok.line, tok.col)
    p.expect("eof", "end of input")
    return hw


# ---------------------------------------------------------------------------
# Infix element expressions (used by the independence-check CLI)
# ---------------------------------------------------------------------------


def parse_infix(text: str) -> Expr:
    """Parse a concrete element expression like ``a*c + b*c`` or ``(a+b)*(c+d)``.

    ``*`` binds codes into tuples, ``+`` collects set elements, parentheses
    group.  Returns the same AST node types as the spec language, with sum
    bounds equal to the number of listed elements.
    """
    tokens: list[tuple[str, int]] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if _is_ident_start(c):
            j = i + 1
            while j < n and _is_ident_char(text[j]):
                j += 1
            tokens.append((text[i:j], i))
            i = j
            continue
        if c in "+*()":
            tokens.append((c, i))
            i += 1
            continue
        raise SpecError(f"unexpected character {c!r} at offset {i}")
    pos = 0

    def peek() -> str | None:
        return tokens[pos][0] if pos < len(tokens) else None

    def atom() -> Expr:
        nonlocal pos
        tok = peek()
        if tok is None:
            raise SpecError("unexpected end of expression")
        if tok == "(":
            pos += 1
            e = expr()
            if peek() != ")":
                raise SpecError("missing ')'")
            pos += 1
            return e
        if tok in ("+", "*", ")"):
            raise SpecError(f"unexpected {tok!r}")
        pos += 1
        return Ref(tok)

    def term() -> Expr:
        nonlocal pos
        factors = [atom()]
        while peek() == "*":
            pos += 1
            factors.append(atom())
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def expr() -> Expr:
        nonlocal pos
        terms = [term()]
        while peek() == "+":
            pos += 1
            terms.append(term())
        return terms[0] if len(terms) == 1 else Sum(len(terms), tuple(terms))

    result = expr()
    if pos != len(tokens):
        raise SpecError(f"trailing input near {tokens[pos][0]!r}")
    return result


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _fmt_num(x: float) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def print_expr(e: Expr) -> str:
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, Perm):
        return f"perm({e.shift},{e.ref.name})"
    if isinstance(e, Sum):
        inner = ",".join(print_expr(t) for t in e.terms)
        return f"sum({e.bound},{inner})"
    if isinstance(e, Prod):
        return f"prod({','.join(print_expr(f) for f in e.factors)})"
    raise TypeError(f"not an expression: {e!r}")


def print_spec(spec: AccuracySpec) -> str:
    """Canonical source text; parse(print_spec(s)) == s."""
    lines = ["spec {"]
    if spec.codebooks:
        decls = ", ".join(f"{name}({size})" for name, size in spec.codebooks.items())
        lines.append(f"    codebook {decls};")
    for name, expr in spec.bindings.items():
        lines.append(f"    abs-data {name} = {print_expr(expr)};")
    for r in spec.requirements:
        args = ", ".join(
            [print_expr(r.query), print_expr(r.ds), str(r.k),
             _fmt_num(r.acc), _fmt_num(r.fp), _fmt_num(r.fn)]
        )
        lines.append(f"    require-accuracy({args});")
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_hw_model(hw: HardwareModel) -> str:
    lines = ["hardware-model {"]
    for name in MEM_NAMES:
        lines.append(f"    mem {name} = {_fmt_num(hw.mem_err[name])};")
    for name in OP_NAMES:
        lines.append(f"    op {name} = {_fmt_num(hw.op_err[name])};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Variable expansion
# ---------------------------------------------------------------------------


def expand_vars(spec: AccuracySpec) -> AccuracySpec:
    """Inline every abs-data variable into the requirements.

    The result's requirement expressions reference codebooks only.  Cyclic
    definitions are an error.  Expanding an already-expanded spec is a no-op
    on the requirements.
    """

    cache: dict[str, Expr] = {}

    def resolve(name: str, trail: tuple[str, ...]) -> Expr:
        if name in cache:
            return cache[name]
        if name in trail:
            cycle = " -> ".join(trail + (name,))
            raise SpecError(f"cyclic abs-data definition: {cycle}")
        out = substitute(spec.bindings[name], trail + (name,))
        cache[name] = out
        return out

    def substitute(e: Expr, trail: tuple[str, ...]) -> Expr:
        if isinstance(e, Ref):
            if e.name in spec.codebooks:
                return e
            return resolve(e.name, trail)
        if isinstance(e, Perm):
            if e.ref.name in spec.codebooks:
                return e
            inner = resolve(e.ref.name, trail)
            if not isinstance(inner, Ref):
                raise SpecError(
                    f"perm target {e.ref.name!r} must expand to a simple reference"
                )
            return Perm(e.shift, inner, e.pos)
        if isinstance(e, Sum):
            return Sum(e.bound, tuple(substitute(t, trail) for t in e.terms), e.pos)
        if isinstance(e, Prod):
            return Prod(tuple(substitute(f, trail) for f in e.factors), e.pos)
        raise TypeError(f"not an expression: {e!r}")

    reqs = tuple(
        Requirement(
            substitute(r.query, ()), substitute(r.ds, ()), r.k, r.acc, r.fp, r.fn, r.pos
        )
        for r in spec.requirements
    )
    return AccuracySpec(dict(spec.codebooks), {}, reqs)
