"""SPARQL 1.1 frontend: parse query text into an indexed algebra tree.

The supported subset covers SELECT/ASK with DISTINCT, FROM/FROM NAMED,
ORDER BY/LIMIT/OFFSET, group patterns with join/UNION/OPTIONAL/MINUS/GRAPH/
FILTER, and the full property-path algebra (plus p{n}, p{n,} and p{0,n}
which desugar to sequence/one-or-more/zero-or-one compositions).  Anything
else is rejected with UnsupportedFeature.

Pattern nodes are indexed root=1, left child 2i, right child 2i+1.  Each
property-path expression tree is numbered by the same child arithmetic in a
local index space, laid out in a fresh block after the largest pattern
index, so path predicates continue the pattern numbering seamlessly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Union

from . import filters
from .rdf import RDF_TYPE, Term, XSD, iri, literal

_XSD_STRING = XSD + "string"


class SparqlError(Exception):
    pass


class ParseError(SparqlError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


class UnsupportedFeature(SparqlError):
    def __init__(self, feature: str):
        self.feature = feature
        super().__init__(f"unsupported SPARQL feature: {feature}")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarRef:
    name: str

    def __repr__(self) -> str:
        return "?" + self.name


PTerm = Union[Term, VarRef]


@dataclass(frozen=True)
class Empty:
    index: int = 0


@dataclass(frozen=True)
class TP:
    s: PTerm
    p: PTerm
    o: PTerm
    index: int = 0


@dataclass(frozen=True)
class PathPat:
    s: PTerm
    path: "PathExpr"
    o: PTerm
    index: int = 0


@dataclass(frozen=True)
class Join:
    left: "Pattern"
    right: "Pattern"
    index: int = 0


@dataclass(frozen=True)
class Union_:
    left: "Pattern"
    right: "Pattern"
    index: int = 0


@dataclass(frozen=True)
class Optional_:
    left: "Pattern"
    right: "Pattern"
    index: int = 0


@dataclass(frozen=True)
class OptionalFilter:
    left: "Pattern"
    right: "Pattern"
    constraint: filters.Constraint = None  # type: ignore[assignment]
    index: int = 0


@dataclass(frozen=True)
class Filter:
    child: "Pattern"
    constraint: filters.Constraint = None  # type: ignore[assignment]
    index: int = 0


@dataclass(frozen=True)
class Minus:
    left: "Pattern"
    right: "Pattern"
    index: int = 0


@dataclass(frozen=True)
class GraphPat:
    name: PTerm
    child: "Pattern"
    index: int = 0


Pattern = Union[Empty, TP, PathPat, Join, Union_, Optional_, OptionalFilter,
                Filter, Minus, GraphPat]


@dataclass(frozen=True)
class Link:
    target: Term
    index: int = 0


@dataclass(frozen=True)
class Inv:
    child: "PathExpr"
    index: int = 0


@dataclass(frozen=True)
class Alt:
    left: "PathExpr"
    right: "PathExpr"
    index: int = 0


@dataclass(frozen=True)
class Seq:
    left: "PathExpr"
    right: "PathExpr"
    index: int = 0


@dataclass(frozen=True)
class ZeroOrOne:
    child: "PathExpr"
    index: int = 0


@dataclass(frozen=True)
class OneOrMore:
    child: "PathExpr"
    index: int = 0


@dataclass(frozen=True)
class ZeroOrMore:
    child: "PathExpr"
    index: int = 0


@dataclass(frozen=True)
class Negated:
    forward: tuple[Term, ...] = ()
    backward: tuple[Term, ...] = ()
    index: int = 0


PathExpr = Union[Link, Inv, Alt, Seq, ZeroOrOne, OneOrMore, ZeroOrMore, Negated]


@dataclass(frozen=True)
class QueryAst:
    form: str  # "select" | "ask"
    pattern: Pattern
    select_vars: tuple[str, ...] = ()  # projection order as written; () with star
    star: bool = False
    distinct: bool = False
    from_iris: tuple[str, ...] = ()
    from_named: tuple[str, ...] = ()
    order_by: tuple[tuple[str, bool], ...] = ()  # (var, ascending)
    limit: int | None = None
    offset: int | None = None

    def projection(self) -> tuple[str, ...]:
        if self.form == "ask":
            return ()
        if self.star:
            return tuple(sorted(pattern_vars(self.pattern)))
        return self.select_vars


def _children(node) -> list:
    if isinstance(node, (Join, Union_, Optional_, OptionalFilter, Minus)):
        return [node.left, node.right]
    if isinstance(node, Filter):
        return [node.child]
    if isinstance(node, GraphPat):
        return [node.child]
    return []


def pattern_vars(node: Pattern) -> frozenset[str]:
    """Variables a pattern can bind (MINUS exposes only its left side)."""
    if isinstance(node, Empty):
        return frozenset()
    if isinstance(node, TP):
        return frozenset(t.name for t in (node.s, node.p, node.o) if isinstance(t, VarRef))
    if isinstance(node, PathPat):
        return frozenset(t.name for t in (node.s, node.o) if isinstance(t, VarRef))
    if isinstance(node, Minus):
        return pattern_vars(node.left)
    if isinstance(node, Filter):
        return pattern_vars(node.child)
    if isinstance(node, GraphPat):
        extra = {node.name.name} if isinstance(node.name, VarRef) else set()
        return pattern_vars(node.child) | extra
    if isinstance(node, (Join, Union_, Optional_, OptionalFilter)):
        return pattern_vars(node.left) | pattern_vars(node.right)
    raise TypeError(f"not a pattern: {node!r}")


def all_query_vars(ast: QueryAst) -> frozenset[str]:
    seen: set[str] = set(ast.select_vars)
    seen.update(v for v, _ in ast.order_by)

    def walk(node) -> None:
        seen.update(pattern_vars(node))
        if isinstance(node, (Filter, OptionalFilter)):
            seen.update(filters.constraint_vars(node.constraint))
        for c in _children(node):
            walk(c)

    walk(ast.pattern)
    return frozenset(seen)


# ---------------------------------------------------------------------------
# Index assignment
# ---------------------------------------------------------------------------

def _path_locals(expr: PathExpr, local: int, out: dict[int, int]) -> None:
    out[id(expr)] = local
    if isinstance(expr, (Inv, ZeroOrOne, OneOrMore, ZeroOrMore)):
        _path_locals(expr.child, 2 * local, out)
    elif isinstance(expr, (Alt, Seq)):
        _path_locals(expr.left, 2 * local, out)
        _path_locals(expr.right, 2 * local + 1, out)


def _index_path(expr: PathExpr, offset: int) -> tuple[PathExpr, int]:
    locals_: dict[int, int] = {}
    _path_locals(expr, 1, locals_)
    max_local = max(locals_.values())

    def rebuild(e: PathExpr) -> PathExpr:
        idx = offset + locals_[id(e)] - 1
        if isinstance(e, (Inv, ZeroOrOne, OneOrMore, ZeroOrMore)):
            return replace(e, child=rebuild(e.child), index=idx)
        if isinstance(e, (Alt, Seq)):
            return replace(e, left=rebuild(e.left), right=rebuild(e.right), index=idx)
        return replace(e, index=idx)

    return rebuild(expr), offset + max_local


def index_patterns(ast: QueryAst) -> QueryAst:
    """Assign node indices; the result is structurally identical otherwise."""
    max_index = 1

    def measure(node, idx: int) -> None:
        nonlocal max_index
        max_index = max(max_index, idx)
        kids = _children(node)
        if len(kids) >= 1:
            measure(kids[0], 2 * idx)
        if len(kids) == 2:
            measure(kids[1], 2 * idx + 1)

    measure(ast.pattern, 1)
    next_block = [max_index + 1]

    # path blocks are handed out in increasing pattern-index order
    path_offsets: dict[int, int] = {}

    def reserve(node, idx: int) -> None:
        for_index = sorted(
            (i, n) for i, n in _collect_paths(node, idx)
        )
        for i, n in for_index:
            locals_: dict[int, int] = {}
            _path_locals(n.path, 1, locals_)
            path_offsets[i] = next_block[0]
            next_block[0] += max(locals_.values())

    def _collect_paths(node, idx: int):
        if isinstance(node, PathPat):
            yield idx, node
        kids = _children(node)
        if len(kids) >= 1:
            yield from _collect_paths(kids[0], 2 * idx)
        if len(kids) == 2:
            yield from _collect_paths(kids[1], 2 * idx + 1)

    reserve(ast.pattern, 1)

    def rebuild(node, idx: int):
        if isinstance(node, PathPat):
            path, _ = _index_path(node.path, path_offsets[idx])
            return replace(node, path=path, index=idx)
        kids = _children(node)
        if not kids:
            return replace(node, index=idx)
        if isinstance(node, (Filter, GraphPat)):
            return replace(node, child=rebuild(kids[0], 2 * idx), index=idx)
        return replace(
            node,
            left=rebuild(kids[0], 2 * idx),
            right=rebuild(kids[1], 2 * idx + 1),
            index=idx,
        )

    return replace(ast, pattern=rebuild(ast.pattern, 1))


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?:
        (?P<ws>\s+|\#[^\n]*)
      | (?P<iriref><[^<>"{}|^`\\\s]*>)
      | (?P<var>[?$][A-Za-z0-9_]+)
      | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
      | (?P<langtag>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
      | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
      | (?P<pname>(?:[A-Za-z_][A-Za-z0-9_.\-]*)?:(?:[A-Za-z0-9_][A-Za-z0-9_.\-]*)?)
      | (?P<blank>_:[A-Za-z0-9_.\-]+)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<punct>\^\^|&&|\|\||!=|<=|>=|[{}().;,|/^?*+!=<>\[\]])
    )""",
    re.X,
)

_KEYWORDS = {
    "select", "ask", "distinct", "where", "from", "named", "prefix", "base",
    "optional", "union", "minus", "graph", "filter", "order", "by", "asc",
    "desc", "limit", "offset", "a", "true", "false", "regex", "bound",
    "isiri", "isuri", "isblank", "isliteral", "isnumeric",
}

_UNSUPPORTED_KEYWORDS = {
    "construct", "describe", "group", "having", "bind", "values", "exists",
    "service", "reduced", "insert", "delete",
}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Tok(kind, m.group(0), pos))
        pos = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


def _unescape_string(raw: str, pos: int) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    escapes = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
               '"': '"', "'": "'", "\\": "\\"}
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        nxt = body[i + 1]
        if nxt in escapes:
            out.append(escapes[nxt])
            i += 2
        elif nxt == "u":
            out.append(chr(int(body[i + 2:i + 6], 16)))
            i += 6
        elif nxt == "U":
            out.append(chr(int(body[i + 2:i + 10], 16)))
            i += 10
        else:
            raise ParseError(f"bad string escape \\{nxt}", pos)
    return "".join(out)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    # --- token helpers ---

    def peek(self, k: int = 0) -> _Tok:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> _Tok:
        tok = self.peek()
        self.i += 1
        return tok

    def at_punct(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == text

    def at_keyword(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text.lower() == word

    def take_punct(self, text: str) -> None:
        if not self.at_punct(text):
            t = self.peek()
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.pos)
        self.next()

    def take_keyword(self, word: str) -> None:
        if not self.at_keyword(word):
            t = self.peek()
            raise ParseError(f"expected {word.upper()}, found {t.text!r}", t.pos)
        self.next()

    def check_supported(self) -> None:
        t = self.peek()
        if t.kind == "ident" and t.text.lower() in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeature(t.text.upper())

    # --- entry point ---

    def query(self) -> QueryAst:
        self.prologue()
        self.check_supported()
        if self.at_keyword("select"):
            ast = self.select_query()
        elif self.at_keyword("ask"):
            ast = self.ask_query()
        else:
            t = self.peek()
            raise ParseError(f"expected SELECT or ASK, found {t.text!r}", t.pos)
        if self.peek().kind != "eof":
            t = self.peek()
            raise ParseError(f"unexpected trailing content {t.text!r}", t.pos)
        return ast

    def prologue(self) -> None:
        while True:
            if self.at_keyword("prefix"):
                self.next()
                t = self.next()
                if t.kind != "pname" or not t.text.endswith(":"):
                    raise ParseError("expected prefix name", t.pos)
                pfx = t.text[:-1]
                u = self.next()
                if u.kind != "iriref":
                    raise ParseError("expected IRI after PREFIX", u.pos)
                self.prefixes[pfx] = u.text[1:-1]
            elif self.at_keyword("base"):
                raise UnsupportedFeature("BASE")
            else:
                return

    def select_query(self) -> QueryAst:
        self.take_keyword("select")
        distinct = False
        if self.at_keyword("distinct"):
            self.next()
            distinct = True
        if self.at_keyword("reduced"):
            raise UnsupportedFeature("REDUCED")
        star = False
        sel: list[str] = []
        if self.at_punct("*"):
            self.next()
            star = True
        else:
            while self.peek().kind == "var":
                sel.append(self.next().text[1:])
            if self.at_punct("("):
                raise UnsupportedFeature("SELECT expressions")
            if not sel:
                t = self.peek()
                raise ParseError("empty SELECT clause", t.pos)
        from_iris, from_named = self.dataset_clauses()
        if self.at_keyword("where"):
            self.next()
        pattern = self.group()
        order, limit, offset = self.solution_modifiers()
        # deduplicate projection, keeping first occurrence
        seen: list[str] = []
        for v in sel:
            if v not in seen:
                seen.append(v)
        return QueryAst(
            form="select", pattern=pattern, select_vars=tuple(seen), star=star,
            distinct=distinct, from_iris=from_iris, from_named=from_named,
            order_by=order, limit=limit, offset=offset,
        )

    def ask_query(self) -> QueryAst:
        self.take_keyword("ask")
        from_iris, from_named = self.dataset_clauses()
        if self.at_keyword("where"):
            self.next()
        pattern = self.group()
        if self.at_keyword("order") or self.at_keyword("limit") or self.at_keyword("offset"):
            raise UnsupportedFeature("solution modifiers on ASK")
        return QueryAst(form="ask", pattern=pattern,
                        from_iris=from_iris, from_named=from_named)

    def dataset_clauses(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        from_iris: list[str] = []
        from_named: list[str] = []
        while self.at_keyword("from"):
            self.next()
            if self.at_keyword("named"):
                self.next()
                from_named.append(self.iri_value())
            else:
                from_iris.append(self.iri_value())
        return tuple(from_iris), tuple(from_named)

    def solution_modifiers(self):
        order: list[tuple[str, bool]] = []
        limit = offset = None
        if self.at_keyword("order"):
            self.next()
            self.take_keyword("by")
            while True:
                if self.peek().kind == "var":
                    order.append((self.next().text[1:], True))
                elif self.at_keyword("asc") or self.at_keyword("desc"):
                    asc = self.next().text.lower() == "asc"
                    self.take_punct("(")
                    t = self.next()
                    if t.kind != "var":
                        raise UnsupportedFeature("ORDER BY expression")
                    self.take_punct(")")
                    order.append((t.text[1:], asc))
                else:
                    break
            if not order:
                t = self.peek()
                raise ParseError("empty ORDER BY", t.pos)
        for _ in range(2):
            if self.at_keyword("limit"):
                self.next()
                limit = self.integer()
            if self.at_keyword("offset"):
                self.next()
                offset = self.integer()
        return tuple(order), limit, offset

    def integer(self) -> int:
        t = self.next()
        if t.kind != "number" or not re.fullmatch(r"\d+", t.text):
            raise ParseError("expected a non-negative integer", t.pos)
        return int(t.text)

    # --- terms ---

    def iri_value(self) -> str:
        t = self.next()
        if t.kind == "iriref":
            return _unescape_string('"' + t.text[1:-1] + '"', t.pos) if "\\" in t.text else t.text[1:-1]
        if t.kind == "pname":
            return self.expand_pname(t)
        raise ParseError(f"expected IRI, found {t.text!r}", t.pos)

    def expand_pname(self, t: _Tok) -> str:
        pfx, _, local = t.text.partition(":")
        if pfx not in self.prefixes:
            raise ParseError(f"undeclared prefix {pfx!r}", t.pos)
        return self.prefixes[pfx] + local

    def term_or_var(self) -> PTerm:
        t = self.peek()
        if t.kind == "var":
            self.next()
            return VarRef(t.text[1:])
        if t.kind in ("iriref", "pname"):
            return iri(self.iri_value())
        if t.kind == "blank" or (t.kind == "punct" and t.text == "["):
            raise UnsupportedFeature("blank nodes in query patterns")
        if t.kind == "string":
            return self.literal_term()
        if t.kind == "number":
            self.next()
            return _number_literal(t.text)
        if t.kind == "ident" and t.text.lower() in ("true", "false"):
            self.next()
            return literal(t.text.lower(), datatype=XSD + "boolean")
        raise ParseError(f"expected term or variable, found {t.text!r}", t.pos)

    def literal_term(self) -> Term:
        t = self.next()
        value = _unescape_string(t.text, t.pos)
        nxt = self.peek()
        if nxt.kind == "langtag":
            self.next()
            return literal(value, lang=nxt.text[1:])
        if nxt.kind == "punct" and nxt.text == "^^":
            self.next()
            dt = self.iri_value()
            if dt == _XSD_STRING:
                return literal(value)
            return literal(value, datatype=dt)
        return literal(value)

    # --- group graph patterns ---

    def group(self) -> Pattern:
        pattern, constraint = self.group_raw()
        if constraint is not None:
            return Filter(pattern, constraint)
        return pattern

    def group_raw(self) -> tuple[Pattern, filters.Constraint | None]:
        """Parse { ... }; returns the joined pattern and the (un-applied)
        conjunction of the group's top-level FILTERs."""
        self.take_punct("{")
        acc: Pattern = Empty()
        constraints: list[filters.Constraint] = []

        def join(right: Pattern) -> None:
            nonlocal acc
            acc = right if isinstance(acc, Empty) else Join(acc, right)

        while not self.at_punct("}"):
            self.check_supported()
            t = self.peek()
            if self.at_keyword("optional"):
                self.next()
                inner, inner_c = self.group_raw()
                if inner_c is not None:
                    acc = OptionalFilter(acc, inner, inner_c)
                else:
                    acc = Optional_(acc, inner)
            elif self.at_keyword("minus"):
                self.next()
                acc = Minus(acc, self.group())
            elif self.at_keyword("graph"):
                self.next()
                name = self.term_or_var()
                if isinstance(name, Term) and name.kind != "iri":
                    raise ParseError("GRAPH name must be an IRI or variable", t.pos)
                join(GraphPat(name, self.group()))
            elif self.at_keyword("filter"):
                self.next()
                constraints.append(self.filter_constraint())
            elif self.at_punct("{"):
                join(self.group_or_union())
            elif t.kind == "ident" and t.text.lower() == "select":
                raise UnsupportedFeature("sub-queries")
            else:
                for tp in self.triples_block():
                    join(tp)
            if self.at_punct("."):
                self.next()
        self.take_punct("}")
        combined = None
        for c in constraints:
            combined = c if combined is None else filters.And(combined, c)
        return acc, combined

    def group_or_union(self) -> Pattern:
        left = self.group()
        while self.at_keyword("union"):
            self.next()
            if not self.at_punct("{"):
                t = self.peek()
                raise ParseError("expected group after UNION", t.pos)
            left = Union_(left, self.group())
        return left

    def triples_block(self) -> list[Pattern]:
        out: list[Pattern] = []
        subject = self.term_or_var()
        if isinstance(subject, Term) and subject.kind == "literal":
            # tolerated by the grammar; can never match data
            pass
        while True:
            verb = self.verb()
            while True:
                obj = self.term_or_var()
                if isinstance(verb, VarRef):
                    out.append(TP(subject, verb, obj))
                elif isinstance(verb, Link):
                    out.append(TP(subject, verb.target, obj))
                else:
                    out.append(PathPat(subject, verb, obj))
                if self.at_punct(","):
                    self.next()
                    continue
                break
            if self.at_punct(";"):
                self.next()
                if self.at_punct(".") or self.at_punct("}") or self.at_punct(";"):
                    break
                continue
            break
        return out

    # --- property paths ---

    def verb(self) -> VarRef | PathExpr:
        t = self.peek()
        if t.kind == "var":
            self.next()
            return VarRef(t.text[1:])
        return self.path_alternative()

    def path_alternative(self) -> PathExpr:
        left = self.path_sequence()
        while self.at_punct("|"):
            self.next()
            left = Alt(left, self.path_sequence())
        return left

    def path_sequence(self) -> PathExpr:
        left = self.path_elt_or_inverse()
        while self.at_punct("/"):
            self.next()
            left = Seq(left, self.path_elt_or_inverse())
        return left

    def path_elt_or_inverse(self) -> PathExpr:
        if self.at_punct("^"):
            self.next()
            return Inv(self.path_elt())
        return self.path_elt()

    def path_elt(self) -> PathExpr:
        prim = self.path_primary()
        t = self.peek()
        if t.kind == "punct" and t.text in ("?", "*", "+"):
            self.next()
            return {"?": ZeroOrOne, "*": ZeroOrMore, "+": OneOrMore}[t.text](prim)
        if self.at_punct("{"):
            return self.path_repetition(prim, t.pos)
        return prim

    def path_repetition(self, prim: PathExpr, pos: int) -> PathExpr:
        """Desugar p{n}, p{n,} and p{0,n} before translation."""
        self.take_punct("{")
        lo = self.integer()
        hi: int | None | str = "exact"
        if self.at_punct(","):
            self.next()
            hi = None if self.at_punct("}") else self.integer()
        self.take_punct("}")

        def chain(n: int, factory) -> PathExpr:
            e = factory()
            for _ in range(n - 1):
                e = Seq(e, factory())
            return e

        if hi == "exact":
            if lo < 1:
                raise ParseError("p{n} requires n >= 1", pos)
            return chain(lo, lambda: prim)
        if hi is None:
            if lo == 0:
                return ZeroOrMore(prim)
            if lo == 1:
                return OneOrMore(prim)
            return Seq(chain(lo - 1, lambda: prim), OneOrMore(prim))
        if lo != 0:
            raise UnsupportedFeature("p{n,m} with n > 0")
        if hi < 1:
            raise ParseError("p{0,n} requires n >= 1", pos)
        return chain(hi, lambda: ZeroOrOne(prim))

    def path_primary(self) -> PathExpr:
        t = self.peek()
        if t.kind == "ident" and t.text.lower() == "a":
            self.next()
            return Link(iri(RDF_TYPE))
        if t.kind in ("iriref", "pname"):
            return Link(iri(self.iri_value()))
        if self.at_punct("!"):
            self.next()
            return self.negated_set()
        if self.at_punct("("):
            self.next()
            inner = self.path_alternative()
            self.take_punct(")")
            return inner
        raise ParseError(f"expected property path, found {t.text!r}", t.pos)

    def negated_set(self) -> Negated:
        forward: list[Term] = []
        backward: list[Term] = []

        def one() -> None:
            if self.at_punct("^"):
                self.next()
                backward.append(iri(self.iri_value()))
            elif self.peek().kind == "ident" and self.peek().text.lower() == "a":
                self.next()
                forward.append(iri(RDF_TYPE))
            else:
                forward.append(iri(self.iri_value()))

        if self.at_punct("("):
            self.next()
            one()
            while self.at_punct("|"):
                self.next()
                one()
            self.take_punct(")")
        else:
            one()
        return Negated(tuple(forward), tuple(backward))

    # --- filter constraints ---

    def filter_constraint(self) -> filters.Constraint:
        if self.at_punct("("):
            self.next()
            c = self.expr_or()
            self.take_punct(")")
            return c
        return self.builtin_call()

    def expr_or(self) -> filters.Constraint:
        left = self.expr_and()
        while self.at_punct("||"):
            self.next()
            left = filters.Or(left, self.expr_and())
        return left

    def expr_and(self) -> filters.Constraint:
        left = self.expr_unary()
        while self.at_punct("&&"):
            self.next()
            left = filters.And(left, self.expr_unary())
        return left

    def expr_unary(self) -> filters.Constraint:
        if self.at_punct("!"):
            self.next()
            return filters.Not(self.expr_unary())
        if self.at_punct("("):
            self.next()
            c = self.expr_or()
            self.take_punct(")")
            return c
        t = self.peek()
        if t.kind == "ident" and t.text.lower() in (
            "regex", "bound", "isiri", "isuri", "isblank", "isliteral", "isnumeric",
        ):
            return self.builtin_call()
        return self.relational()

    def relational(self) -> filters.Constraint:
        lhs = self.operand()
        t = self.peek()
        if t.kind == "punct" and t.text in filters.COMPARISON_OPS:
            self.next()
            rhs = self.operand()
            return filters.Comparison(t.text, lhs, rhs)
        if t.kind == "ident" and t.text.lower() in ("in",):
            raise UnsupportedFeature("IN expressions")
        raise UnsupportedFeature("bare expressions in FILTER")

    def operand(self) -> filters.Operand:
        t = self.peek()
        if t.kind == "var":
            self.next()
            return t.text[1:]
        term = self.term_or_var()
        if isinstance(term, VarRef):
            return term.name
        return term

    def builtin_call(self) -> filters.Constraint:
        t = self.next()
        name = t.text.lower()
        self.take_punct("(")
        if name == "bound":
            v = self.variable()
            self.take_punct(")")
            return filters.Bound(v)
        if name in ("isiri", "isuri", "isblank", "isliteral", "isnumeric"):
            v = self.variable()
            self.take_punct(")")
            test = {"isiri": "isIri", "isuri": "isIri", "isblank": "isBlank",
                    "isliteral": "isLiteral", "isnumeric": "isNumeric"}[name]
            return filters.TypeTest(test, v)
        if name == "regex":
            v = self.variable()
            self.take_punct(",")
            pat = self.string_value()
            flags = ""
            if self.at_punct(","):
                self.next()
                flags = self.string_value()
                if flags not in ("", "i"):
                    raise UnsupportedFeature(f"regex flags {flags!r}")
            self.take_punct(")")
            return filters.Regex(v, pat, flags)
        raise UnsupportedFeature(t.text)

    def variable(self) -> str:
        t = self.next()
        if t.kind != "var":
            raise ParseError(f"expected variable, found {t.text!r}", t.pos)
        return t.text[1:]

    def string_value(self) -> str:
        t = self.next()
        if t.kind != "string":
            raise ParseError(f"expected string, found {t.text!r}", t.pos)
        return _unescape_string(t.text, t.pos)


def _number_literal(text: str) -> Term:
    if re.fullmatch(r"[+-]?\d+", text):
        return literal(text, datatype=XSD + "integer")
    if re.search(r"[eE]", text):
        return literal(text, datatype=XSD + "double")
    return literal(text, datatype=XSD + "decimal")


def parse_query(text: str) -> QueryAst:
    """Parse SPARQL text into an indexed algebra tree."""
    ast = _Parser(text).query()
    return index_patterns(ast)
