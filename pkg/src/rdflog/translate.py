"""Query translation: SPARQL algebra trees become Datalog rule sets.

Each pattern node with index i defines a predicate ans<i>(Id, vars..., D):
a leading tuple-ID column (bag mode only), the node's variables in
lexicographic order, and the active graph as last column.  Under bag
semantics every rule head gets a Skolem ID built from the rule tag and the
sorted positive-body variables, so each distinct derivation carries a
distinct ground ID; recursive closure rules instead pin the ID to the
constant [] because those path forms are defined with set semantics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from . import sparql
from .datalog import (
    Atom, Const, EMPTY_ID, Eq, FilterBI, Goal, Neq, Program, Rule, Sk, Var,
)
from .filters import Constraint, constraint_vars, rename_constraint
from .rdf import DEFAULT_GRAPH, Term, UNBOUND, iri, literal
from .sparql import (
    Alt, Empty, Filter, GraphPat, Inv, Join, Link, Minus, Negated, OneOrMore,
    Optional_, OptionalFilter, PathPat, QueryAst, Seq, TP, Union_, UnsupportedFeature,
    VarRef, ZeroOrMore, ZeroOrOne, pattern_vars,
)

TRUE = Const(literal("true"))
FALSE = Const(literal("false"))

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class SkolemGenerator:
    """Deterministic Skolem factory: same rule id and variable list always
    produce the identical term, distinct rule ids structurally distinct ones."""

    def make(self, rule_id: str, body_vars: list[str], label: str = "") -> Sk:
        args = tuple(Var(v) for v in sorted(set(body_vars)))
        if label:
            args += (Const(literal(label)),)
        return Sk(rule_id, args)


class _Names:
    """Maps SPARQL variables to Datalog variable names and hands out internal
    names guaranteed not to capture any query variable."""

    def __init__(self, query_vars: frozenset[str]):
        self.map: dict[str, str] = {}
        taken: set[str] = set()
        for v in sorted(query_vars):
            candidate = v if _IDENT.fullmatch(v) else "v_" + re.sub(r"[^A-Za-z0-9_]", "_", v)
            while candidate in taken:
                candidate += "_"
            self.map[v] = candidate
            taken.add(candidate)
        self._taken = taken
        self._internal: dict[str, str] = {}

    def var(self, sparql_name: str) -> str:
        return self.map[sparql_name]

    def internal(self, base: str) -> str:
        name = self._internal.get(base)
        if name is None:
            name = base
            while name in self._taken:
                name += "_"
            self._internal[base] = name
        return name


@dataclass
class TranslationContext:
    dst: bool  # True = set semantics (DISTINCT), False = bag semantics
    graph: Var | Const  # active graph: constant or GRAPH-bound variable
    names: _Names
    skolem_gen: SkolemGenerator = field(default_factory=SkolemGenerator)
    node_index: int = 1

    @property
    def bag(self) -> bool:
        return not self.dst


def _body_var_names(body: tuple[Atom, ...]) -> list[str]:
    out: set[str] = set()
    for atom in body:
        out |= atom.vars()
    return sorted(out)


def _rule(ctx: TranslationContext, pred: str, head_vars: list[Var | Const],
          body: list[Atom], *, neg: list[Atom] = (), builtins: list = (),
          tag: str | None = None, fixed_id: bool = False) -> Rule:
    """Assemble one answer rule, adding the ID column machinery in bag mode."""
    builtins = list(builtins)
    head_args: list = list(head_vars)
    if ctx.bag:
        id_var = Var(ctx.names.internal("Id"))
        head_args = [id_var] + head_args
        if fixed_id:
            builtins.append(Eq(id_var, Const(EMPTY_ID)))
        else:
            assert tag is not None
            builtins.append(Eq(id_var, ctx.skolem_gen.make(tag, _body_var_names(tuple(body)))))
    return Rule(Atom(pred, tuple(head_args)), tuple(body), tuple(neg), tuple(builtins))


def _child_atom(ctx: TranslationContext, index: int, args: list, graph, id_name: str) -> Atom:
    full = ([Var(ctx.names.internal(id_name))] if ctx.bag else []) + list(args) + [graph]
    return Atom(f"ans{index}", tuple(full))


def _graph_column(ctx: TranslationContext) -> tuple[Var, list[Atom], list]:
    """Graph column for base-case rules: a guarded D variable when the active
    graph is constant, the GRAPH-bound variable itself otherwise."""
    if isinstance(ctx.graph, Const):
        d = Var(ctx.names.internal("D"))
        return d, [], [Eq(d, ctx.graph)]
    return ctx.graph, [], []


def _term(ctx: TranslationContext, t) -> Var | Const:
    if isinstance(t, VarRef):
        return Var(ctx.names.var(t.name))
    return Const(t)


# ---------------------------------------------------------------------------
# Auxiliary predicates
# ---------------------------------------------------------------------------

def emit_auxiliaries(names: _Names | None = None) -> list[Rule]:
    """The compatibility and domain predicates every translated query uses."""
    names = names or _Names(frozenset())
    X, Y, P, D, Z = (Var(names.internal(n)) for n in ("X", "Y", "P", "D", "Z"))
    null = Atom("null", (Z,))
    term_x = Atom("term", (X,))
    return [
        Rule(Atom("null", (Const(UNBOUND),))),
        Rule(Atom("comp", (X, X, X)), (term_x,)),
        Rule(Atom("comp", (X, Z, X)), (term_x, null)),
        Rule(Atom("comp", (Z, X, X)), (term_x, null)),
        Rule(Atom("comp", (Z, Z, Z)), (null,)),
        Rule(term_x, (Atom("iri", (X,)),)),
        Rule(term_x, (Atom("literal", (X,)),)),
        Rule(term_x, (Atom("bnode", (X,)),)),
        Rule(Atom("subjectOrObject", (X,)), (Atom("triple", (X, P, Y, D)),)),
        Rule(Atom("subjectOrObject", (Y,)), (Atom("triple", (X, P, Y, D)),)),
        Rule(Atom("graphTerm", (X, D)), (Atom("triple", (X, P, Y, D)),)),
        Rule(Atom("graphTerm", (Y, D)), (Atom("triple", (X, P, Y, D)),)),
    ]


# ---------------------------------------------------------------------------
# Graph pattern translation
# ---------------------------------------------------------------------------

def translate_pattern(node, ctx: TranslationContext) -> list[Rule]:
    ctx = replace(ctx, node_index=node.index)
    i = node.index
    names = ctx.names

    if isinstance(node, Empty):
        g, extra, builtins = _graph_column(ctx)
        if isinstance(ctx.graph, Var):
            extra = [Atom("named", (g,))]
        return [_rule(ctx, f"ans{i}", [g], extra, builtins=builtins, tag=f"f{i}")]

    if isinstance(node, TP):
        g, extra, builtins = _graph_column(ctx)
        body = [Atom("triple", (_term(ctx, node.s), _term(ctx, node.p),
                                _term(ctx, node.o), g))] + extra
        head = [Var(names.var(v)) for v in sorted(pattern_vars(node))] + [g]
        return [_rule(ctx, f"ans{i}", head, body, builtins=builtins, tag=f"f{i}")]

    if isinstance(node, PathPat):
        d = Var(names.internal("D"))
        body = [_child_atom(ctx, node.path.index,
                            [_term(ctx, node.s), _term(ctx, node.o)], d, "Id1")]
        head = [Var(names.var(v)) for v in sorted(pattern_vars(node))] + [d]
        rules = [_rule(ctx, f"ans{i}", head, body, tag=f"f{i}")]
        rules += translate_path(node.path, ctx, _term(ctx, node.s), _term(ctx, node.o))
        return rules

    if isinstance(node, (Join, Optional_, OptionalFilter)):
        return _translate_join_like(node, ctx)

    if isinstance(node, Union_):
        return _translate_union(node, ctx)

    if isinstance(node, Filter):
        return _translate_filter(node, ctx)

    if isinstance(node, Minus):
        return _translate_minus(node, ctx)

    if isinstance(node, GraphPat):
        return _translate_graph(node, ctx)

    raise TypeError(f"not a pattern node: {node!r}")


def _null_atoms(ctx: TranslationContext, sparql_vars) -> list[Atom]:
    return [Atom("null", (Var(ctx.names.var(v)),)) for v in sparql_vars]


def _constraint_atoms(ctx: TranslationContext, c: Constraint, in_scope: set[str]) -> list[Atom]:
    """null-bind filter variables that no pattern can supply."""
    return _null_atoms(ctx, sorted(constraint_vars(c) - in_scope))


def _mapped_constraint(ctx: TranslationContext, c: Constraint) -> Constraint:
    return rename_constraint(c, ctx.names.map)


def _translate_join_like(node, ctx: TranslationContext) -> list[Rule]:
    i = node.index
    names = ctx.names
    lv = sorted(pattern_vars(node.left))
    rv = sorted(pattern_vars(node.right))
    shared = sorted(set(lv) & set(rv))
    allv = sorted(set(lv) | set(rv))
    d = Var(names.internal("D"))
    v1 = {x: names.internal(f"v1_{i}_{names.var(x)}") for x in shared}
    v2 = {x: names.internal(f"v2_{i}_{names.var(x)}") for x in shared}

    def left_atom(renamed: bool) -> Atom:
        args = [Var(v1[x]) if renamed and x in v1 else Var(names.var(x)) for x in lv]
        return _child_atom(ctx, 2 * i, args, d, "Id1")

    def right_atom() -> Atom:
        args = [Var(v2[x]) if x in v2 else Var(names.var(x)) for x in rv]
        return _child_atom(ctx, 2 * i + 1, args, d, "Id2")

    join_comps = [Atom("comp", (Var(v1[x]), Var(v2[x]), Var(names.var(x)))) for x in shared]
    head_all = [Var(names.var(v)) for v in allv] + [d]
    constraint = node.constraint if isinstance(node, OptionalFilter) else None
    extra_nulls = (
        _constraint_atoms(ctx, constraint, set(lv) | set(rv)) if constraint is not None else []
    )

    children = translate_pattern(node.left, ctx) + translate_pattern(node.right, ctx)
    if isinstance(node, Join):
        return [_rule(ctx, f"ans{i}", head_all,
                      [left_atom(True), right_atom()] + join_comps, tag=f"f{i}")] + children

    join_builtins = []
    if constraint is not None:
        join_builtins = [FilterBI(_mapped_constraint(ctx, constraint))]
    rule_join = _rule(ctx, f"ans{i}", head_all,
                      [left_atom(True), right_atom()] + join_comps + extra_nulls,
                      builtins=join_builtins, tag=f"f{i}a")

    # OPTIONAL / OPTIONAL-FILTER: join rule, null-padding rule, and the
    # ans_opt helper that collects extendable left mappings.
    zs = {x: names.internal(f"Z{k+1}") for k, x in enumerate(shared)}
    opt_comps = [Atom("comp", (Var(names.var(x)), Var(v2[x]), Var(zs[x]))) for x in shared]
    head_left = [Var(names.var(v)) for v in lv] + [d]
    opt_builtins = []
    if constraint is not None:
        shifted = rename_constraint(
            _mapped_constraint(ctx, constraint),
            {names.var(x): zs[x] for x in shared},
        )
        opt_builtins = [FilterBI(shifted)]
    rule_opt = Rule(
        Atom(f"ans_opt{i}", tuple(head_left)),
        tuple([left_atom(False), right_atom()] + opt_comps + extra_nulls),
        builtins=tuple(opt_builtins),
    )
    pad_nulls = _null_atoms(ctx, [y for y in rv if y not in set(lv)])
    rule_pad = _rule(
        ctx, f"ans{i}", head_all,
        [left_atom(False)] + pad_nulls,
        neg=[Atom(f"ans_opt{i}", tuple(head_left))],
        tag=f"f{i}b",
    )
    return [rule_join, rule_pad, rule_opt] + children


def _translate_union(node: Union_, ctx: TranslationContext) -> list[Rule]:
    i = node.index
    names = ctx.names
    lv = sorted(pattern_vars(node.left))
    rv = sorted(pattern_vars(node.right))
    allv = sorted(set(lv) | set(rv))
    d = Var(names.internal("D"))
    head = [Var(names.var(v)) for v in allv] + [d]
    rule1 = _rule(ctx, f"ans{i}", head,
                  [_child_atom(ctx, 2 * i, [Var(names.var(v)) for v in lv], d, "Id1")]
                  + _null_atoms(ctx, [x for x in rv if x not in set(lv)]),
                  tag=f"f{i}a")
    rule2 = _rule(ctx, f"ans{i}", head,
                  [_child_atom(ctx, 2 * i + 1, [Var(names.var(v)) for v in rv], d, "Id2")]
                  + _null_atoms(ctx, [y for y in lv if y not in set(rv)]),
                  tag=f"f{i}b")
    return [rule1, rule2] + translate_pattern(node.left, ctx) + translate_pattern(node.right, ctx)


def _translate_filter(node: Filter, ctx: TranslationContext) -> list[Rule]:
    i = node.index
    names = ctx.names
    cv = sorted(pattern_vars(node.child))
    d = Var(names.internal("D"))
    head = [Var(names.var(v)) for v in cv] + [d]
    body = [_child_atom(ctx, 2 * i, [Var(names.var(v)) for v in cv], d, "Id1")]
    body += _constraint_atoms(ctx, node.constraint, set(cv))
    return [_rule(ctx, f"ans{i}", head, body,
                  builtins=[FilterBI(_mapped_constraint(ctx, node.constraint))],
                  tag=f"f{i}")] + translate_pattern(node.child, ctx)


def _translate_minus(node: Minus, ctx: TranslationContext) -> list[Rule]:
    i = node.index
    names = ctx.names
    lv = sorted(pattern_vars(node.left))
    rv = sorted(pattern_vars(node.right))
    shared = sorted(set(lv) & set(rv))
    d = Var(names.internal("D"))
    v2 = {x: names.internal(f"v2_{i}_{names.var(x)}") for x in shared}
    zs = {x: names.internal(f"Z{k+1}") for k, x in enumerate(shared)}

    left_args = [Var(names.var(v)) for v in lv]
    right_args = [Var(v2[x]) if x in v2 else Var(names.var(x)) for x in rv]
    xbar_names = sorted({names.var(v) for v in lv} | {a.name for a in right_args})
    xbar = [Var(n) for n in xbar_names]

    comps = [Atom("comp", (Var(names.var(x)), Var(v2[x]), Var(zs[x]))) for x in shared]
    join_atom = Atom(f"ans_join{i}", tuple(xbar + [d]))
    rule_join = Rule(join_atom,
                     tuple([_child_atom(ctx, 2 * i, left_args, d, "Id1"),
                            _child_atom(ctx, 2 * i + 1, right_args, d, "Id2")] + comps))
    equal_head = Atom(f"ans_equal{i}", tuple(left_args + [d]))
    rules_equal = [
        Rule(equal_head, (join_atom,),
             neg=(Atom("null", (Var(names.var(x)),)),),
             builtins=(Eq(Var(names.var(x)), Var(v2[x])),))
        for x in shared
    ]
    rule_final = _rule(ctx, f"ans{i}", left_args + [d],
                       [_child_atom(ctx, 2 * i, left_args, d, "Id1")],
                       neg=[equal_head], tag=f"f{i}")
    return ([rule_join] + rules_equal + [rule_final]
            + translate_pattern(node.left, ctx) + translate_pattern(node.right, ctx))


def _translate_graph(node: GraphPat, ctx: TranslationContext) -> list[Rule]:
    i = node.index
    names = ctx.names
    gterm = _term(ctx, node.name)
    cv = sorted(pattern_vars(node.child))
    node_vars = sorted(pattern_vars(node))
    body = [_child_atom(ctx, 2 * i, [Var(names.var(v)) for v in cv], gterm, "Id1"),
            Atom("named", (gterm,))]
    builtins = []
    if isinstance(ctx.graph, Const):
        d = Var(names.internal("D"))
        builtins = [Eq(d, ctx.graph)]
    else:
        d = ctx.graph
        body.append(Atom("named", (d,)))
    head = [Var(names.var(v)) for v in node_vars] + [d]
    return [_rule(ctx, f"ans{i}", head, body, builtins=builtins, tag=f"f{i}")] + \
        translate_pattern(node.child, replace(ctx, graph=gterm))


# ---------------------------------------------------------------------------
# Property path translation
# ---------------------------------------------------------------------------

def _anchor_term(s, o) -> Const | None:
    """The constant endpoint that contributes a zero-length pair, if any."""
    s_const = isinstance(s, Const)
    o_const = isinstance(o, Const)
    if s_const and not o_const:
        return s
    if o_const and not s_const:
        return o
    if s_const and o_const and s == o:
        return s
    return None


def translate_path(expr, ctx: TranslationContext, s, o) -> list[Rule]:
    """Rules for one property-path expression; s and o are the top-level
    endpoints, threaded through every recursive call for the zero-length
    anchor rules of ? and * forms."""
    ctx = replace(ctx, node_index=expr.index)
    i = expr.index
    names = ctx.names
    X, Y, Z, P = (Var(names.internal(n)) for n in ("X", "Y", "Z", "P"))
    d = Var(names.internal("D"))

    if isinstance(expr, Link):
        g, extra, builtins = _graph_column(ctx)
        body = [Atom("triple", (X, Const(expr.target), Y, g))] + extra
        return [_rule(ctx, f"ans{i}", [X, Y, g], body, builtins=builtins, tag=f"f{i}")]

    if isinstance(expr, Inv):
        body = [_child_atom(ctx, expr.child.index, [Y, X], d, "Id1")]
        return [_rule(ctx, f"ans{i}", [X, Y, d], body, tag=f"f{i}")] + \
            translate_path(expr.child, ctx, s, o)

    if isinstance(expr, Alt):
        r1 = _rule(ctx, f"ans{i}", [X, Y, d],
                   [_child_atom(ctx, expr.left.index, [X, Y], d, "Id1")], tag=f"f{i}a")
        r2 = _rule(ctx, f"ans{i}", [X, Y, d],
                   [_child_atom(ctx, expr.right.index, [X, Y], d, "Id2")], tag=f"f{i}b")
        return [r1, r2] + translate_path(expr.left, ctx, s, o) + \
            translate_path(expr.right, ctx, s, o)

    if isinstance(expr, Seq):
        body = [_child_atom(ctx, expr.left.index, [X, Y], d, "Id1"),
                _child_atom(ctx, expr.right.index, [Y, Z], d, "Id2")]
        return [_rule(ctx, f"ans{i}", [X, Z, d], body, tag=f"f{i}")] + \
            translate_path(expr.left, ctx, s, o) + \
            translate_path(expr.right, ctx, s, o)

    if isinstance(expr, OneOrMore):
        step = _rule(ctx, f"ans{i}", [X, Y, d],
                     [_child_atom(ctx, expr.child.index, [X, Y], d, "Id1")],
                     fixed_id=True)
        closure = _rule(ctx, f"ans{i}", [X, Z, d],
                        [_child_atom(ctx, expr.child.index, [X, Y], d, "Id1"),
                         _child_atom(ctx, i, [Y, Z], d, "Id2")],
                        fixed_id=True)
        return [step, closure] + translate_path(expr.child, ctx, s, o)

    if isinstance(expr, (ZeroOrOne, ZeroOrMore)):
        rules = _zero_length_rules(ctx, i, X, s, o)
        rules.append(_rule(ctx, f"ans{i}", [X, Y, d],
                           [_child_atom(ctx, expr.child.index, [X, Y], d, "Id1")],
                           fixed_id=True))
        if isinstance(expr, ZeroOrMore):
            rules.append(_rule(ctx, f"ans{i}", [X, Z, d],
                               [_child_atom(ctx, expr.child.index, [X, Y], d, "Id1"),
                                _child_atom(ctx, i, [Y, Z], d, "Id2")],
                               fixed_id=True))
        return rules + translate_path(expr.child, ctx, s, o)

    if isinstance(expr, Negated):
        rules = []
        g, extra, builtins = _graph_column(ctx)
        if expr.forward:
            rules.append(_rule(
                ctx, f"ans{i}", [X, Y, g],
                [Atom("triple", (X, P, Y, g))] + extra,
                builtins=list(builtins) + [Neq(P, Const(p)) for p in expr.forward],
                tag=f"f{i}a"))
        if expr.backward:
            rules.append(_rule(
                ctx, f"ans{i}", [Y, X, g],
                [Atom("triple", (X, P, Y, g))] + extra,
                builtins=list(builtins) + [Neq(P, Const(p)) for p in expr.backward],
                tag=f"f{i}b"))
        return rules

    raise TypeError(f"not a path expression: {expr!r}")


def _zero_length_rules(ctx: TranslationContext, i: int, X: Var, s, o) -> list[Rule]:
    """Pairs (t, t) for every node of the active graph, plus the anchored
    constant endpoint when it is not such a node."""
    names = ctx.names
    rules = []
    g, extra, builtins = _graph_column(ctx)
    rules.append(_rule(ctx, f"ans{i}", [X, X, g],
                       [Atom("graphTerm", (X, g))] + extra,
                       builtins=builtins, fixed_id=True))
    t = _anchor_term(s, o)
    if t is not None:
        g2, extra2, builtins2 = _graph_column(ctx)
        body2 = list(extra2)
        if isinstance(ctx.graph, Var):
            body2.append(Atom("named", (g2,)))
        rules.append(_rule(ctx, f"ans{i}", [X, X, g2], body2,
                           neg=[Atom("graphTerm", (X, g2))],
                           builtins=list(builtins2) + [Eq(X, t)],
                           fixed_id=True))
    return rules


def _anchor_facts(node) -> set[Term]:
    """Constant endpoints of ?/* path patterns; they must be known to term/1
    so that joins over anchored zero-length pairs can go through comp."""
    out: set[Term] = set()

    def has_closure(expr) -> bool:
        if isinstance(expr, (ZeroOrOne, ZeroOrMore)):
            return True
        if isinstance(expr, (Inv, OneOrMore)):
            return has_closure(expr.child)
        if isinstance(expr, (Alt, Seq)):
            return has_closure(expr.left) or has_closure(expr.right)
        return False

    def walk(n) -> None:
        if isinstance(n, PathPat) and has_closure(n.path):
            for end in (n.s, n.o):
                if isinstance(end, Term):
                    out.add(end)
        for c in sparql._children(n):
            walk(c)

    walk(node)
    return out


# ---------------------------------------------------------------------------
# Query forms
# ---------------------------------------------------------------------------

def translate_query(ast: QueryAst) -> Program:
    """Full translation: auxiliaries + pattern rules + query-form rules."""
    if ast.pattern.index == 0:
        ast = sparql.index_patterns(ast)
    names = _Names(sparql.all_query_vars(ast))
    dst = ast.distinct if ast.form == "select" else True
    ctx = TranslationContext(dst=dst, graph=Const(iri(DEFAULT_GRAPH)), names=names)

    pattern_rules = translate_pattern(ast.pattern, ctx)
    pv = sorted(pattern_vars(ast.pattern))
    d = Var(names.internal("D"))
    child = _child_atom(ctx, 1, [Var(names.var(v)) for v in pv], d, "Id1")

    if ast.form == "select":
        projection = ast.projection()
        goal_vars = sorted(set(projection))
        nulls = _null_atoms(ctx, [v for v in goal_vars if v not in set(pv)])
        form_rules = [_rule(ctx, "ans",
                            [Var(names.var(v)) for v in goal_vars] + [d],
                            [child] + nulls, tag="f")]
        goal = Goal("ans", (1 if ctx.bag else 0) + len(goal_vars) + 1,
                    tuple(goal_vars), has_id=ctx.bag, has_graph=True)
    else:
        h = Var(names.internal("HasResult"))
        form_rules = [
            Rule(Atom("ans", (h,)), (Atom("ans_ask", (h,)),)),
            Rule(Atom("ans", (h,)), neg=(Atom("ans_ask", (TRUE,)),),
                 builtins=(Eq(h, FALSE),)),
            Rule(Atom("ans_ask", (h,)), (child,), builtins=(Eq(h, TRUE),)),
        ]
        goal = Goal("ans", 1, (), has_id=False, has_graph=False)

    term_facts = [Rule(Atom("term", (Const(t),)))
                  for t in sorted(_anchor_facts(ast.pattern), key=repr)]
    pattern_rules.sort(key=_node_of_rule)
    rules = form_rules + pattern_rules + emit_auxiliaries(names) + term_facts
    return Program(tuple(rules), goal)


_NODE_NUM = re.compile(r"(\d+)$")


def _node_of_rule(rule: Rule) -> int:
    m = _NODE_NUM.search(rule.head.pred)
    return int(m.group(1)) if m else 0
