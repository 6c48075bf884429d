"""Datalog IR with Skolem tuple IDs, stratification, wardedness analysis,
the bag-via-ID transform, and a stratified semi-naive evaluator.

Atom arguments are constants (RDF terms or the empty-list ID), variables, or
Skolem applications.  Ground Skolem values are plain Python tuples
(tag, arg_values...); the empty tuple () doubles as the reserved constant
ID "[]" that collapses duplicate derivations of recursive rules.

Rule heads never contain Skolem terms directly: the canonical form binds a
head variable through an equality builtin (Id = ["tag", vars...]), which is
also how programs are rendered.  The static analyses resolve such bindings.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

from . import filters
from .rdf import Term, UNBOUND, iri, literal, blank

EMPTY_ID: tuple = ()

GroundValue = Union[Term, tuple]  # tuple = ground Skolem value or EMPTY_ID


class EngineError(Exception):
    pass


class NotStratifiable(EngineError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = tuple(cycle)
        super().__init__("negation cycle through: " + " -> ".join(self.cycle))


class UnsafeRule(EngineError):
    pass


class ResourceLimit(EngineError):
    pass


# ---------------------------------------------------------------------------
# Terms, atoms, rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Const:
    value: GroundValue

    def __repr__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True, slots=True)
class Sk:
    """Skolem application; evaluates to the tuple (tag, *arg_values)."""

    tag: str
    args: tuple = ()

    def __repr__(self) -> str:
        return f'["{self.tag}"' + "".join(f", {a!r}" for a in self.args) + "]"


DTerm = Union[Var, Const, Sk]


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple = ()

    def __repr__(self) -> str:
        return f"{self.pred}({', '.join(map(repr, self.args))})"

    def vars(self) -> set[str]:
        out = set()
        for a in self.args:
            if isinstance(a, Var):
                out.add(a.name)
            elif isinstance(a, Sk):
                out.update(v.name for v in a.args if isinstance(v, Var))
        return out


@dataclass(frozen=True, slots=True)
class Eq:
    """Unifying equality: binds whichever side is still free (term equality)."""

    lhs: DTerm
    rhs: DTerm


@dataclass(frozen=True, slots=True)
class Neq:
    lhs: DTerm
    rhs: DTerm


@dataclass(frozen=True, slots=True)
class FilterBI:
    """A copied SPARQL filter constraint, evaluated once its variables are bound."""

    constraint: filters.Constraint


Builtin = Union[Eq, Neq, FilterBI]


def _dterm_vars(t: DTerm) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Sk):
        return {v.name for v in t.args if isinstance(v, Var)}
    return set()


def builtin_vars(b: Builtin) -> set[str]:
    if isinstance(b, (Eq, Neq)):
        return _dterm_vars(b.lhs) | _dterm_vars(b.rhs)
    return filters.constraint_vars(b.constraint)


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...] = ()
    neg: tuple[Atom, ...] = ()
    builtins: tuple[Builtin, ...] = ()

    def is_fact(self) -> bool:
        return not self.body and not self.neg and not self.builtins and all(
            isinstance(a, Const) for a in self.head.args
        )

    def head_binding(self, var: str) -> DTerm | None:
        """The builtin-assigned value of a head variable, if any."""
        for b in self.builtins:
            if isinstance(b, Eq) and isinstance(b.lhs, Var) and b.lhs.name == var:
                return b.rhs
            if isinstance(b, Eq) and isinstance(b.rhs, Var) and b.rhs.name == var:
                return b.lhs
        return None


@dataclass(frozen=True)
class Goal:
    pred: str
    arity: int
    variables: tuple[str, ...]  # answer columns in predicate order
    has_id: bool
    has_graph: bool


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...] = ()
    goal: Goal | None = None

    def predicates(self) -> set[str]:
        preds = set()
        for r in self.rules:
            preds.add(r.head.pred)
            preds.update(a.pred for a in r.body)
            preds.update(a.pred for a in r.neg)
        return preds

    def idb(self) -> set[str]:
        return {r.head.pred for r in self.rules}


def check_arities(program: Program, facts: Iterable[Atom] = ()) -> None:
    seen: dict[str, int] = {}

    def note(atom: Atom) -> None:
        n = seen.setdefault(atom.pred, len(atom.args))
        if n != len(atom.args):
            raise EngineError(
                f"inconsistent arity for {atom.pred}: {n} vs {len(atom.args)}"
            )

    for r in program.rules:
        note(r.head)
        for a in itertools.chain(r.body, r.neg):
            note(a)
    for a in facts:
        note(a)


def check_safety(rule: Rule) -> None:
    """Every head/negated/builtin variable must be derivable from positive
    atoms or from equality builtins rooted in them."""
    bound = set()
    for a in rule.body:
        bound |= a.vars()
    changed = True
    while changed:
        changed = False
        for b in rule.builtins:
            if not isinstance(b, Eq):
                continue
            lv, rv = _dterm_vars(b.lhs), _dterm_vars(b.rhs)
            if rv <= bound and not lv <= bound:
                bound |= lv
                changed = True
            if lv <= bound and not rv <= bound:
                bound |= rv
                changed = True
    need = set(rule.head.vars())
    for a in rule.neg:
        need |= a.vars()
    for b in rule.builtins:
        if isinstance(b, (Neq, FilterBI)):
            need |= builtin_vars(b)
    missing = need - bound
    if missing:
        raise UnsafeRule(f"unbound variables {sorted(missing)} in rule {rule.head!r}")


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------

def stratify(program: Program) -> list[frozenset[str]]:
    """Partition predicates into strata so negation only refers downward.

    Raises NotStratifiable when negation occurs inside a dependency cycle.
    """
    preds = sorted(program.predicates())
    pos_edges: dict[str, set[str]] = {p: set() for p in preds}  # body -> head
    neg_edges: dict[str, set[str]] = {p: set() for p in preds}
    for r in program.rules:
        for a in r.body:
            pos_edges[a.pred].add(r.head.pred)
        for a in r.neg:
            neg_edges[a.pred].add(r.head.pred)

    stratum = {p: 0 for p in preds}
    changed = True
    while changed:
        changed = False
        for r in program.rules:
            h = r.head.pred
            for a in r.body:
                if stratum[h] < stratum[a.pred]:
                    stratum[h] = stratum[a.pred]
                    changed = True
            for a in r.neg:
                if stratum[h] < stratum[a.pred] + 1:
                    stratum[h] = stratum[a.pred] + 1
                    changed = True
        if any(s > len(preds) for s in stratum.values()):
            # a stratum exceeded the predicate count: negation sits on a cycle
            raise NotStratifiable(_negation_cycle(pos_edges, neg_edges))

    out: dict[int, set[str]] = {}
    for p, s in stratum.items():
        out.setdefault(s, set()).add(p)
    return [frozenset(out[s]) for s in sorted(out)]


def _negation_cycle(pos_edges, neg_edges) -> list[str]:
    # find some cycle that uses a negative edge, for the error message
    all_edges = {p: set(pos_edges.get(p, ())) | set(neg_edges.get(p, ())) for p in pos_edges}
    for src, heads in neg_edges.items():
        for h in heads:
            # path h ->* src closes the loop through the negative edge src -> h
            path = _find_path(all_edges, h, src)
            if path is not None:
                return path + [h]
    return ["<unknown>"]


def _find_path(edges, start, end) -> list[str] | None:
    stack = [(start, [start])]
    seen = set()
    while stack:
        node, path = stack.pop()
        if node == end:
            return path
        if node in seen:
            continue
        seen.add(node)
        for nxt in edges.get(node, ()):
            stack.append((nxt, path + [nxt]))
    return None


# ---------------------------------------------------------------------------
# Wardedness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WardednessReport:
    affected_positions: frozenset[tuple[str, int]]
    dangerous_vars: Mapping[int, frozenset[str]]  # rule index -> variables
    is_warded: bool
    witness: Rule | None


def _head_terms(rule: Rule) -> list[DTerm]:
    """Head arguments with builtin-bound variables resolved to their values."""
    out = []
    for a in rule.head.args:
        if isinstance(a, Var):
            bound = rule.head_binding(a.name)
            if isinstance(bound, (Sk, Const)):
                out.append(bound)
                continue
        out.append(a)
    return out


def check_warded(program: Program) -> WardednessReport:
    affected: set[tuple[str, int]] = set()

    def body_positions(rule: Rule, var: str) -> list[tuple[str, int]]:
        pos = []
        for a in rule.body:
            for i, t in enumerate(a.args):
                if isinstance(t, Var) and t.name == var:
                    pos.append((a.pred, i))
        return pos

    # fixpoint over affected positions
    changed = True
    while changed:
        changed = False
        for rule in program.rules:
            for i, t in enumerate(_head_terms(rule)):
                key = (rule.head.pred, i)
                if key in affected:
                    continue
                if isinstance(t, Sk):
                    affected.add(key)
                    changed = True
                elif isinstance(t, Var):
                    pos = body_positions(rule, t.name)
                    if pos and all(p in affected for p in pos):
                        affected.add(key)
                        changed = True

    dangerous: dict[int, frozenset[str]] = {}
    warded = True
    witness = None
    for idx, rule in enumerate(program.rules):
        dang = set()
        head_vars = {t.name for t in _head_terms(rule) if isinstance(t, Var)}
        for v in head_vars:
            pos = body_positions(rule, v)
            if pos and all(p in affected for p in pos):
                dang.add(v)
        dangerous[idx] = frozenset(dang)
        if not dang:
            continue
        # all dangerous variables must sit inside one ward atom
        wards = [a for a in rule.body if dang <= a.vars()]
        ok = False
        for ward in wards:
            shared = set()
            for other in rule.body:
                if other is ward:
                    continue
                shared |= ward.vars() & other.vars()
            if all(
                any(p not in affected for p in body_positions(rule, v))
                for v in shared
            ):
                ok = True
                break
        if not ok:
            warded = False
            if witness is None:
                witness = rule
    return WardednessReport(frozenset(affected), dangerous, warded, witness)


# ---------------------------------------------------------------------------
# Bag semantics via tuple IDs
# ---------------------------------------------------------------------------

def bagify(program: Program) -> Program:
    """Give every predicate a leading tuple-ID column.

    Each rule head receives a Skolem ID over the fresh ID variables of its
    positive body atoms, so one ground ID exists per derivation; negated
    atoms are replaced by ID-free auxiliary projections to keep negation safe.
    """
    for rule in program.rules:
        for i, t in enumerate(_head_terms(rule)):
            if isinstance(t, Sk):
                raise EngineError("bagify input must not already use Skolem heads")

    aux_rules: list[Rule] = []
    out: list[Rule] = []
    for idx, rule in enumerate(program.rules):
        used = rule.head.vars()
        for a in itertools.chain(rule.body, rule.neg):
            used |= a.vars()

        def fresh(base: str, taken: set[str]) -> str:
            name = base
            n = 1
            while name in taken:
                n += 1
                name = f"{base}{n}"
            taken.add(name)
            return name

        taken = set(used)
        id_vars = []
        new_body = []
        for a in rule.body:
            z = Var(fresh("Z", taken))
            id_vars.append(z)
            new_body.append(Atom(a.pred, (z,) + a.args))
        new_neg = []
        for j, a in enumerate(rule.neg):
            aux_pred = f"aux_{idx}_{j}_{a.pred}"
            zn = Var("Z0")
            arg_vars = tuple(Var(f"A{i}") for i in range(len(a.args)))
            aux_rules.append(
                Rule(
                    head=Atom(aux_pred, arg_vars),
                    body=(Atom(a.pred, (zn,) + arg_vars),),
                )
            )
            new_neg.append(Atom(aux_pred, a.args))
        head_id = Var(fresh("Z0", taken))
        sk = Sk(f"r{idx}", tuple(id_vars))
        new_head = Atom(rule.head.pred, (head_id,) + rule.head.args)
        out.append(
            Rule(
                head=new_head,
                body=tuple(new_body),
                neg=tuple(new_neg),
                builtins=rule.builtins + (Eq(head_id, sk),),
            )
        )
    goal = None
    if program.goal is not None:
        g = program.goal
        goal = Goal(g.pred, g.arity + 1, g.variables, True, g.has_graph)
    return Program(tuple(out) + tuple(aux_rules), goal)


def audit_id_recursion(program: Program) -> list[Rule]:
    """Rules on a positive-dependency cycle whose head carries a fresh Skolem
    ID; such rules would generate unboundedly many IDs under fixpoint."""
    sccs = _positive_sccs(program)
    comp = {}
    for i, scc in enumerate(sccs):
        for p in scc:
            comp[p] = i
    offenders = []
    for rule in program.rules:
        h = comp[rule.head.pred]
        recursive = any(
            a.pred == rule.head.pred or (comp[a.pred] == h and len(sccs[h]) > 1)
            for a in rule.body
        )
        if recursive and any(isinstance(t, Sk) for t in _head_terms(rule)):
            offenders.append(rule)
    return offenders


def _positive_sccs(program: Program) -> list[set[str]]:
    edges: dict[str, set[str]] = {}
    for r in program.rules:
        edges.setdefault(r.head.pred, set())
        for a in r.body:
            edges.setdefault(a.pred, set()).add(r.head.pred)
    # iterative Tarjan
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    onstack: set[str] = set()
    stack: list[str] = []
    sccs: list[set[str]] = []
    counter = itertools.count()

    for root in sorted(edges):
        if root in index:
            continue
        work = [(root, iter(sorted(edges.get(root, ()))))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        onstack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = next(counter)
                    stack.append(nxt)
                    onstack.add(nxt)
                    work.append((nxt, iter(sorted(edges.get(nxt, ())))))
                    advanced = True
                    break
                if nxt in onstack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                scc = set()
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    scc.add(w)
                    if w == node:
                        break
                sccs.append(scc)
    return sccs


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

class DerivedFacts:
    """Ground atoms per predicate, as produced by evaluate()."""

    def __init__(self, relations: dict[str, set[tuple]]):
        self.relations = relations

    def tuples(self, pred: str) -> frozenset[tuple]:
        return frozenset(self.relations.get(pred, ()))

    def atoms(self) -> Iterator[tuple[str, tuple]]:
        for pred in sorted(self.relations):
            for tup in self.relations[pred]:
                yield pred, tup

    def __len__(self) -> int:
        return sum(len(v) for v in self.relations.values())

    def contains(self, pred: str, values: tuple) -> bool:
        return values in self.relations.get(pred, ())


DEFAULT_DERIVATION_CAP = 10_000_000


def evaluate(
    program: Program,
    facts: Iterable[Atom] = (),
    *,
    max_derivations: int = DEFAULT_DERIVATION_CAP,
    check_id_recursion: bool = True,
    seminaive: bool = True,
) -> DerivedFacts:
    """Stratified least-fixpoint evaluation under set semantics.

    check_id_recursion rejects programs whose recursive rules generate fresh
    Skolem IDs (they cannot reach a fixpoint on cyclic data); pass False for
    programs whose data is known to admit finitely many derivations.
    """
    facts = tuple(facts)
    check_arities(program, facts)
    for rule in program.rules:
        check_safety(rule)
    if check_id_recursion:
        offenders = audit_id_recursion(program)
        if offenders:
            raise EngineError(
                f"recursive rule generates fresh IDs: {offenders[0].head!r}"
            )
    strata = stratify(program)

    relations: dict[str, set[tuple]] = {}
    size = 0
    for atom in facts:
        values = []
        for t in atom.args:
            if not isinstance(t, Const):
                raise EngineError(f"non-ground fact: {atom!r}")
            values.append(t.value)
        rel = relations.setdefault(atom.pred, set())
        if tuple(values) not in rel:
            rel.add(tuple(values))
            size += 1

    budget = _Budget(max_derivations, size)
    for stratum in strata:
        rules = [r for r in program.rules if r.head.pred in stratum]
        if not rules:
            continue
        if seminaive:
            _eval_stratum_seminaive(rules, stratum, relations, budget)
        else:
            _eval_stratum_naive(rules, relations, budget)
    return DerivedFacts(relations)


class _Budget:
    def __init__(self, cap: int, start: int = 0):
        self.cap = cap
        self.count = start

    def spend(self, n: int = 1) -> None:
        self.count += n
        if self.count > self.cap:
            raise ResourceLimit(f"derivation cap of {self.cap} ground atoms exceeded")


def _eval_stratum_naive(rules, relations, budget) -> None:
    while True:
        new = []
        for rule in rules:
            for tup in _fire(rule, relations, None, None):
                if tup not in relations.get(rule.head.pred, ()):
                    new.append((rule.head.pred, tup))
        added = False
        for pred, tup in new:
            rel = relations.setdefault(pred, set())
            if tup not in rel:
                rel.add(tup)
                budget.spend()
                added = True
        if not added:
            return


def _eval_stratum_seminaive(rules, stratum, relations, budget) -> None:
    delta: dict[str, set[tuple]] = {}
    for rule in rules:
        derived = list(_fire(rule, relations, None, None))
        rel = relations.setdefault(rule.head.pred, set())
        for tup in derived:
            if tup not in rel:
                rel.add(tup)
                budget.spend()
                delta.setdefault(rule.head.pred, set()).add(tup)
    recursive = [
        (rule, [i for i, a in enumerate(rule.body) if a.pred in stratum])
        for rule in rules
    ]
    while delta:
        new_delta: dict[str, set[tuple]] = {}
        for rule, rec_positions in recursive:
            for pos in rec_positions:
                if rule.body[pos].pred not in delta:
                    continue
                derived = list(_fire(rule, relations, pos, delta[rule.body[pos].pred]))
                rel = relations.setdefault(rule.head.pred, set())
                for tup in derived:
                    if tup not in rel:
                        rel.add(tup)
                        budget.spend()
                        new_delta.setdefault(rule.head.pred, set()).add(tup)
        delta = new_delta


def _eval_term(t: DTerm, env: dict[str, GroundValue]) -> GroundValue | None:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        return env.get(t.name)
    vals = []
    for a in t.args:
        v = _eval_term(a, env)
        if v is None:
            return None
        vals.append(v)
    return (t.tag, *vals)


def _run_builtins(pending: list[Builtin], env: dict[str, GroundValue]) -> bool:
    """Run every builtin whose inputs are available; returns False if one
    fails, True otherwise (pending is pruned in place)."""
    progress = True
    while progress:
        progress = False
        for b in list(pending):
            if isinstance(b, Eq):
                lv = _eval_term(b.lhs, env)
                rv = _eval_term(b.rhs, env)
                if lv is None and rv is None:
                    continue
                if lv is None:
                    if isinstance(b.lhs, Var):
                        env[b.lhs.name] = rv
                    else:
                        continue  # skolem with unbound args
                elif rv is None:
                    if isinstance(b.rhs, Var):
                        env[b.rhs.name] = lv
                    else:
                        continue
                elif lv != rv:
                    return False
                pending.remove(b)
                progress = True
            elif isinstance(b, Neq):
                lv = _eval_term(b.lhs, env)
                rv = _eval_term(b.rhs, env)
                if lv is None or rv is None:
                    continue
                if lv == rv:
                    return False
                pending.remove(b)
                progress = True
            else:
                cvars = filters.constraint_vars(b.constraint)
                if not all(v in env for v in cvars):
                    continue

                def lookup(name: str) -> Term:
                    v = env.get(name, UNBOUND)
                    return v if isinstance(v, Term) else UNBOUND

                if not filters.holds(b.constraint, lookup):
                    return False
                pending.remove(b)
                progress = True
    return True


def _match(atom: Atom, tup: tuple, env: dict[str, GroundValue]) -> dict | None:
    out = dict(env)
    for t, v in zip(atom.args, tup):
        if isinstance(t, Const):
            if t.value != v:
                return None
        elif isinstance(t, Var):
            cur = out.get(t.name)
            if cur is None:
                out[t.name] = v
            elif cur != v:
                return None
        else:  # Skolem patterns never occur in body atoms
            return None
    return out


def _fire(
    rule: Rule,
    relations: dict[str, set[tuple]],
    delta_pos: int | None,
    delta_rel: set[tuple] | None,
) -> Iterator[tuple]:
    """All head tuples derivable for one rule; if delta_pos is given, that
    body atom ranges only over delta_rel."""

    # order remaining atoms greedily by bound-variable overlap, starting from
    # the delta atom when present
    order = list(range(len(rule.body)))
    if delta_pos is not None:
        order.remove(delta_pos)
        ordered = [delta_pos]
    else:
        ordered = []
    bound: set[str] = set()
    if ordered:
        bound |= rule.body[delta_pos].vars()
    while order:
        best = max(
            order,
            key=lambda i: (len(rule.body[i].vars() & bound),
                           -len(relations.get(rule.body[i].pred, ()))),
        )
        order.remove(best)
        ordered.append(best)
        bound |= rule.body[best].vars()

    def rel_for(i: int) -> Iterable[tuple]:
        if i == delta_pos and delta_rel is not None:
            return delta_rel
        return relations.get(rule.body[i].pred, ())

    def descend(k: int, env: dict[str, GroundValue], pending: list[Builtin]):
        if k == len(ordered):
            pend = list(pending)
            env2 = dict(env)
            if not _run_builtins(pend, env2):
                return
            if pend:
                raise UnsafeRule(f"builtins never became ready in {rule.head!r}")
            for neg in rule.neg:
                vals = tuple(_eval_term(t, env2) for t in neg.args)
                if any(v is None for v in vals):
                    raise UnsafeRule(f"negated atom with unbound variable: {neg!r}")
                if vals in relations.get(neg.pred, ()):
                    return
            head = tuple(_eval_term(t, env2) for t in rule.head.args)
            if any(v is None for v in head):
                raise UnsafeRule(f"head variable unbound in {rule.head!r}")
            yield head
            return
        i = ordered[k]
        atom = rule.body[i]
        for tup in rel_for(i):
            if len(tup) != len(atom.args):
                continue
            env2 = _match(atom, tup, env)
            if env2 is None:
                continue
            pend = list(pending)
            if not _run_builtins(pend, env2):
                continue
            yield from descend(k + 1, env2, pend)

    yield from descend(0, {}, list(rule.builtins))


# ---------------------------------------------------------------------------
# Textual rendering and loading
# ---------------------------------------------------------------------------

def term_to_text(value: GroundValue) -> str:
    """Compact text form used for constants in rendered programs."""
    if isinstance(value, tuple):
        return "[" + ", ".join(
            f'"{v}"' if isinstance(v, str) else term_to_text(v) for v in value
        ) + "]"
    if value.kind == "iri":
        return _quote(value.value)
    if value.kind == "blank":
        return _quote("_:" + value.value)
    if value.kind == "unbound":
        return _quote("null")
    body = value.value
    if value.lang:
        return _quote(f"{body}@{value.lang}")
    if value.datatype:
        return _quote(f"{body}^^{value.datatype}")
    return _quote(body)


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")


def term_from_text(text: str) -> Term:
    """Inverse of term_to_text, up to the documented IRI-vs-literal heuristic."""
    if text == "null":
        return UNBOUND
    if text.startswith("_:"):
        return blank(text[2:])
    if "^^" in text:
        lex, _, dt = text.rpartition("^^")
        return literal(lex, datatype=dt)
    m = re.fullmatch(r"(.*)@([A-Za-z]+(?:-[A-Za-z0-9]+)*)", text, re.S)
    if m:
        return literal(m.group(1), lang=m.group(2))
    if _SCHEME.match(text) and " " not in text:
        return iri(text)
    return literal(text)


def _render_dterm(t: DTerm) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return term_to_text(t.value)
    inner = [f'"{t.tag}"'] + [_render_dterm(a) for a in t.args]
    return "[" + ", ".join(inner) + "]"


def _render_constraint(c: filters.Constraint) -> str:
    if isinstance(c, filters.Comparison):
        def side(x):
            return x if isinstance(x, str) else term_to_text(x)
        return f"{side(c.lhs)} {c.op} {side(c.rhs)}"
    if isinstance(c, filters.Bound):
        return f"bound({c.var})"
    if isinstance(c, filters.TypeTest):
        return f"{c.test}({c.var})"
    if isinstance(c, filters.Regex):
        if c.flags:
            return f"regex({c.var}, {_quote(c.pattern)}, {_quote(c.flags)})"
        return f"regex({c.var}, {_quote(c.pattern)})"
    if isinstance(c, filters.Not):
        return f"!({_render_constraint(c.child)})"
    if isinstance(c, filters.And):
        return f"({_render_constraint(c.left)} && {_render_constraint(c.right)})"
    return f"({_render_constraint(c.left)} || {_render_constraint(c.right)})"


def _render_builtin(b: Builtin) -> str:
    if isinstance(b, Eq):
        return f"{_render_dterm(b.lhs)} = {_render_dterm(b.rhs)}"
    if isinstance(b, Neq):
        return f"{_render_dterm(b.lhs)} != {_render_dterm(b.rhs)}"
    return _render_constraint(b.constraint)


def render_rule(rule: Rule) -> str:
    head = f"{rule.head.pred}({', '.join(_render_dterm(a) for a in rule.head.args)})"
    items = [f"{a.pred}({', '.join(_render_dterm(t) for t in a.args)})" for a in rule.body]
    items += [f"not {a.pred}({', '.join(_render_dterm(t) for t in a.args)})" for a in rule.neg]
    items += [_render_builtin(b) for b in rule.builtins]
    if not items:
        return head + "."
    return head + " :- " + ", ".join(items) + "."


def render_program(program: Program) -> str:
    lines = [render_rule(r) for r in program.rules]
    if program.goal is not None:
        g = program.goal
        lines.append(
            f"% goal: {g.pred}/{g.arity} id={str(g.has_id).lower()} "
            f"graph={str(g.has_graph).lower()} vars=({','.join(g.variables)})"
        )
    return "\n".join(lines) + ("\n" if lines else "")


# --- loader ----------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<comment>%[^\n]*)
      | (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<punct>:-|!=|<=|>=|&&|\|\||[().,\[\]=<>!])
    )""",
    re.X,
)

_GOAL_RE = re.compile(
    r"%\s*goal:\s*(\S+)/(\d+)\s+id=(true|false)\s+graph=(true|false)\s+vars=\(([^)]*)\)"
)


class _ProgramParser:
    def __init__(self, text: str):
        self.tokens: list[tuple[str, str]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise EngineError(f"bad program syntax near {text[pos:pos+25]!r}")
                break
            pos = m.end()
            kind = m.lastgroup
            if kind != "comment":
                self.tokens.append((kind, m.group(kind)))
        self.i = 0

    def peek(self, k: int = 0):
        if self.i + k < len(self.tokens):
            return self.tokens[self.i + k]
        return (None, None)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val = self.next()
        if val != value:
            raise EngineError(f"expected {value!r}, got {val!r}")

    def at(self, value: str) -> bool:
        return self.peek()[1] == value

    def parse_rules(self) -> list[Rule]:
        rules = []
        while self.peek()[0] is not None:
            rules.append(self.rule())
        return rules

    def rule(self) -> Rule:
        head = self.atom()
        body: list[Atom] = []
        neg: list[Atom] = []
        builtins: list[Builtin] = []
        if self.at(":-"):
            self.next()
            while True:
                self.body_item(body, neg, builtins)
                if self.at(","):
                    self.next()
                    continue
                break
        self.expect(".")
        return Rule(head, tuple(body), tuple(neg), tuple(builtins))

    def body_item(self, body, neg, builtins) -> None:
        kind, val = self.peek()
        if val == "not" and self.peek(1)[0] == "ident" and self.peek(2)[1] == "(":
            self.next()
            neg.append(self.atom())
            return
        if val == "(" or val == "!":
            builtins.append(FilterBI(self.constraint()))
            return
        if kind == "ident" and self.peek(1)[1] == "(":
            if val in ("bound", "regex") or val in filters.TYPE_TESTS:
                builtins.append(FilterBI(self.constraint()))
                return
            body.append(self.atom())
            return
        # comparison or equality between terms
        lhs = self.simple_term()
        op = self.next()[1]
        if op == "=":
            builtins.append(Eq(lhs, self.value_term()))
        elif op == "!=":
            builtins.append(Neq(lhs, self.simple_term()))
        elif op in ("<", "<=", ">", ">="):
            builtins.append(FilterBI(filters.Comparison(op, _operand(lhs), _operand(self.simple_term()))))
        else:
            raise EngineError(f"unexpected operator {op!r}")

    def atom(self) -> Atom:
        kind, name = self.next()
        if kind != "ident":
            raise EngineError(f"expected predicate name, got {name!r}")
        self.expect("(")
        args: list[DTerm] = []
        if not self.at(")"):
            while True:
                args.append(self.value_term())
                if self.at(","):
                    self.next()
                    continue
                break
        self.expect(")")
        return Atom(name, tuple(args))

    def simple_term(self) -> DTerm:
        kind, val = self.next()
        if kind == "ident":
            return Var(val)
        if kind == "string":
            return Const(term_from_text(_unquote(val)))
        raise EngineError(f"expected term, got {val!r}")

    def value_term(self) -> DTerm:
        if self.at("["):
            self.next()
            if self.at("]"):
                self.next()
                return Const(EMPTY_ID)
            kind, tag = self.next()
            if kind != "string":
                raise EngineError("skolem list must start with a tag string")
            args = []
            while self.at(","):
                self.next()
                args.append(self.value_term())
            self.expect("]")
            return Sk(_unquote(tag), tuple(args))
        return self.simple_term()

    # filter constraint grammar: or > and > unary
    def constraint(self) -> filters.Constraint:
        left = self.constraint_and()
        while self.at("||"):
            self.next()
            left = filters.Or(left, self.constraint_and())
        return left

    def constraint_and(self) -> filters.Constraint:
        left = self.constraint_unary()
        while self.at("&&"):
            self.next()
            left = filters.And(left, self.constraint_unary())
        return left

    def constraint_unary(self) -> filters.Constraint:
        if self.at("!"):
            self.next()
            self.expect("(")
            inner = self.constraint()
            self.expect(")")
            return filters.Not(inner)
        if self.at("("):
            self.next()
            inner = self.constraint()
            self.expect(")")
            return inner
        kind, val = self.peek()
        if kind == "ident" and self.peek(1)[1] == "(":
            self.next()
            self.expect("(")
            if val == "bound":
                var = self.next()[1]
                self.expect(")")
                return filters.Bound(var)
            if val in filters.TYPE_TESTS:
                var = self.next()[1]
                self.expect(")")
                return filters.TypeTest(val, var)
            if val == "regex":
                var = self.next()[1]
                self.expect(",")
                pattern = _unquote(self.next()[1])
                flags = ""
                if self.at(","):
                    self.next()
                    flags = _unquote(self.next()[1])
                self.expect(")")
                return filters.Regex(var, pattern, flags)
            raise EngineError(f"unknown filter function {val!r}")
        lhs = _operand(self.simple_term())
        op = self.next()[1]
        if op not in filters.COMPARISON_OPS:
            raise EngineError(f"bad comparison operator {op!r}")
        rhs = _operand(self.simple_term())
        return filters.Comparison(op, lhs, rhs)


def _operand(t: DTerm) -> filters.Operand:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const) and isinstance(t.value, Term):
        return t.value
    raise EngineError(f"bad filter operand: {t!r}")


def _unquote(tok: str) -> str:
    assert tok.startswith('"') and tok.endswith('"')
    body = tok[1:-1]
    out = []
    i = 0
    while i < len(body):
        if body[i] == "\\" and i + 1 < len(body):
            out.append(body[i + 1])
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


def load_program(text: str) -> Program:
    goal = None
    m = _GOAL_RE.search(text)
    if m:
        vars_ = tuple(v for v in m.group(5).split(",") if v)
        goal = Goal(m.group(1), int(m.group(2)), vars_,
                    m.group(3) == "true", m.group(4) == "true")
    rules = _ProgramParser(text).parse_rules()
    return Program(tuple(rules), goal)
