"""Separation-logic assertion language: AST, parser, and manipulation.

The assertion language describes linked heap structures. A *symbolic heap*
pairs a spatial part (``emp``, points-to atoms ``x -> c(a1..an)``, inductive
predicate instances ``p(a1..an)``, joined by the separating conjunction
``*``) with a pure arithmetic part, under an optional existential binder.
A formula is a disjunction of symbolic heaps. Inductive predicates and the
record types they constrain are declared in ``.sl`` files together with
named procedure preconditions.

Design notes:

* The pure fragment is kept minimal: atoms are ``=`` and ``<=`` only, and
  the surface comparisons ``<``, ``>``, ``>=``, ``!=`` are desugared at
  parse time (``a < b`` becomes ``!(b <= a)`` and so on). Printing re-sugars
  the two negated shapes so round-trips stay readable.
* Variables are untyped in assertions; ``infer_sorts`` recovers int/bool/
  record sorts from the positions variables occupy and rejects clashes.
* All AST nodes are frozen dataclasses and may be shared freely.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

from .lexer import TokenStream

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

# =====================================================================
# Terms
# =====================================================================


@dataclass(frozen=True)
class Null:
    def __repr__(self) -> str:
        return "Null()"


@dataclass(frozen=True)
class Const:
    value: int

    def __post_init__(self):
        if not (INT32_MIN <= self.value <= INT32_MAX):
            raise ValueError(f"constant {self.value} outside 32-bit range")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Scale:
    coeff: int  # constant coefficient; linearity is part of the term grammar
    term: "ArithTerm"


@dataclass(frozen=True)
class Add:
    left: "ArithTerm"
    right: "ArithTerm"


@dataclass(frozen=True)
class Neg:
    term: "ArithTerm"


ArithTerm = Union[Null, Const, Var, Scale, Add, Neg]

NULL = Null()
TRUE = None  # placeholder replaced below once PureFormula exists


# =====================================================================
# Pure formulas
# =====================================================================


@dataclass(frozen=True)
class TruePure:
    pass


@dataclass(frozen=True)
class Atom:
    op: str  # '=' or '<='
    left: ArithTerm
    right: ArithTerm

    def __post_init__(self):
        if self.op not in ("=", "<="):
            raise ValueError(f"pure atom operator must be = or <=, got {self.op!r}")


@dataclass(frozen=True)
class Not:
    inner: "PureFormula"


@dataclass(frozen=True)
class And:
    left: "PureFormula"
    right: "PureFormula"


PureFormula = Union[TruePure, Atom, Not, And]

TRUE = TruePure()


def conjuncts(pure: PureFormula) -> Iterator[PureFormula]:
    """Flatten nested conjunctions, dropping redundant ``true``."""
    if isinstance(pure, And):
        yield from conjuncts(pure.left)
        yield from conjuncts(pure.right)
    elif not isinstance(pure, TruePure):
        yield pure


def conj(parts: Iterable[PureFormula]) -> PureFormula:
    out: PureFormula = TRUE
    for part in parts:
        for c in conjuncts(part):
            out = c if isinstance(out, TruePure) else And(out, c)
    return out


# =====================================================================
# Spatial formulas
# =====================================================================


@dataclass(frozen=True)
class Emp:
    pass


@dataclass(frozen=True)
class PointsTo:
    var: str  # head variable: the address of exactly one record
    type_name: str
    args: tuple[ArithTerm, ...]


@dataclass(frozen=True)
class PredInst:
    pred: str
    args: tuple[ArithTerm, ...]


@dataclass(frozen=True)
class SepConj:
    left: "SpatialFormula"
    right: "SpatialFormula"


SpatialFormula = Union[Emp, PointsTo, PredInst, SepConj]

EMP = Emp()
SpatialAtom = Union[PointsTo, PredInst]


def spatial_atoms(spatial: SpatialFormula) -> list[SpatialAtom]:
    """Flatten a spatial formula into its atom list (``emp`` vanishes)."""
    if isinstance(spatial, Emp):
        return []
    if isinstance(spatial, (PointsTo, PredInst)):
        return [spatial]
    return spatial_atoms(spatial.left) + spatial_atoms(spatial.right)


def sep(atoms: Iterable[SpatialAtom]) -> SpatialFormula:
    out: SpatialFormula = EMP
    for atom in atoms:
        out = atom if isinstance(out, Emp) else SepConj(out, atom)
    return out


# =====================================================================
# Symbolic heaps, formulas, definitions
# =====================================================================


@dataclass(frozen=True)
class SymbolicHeap:
    exists: tuple[str, ...]
    spatial: SpatialFormula
    pure: PureFormula

    def atoms(self) -> list[SpatialAtom]:
        return spatial_atoms(self.spatial)

    def points_tos(self) -> list[PointsTo]:
        return [a for a in self.atoms() if isinstance(a, PointsTo)]

    def instances(self) -> list[PredInst]:
        return [a for a in self.atoms() if isinstance(a, PredInst)]

    def is_base(self) -> bool:
        return not self.instances()


@dataclass(frozen=True)
class Formula:
    disjuncts: tuple[SymbolicHeap, ...]

    def __post_init__(self):
        if not self.disjuncts:
            raise ValueError("a formula needs at least one disjunct")


@dataclass(frozen=True)
class DataDef:
    name: str
    fields: tuple[tuple[str, str], ...]  # (field name, type) in declaration order

    def field_names(self) -> tuple[str, ...]:
        return tuple(f for f, _ in self.fields)

    def field_type(self, name: str) -> str:
        for f, t in self.fields:
            if f == name:
                return t
        raise KeyError(name)


@dataclass(frozen=True)
class PredDef:
    name: str
    params: tuple[str, ...]
    body: Formula


@dataclass
class SpecFile:
    datas: dict[str, DataDef] = field(default_factory=dict)
    preds: dict[str, PredDef] = field(default_factory=dict)
    preconditions: dict[str, Formula] = field(default_factory=dict)


def heap(exists: Iterable[str] = (), spatial: SpatialFormula = EMP,
         pure: PureFormula = TRUE) -> SymbolicHeap:
    return SymbolicHeap(tuple(exists), spatial, pure)


# =====================================================================
# Fresh names
# =====================================================================


class _NameSession:
    """Session-wide fresh-name source.

    Every parsed or issued variable name is registered so a fresh name can
    never collide with one already in play. Freshening appends a numeric
    suffix to the hint (``elt`` -> ``elt1``, ``elt2``, ...).
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        self._counters: dict[str, int] = {}

    def register(self, name: str) -> None:
        with self._lock:
            self._seen.add(name)

    def fresh(self, hint: str) -> str:
        base = hint.rstrip("0123456789") or "v"
        with self._lock:
            n = self._counters.get(base, 0)
            while True:
                n += 1
                name = f"{base}{n}"
                if name not in self._seen:
                    self._counters[base] = n
                    self._seen.add(name)
                    return name

    def reset(self) -> None:
        with self._lock:
            self._seen.clear()
            self._counters.clear()


_session = _NameSession()


def fresh_var(hint: str = "v") -> str:
    return _session.fresh(hint)


def register_name(name: str) -> None:
    _session.register(name)


def reset_names() -> None:
    """Start a new naming session (used by the CLI and by tests)."""
    _session.reset()


# =====================================================================
# Free variables and substitution
# =====================================================================


def term_vars(term: ArithTerm) -> set[str]:
    if isinstance(term, Var):
        return {term.name}
    if isinstance(term, Scale):
        return term_vars(term.term)
    if isinstance(term, Add):
        return term_vars(term.left) | term_vars(term.right)
    if isinstance(term, Neg):
        return term_vars(term.term)
    return set()


def pure_vars(pure: PureFormula) -> set[str]:
    if isinstance(pure, Atom):
        return term_vars(pure.left) | term_vars(pure.right)
    if isinstance(pure, Not):
        return pure_vars(pure.inner)
    if isinstance(pure, And):
        return pure_vars(pure.left) | pure_vars(pure.right)
    return set()


def spatial_vars(spatial: SpatialFormula) -> set[str]:
    out: set[str] = set()
    for atom in spatial_atoms(spatial):
        if isinstance(atom, PointsTo):
            out.add(atom.var)
        for arg in atom.args:
            out |= term_vars(arg)
    return out


def heap_vars(d: SymbolicHeap) -> set[str]:
    return spatial_vars(d.spatial) | pure_vars(d.pure)


def free_vars(d: SymbolicHeap) -> set[str]:
    return heap_vars(d) - set(d.exists)


class SubstitutionError(Exception):
    """A head position required a variable but the binding supplied a term."""


def subst_term(term: ArithTerm, binding: Mapping[str, ArithTerm]) -> ArithTerm:
    if isinstance(term, Var):
        return binding.get(term.name, term)
    if isinstance(term, Scale):
        return Scale(term.coeff, subst_term(term.term, binding))
    if isinstance(term, Add):
        return Add(subst_term(term.left, binding), subst_term(term.right, binding))
    if isinstance(term, Neg):
        return Neg(subst_term(term.term, binding))
    return term


def subst_pure(pure: PureFormula, binding: Mapping[str, ArithTerm]) -> PureFormula:
    if isinstance(pure, Atom):
        return Atom(pure.op, subst_term(pure.left, binding), subst_term(pure.right, binding))
    if isinstance(pure, Not):
        return Not(subst_pure(pure.inner, binding))
    if isinstance(pure, And):
        return And(subst_pure(pure.left, binding), subst_pure(pure.right, binding))
    return pure


def subst_spatial(spatial: SpatialFormula, binding: Mapping[str, ArithTerm]) -> SpatialFormula:
    def sub_atom(atom: SpatialAtom) -> SpatialAtom:
        args = tuple(subst_term(a, binding) for a in atom.args)
        if isinstance(atom, PointsTo):
            head = binding.get(atom.var)
            if head is None:
                return PointsTo(atom.var, atom.type_name, args)
            if not isinstance(head, Var):
                raise SubstitutionError(
                    f"points-to head {atom.var} substituted by non-variable term")
            return PointsTo(head.name, atom.type_name, args)
        return PredInst(atom.pred, args)

    atoms = spatial_atoms(spatial)
    return sep(sub_atom(a) for a in atoms) if atoms else EMP


def substitute(d: SymbolicHeap, binding: Mapping[str, ArithTerm]) -> SymbolicHeap:
    """Capture-avoiding simultaneous substitution.

    The binding domain must not mention bound variables of ``d``; callers
    freshen first. Bound variables that collide with variables introduced
    by the binding's range are renamed.
    """
    if not binding:
        return d
    clash = set(binding) & set(d.exists)
    if clash:
        raise SubstitutionError(f"binding domain hits bound variables: {sorted(clash)}")
    incoming: set[str] = set()
    for t in binding.values():
        incoming |= term_vars(t)
    capture = incoming & set(d.exists)
    if capture:
        renames = {v: Var(fresh_var(v)) for v in d.exists if v in capture}
        d = SymbolicHeap(
            tuple(renames[v].name if v in renames else v for v in d.exists),
            subst_spatial(d.spatial, renames),
            subst_pure(d.pure, renames),
        )
    return SymbolicHeap(d.exists, subst_spatial(d.spatial, binding),
                        subst_pure(d.pure, binding))


def freshen_heap(d: SymbolicHeap) -> SymbolicHeap:
    """Rename all bound variables of ``d`` to globally fresh names."""
    if not d.exists:
        return d
    renames = {v: Var(fresh_var(v)) for v in d.exists}
    return SymbolicHeap(tuple(r.name for r in renames.values()),
                        subst_spatial(d.spatial, renames),
                        subst_pure(d.pure, renames))


# =====================================================================
# Normalization
# =====================================================================
#
# Raw formulas arise when a predicate body (a disjunction) is spliced into
# a heap under a separating conjunction. Two rewrite axioms bring the
# result back into the grammar:
#
#   (k1 ^ p1) * (k2 ^ p2)        ==  (k1 * k2) ^ (p1 ^ p2)
#   (ex w. D1) * (ex v. D2)      ==  ex w, v'. (D1 * D2[v'/v])
#
# together with distribution of * over \/ and dropping of emp units.


@dataclass(frozen=True)
class RawSep:
    left: "RawFormula"
    right: "RawFormula"


@dataclass(frozen=True)
class RawDisj:
    left: "RawFormula"
    right: "RawFormula"


RawFormula = Union[SymbolicHeap, RawSep, RawDisj]


def sep_heaps(a: SymbolicHeap, b: SymbolicHeap) -> SymbolicHeap:
    """Separating conjunction of two symbolic heaps, axioms 1 and 2."""
    if set(b.exists) & (free_vars(a) | set(a.exists) | free_vars(b)):
        b = freshen_heap(b)
    return SymbolicHeap(
        a.exists + b.exists,
        sep(spatial_atoms(a.spatial) + spatial_atoms(b.spatial)),
        conj([a.pure, b.pure]),
    )


def normalize(raw: RawFormula) -> list[SymbolicHeap]:
    """Flatten a raw composition into grammar-conformant symbolic heaps."""
    if isinstance(raw, SymbolicHeap):
        return [SymbolicHeap(raw.exists, sep(raw.atoms()), conj([raw.pure]))]
    if isinstance(raw, RawDisj):
        return normalize(raw.left) + normalize(raw.right)
    return [sep_heaps(x, y) for x in normalize(raw.left) for y in normalize(raw.right)]


def grammar_conformant(d: SymbolicHeap) -> bool:
    """Check the shape invariants the normalizer promises."""
    names = list(d.exists)
    if len(set(names)) != len(names):
        return False
    used = heap_vars(d)
    return all(v in used for v in names)


# =====================================================================
# Alpha-equivalence
# =====================================================================


def _term_skeleton(term: ArithTerm, bound: set[str]) -> str:
    if isinstance(term, Var):
        return "?" if term.name in bound else term.name
    if isinstance(term, Const):
        return str(term.value)
    if isinstance(term, Null):
        return "null"
    if isinstance(term, Scale):
        return f"{term.coeff}*{_term_skeleton(term.term, bound)}"
    if isinstance(term, Add):
        return f"({_term_skeleton(term.left, bound)}+{_term_skeleton(term.right, bound)})"
    return f"-{_term_skeleton(term.term, bound)}"


def canonical_heap(d: SymbolicHeap) -> SymbolicHeap:
    """Canonical form for comparison up to bound-variable renaming.

    Spatial atoms are ordered points-to first, then predicate instances,
    each group sorted by a binder-independent skeleton (ties keep source
    order); binders are renamed in first-use order; pure conjuncts are
    sorted by their printed form. Heaps that differ only in bound names
    or conjunct order map to equal canonical forms.
    """
    bound = set(d.exists)
    pts = [a for a in d.atoms() if isinstance(a, PointsTo)]
    insts = [a for a in d.atoms() if isinstance(a, PredInst)]

    def atom_key(atom: SpatialAtom) -> str:
        if isinstance(atom, PointsTo):
            head = "?" if atom.var in bound else atom.var
            return f"{atom.type_name}({head};" + ",".join(
                _term_skeleton(t, bound) for t in atom.args) + ")"
        return f"{atom.pred}(" + ",".join(_term_skeleton(t, bound) for t in atom.args) + ")"

    atoms = sorted(pts, key=atom_key) + sorted(insts, key=atom_key)

    renames: dict[str, Var] = {}
    counter = itertools.count()

    def visit(term: ArithTerm) -> None:
        if isinstance(term, Var) and term.name in bound and term.name not in renames:
            renames[term.name] = Var(f".b{next(counter)}")
        elif isinstance(term, Scale):
            visit(term.term)
        elif isinstance(term, Add):
            visit(term.left)
            visit(term.right)
        elif isinstance(term, Neg):
            visit(term.term)

    for atom in atoms:
        if isinstance(atom, PointsTo):
            visit(Var(atom.var))
        for arg in atom.args:
            visit(arg)
    for c in conjuncts(d.pure):
        for v in sorted(pure_vars(c)):
            if v in bound and v not in renames:
                renames[v] = Var(f".b{next(counter)}")

    spatial = subst_spatial(sep(atoms), renames)
    pure_parts = sorted((subst_pure(c, renames) for c in conjuncts(d.pure)),
                        key=print_pure)
    return SymbolicHeap(tuple(r.name for r in renames.values()),
                        spatial, conj(pure_parts))


def alpha_equal(a: SymbolicHeap, b: SymbolicHeap) -> bool:
    return canonical_heap(a) == canonical_heap(b)


def dedup_heaps(heaps: Iterable[SymbolicHeap]) -> list[SymbolicHeap]:
    """Drop later heaps alpha-equivalent to earlier ones, keeping order."""
    seen: set = set()
    out: list[SymbolicHeap] = []
    for d in heaps:
        key = canonical_heap(d)
        if key not in seen:
            seen.add(key)
            out.append(d)
    return out


# =====================================================================
# Printing
# =====================================================================


def print_term(term: ArithTerm) -> str:
    if isinstance(term, Null):
        return "null"
    if isinstance(term, Const):
        return str(term.value)
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Scale):
        return f"{term.coeff} * {_paren_term(term.term)}"
    if isinstance(term, Add):
        if isinstance(term.right, Neg):
            return f"{print_term(term.left)} - {_paren_term(term.right.term)}"
        return f"{print_term(term.left)} + {_paren_term(term.right)}"
    return f"-{_paren_term(term.term)}"


def _paren_term(term: ArithTerm) -> str:
    text = print_term(term)
    return f"({text})" if isinstance(term, (Add, Scale, Neg)) else text


def print_pure(pure: PureFormula) -> str:
    if isinstance(pure, TruePure):
        return "true"
    if isinstance(pure, Atom):
        return f"{print_term(pure.left)} {pure.op} {print_term(pure.right)}"
    if isinstance(pure, Not):
        inner = pure.inner
        # Re-sugar the two desugared comparison shapes.
        if isinstance(inner, Atom) and inner.op == "=":
            return f"{print_term(inner.left)} != {print_term(inner.right)}"
        if isinstance(inner, Atom) and inner.op == "<=":
            return f"{print_term(inner.right)} < {print_term(inner.left)}"
        return f"!({print_pure(inner)})"
    return f"{print_pure(pure.left)} & {print_pure(pure.right)}"


def print_spatial(spatial: SpatialFormula) -> str:
    atoms = spatial_atoms(spatial)
    if not atoms:
        return "emp"
    parts = []
    for atom in atoms:
        args = ", ".join(print_term(a) for a in atom.args)
        if isinstance(atom, PointsTo):
            parts.append(f"{atom.var} -> {atom.type_name}({args})")
        else:
            parts.append(f"{atom.pred}({args})")
    return " * ".join(parts)


def print_heap(d: SymbolicHeap) -> str:
    prefix = f"exists {', '.join(d.exists)} . " if d.exists else ""
    return f"{prefix}{print_spatial(d.spatial)} & {print_pure(d.pure)}"


def print_formula(f: Formula) -> str:
    return " \\/ ".join(f"({print_heap(d)})" for d in f.disjuncts)


def print_spec(spec: SpecFile) -> str:
    lines: list[str] = []
    for data in spec.datas.values():
        lines.append(f"data {data.name} {{")
        for fname, ftype in data.fields:
            lines.append(f"  {ftype} {fname};")
        lines.append("}")
        lines.append("")
    for pred in spec.preds.values():
        lines.append(f"pred {pred.name}({', '.join(pred.params)}) ==")
        lines.append("     " + "\n  \\/ ".join(f"({print_heap(d)})" for d in pred.body.disjuncts) + " ;")
        lines.append("")
    for name, formula in spec.preconditions.items():
        lines.append(f"pre {name} == {print_formula(formula)} ;")
    return "\n".join(lines) + "\n"


# =====================================================================
# Parser
# =====================================================================

_KEYWORDS = {"data", "pred", "pre", "emp", "null", "true", "exists", "bool", "int"}


def _parse_term(ts: TokenStream) -> ArithTerm:
    left = _parse_term_factor(ts)
    while ts.at("+") or ts.at("-"):
        op = ts.next().text
        right = _parse_term_factor(ts)
        left = Add(left, right if op == "+" else Neg(right))
    return left


def _parse_term_factor(ts: TokenStream) -> ArithTerm:
    if ts.accept("-"):
        return Neg(_parse_term_factor(ts))
    return _parse_term_primary(ts)


def _parse_term_primary(ts: TokenStream) -> ArithTerm:
    if ts.at_kind("int"):
        err = ts.error("constant outside 32-bit signed range")
        value = ts.expect_int()
        if not (INT32_MIN <= value <= INT32_MAX):
            raise err
        if ts.accept("*"):
            return Scale(value, _parse_term_factor(ts))
        return Const(value)
    if ts.accept("("):
        term = _parse_term(ts)
        ts.expect(")")
        return term
    if ts.at("null"):
        ts.next()
        return NULL
    tok = ts.expect_ident("term")
    register_name(tok.text)
    return Var(tok.text)


_CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")


def _desugar_cmp(op: str, a: ArithTerm, b: ArithTerm) -> PureFormula:
    if op == "=":
        return Atom("=", a, b)
    if op == "!=":
        return Not(Atom("=", a, b))
    if op == "<=":
        return Atom("<=", a, b)
    if op == "<":
        return Not(Atom("<=", b, a))
    if op == ">":
        return Not(Atom("<=", a, b))
    return Atom("<=", b, a)  # a >= b


def _parse_pure_atom(ts: TokenStream) -> PureFormula:
    if ts.at("true"):
        ts.next()
        return TRUE
    left = _parse_term(ts)
    tok = ts.peek()
    if tok.text not in _CMP_OPS:
        raise ts.error(f"expected comparison operator, found {tok.text!r}")
    ts.next()
    right = _parse_term(ts)
    return _desugar_cmp(tok.text, left, right)


def _parse_pure_primary(ts: TokenStream) -> PureFormula:
    if ts.accept("!"):
        return Not(_parse_pure_primary(ts))
    if ts.at("(") :
        # Parenthesized pure group; may contain conjunction.
        ts.expect("(")
        inner = _parse_pure_full(ts)
        ts.expect(")")
        return inner
    return _parse_pure_atom(ts)


def _parse_pure_full(ts: TokenStream) -> PureFormula:
    left = _parse_pure_primary(ts)
    while ts.accept("&"):
        left = And(left, _parse_pure_primary(ts))
    return left


@dataclass
class _Chunk:
    exists: list[str]
    atoms: list[SpatialAtom]
    pures: list[PureFormula]
    saw_emp: bool = False


def _parse_args(ts: TokenStream) -> tuple[ArithTerm, ...]:
    ts.expect("(")
    args: list[ArithTerm] = []
    if not ts.at(")"):
        args.append(_parse_term(ts))
        while ts.accept(","):
            args.append(_parse_term(ts))
    ts.expect(")")
    return tuple(args)


def _parse_chunk(ts: TokenStream) -> _Chunk:
    if ts.at("(") and ts.peek(1).text == "exists":
        ts.expect("(")
        inner = _parse_disjunct_body(ts)
        ts.expect(")")
        return inner
    if ts.at("exists"):
        ts.next()
        binders = [ts.expect_ident("bound variable").text]
        while ts.accept(","):
            binders.append(ts.expect_ident("bound variable").text)
        ts.expect(".")
        for b in binders:
            register_name(b)
        rest = _parse_disjunct_body(ts)
        rest.exists = binders + rest.exists
        return rest
    if ts.at("emp"):
        ts.next()
        return _Chunk([], [], [], saw_emp=True)
    if ts.at_kind("ident") and ts.peek(1).text == "->":
        head = ts.expect_ident().text
        register_name(head)
        ts.expect("->")
        type_name = ts.expect_ident("record type name").text
        args = _parse_args(ts)
        return _Chunk([], [PointsTo(head, type_name, args)], [])
    if ts.at_kind("ident") and ts.peek(1).text == "(" and ts.peek().text not in ("true",):
        name = ts.expect_ident().text
        args = _parse_args(ts)
        return _Chunk([], [PredInst(name, args)], [])
    return _Chunk([], [], [_parse_pure_primary(ts)])


def _parse_disjunct_body(ts: TokenStream) -> _Chunk:
    chunk = _parse_chunk(ts)
    while ts.at("&") or ts.at("*"):
        ts.next()
        more = _parse_chunk(ts)
        chunk.exists += more.exists
        chunk.atoms += more.atoms
        chunk.pures += more.pures
        chunk.saw_emp = chunk.saw_emp or more.saw_emp
    return chunk


def _parse_disjunct(ts: TokenStream) -> SymbolicHeap:
    if ts.accept("("):
        chunk = _parse_disjunct_body(ts)
        ts.expect(")")
        while ts.at("&") or ts.at("*"):
            ts.next()
            more = _parse_chunk(ts)
            chunk.exists += more.exists
            chunk.atoms += more.atoms
            chunk.pures += more.pures
            chunk.saw_emp = chunk.saw_emp or more.saw_emp
    else:
        chunk = _parse_disjunct_body(ts)
    if not chunk.atoms and not chunk.pures and not chunk.saw_emp:
        raise ts.error("empty disjunct")
    return SymbolicHeap(tuple(chunk.exists), sep(chunk.atoms), conj(chunk.pures))


def _parse_formula(ts: TokenStream) -> Formula:
    disjuncts = [_parse_disjunct(ts)]
    while ts.accept("\\/"):
        disjuncts.append(_parse_disjunct(ts))
    return Formula(tuple(disjuncts))


def parse_formula(text: str) -> Formula:
    ts = TokenStream(text)
    f = _parse_formula(ts)
    if not ts.at_kind("eof"):
        raise ts.error(f"trailing input {ts.peek().text!r}")
    return f


def parse_heap(text: str) -> SymbolicHeap:
    f = parse_formula(text)
    if len(f.disjuncts) != 1:
        raise ValueError("expected a single symbolic heap")
    return f.disjuncts[0]


def _parse_data(ts: TokenStream) -> DataDef:
    ts.expect("data")
    name = ts.expect_ident("record type name").text
    ts.expect("{")
    fields: list[tuple[str, str]] = []
    while not ts.at("}"):
        ftype = ts.expect_ident("field type").text
        fname = ts.expect_ident("field name").text
        ts.expect(";")
        if fname in [f for f, _ in fields]:
            raise ts.error(f"duplicate field {fname!r} in data {name}")
        fields.append((fname, ftype))
    ts.expect("}")
    return DataDef(name, tuple(fields))


def parse_spec(text: str) -> SpecFile:
    """Parse and validate a ``.sl`` specification file."""
    ts = TokenStream(text)
    spec = SpecFile()
    while not ts.at_kind("eof"):
        if ts.at("data"):
            data = _parse_data(ts)
            if data.name in spec.datas:
                raise ts.error(f"duplicate data definition {data.name!r}")
            spec.datas[data.name] = data
        elif ts.at("pred"):
            ts.next()
            name = ts.expect_ident("predicate name").text
            ts.expect("(")
            params: list[str] = []
            if not ts.at(")"):
                params.append(ts.expect_ident("parameter").text)
                while ts.accept(","):
                    params.append(ts.expect_ident("parameter").text)
            ts.expect(")")
            for p in params:
                register_name(p)
            ts.expect("==")
            body = _parse_formula(ts)
            ts.expect(";")
            if name in spec.preds:
                raise ts.error(f"duplicate predicate definition {name!r}")
            if len(set(params)) != len(params):
                raise ts.error(f"duplicate parameter in predicate {name!r}")
            spec.preds[name] = PredDef(name, tuple(params), body)
        elif ts.at("pre"):
            ts.next()
            name = ts.expect_ident("procedure name").text
            ts.expect("==")
            formula = _parse_formula(ts)
            ts.expect(";")
            if name in spec.preconditions:
                raise ts.error(f"duplicate precondition for {name!r}")
            spec.preconditions[name] = formula
        else:
            raise ts.error(f"expected data, pred or pre, found {ts.peek().text!r}")
    validate_spec(spec)
    return spec


class SpecError(Exception):
    """Well-formedness violation in a parsed specification."""


def validate_spec(spec: SpecFile) -> None:
    for data in spec.datas.values():
        for fname, ftype in data.fields:
            if ftype not in ("int", "bool") and ftype not in spec.datas:
                raise SpecError(f"data {data.name}: unknown field type {ftype!r}")

    def check_heap(d: SymbolicHeap, where: str) -> None:
        if len(set(d.exists)) != len(d.exists):
            raise SpecError(f"{where}: duplicate bound variable")
        unused = set(d.exists) - heap_vars(d)
        if unused:
            raise SpecError(f"{where}: bound variables never used: {sorted(unused)}")
        for atom in d.atoms():
            if isinstance(atom, PointsTo):
                data = spec.datas.get(atom.type_name)
                if data is None:
                    raise SpecError(f"{where}: unknown record type {atom.type_name!r}")
                if len(atom.args) != len(data.fields):
                    raise SpecError(
                        f"{where}: {atom.type_name} expects {len(data.fields)} "
                        f"fields, got {len(atom.args)}")
            else:
                pred = spec.preds.get(atom.pred)
                if pred is None:
                    raise SpecError(f"{where}: unknown predicate {atom.pred!r}")
                if len(atom.args) != len(pred.params):
                    raise SpecError(
                        f"{where}: {atom.pred} expects {len(pred.params)} "
                        f"arguments, got {len(atom.args)}")

    for pred in spec.preds.values():
        base = 0
        for i, d in enumerate(pred.body.disjuncts):
            check_heap(d, f"pred {pred.name} disjunct {i}")
            loose = free_vars(d) - set(pred.params)
            if loose:
                raise SpecError(f"pred {pred.name}: free variables {sorted(loose)} "
                                f"are not parameters")
            if d.is_base():
                base += 1
        if base == 0:
            raise SpecError(f"pred {pred.name}: no base disjunct; "
                            f"unfolding could not terminate")
    for name, formula in spec.preconditions.items():
        for i, d in enumerate(formula.disjuncts):
            check_heap(d, f"pre {name} disjunct {i}")
    infer_sorts(spec)


# =====================================================================
# Sort inference
# =====================================================================

Sort = str  # 'int' | 'bool' | record type name | 'nullref'


class SortError(Exception):
    pass


def _unify(env: dict[str, Sort], var: str, sort: Sort, where: str) -> None:
    have = env.get(var)
    if have is None or have == "nullref" and sort not in ("int", "bool"):
        env[var] = sort
        return
    if have == sort or sort == "nullref" and have not in ("int", "bool"):
        return
    raise SortError(f"{where}: variable {var} used both as {have} and as {sort}")


def _term_sort_constraints(term: ArithTerm, sort: Sort, env: dict[str, Sort],
                           where: str) -> None:
    if isinstance(term, Var):
        _unify(env, term.name, sort, where)
    elif isinstance(term, (Scale, Add, Neg)):
        if sort not in ("int",):
            raise SortError(f"{where}: arithmetic term in non-int position")
        for sub in ([term.term] if not isinstance(term, Add) else [term.left, term.right]):
            _term_sort_constraints(sub, "int", env, where)
    elif isinstance(term, Null):
        if sort in ("int", "bool"):
            raise SortError(f"{where}: null in scalar position")
    elif isinstance(term, Const):
        if sort not in ("int", "bool"):
            raise SortError(f"{where}: integer constant in reference position")


def _term_known_sort(term: ArithTerm, env: dict[str, Sort]) -> Sort | None:
    if isinstance(term, (Const, Scale, Add, Neg)):
        return "int"
    if isinstance(term, Null):
        return "nullref"
    return env.get(term.name)


def heap_sort_pass(d: SymbolicHeap, spec: SpecFile,
                   param_sorts: dict[str, tuple[Sort, ...]],
                   env: dict[str, Sort], where: str) -> None:
    for atom in d.atoms():
        if isinstance(atom, PointsTo):
            data = spec.datas[atom.type_name]
            _unify(env, atom.var, atom.type_name, where)
            for (fname, ftype), arg in zip(data.fields, atom.args):
                _term_sort_constraints(arg, ftype, env, f"{where}.{fname}")
        else:
            sorts = param_sorts.get(atom.pred)
            if sorts is None:
                continue
            for sort, arg in zip(sorts, atom.args):
                if sort is not None:
                    _term_sort_constraints(arg, sort, env, where)
    for c in conjuncts(d.pure):
        while isinstance(c, Not):
            c = c.inner
        if isinstance(c, Atom):
            if c.op == "<=":
                _term_sort_constraints(c.left, "int", env, where)
                _term_sort_constraints(c.right, "int", env, where)
            else:
                ls = _term_known_sort(c.left, env)
                rs = _term_known_sort(c.right, env)
                if ls is not None:
                    _term_sort_constraints(c.right, ls, env, where)
                elif rs is not None:
                    _term_sort_constraints(c.left, rs, env, where)


def infer_sorts(spec: SpecFile) -> dict[str, tuple[Sort | None, ...]]:
    """Infer parameter sorts for every predicate by fixpoint iteration."""
    param_sorts: dict[str, tuple[Sort | None, ...]] = {
        name: tuple(None for _ in p.params) for name, p in spec.preds.items()
    }
    for _ in range(len(spec.preds) + 2):
        changed = False
        for name, pred in spec.preds.items():
            env: dict[str, Sort] = {}
            for i, d in enumerate(pred.body.disjuncts):
                heap_sort_pass(d, spec, param_sorts, env, f"pred {name}[{i}]")
            new = tuple(env.get(p) or param_sorts[name][i]
                        for i, p in enumerate(pred.params))
            if new != param_sorts[name]:
                param_sorts[name] = new
                changed = True
        if not changed:
            break
    return param_sorts


def heap_sorts(d: SymbolicHeap, spec: SpecFile,
               seed: Mapping[str, Sort] | None = None) -> dict[str, Sort]:
    """Sorts for every variable of one heap. Unconstrained variables stay
    absent; solvers treat them as ints."""
    param_sorts = infer_sorts(spec)
    env: dict[str, Sort] = dict(seed or {})
    for _ in range(3):  # equalities may need a couple of passes to percolate
        heap_sort_pass(d, spec, param_sorts, env, "heap")
    return env
