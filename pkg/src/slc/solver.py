"""Bounded satisfiability for symbolic heaps, with model extraction.

``sat`` runs an iterative-deepening search: predicate instances are
unfolded breadth-first up to a depth budget, and every fully-base heap
reached is closed by a two-sorted ground solver. Location variables are
solved by union-find over the equalities plus disequality checking, with
each equivalence class mapped to null or a distinct abstract address;
integer variables are solved by interval propagation followed by
backtracking search over a finite domain.

The solver trades the completeness of a full decision procedure for
bounded search: outside its budgets it answers UNKNOWN, which for a test
generator costs missed tests but never invalid ones. An UNSAT that was
only established by exhausting the integer domain is flagged ``bounded``
in the statistics so drivers can tell it apart in logs.

Every SAT answer carries a symbolic model: a quantifier-free base heap in
which each reference variable is resolved by a points-to atom, an alias
equation, or ``= null``, and each scalar variable by an integer or boolean
constant. ``model_check`` independently re-evaluates the queried formula
on the concretized model and is the soundness oracle for ``sat``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import formulas as F
from .formulas import (
    Add,
    ArithTerm,
    Atom,
    Const,
    Neg,
    Not,
    Null,
    PointsTo,
    PureFormula,
    Scale,
    SpecFile,
    SymbolicHeap,
    Var,
)
from .unfold import unfold_at

CONTRADICTION = "contradiction"

_SCALARS = ("int", "bool")


@dataclass
class Budget:
    max_depth: int = 6
    time_limit: float = 10.0
    int_min: int = -64
    int_max: int = 63


@dataclass
class SolverStats:
    rounds: int = 0
    pure_nodes: int = 0
    heaps: int = 0
    bounded: bool = False


@dataclass
class SymbolicModel:
    """SAT witness: a base heap binding every variable to a symbolic value."""

    heap: SymbolicHeap
    sorts: dict[str, str] = field(default_factory=dict)

    def __str__(self) -> str:
        return F.print_heap(self.heap)


@dataclass
class SatResult:
    decision: str  # 'sat' | 'unsat' | 'unknown'
    model: SymbolicModel | None
    stats: SolverStats

    @property
    def is_sat(self) -> bool:
        return self.decision == "sat"


# =====================================================================
# Literals: negation-normal ground atoms
# =====================================================================


@dataclass(frozen=True)
class Lit:
    op: str  # 'eq' | 'le' | 'ne'
    left: ArithTerm
    right: ArithTerm


class _FalseCube(Exception):
    pass


def _nnf_cubes(pure: PureFormula, positive: bool = True) -> list[list[Lit]]:
    """Disjunctive normal form as a list of literal cubes."""
    if isinstance(pure, F.TruePure):
        return [[]] if positive else []
    if isinstance(pure, Atom):
        if positive:
            return [[Lit("eq" if pure.op == "=" else "le", pure.left, pure.right)]]
        if pure.op == "=":
            return [[Lit("ne", pure.left, pure.right)]]
        # not (a <= b)  <=>  b + 1 <= a   (integer comparison only)
        return [[Lit("le", Add(pure.right, Const(1)), pure.left)]]
    if isinstance(pure, Not):
        return _nnf_cubes(pure.inner, not positive)
    if isinstance(pure, F.And):
        left = _nnf_cubes(pure.left, positive)
        right = _nnf_cubes(pure.right, positive)
        if positive:
            return [lc + rc for lc in left for rc in right]
        return left + right
    raise TypeError(f"not a pure formula: {pure!r}")


def _term_is_loc(term: ArithTerm, sorts: dict[str, str]) -> bool | None:
    if isinstance(term, Null):
        return True
    if isinstance(term, (Const, Scale, Add, Neg)):
        return False
    sort = sorts.get(term.name)
    if sort is None:
        return None
    return sort not in _SCALARS


def _split_cube(cube: list[Lit], sorts: dict[str, str]) -> tuple[list[Lit], list[Lit]]:
    locs: list[Lit] = []
    ints: list[Lit] = []
    for lit in cube:
        lk = _term_is_loc(lit.left, sorts)
        rk = _term_is_loc(lit.right, sorts)
        if lk is None:
            lk = rk
        if rk is None:
            rk = lk
        if lk or rk:
            if lit.op == "le" or not (isinstance(lit.left, (Var, Null))
                                      and isinstance(lit.right, (Var, Null))):
                raise F.SortError("arithmetic over reference values")
            locs.append(lit)
        else:
            ints.append(lit)
    return locs, ints


# =====================================================================
# Location solving: union-find + disequalities
# =====================================================================

_NULL_KEY = "\x00null"


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def add(self, x: str) -> None:
        self.parent.setdefault(x, x)

    def find(self, x: str) -> str:
        self.add(x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Deterministic: keep the earlier-added name as representative.
            order = list(self.parent)
            if order.index(ra) <= order.index(rb):
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def _loc_key(term: ArithTerm) -> str:
    return _NULL_KEY if isinstance(term, Null) else term.name


@dataclass
class LocSolution:
    rep: dict[str, str]              # variable -> class representative
    null_reps: set[str]              # representatives assigned null
    addr_reps: list[str]             # representatives assigned distinct addresses


def _solve_locs(lits: list[Lit], universe: list[str]) -> LocSolution | None:
    uf = _UnionFind()
    uf.add(_NULL_KEY)
    for v in universe:
        uf.add(v)
    diseqs: list[tuple[str, str]] = []
    for lit in lits:
        a, b = _loc_key(lit.left), _loc_key(lit.right)
        if lit.op == "eq":
            uf.union(a, b)
        else:
            diseqs.append((a, b))
    for a, b in diseqs:
        if uf.find(a) == uf.find(b):
            return None
    null_rep = uf.find(_NULL_KEY)
    # Prefer null for every class, falling back to a fresh address when a
    # disequality with null or with an already-null class forbids it.
    reps: list[str] = []
    for name in uf.parent:
        r = uf.find(name)
        if r not in reps:
            reps.append(r)
    null_reps = {null_rep}
    addr_reps: list[str] = []
    diseq_reps = [(uf.find(a), uf.find(b)) for a, b in diseqs]
    for r in reps:
        if r == null_rep:
            continue
        conflict = any((x == r and y in null_reps) or (y == r and x in null_reps)
                       for x, y in diseq_reps)
        if conflict:
            addr_reps.append(r)
        else:
            null_reps.add(r)
    rep = {v: uf.find(v) for v in universe}
    return LocSolution(rep, null_reps, addr_reps)


# =====================================================================
# Integer solving: interval propagation + backtracking
# =====================================================================


@dataclass(frozen=True)
class _Lin:
    """Normalized literal: sum of coeff*var plus const, related to zero."""

    coeffs: tuple[tuple[str, int], ...]
    const: int
    rel: str  # 'le' | 'eq' | 'ne'


def _linearize(term: ArithTerm, sign: int, coeffs: dict[str, int]) -> int:
    if isinstance(term, Const):
        return sign * term.value
    if isinstance(term, Var):
        coeffs[term.name] = coeffs.get(term.name, 0) + sign
        return 0
    if isinstance(term, Neg):
        return _linearize(term.term, -sign, coeffs)
    if isinstance(term, Add):
        return _linearize(term.left, sign, coeffs) + _linearize(term.right, sign, coeffs)
    if isinstance(term, Scale):
        inner: dict[str, int] = {}
        const = _linearize(term.term, sign * term.coeff, inner)
        for v, k in inner.items():
            coeffs[v] = coeffs.get(v, 0) + k
        return const
    raise F.SortError("null inside an arithmetic constraint")


def _lin_of(lit: Lit) -> _Lin:
    coeffs: dict[str, int] = {}
    const = _linearize(lit.left, 1, coeffs)
    const += _linearize(lit.right, -1, coeffs)
    coeffs = {v: k for v, k in coeffs.items() if k != 0}
    return _Lin(tuple(sorted(coeffs.items())), const, lit.op)


_INF = None


def _propagate(lins: list[_Lin], bounds: dict[str, list]) -> bool:
    """Tighten variable intervals; False on a proven empty interval."""
    for _ in range(4 * max(1, len(bounds)) + 8):
        changed = False
        for lin in lins:
            if lin.rel == "ne":
                continue
            rels = [1] if lin.rel == "le" else [1, -1]
            for direction in rels:
                # direction * (sum + const) <= 0
                for v, k in lin.coeffs:
                    kk = direction * k
                    rest = direction * lin.const
                    infinite = False
                    for w, kw in lin.coeffs:
                        if w == v:
                            continue
                        kkw = direction * kw
                        lo, hi = bounds[w]
                        b = lo if kkw > 0 else hi
                        if b is _INF:
                            infinite = True
                            break
                        rest += kkw * b
                    if infinite:
                        continue
                    lo, hi = bounds[v]
                    if kk > 0:
                        limit = -rest // kk  # v <= floor(-rest / kk)
                        if hi is _INF or limit < hi:
                            bounds[v][1] = limit
                            changed = True
                    else:
                        limit = -((-rest) // (-kk))  # v >= ceil(rest / -kk)
                        if lo is _INF or limit > lo:
                            bounds[v][0] = limit
                            changed = True
            if not lin.coeffs:
                value = lin.const
                if lin.rel == "le" and value > 0:
                    return False
                if lin.rel == "eq" and value != 0:
                    return False
                if lin.rel == "ne" and value == 0:
                    return False
        for lo, hi in bounds.values():
            if lo is not _INF and hi is not _INF and lo > hi:
                return False
        if not changed:
            return True
    return True


def _lin_value(lin: _Lin, assign: dict[str, int]) -> int | None:
    total = lin.const
    for v, k in lin.coeffs:
        if v not in assign:
            return None
        total += k * assign[v]
    return total


def _lit_holds(lin: _Lin, value: int) -> bool:
    if lin.rel == "le":
        return value <= 0
    if lin.rel == "eq":
        return value == 0
    return value != 0


def _value_order(lo: int, hi: int) -> list[int]:
    return sorted(range(lo, hi + 1), key=lambda v: (abs(v), v > 0))


@dataclass
class IntSolution:
    values: dict[str, int]


def _solve_ints(lins: list[_Lin], order: list[str], is_bool: set[str],
                budget: Budget, stats: SolverStats) -> tuple[IntSolution | None, bool]:
    """Returns (solution, proven_without_domain). The flag is True when an
    UNSAT answer holds independent of the finite domain bound."""
    bounds = {v: [_INF, _INF] for v in order}
    if not _propagate(lins, bounds):
        return None, True
    for v in order:
        lo, hi = bounds[v]
        dlo, dhi = (0, 1) if v in is_bool else (budget.int_min, budget.int_max)
        bounds[v] = [dlo if lo is _INF else max(lo, dlo),
                     dhi if hi is _INF else min(hi, dhi)]

    def search(assign: dict[str, int], bnds: dict[str, list]) -> dict[str, int] | None:
        stats.pure_nodes += 1
        if len(assign) == len(order):
            return dict(assign)
        v = order[len(assign)]
        lo, hi = bnds[v]
        if lo > hi:
            return None
        for value in _value_order(lo, hi):
            assign[v] = value
            ok = True
            for lin in lins:
                got = _lin_value(lin, assign)
                if got is not None and not _lit_holds(lin, got):
                    ok = False
                    break
            if ok:
                nxt = {w: list(b) for w, b in bnds.items()}
                nxt[v] = [value, value]
                if _propagate(lins, nxt):
                    found = search(assign, nxt)
                    if found is not None:
                        return found
            del assign[v]
        return None

    found = search({}, bounds)
    if found is not None:
        return IntSolution(found), False
    return None, False


# =====================================================================
# Saturation: separation semantics as pure facts
# =====================================================================


def saturate(d: SymbolicHeap) -> list[PureFormula] | str:
    """Disequalities implied by the separating conjunction of a base heap.

    Adds ``x != null`` for every points-to head and ``x != y`` for every
    pair of distinct points-to atoms; returns CONTRADICTION when those
    facts clash with the equalities already present.
    """
    if d.instances():
        raise ValueError("saturate expects a base heap")
    return _saturate_points_tos(d.points_tos(), d.pure)


def _saturate_points_tos(pts: list[PointsTo], pure: PureFormula) -> list[PureFormula] | str:
    uf = _UnionFind()
    uf.add(_NULL_KEY)
    for c in F.conjuncts(pure):
        if isinstance(c, Atom) and c.op == "=":
            if isinstance(c.left, (Var, Null)) and isinstance(c.right, (Var, Null)):
                uf.union(_loc_key(c.left), _loc_key(c.right))
    heads = [p.var for p in pts]
    for h in heads:
        if uf.find(h) == uf.find(_NULL_KEY):
            return CONTRADICTION
    for i, a in enumerate(heads):
        for b in heads[i + 1:]:
            if uf.find(a) == uf.find(b):
                return CONTRADICTION
    additions: list[PureFormula] = []
    for h in heads:
        additions.append(Not(Atom("=", Var(h), Null())))
    for i, a in enumerate(heads):
        for b in heads[i + 1:]:
            additions.append(Not(Atom("=", Var(a), Var(b))))
    return additions


# =====================================================================
# Pure solving
# =====================================================================


@dataclass
class PureSolution:
    scalars: dict[str, int | bool]
    locs: LocSolution


def _cube_vars(cube: list[Lit]) -> list[str]:
    order: list[str] = []
    for lit in cube:
        for term in (lit.left, lit.right):
            for v in _term_var_order(term):
                if v not in order:
                    order.append(v)
    return order


def _term_var_order(term: ArithTerm) -> list[str]:
    if isinstance(term, Var):
        return [term.name]
    if isinstance(term, Scale):
        return _term_var_order(term.term)
    if isinstance(term, Neg):
        return _term_var_order(term.term)
    if isinstance(term, Add):
        return _term_var_order(term.left) + _term_var_order(term.right)
    return []


def pure_solve(pure_or_cube, sorts: dict[str, str], budget: Budget | None = None,
               universe: list[str] | None = None,
               stats: SolverStats | None = None) -> tuple[PureSolution | None, bool]:
    """Solve one conjunction of literals.

    Returns ``(solution, domain_independent)``: on success the second
    component is meaningless; on failure it reports whether unsatisfiability
    was proven without appealing to the finite integer domain.
    """
    budget = budget or Budget()
    stats = stats if stats is not None else SolverStats()
    if isinstance(pure_or_cube, list):
        cube = pure_or_cube
    else:
        cubes = _nnf_cubes(pure_or_cube)
        if not cubes:
            return None, True
        if len(cubes) != 1:
            raise ValueError("pure_solve expects a single conjunction; see sat()")
        cube = cubes[0]
    try:
        locs, ints = _split_cube(cube, sorts)
    except F.SortError:
        return None, True

    # The caller-supplied order (syntactic first-occurrence in the heap)
    # leads; literal NNF order only covers variables missing from it.
    var_order = list(universe or [])
    for v in _cube_vars(cube):
        if v not in var_order:
            var_order.append(v)
    loc_vars = [v for v in var_order
                if sorts.get(v) is not None and sorts[v] not in _SCALARS]
    int_vars = [v for v in var_order if v not in loc_vars]

    loc_solution = _solve_locs(locs, loc_vars)
    if loc_solution is None:
        return None, True

    lins = [_lin_of(l) for l in ints]
    int_solution, independent = _solve_ints(lins, int_vars,
                                            {v for v in int_vars
                                             if sorts.get(v) == "bool"},
                                            budget, stats)
    if int_solution is None:
        return None, independent
    scalars: dict[str, int | bool] = {}
    for v in int_vars:
        value = int_solution.values[v]
        scalars[v] = bool(value) if sorts.get(v) == "bool" else value
    return PureSolution(scalars, loc_solution), False


# =====================================================================
# Syntactic equality entailment
# =====================================================================


def entails_eq(d: SymbolicHeap, v1: str, v2: str | None) -> bool:
    """True iff the equalities present in ``d``'s pure part place ``v1``
    and ``v2`` (or null, when ``v2`` is None) in one alias class."""
    uf = _UnionFind()
    uf.add(_NULL_KEY)
    uf.add(v1)
    for c in F.conjuncts(d.pure):
        if isinstance(c, Atom) and c.op == "=":
            if isinstance(c.left, (Var, Null)) and isinstance(c.right, (Var, Null)):
                uf.union(_loc_key(c.left), _loc_key(c.right))
    target = _NULL_KEY if v2 is None else v2
    uf.add(target)
    return uf.find(v1) == uf.find(target)


# =====================================================================
# sat: iterative-deepening satisfiability
# =====================================================================


def _open_heap(d: SymbolicHeap) -> SymbolicHeap:
    """Drop the existential binder, renaming on collision with free names."""
    if not d.exists:
        return d
    free = F.free_vars(d)
    renames = {v: Var(F.fresh_var(v)) for v in d.exists if v in free}
    if renames:
        d = SymbolicHeap(tuple(renames.get(v, Var(v)).name for v in d.exists),
                         F.subst_spatial(d.spatial, renames),
                         F.subst_pure(d.pure, renames))
    return SymbolicHeap((), d.spatial, d.pure)


def _try_base(d: SymbolicHeap, defs: SpecFile, budget: Budget,
              stats: SolverStats, extra_sorts: dict[str, str],
              universe_hint: list[str]) -> tuple[PureSolution | None, SymbolicHeap | None, bool]:
    """Solve one base heap. Returns (solution, opened heap, bounded_flag)."""
    opened = _open_heap(d)
    additions = saturate(opened)
    if additions == CONTRADICTION:
        return None, None, False
    sorts = F.heap_sorts(opened, defs, seed=extra_sorts)
    pure = F.conj([opened.pure, *additions])
    cubes = _nnf_cubes(pure)
    order = _heap_var_order(opened)
    for v in universe_hint:
        if v not in order:
            order.append(v)
    bounded = False
    for cube in cubes:
        solution, independent = pure_solve(cube, sorts, budget, order, stats)
        if solution is not None:
            return solution, opened, False
        if not independent:
            bounded = True
    return None, None, bounded


def _heap_var_order(d: SymbolicHeap) -> list[str]:
    order: list[str] = []

    def add_term(t: ArithTerm) -> None:
        for v in _term_var_order(t):
            if v not in order:
                order.append(v)

    for c in F.conjuncts(d.pure):
        stack = [c]
        while stack:
            p = stack.pop()
            if isinstance(p, Atom):
                add_term(p.left)
                add_term(p.right)
            elif isinstance(p, Not):
                stack.append(p.inner)
            elif isinstance(p, F.And):
                stack.append(p.right)
                stack.append(p.left)
    for atom in d.atoms():
        if isinstance(atom, PointsTo):
            add_term(Var(atom.var))
        for a in atom.args:
            add_term(a)
    return order


def _pure_contradictory(d: SymbolicHeap, defs: SpecFile, budget: Budget,
                        stats: SolverStats) -> bool:
    """Domain-independent contradiction check for a frontier heap."""
    additions = _saturate_points_tos(d.points_tos(), d.pure)
    if additions == CONTRADICTION:
        return True
    opened = _open_heap(d)
    sorts = F.heap_sorts(opened, defs)
    pure = F.conj([opened.pure, *additions])
    for cube in _nnf_cubes(pure):
        solution, independent = pure_solve(cube, sorts, budget, None, stats)
        if solution is not None or not independent:
            return False
    return True


def _assemble_model(opened: SymbolicHeap, solution: PureSolution,
                    sorts: dict[str, str], universe: list[str]) -> SymbolicModel:
    pts = opened.points_tos()
    head_of_rep: dict[str, str] = {}
    for p in pts:
        head_of_rep.setdefault(solution.locs.rep.get(p.var, p.var), p.var)
    parts: list[PureFormula] = []
    for v in universe:
        if v in solution.scalars:
            value = solution.scalars[v]
            parts.append(Atom("=", Var(v), Const(int(value))))
            continue
        rep = solution.locs.rep.get(v)
        if rep is None:
            continue
        if rep in solution.locs.null_reps:
            parts.append(Atom("=", Var(v), Null()))
        elif rep in head_of_rep and head_of_rep[rep] != v:
            parts.append(Atom("=", Var(v), Var(head_of_rep[rep])))
        elif rep not in head_of_rep:
            # Non-null class with no points-to: a fresh compatibly-typed
            # object; recorded as a self-alias for the input builder.
            parts.append(Atom("=", Var(v), Var(v)))
    heap = SymbolicHeap((), F.sep(pts), F.conj(parts))
    return SymbolicModel(heap, dict(sorts))


def sat(d: SymbolicHeap, defs: SpecFile, budget: Budget | None = None) -> SatResult:
    """Satisfiability of one symbolic heap under the given budget.

    Search strategy: iterative deepening where each round replaces the
    first remaining predicate instance of every frontier heap by its
    definition disjuncts (base cases first, so small models surface
    first). Expanding instances one at a time reaches every combination
    of disjunct choices without the duplication that expanding all
    instances per round would create; heaps whose pure part is already
    contradictory are dropped early.
    """
    budget = budget or Budget()
    stats = SolverStats()
    deadline = time.monotonic() + budget.time_limit
    opened_query = _open_heap(d)
    universe = _heap_var_order(opened_query)
    query_sorts = F.heap_sorts(opened_query, defs)
    current = [d]
    for round_no in range(budget.max_depth + 1):
        stats.rounds = round_no
        bases = [h for h in current if h.is_base()]
        inductive = [h for h in current if not h.is_base()]
        for h in bases:
            stats.heaps += 1
            if time.monotonic() > deadline:
                return SatResult("unknown", None, stats)
            solution, opened, bounded = _try_base(h, defs, budget, stats,
                                                  query_sorts, universe)
            if solution is not None:
                sorts = F.heap_sorts(opened, defs, seed=query_sorts)
                order = _heap_var_order(opened)
                for v in universe:
                    if v not in order:
                        order.append(v)
                model = _assemble_model(opened, solution, sorts, order)
                return SatResult("sat", model, stats)
            stats.bounded = stats.bounded or bounded
        if not inductive:
            return SatResult("unsat", None, stats)
        if round_no == budget.max_depth:
            for h in inductive:
                if time.monotonic() > deadline:
                    return SatResult("unknown", None, stats)
                if not _pure_contradictory(h, defs, budget, stats):
                    return SatResult("unknown", None, stats)
            return SatResult("unsat", None, stats)
        nxt: list[SymbolicHeap] = []
        for h in inductive:
            if time.monotonic() > deadline:
                return SatResult("unknown", None, stats)
            first = next(i for i, a in enumerate(h.atoms())
                         if isinstance(a, F.PredInst))
            for child in unfold_at(h, first, defs):
                if not _pure_contradictory(child, defs, budget, stats):
                    nxt.append(child)
        current = F.dedup_heaps(nxt)
        if not current:
            return SatResult("unsat", None, stats)
    return SatResult("unknown", None, stats)


# =====================================================================
# Model checking (independent soundness oracle)
# =====================================================================


def model_check(m, d: SymbolicHeap, defs: SpecFile, store=None, env=None) -> bool:
    """Concretize a model and evaluate ``d`` on it under concrete semantics.

    ``m`` may be a SymbolicModel (concretized here) or a plain valuation
    dict, in which case ``store`` supplies the heap. Existentials of ``d``
    are witnessed by bounded search over the model's objects and scalars.
    """
    from . import testgen

    if isinstance(m, SymbolicModel):
        store, env = concretize_model(m, defs)
    else:
        env = dict(m)
        store = store or {}
    return testgen.heap_satisfies(store, env, d, defs)


class ModelError(Exception):
    pass


def concretize_model(m: SymbolicModel, defs: SpecFile):
    """Direct reading of a symbolic model as (store, environment)."""
    from .testgen import Addr, HeapObject

    store: dict = {}
    env: dict = {}
    next_id = 1
    for p in m.heap.points_tos():
        addr = Addr(next_id, p.type_name)
        next_id += 1
        env[p.var] = addr
        store[addr] = HeapObject(addr, p.type_name, {})
    equalities: list[tuple[str, ArithTerm]] = []
    for c in F.conjuncts(m.heap.pure):
        if not (isinstance(c, Atom) and c.op == "=" and isinstance(c.left, Var)):
            raise ModelError(f"model pure part is not a binding: {F.print_pure(c)}")
        equalities.append((c.left.name, c.right))
    for v, t in equalities:
        if isinstance(t, Const):
            env[v] = bool(t.value) if m.sorts.get(v) == "bool" else t.value
        elif isinstance(t, Null):
            env[v] = None
    changed = True
    while changed:
        changed = False
        for v, t in equalities:
            if v in env or not isinstance(t, Var):
                continue
            if t.name == v:
                # Headless non-null class: a dangling pointer, denoting an
                # address outside the footprint. (The input builder instead
                # materializes an object, to keep tests executable.)
                env[v] = Addr(next_id, "<external>")
                next_id += 1
                changed = True
            elif t.name in env:
                env[v] = env[t.name]
                changed = True
    for p in m.heap.points_tos():
        data = defs.datas[p.type_name]
        obj = store[env[p.var]]
        for (fname, ftype), arg in zip(data.fields, p.args):
            value = _eval_model_term(arg, env)
            if ftype == "bool" and isinstance(value, int) and not isinstance(value, bool):
                value = bool(value)
            obj.fields[fname] = value
    return store, env


def _eval_model_term(term: ArithTerm, env: dict):
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Null):
        return None
    if isinstance(term, Var):
        if term.name not in env:
            raise ModelError(f"model leaves {term.name} unbound")
        return env[term.name]
    if isinstance(term, Neg):
        return -_eval_model_term(term.term, env)
    if isinstance(term, Scale):
        return term.coeff * _eval_model_term(term.term, env)
    if isinstance(term, Add):
        return _eval_model_term(term.left, env) + _eval_model_term(term.right, env)
    raise ModelError(f"unexpected model term {term!r}")
