"""Test-input generation and concrete validity checking.

Phase one of the pipeline: unfold the precondition a bounded number of
times, ask the solver for a model of each resulting heap, and build a
fully-initialized concrete input from each model. Inputs are heap graphs
plus scalar bindings; no field is ever left uninitialized, so emitted
tests run as-is.

The dual of generation lives here too: ``eval_pred`` decides whether a
concrete input satisfies an inductive predicate instance by exact
footprint matching (``emp`` demands emptiness, a points-to consumes one
object, ``*`` splits disjointly), and ``oracle_enumerate`` brute-forces
all small candidate inputs. Together they are the ground truth the
solver and the generator are tested against.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from . import formulas as F
from . import solver as S
from .formulas import (
    Add,
    ArithTerm,
    Atom,
    Const,
    Formula,
    Neg,
    Null,
    PointsTo,
    PredInst,
    Scale,
    SpecFile,
    SymbolicHeap,
    Var,
)
from .unfold import unfold_round

# =====================================================================
# Concrete values and heaps
# =====================================================================


@dataclass(frozen=True)
class Addr:
    ident: int
    type_name: str

    def __repr__(self) -> str:
        return f"@{self.type_name}{self.ident}"


Value = "int | bool | Addr | None"


@dataclass
class HeapObject:
    addr: Addr
    type_name: str
    fields: dict[str, object]


@dataclass
class TestInput:
    objects: dict[Addr, HeapObject]
    bindings: dict[str, object]
    provenance: str = ""

    def describe(self) -> str:
        objs = "; ".join(
            f"{addr!r}({', '.join(f'{k}={v!r}' for k, v in obj.fields.items())})"
            for addr, obj in self.objects.items())
        binds = ", ".join(f"{k}={v!r}" for k, v in self.bindings.items())
        return f"[{objs}] {binds}"


def default_value(type_name: str):
    if type_name == "int":
        return 0
    if type_name == "bool":
        return False
    return None


class ConstructionError(Exception):
    """The model could not be turned into an input; indicates a solver bug."""


# =====================================================================
# toUnitTest: symbolic model -> concrete input
# =====================================================================


def to_unit_test(m: S.SymbolicModel, entry_params: Sequence[tuple[str, str]],
                 defs: SpecFile, provenance: str = "") -> TestInput:
    """Three passes: allocate and bind direct resolutions, resolve alias
    equations (allocating a compatibly-typed object when a class has no
    initialized member), then wire every points-to's field slots. Objects
    not reachable from the entry bindings are dropped at the end: they
    describe solver-internal values, not part of the input."""
    env: dict[str, object] = {}
    store: dict[Addr, HeapObject] = {}
    next_id = itertools.count(1)

    # Pass 1: points-to heads, null bindings, scalar constants.
    for p in m.heap.points_tos():
        if p.var in env:
            raise ConstructionError(f"{p.var} heads two points-to atoms")
        addr = Addr(next(next_id), p.type_name)
        env[p.var] = addr
        store[addr] = HeapObject(addr, p.type_name, {})
    equalities: list[tuple[str, ArithTerm]] = []
    for c in F.conjuncts(m.heap.pure):
        if not (isinstance(c, Atom) and c.op == "=" and isinstance(c.left, Var)):
            raise ConstructionError(f"unexpected model conjunct {F.print_pure(c)}")
        v, t = c.left.name, c.right
        if isinstance(t, Null):
            env.setdefault(v, None)
        elif isinstance(t, Const):
            value = bool(t.value) if m.sorts.get(v) == "bool" else t.value
            if isinstance(value, int) and not isinstance(value, bool):
                if not (F.INT32_MIN <= value <= F.INT32_MAX):
                    raise ConstructionError(f"scalar {v}={value} outside 32-bit range")
            env.setdefault(v, value)
        else:
            equalities.append((v, t))

    # Pass 2: alias equations.
    changed = True
    while changed:
        changed = False
        for v, t in equalities:
            if not isinstance(t, Var):
                raise ConstructionError(f"non-variable alias for {v}")
            if v in env and t.name in env:
                if env[v] != env[t.name]:
                    raise ConstructionError(f"conflicting aliases for {v}")
            elif v in env:
                env[t.name] = env[v]
                changed = True
            elif t.name in env:
                env[v] = env[t.name]
                changed = True
    for v, t in equalities:
        if v in env:
            continue
        sort = m.sorts.get(v) or m.sorts.get(t.name)
        if sort == "nullref":
            sort = None
        if sort is None or sort in ("int", "bool"):
            raise ConstructionError(f"cannot pick a type for fresh object {v}")
        data = defs.datas[sort]
        addr = Addr(next(next_id), sort)
        store[addr] = HeapObject(addr, sort,
                                 {f: default_value(ft) for f, ft in data.fields})
        env[v] = addr
        env[t.name] = addr

    # Pass 3: field wiring.
    for p in m.heap.points_tos():
        data = defs.datas[p.type_name]
        obj = store[env[p.var]]
        for (fname, ftype), arg in zip(data.fields, p.args):
            value = _eval_ground(arg, env)
            if ftype == "bool" and isinstance(value, int) and not isinstance(value, bool):
                value = bool(value)
            obj.fields[fname] = value

    bindings = {}
    for name, ptype in entry_params:
        bindings[name] = env.get(name, default_value(ptype))

    reachable = _reachable(store, bindings.values())
    kept = {a: store[a] for a in store if a in reachable}
    return TestInput(kept, bindings, provenance)


def _eval_ground(term: ArithTerm, env: Mapping[str, object]):
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Null):
        return None
    if isinstance(term, Var):
        if term.name not in env:
            raise ConstructionError(f"model slot variable {term.name} unbound")
        return env[term.name]
    if isinstance(term, Neg):
        return -_eval_ground(term.term, env)
    if isinstance(term, Scale):
        return term.coeff * _eval_ground(term.term, env)
    if isinstance(term, Add):
        return _eval_ground(term.left, env) + _eval_ground(term.right, env)
    raise ConstructionError(f"bad slot term {term!r}")


def _reachable(store: Mapping[Addr, HeapObject], seeds: Iterable[object]) -> set[Addr]:
    seen: set[Addr] = set()
    work = [v for v in seeds if isinstance(v, Addr)]
    while work:
        addr = work.pop()
        if addr in seen or addr not in store:
            continue
        seen.add(addr)
        for value in store[addr].fields.values():
            if isinstance(value, Addr):
                work.append(value)
    return seen


# =====================================================================
# Concrete satisfaction: footprint-exact matching
# =====================================================================

_MISSING = object()


def _concrete_term(term: ArithTerm, env: Mapping[str, object]):
    """Evaluate a term; returns _MISSING when an unbound variable blocks it."""
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Null):
        return None
    if isinstance(term, Var):
        return env.get(term.name, _MISSING)
    if isinstance(term, (Neg, Scale)):
        inner = _concrete_term(term.term, env)
        if inner is _MISSING:
            return _MISSING
        if not isinstance(inner, int) or isinstance(inner, bool):
            return _MISSING if inner is None or isinstance(inner, Addr) else inner
        return -inner if isinstance(term, Neg) else term.coeff * inner
    if isinstance(term, Add):
        left = _concrete_term(term.left, env)
        right = _concrete_term(term.right, env)
        if left is _MISSING or right is _MISSING:
            return _MISSING
        if not isinstance(left, int) or not isinstance(right, int):
            return _MISSING
        return left + right
    return _MISSING


def _values_equal(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return (bool(a) if isinstance(a, (bool, int)) else a) == \
               (bool(b) if isinstance(b, (bool, int)) else b)
    return a == b


def _eval_pure_ground(pure, env: Mapping[str, object]) -> bool | None:
    """Three-valued: None when an unbound variable blocks evaluation."""
    if isinstance(pure, F.TruePure):
        return True
    if isinstance(pure, Atom):
        left = _concrete_term(pure.left, env)
        right = _concrete_term(pure.right, env)
        if left is _MISSING or right is _MISSING:
            return None
        if pure.op == "=":
            return _values_equal(left, right)
        if isinstance(left, Addr) or isinstance(right, Addr) or \
                left is None or right is None:
            return False
        return left <= right
    if isinstance(pure, F.Not):
        inner = _eval_pure_ground(pure.inner, env)
        return None if inner is None else not inner
    left = _eval_pure_ground(pure.left, env)
    right = _eval_pure_ground(pure.right, env)
    if left is False or right is False:
        return False
    if left is None or right is None:
        return None
    return True


def _int_candidates(store: Mapping[Addr, HeapObject], env: Mapping[str, object],
                    d: SymbolicHeap, defs: SpecFile) -> list[int]:
    pool: set[int] = {0}

    def add(v) -> None:
        if isinstance(v, int) and not isinstance(v, bool):
            pool.update((v - 1, v, v + 1))

    for obj in store.values():
        for value in obj.fields.values():
            add(value)
    for value in env.values():
        add(value)

    def scan_pure(p) -> None:
        if isinstance(p, Atom):
            for t in (p.left, p.right):
                for sub in _term_consts(t):
                    add(sub)
        elif isinstance(p, F.Not):
            scan_pure(p.inner)
        elif isinstance(p, F.And):
            scan_pure(p.left)
            scan_pure(p.right)

    scan_pure(d.pure)
    for pred in defs.preds.values():
        for disjunct in pred.body.disjuncts:
            scan_pure(disjunct.pure)
    return sorted(pool)


def _term_consts(term: ArithTerm) -> list[int]:
    if isinstance(term, Const):
        return [term.value]
    if isinstance(term, (Neg, Scale)):
        return _term_consts(term.term)
    if isinstance(term, Add):
        return _term_consts(term.left) + _term_consts(term.right)
    return []


def heap_satisfies(store: Mapping[Addr, HeapObject], env: Mapping[str, object],
                   d: SymbolicHeap, defs: SpecFile,
                   int_candidates: Sequence[int] | None = None) -> bool:
    """Does (store, env) satisfy ``d`` with the store as exact footprint?

    Variables of ``d`` missing from ``env`` (its existentials, plus any
    free variables the caller left out) are witnessed by bounded search:
    reference candidates are the store's addresses plus null, integer
    candidates default to the values present in the problem and their
    neighbours.
    """
    if int_candidates is None:
        int_candidates = _int_candidates(store, env, d, defs)
    counter = itertools.count()
    binders = {v: f"{v}#{next(counter)}" for v in d.exists}
    opened = SymbolicHeap((), F.subst_spatial(d.spatial, {v: Var(n) for v, n in binders.items()}),
                          F.subst_pure(d.pure, {v: Var(n) for v, n in binders.items()}))
    fp = frozenset(store.keys())
    limit = 2 * len(store) + 16
    for leftover, env2 in _match_atoms(opened.atoms(), 0, fp, dict(env), store,
                                       defs, counter, limit, list(int_candidates)):
        if leftover:
            continue
        for _ in _satisfy_pure(list(F.conjuncts(opened.pure)), env2, store,
                               list(int_candidates)):
            return True
    return False


def _match_atoms(atoms, i, fp, env, store, defs, counter, depth,
                 candidates) -> Iterator[tuple[frozenset, dict]]:
    if depth < 0:
        return
    if i == len(atoms):
        yield fp, env
        return
    atom = atoms[i]
    if isinstance(atom, PointsTo):
        head = env.get(atom.var, _MISSING)
        if head is _MISSING:
            choices = sorted((a for a in fp if a.type_name == atom.type_name),
                             key=lambda a: a.ident)
        elif isinstance(head, Addr):
            choices = [head]
        else:
            return
        data = defs.datas.get(atom.type_name)
        if data is None or len(data.fields) != len(atom.args):
            return
        for addr in choices:
            if addr not in fp or addr.type_name != atom.type_name:
                continue
            obj = store[addr]
            env2 = dict(env)
            env2.setdefault(atom.var, addr)
            ok = True
            for (fname, _), arg in zip(data.fields, atom.args):
                slot = obj.fields[fname]
                if isinstance(arg, Var) and arg.name not in env2:
                    env2[arg.name] = slot
                    continue
                got = _concrete_term(arg, env2)
                if got is _MISSING or not _values_equal(got, slot):
                    ok = False
                    break
            if ok:
                yield from _match_atoms(atoms, i + 1, fp - {addr}, env2, store,
                                        defs, counter, depth, candidates)
        return
    # Predicate instance: try each disjunct of the definition on a
    # sub-footprint, propagating bindings outward.
    pred = defs.preds.get(atom.pred)
    if pred is None or len(pred.params) != len(atom.args):
        return
    for disjunct in pred.body.disjuncts:
        renames = {v: Var(f"{v}#{next(counter)}") for v in disjunct.exists}
        body = SymbolicHeap((), F.subst_spatial(disjunct.spatial, renames),
                            F.subst_pure(disjunct.pure, renames))
        try:
            body = F.substitute(body, dict(zip(pred.params, atom.args)))
        except F.SubstitutionError:
            continue
        inner_atoms = body.atoms()
        for fp2, env2 in _match_atoms(inner_atoms, 0, fp, env, store, defs,
                                      counter, depth - 1, candidates):
            for env3 in _satisfy_pure(list(F.conjuncts(body.pure)), env2, store,
                                      candidates):
                yield from _match_atoms(atoms, i + 1, fp2, env3, store, defs,
                                        counter, depth, candidates)


def _satisfy_pure(parts, env, store, candidates) -> Iterator[dict]:
    """Check pure conjuncts, binding simple equalities and searching the
    candidate space for any variables that remain unknown."""
    env = dict(env)
    pending = list(parts)
    progress = True
    while progress:
        progress = False
        remaining = []
        for p in pending:
            value = _eval_pure_ground(p, env)
            if value is True:
                progress = True
                continue
            if value is False:
                return
            if isinstance(p, Atom) and p.op == "=":
                lv = _concrete_term(p.left, env)
                rv = _concrete_term(p.right, env)
                if lv is _MISSING and rv is not _MISSING and isinstance(p.left, Var):
                    env[p.left.name] = rv
                    progress = True
                    continue
                if rv is _MISSING and lv is not _MISSING and isinstance(p.right, Var):
                    env[p.right.name] = lv
                    progress = True
                    continue
            remaining.append(p)
        pending = remaining
    if not pending:
        yield env
        return
    unbound: list[str] = []
    for p in pending:
        for v in sorted(F.pure_vars(p)):
            if v not in env and v not in unbound:
                unbound.append(v)
    if not unbound:
        return  # ground but neither true nor false cannot happen
    addrs = sorted(store.keys(), key=lambda a: a.ident)
    options: list[object] = list(candidates) + [None] + list(addrs) + [True, False]
    var = unbound[0]
    for choice in options:
        env[var] = choice
        yield from _satisfy_pure(pending, env, store, candidates)
    del env[var]


def eval_pred(test: TestInput, inst: PredInst, defs: SpecFile,
              env: Mapping[str, object] | None = None) -> bool:
    """Does the whole input heap satisfy this predicate instance?

    Instance arguments are evaluated under the input's bindings (plus
    ``env`` overrides); argument variables without a binding are treated
    as existential ghosts.
    """
    scope = dict(test.bindings)
    if env:
        scope.update(env)
    d = SymbolicHeap((), inst, F.TRUE)
    return heap_satisfies(test.objects, scope, d, defs)


def input_satisfies(test: TestInput, formula: Formula, defs: SpecFile) -> bool:
    """Validity of an input against a precondition formula; precondition
    variables that are not entry parameters act as existential ghosts."""
    for d in formula.disjuncts:
        if heap_satisfies(test.objects, test.bindings, d, defs):
            return True
    return False


# =====================================================================
# genFromSpec: bounded unfolding, then solve and build
# =====================================================================


@dataclass
class GenStats:
    solver_calls: int = 0
    unknown_skipped: int = 0
    unsat_skipped: int = 0
    unfold_rounds: int = 0
    pure_nodes: int = 0


def gen_from_spec(g: Sequence[SymbolicHeap], n: int, defs: SpecFile,
                  entry_params: Sequence[tuple[str, str]],
                  budget: S.Budget | None = None,
                  stats: GenStats | None = None,
                  _depth0: int | None = None) -> list[TestInput]:
    """Generate inputs from a heap set: unfold ``n`` rounds (base heaps
    carry forward), then emit one input per satisfiable heap."""
    if not g:
        raise ValueError("the initial heap set must be nonempty")
    budget = budget or S.Budget()
    stats = stats if stats is not None else GenStats()
    total = n if _depth0 is None else _depth0
    if n == 0:
        tests: list[TestInput] = []
        for i, d in enumerate(g):
            result = S.sat(d, defs, budget)
            stats.solver_calls += 1
            stats.unfold_rounds += result.stats.rounds
            stats.pure_nodes += result.stats.pure_nodes
            if result.is_sat:
                tests.append(to_unit_test(result.model, entry_params, defs,
                                          provenance=f"spec:d{total}:h{i}"))
            elif result.decision == "unknown":
                stats.unknown_skipped += 1
            else:
                stats.unsat_skipped += 1
        return tests
    return gen_from_spec(unfold_round(list(g), defs), n - 1, defs, entry_params,
                         budget, stats, total)


# =====================================================================
# Brute-force oracle
# =====================================================================


class OracleBudgetError(Exception):
    pass


def _relevant_types(defs: SpecFile, seeds: Iterable[str]) -> list[str]:
    out: list[str] = []
    work = [t for t in seeds if t in defs.datas]
    while work:
        t = work.pop(0)
        if t in out:
            continue
        out.append(t)
        for _, ftype in defs.datas[t].fields:
            if ftype in defs.datas:
                work.append(ftype)
    return out


def _enum_stores(defs: SpecFile, root_sorts: Sequence[str], max_objects: int,
                 scalar_domain: Sequence[int]) -> Iterator[tuple[dict, list]]:
    """All connected stores grown from the given roots, with scalar fields
    over the domain. Yields (store, root value per root sort)."""

    def ref_slots(shape: list[str]) -> list[tuple[int, str, str]]:
        out = []
        for i, t in enumerate(shape):
            for fname, ftype in defs.datas[t].fields:
                if ftype in defs.datas:
                    out.append((i, fname, ftype))
        return out

    def grow(shape: list[str], wiring: dict, pending: list, roots: list,
             root_idx: int) -> Iterator[tuple[list[str], dict, list]]:
        if root_idx < len(root_sorts):
            sort = root_sorts[root_idx]
            yield from grow(shape, {**wiring}, list(pending), roots + [None], root_idx + 1)
            for i, t in enumerate(shape):
                if t == sort:
                    yield from grow(shape, {**wiring}, list(pending),
                                    roots + [i], root_idx + 1)
            if len(shape) < max_objects:
                new_idx = len(shape)
                shape2 = shape + [sort]
                pend2 = pending + [(new_idx, f, ft)
                                   for f, ft in defs.datas[sort].fields
                                   if ft in defs.datas]
                yield from grow(shape2, {**wiring}, pend2, roots + [new_idx],
                                root_idx + 1)
            return
        if not pending:
            yield shape, wiring, roots
            return
        (obj, fname, ftype), rest = pending[0], pending[1:]
        yield from grow(shape, {**wiring, (obj, fname): None}, rest, roots, root_idx)
        for i, t in enumerate(shape):
            if t == ftype:
                yield from grow(shape, {**wiring, (obj, fname): i}, rest, roots, root_idx)
        if len(shape) < max_objects:
            new_idx = len(shape)
            shape2 = shape + [ftype]
            pend2 = rest + [(new_idx, f, ft) for f, ft in defs.datas[ftype].fields
                            if ft in defs.datas]
            yield from grow(shape2, {**wiring, (obj, fname): new_idx}, pend2,
                            roots, root_idx)

    for shape, wiring, roots in grow([], {}, [], [], 0):
        scalar_slots = [(i, fname, ftype) for i, t in enumerate(shape)
                        for fname, ftype in defs.datas[t].fields
                        if ftype in ("int", "bool")]
        domains = [([False, True] if ftype == "bool" else list(scalar_domain))
                   for _, _, ftype in scalar_slots]
        for combo in itertools.product(*domains):
            addrs = [Addr(i + 1, t) for i, t in enumerate(shape)]
            store: dict[Addr, HeapObject] = {}
            for i, t in enumerate(shape):
                fields: dict[str, object] = {}
                for fname, ftype in defs.datas[t].fields:
                    if ftype in defs.datas:
                        tgt = wiring[(i, fname)]
                        fields[fname] = None if tgt is None else addrs[tgt]
                for (j, fname, _), value in zip(scalar_slots, combo):
                    if j == i:
                        fields[fname] = value
                store[addrs[i]] = HeapObject(addrs[i], t, fields)
            yield store, [None if r is None else addrs[r] for r in roots]


def oracle_enumerate(defs: SpecFile, inst: PredInst, max_objects: int,
                     scalar_domain: Sequence[int]) -> list[TestInput]:
    """Exhaustively enumerate inputs (connected stores rooted at the
    instance's reference arguments) that satisfy the instance. Scalar
    arguments of the instance act as existential ghosts."""
    if max_objects > 4:
        raise OracleBudgetError("oracle limited to at most 4 objects")
    sorts = F.infer_sorts(defs).get(inst.pred)
    if sorts is None:
        raise KeyError(inst.pred)
    ref_args = [(i, a.name) for i, (a, s) in enumerate(zip(inst.args, sorts))
                if isinstance(a, Var) and s in defs.datas]
    out: list[TestInput] = []
    for store, roots in _enum_stores(defs, [sorts[i] for i, _ in ref_args],
                                     max_objects, scalar_domain):
        env = {name: roots[k] for k, (_, name) in enumerate(ref_args)}
        d = SymbolicHeap((), inst, F.TRUE)
        if heap_satisfies(store, env, d, defs, int_candidates=list(scalar_domain)):
            out.append(TestInput(store, dict(env), provenance="oracle"))
    return out


def oracle_sat(d: SymbolicHeap, defs: SpecFile, max_objects: int,
               scalar_domain: Sequence[int]) -> bool:
    """Existence of a concrete model of ``d`` within the given bounds."""
    if max_objects > 4:
        raise OracleBudgetError("oracle limited to at most 4 objects")
    sorts = F.heap_sorts(d, defs)
    free = sorted(F.free_vars(d))
    ref_vars = [v for v in free if sorts.get(v) in defs.datas]
    seed_types = [sorts[v] for v in ref_vars]
    for atom in d.atoms():
        if isinstance(atom, PointsTo):
            seed_types.append(atom.type_name)
    types = _relevant_types(defs, seed_types)
    if not types and not d.points_tos():
        return heap_satisfies({}, {}, d, defs, int_candidates=list(scalar_domain))
    for store, roots in _enum_stores(defs, [sorts[v] for v in ref_vars],
                                     max_objects, scalar_domain):
        env = dict(zip(ref_vars, roots))
        if heap_satisfies(store, env, d, defs, int_candidates=list(scalar_domain)):
            return True
    return False


# =====================================================================
# Random-scalar baseline
# =====================================================================


def random_baseline(entry_params: Sequence[tuple[str, str]], count: int,
                    int_min: int = -64, int_max: int = 63,
                    seed: int = 0) -> list[TestInput]:
    """Reference-typed parameters stay null; scalars are drawn uniformly.
    The weak baseline spec-driven generation is compared against."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        bindings: dict[str, object] = {}
        for name, ptype in entry_params:
            if ptype == "int":
                bindings[name] = rng.randint(int_min, int_max)
            elif ptype == "bool":
                bindings[name] = rng.random() < 0.5
            else:
                bindings[name] = None
        out.append(TestInput({}, bindings, provenance=f"baseline:{i}"))
    return out
