"""Concolic execution: concrete runs that grow a constraint tree.

Each tree node is a concolic state: statement table, path condition,
program counter, an explored flag, and the current statement; the stack
(the concrete valuation) lives only on the path being executed. The root
carries the precondition. Straight-line statements extend the current
path; a conditional creates both children, conjoining the condition to
the then-child and its negation to the else-child, and the concretely
taken side is flagged explored.

Path conditions keep field reads (``v.f``) and field assignments
(``v.f := e``) in their raw form; ``preprocess`` eliminates them before
solving by mapping points-to slots to their symbolic names, discarding
branches whose base pointer is entailed null, and unfolding an inductive
predicate when the pointer is only constrained by one, recursing over the
results. The output heaps under-approximate the input condition, so any
model of one drives execution down the intended path.

``explore`` repeatedly picks the shallowest unexplored node, preprocesses
its path condition, solves, builds a new input from the model, and runs
it, which flips the node's flag; unsatisfiable nodes are pruned and
unknown ones parked permanently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dfield
from typing import Callable, Sequence, Union

from . import formulas as F
from . import ir
from . import solver as S
from . import testgen as T
from .formulas import (
    Add,
    ArithTerm,
    Atom,
    Const,
    Neg,
    Not,
    Null,
    PointsTo,
    PredInst,
    PureFormula,
    Scale,
    SpecFile,
    SymbolicHeap,
    Var,
)
from .ir import (
    EBin,
    EConst,
    EField,
    ENull,
    EUn,
    EVar,
    ElabProgram,
    Expr,
    SAssert,
    SAssign,
    SCall,
    SCond,
    SFree,
    SGoto,
    SNew,
    SStore,
    wrap32,
)
from .testgen import Addr, TestInput
from .unfold import unfold_at

# =====================================================================
# Run outcomes
# =====================================================================


@dataclass(frozen=True)
class RunOutcome:
    kind: str  # 'ok' | 'assertion' | 'error' | 'budget'
    error: str | None = None  # null-deref | dangling | goto-out-of-range | free-of-null
    pc: int = -1

    def __str__(self) -> str:
        if self.kind == "ok":
            return "OK"
        if self.kind == "assertion":
            return f"assertion violation at {self.pc}"
        if self.kind == "budget":
            return "step budget exceeded"
        return f"runtime error ({self.error}) at {self.pc}"


class ExecError(Exception):
    def __init__(self, error: str):
        super().__init__(error)
        self.error = error


# =====================================================================
# Path conditions
# =====================================================================


@dataclass(frozen=True)
class PCExpr:
    expr: Expr


@dataclass(frozen=True)
class PCAssign:
    var: str
    fieldname: str
    expr: Expr


PCAtom = Union[PCExpr, PCAssign]


@dataclass(frozen=True)
class PathCondition:
    heaps: tuple[SymbolicHeap, ...]  # precondition disjuncts, plus allocations
    atoms: tuple[PCAtom, ...]

    def vars(self) -> set[str]:
        out: set[str] = set()
        for d in self.heaps:
            out |= F.free_vars(d)
        for atom in self.atoms:
            if isinstance(atom, PCExpr):
                out |= ir.expr_vars(atom.expr)
            else:
                out.add(atom.var)
                out |= ir.expr_vars(atom.expr)
        return out

    def rename(self, old: str, new: str) -> "PathCondition":
        binding = {old: Var(new)}
        renames = {old: new}
        heaps = tuple(F.substitute(d, binding) if old in F.free_vars(d) else d
                      for d in self.heaps)
        atoms = []
        for atom in self.atoms:
            if isinstance(atom, PCExpr):
                atoms.append(PCExpr(ir.rename_expr(atom.expr, renames)))
            else:
                atoms.append(PCAssign(renames.get(atom.var, atom.var),
                                      atom.fieldname,
                                      ir.rename_expr(atom.expr, renames)))
        return PathCondition(heaps, tuple(atoms))

    def conjoin(self, expr: Expr) -> "PathCondition":
        return PathCondition(self.heaps, self.atoms + (PCExpr(expr),))

    def assign(self, var: str, expr: Expr) -> "PathCondition":
        """Assignment rule: substitute the old value of ``var`` by a fresh
        symbol, then conjoin the defining equation."""
        pc = self
        new_expr = expr
        if var in self.vars():
            old = F.fresh_var(var)
            pc = self.rename(var, old)
            new_expr = ir.rename_expr(expr, {var: old})
        return pc.conjoin(EBin("=", EVar(var), new_expr))

    def allocate(self, var: str, type_name: str, args: Sequence[str]) -> "PathCondition":
        """Allocation rule: like assignment, but the new value is described
        by a separating points-to atom on every disjunct."""
        pc = self
        arg_names = list(args)
        if var in self.vars():
            old = F.fresh_var(var)
            pc = self.rename(var, old)
            arg_names = [old if a == var else a for a in arg_names]
        atom = PointsTo(var, type_name, tuple(Var(a) for a in arg_names))
        heaps = tuple(SymbolicHeap(d.exists, F.sep(d.atoms() + [atom]), d.pure)
                      for d in pc.heaps)
        return PathCondition(heaps, pc.atoms)

    def store(self, var: str, fieldname: str, expr: Expr) -> "PathCondition":
        return PathCondition(self.heaps, self.atoms + (PCAssign(var, fieldname, expr),))


def initial_path_condition(pre: F.Formula) -> PathCondition:
    # Binders are freshened so program variables can never be captured.
    return PathCondition(tuple(F.freshen_heap(d) for d in pre.disjuncts), ())


# =====================================================================
# Expression conversion: IR expressions -> pure formulas
# =====================================================================


class ConversionError(Exception):
    """The expression leaves the solvable fragment (e.g. nonlinear)."""


def _expr_to_term(e: Expr) -> ArithTerm:
    if isinstance(e, EConst):
        if isinstance(e.value, bool):
            return Const(int(e.value))
        return Const(e.value)
    if isinstance(e, ENull):
        return Null()
    if isinstance(e, EVar):
        return Var(e.name)
    if isinstance(e, EUn) and e.op == "-":
        return Neg(_expr_to_term(e.operand))
    if isinstance(e, EBin) and e.op == "+":
        return Add(_expr_to_term(e.left), _expr_to_term(e.right))
    if isinstance(e, EBin) and e.op == "-":
        return Add(_expr_to_term(e.left), Neg(_expr_to_term(e.right)))
    if isinstance(e, EBin) and e.op == "*":
        left, right = e.left, e.right
        if isinstance(left, EConst) and isinstance(left.value, int):
            return Scale(left.value, _expr_to_term(right))
        if isinstance(right, EConst) and isinstance(right.value, int):
            return Scale(right.value, _expr_to_term(left))
        raise ConversionError(f"nonlinear product: {ir.print_expr(e)}")
    if isinstance(e, EField):
        raise ConversionError(f"unresolved field access: {ir.print_expr(e)}")
    raise ConversionError(f"not an arithmetic term: {ir.print_expr(e)}")


def _boolish(e: Expr) -> bool:
    if isinstance(e, EConst):
        return isinstance(e.value, bool)
    if isinstance(e, EUn):
        return e.op == "!"
    if isinstance(e, EBin):
        return e.op in ("<", "<=", ">", ">=", "=", "!=", "&", "|")
    return False


def _iff(p: PureFormula, q: PureFormula) -> PureFormula:
    return F.And(Not(F.And(p, Not(q))), Not(F.And(q, Not(p))))


def expr_to_pure(e: Expr) -> PureFormula:
    """Boolean-context conversion to the assertion-language fragment."""
    if isinstance(e, EConst):
        if e.value is True:
            return F.TRUE
        if e.value is False:
            return Not(F.TRUE)
        raise ConversionError(f"integer in boolean position: {e.value}")
    if isinstance(e, EVar):
        return Atom("=", Var(e.name), Const(1))  # boolean variable as 0/1
    if isinstance(e, EUn) and e.op == "!":
        return Not(expr_to_pure(e.operand))
    if isinstance(e, EBin):
        if e.op == "&":
            return F.And(expr_to_pure(e.left), expr_to_pure(e.right))
        if e.op == "|":
            return Not(F.And(Not(expr_to_pure(e.left)), Not(expr_to_pure(e.right))))
        if e.op in ("<", "<=", ">", ">="):
            left, right = _expr_to_term(e.left), _expr_to_term(e.right)
            if e.op == "<":
                return Not(Atom("<=", right, left))
            if e.op == "<=":
                return Atom("<=", left, right)
            if e.op == ">":
                return Not(Atom("<=", left, right))
            return Atom("<=", right, left)
        if e.op in ("=", "!="):
            if _boolish(e.left) or _boolish(e.right):
                eq: PureFormula = _iff(expr_to_pure(e.left), expr_to_pure(e.right))
            else:
                eq = Atom("=", _expr_to_term(e.left), _expr_to_term(e.right))
            return eq if e.op == "=" else Not(eq)
    raise ConversionError(f"not a boolean expression: {ir.print_expr(e)}")


def _term_to_expr(t: ArithTerm) -> Expr:
    if isinstance(t, Var):
        return EVar(t.name)
    if isinstance(t, Const):
        return EConst(t.value)
    if isinstance(t, Null):
        return ENull()
    if isinstance(t, Neg):
        return EUn("-", _term_to_expr(t.term))
    if isinstance(t, Scale):
        return EBin("*", EConst(t.coeff), _term_to_expr(t.term))
    return EBin("+", _term_to_expr(t.left), _term_to_expr(t.right))


# =====================================================================
# preprocess: eliminate field forms from a path condition
# =====================================================================


class Unresolvable(Exception):
    """Field elimination ran out of unfolding budget or left the solvable
    fragment; the node is parked rather than pruned."""


class _NullBranch(Exception):
    pass


class _Stuck(Exception):
    pass


class _NeedUnfold(Exception):
    def __init__(self, inst_index: int):
        self.inst_index = inst_index


class _AliasInfo:
    def __init__(self, d: SymbolicHeap, atoms: Sequence[PCAtom]):
        self.uf = S._UnionFind()
        self.uf.add(S._NULL_KEY)

        def record(left, right) -> None:
            self.uf.union(left, right)

        for c in F.conjuncts(d.pure):
            if isinstance(c, Atom) and c.op == "=":
                if isinstance(c.left, (Var, Null)) and isinstance(c.right, (Var, Null)):
                    record(S._loc_key(c.left), S._loc_key(c.right))
        for atom in atoms:
            if isinstance(atom, PCExpr) and isinstance(atom.expr, EBin) \
                    and atom.expr.op == "=":
                left, right = atom.expr.left, atom.expr.right
                if isinstance(left, (EVar, ENull)) and isinstance(right, (EVar, ENull)):
                    record(self._key(left), self._key(right))

    @staticmethod
    def _key(e: Expr) -> str:
        return S._NULL_KEY if isinstance(e, ENull) else e.name

    def absorb(self, e: Expr) -> None:
        """Record an equality learned while resolving a conjunct (a field
        read rewritten to its slot name turns into a variable equality)."""
        if isinstance(e, EBin) and e.op == "=" \
                and isinstance(e.left, (EVar, ENull)) \
                and isinstance(e.right, (EVar, ENull)):
            self.uf.union(self._key(e.left), self._key(e.right))

    def entails_null(self, v: str) -> bool:
        return self.uf.find(v) == self.uf.find(S._NULL_KEY)

    def aliased(self, a: str, b: str) -> bool:
        return self.uf.find(a) == self.uf.find(b)


def _resolve_expr(e: Expr, slot_map: dict[tuple[str, str], ArithTerm],
                  aliases: _AliasInfo, d: SymbolicHeap) -> Expr:
    """Rewrite every field access via the slot map; raise when one cannot
    be resolved (null base, unfolding needed, or no information)."""
    if isinstance(e, EField):
        if aliases.entails_null(e.var):
            raise _NullBranch()
        for (head, fname), term in slot_map.items():
            if fname == e.fieldname and aliases.aliased(head, e.var):
                return _term_to_expr(term)
        for idx, atom in enumerate(d.atoms()):
            if isinstance(atom, PredInst):
                for arg in atom.args:
                    if isinstance(arg, Var) and aliases.aliased(arg.name, e.var):
                        raise _NeedUnfold(idx)
        raise _Stuck()
    if isinstance(e, EBin):
        return EBin(e.op, _resolve_expr(e.left, slot_map, aliases, d),
                    _resolve_expr(e.right, slot_map, aliases, d))
    if isinstance(e, EUn):
        return EUn(e.op, _resolve_expr(e.operand, slot_map, aliases, d))
    return e


def _preprocess_heap(d: SymbolicHeap, atoms: Sequence[PCAtom], defs: SpecFile,
                     budget: int) -> list[SymbolicHeap]:
    slot_map: dict[tuple[str, str], ArithTerm] = {}
    for p in d.points_tos():
        data = defs.datas[p.type_name]
        for (fname, _), arg in zip(data.fields, p.args):
            slot_map[(p.var, fname)] = arg
    aliases = _AliasInfo(d, atoms)
    new_pure: list[PureFormula] = []
    for pos, atom in enumerate(atoms):
        expr = atom.expr
        try:
            resolved = _resolve_expr(expr, slot_map, aliases, d)
            if isinstance(atom, PCAssign):
                if aliases.entails_null(atom.var):
                    raise _NullBranch()
                key = None
                for (head, fname) in slot_map:
                    if fname == atom.fieldname and aliases.aliased(head, atom.var):
                        key = (head, fname)
                        break
                if key is None:
                    for idx, a in enumerate(d.atoms()):
                        if isinstance(a, PredInst):
                            for arg in a.args:
                                if isinstance(arg, Var) and \
                                        aliases.aliased(arg.name, atom.var):
                                    raise _NeedUnfold(idx)
                    raise _Stuck()
                fresh = F.fresh_var(atom.fieldname)
                slot_map[key] = Var(fresh)  # overrides the original slot name
                new_pure.append(Atom("=", Var(fresh), _expr_to_term(resolved)))
                aliases.absorb(EBin("=", EVar(fresh), resolved))
            else:
                new_pure.append(expr_to_pure(resolved))
                aliases.absorb(resolved)
        except _NullBranch:
            return []
        except _Stuck:
            return []
        except _NeedUnfold as need:
            if budget <= 0:
                raise Unresolvable("unfolding budget exhausted in preprocess")
            out: list[SymbolicHeap] = []
            unresolved = 0
            for unfolded in unfold_at(d, need.inst_index, defs):
                try:
                    out.extend(_preprocess_heap(unfolded, atoms, defs, budget - 1))
                except Unresolvable:
                    unresolved += 1
            if unresolved and not out:
                raise Unresolvable("all unfolded branches unresolvable")
            return out
        except ConversionError as err:
            raise Unresolvable(str(err)) from None
    return [SymbolicHeap(d.exists, d.spatial, F.conj([d.pure, *new_pure]))]


def preprocess(delta: PathCondition, defs: SpecFile,
               unfold_budget: int = 6) -> list[SymbolicHeap]:
    """Field-access-free heaps covering the path condition (may be empty:
    contradiction or not enough information, both discard the branch)."""
    out: list[SymbolicHeap] = []
    unresolved = 0
    for d in delta.heaps:
        try:
            out.extend(_preprocess_heap(d, delta.atoms, defs, unfold_budget))
        except Unresolvable:
            unresolved += 1
    if unresolved and not out:
        raise Unresolvable("path condition outside the solvable fragment")
    return out


# =====================================================================
# Concrete expression evaluation
# =====================================================================

Stack = dict  # variable name -> value, plus (Addr, field) -> value


def eval_expr(s: Stack, e: Expr):
    if isinstance(e, EConst):
        return e.value
    if isinstance(e, ENull):
        return None
    if isinstance(e, EVar):
        if e.name not in s:
            raise ExecError("dangling")
        return s[e.name]
    if isinstance(e, EField):
        base = eval_expr(s, EVar(e.var))
        if base is None:
            raise ExecError("null-deref")
        if not isinstance(base, Addr) or (base, e.fieldname) not in s:
            raise ExecError("dangling")
        return s[(base, e.fieldname)]
    if isinstance(e, EUn):
        value = eval_expr(s, e.operand)
        if e.op == "!":
            return not value
        return wrap32(-value)
    left = eval_expr(s, e.left)
    right = eval_expr(s, e.right)
    op = e.op
    if op == "+":
        return wrap32(left + right)
    if op == "-":
        return wrap32(left - right)
    if op == "*":
        return wrap32(left * right)
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op in ("<", "<=", ">", ">="):
        if not isinstance(left, int) or not isinstance(right, int) \
                or isinstance(left, bool) or isinstance(right, bool):
            raise ExecError("dangling")
        return {"<": left < right, "<=": left <= right,
                ">": left > right, ">=": left >= right}[op]
    if op == "&":
        return bool(left) and bool(right)
    if op == "|":
        return bool(left) or bool(right)
    raise ExecError("dangling")


# =====================================================================
# Constraint tree
# =====================================================================


@dataclass
class ConcolicNode:
    nid: int
    parent: int | None
    edge: str  # rule label on the incoming edge ('then'/'else' for branches)
    depth: int
    pc: int
    delta: PathCondition
    flag: bool = False
    status: str = "open"  # 'open' | 'pruned' | 'unresolved'
    outcome: RunOutcome | None = None
    children: dict[str, int] = dfield(default_factory=dict)
    branch: tuple[str, int, str] | None = None  # (source proc, source pc, side)
    path: tuple[int, ...] = ()  # child-creation indices from the root


class ConstraintTree:
    """The pair (V, E): nodes are concolic states, edges are rule labels."""

    def __init__(self, program: ElabProgram, pre: F.Formula):
        self.program = program
        self.nodes: list[ConcolicNode] = []
        root = ConcolicNode(0, None, "", 0, 0, initial_path_condition(pre),
                            flag=True)
        self.nodes.append(root)

    @property
    def root(self) -> ConcolicNode:
        return self.nodes[0]

    def child(self, parent: ConcolicNode, edge: str, pc: int,
              delta_thunk: Callable[[], PathCondition],
              branch: tuple[str, int, str] | None = None) -> ConcolicNode:
        if edge in parent.children:
            node = self.nodes[parent.children[edge]]
            if node.pc != pc:
                raise RuntimeError(f"tree got inconsistent: node {node.nid} "
                                   f"pc {node.pc} vs {pc}")
            return node
        node = ConcolicNode(len(self.nodes), parent.nid, edge, parent.depth + 1,
                            pc, delta_thunk(), branch=branch,
                            path=parent.path + (len(parent.children),))
        parent.children[edge] = node.nid
        self.nodes.append(node)
        return node

    def unexplored(self) -> list[ConcolicNode]:
        return [n for n in self.nodes if not n.flag and n.status == "open"]

    def edges(self) -> list[tuple[int, str, int]]:
        out = []
        for node in self.nodes:
            for label, cid in node.children.items():
                out.append((node.nid, label, cid))
        return out

    def statement(self, node: ConcolicNode) -> ir.Statement | None:
        if node.pc >= self.program.end:
            return None
        return self.program.stmts[node.pc]

    def to_dot(self) -> str:
        lines = ["digraph constraint_tree {", "  node [shape=box, fontsize=9];"]
        for node in self.nodes:
            st = self.statement(node)
            label = f"{node.nid}: pc={node.pc}"
            if st is not None:
                label += "\\n" + ir.print_statement(st).replace('"', "'")
            marks = []
            if not node.flag and node.status == "open":
                marks.append("?")
            if node.status == "pruned":
                marks.append("pruned")
            if node.status == "unresolved":
                marks.append("unresolved")
            if node.outcome is not None:
                marks.append(str(node.outcome))
            if marks:
                label += "\\n[" + ", ".join(marks) + "]"
            style = ' style=dashed' if node.status != "open" else ""
            fill = ' color=gray' if not node.flag else ""
            lines.append(f'  n{node.nid} [label="{label}"{style}{fill}];')
        for parent, label, child in self.edges():
            lines.append(f'  n{parent} -> n{child} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# =====================================================================
# Concrete run: grows and annotates the tree
# =====================================================================

DEFAULT_STEP_BUDGET = 1_000_000


def _init_stack(test: TestInput) -> Stack:
    s: Stack = {}
    for addr, obj in test.objects.items():
        for fname, value in obj.fields.items():
            s[(addr, fname)] = value
    s.update(test.bindings)
    return s


def run_test(test: TestInput, tree: ConstraintTree, defs: SpecFile,
             step_budget: int = DEFAULT_STEP_BUDGET) -> RunOutcome:
    """Execute one input, walking existing tree nodes where the path is
    already known and creating new ones where it is not."""
    program = tree.program
    end = program.end
    s = _init_stack(test)
    addr_counter = itertools.count(10_000)
    node = tree.root
    node.flag = True
    steps = 0
    while True:
        if node.pc == end:
            outcome = RunOutcome("ok")
            node.outcome = outcome
            return outcome
        if steps >= step_budget:
            outcome = RunOutcome("budget", pc=node.pc)
            node.outcome = outcome
            return outcome
        steps += 1
        st = program.stmts[node.pc]
        origin = program.origins[node.pc]
        pc = node.pc
        try:
            if isinstance(st, SAssign):
                value = eval_expr(s, st.expr)
                node = tree.child(node, "assign", pc + 1,
                                  lambda: node.delta.assign(st.var, st.expr))
                s[st.var] = value
            elif isinstance(st, SNew):
                values = []
                for name in st.args:
                    if name not in s:
                        raise ExecError("dangling")
                    values.append(s[name])
                addr = Addr(next(addr_counter), st.type_name)
                node = tree.child(node, "new", pc + 1,
                                  lambda: node.delta.allocate(st.var, st.type_name,
                                                              st.args))
                data = program.source.datas[st.type_name]
                for (fname, _), value in zip(data.fields, values):
                    s[(addr, fname)] = value
                s[st.var] = addr
            elif isinstance(st, SStore):
                base = s.get(st.var)
                if st.var not in s:
                    raise ExecError("dangling")
                if base is None:
                    raise ExecError("null-deref")
                if not isinstance(base, Addr) or (base, st.fieldname) not in s:
                    raise ExecError("dangling")
                value = eval_expr(s, st.expr)
                node = tree.child(node, "store", pc + 1,
                                  lambda: node.delta.store(st.var, st.fieldname,
                                                           st.expr))
                s[(base, st.fieldname)] = value
            elif isinstance(st, SFree):
                base = s.get(st.var)
                if st.var not in s:
                    raise ExecError("dangling")
                if base is None:
                    raise ExecError("free-of-null")
                if not isinstance(base, Addr):
                    raise ExecError("dangling")
                data = program.source.datas[base.type_name]
                if data.fields and (base, data.fields[0][0]) not in s:
                    raise ExecError("dangling")
                node = tree.child(node, "free", pc + 1, lambda: node.delta)
                for fname, _ in data.fields:
                    s.pop((base, fname), None)
            elif isinstance(st, SAssert):
                value = eval_expr(s, st.expr)
                if not value:
                    outcome = RunOutcome("assertion", pc=pc)
                    node.outcome = outcome
                    return outcome
                node = tree.child(node, "assert", pc + 1,
                                  lambda: node.delta.conjoin(st.expr))
            elif isinstance(st, SGoto):
                target = eval_expr(s, st.target)
                if not isinstance(target, int) or isinstance(target, bool) \
                        or not (0 <= target <= end):
                    raise ExecError("goto-out-of-range")
                node = tree.child(node, f"goto:{target}", target,
                                  lambda: node.delta)
            elif isinstance(st, SCond):
                value = eval_expr(s, st.cond)
                k1 = eval_expr(s, st.then_target)
                k2 = eval_expr(s, st.else_target)
                for k in (k1, k2):
                    if not isinstance(k, int) or isinstance(k, bool) \
                            or not (0 <= k <= end):
                        raise ExecError("goto-out-of-range")
                then_child = tree.child(node, "then", k1,
                                        lambda: node.delta.conjoin(st.cond),
                                        branch=(origin[0], origin[1], "then"))
                else_child = tree.child(node, "else", k2,
                                        lambda: node.delta.conjoin(EUn("!", st.cond)),
                                        branch=(origin[0], origin[1], "else"))
                node = then_child if value else else_child
            elif isinstance(st, SCall):
                raise RuntimeError("call statement survived elaboration")
            else:
                raise RuntimeError(f"unhandled statement {st!r}")
        except ExecError as err:
            outcome = RunOutcome("error", error=err.error, pc=pc)
            node.outcome = outcome
            return outcome
        node.flag = True


# =====================================================================
# Exploration driver
# =====================================================================


@dataclass
class ExploreStats:
    solver_calls: int = 0
    runs: int = 0
    pruned: int = 0
    unresolved: int = 0
    budget_stopped: bool = False
    unfold_rounds: int = 0
    pure_nodes: int = 0


@dataclass
class ExploreResult:
    tree: ConstraintTree
    tests: list[TestInput]
    log: list[tuple[str, RunOutcome]]
    stats: ExploreStats


def explore(program: ElabProgram, pre: F.Formula, seeds: Sequence[TestInput],
            defs: SpecFile, budget: S.Budget | None = None,
            max_nodes: int = 10_000, step_budget: int = DEFAULT_STEP_BUDGET,
            spec_only: bool = False,
            time_limit: float | None = None) -> ExploreResult:
    """Run all seeds, then solve unexplored branches until none remain or
    a budget is hit. ``spec_only`` stops after the seed runs."""
    if not seeds:
        raise ValueError("need at least one initial test input")
    import time as _time

    budget = budget or S.Budget()
    deadline = None if time_limit is None else _time.monotonic() + time_limit
    tree = ConstraintTree(program, pre)
    stats = ExploreStats()
    log: list[tuple[str, RunOutcome]] = []
    tests: list[TestInput] = []
    for seed in seeds:
        outcome = run_test(seed, tree, defs, step_budget)
        stats.runs += 1
        log.append((seed.provenance, outcome))
    if spec_only:
        return ExploreResult(tree, tests, log, stats)
    iteration = itertools.count(1)
    while True:
        candidates = tree.unexplored()
        if not candidates:
            break
        if len(tree.nodes) >= max_nodes or \
                (deadline is not None and _time.monotonic() > deadline):
            stats.budget_stopped = True
            break
        node = min(candidates, key=lambda n: (n.depth, n.path))
        try:
            heaps = preprocess(node.delta, defs, unfold_budget=budget.max_depth)
        except Unresolvable:
            node.status = "unresolved"
            stats.unresolved += 1
            continue
        saw_unknown = False
        sat_but_missed = False
        for d in heaps:
            result = S.sat(d, defs, budget)
            stats.solver_calls += 1
            stats.unfold_rounds += result.stats.rounds
            stats.pure_nodes += result.stats.pure_nodes
            if result.decision == "unknown":
                saw_unknown = True
                continue
            if not result.is_sat:
                continue
            test = T.to_unit_test(result.model, program.params, defs,
                                  provenance=f"concolic:i{next(iteration)}:n{node.nid}")
            tests.append(test)
            outcome = run_test(test, tree, defs, step_budget)
            stats.runs += 1
            log.append((test.provenance, outcome))
            if node.flag:
                break
            sat_but_missed = True
        if not node.flag:
            if saw_unknown or sat_but_missed:
                # A model that failed to reach the node means the branch is
                # beyond this solver, not that it is infeasible.
                node.status = "unresolved"
                stats.unresolved += 1
            else:
                node.status = "pruned"
                stats.pruned += 1
    return ExploreResult(tree, tests, log, stats)
