"""Core intermediate language: numbered statements over procedures.

A procedure body is a dense table of statements indexed from 0; index m
(one past the last statement) means normal termination. Statements are
assignment, field store, (conditional) goto, assert, allocation, and
deallocation. Expressions are side-effect free: constants, variables,
field loads, binary and unary operators over 32-bit wrapping integers
and booleans.

The surface syntax adds ``call v := p(args)``, which is eliminated before
execution by inlining with freshly renamed locals. Recursive calls inline
up to a configurable depth; beyond it the call site becomes
``assert false``, marking those paths out of bound. A procedure returns a
value by assigning the distinguished variable ``ret``.

Programs need not be in single-assignment form: the executor's
substitution rule for assignment handles reassignment soundly, so
``check_ssa`` only warns (a warning fires when one assignment to a
variable can reach another along some control path, which is what loops
compile to).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

from .formulas import DataDef, fresh_var, register_name
from .lexer import TokenStream

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1


def wrap32(value: int) -> int:
    return (value - INT32_MIN) % (2**32) + INT32_MIN


# =====================================================================
# Expressions
# =====================================================================


@dataclass(frozen=True)
class EConst:
    value: object  # int or bool


@dataclass(frozen=True)
class ENull:
    pass


@dataclass(frozen=True)
class EVar:
    name: str


@dataclass(frozen=True)
class EField:
    var: str
    fieldname: str


@dataclass(frozen=True)
class EBin:
    op: str  # + - * = != < <= > >= & |
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class EUn:
    op: str  # ! -
    operand: "Expr"


Expr = Union[EConst, ENull, EVar, EField, EBin, EUn]

_ARITH = ("+", "-", "*")
_CMP = ("=", "!=", "<", "<=", ">", ">=")
_LOGIC = ("&", "|")


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, EVar):
        return {e.name}
    if isinstance(e, EField):
        return {e.var}
    if isinstance(e, EBin):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, EUn):
        return expr_vars(e.operand)
    return set()


def rename_expr(e: Expr, renames: Mapping[str, str]) -> Expr:
    if isinstance(e, EVar):
        return EVar(renames.get(e.name, e.name))
    if isinstance(e, EField):
        return EField(renames.get(e.var, e.var), e.fieldname)
    if isinstance(e, EBin):
        return EBin(e.op, rename_expr(e.left, renames), rename_expr(e.right, renames))
    if isinstance(e, EUn):
        return EUn(e.op, rename_expr(e.operand, renames))
    return e


def print_expr(e: Expr) -> str:
    return _print_expr(e, 0)


_PREC = {"|": 1, "&": 2, "=": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
         "+": 4, "-": 4, "*": 5}


def _print_expr(e: Expr, parent: int) -> str:
    if isinstance(e, EConst):
        return str(e.value).lower() if isinstance(e.value, bool) else str(e.value)
    if isinstance(e, ENull):
        return "null"
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EField):
        return f"{e.var}.{e.fieldname}"
    if isinstance(e, EUn):
        return f"{e.op}{_print_expr(e.operand, 6)}"
    prec = _PREC[e.op]
    text = f"{_print_expr(e.left, prec)} {e.op} {_print_expr(e.right, prec + 1)}"
    return f"({text})" if prec < parent else text


# =====================================================================
# Statements and procedures
# =====================================================================


@dataclass(frozen=True)
class SAssign:
    var: str
    expr: Expr


@dataclass(frozen=True)
class SStore:
    var: str
    fieldname: str
    expr: Expr


@dataclass(frozen=True)
class SGoto:
    target: Expr


@dataclass(frozen=True)
class SAssert:
    expr: Expr


@dataclass(frozen=True)
class SCond:
    cond: Expr
    then_target: Expr
    else_target: Expr


@dataclass(frozen=True)
class SNew:
    var: str
    type_name: str
    args: tuple[str, ...]  # argument variables, one per field


@dataclass(frozen=True)
class SFree:
    var: str


@dataclass(frozen=True)
class SCall:
    result: str | None
    proc: str
    args: tuple[Expr, ...]


Statement = Union[SAssign, SStore, SGoto, SAssert, SCond, SNew, SFree, SCall]


@dataclass(frozen=True)
class Procedure:
    name: str
    params: tuple[tuple[str, str], ...]  # (name, type)
    stmts: tuple[Statement, ...]


@dataclass
class Program:
    datas: dict[str, DataDef] = field(default_factory=dict)
    procs: dict[str, Procedure] = field(default_factory=dict)


@dataclass
class ElabProgram:
    """A single flat statement table for one entry procedure, with every
    call inlined. ``origins[i]`` names the source procedure and statement
    the i-th statement came from, for coverage accounting."""

    entry: str
    params: tuple[tuple[str, str], ...]
    stmts: tuple[Statement, ...]
    origins: tuple[tuple[str, int], ...]
    source: Program

    @property
    def end(self) -> int:
        return len(self.stmts)


def print_statement(st: Statement) -> str:
    if isinstance(st, SAssign):
        return f"{st.var} := {print_expr(st.expr)}"
    if isinstance(st, SStore):
        return f"{st.var}.{st.fieldname} := {print_expr(st.expr)}"
    if isinstance(st, SGoto):
        return f"goto {print_expr(st.target)}"
    if isinstance(st, SAssert):
        return f"assert {print_expr(st.expr)}"
    if isinstance(st, SCond):
        return (f"if {print_expr(st.cond)} then goto {print_expr(st.then_target)} "
                f"else goto {print_expr(st.else_target)}")
    if isinstance(st, SNew):
        return f"{st.var} := new {st.type_name}({', '.join(st.args)})"
    if isinstance(st, SFree):
        return f"free {st.var}"
    return (f"call {st.result + ' := ' if st.result else ''}{st.proc}"
            f"({', '.join(print_expr(a) for a in st.args)})")


def print_program(program: Program) -> str:
    lines: list[str] = []
    for data in program.datas.values():
        lines.append(f"data {data.name} {{")
        for fname, ftype in data.fields:
            lines.append(f"  {ftype} {fname};")
        lines.append("}")
        lines.append("")
    for proc in program.procs.values():
        params = ", ".join(f"{n}: {t}" for n, t in proc.params)
        lines.append(f"proc {proc.name}({params}) {{")
        for i, st in enumerate(proc.stmts):
            lines.append(f"  {i}: {print_statement(st)}")
        lines.append("}")
        lines.append("")
    return "\n".join(lines)


# =====================================================================
# Parsing
# =====================================================================


def _parse_expr(ts: TokenStream) -> Expr:
    return _parse_or(ts)


def _parse_or(ts: TokenStream) -> Expr:
    left = _parse_and(ts)
    while ts.at("|"):
        ts.next()
        left = EBin("|", left, _parse_and(ts))
    return left


def _parse_and(ts: TokenStream) -> Expr:
    left = _parse_cmp(ts)
    while ts.at("&"):
        ts.next()
        left = EBin("&", left, _parse_cmp(ts))
    return left


def _parse_cmp(ts: TokenStream) -> Expr:
    left = _parse_add(ts)
    if ts.peek().text in _CMP and ts.peek().kind == "sym":
        op = ts.next().text
        return EBin(op, left, _parse_add(ts))
    return left


def _parse_add(ts: TokenStream) -> Expr:
    left = _parse_mul(ts)
    while ts.at("+") or ts.at("-"):
        op = ts.next().text
        left = EBin(op, left, _parse_mul(ts))
    return left


def _parse_mul(ts: TokenStream) -> Expr:
    left = _parse_unary(ts)
    while ts.at("*"):
        ts.next()
        left = EBin("*", left, _parse_unary(ts))
    return left


def _parse_unary(ts: TokenStream) -> Expr:
    if ts.accept("!"):
        return EUn("!", _parse_unary(ts))
    if ts.accept("-"):
        return EUn("-", _parse_unary(ts))
    return _parse_primary(ts)


def _parse_primary(ts: TokenStream) -> Expr:
    if ts.at_kind("int"):
        value = ts.expect_int()
        if not (INT32_MIN <= value <= INT32_MAX):
            raise ts.error(f"constant {value} outside 32-bit range")
        return EConst(value)
    if ts.accept("("):
        e = _parse_expr(ts)
        ts.expect(")")
        return e
    tok = ts.expect_ident("expression")
    if tok.text == "null":
        return ENull()
    if tok.text == "true":
        return EConst(True)
    if tok.text == "false":
        return EConst(False)
    register_name(tok.text)
    if ts.accept("."):
        fld = ts.expect_ident("field name")
        return EField(tok.text, fld.text)
    return EVar(tok.text)


def _parse_statement(ts: TokenStream) -> Statement:
    if ts.accept("goto"):
        return SGoto(_parse_expr(ts))
    if ts.accept("assert"):
        return SAssert(_parse_expr(ts))
    if ts.accept("free"):
        return SFree(ts.expect_ident("variable").text)
    if ts.accept("if"):
        cond = _parse_expr(ts)
        ts.expect("then")
        ts.expect("goto")
        then_target = _parse_expr(ts)
        ts.expect("else")
        ts.expect("goto")
        else_target = _parse_expr(ts)
        return SCond(cond, then_target, else_target)
    if ts.accept("call"):
        first = ts.expect_ident("procedure or result variable").text
        result = None
        name = first
        if ts.accept(":="):
            result = first
            register_name(result)
            name = ts.expect_ident("procedure name").text
        ts.expect("(")
        args: list[Expr] = []
        if not ts.at(")"):
            args.append(_parse_expr(ts))
            while ts.accept(","):
                args.append(_parse_expr(ts))
        ts.expect(")")
        return SCall(result, name, tuple(args))
    var = ts.expect_ident("variable").text
    register_name(var)
    if ts.accept("."):
        fld = ts.expect_ident("field name").text
        ts.expect(":=")
        return SStore(var, fld, _parse_expr(ts))
    ts.expect(":=")
    if ts.at("new"):
        ts.next()
        type_name = ts.expect_ident("record type").text
        ts.expect("(")
        args = []
        if not ts.at(")"):
            args.append(ts.expect_ident("argument variable").text)
            while ts.accept(","):
                args.append(ts.expect_ident("argument variable").text)
        ts.expect(")")
        return SNew(var, type_name, tuple(args))
    return SAssign(var, _parse_expr(ts))


def parse_program(text: str, datas: Mapping[str, DataDef] | None = None) -> Program:
    """Parse and validate an ``.ir`` file. Record types may come from the
    file itself or be supplied (typically from the companion ``.sl``)."""
    ts = TokenStream(text)
    program = Program(datas=dict(datas or {}))
    while not ts.at_kind("eof"):
        if ts.at("data"):
            ts.next()
            name = ts.expect_ident("record type name").text
            ts.expect("{")
            fields: list[tuple[str, str]] = []
            while not ts.at("}"):
                ftype = ts.expect_ident("field type").text
                fname = ts.expect_ident("field name").text
                ts.expect(";")
                fields.append((fname, ftype))
            ts.expect("}")
            data = DataDef(name, tuple(fields))
            if name in program.datas and program.datas[name] != data:
                raise ts.error(f"conflicting definition of data {name!r}")
            program.datas[name] = data
        elif ts.at("proc"):
            ts.next()
            name = ts.expect_ident("procedure name").text
            ts.expect("(")
            params: list[tuple[str, str]] = []
            if not ts.at(")"):
                while True:
                    pname = ts.expect_ident("parameter name").text
                    ts.expect(":")
                    ptype = ts.expect_ident("parameter type").text
                    register_name(pname)
                    params.append((pname, ptype))
                    if not ts.accept(","):
                        break
            ts.expect(")")
            ts.expect("{")
            stmts: list[Statement] = []
            while not ts.at("}"):
                idx = ts.expect_int()
                ts.expect(":")
                if idx != len(stmts):
                    raise ts.error(f"statement index {idx} out of order "
                                   f"(expected {len(stmts)})")
                stmts.append(_parse_statement(ts))
            ts.expect("}")
            if name in program.procs:
                raise ts.error(f"duplicate procedure {name!r}")
            program.procs[name] = Procedure(name, tuple(params), tuple(stmts))
        else:
            raise ts.error(f"expected data or proc, found {ts.peek().text!r}")
    validate_program(program)
    return program


# =====================================================================
# Validation and typing
# =====================================================================


class ProgramError(Exception):
    pass


def _join(a: str | None, b: str | None, where: str) -> str | None:
    if a is None:
        return b
    if b is None or a == b:
        return a
    if a == "nullref" and b not in ("int", "bool"):
        return b
    if b == "nullref" and a not in ("int", "bool"):
        return a
    raise ProgramError(f"{where}: type mismatch ({a} vs {b})")


def _expr_type(e: Expr, env: dict[str, str | None], program: Program,
               where: str) -> str | None:
    if isinstance(e, EConst):
        return "bool" if isinstance(e.value, bool) else "int"
    if isinstance(e, ENull):
        return "nullref"
    if isinstance(e, EVar):
        return env.get(e.name)
    if isinstance(e, EField):
        base = env.get(e.var)
        if base is None or base == "nullref":
            return None
        data = program.datas.get(base)
        if data is None:
            raise ProgramError(f"{where}: {e.var} has non-record type {base}")
        try:
            return data.field_type(e.fieldname)
        except KeyError:
            raise ProgramError(f"{where}: unknown field {base}.{e.fieldname}") from None
    if isinstance(e, EUn):
        inner = _expr_type(e.operand, env, program, where)
        want = "bool" if e.op == "!" else "int"
        if inner is not None and inner != want:
            raise ProgramError(f"{where}: operator {e.op} needs {want}, got {inner}")
        return want
    left = _expr_type(e.left, env, program, where)
    right = _expr_type(e.right, env, program, where)
    if e.op in _ARITH or e.op in ("<", "<=", ">", ">="):
        for t in (left, right):
            if t is not None and t != "int":
                raise ProgramError(f"{where}: operator {e.op} needs int, got {t}")
        return "int" if e.op in _ARITH else "bool"
    if e.op in ("&", "|"):
        for t in (left, right):
            if t is not None and t != "bool":
                raise ProgramError(f"{where}: operator {e.op} needs bool, got {t}")
        return "bool"
    # = and != : operands of one type (references compare with null)
    _join(left, right, where)
    return "bool"


def _check_const_target(e: Expr, end: int, where: str) -> None:
    if isinstance(e, EConst):
        if not isinstance(e.value, int) or isinstance(e.value, bool) \
                or not (0 <= e.value <= end):
            raise ProgramError(f"{where}: goto target {e.value} outside [0, {end}]")


def validate_program(program: Program) -> None:
    for data in program.datas.values():
        for fname, ftype in data.fields:
            if ftype not in ("int", "bool") and ftype not in program.datas:
                raise ProgramError(f"data {data.name}: unknown field type {ftype!r}")
    has_calls = any(isinstance(st, SCall)
                    for proc in program.procs.values() for st in proc.stmts)
    assigns_ret = {
        proc.name for proc in program.procs.values()
        if any((isinstance(st, (SAssign, SNew)) and st.var == "ret")
               or (isinstance(st, SCall) and st.result == "ret")
               for st in proc.stmts)
    }
    ret_types: dict[str, str | None] = {name: None for name in program.procs}
    for _ in range(len(program.procs) + 2):
        changed = False
        for proc in program.procs.values():
            env = _type_proc(proc, program, ret_types, has_calls, assigns_ret)
            new_ret = env.get("ret")
            if new_ret is not None and ret_types[proc.name] != new_ret:
                ret_types[proc.name] = _join(ret_types[proc.name], new_ret,
                                             f"proc {proc.name} result")
                changed = True
        if not changed:
            break
    # Final strict pass: unresolved expression types are rejected.
    for proc in program.procs.values():
        _type_proc(proc, program, ret_types, has_calls, assigns_ret, strict=True)


def _type_proc(proc: Procedure, program: Program,
               ret_types: dict[str, str | None], has_calls: bool,
               assigns_ret: set[str] | None = None,
               strict: bool = False) -> dict[str, str | None]:
    env: dict[str, str | None] = {}
    for pname, ptype in proc.params:
        if ptype not in ("int", "bool") and ptype not in program.datas:
            raise ProgramError(f"proc {proc.name}: unknown parameter type {ptype!r}")
        env[pname] = ptype
    end = len(proc.stmts)
    for _ in range(len(proc.stmts) + 2):
        changed = False
        for i, st in enumerate(proc.stmts):
            where = f"proc {proc.name}:{i}"
            if isinstance(st, SAssign):
                t = _expr_type(st.expr, env, program, where)
                joined = _join(env.get(st.var), t, where)
                if joined != env.get(st.var):
                    env[st.var] = joined
                    changed = True
            elif isinstance(st, SNew):
                data = program.datas.get(st.type_name)
                if data is None:
                    raise ProgramError(f"{where}: unknown record type {st.type_name!r}")
                if len(st.args) != len(data.fields):
                    raise ProgramError(f"{where}: new {st.type_name} expects "
                                       f"{len(data.fields)} arguments, got {len(st.args)}")
                for arg, (fname, ftype) in zip(st.args, data.fields):
                    joined = _join(env.get(arg), ftype, f"{where} ({fname})")
                    if joined != env.get(arg):
                        env[arg] = joined
                        changed = True
                if env.get(st.var) != st.type_name:
                    env[st.var] = _join(env.get(st.var), st.type_name, where)
                    changed = True
            elif isinstance(st, SCall):
                callee = program.procs.get(st.proc)
                if callee is None:
                    raise ProgramError(f"{where}: unknown procedure {st.proc!r}")
                if len(st.args) != len(callee.params):
                    raise ProgramError(f"{where}: {st.proc} expects "
                                       f"{len(callee.params)} arguments, got {len(st.args)}")
                for arg, (_, ptype) in zip(st.args, callee.params):
                    t = _expr_type(arg, env, program, where)
                    _join(t, ptype, where)
                if st.result is not None:
                    rt = ret_types.get(st.proc)
                    if rt is None and strict and st.proc not in (assigns_ret or ()):
                        raise ProgramError(f"{where}: {st.proc} returns no value "
                                           f"(never assigns ret)")
                    if rt is not None:
                        joined = _join(env.get(st.result), rt, where)
                        if joined != env.get(st.result):
                            env[st.result] = joined
                            changed = True
        if not changed:
            break
    for i, st in enumerate(proc.stmts):
        where = f"proc {proc.name}:{i}"
        if isinstance(st, (SAssign,)):
            _expr_type(st.expr, env, program, where)
        elif isinstance(st, SStore):
            base = env.get(st.var)
            if base is None or base == "nullref":
                continue  # untypeable base: the runtime null/dangling checks apply
            data = program.datas.get(base)
            if data is None:
                raise ProgramError(f"{where}: store into non-record {st.var}:{base}")
            try:
                ftype = data.field_type(st.fieldname)
            except KeyError:
                raise ProgramError(f"{where}: unknown field {base}.{st.fieldname}") from None
            _join(_expr_type(st.expr, env, program, where), ftype, where)
        elif isinstance(st, SFree):
            base = env.get(st.var)
            if base in ("int", "bool"):
                raise ProgramError(f"{where}: free of scalar {st.var}")
        elif isinstance(st, SGoto):
            t = _expr_type(st.target, env, program, where)
            if t not in (None, "int"):
                raise ProgramError(f"{where}: goto target must be int, got {t}")
            _check_const_target(st.target, end, where)
            if has_calls and not isinstance(st.target, EConst):
                raise ProgramError(f"{where}: computed goto cannot be combined "
                                   f"with procedure calls")
        elif isinstance(st, SAssert):
            t = _expr_type(st.expr, env, program, where)
            if t not in (None, "bool"):
                raise ProgramError(f"{where}: assert needs bool, got {t}")
        elif isinstance(st, SCond):
            t = _expr_type(st.cond, env, program, where)
            if t not in (None, "bool"):
                raise ProgramError(f"{where}: condition must be bool, got {t}")
            for target in (st.then_target, st.else_target):
                tt = _expr_type(target, env, program, where)
                if tt not in (None, "int"):
                    raise ProgramError(f"{where}: goto target must be int, got {tt}")
                _check_const_target(target, end, where)
                if has_calls and not isinstance(target, EConst):
                    raise ProgramError(f"{where}: computed goto cannot be combined "
                                       f"with procedure calls")
    return env


# =====================================================================
# SSA advisory check
# =====================================================================


def _successors(proc: Procedure, i: int) -> list[int]:
    st = proc.stmts[i]
    end = len(proc.stmts)
    if isinstance(st, SGoto):
        if isinstance(st.target, EConst):
            return [st.target.value] if st.target.value < end else []
        return list(range(end))  # computed goto: assume anything
    if isinstance(st, SCond):
        out = []
        for t in (st.then_target, st.else_target):
            if isinstance(t, EConst):
                if t.value < end:
                    out.append(t.value)
            else:
                return list(range(end))
        return out
    return [i + 1] if i + 1 < end else []


def check_ssa(program: Program) -> list[str]:
    """Warn when a variable assignment can reach another assignment of the
    same variable (itself included, via a loop). Advisory only."""
    warnings: list[str] = []
    for proc in program.procs.values():
        assigns: dict[str, list[int]] = {}
        for i, st in enumerate(proc.stmts):
            target = None
            if isinstance(st, (SAssign, SNew)):
                target = st.var
            elif isinstance(st, SCall) and st.result is not None:
                target = st.result
            if target is not None:
                assigns.setdefault(target, []).append(i)
        reach_cache: dict[int, set[int]] = {}

        def reachable_from(i: int) -> set[int]:
            if i in reach_cache:
                return reach_cache[i]
            seen: set[int] = set()
            work = list(_successors(proc, i))
            while work:
                j = work.pop()
                if j in seen:
                    continue
                seen.add(j)
                work.extend(_successors(proc, j))
            reach_cache[i] = seen
            return seen

        for var, sites in assigns.items():
            flagged = False
            for a in sites:
                reach = reachable_from(a)
                for b in sites:
                    if b in reach:
                        warnings.append(
                            f"proc {proc.name}: {var} assigned at {a} may be "
                            f"reassigned at {b}")
                        flagged = True
                        break
                if flagged:
                    break
    return warnings


# =====================================================================
# Call inlining
# =====================================================================


class _Label:
    __slots__ = ("idx",)

    def __init__(self):
        self.idx: int | None = None


def _proc_var_names(proc: Procedure) -> list[str]:
    names: list[str] = [p for p, _ in proc.params]

    def add(n: str) -> None:
        if n not in names:
            names.append(n)

    for st in proc.stmts:
        if isinstance(st, SAssign):
            add(st.var)
            for v in sorted(expr_vars(st.expr)):
                add(v)
        elif isinstance(st, SStore):
            add(st.var)
            for v in sorted(expr_vars(st.expr)):
                add(v)
        elif isinstance(st, SNew):
            add(st.var)
            for v in st.args:
                add(v)
        elif isinstance(st, SFree):
            add(st.var)
        elif isinstance(st, SCall):
            if st.result:
                add(st.result)
            for a in st.args:
                for v in sorted(expr_vars(a)):
                    add(v)
        elif isinstance(st, (SGoto, SAssert)):
            e = st.target if isinstance(st, SGoto) else st.expr
            for v in sorted(expr_vars(e)):
                add(v)
        elif isinstance(st, SCond):
            for e in (st.cond, st.then_target, st.else_target):
                for v in sorted(expr_vars(e)):
                    add(v)
    return names


def elaborate(program: Program, entry: str, inline_depth: int = 8) -> ElabProgram:
    """Flatten ``entry`` into one statement table, inlining every call.

    Each inlined body gets fresh local names; a call with no inline budget
    left becomes ``assert false``. The entry procedure keeps its own
    variable names so path conditions read naturally.
    """
    if entry not in program.procs:
        raise ProgramError(f"unknown entry procedure {entry!r}")
    items: list[tuple[Statement, tuple[str, int]]] = []

    def emit(proc: Procedure, renames: dict[str, str], depth: int,
             exit_label: _Label) -> None:
        labels: dict[int, _Label] = {i: _Label() for i in range(len(proc.stmts))}
        labels[len(proc.stmts)] = exit_label

        def target_of(e: Expr) -> Expr:
            if isinstance(e, EConst):
                return labels[e.value]  # placeholder, resolved below
            return rename_expr(e, renames)

        for i, st in enumerate(proc.stmts):
            origin = (proc.name, i)
            labels[i].idx = len(items)
            if isinstance(st, SAssign):
                items.append((SAssign(renames.get(st.var, st.var),
                                      rename_expr(st.expr, renames)), origin))
            elif isinstance(st, SStore):
                items.append((SStore(renames.get(st.var, st.var), st.fieldname,
                                     rename_expr(st.expr, renames)), origin))
            elif isinstance(st, SNew):
                items.append((SNew(renames.get(st.var, st.var), st.type_name,
                                   tuple(renames.get(a, a) for a in st.args)), origin))
            elif isinstance(st, SFree):
                items.append((SFree(renames.get(st.var, st.var)), origin))
            elif isinstance(st, SGoto):
                items.append((SGoto(target_of(st.target)), origin))
            elif isinstance(st, SAssert):
                items.append((SAssert(rename_expr(st.expr, renames)), origin))
            elif isinstance(st, SCond):
                items.append((SCond(rename_expr(st.cond, renames),
                                    target_of(st.then_target),
                                    target_of(st.else_target)), origin))
            elif isinstance(st, SCall):
                if depth <= 0:
                    # Recursion budget exhausted: path is out of bound.
                    items.append((SAssert(EConst(False)), origin))
                    continue
                callee = program.procs[st.proc]
                inner: dict[str, str] = {}
                for (pname, _), arg in zip(callee.params, st.args):
                    fresh = fresh_var(pname)
                    inner[pname] = fresh
                    items.append((SAssign(fresh, rename_expr(arg, renames)), origin))
                for name in _proc_var_names(callee):
                    if name not in inner:
                        inner[name] = fresh_var(name)
                cont = _Label()
                emit(callee, inner, depth - 1, cont)
                cont.idx = len(items)
                if st.result is not None:
                    items.append((SAssign(renames.get(st.result, st.result),
                                          EVar(inner.get("ret", "ret"))), origin))
            else:
                raise ProgramError(f"unhandled statement {st!r}")

    root = program.procs[entry]
    exit_label = _Label()
    emit(root, {}, inline_depth, exit_label)
    exit_label.idx = len(items)

    resolved: list[Statement] = []
    for st, _ in items:
        if isinstance(st, SGoto) and isinstance(st.target, _Label):
            st = SGoto(EConst(st.target.idx))
        elif isinstance(st, SCond):
            then_t = EConst(st.then_target.idx) if isinstance(st.then_target, _Label) \
                else st.then_target
            else_t = EConst(st.else_target.idx) if isinstance(st.else_target, _Label) \
                else st.else_target
            st = SCond(st.cond, then_t, else_t)
        resolved.append(st)
    return ElabProgram(entry, root.params, tuple(resolved),
                       tuple(origin for _, origin in items), program)


def source_conditionals(program: Program, procs: Sequence[str]) -> Iterator[tuple[str, int]]:
    """Conditional statements of the named source procedures, in order."""
    for name in procs:
        proc = program.procs[name]
        for i, st in enumerate(proc.stmts):
            if isinstance(st, SCond):
                yield name, i
