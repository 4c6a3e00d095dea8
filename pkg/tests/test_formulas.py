"""Assertion-language AST, parser, substitution, and normalization."""

import random

import pytest

from slc import formulas as F
from slc.formulas import (
    Add,
    Atom,
    Const,
    Emp,
    Not,
    Null,
    PredInst,
    RawSep,
    SymbolicHeap,
    Var,
)
from slc.lexer import ParseError


def heap(text):
    return F.parse_heap(text)


# ---------------------------------------------------------------- parsing


def test_parse_bst_definition(bst_spec):
    pred = bst_spec.preds["bst"]
    assert pred.params == ("root", "minE", "maxE")
    base, inductive = pred.body.disjuncts
    assert base.is_base()
    assert base.spatial == Emp()
    assert base.pure == Atom("=", Var("root"), Null())
    assert not inductive.is_base()
    assert len(inductive.instances()) == 2
    assert [p.type_name for p in inductive.points_tos()] == ["BinaryNode"]
    assert inductive.exists == ("elt", "l", "r")


def test_parse_minimal_predicate():
    spec = F.parse_spec("pred p(x) == emp & x = null ;")
    pred = spec.preds["p"]
    assert len(pred.body.disjuncts) == 1
    assert pred.body.disjuncts[0].is_base()


def test_unknown_predicate_rejected():
    with pytest.raises(F.SpecError, match="unknown predicate"):
        F.parse_spec("pred p(x) == q(x) ;")


def test_points_to_arity_checked():
    text = """
    data N { int v; N next; }
    pred p(x) == x -> N(1) ;
    """
    with pytest.raises(F.SpecError, match="expects 2 fields"):
        F.parse_spec(text)


def test_predicate_arity_checked():
    text = """
    pred p(x) == emp & x = null ;
    pre f == p(a, b) ;
    """
    with pytest.raises(F.SpecError, match="expects 1 arguments"):
        F.parse_spec(text)


def test_duplicate_definitions_rejected():
    with pytest.raises(ParseError, match="duplicate"):
        F.parse_spec("pred p(x) == emp & x = null ;\npred p(y) == emp & y = null ;")


def test_predicate_needs_base_disjunct():
    with pytest.raises(F.SpecError, match="no base disjunct"):
        F.parse_spec("pred p(x) == p(x) ;")


def test_syntax_error_carries_position():
    with pytest.raises(ParseError) as err:
        F.parse_spec("pred p(x == emp ;")
    assert err.value.line == 1


def test_comparison_desugaring():
    d = heap("emp & a < b & c >= d & e != f")
    parts = list(F.conjuncts(d.pure))
    assert parts[0] == Not(Atom("<=", Var("b"), Var("a")))
    assert parts[1] == Atom("<=", Var("d"), Var("c"))
    assert parts[2] == Not(Atom("=", Var("e"), Var("f")))


def test_scaled_term_requires_constant_coefficient():
    d = heap("emp & 2 * x <= y + 1")
    atom = next(iter(F.conjuncts(d.pure)))
    assert atom.left == F.Scale(2, Var("x"))
    assert atom.right == Add(Var("y"), Const(1))


def test_constant_range_checked():
    with pytest.raises(ParseError):
        F.parse_heap("emp & x = 3000000000")


# ----------------------------------------------------- print round-trips


ROUND_TRIP = [
    "emp & true",
    "emp & x = null",
    "exists v, n . root -> SNode(v, n) * sll(n) & true",
    "x -> C(a, b) * y -> C(c, d) & a < b & !(c = d & b <= a)",
    "emp & -x + 2 * y <= 3 - z",
]


@pytest.mark.parametrize("text", ROUND_TRIP)
def test_heap_print_parse_round_trip(text):
    d = heap(text)
    assert F.parse_heap(F.print_heap(d)) == d


def test_spec_print_parse_round_trip(bst_spec):
    reparsed = F.parse_spec(F.print_spec(bst_spec))
    assert reparsed.datas == bst_spec.datas
    assert reparsed.preds == bst_spec.preds
    assert reparsed.preconditions == bst_spec.preconditions


# ------------------------------------------------------------ free vars


def test_free_vars_exclude_bound():
    d = heap("exists elt . root -> BinaryNode(elt, l, r) & true")
    assert F.free_vars(d) == {"root", "l", "r"}


def test_free_vars_empty_heap():
    assert F.free_vars(heap("emp & true")) == set()


def test_fresh_var_distinct():
    a, b = F.fresh_var("v"), F.fresh_var("v")
    assert a != b


def test_fresh_var_avoids_parsed_names():
    F.register_name("v1")
    assert F.fresh_var("v") != "v1"


# ---------------------------------------------------------- substitution


def test_substitute_single_rename():
    d = heap("bst(l, minE, elt) & true")
    out = F.substitute(d, {"l": Var("r")})
    assert out == heap("bst(r, minE, elt) & true")


def test_substitute_identity():
    d = heap("exists n . x -> SNode(a, n) * sll(n) & a <= 3")
    assert F.substitute(d, {}) == d


def test_substitute_bst_body(bst_spec):
    inductive = bst_spec.preds["bst"].body.disjuncts[1]
    out = F.substitute(inductive, {"root": Var("this_root")})
    assert out.points_tos()[0].var == "this_root"
    assert out.instances()[0].args[0] == Var("l")


def test_substitute_head_by_term_rejected():
    d = heap("x -> C(a) & true")
    with pytest.raises(F.SubstitutionError):
        F.substitute(d, {"x": Const(3)})


def test_substitute_avoids_capture():
    d = heap("exists n . x -> SNode(a, n) & true")
    out = F.substitute(d, {"a": Var("n")})
    # The binder must have been renamed away from the incoming n.
    assert out.exists != ("n",)
    assert Var("n") in out.points_tos()[0].args


def test_substitution_free_var_homomorphism():
    rng = random.Random(20)
    names = ["a", "b", "c", "d"]
    for _ in range(100):
        vars_in = rng.sample(names, 3)
        d = SymbolicHeap(
            (), F.sep([PredInst("p", tuple(Var(v) for v in vars_in))]),
            Atom("<=", Var(vars_in[0]), Const(rng.randrange(5))))
        v = rng.choice(names)
        t = Var(rng.choice(names))
        out = F.substitute(d, {v: t})
        expected = set(F.free_vars(d))
        if v in expected:
            expected = (expected - {v}) | F.term_vars(t)
        assert F.free_vars(out) == expected


# --------------------------------------------------------- normalization


def test_normalize_axiom_one():
    a = heap("emp & x = null")
    b = heap("emp & y = null")
    out = F.normalize(RawSep(a, b))
    assert len(out) == 1
    assert out[0] == heap("emp & x = null & y = null")


def test_normalize_axiom_two_renames_clash():
    a = F.parse_heap("exists a . x -> C(a) & true")
    b = F.parse_heap("exists a . y -> C(a) & a <= 0")
    (out,) = F.normalize(RawSep(a, b))
    assert len(out.exists) == 2
    assert len(set(out.exists)) == 2
    pts = out.points_tos()
    assert pts[0].args != pts[1].args  # second binder got a fresh name


def test_normalize_distributes_over_disjunction(bst_spec):
    # Splicing the bst body into its use site seeds the two unfolding
    # disjuncts; hand-application of both axioms gives the same heaps.
    pred = bst_spec.preds["bst"]
    context = heap("emp & true")
    pieces = []
    for d in pred.body.disjuncts:
        body = F.substitute(F.freshen_heap(d), dict(
            zip(pred.params, (Var("this_root"), Var("minE"), Var("maxE")))))
        pieces.extend(F.normalize(RawSep(context, body)))
    assert len(pieces) == 2
    assert F.alpha_equal(pieces[0], heap("emp & this_root = null"))
    expected = heap(
        "exists elt, l, r . this_root -> BinaryNode(elt, l, r) * bst(l, minE, elt)"
        " * bst(r, elt, maxE) & minE < elt & maxE > elt")
    assert F.alpha_equal(pieces[1], expected)


def test_normalize_freshening_preserves_witnesses():
    # Any concrete valuation of the composed input extends to one of the
    # normalized output, cross-checked with the brute-force oracle.
    from slc import testgen as TG

    spec = F.parse_spec("""
    data C { int v; }
    pred one(x) == exists a . x -> C(a) & a <= 2 ;
    """)
    left = F.parse_heap("exists a . x -> C(a) & a <= 2")
    right = F.parse_heap("exists a . y -> C(a) & 0 <= a")
    (merged,) = F.normalize(RawSep(left, right))
    for d in (merged,):
        assert TG.oracle_sat(d, spec, 3, range(-2, 3))
    # witnesses transfer both ways on a concrete instance
    a1, a2 = TG.Addr(1, "C"), TG.Addr(2, "C")
    store = {a1: TG.HeapObject(a1, "C", {"v": 1}),
             a2: TG.HeapObject(a2, "C", {"v": 0})}
    env = {"x": a1, "y": a2}
    assert TG.heap_satisfies(store, env, merged, spec)


def test_normalize_output_is_grammar_conformant():
    a = F.parse_heap("exists q . x -> C(q) & q = null")
    b = F.parse_heap("exists q . y -> C(q) & true")
    for out in F.normalize(RawSep(RawSep(a, b), heap("emp & z <= 1"))):
        assert F.grammar_conformant(out)
        assert not isinstance(out.spatial, F.Emp) or not out.points_tos()


# ----------------------------------------------------- alpha equivalence


def test_alpha_equal_modulo_binder_names():
    a = heap("exists v . x -> C(v) & v <= 3")
    b = heap("exists w . x -> C(w) & w <= 3")
    assert F.alpha_equal(a, b)


def test_alpha_distinguishes_structure():
    a = heap("exists v . x -> C(v) & v <= 3")
    b = heap("exists v . x -> C(v) & v <= 4")
    assert not F.alpha_equal(a, b)


def test_dedup_heaps():
    a = heap("exists v . x -> C(v) & true")
    b = heap("exists u . x -> C(u) & true")
    c = heap("emp & x = null")
    assert F.dedup_heaps([a, b, c]) == [a, c]


# ----------------------------------------------------------- sort inference


def test_sorts_of_bst(bst_spec):
    sorts = F.infer_sorts(bst_spec)
    assert sorts["bst"] == ("BinaryNode", "int", "int")


def test_sort_clash_rejected():
    text = """
    data N { int v; N next; }
    pred p(x) == (emp & x = null) \\/ (exists n . x -> N(x, n) * p(n)) ;
    """
    with pytest.raises(F.SortError):
        F.parse_spec(text)
