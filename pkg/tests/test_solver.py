"""Bounded heap satisfiability: saturation, pure solving, models."""

import random

from slc import formulas as F
from slc import solver as S
from slc import testgen as T
from slc.formulas import Atom, Const, Not, Null, Var
from slc.solver import Budget, entails_eq, model_check, pure_solve, sat, saturate


def heap(text):
    return F.parse_heap(text)


EMPTY_SPEC = F.SpecFile()


# ------------------------------------------------------------- saturate


def test_saturate_adds_separation_facts():
    spec = F.parse_spec("data C { int v; }\npred p(x) == emp & x = null ;")
    d = F.parse_heap("x -> C(a) * y -> C(b) & true")
    additions = saturate(d)
    assert Not(Atom("=", Var("x"), Null())) in additions
    assert Not(Atom("=", Var("y"), Null())) in additions
    assert Not(Atom("=", Var("x"), Var("y"))) in additions


def test_saturate_head_equal_null_contradicts():
    d = F.parse_heap("x -> C(a) & x = null")
    assert saturate(d) == S.CONTRADICTION


def test_saturate_aliased_heads_contradict():
    d = F.parse_heap("x -> C(a) * y -> C(b) & x = y")
    assert saturate(d) == S.CONTRADICTION


# ------------------------------------------------------------ pure_solve


def test_pure_solve_interval_witness():
    pure = F.parse_heap("emp & minE < elt & maxE > elt").pure
    solution, _ = pure_solve(pure, {}, Budget(), ["elt", "minE", "maxE"])
    values = solution.scalars
    assert values["minE"] < values["elt"] < values["maxE"]
    assert values["elt"] == 0 and values["minE"] == -1 and values["maxE"] == 1


def test_pure_solve_loc_contradiction():
    pure = F.parse_heap("emp & x = y & !(x = y)").pure
    solution, independent = pure_solve(pure, {"x": "C", "y": "C"}, Budget())
    assert solution is None
    assert independent


def test_pure_solve_direct_binding():
    pure = F.parse_heap("emp & v = 5").pure
    solution, _ = pure_solve(pure, {}, Budget())
    assert solution.scalars["v"] == 5


def test_pure_solve_unsat_outside_domain_is_bounded():
    pure = F.parse_heap("emp & 100 <= x").pure
    solution, independent = pure_solve(pure, {}, Budget())
    assert solution is None
    assert not independent  # only the domain bound rules it out


def test_pure_solve_propagation_proves_independent_unsat():
    pure = F.parse_heap("emp & x <= 3 & 6 <= x").pure
    solution, independent = pure_solve(pure, {}, Budget())
    assert solution is None
    assert independent


def test_pure_solve_smallest_witness_ties_negative():
    pure = F.parse_heap("emp & !(x = 0)").pure
    solution, _ = pure_solve(pure, {}, Budget())
    assert solution.scalars["x"] == -1


# ------------------------------------------------------------ entails_eq


def test_entails_eq_transitive():
    d = heap("emp & t = this_root & this_root = u")
    assert entails_eq(d, "t", "this_root")
    assert entails_eq(d, "t", "u")


def test_entails_eq_null():
    d = heap("emp & x = null")
    assert entails_eq(d, "x", None)


def test_entails_eq_unrelated():
    d = heap("emp & x = y")
    assert not entails_eq(d, "x", "z")
    assert not entails_eq(d, "x", None)


# ------------------------------------------------------------------ sat


def test_sat_emp_true(bst_spec):
    result = sat(heap("emp & true"), bst_spec)
    assert result.is_sat
    assert not result.model.heap.points_tos()


def test_sat_pure_contradiction_unsat(bst_spec):
    result = sat(heap("emp & x = null & !(x = null)"), bst_spec)
    assert result.decision == "unsat"


def test_sat_item2_one_node_model(bst_spec):
    item2 = heap("""exists elt, l, r . this_root -> BinaryNode(elt, l, r)
                    * bst(l, minE, elt) * bst(r, elt, maxE)
                    & minE < elt & maxE > elt""")
    result = sat(item2, bst_spec)
    assert result.is_sat
    assert len(result.model.heap.points_tos()) == 1
    assert model_check(result.model, item2, bst_spec)
    test = T.to_unit_test(result.model, [("this_root", "BinaryNode")], bst_spec)
    assert len(test.objects) == 1
    (obj,) = test.objects.values()
    assert obj.fields["left"] is None and obj.fields["right"] is None


def test_sat_respects_explicit_disequalities(bst_spec):
    d = heap("""exists elt, l, r . this_root -> BinaryNode(elt, l, r)
                * bst(l, minE, elt) * bst(r, elt, maxE)
                & minE < elt & maxE > elt & !(l = null) & !(r = null)""")
    result = sat(d, bst_spec, Budget(max_depth=8))
    assert result.is_sat
    assert len(result.model.heap.points_tos()) == 3
    assert model_check(result.model, d, bst_spec)
    # separation: concretized heads denote pairwise-distinct objects
    _, env = S.concretize_model(result.model, bst_spec)
    heads = [env[p.var] for p in result.model.heap.points_tos()]
    assert len(set(heads)) == len(heads)


def test_sat_unsat_shape_conflict(bst_spec):
    d = heap("bst(this_root, minE, maxE) & !(this_root = null) & this_root = null")
    result = sat(d, bst_spec)
    assert result.decision == "unsat"


def test_sat_budget_exhaustion_is_unknown(bst_spec):
    d = heap("""exists elt, l, r . this_root -> BinaryNode(elt, l, r)
                * bst(l, minE, elt) * bst(r, elt, maxE)
                & minE < elt & maxE > elt & !(l = null) & !(r = null)""")
    result = sat(d, bst_spec, Budget(max_depth=2))
    assert result.decision == "unknown"


def test_sat_determinism(bst_spec):
    d = heap("""exists elt, l, r . this_root -> BinaryNode(elt, l, r)
                * bst(l, minE, elt) * bst(r, elt, maxE)
                & minE < elt & maxE > elt""")
    first = sat(d, bst_spec)
    F.reset_names()
    second = sat(d, bst_spec)
    assert first.decision == second.decision
    assert F.alpha_equal(first.model.heap, second.model.heap)
    assert first.stats == second.stats


def test_unconstrained_reference_prefers_null(bst_spec):
    result = sat(heap("bst(this_root, minE, maxE) & true"), bst_spec)
    assert result.is_sat
    assert Atom("=", Var("this_root"), Null()) in list(F.conjuncts(result.model.heap.pure))


def test_self_alias_for_headless_nonnull_class():
    spec = F.parse_spec("data C { C next; }\npred p(x) == emp & x = null ;")
    d = F.parse_heap("x -> C(y) & !(y = null)")
    result = sat(d, spec)
    assert result.is_sat
    assert Atom("=", Var("y"), Var("y")) in list(F.conjuncts(result.model.heap.pure))
    # The oracle reads the self-alias as a dangling pointer...
    assert model_check(result.model, d, spec)
    # ...while the input builder materializes a compatibly-typed object.
    test = T.to_unit_test(result.model, [("x", "C"), ("y", "C")], spec)
    assert len(test.objects) == 2
    assert test.bindings["y"] in test.objects


# ------------------------------------------------------------ model_check


def test_model_check_empty_model_emp(bst_spec):
    m = S.SymbolicModel(heap("emp & true"), {})
    assert model_check(m, heap("emp & true"), bst_spec)


def test_model_check_nonempty_vs_emp(bst_spec):
    m = S.SymbolicModel(
        heap("this_root -> BinaryNode(elt, l, r) & elt = 1 & l = null & r = null"),
        {"elt": "int"})
    assert not model_check(m, heap("emp & true"), bst_spec)


def test_model_check_one_node_against_precondition(bst_spec, bst_pre):
    m = S.SymbolicModel(
        heap("this_root -> BinaryNode(elt, l, r) & elt = 1 & l = null & r = null"
             " & minE = 0 & maxE = 2"),
        {"elt": "int", "minE": "int", "maxE": "int"})
    assert model_check(m, bst_pre.disjuncts[0], bst_spec)


# ----------------------------------------------- randomized soundness


def _random_pure(rng, names):
    atoms = []
    for _ in range(rng.randrange(1, 4)):
        a, b = rng.choice(names), rng.choice(names)
        kind = rng.randrange(3)
        if kind == 0:
            atom = Atom("=", Var(a), Const(rng.randrange(-3, 4)))
        elif kind == 1:
            atom = Atom("<=", Var(a), Var(b))
        else:
            atom = Not(Atom("=", Var(a), Var(b)))
        atoms.append(atom)
    return F.conj(atoms)


def test_sat_models_always_pass_model_check_fuzz():
    spec = F.parse_spec("""
    data N { int v; N next; }
    pred chain(x) == (emp & x = null) \\/ (exists v, n . x -> N(v, n) * chain(n)) ;
    """)
    rng = random.Random(7)
    names = ["a", "b", "c"]
    for i in range(60):
        pure = _random_pure(rng, names)
        spatial = F.sep([F.PredInst("chain", (Var(rng.choice(["p", "q"])),))]) \
            if rng.random() < 0.5 else F.EMP
        d = F.SymbolicHeap((), spatial, pure)
        try:
            result = sat(d, spec, Budget(max_depth=3))
        except F.SortError:
            continue  # randomly ill-sorted mixtures are fine to reject
        if result.is_sat:
            assert model_check(result.model, d, spec), F.print_heap(d)


def test_solver_unsat_never_contradicts_oracle():
    spec = F.parse_spec("""
    data N { int v; N next; }
    pred chain(x) == (emp & x = null) \\/ (exists v, n . x -> N(v, n) * chain(n)) ;
    """)
    queries = [
        "chain(p) & true",
        "chain(p) & !(p = null)",
        "chain(p) & p = null & !(p = null)",
        "exists v, n . p -> N(v, n) * chain(n) & v = 2 & 3 <= v",
    ]
    for text in queries:
        d = F.parse_heap(text)
        result = sat(d, spec, Budget(max_depth=4))
        within = T.oracle_sat(d, spec, 3, range(-4, 5))
        if result.decision == "unsat":
            assert not within, text
        if result.is_sat:
            assert within, text
