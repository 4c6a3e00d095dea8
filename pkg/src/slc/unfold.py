"""Predicate unfolding.

Unfolding replaces one inductive predicate instance by its definition body
with the actual arguments substituted for the parameters, then normalizes,
yielding one symbolic heap per disjunct of the definition. Unfolding a
whole heap takes the union over its instances; a base heap (no instances)
passes through unchanged. Every output heap entails its input, so models
found below are models of the original formula.
"""

from __future__ import annotations

from .formulas import (
    PredInst,
    RawSep,
    SpecFile,
    SymbolicHeap,
    dedup_heaps,
    freshen_heap,
    normalize,
    sep,
    substitute,
)


def unfold_at(d: SymbolicHeap, inst_index: int, defs: SpecFile) -> list[SymbolicHeap]:
    """Unfold the instance at position ``inst_index`` of ``d``'s atom list."""
    atoms = d.atoms()
    inst = atoms[inst_index]
    if not isinstance(inst, PredInst):
        raise ValueError(f"atom {inst_index} is not a predicate instance")
    pred = defs.preds[inst.pred]
    context = SymbolicHeap(d.exists,
                           sep(atoms[:inst_index] + atoms[inst_index + 1:]),
                           d.pure)
    out: list[SymbolicHeap] = []
    for disjunct in pred.body.disjuncts:
        body = freshen_heap(disjunct)
        body = substitute(body, dict(zip(pred.params, inst.args)))
        out.extend(normalize(RawSep(context, body)))
    return out


def unfold_all(d: SymbolicHeap, defs: SpecFile) -> list[SymbolicHeap]:
    """Unfold every instance of ``d`` independently; base heaps pass through."""
    atoms = d.atoms()
    indices = [i for i, a in enumerate(atoms) if isinstance(a, PredInst)]
    if not indices:
        return [d]
    out: list[SymbolicHeap] = []
    for i in indices:
        out.extend(unfold_at(d, i, defs))
    return dedup_heaps(out)


def unfold_round(heaps: list[SymbolicHeap], defs: SpecFile) -> list[SymbolicHeap]:
    """One generation round: base heaps carry forward, the rest unfold."""
    out: list[SymbolicHeap] = []
    for d in heaps:
        out.extend(unfold_all(d, defs))
    return dedup_heaps(out)


def unfold_closure(initial: list[SymbolicHeap], n: int, defs: SpecFile) -> list[SymbolicHeap]:
    """All heaps produced within ``n`` unfolding rounds, first-seen order.

    This is the cumulative view of the search: heaps that become fully base
    at round r stay in every later round, and partially unfolded heaps from
    earlier rounds are kept alongside their descendants.
    """
    frontier = list(initial)
    seen: list[SymbolicHeap] = []
    for _ in range(n):
        frontier = unfold_round(frontier, defs)
        seen = dedup_heaps(seen + frontier)
    return seen
