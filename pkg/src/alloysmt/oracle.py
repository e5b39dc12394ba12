"""Brute-force finite-model oracle.

Enumerates every interpretation of the declared relations over fully finitized
universes, evaluates the relational semantics directly, and reports the first
valuation satisfying facts plus the negated assertion. Ground truth for the
SMT pipeline.

Scope semantics are upper bounds: top-level universes take every size from 1
to the bound, subtype extents may be anything the hierarchy axioms allow (with
explicitly bounded subtypes capped).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .analysis import CheckProblem, RelationSchema, Resolution, THIS, TypeHierarchy
from .errors import AlloySmtError, OracleCapacityError
from .syntax import BinOp, BoolOp, Call, Card, Cmp, Expr, Formula, NameRef, Not, Quant, UnOp
from .verdict import BOUNDED_NO_COUNTEREXAMPLE, COUNTEREXAMPLE, Counterexample, Verdict

DEFAULT_CEILING = 2_000_000


# -------------------------------------------------------------------- universe

@dataclass(frozen=True)
class FiniteUniverse:
    """Atoms per top-level type plus the extent of every declared type."""

    tops: tuple[str, ...]
    extents: dict[str, tuple[str, ...]]
    atom_order: dict[str, int]

    def extent(self, type_name: str) -> tuple[str, ...]:
        return self.extents[type_name]

    def sort_atoms(self, atoms) -> list[str]:
        return sorted(atoms, key=self.atom_order.__getitem__)


def _atom_placements(h: TypeHierarchy, node: str) -> list[frozenset[str]]:
    """All membership sets one atom of `node` may have within node's subtree.
    Abstract nodes with extends-children force a descent; `in`-children are
    independent memberships."""
    info = h.types[node]
    ext = h.children(node, "extends")
    options: list[frozenset[str]] = []
    if not (info.abstract and ext):
        options.append(frozenset([node]))
    for child in ext:
        options.extend(frozenset([node]) | p for p in _atom_placements(h, child))
    for child in h.children(node, "in"):
        if h.children(child):
            raise AlloySmtError(f"oracle does not support children of in-sig {child!r}")
        options = [o for o in options] + [o | frozenset([child]) for o in options]
    return options


def iter_universes(h: TypeHierarchy, bounds: dict[str, int]) -> Iterator[FiniteUniverse]:
    """All universes within the bounds: sizes 1..n per top-level type (types in
    declaration order), then every subtype assignment consistent with the
    hierarchy and any explicit subtype caps."""
    tops = [t for t in h.order if h.types[t].parent is None]
    for t in tops:
        if t not in bounds:
            raise AlloySmtError(f"oracle needs a bound for top-level type {t!r}")
    all_types = list(h.order)
    placements = {t: _atom_placements(h, t) for t in tops}

    for sizes in itertools.product(*(range(1, bounds[t] + 1) for t in tops)):
        atoms = {t: tuple(f"{t}${i}" for i in range(1, k + 1)) for t, k in zip(tops, sizes)}
        atom_order = {}
        for t in tops:
            for a in atoms[t]:
                atom_order[a] = len(atom_order)
        per_atom = [(t, a) for t in tops for a in atoms[t]]
        for choice in itertools.product(*(range(len(placements[t])) for t, _ in per_atom)):
            extents: dict[str, list[str]] = {t: [] for t in all_types}
            for (t, a), ci in zip(per_atom, choice):
                for member in placements[t][ci]:
                    extents[member].append(a)
            ok = True
            for t in all_types:
                cap = bounds.get(t)
                if cap is not None and len(extents[t]) > cap:
                    ok = False
                    break
            if ok:
                yield FiniteUniverse(
                    tuple(tops),
                    {t: tuple(universe_atoms) for t, universe_atoms in extents.items()},
                    atom_order,
                )


# ---------------------------------------------------------------- enumeration

def schema_order(schemas: dict[str, RelationSchema]) -> list[RelationSchema]:
    """Declaration order refined so a schema comes after any schema its domain
    restrictions mention."""
    names = list(schemas)
    deps: dict[str, set[str]] = {}
    for s in schemas.values():
        referenced: set[str] = set()
        for r in s.restrictions:
            if r is not None:
                referenced |= {n for n in _expr_names(r) if n in schemas}
        deps[s.name] = referenced
    ordered: list[str] = []
    visiting: set[str] = set()

    def visit(n: str) -> None:
        if n in ordered:
            return
        if n in visiting:
            raise AlloySmtError(f"cyclic domain restrictions through field {n!r}")
        visiting.add(n)
        for d in sorted(deps[n]):
            visit(d)
        visiting.discard(n)
        ordered.append(n)

    for n in names:
        visit(n)
    return [schemas[n] for n in ordered]


def _expr_names(e: Expr) -> set[str]:
    if isinstance(e, NameRef):
        return {e.name}
    if isinstance(e, BinOp):
        return _expr_names(e.lhs) | _expr_names(e.rhs)
    if isinstance(e, UnOp):
        return _expr_names(e.arg)
    if isinstance(e, Call):
        out = {e.name}
        for a in e.args:
            out |= _expr_names(a)
        return out
    return set()


def _row_domain(
    schema: RelationSchema, universe: FiniteUniverse, context: dict[str, frozenset], res: Resolution
) -> list[tuple[str, ...]]:
    """Domain tuples (all columns but the last) that respect the declared
    restrictions, given already-fixed relations."""
    cols = schema.col_types[:-1]
    rows = []
    for tup in itertools.product(*(universe.extent(c) for c in cols)):
        ok = True
        for i, restr in enumerate(schema.restrictions[:-1]):
            if restr is None or i == 0:
                continue
            val = Valuation(universe, context, {THIS: frozenset({(tup[0],)})}, res)
            if (tup[i],) not in eval_expr(restr, val):
                ok = False
                break
        if ok:
            rows.append(tup)
    return rows


def _range_choices(schema: RelationSchema, universe: FiniteUniverse) -> list[tuple[str, ...]]:
    """Choices for one row's range column, in canonical order (bitmask-style:
    smaller sets first)."""
    atoms = universe.extent(schema.col_types[-1])
    if schema.mult == "one":
        return [(a,) for a in atoms]
    if schema.mult == "lone":
        return [()] + [(a,) for a in atoms]
    subsets = []
    for mask in range(2 ** len(atoms)):
        subsets.append(tuple(a for i, a in enumerate(atoms) if mask >> i & 1))
    if schema.mult == "some":
        return [s for s in subsets if s]
    return subsets


def iter_schema_instances(
    schema: RelationSchema, universe: FiniteUniverse, context: dict[str, frozenset], res: Resolution
) -> Iterator[frozenset]:
    rows = _row_domain(schema, universe, context, res)
    choices = _range_choices(schema, universe)
    restr = schema.restrictions[-1]
    for picks in itertools.product(range(len(choices)), repeat=len(rows)):
        inst = frozenset(
            row + (a,) for row, pi in zip(rows, picks) for a in choices[pi]
        )
        if restr is not None:
            keep = set()
            for tup in inst:
                val = Valuation(universe, context, {THIS: frozenset({(tup[0],)})}, res)
                if (tup[-1],) in eval_expr(restr, val):
                    keep.add(tup)
            inst = frozenset(keep)
            per_row = {}
            for tup in inst:
                per_row[tup[:-1]] = per_row.get(tup[:-1], 0) + 1
            if schema.mult in ("one", "some") and any(per_row.get(r, 0) == 0 for r in rows):
                continue
            if schema.mult in ("one", "lone") and any(n > 1 for n in per_row.values()):
                continue
        yield inst


def iter_instances(
    schemas: dict[str, RelationSchema], universe: FiniteUniverse, res: Resolution
) -> Iterator[dict[str, frozenset]]:
    """Every combination of relation instances that respects declarations;
    deterministic order, multiplicity filtering built into generation."""
    ordered = schema_order(schemas)

    def rec(i: int, context: dict[str, frozenset]) -> Iterator[dict[str, frozenset]]:
        if i == len(ordered):
            yield dict(context)
            return
        sc = ordered[i]
        for inst in iter_schema_instances(sc, universe, context, res):
            context[sc.name] = inst
            yield from rec(i + 1, context)
            del context[sc.name]

    yield from rec(0, {})


def count_instances(
    schemas: dict[str, RelationSchema], universe: FiniteUniverse, res: Resolution
) -> int:
    """Upper-bound estimate of the instance count (restrictions ignored)."""
    total = 1
    for sc in schemas.values():
        n_rows = 1
        for c in sc.col_types[:-1]:
            n_rows *= len(universe.extent(c))
        per_row = len(_range_choices(sc, universe))
        total *= per_row**n_rows
        if total > 10**15:
            return total
    return total


# ----------------------------------------------------------------- evaluation

@dataclass
class Valuation:
    universe: FiniteUniverse
    rels: dict[str, frozenset]
    bindings: dict[str, frozenset]
    res: Resolution

    def bind(self, var: str, value: frozenset) -> "Valuation":
        return Valuation(self.universe, self.rels, {**self.bindings, var: value}, self.res)


def eval_expr(e: Expr, v: Valuation) -> frozenset:
    """Set semantics over tuples of atoms; scalars are singleton unary sets."""
    if isinstance(e, NameRef):
        if e.name in v.bindings:
            return v.bindings[e.name]
        if e.name in v.rels:
            return v.rels[e.name]
        if e.name in v.res.hierarchy:
            return frozenset((a,) for a in v.universe.extent(e.name))
        if e.name in v.res.schemas:  # relation absent from a partial valuation
            return frozenset()
        raise AlloySmtError(f"unbound name in evaluation: {e.name!r}")
    if isinstance(e, BinOp):
        if e.op == ".":
            return _join(eval_expr(e.lhs, v), eval_expr(e.rhs, v))
        lhs, rhs = eval_expr(e.lhs, v), eval_expr(e.rhs, v)
        if e.op == "+":
            return lhs | rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "&":
            return lhs & rhs
        if e.op == "->":
            return frozenset(x + y for x in lhs for y in rhs)
    if isinstance(e, UnOp):
        r = eval_expr(e.arg, v)
        closure = _transitive_closure(r)
        if e.op == "^":
            return closure
        top = _lca_type(e, v)
        iden = frozenset((a, a) for a in v.universe.extent(top))
        return closure | iden
    if isinstance(e, Call):
        fn = v.res.funs.get(e.name)
        if fn is None:
            raise AlloySmtError(f"unknown function {e.name!r}")
        inner = v
        for p, a in zip(fn.params, e.args):
            inner = inner.bind(p.name, eval_expr(a, v))
        return eval_expr(fn.body, inner)
    raise AlloySmtError(f"cannot evaluate {type(e).__name__}")


def _join(p: frozenset, q: frozenset) -> frozenset:
    by_first: dict[str, list[tuple[str, ...]]] = {}
    for t in q:
        by_first.setdefault(t[0], []).append(t[1:])
    out = set()
    for t in p:
        for rest in by_first.get(t[-1], ()):
            out.add(t[:-1] + rest)
    return frozenset(out)


def _transitive_closure(r: frozenset) -> frozenset:
    tc = r
    while True:
        new = tc | _join(tc, r)
        if new == tc:
            return tc
        tc = new


def _lca_type(e: UnOp, v: Valuation) -> str:
    from .analysis import _Typer

    cols = _Typer(v.res).expr_type(e.arg, _binding_types(v))
    top = v.res.hierarchy.lca(cols[0], cols[1])
    assert top is not None
    return top


def _binding_types(v: Valuation) -> dict[str, str]:
    # Only used for typing `*`; scalar bindings carry their atom's most
    # general type, which is all the lca computation needs.
    out = {}
    for name, val in v.bindings.items():
        out[name] = _atom_top_type(v, val)
    return out


def _atom_top_type(v: Valuation, val: frozenset) -> str:
    for t in v.universe.tops:
        for tup in val:
            if len(tup) == 1 and tup[0] in v.universe.extent(t):
                return t
    return v.universe.tops[0] if v.universe.tops else "?"


def eval_formula(f: Formula, v: Valuation) -> bool:
    if isinstance(f, Cmp):
        lhs, rhs = eval_expr(f.lhs, v), eval_expr(f.rhs, v)
        if f.op == "=":
            return lhs == rhs
        if f.op == "!=":
            return lhs != rhs
        if f.op == "in":
            return lhs <= rhs
        if f.op == ":":
            return lhs <= rhs and len(lhs) == 1
    if isinstance(f, Card):
        n = len(eval_expr(f.arg, v))
        return {"no": n == 0, "some": n >= 1, "lone": n <= 1, "one": n == 1}[f.q]
    if isinstance(f, Not):
        return not eval_formula(f.arg, v)
    if isinstance(f, BoolOp):
        if f.op == "and":
            return eval_formula(f.lhs, v) and eval_formula(f.rhs, v)
        if f.op == "or":
            return eval_formula(f.lhs, v) or eval_formula(f.rhs, v)
        return (not eval_formula(f.lhs, v)) or eval_formula(f.rhs, v)
    if isinstance(f, Quant):
        atoms = [t[0] for t in eval_expr(f.bound, v) if len(t) == 1]
        atoms = v.universe.sort_atoms(atoms)
        results = (eval_formula(f.body, v.bind(f.var, frozenset({(a,)}))) for a in atoms)
        if f.q == "all":
            return all(results)
        if f.q == "some":
            return any(results)
        count = 0
        for ok in results:
            count += ok
            if count > 1:
                break
        return {"no": count == 0, "lone": count <= 1, "one": count == 1}[f.q]
    if isinstance(f, Call):
        pd = v.res.preds.get(f.name)
        if pd is None:
            raise AlloySmtError(f"unknown predicate {f.name!r}")
        inner = v
        for p, a in zip(pd.params, f.args):
            inner = inner.bind(p.name, eval_expr(a, v))
        return all(eval_formula(b, inner) for b in pd.body)
    raise AlloySmtError(f"cannot evaluate formula {type(f).__name__}")


def conforms(schema: RelationSchema, tuples: frozenset, universe: FiniteUniverse, v: Valuation) -> bool:
    """Declaration conformance: arity, column extents, multiplicity, and
    domain restrictions."""
    for tup in tuples:
        if len(tup) != schema.arity:
            return False
        for a, t in zip(tup, schema.col_types):
            if a not in universe.extent(t):
                return False
        for i, restr in enumerate(schema.restrictions):
            if restr is not None and i > 0:
                val = Valuation(universe, v.rels, {THIS: frozenset({(tup[0],)})}, v.res)
                if (tup[i],) not in eval_expr(restr, val):
                    return False
    images: dict[tuple, int] = {}
    for tup in tuples:
        images[tup[:-1]] = images.get(tup[:-1], 0) + 1
    if schema.mult in ("one", "lone"):
        if any(n > 1 for n in images.values()):
            return False
    if schema.mult in ("one", "some"):
        for dom in _row_domain(schema, universe, v.rels, v.res):
            if images.get(dom, 0) == 0:
                return False
    return True


# ------------------------------------------------------------- verdict search

def _goal_prefix(problem: CheckProblem) -> tuple[list[tuple[str, Expr]], Formula]:
    prefix: list[tuple[str, Expr]] = []
    g = problem.goal_exists
    while isinstance(g, Quant) and g.q == "some":
        prefix.append((g.var, g.bound))
        g = g.body
    return prefix, g


def _find_bindings(
    prefix: list[tuple[str, Expr]], matrix: Formula, v: Valuation
) -> Optional[dict[str, str]]:
    """First witness for the existential prefix, scanning atoms in canonical
    order; None when the goal has no witness under this valuation."""
    if not prefix:
        return {} if eval_formula(matrix, v) else None
    (var, bound), rest = prefix[0], prefix[1:]
    atoms = v.universe.sort_atoms(t[0] for t in eval_expr(bound, v) if len(t) == 1)
    for a in atoms:
        sub = _find_bindings(rest, matrix, v.bind(var, frozenset({(a,)})))
        if sub is not None:
            return {var: a, **sub}
    return None


def _counterexample(problem: CheckProblem, universe: FiniteUniverse,
                    rels: dict[str, frozenset], bindings: dict[str, str]) -> Counterexample:
    tops = {t: universe.extent(t) for t in universe.tops}
    return Counterexample(
        universes=tops,
        extents=dict(universe.extents),
        relations=dict(rels),
        bindings=bindings,
        source="oracle",
    )


def check_within_scope(
    problem: CheckProblem,
    bounds: dict[str, int],
    ceiling: int = DEFAULT_CEILING,
    strategy: str = "auto",
) -> Verdict:
    """Search all structures within the bounds for facts + negated assertion.

    strategy: "auto" uses the factored search when the problem is owner-local
    (exact and fast), "naive" forces plain product enumeration, "sliced"
    forces the factored search."""
    res = problem.resolution
    if strategy not in ("auto", "naive", "sliced"):
        raise AlloySmtError(f"unknown oracle strategy {strategy!r}")
    sliced = _SlicedSearch.try_build(problem, bounds) if strategy != "naive" else None
    if strategy == "sliced" and sliced is None:
        raise AlloySmtError("problem shape does not admit the factored oracle search")
    if sliced is not None:
        return sliced.run()

    prefix, matrix = _goal_prefix(problem)
    total = 0
    for universe in iter_universes(problem.hierarchy, bounds):
        total += count_instances(problem.schemas, universe, res)
        if total > ceiling:
            raise OracleCapacityError(total, ceiling)
    for universe in iter_universes(problem.hierarchy, bounds):
        for rels in iter_instances(problem.schemas, universe, res):
            v = Valuation(universe, rels, {}, res)
            if not all(eval_formula(f, v) for _, f in problem.facts):
                continue
            witness = _find_bindings(prefix, matrix, v)
            if witness is not None:
                return Verdict(COUNTEREXAMPLE, _counterexample(problem, universe, rels, witness))
    return Verdict(BOUNDED_NO_COUNTEREXAMPLE, bounds=dict(bounds))


# ------------------------------------------------- factored (owner-local) path

def _split_conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, BoolOp) and f.op == "and":
        return _split_conjuncts(f.lhs) + _split_conjuncts(f.rhs)
    return [f]


def _formula_names(f) -> set[str]:
    if isinstance(f, Cmp):
        return _expr_names(f.lhs) | _expr_names(f.rhs)
    if isinstance(f, BoolOp):
        return _formula_names(f.lhs) | _formula_names(f.rhs)
    if isinstance(f, Not):
        return _formula_names(f.arg)
    if isinstance(f, Card):
        return _expr_names(f.arg)
    if isinstance(f, Quant):
        return (_expr_names(f.bound) | _formula_names(f.body)) - {f.var}
    if isinstance(f, Call):
        out = set()
        for a in f.args:
            out |= _expr_names(a)
        return out
    return set()


def _owner_rooted(node, owners: set[str], schemas: set[str]) -> bool:
    """Every relation reference appears exactly as `v.field` for an owner
    variable v, and owner variables appear nowhere outside that pattern."""
    if isinstance(node, BinOp) and node.op == ".":
        if (
            isinstance(node.rhs, NameRef) and node.rhs.name in schemas
            and isinstance(node.lhs, NameRef) and node.lhs.name in owners
        ):
            return True
        return _owner_rooted(node.lhs, owners, schemas) and _owner_rooted(node.rhs, owners, schemas)
    if isinstance(node, NameRef):
        return node.name not in schemas and node.name not in owners
    if isinstance(node, UnOp):
        return _owner_rooted(node.arg, owners, schemas)
    if isinstance(node, BinOp):
        return _owner_rooted(node.lhs, owners, schemas) and _owner_rooted(node.rhs, owners, schemas)
    if isinstance(node, Cmp):
        return _owner_rooted(node.lhs, owners, schemas) and _owner_rooted(node.rhs, owners, schemas)
    if isinstance(node, Not):
        return _owner_rooted(node.arg, owners, schemas)
    if isinstance(node, BoolOp):
        return _owner_rooted(node.lhs, owners, schemas) and _owner_rooted(node.rhs, owners, schemas)
    if isinstance(node, Card):
        return _owner_rooted(node.arg, owners, schemas)
    if isinstance(node, Quant):
        return _owner_rooted(node.bound, owners, schemas) and _owner_rooted(node.body, owners, schemas)
    if isinstance(node, Call):
        return all(_owner_rooted(a, owners, schemas) for a in node.args)
    return False


def _quantifies_over_sigs(f, sigs: set[str]) -> bool:
    if isinstance(f, Quant):
        if isinstance(f.bound, NameRef) and f.bound.name in sigs:
            return True
        return _quantifies_over_sigs(f.body, sigs)
    if isinstance(f, BoolOp):
        return _quantifies_over_sigs(f.lhs, sigs) or _quantifies_over_sigs(f.rhs, sigs)
    if isinstance(f, Not):
        return _quantifies_over_sigs(f.arg, sigs)
    return False


def _rgs_strings(n: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length n: canonical set partitions."""
    if n == 0:
        yield ()
        return

    def rec(prefix: tuple[int, ...], maxv: int) -> Iterator[tuple[int, ...]]:
        if len(prefix) == n:
            yield prefix
            return
        for b in range(maxv + 2):
            yield from rec(prefix + (b,), max(maxv, b))

    yield from rec((), -1)


class _SlicedSearch:
    """Exact factored search for owner-local problems.

    A slice is one owner atom's rows across all of its sig's fields (owner
    column stripped). Facts that are universals over a single owner variable
    filter the slice space once per universe; the goal's conjuncts then either
    pin a variable's slice through a relation equality or get tested, with
    branching over the filtered slice list as a last resort. Atom sharing
    among same-sig goal variables is covered by set-partition enumeration.
    """

    @classmethod
    def try_build(cls, problem: CheckProblem, bounds: dict[str, int]) -> Optional["_SlicedSearch"]:
        res = problem.resolution
        schemas = problem.schemas
        if not schemas:
            return None
        slice_sigs = {s.owner for s in schemas.values()}
        schema_names = set(schemas)
        if any(s.col_types[0] != s.owner or s.arity < 2 for s in schemas.values()):
            return None
        for s in schemas.values():
            for r in s.restrictions:
                if r is None:
                    continue
                allowed = {THIS} | set(res.hierarchy.types) | {
                    n for n, sc in schemas.items() if sc.owner == s.owner
                }
                if not _expr_names(r) <= allowed:
                    return None

        owner_facts: dict[str, list[tuple[str, Formula]]] = {s: [] for s in slice_sigs}
        universe_facts: list[Formula] = []
        for _, fact in problem.facts:
            if not (_formula_names(fact) & schema_names):
                universe_facts.append(fact)
                continue
            g = fact
            prefix: list[tuple[str, str]] = []
            while (
                isinstance(g, Quant) and g.q == "all"
                and isinstance(g.bound, NameRef) and g.bound.name in res.hierarchy
            ):
                prefix.append((g.var, g.bound.name))
                g = g.body
            owner_vars = [v for v, t in prefix if t in slice_sigs]
            if len(owner_vars) != 1 or _quantifies_over_sigs(g, slice_sigs):
                return None
            owner_var = owner_vars[0]
            owner_sig = dict(prefix)[owner_var]
            if not _owner_rooted(g, {owner_var}, schema_names):
                return None
            body = g
            for var, t in reversed([p for p in prefix if p[0] != owner_var]):
                body = Quant("all", var, NameRef(t), body)
            owner_facts[owner_sig].append((owner_var, body))

        prefix, matrix = _goal_prefix(problem)
        from .analysis import _Typer

        typer = _Typer(res)
        var_types: dict[str, str] = {}
        env: dict[str, str] = {}
        for var, bound in prefix:
            if not (isinstance(bound, NameRef) and bound.name in res.hierarchy):
                return None
            var_types[var] = bound.name
            env[var] = bound.name
        if _quantifies_over_sigs(matrix, slice_sigs):
            return None
        owner_vars_set = {v for v, t in var_types.items() if t in slice_sigs}
        conjuncts = _split_conjuncts(matrix)
        for c in conjuncts:
            if not _owner_rooted(c, owner_vars_set, schema_names):
                # atom-level conjuncts (e.g. b = b') are fine; anything that
                # still touches relations must be owner-rooted
                if _formula_names(c) & schema_names:
                    return None
        return cls(problem, bounds, owner_facts, universe_facts, var_types, conjuncts)

    def __init__(self, problem, bounds, owner_facts, universe_facts, var_types, conjuncts):
        self.problem = problem
        self.res = problem.resolution
        self.bounds = dict(bounds)
        self.owner_facts = owner_facts
        self.universe_facts = universe_facts
        self.var_types = var_types
        self.conjuncts = conjuncts
        self.slice_sigs = sorted(owner_facts)
        self.schema_names = set(problem.schemas)

    # ---------------------------------------------------------- slice spaces

    def _fields_of(self, sig: str) -> list[RelationSchema]:
        return [s for s in schema_order(self.problem.schemas) if s.owner == sig]

    def _field_slice_instances(
        self, sc: RelationSchema, universe: FiniteUniverse, ctx: dict[str, frozenset], dummy: str
    ) -> Iterator[frozenset]:
        """Instances of one field for one owner atom, rows without the owner
        column. `ctx` holds already-chosen sibling fields, owner-prefixed."""
        mids = sc.col_types[1:-1]
        rows: list[tuple[str, ...]] = []
        for tup in itertools.product(*(universe.extent(c) for c in mids)):
            ok = True
            for i, restr in enumerate(sc.restrictions[1:-1], start=1):
                if restr is None:
                    continue
                val = Valuation(universe, ctx, {THIS: frozenset({(dummy,)})}, self.res)
                if (tup[i - 1],) not in eval_expr(restr, val):
                    ok = False
                    break
            if ok:
                rows.append(tup)
        choices = _range_choices(sc, universe)
        last_restr = sc.restrictions[-1]
        for picks in itertools.product(range(len(choices)), repeat=len(rows)):
            inst = frozenset(row + (a,) for row, pi in zip(rows, picks) for a in choices[pi])
            if last_restr is not None:
                val = Valuation(universe, ctx, {THIS: frozenset({(dummy,)})}, self.res)
                allowed = eval_expr(last_restr, val)
                inst = frozenset(t for t in inst if (t[-1],) in allowed)
                if sc.mult in ("one", "some"):
                    per_row = {t[:-1] for t in inst}
                    if any(r not in per_row for r in rows):
                        continue
                if sc.mult == "one":
                    counts: dict[tuple, int] = {}
                    for t in inst:
                        counts[t[:-1]] = counts.get(t[:-1], 0) + 1
                    if any(n != 1 for n in counts.values()):
                        continue
            yield inst

    def _slices_for(self, sig: str, universe: FiniteUniverse) -> list[dict[str, frozenset]]:
        """All per-atom slices that satisfy declarations and this sig's
        owner-local facts, in deterministic generation order."""
        ext = universe.extent(sig)
        if not ext:
            return []
        dummy = ext[0]
        fields = self._fields_of(sig)
        out: list[dict[str, frozenset]] = []

        def rec(i: int, ctx: dict[str, frozenset]) -> None:
            if i == len(fields):
                if self._slice_satisfies_facts(sig, dummy, ctx, universe):
                    out.append({f: frozenset(t[1:] for t in ctx[f]) for f in ctx})
                return
            sc = fields[i]
            for inst in self._field_slice_instances(sc, universe, ctx, dummy):
                ctx[sc.name] = frozenset((dummy,) + t for t in inst)
                rec(i + 1, ctx)
                del ctx[sc.name]

        rec(0, {})
        return out

    def _slice_satisfies_facts(self, sig, owner_atom, rels, universe) -> bool:
        v = Valuation(universe, rels, {}, self.res)
        return all(
            eval_formula(body, v.bind(owner_var, frozenset({(owner_atom,)})))
            for owner_var, body in self.owner_facts[sig]
        )

    # ----------------------------------------------------------- goal search

    def run(self) -> Verdict:
        problem = self.problem
        for universe in iter_universes(problem.hierarchy, self.bounds):
            base = Valuation(universe, {}, {}, self.res)
            if not all(eval_formula(f, base) for f in self.universe_facts):
                continue
            slices = {sig: self._slices_for(sig, universe) for sig in self.slice_sigs}
            if any(not slices[sig] and universe.extent(sig) for sig in self.slice_sigs):
                continue  # some owner atom would have no legal rows at all
            found = self._search_universe(universe, slices)
            if found is not None:
                return Verdict(COUNTEREXAMPLE, found)
        return Verdict(BOUNDED_NO_COUNTEREXAMPLE, bounds=dict(self.bounds))

    def _search_universe(self, universe, slices) -> Optional[Counterexample]:
        owner_vars = [v for v in self.var_types if self.var_types[v] in self.slice_sigs]
        atom_vars = [(v, t) for v, t in self.var_types.items() if t not in self.slice_sigs]
        per_sig = {s: [v for v in owner_vars if self.var_types[v] == s] for s in self.slice_sigs}

        partitions: list[dict[str, tuple[str, int]]] = []
        options_per_sig = []
        for sig in self.slice_sigs:
            vars_ = per_sig[sig]
            opts = []
            for rgs in _rgs_strings(len(vars_)):
                if vars_ and max(rgs) + 1 > len(universe.extent(sig)):
                    continue
                opts.append({v: (sig, b) for v, b in zip(vars_, rgs)})
            if not opts:
                return None
            options_per_sig.append(opts)
        for combo in itertools.product(*options_per_sig):
            merged: dict[str, tuple[str, int]] = {}
            for d in combo:
                merged.update(d)
            partitions.append(merged)

        for partition in partitions:
            block_atoms = {
                var: universe.extent(sig)[bi] for var, (sig, bi) in partition.items()
            }
            for combo in itertools.product(*(universe.extent(t) for _, t in atom_vars)):
                bindings = {v: a for (v, _), a in zip(atom_vars, combo)}
                bindings.update(block_atoms)
                blocks = sorted(set(partition.values()))
                state: dict[tuple[str, int], Optional[int]] = {b: None for b in blocks}
                found = self._propagate(universe, slices, partition, bindings, state, list(self.conjuncts))
                if found is not None:
                    return found
        return None

    def _valuation(self, universe, slices, partition, bindings, state) -> Valuation:
        rels: dict[str, set] = {name: set() for name in self.problem.schemas}
        for var, (sig, bi) in partition.items():
            si = state[(sig, bi)]
            if si is None:
                continue
            atom = bindings[var]
            for fname, rows in slices[sig][si].items():
                rels[fname] |= {(atom,) + r for r in rows}
        bound_sets = {v: frozenset({(a,)}) for v, a in bindings.items()}
        return Valuation(universe, {k: frozenset(v) for k, v in rels.items()}, bound_sets, self.res)

    def _ready(self, conjunct, partition, state) -> bool:
        names = _formula_names(conjunct)
        if not (names & self.schema_names):
            return True  # atom-level conjunct: needs no slices
        return all(
            state[block] is not None
            for var, block in partition.items() if var in names
        )

    def _pinnable(self, conjunct, partition, state):
        """`v.field = E` with v's slice unassigned and E fully determined."""
        if not (isinstance(conjunct, Cmp) and conjunct.op == "="):
            return None
        for lhs, rhs in ((conjunct.lhs, conjunct.rhs), (conjunct.rhs, conjunct.lhs)):
            if not (
                isinstance(lhs, BinOp) and lhs.op == "."
                and isinstance(lhs.lhs, NameRef) and lhs.lhs.name in partition
                and isinstance(lhs.rhs, NameRef) and lhs.rhs.name in self.problem.schemas
            ):
                continue
            block = partition[lhs.lhs.name]
            if state[block] is not None:
                continue
            rhs_names = _expr_names(rhs)
            if any(
                v in rhs_names and state[b] is None for v, b in partition.items()
            ):
                continue  # the other side is not determined yet
            return (block, lhs.rhs.name, rhs)
        return None

    def _propagate(self, universe, slices, partition, bindings, state, pending) -> Optional[Counterexample]:
        pending = list(pending)
        progress = True
        while progress:
            progress = False
            for c in list(pending):
                if self._ready(c, partition, state):
                    v = self._valuation(universe, slices, partition, bindings, state)
                    if not eval_formula(c, v):
                        return None
                    pending.remove(c)
                    progress = True
        if not pending:
            return self._assemble(universe, slices, partition, bindings, state)
        for c in pending:
            pin = self._pinnable(c, partition, state)
            if pin is None:
                continue
            block, fname, rhs = pin
            v = self._valuation(universe, slices, partition, bindings, state)
            target = eval_expr(rhs, v)
            sig = block[0]
            for si, sl in enumerate(slices[sig]):
                if sl[fname] == target:
                    found = self._propagate(
                        universe, slices, partition, bindings, {**state, block: si}, pending
                    )
                    if found is not None:
                        return found
            return None
        for block in sorted(state):
            if state[block] is None:
                sig = block[0]
                for si in range(len(slices[sig])):
                    found = self._propagate(
                        universe, slices, partition, bindings, {**state, block: si}, pending
                    )
                    if found is not None:
                        return found
                return None
        return None  # unreachable: no pending conjuncts handled above

    def _assemble(self, universe, slices, partition, bindings, state) -> Optional[Counterexample]:
        """Fill unconstrained owner atoms with the first valid slice, then
        re-validate the whole structure with the plain evaluator."""
        rels: dict[str, set] = {name: set() for name in self.problem.schemas}
        chosen: dict[str, dict[str, int]] = {s: {} for s in self.slice_sigs}
        for var, (sig, bi) in partition.items():
            si = state[(sig, bi)]
            chosen[sig][bindings[var]] = 0 if si is None else si
        for sig in self.slice_sigs:
            for atom in universe.extent(sig):
                sl = slices[sig][chosen[sig].get(atom, 0)]
                for fname, rows in sl.items():
                    rels[fname] |= {(atom,) + r for r in rows}
        final = {k: frozenset(v) for k, v in rels.items()}
        v = Valuation(universe, final, {}, self.res)
        if not all(eval_formula(f, v) for _, f in self.problem.facts):
            return None
        prefix, matrix = _goal_prefix(self.problem)
        bound_v = v
        for var, _ in prefix:
            bound_v = bound_v.bind(var, frozenset({(bindings[var],)}))
        if not eval_formula(matrix, bound_v):
            return None
        return _counterexample(
            self.problem, universe, final, {var: bindings[var] for var, _ in prefix}
        )
