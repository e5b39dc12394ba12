"""On-demand type finitization.

A type is bounded only when something forces it: it feeds a transitive-closure
unroll, a universal quantifier whose body contains a closure ranges over it, or
the user asked for it. Everything else stays unbounded, which is what makes an
`unsat` answer a proof rather than a bounded check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .analysis import CheckProblem, NameGen, TypeHierarchy, _Typer
from .errors import ScopeError
from .syntax import BinOp, BoolOp, Call, Card, Cmp, Expr, Formula, NameRef, Not, Quant, UnOp

REASON_CLOSURE = "closure-operand"
REASON_UNIVERSAL = "inlined-universal"
REASON_USER = "user-forced"


@dataclass
class ScopePlan:
    """Per-type finitization decisions plus closure unroll depths.

    Bounded types get n named atom constants. The atoms are not asserted
    distinct and subtype atoms are not asserted members, so a bound means *at
    most* n atoms, matching the oracle's upper-bound scope semantics."""

    bounds: dict[str, int] = field(default_factory=dict)
    reasons: dict[str, str] = field(default_factory=dict)
    atoms: dict[str, list[str]] = field(default_factory=dict)
    tc_depths: dict[int, int] = field(default_factory=dict)  # keyed by id(site)
    default_scope: Optional[int] = None

    @property
    def all_unbounded(self) -> bool:
        return not self.bounds

    def summary(self) -> str:
        if not self.bounds:
            return "0 types finitized"
        parts = [f"{t}={n} ({self.reasons[t]})" for t, n in sorted(self.bounds.items())]
        return f"{len(self.bounds)} types finitized: " + ", ".join(parts)


def effective_bound(plan: ScopePlan, hierarchy: TypeHierarchy, type_name: str) -> Optional[int]:
    """The tightest bound on a type, through its ancestors."""
    candidates = [plan.bounds[t] for t in hierarchy.ancestors(type_name) if t in plan.bounds]
    return min(candidates) if candidates else None


def atom_carrier(plan: ScopePlan, hierarchy: TypeHierarchy, type_name: str) -> Optional[str]:
    """The most specific bounded self-or-ancestor type whose atom constants
    cover this type's extent."""
    for t in hierarchy.ancestors(type_name):
        if t in plan.bounds:
            return t
    return None


def _walk_closure_requirements(
    problem: CheckProblem, require: Callable[[str, str], None]
) -> None:
    """Find every type a `^`/`*` site forces bounded: the operand's domain
    column type, the sig types of free scalar variables inside the operand, and
    the range of any universal whose body contains a closure."""
    typer = _Typer(problem.resolution)
    skolem_env = problem.skolem_types()

    def contains_closure(f) -> bool:
        if isinstance(f, UnOp):
            return True
        if isinstance(f, (Cmp,)):
            return contains_closure(f.lhs) or contains_closure(f.rhs)
        if isinstance(f, BinOp):
            return contains_closure(f.lhs) or contains_closure(f.rhs)
        if isinstance(f, BoolOp):
            return contains_closure(f.lhs) or contains_closure(f.rhs)
        if isinstance(f, Not):
            return contains_closure(f.arg)
        if isinstance(f, Card):
            return contains_closure(f.arg)
        if isinstance(f, Quant):
            return contains_closure(f.bound) or contains_closure(f.body)
        if isinstance(f, Call):
            return any(contains_closure(a) for a in f.args)
        return False

    def visit_expr(e: Expr, env: dict[str, str]) -> None:
        if isinstance(e, UnOp):
            cols = typer.expr_type(e.arg, env)
            require(cols[0], REASON_CLOSURE)
            for name in _scalar_names(e.arg):
                if name in env:
                    require(env[name], REASON_CLOSURE)
            visit_expr(e.arg, env)
        elif isinstance(e, BinOp):
            visit_expr(e.lhs, env)
            visit_expr(e.rhs, env)
        elif isinstance(e, Call):
            for a in e.args:
                visit_expr(a, env)

    def visit_formula(f: Formula, env: dict[str, str]) -> None:
        if isinstance(f, Quant):
            t = typer.expr_type(f.bound, env)[0]
            if f.q == "all" and contains_closure(f.body):
                require(t, REASON_UNIVERSAL)
            visit_expr(f.bound, env)
            visit_formula(f.body, {**env, f.var: t})
        elif isinstance(f, Cmp):
            visit_expr(f.lhs, env)
            visit_expr(f.rhs, env)
        elif isinstance(f, Card):
            visit_expr(f.arg, env)
        elif isinstance(f, Not):
            visit_formula(f.arg, env)
        elif isinstance(f, BoolOp):
            visit_formula(f.lhs, env)
            visit_formula(f.rhs, env)

    for _, fact in problem.facts:
        visit_formula(fact, {})
    visit_formula(problem.goal, dict(skolem_env))


def _scalar_names(e: Expr) -> set[str]:
    out: set[str] = set()
    if isinstance(e, NameRef):
        out.add(e.name)
    elif isinstance(e, BinOp):
        out |= _scalar_names(e.lhs) | _scalar_names(e.rhs)
    elif isinstance(e, UnOp):
        out |= _scalar_names(e.arg)
    elif isinstance(e, Call):
        for a in e.args:
            out |= _scalar_names(a)
    return out


def plan_scopes(
    problem: CheckProblem,
    user_bounds: Optional[dict[str, int]] = None,
    default_scope: Optional[int] = None,
) -> ScopePlan:
    """Decide which types are finitized and to how many atoms.

    `user_bounds` force their types; `default_scope` (from `--scope` or the
    model's `check ... for n`) only supplies the bound for types that *must* be
    finitized and were not given one explicitly."""
    user_bounds = dict(user_bounds or {})
    hierarchy = problem.hierarchy
    if default_scope is None:
        default_scope = problem.check_scope

    for t in user_bounds:
        if t not in hierarchy:
            raise ScopeError(f"--bound for unknown type {t!r}")
    for t, n in user_bounds.items():
        if n < 1:
            raise ScopeError(f"bound for {t} must be at least 1, got {n}")

    plan = ScopePlan(default_scope=default_scope)
    required: dict[str, str] = {}

    def require(t: str, reason: str) -> None:
        # closure-operand is the more fundamental reason when both apply
        if reason == REASON_CLOSURE or t not in required:
            required[t] = reason

    _walk_closure_requirements(problem, require)

    missing: list[str] = []
    for t in sorted(required):
        explicit = [a for a in hierarchy.ancestors(t) if a in user_bounds]
        if explicit:
            continue  # covered by a user bound on itself or an ancestor
        if default_scope is None:
            missing.append(t)
        else:
            plan.bounds[t] = default_scope
            plan.reasons[t] = required[t]
    if missing:
        raise ScopeError(
            "a transitive closure requires finitizing "
            + ", ".join(missing)
            + "; give --bound <Type>=<n> or a global --scope",
            missing=tuple(missing),
        )

    for t, n in sorted(user_bounds.items()):
        plan.bounds[t] = n
        plan.reasons[t] = required.get(t, REASON_USER)

    # atom constants, freshened against everything visible in the problem
    gen = NameGen(set(problem.resolution.global_names()) | {s.name for s in problem.skolems})
    for t in sorted(plan.bounds):
        plan.atoms[t] = [gen.fresh(f"{t}{i}") for i in range(1, plan.bounds[t] + 1)]

    _assign_tc_depths(problem, plan)
    return plan


def _assign_tc_depths(problem: CheckProblem, plan: ScopePlan) -> None:
    typer = _Typer(problem.resolution)

    def visit_expr(e: Expr, env: dict[str, str]) -> None:
        if isinstance(e, UnOp):
            cols = typer.expr_type(e.arg, env)
            n = effective_bound(plan, problem.hierarchy, cols[0])
            assert n is not None, "closure domain must be bounded by now"
            plan.tc_depths[id(e)] = n
            visit_expr(e.arg, env)
        elif isinstance(e, BinOp):
            visit_expr(e.lhs, env)
            visit_expr(e.rhs, env)
        elif isinstance(e, Call):
            for a in e.args:
                visit_expr(a, env)

    def visit_formula(f: Formula, env: dict[str, str]) -> None:
        if isinstance(f, Quant):
            t = typer.expr_type(f.bound, env)[0]
            visit_expr(f.bound, env)
            visit_formula(f.body, {**env, f.var: t})
        elif isinstance(f, Cmp):
            visit_expr(f.lhs, env)
            visit_expr(f.rhs, env)
        elif isinstance(f, Card):
            visit_expr(f.arg, env)
        elif isinstance(f, Not):
            visit_formula(f.arg, env)
        elif isinstance(f, BoolOp):
            visit_formula(f.lhs, env)
            visit_formula(f.rhs, env)

    for _, fact in problem.facts:
        visit_formula(fact, {})
    visit_formula(problem.goal, problem.skolem_types())


def required_tc_depth(site: UnOp, plan: ScopePlan) -> int:
    """Unroll depth at a closure site: the bound of the operand's domain type."""
    return plan.tc_depths[id(site)]


def inline_universals(
    f: Formula, plan: ScopePlan, hierarchy: TypeHierarchy
) -> list[tuple[dict[str, tuple[str, str]], Formula]]:
    """Split a fact's bounded universal prefix into per-atom instances.

    Returns (bindings, body) pairs where bindings maps each inlined variable to
    (type, atom constant). A prefix variable over an unbounded type stops the
    split; the remainder is emitted as a native quantifier."""
    instances: list[tuple[dict[str, tuple[str, str]], Formula]] = [({}, f)]
    while True:
        head = instances[0][1]
        if not (isinstance(head, Quant) and head.q == "all" and isinstance(head.bound, NameRef)
                and head.bound.name in hierarchy):
            break
        t = head.bound.name
        carrier = atom_carrier(plan, hierarchy, t)
        if carrier is None:
            break
        new: list[tuple[dict[str, tuple[str, str]], Formula]] = []
        for env, g in instances:
            assert isinstance(g, Quant)
            for atom in plan.atoms[carrier]:
                new.append(({**env, g.var: (t, atom)}, g.body))
        instances = new
    return instances
