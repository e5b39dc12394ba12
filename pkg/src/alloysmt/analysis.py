"""Semantic analysis: name resolution, the type hierarchy, arity/type checks,
predicate and function inlining, assertion negation, and skolemization.

The output is a CheckProblem: declarations plus conjoined facts plus the
negated, skolemized assertion, all with invocations expanded.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

from .errors import ResolveError
from .syntax import (
    AssertDecl, BinOp, BoolOp, Call, Card, CheckDecl, Cmp, Expr, FactDecl,
    Formula, FunDecl, NameRef, Not, Pos, PredDecl, Quant, SigDecl, SourceModel,
    UnOp,
)

THIS = "this"  # implicit receiver in field declarations


def _err(msg: str, pos: Optional[Pos]) -> ResolveError:
    if pos is None:
        return ResolveError(msg, 0, 0)
    return ResolveError(msg, pos.line, pos.col)


# -------------------------------------------------------------- type hierarchy

@dataclass(frozen=True)
class TypeInfo:
    name: str
    parent: Optional[str]
    kind: str  # "top" | "extends" | "in"
    abstract: bool


@dataclass
class TypeHierarchy:
    """A forest of sig types; extends-siblings are disjoint, abstract parents
    with extends-children are exhaustive."""

    types: dict[str, TypeInfo] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)

    def add(self, info: TypeInfo) -> None:
        self.types[info.name] = info
        self.order.append(info.name)

    def __contains__(self, name: str) -> bool:
        return name in self.types

    def parent_of(self, name: str) -> Optional[str]:
        return self.types[name].parent

    def children(self, name: str, kind: Optional[str] = None) -> list[str]:
        return [
            t.name for t in (self.types[n] for n in self.order)
            if t.parent == name and (kind is None or t.kind == kind)
        ]

    def ancestors(self, name: str) -> list[str]:
        """name itself first, root last."""
        chain = [name]
        while self.types[chain[-1]].parent is not None:
            chain.append(self.types[chain[-1]].parent)
        return chain

    def root_of(self, name: str) -> str:
        return self.ancestors(name)[-1]

    def is_subtype(self, a: str, b: str) -> bool:
        """a is b or a descendant of b."""
        return b in self.ancestors(a)

    def comparable(self, a: str, b: str) -> bool:
        return self.is_subtype(a, b) or self.is_subtype(b, a)

    def lca(self, a: str, b: str) -> Optional[str]:
        bs = self.ancestors(b)
        for t in self.ancestors(a):
            if t in bs:
                return t
        return None

    def meet(self, a: str, b: str) -> Optional[str]:
        """The more specific of two comparable types."""
        if self.is_subtype(a, b):
            return a
        if self.is_subtype(b, a):
            return b
        return None

    def validate(self) -> None:
        for info in self.types.values():
            if info.parent is not None:
                if info.parent not in self.types:
                    raise ResolveError(f"unknown parent sig {info.parent!r} of {info.name!r}", 0, 0)
                seen = {info.name}
                cur = info.parent
                while cur is not None:
                    if cur in seen:
                        raise ResolveError(f"cyclic sig hierarchy through {info.name!r}", 0, 0)
                    seen.add(cur)
                    cur = self.types[cur].parent


# ------------------------------------------------------------ relation schemas

@dataclass(frozen=True)
class RelationSchema:
    """A declared field. col_types includes the owner column first; a column
    whose declared bound is an expression (rather than a bare sig) keeps that
    expression, rewritten against `this`, as a domain restriction."""

    name: str
    owner: str
    col_types: tuple[str, ...]
    mult: str  # range multiplicity: one | lone | some | set
    restrictions: tuple[Optional[Expr], ...]  # aligned with col_types
    pos: Optional[Pos] = None

    @property
    def arity(self) -> int:
        return len(self.col_types)

    @property
    def functional(self) -> bool:
        return self.mult in ("one", "lone")


# ------------------------------------------------------------------ resolution

@dataclass
class Resolution:
    hierarchy: TypeHierarchy
    schemas: dict[str, RelationSchema]
    preds: dict[str, PredDecl]
    funs: dict[str, FunDecl]
    facts: list[FactDecl]
    asserts: dict[str, AssertDecl]
    checks: dict[str, Optional[int]]
    model: SourceModel

    def global_names(self) -> set[str]:
        return (
            set(self.hierarchy.types) | set(self.schemas)
            | set(self.preds) | set(self.funs) | set(self.asserts)
        )


def _conjoin(formulas: tuple[Formula, ...], pos: Optional[Pos]) -> Formula:
    f = formulas[0]
    for g in formulas[1:]:
        f = BoolOp("and", f, g, g.pos if g.pos else pos)
    return f


class _Typer:
    """Arity and column-type computation for expressions, plus formula checks."""

    def __init__(self, res: Resolution):
        self.res = res

    def expr_type(self, e: Expr, env: dict[str, str]) -> tuple[str, ...]:
        h = self.res.hierarchy
        if isinstance(e, NameRef):
            if e.name in env:
                return (env[e.name],)
            if e.name in self.res.schemas:
                return self.res.schemas[e.name].col_types
            if e.name in h:
                return (e.name,)
            raise _err(f"unbound name {e.name!r}", e.pos)
        if isinstance(e, Call):
            fn = self.res.funs.get(e.name)
            if fn is None:
                if e.name in self.res.preds:
                    raise _err(f"predicate {e.name!r} used as an expression", e.pos)
                raise _err(f"unbound function {e.name!r}", e.pos)
            self._check_args(e, fn.params, env)
            return self.expr_type(fn.ret_type, self._param_env(fn.params))
        if isinstance(e, UnOp):
            t = self.expr_type(e.arg, env)
            if len(t) != 2:
                raise _err(f"{e.op!r} needs a binary expression, got arity {len(t)}", e.pos)
            if not h.comparable(t[0], t[1]):
                raise _err(
                    f"{e.op!r} needs a homogeneous relation, got {t[0]} -> {t[1]}", e.pos
                )
            if e.op == "*":
                top = h.lca(t[0], t[1])
                assert top is not None
                return (top, top)
            return t
        if isinstance(e, BinOp):
            lt = self.expr_type(e.lhs, env)
            rt = self.expr_type(e.rhs, env)
            if e.op == ".":
                if len(lt) + len(rt) - 2 < 1:
                    raise _err("join of two scalars has arity 0", e.pos)
                if not h.comparable(lt[-1], rt[0]):
                    raise _err(
                        f"join columns {lt[-1]} and {rt[0]} can never share atoms", e.pos
                    )
                return lt[:-1] + rt[1:]
            if e.op == "->":
                return lt + rt
            # set operators need equal arities and comparable columns
            if len(lt) != len(rt):
                raise _err(
                    f"{e.op!r} needs equal arities, got {len(lt)} and {len(rt)}", e.pos
                )
            cols = []
            for a, b in zip(lt, rt):
                if not h.comparable(a, b):
                    raise _err(f"{e.op!r} over incompatible columns {a} and {b}", e.pos)
                cols.append(h.lca(a, b) if e.op == "+" else (a if e.op == "-" else h.meet(a, b)))
            return tuple(cols)  # type: ignore[arg-type]
        raise _err(f"not an expression: {type(e).__name__}", getattr(e, "pos", None))

    def _param_env(self, params) -> dict[str, str]:
        env = {}
        for p in params:
            t = self.expr_type(p.type, env)
            if len(t) != 1:
                raise _err(f"parameter {p.name!r} must have a unary type", p.pos)
            env[p.name] = t[0]
        return env

    def _check_args(self, call: Call, params, env: dict[str, str]) -> None:
        if len(call.args) != len(params):
            raise _err(
                f"{call.name!r} expects {len(params)} arguments, got {len(call.args)}",
                call.pos,
            )
        penv = self._param_env(params)
        for arg, p in zip(call.args, params):
            at = self.expr_type(arg, env)
            pt = penv[p.name]
            if len(at) != 1:
                raise _err(f"argument for {p.name!r} must be unary", call.pos)
            if not self.res.hierarchy.comparable(at[0], pt):
                raise _err(
                    f"argument type {at[0]} incompatible with parameter "
                    f"{p.name}: {pt}", call.pos,
                )

    def check_formula(self, f: Formula, env: dict[str, str]) -> None:
        h = self.res.hierarchy
        if isinstance(f, Cmp):
            lt = self.expr_type(f.lhs, env)
            rt = self.expr_type(f.rhs, env)
            if len(lt) != len(rt):
                raise _err(
                    f"{f.op!r} compares arity {len(lt)} with arity {len(rt)}", f.pos
                )
            for a, b in zip(lt, rt):
                if not h.comparable(a, b):
                    raise _err(f"{f.op!r} over incompatible columns {a} and {b}", f.pos)
        elif isinstance(f, Card):
            self.expr_type(f.arg, env)
        elif isinstance(f, Not):
            self.check_formula(f.arg, env)
        elif isinstance(f, BoolOp):
            self.check_formula(f.lhs, env)
            self.check_formula(f.rhs, env)
        elif isinstance(f, Quant):
            t = self.expr_type(f.bound, env)
            if len(t) != 1:
                raise _err(f"quantifier bound for {f.var!r} must be unary", f.pos)
            self.check_formula(f.body, {**env, f.var: t[0]})
        elif isinstance(f, Call):
            pd = self.res.preds.get(f.name)
            if pd is None:
                if f.name in self.res.funs:
                    raise _err(f"function {f.name!r} used as a formula", f.pos)
                raise _err(f"unbound predicate {f.name!r}", f.pos)
            self._check_args(f, pd.params, env)
        else:
            raise _err(f"not a formula: {type(f).__name__}", getattr(f, "pos", None))


def resolve_and_check(model: SourceModel) -> Resolution:
    """Bind every name, build the hierarchy and relation schemas, and
    type/arity-check every paragraph body."""
    hierarchy = TypeHierarchy()
    taken: set[str] = set()

    def claim(name: str, what: str, pos: Optional[Pos]) -> None:
        if name in taken:
            raise _err(f"duplicate declaration of {name!r} ({what})", pos)
        taken.add(name)

    for sig in model.sigs:
        claim(sig.name, "sig", sig.pos)
        hierarchy.add(
            TypeInfo(sig.name, sig.parent, "top" if sig.parent is None else sig.kind, sig.abstract)
        )
    hierarchy.validate()

    res = Resolution(hierarchy, {}, {}, {}, [], {}, {}, model)
    typer = _Typer(res)

    for sig in model.sigs:
        for fd in sig.fields:
            claim(fd.name, "field", fd.pos)
            col_types: list[str] = [sig.name]
            restrictions: list[Optional[Expr]] = [None]
            for col in fd.cols:
                if isinstance(col, NameRef) and col.name in hierarchy:
                    col_types.append(col.name)
                    restrictions.append(None)
                else:
                    bound = _bind_this(col, sig.name, res)
                    t = typer.expr_type(bound, {THIS: sig.name})
                    if len(t) != 1:
                        raise _err(
                            f"column bound of field {fd.name!r} must be unary",
                            fd.pos,
                        )
                    col_types.append(t[0])
                    restrictions.append(bound)
            res.schemas[fd.name] = RelationSchema(
                fd.name, sig.name, tuple(col_types), fd.mult, tuple(restrictions), fd.pos
            )

    for p in model.paragraphs:
        if isinstance(p, PredDecl):
            claim(p.name, "pred", p.pos)
            res.preds[p.name] = p
        elif isinstance(p, FunDecl):
            claim(p.name, "fun", p.pos)
            res.funs[p.name] = p
        elif isinstance(p, AssertDecl):
            claim(p.name, "assert", p.pos)
            res.asserts[p.name] = p
        elif isinstance(p, FactDecl):
            res.facts.append(p)
        elif isinstance(p, CheckDecl):
            if p.assert_name not in res.asserts:
                raise _err(f"check of unknown assertion {p.assert_name!r}", p.pos)
            res.checks[p.assert_name] = p.scope

    # type-check every body now that all declarations are known
    for pd in res.preds.values():
        env = typer._param_env(pd.params)
        for f in pd.body:
            typer.check_formula(f, env)
    for fn in res.funs.values():
        env = typer._param_env(fn.params)
        ret = typer.expr_type(fn.ret_type, env)
        body_t = typer.expr_type(fn.body, env)
        if len(body_t) != len(ret):
            raise _err(
                f"fun {fn.name!r} body arity {len(body_t)} does not match its "
                f"declared type", fn.pos,
            )
    for fa in res.facts:
        for f in fa.body:
            typer.check_formula(f, {})
    for ad in res.asserts.values():
        for f in ad.body:
            typer.check_formula(f, {})
    return res


def _bind_this(col: Expr, sig_name: str, res: Resolution) -> Expr:
    """Rewrite a bare field reference inside a field declaration to `this.f`."""
    if isinstance(col, NameRef):
        if col.name in res.schemas and res.schemas[col.name].owner == sig_name:
            return BinOp(".", NameRef(THIS, col.pos), col, col.pos)
        return col
    if isinstance(col, BinOp):
        return replace(col, lhs=_bind_this(col.lhs, sig_name, res), rhs=_bind_this(col.rhs, sig_name, res))
    if isinstance(col, Call):
        return replace(col, args=tuple(_bind_this(a, sig_name, res) for a in col.args))
    if isinstance(col, UnOp):
        return replace(col, arg=_bind_this(col.arg, sig_name, res))
    return col


# ------------------------------------------------------------- AST transforms

class NameGen:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)

    def fresh(self, base: str) -> str:
        if base not in self.taken:
            self.taken.add(base)
            return base
        i = 2
        while f"{base}{i}" in self.taken:
            i += 1
        name = f"{base}{i}"
        self.taken.add(name)
        return name


def names_in(node: Union[Expr, Formula]) -> set[str]:
    out: set[str] = set()

    def walk(n) -> None:
        if isinstance(n, NameRef):
            out.add(n.name)
        elif isinstance(n, Call):
            out.add(n.name)
            for a in n.args:
                walk(a)
        elif isinstance(n, (Cmp,)):
            walk(n.lhs)
            walk(n.rhs)
        elif isinstance(n, BoolOp):
            walk(n.lhs)
            walk(n.rhs)
        elif isinstance(n, Not):
            walk(n.arg)
        elif isinstance(n, Quant):
            out.add(n.var)
            walk(n.bound)
            walk(n.body)
        elif isinstance(n, Card):
            walk(n.arg)
        elif isinstance(n, BinOp):
            walk(n.lhs)
            walk(n.rhs)
        elif isinstance(n, UnOp):
            walk(n.arg)

    walk(node)
    return out


def substitute(node, mapping: dict[str, Expr], gen: NameGen):
    """Capture-avoiding substitution of variables by expressions."""
    if not mapping:
        return node
    if isinstance(node, NameRef):
        return mapping.get(node.name, node)
    if isinstance(node, UnOp):
        return replace(node, arg=substitute(node.arg, mapping, gen))
    if isinstance(node, BinOp):
        return replace(node, lhs=substitute(node.lhs, mapping, gen), rhs=substitute(node.rhs, mapping, gen))
    if isinstance(node, Call):
        return replace(node, args=tuple(substitute(a, mapping, gen) for a in node.args))
    if isinstance(node, Cmp):
        return replace(node, lhs=substitute(node.lhs, mapping, gen), rhs=substitute(node.rhs, mapping, gen))
    if isinstance(node, Not):
        return replace(node, arg=substitute(node.arg, mapping, gen))
    if isinstance(node, BoolOp):
        return replace(node, lhs=substitute(node.lhs, mapping, gen), rhs=substitute(node.rhs, mapping, gen))
    if isinstance(node, Card):
        return replace(node, arg=substitute(node.arg, mapping, gen))
    if isinstance(node, Quant):
        bound = substitute(node.bound, mapping, gen)
        inner = {k: v for k, v in mapping.items() if k != node.var}
        clash = any(node.var in names_in(v) for v in inner.values())
        var, body = node.var, node.body
        if clash:
            var = gen.fresh(node.var)
            body = substitute(body, {node.var: NameRef(var, node.pos)}, gen)
        return replace(node, var=var, bound=bound, body=substitute(body, inner, gen))
    raise TypeError(f"cannot substitute in {type(node).__name__}")


def retag_positions(node, pos: Optional[Pos]):
    """Stamp every node in a subtree with one position (used when inlining, so
    emitted constraints point at the call site)."""
    if isinstance(node, NameRef):
        return replace(node, pos=pos)
    if isinstance(node, UnOp):
        return replace(node, arg=retag_positions(node.arg, pos), pos=pos)
    if isinstance(node, BinOp):
        return replace(node, lhs=retag_positions(node.lhs, pos), rhs=retag_positions(node.rhs, pos), pos=pos)
    if isinstance(node, Call):
        return replace(node, args=tuple(retag_positions(a, pos) for a in node.args), pos=pos)
    if isinstance(node, Cmp):
        return replace(node, lhs=retag_positions(node.lhs, pos), rhs=retag_positions(node.rhs, pos), pos=pos)
    if isinstance(node, Not):
        return replace(node, arg=retag_positions(node.arg, pos), pos=pos)
    if isinstance(node, BoolOp):
        return replace(node, lhs=retag_positions(node.lhs, pos), rhs=retag_positions(node.rhs, pos), pos=pos)
    if isinstance(node, Card):
        return replace(node, arg=retag_positions(node.arg, pos), pos=pos)
    if isinstance(node, Quant):
        return replace(node, bound=retag_positions(node.bound, pos), body=retag_positions(node.body, pos), pos=pos)
    raise TypeError(f"cannot retag {type(node).__name__}")


def inline_invocations(node, res: Resolution, gen: Optional[NameGen] = None, _stack: tuple[str, ...] = ()):
    """Replace every pred/fun invocation by its body with parameters
    substituted; substitution is capture-avoiding, recursion is an error."""
    if gen is None:
        gen = NameGen(res.global_names() | names_in_model(res.model))
    if isinstance(node, Call):
        if node.name in _stack:
            raise _err(f"recursive invocation of {node.name!r}", node.pos)
        decl = res.preds.get(node.name) or res.funs.get(node.name)
        if decl is None:
            raise _err(f"unbound invocation {node.name!r}", node.pos)
        args = [inline_invocations(a, res, gen, _stack) for a in node.args]
        mapping = {p.name: a for p, a in zip(decl.params, args)}
        if isinstance(decl, PredDecl):
            body: Union[Expr, Formula] = _conjoin(decl.body, decl.pos)
        else:
            body = decl.body
        body = retag_positions(body, node.pos)
        body = substitute(body, mapping, gen)
        return inline_invocations(body, res, gen, _stack + (node.name,))
    if isinstance(node, NameRef):
        return node
    if isinstance(node, UnOp):
        return replace(node, arg=inline_invocations(node.arg, res, gen, _stack))
    if isinstance(node, BinOp):
        return replace(node, lhs=inline_invocations(node.lhs, res, gen, _stack),
                       rhs=inline_invocations(node.rhs, res, gen, _stack))
    if isinstance(node, Cmp):
        return replace(node, lhs=inline_invocations(node.lhs, res, gen, _stack),
                       rhs=inline_invocations(node.rhs, res, gen, _stack))
    if isinstance(node, Not):
        return replace(node, arg=inline_invocations(node.arg, res, gen, _stack))
    if isinstance(node, BoolOp):
        return replace(node, lhs=inline_invocations(node.lhs, res, gen, _stack),
                       rhs=inline_invocations(node.rhs, res, gen, _stack))
    if isinstance(node, Card):
        return replace(node, arg=inline_invocations(node.arg, res, gen, _stack))
    if isinstance(node, Quant):
        return replace(node, bound=inline_invocations(node.bound, res, gen, _stack),
                       body=inline_invocations(node.body, res, gen, _stack))
    raise TypeError(f"cannot inline in {type(node).__name__}")


def names_in_model(model: SourceModel) -> set[str]:
    out: set[str] = set()
    for p in model.paragraphs:
        if isinstance(p, (PredDecl, FunDecl)):
            out |= {q.name for q in p.params}
            bodies = p.body if isinstance(p, PredDecl) else (p.body,)
            for b in bodies:
                out |= names_in(b)
        elif isinstance(p, (FactDecl, AssertDecl)):
            for b in p.body:
                out |= names_in(b)
    return out


def normalize(f: Formula, res: Resolution, env: dict[str, str], gen: NameGen) -> Formula:
    """Desugar `p : q`, `!=`, and the no/lone/one quantifiers into the
    all/some core."""
    typer = _Typer(res)
    if isinstance(f, Cmp):
        if f.op == "!=":
            return Not(Cmp("=", f.lhs, f.rhs, f.pos), f.pos)
        if f.op == ":":
            rt = typer.expr_type(f.rhs, env)
            base = Cmp("in", f.lhs, f.rhs, f.pos)
            if len(rt) == 1:
                return BoolOp("and", base, Card("one", f.lhs, f.pos), f.pos)
            return base
        return f
    if isinstance(f, Not):
        return replace(f, arg=normalize(f.arg, res, env, gen))
    if isinstance(f, BoolOp):
        return replace(f, lhs=normalize(f.lhs, res, env, gen), rhs=normalize(f.rhs, res, env, gen))
    if isinstance(f, Card):
        return f
    if isinstance(f, Quant):
        t = typer.expr_type(f.bound, env)[0]
        body = normalize(f.body, res, {**env, f.var: t}, gen)
        if f.q in ("all", "some"):
            return replace(f, body=body)
        if f.q == "no":
            return Quant("all", f.var, f.bound, Not(body, f.pos), f.pos)
        if f.q == "lone":
            return _lone_quant(f, body, gen)
        if f.q == "one":
            return BoolOp(
                "and",
                Quant("some", f.var, f.bound, body, f.pos),
                _lone_quant(f, body, gen),
                f.pos,
            )
    if isinstance(f, Call):
        raise _err(f"invocation {f.name!r} must be inlined before normalization", f.pos)
    raise TypeError(f"cannot normalize {type(f).__name__}")


def _lone_quant(f: Quant, body: Formula, gen: NameGen) -> Formula:
    """lone x: e | F  ==  all x, x2: e | (F and F[x2/x]) implies x = x2"""
    v2 = gen.fresh(f.var)
    body2 = substitute(body, {f.var: NameRef(v2, f.pos)}, gen)
    matrix = BoolOp(
        "implies",
        BoolOp("and", body, body2, f.pos),
        Cmp("=", NameRef(f.var, f.pos), NameRef(v2, f.pos), f.pos),
        f.pos,
    )
    return Quant("all", f.var, f.bound, Quant("all", v2, f.bound, matrix, f.pos), f.pos)


_CARD_DUAL = {"no": "some", "some": "no"}


def nnf(f: Formula, negate: bool = False) -> Formula:
    """Push negation to atoms; universals and existentials dualize."""
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, BoolOp):
        if f.op == "implies":
            if negate:
                return BoolOp("and", nnf(f.lhs, False), nnf(f.rhs, True), f.pos)
            return replace(f, lhs=nnf(f.lhs, False), rhs=nnf(f.rhs, False))
        if negate:
            dual = "or" if f.op == "and" else "and"
            return BoolOp(dual, nnf(f.lhs, True), nnf(f.rhs, True), f.pos)
        return replace(f, lhs=nnf(f.lhs, False), rhs=nnf(f.rhs, False))
    if isinstance(f, Quant):
        assert f.q in ("all", "some"), "normalize() must run before nnf()"
        body = nnf(f.body, negate)
        q = f.q if not negate else ("some" if f.q == "all" else "all")
        return Quant(q, f.var, f.bound, body, f.pos)
    if isinstance(f, Card):
        if negate and f.q in _CARD_DUAL:
            return Card(_CARD_DUAL[f.q], f.arg, f.pos)
        return Not(f, f.pos) if negate else f
    if isinstance(f, Cmp):
        return Not(f, f.pos) if negate else f
    if isinstance(f, Call):
        raise _err(f"invocation {f.name!r} must be inlined before nnf", f.pos)
    raise TypeError(f"cannot nnf {type(f).__name__}")


def build_goal(assertion_body: Formula) -> Formula:
    """Negate an inlined, closed assertion and push the negation inward."""
    return nnf(assertion_body, negate=True)


# --------------------------------------------------------------- skolemization

@dataclass(frozen=True)
class Skolem:
    name: str
    type: str
    exclude_nonvalue: bool
    orig_var: str


def nonvalue_types(res: Resolution) -> set[str]:
    """Root types whose sort carries a non-value constant (partial-function
    ranges encoded as total functions)."""
    out = set()
    for sc in res.schemas.values():
        if sc.mult == "lone":
            out.add(res.hierarchy.root_of(sc.col_types[-1]))
    return out


def skolemize(goal: Formula, res: Resolution, gen: Optional[NameGen] = None,
              env: Optional[dict[str, str]] = None) -> tuple[list[Skolem], Formula]:
    """Strip the outermost existential prefix into fresh constants. Existential
    quantifiers left under a universal are rejected (not exercised by the
    corpus)."""
    if gen is None:
        gen = NameGen(res.global_names() | names_in(goal))
    env = dict(env or {})
    typer = _Typer(res)
    nv = nonvalue_types(res)
    skolems: list[Skolem] = []
    side: list[Formula] = []
    while isinstance(goal, Quant) and goal.q == "some":
        t = typer.expr_type(goal.bound, env)[0]
        name = goal.var if goal.var not in gen.taken else gen.fresh(goal.var)
        gen.taken.add(name)
        body = goal.body
        if name != goal.var:
            body = substitute(body, {goal.var: NameRef(name, goal.pos)}, gen)
        if not (isinstance(goal.bound, NameRef) and goal.bound.name in res.hierarchy):
            side.append(Cmp("in", NameRef(name, goal.pos), goal.bound, goal.pos))
        skolems.append(Skolem(name, t, res.hierarchy.root_of(t) in nv, goal.var))
        env[name] = t
        goal = body
    _reject_alternation(goal)
    for extra in reversed(side):
        goal = BoolOp("and", extra, goal, extra.pos)
    return skolems, goal


def _reject_alternation(f: Formula, under_all: bool = False) -> None:
    if isinstance(f, Quant):
        if f.q == "some" and under_all:
            raise _err("quantifier alternation unsupported (existential under a universal)", f.pos)
        _reject_alternation(f.body, under_all or f.q == "all")
    elif isinstance(f, BoolOp):
        _reject_alternation(f.lhs, under_all)
        _reject_alternation(f.rhs, under_all)
    elif isinstance(f, Not):
        _reject_alternation(f.arg, under_all)


# ---------------------------------------------------------------- CheckProblem

@dataclass
class CheckProblem:
    """Normalized relational IR: declarations + conjoined facts + the negated,
    skolemized assertion."""

    hierarchy: TypeHierarchy
    schemas: dict[str, RelationSchema]
    resolution: Resolution
    assertion_name: str
    facts: list[tuple[Optional[str], Formula]]  # inlined, normalized, positive
    goal: Formula  # negated assertion, NNF, skolemized
    goal_exists: Formula  # same, with the existential prefix still quantified
    skolems: list[Skolem]
    check_scope: Optional[int] = None

    def skolem_types(self) -> dict[str, str]:
        return {s.name: s.type for s in self.skolems}


def analyze(model: SourceModel, assertion_name: str) -> CheckProblem:
    """Full front half of the pipeline: resolve, inline, normalize, negate,
    skolemize."""
    res = resolve_and_check(model)
    if assertion_name not in res.asserts:
        known = ", ".join(sorted(res.asserts)) or "none"
        raise ResolveError(f"no assertion named {assertion_name!r} (known: {known})", 0, 0)
    gen = NameGen(res.global_names() | names_in_model(res.model) | {THIS})

    facts: list[tuple[Optional[str], Formula]] = []
    for fa in res.facts:
        for raw in fa.body:
            f = normalize(inline_invocations(raw, res, gen), res, {}, gen)
            _reject_alternation(f)
            facts.append((fa.name, f))

    ad = res.asserts[assertion_name]
    body = _conjoin(ad.body, ad.pos)
    inlined = normalize(inline_invocations(body, res, gen), res, {}, gen)
    goal_exists = build_goal(inlined)
    # Seed only with global declarations so skolem constants can reuse the
    # Alloy variable names (suffixing happens on a genuine clash).
    skolems, goal = skolemize(goal_exists, res, NameGen(res.global_names()))
    return CheckProblem(
        hierarchy=res.hierarchy,
        schemas=res.schemas,
        resolution=res,
        assertion_name=assertion_name,
        facts=facts,
        goal=goal,
        goal_exists=goal_exists,
        skolems=skolems,
        check_scope=res.checks.get(assertion_name),
    )
