"""AST node types and the pretty printer.

Positions never participate in structural equality, so `parse(pretty(m)) == m`
is a meaningful round-trip check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Pos:
    line: int
    col: int


def _pos_field():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class NameRef:
    name: str
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class UnOp:
    op: str  # "^" or "*"
    arg: "Expr"
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class BinOp:
    op: str  # "." "->" "&" "+" "-"
    lhs: "Expr"
    rhs: "Expr"
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class Call:
    """A pred or fun invocation `name[e1, ..., ek]`; which one is resolved later."""

    name: str
    args: tuple["Expr", ...]
    pos: Optional[Pos] = _pos_field()


Expr = Union[NameRef, UnOp, BinOp, Call]


# ------------------------------------------------------------------- formulas

@dataclass(frozen=True)
class Cmp:
    op: str  # "=" "!=" "in" ":"
    lhs: Expr
    rhs: Expr
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class Not:
    arg: "Formula"
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" "or" "implies"
    lhs: "Formula"
    rhs: "Formula"
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class Quant:
    """Single-variable binder; multi-variable sugar is desugared by the parser."""

    q: str  # "all" "some" "no" "lone" "one"
    var: str
    bound: Expr
    body: "Formula"
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class Card:
    """Cardinality form: quantifier word applied to an expression."""

    q: str  # "no" "some" "one" "lone"
    arg: Expr
    pos: Optional[Pos] = _pos_field()


Formula = Union[Cmp, Not, BoolOp, Quant, Card, Call]


# --------------------------------------------------------------- declarations

@dataclass(frozen=True)
class FieldDecl:
    name: str
    cols: tuple[Expr, ...]  # non-owner columns, left to right
    mult: str  # "one" "lone" "some" "set" on the range (default "one")
    pos: Optional[Pos] = _pos_field()

    @property
    def arity(self) -> int:
        return 1 + len(self.cols)


@dataclass(frozen=True)
class SigDecl:
    name: str
    kind: str  # "top" "extends" "in"
    parent: Optional[str]
    abstract: bool
    fields: tuple[FieldDecl, ...]
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class Param:
    name: str
    type: Expr
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class FactDecl:
    name: Optional[str]
    body: tuple[Formula, ...]
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class PredDecl:
    name: str
    params: tuple[Param, ...]
    body: tuple[Formula, ...]
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class FunDecl:
    name: str
    params: tuple[Param, ...]
    ret_mult: str
    ret_type: Expr
    body: Expr
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class AssertDecl:
    name: str
    body: tuple[Formula, ...]
    pos: Optional[Pos] = _pos_field()


@dataclass(frozen=True)
class CheckDecl:
    assert_name: str
    scope: Optional[int]
    pos: Optional[Pos] = _pos_field()


Paragraph = Union[FactDecl, PredDecl, FunDecl, AssertDecl, CheckDecl]


@dataclass(frozen=True)
class SourceModel:
    sigs: tuple[SigDecl, ...]
    paragraphs: tuple[Paragraph, ...]
    name: str = "model"


# ------------------------------------------------------------- pretty printer

# Expression precedence, loosest to tightest. Unary ^/* bind tighter than
# everything, then "." > "->" > "&" > "+"/"-".
_EXPR_PREC = {"+": 1, "-": 1, "&": 2, "->": 3, ".": 4}
_UNARY_PREC = 5

_FORMULA_PREC = {"implies": 1, "or": 2, "and": 3}
_NOT_PREC = 4
_ATOM_PREC = 5


def expr_to_str(e: Expr, prec: int = 0) -> str:
    if isinstance(e, NameRef):
        return e.name
    if isinstance(e, Call):
        return f"{e.name}[{', '.join(expr_to_str(a) for a in e.args)}]"
    if isinstance(e, UnOp):
        s = e.op + expr_to_str(e.arg, _UNARY_PREC)
        return f"({s})" if prec > _UNARY_PREC else s
    if isinstance(e, BinOp):
        p = _EXPR_PREC[e.op]
        sep = e.op if e.op in (".",) else f" {e.op} "
        if e.op == "->":
            sep = "->"
        s = expr_to_str(e.lhs, p) + sep + expr_to_str(e.rhs, p + 1)
        return f"({s})" if prec > p else s
    raise TypeError(f"not an expression: {e!r}")


def _quant_groups(f: Formula) -> tuple[list[tuple[list[str], Expr]], Formula]:
    """Collect a prefix of same-quantifier binders into `v1, v2: T` groups."""
    assert isinstance(f, Quant)
    q = f.q
    groups: list[tuple[list[str], Expr]] = []
    seen: set[str] = set()
    node: Formula = f
    while isinstance(node, Quant) and node.q == q and node.var not in seen:
        if groups and groups[-1][1] == node.bound:
            groups[-1][0].append(node.var)
        else:
            groups.append(([node.var], node.bound))
        seen.add(node.var)
        node = node.body
    return groups, node


def formula_to_str(f: Formula, prec: int = 0) -> str:
    if isinstance(f, Quant):
        groups, body = _quant_groups(f)
        decls = ", ".join(f"{', '.join(vs)}: {expr_to_str(b)}" for vs, b in groups)
        s = f"{f.q} {decls} | {formula_to_str(body)}"
        return f"({s})" if prec > 0 else s
    if isinstance(f, BoolOp):
        p = _FORMULA_PREC[f.op]
        # implies is right-associative; and/or are parsed left-associatively
        lp, rp = (p + 1, p) if f.op == "implies" else (p, p + 1)
        s = f"{formula_to_str(f.lhs, lp)} {f.op} {formula_to_str(f.rhs, rp)}"
        return f"({s})" if prec > p else s
    if isinstance(f, Not):
        s = f"not {formula_to_str(f.arg, _NOT_PREC)}"
        return f"({s})" if prec > _NOT_PREC else s
    if isinstance(f, Cmp):
        op = f.op if f.op != ":" else ":"
        return f"{expr_to_str(f.lhs, 1)} {op} {expr_to_str(f.rhs, 1)}"
    if isinstance(f, Card):
        return f"{f.q} {expr_to_str(f.arg, 1)}"
    if isinstance(f, Call):
        return expr_to_str(f)
    raise TypeError(f"not a formula: {f!r}")


def _col_to_str(c: Expr) -> str:
    # Declaration columns are parsed without top-level arrows, so arrow
    # expressions need explicit parentheses to survive a round trip.
    return expr_to_str(c, _EXPR_PREC["->"] + 1)


def _field_to_str(fd: FieldDecl) -> str:
    cols = [_col_to_str(c) for c in fd.cols]
    if fd.mult == "one" and len(cols) == 1:
        rhs = cols[0]
    elif len(cols) == 1:
        rhs = f"{fd.mult} {cols[0]}"
    else:
        head = " -> ".join(cols[:-1])
        rhs = f"{head} -> {fd.mult + ' ' if fd.mult != 'one' else ''}{cols[-1]}"
    return f"{fd.name}: {rhs}"


def _params_to_str(params: tuple[Param, ...]) -> str:
    return ", ".join(f"{p.name}: {_col_to_str(p.type)}" for p in params)


def _block(formulas: tuple[Formula, ...]) -> str:
    return "".join(f"  {formula_to_str(f)}\n" for f in formulas)


def pretty_print(model: SourceModel) -> str:
    """Render a model as source text; re-parsing yields a structurally equal AST."""
    out: list[str] = []
    for sig in model.sigs:
        head = "abstract sig " if sig.abstract else "sig "
        head += sig.name
        if sig.kind == "extends":
            head += f" extends {sig.parent}"
        elif sig.kind == "in":
            head += f" in {sig.parent}"
        if sig.fields:
            out.append(head + " {\n" + ",\n".join("  " + _field_to_str(fd) for fd in sig.fields) + "\n}\n")
        else:
            out.append(head + " {}\n")
    for p in model.paragraphs:
        if isinstance(p, FactDecl):
            name = f" {p.name}" if p.name else ""
            out.append(f"fact{name} {{\n{_block(p.body)}}}\n")
        elif isinstance(p, PredDecl):
            out.append(f"pred {p.name} ({_params_to_str(p.params)}) {{\n{_block(p.body)}}}\n")
        elif isinstance(p, FunDecl):
            mult = f"{p.ret_mult} " if p.ret_mult != "one" else ""
            out.append(
                f"fun {p.name} ({_params_to_str(p.params)}): {mult}{_col_to_str(p.ret_type)} "
                f"{{\n  {expr_to_str(p.body)}\n}}\n"
            )
        elif isinstance(p, AssertDecl):
            out.append(f"assert {p.name} {{\n{_block(p.body)}}}\n")
        elif isinstance(p, CheckDecl):
            scope = f" for {p.scope}" if p.scope is not None else ""
            out.append(f"check {p.assert_name}{scope}\n")
    return "\n".join(out)
