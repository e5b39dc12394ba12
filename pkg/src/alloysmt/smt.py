"""Abstract SMT terms, script commands, and the SMT-LIB v2.6 printer.

The term language keeps two higher-level constructs the translation produces
(`Update` for function overrides and `FunEq` for equality of function-valued
terms); `emit` lowers them to standard SMT-LIB: updates become fresh
`define-fun` symbols characterized pointwise by an ite, and function
equalities become one guarded universal over the argument columns.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

# ---------------------------------------------------------------------- sorts

BOOL = "Bool"


@dataclass(frozen=True)
class FunSort:
    args: tuple[str, ...]
    ret: str


SortLike = Union[str, FunSort]


# ---------------------------------------------------------------------- terms

@dataclass(frozen=True)
class Sym:
    """Reference to a declared constant or function symbol."""

    name: str
    sort: SortLike


@dataclass(frozen=True)
class Var:
    name: str
    sort: str


@dataclass(frozen=True)
class App:
    fn: "Term"
    args: tuple["Term", ...]


@dataclass(frozen=True)
class Update:
    """Function override: fn with the point `at` (a prefix of its argument
    list) remapped to val; val may itself be function-sorted."""

    fn: "Term"
    at: tuple["Term", ...]
    val: "Term"


@dataclass(frozen=True)
class Eq:
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class FunEq:
    """Pointwise equality of two function-valued terms; arg_types are the
    source-language column types, used for membership guards at lowering."""

    lhs: "Term"
    rhs: "Term"
    arg_types: tuple[str, ...]


@dataclass(frozen=True)
class Not:
    arg: "Term"


@dataclass(frozen=True)
class And:
    args: tuple["Term", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Term", ...]


@dataclass(frozen=True)
class Implies:
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class Ite:
    cond: "Term"
    then: "Term"
    other: "Term"


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Quantified:
    kind: str  # "forall" | "exists"
    var: str
    sort: str
    body: "Term"


TRUE = BoolLit(True)
FALSE = BoolLit(False)

Term = Union[Sym, Var, App, Update, Eq, FunEq, Not, And, Or, Implies, Ite, BoolLit, Quantified]


def sort_of(t: Term) -> SortLike:
    if isinstance(t, (Sym,)):
        return t.sort
    if isinstance(t, Var):
        return t.sort
    if isinstance(t, App):
        fs = sort_of(t.fn)
        assert isinstance(fs, FunSort), f"applying non-function {t.fn!r}"
        rest = fs.args[len(t.args):]
        return fs.ret if not rest else FunSort(rest, fs.ret)
    if isinstance(t, Update):
        return sort_of(t.fn)
    if isinstance(t, Ite):
        return sort_of(t.then)
    return BOOL


def apply_term(fn: Term, args: tuple[Term, ...]) -> Term:
    """Application that flattens nested Apps, so curried partial applications
    print as a single flat application."""
    if not args:
        return fn
    if isinstance(fn, App):
        return App(fn.fn, fn.args + args)
    return App(fn, args)


def conj(*terms: Term) -> Term:
    flat: list[Term] = []
    for t in terms:
        if isinstance(t, And):
            flat.extend(t.args)
        elif isinstance(t, BoolLit):
            if not t.value:
                return FALSE
        else:
            flat.append(t)
    seen: dict[Term, None] = dict.fromkeys(flat)
    flat = list(seen)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*terms: Term) -> Term:
    flat: list[Term] = []
    for t in terms:
        if isinstance(t, Or):
            flat.extend(t.args)
        elif isinstance(t, BoolLit):
            if t.value:
                return TRUE
        else:
            flat.append(t)
    flat = list(dict.fromkeys(flat))
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(t: Term) -> Term:
    if isinstance(t, BoolLit):
        return BoolLit(not t.value)
    if isinstance(t, Not):
        return t.arg
    return Not(t)


def implies(a: Term, b: Term) -> Term:
    if isinstance(a, BoolLit):
        return b if a.value else TRUE
    if isinstance(b, BoolLit) and b.value:
        return TRUE
    return Implies(a, b)


def eq(a: Term, b: Term) -> Term:
    if a == b:
        return TRUE
    return Eq(a, b)


def subst_var(t: Term, var: str, value: Term) -> Term:
    if isinstance(t, Var):
        return value if t.name == var else t
    if isinstance(t, (Sym, BoolLit)):
        return t
    if isinstance(t, App):
        return App(subst_var(t.fn, var, value), tuple(subst_var(a, var, value) for a in t.args))
    if isinstance(t, Update):
        return Update(subst_var(t.fn, var, value),
                      tuple(subst_var(a, var, value) for a in t.at),
                      subst_var(t.val, var, value))
    if isinstance(t, Eq):
        return Eq(subst_var(t.lhs, var, value), subst_var(t.rhs, var, value))
    if isinstance(t, FunEq):
        return FunEq(subst_var(t.lhs, var, value), subst_var(t.rhs, var, value), t.arg_types)
    if isinstance(t, Not):
        return Not(subst_var(t.arg, var, value))
    if isinstance(t, And):
        return And(tuple(subst_var(a, var, value) for a in t.args))
    if isinstance(t, Or):
        return Or(tuple(subst_var(a, var, value) for a in t.args))
    if isinstance(t, Implies):
        return Implies(subst_var(t.lhs, var, value), subst_var(t.rhs, var, value))
    if isinstance(t, Ite):
        return Ite(subst_var(t.cond, var, value), subst_var(t.then, var, value),
                   subst_var(t.other, var, value))
    if isinstance(t, Quantified):
        if t.var == var:
            return t
        return Quantified(t.kind, t.var, t.sort, subst_var(t.body, var, value))
    raise TypeError(f"cannot substitute in {type(t).__name__}")


def _occurs(t: Term, var: str) -> bool:
    if isinstance(t, Var):
        return t.name == var
    if isinstance(t, (Sym, BoolLit)):
        return False
    if isinstance(t, App):
        return _occurs(t.fn, var) or any(_occurs(a, var) for a in t.args)
    if isinstance(t, Update):
        return _occurs(t.fn, var) or any(_occurs(a, var) for a in t.at) or _occurs(t.val, var)
    if isinstance(t, (Eq,)):
        return _occurs(t.lhs, var) or _occurs(t.rhs, var)
    if isinstance(t, FunEq):
        return _occurs(t.lhs, var) or _occurs(t.rhs, var)
    if isinstance(t, Not):
        return _occurs(t.arg, var)
    if isinstance(t, (And, Or)):
        return any(_occurs(a, var) for a in t.args)
    if isinstance(t, Implies):
        return _occurs(t.lhs, var) or _occurs(t.rhs, var)
    if isinstance(t, Ite):
        return _occurs(t.cond, var) or _occurs(t.then, var) or _occurs(t.other, var)
    if isinstance(t, Quantified):
        return t.var != var and _occurs(t.body, var)
    raise TypeError(type(t).__name__)


def exists(var: str, sort: str, body: Term) -> Term:
    """Existential with the one-point rule: ∃x. x=t ∧ φ(x) becomes φ(t)."""
    if isinstance(body, BoolLit):
        return body
    if not _occurs(body, var):
        return body
    parts = list(body.args) if isinstance(body, And) else [body]
    for i, p in enumerate(parts):
        if isinstance(p, Eq):
            for a, b in ((p.lhs, p.rhs), (p.rhs, p.lhs)):
                if isinstance(a, Var) and a.name == var and not _occurs(b, var):
                    rest = parts[:i] + parts[i + 1:]
                    return conj(*(subst_var(r, var, b) for r in rest))
    return Quantified("exists", var, sort, body)


def forall(var: str, sort: str, body: Term) -> Term:
    """Universal with the dual one-point rule: ∀x. x=t ⇒ φ(x) becomes φ(t)."""
    if isinstance(body, BoolLit):
        return body
    if not _occurs(body, var):
        return body
    if isinstance(body, Implies):
        hyp = list(body.lhs.args) if isinstance(body.lhs, And) else [body.lhs]
        for i, p in enumerate(hyp):
            if isinstance(p, Eq):
                for a, b in ((p.lhs, p.rhs), (p.rhs, p.lhs)):
                    if isinstance(a, Var) and a.name == var and not _occurs(b, var):
                        rest = hyp[:i] + hyp[i + 1:]
                        new = implies(conj(*rest), body.rhs)
                        return subst_var(new, var, b)
    return Quantified("forall", var, sort, body)


# ------------------------------------------------------------------- commands

@dataclass(frozen=True)
class DeclareSort:
    name: str
    src: Optional[int] = None


@dataclass(frozen=True)
class DeclareFun:
    name: str
    args: tuple[str, ...]
    ret: str
    src: Optional[int] = None


@dataclass(frozen=True)
class DeclareConst:
    name: str
    sort: str
    src: Optional[int] = None


@dataclass(frozen=True)
class DefineFun:
    name: str
    params: tuple[tuple[str, str], ...]
    ret: str
    body: Term
    src: Optional[int] = None


@dataclass(frozen=True)
class Assert:
    term: Term
    src: Optional[int] = None


@dataclass(frozen=True)
class Comment:
    text: str


Command = Union[DeclareSort, DeclareFun, DeclareConst, DefineFun, Assert, Comment]


@dataclass
class SmtScript:
    """Ordered declarations and assertions plus the metadata the solver driver
    needs to map a model back onto the source relations."""

    commands: list[Command] = field(default_factory=list)
    logic: str = "UF"
    # registry handed over by the translation:
    sort_of_type: dict[str, str] = field(default_factory=dict)
    guard_fns: dict[str, tuple[str, ...]] = field(default_factory=dict)  # type -> membership syms, outermost first
    nonvalues: dict[str, str] = field(default_factory=dict)  # root type -> constant
    atoms: dict[str, list[str]] = field(default_factory=dict)
    symbol_map: dict[str, str] = field(default_factory=dict)  # internal -> emitted

    def add(self, cmd: Command) -> None:
        self.commands.append(cmd)


# ------------------------------------------------------------------- printing

_SIMPLE_SYMBOL = re.compile(r"[A-Za-z_~!@$%^&*+=<>.?/-][A-Za-z0-9_~!@$%^&*+=<>.?/-]*\Z")
_RESERVED = frozenset(
    """as let forall exists par match assert check-sat declare-sort declare-fun
    declare-const define-fun get-model set-logic set-option exit true false
    not and or ite => = distinct Bool""".split()
)


def _emit_symbol(name: str) -> str:
    if _SIMPLE_SYMBOL.match(name) and name not in _RESERVED:
        return name
    if "|" in name or "\\" in name:
        safe = name.replace("\\", "_").replace("|", "_")
        return safe if _SIMPLE_SYMBOL.match(safe) else f"|{safe}|"
    return f"|{name}|"


class _Emitter:
    def __init__(self, script: SmtScript):
        self.script = script
        self.aux_count = 0
        self.lines: list[str] = []
        self.symbols: dict[str, str] = {}
        self._taken: set[str] = set()
        self._pending_defs: list[DefineFun] = []

    def sym(self, name: str) -> str:
        if name not in self.symbols:
            emitted = _emit_symbol(name)
            while emitted in self._taken:
                emitted = _emit_symbol(emitted + "_")
            self.symbols[name] = emitted
            self._taken.add(emitted)
        return self.symbols[name]

    # ----------------------------------------------------------- term lowering

    def guards_for(self, type_name: str, value: Term) -> list[Term]:
        out: list[Term] = []
        for g in self.script.guard_fns.get(type_name, ()):  # membership chain
            out.append(App(Sym(g, FunSort((self.script.sort_of_type[type_name],), BOOL)), (value,)))
        nv = self.script.nonvalues.get(self._root(type_name))
        if nv is not None:
            out.append(Not(Eq(value, Sym(nv, self.script.sort_of_type[type_name]))))
        return out

    def _root(self, type_name: str) -> str:
        # nonvalues are keyed by root types, whose sort equals their name
        return self.script.sort_of_type.get(type_name, type_name)

    def lower(self, t: Term) -> Term:
        """Eliminate FunEq and Update."""
        if isinstance(t, FunEq):
            lhs = self.lower_fun(t.lhs)
            rhs = self.lower_fun(t.rhs)
            fs = sort_of(lhs)
            assert isinstance(fs, FunSort)
            vars_: list[Var] = []
            guards: list[Term] = []
            for i, (sort, ty) in enumerate(zip(fs.args, t.arg_types)):
                v = Var(f"_p{i + 1}", sort)
                vars_.append(v)
                guards.extend(self.guards_for(ty, v))
            body = implies(conj(*guards), Eq(apply_term(lhs, tuple(vars_)), apply_term(rhs, tuple(vars_))))
            body = self.lower(body)
            for v in reversed(vars_):
                body = Quantified("forall", v.name, v.sort, body)
            return body
        if isinstance(t, App):
            fn = self.lower_fun(t.fn)
            args = tuple(self.lower(a) for a in t.args)
            if isinstance(fn, Update):
                return self._apply_update(fn, args)
            return App(fn, args)
        if isinstance(t, Update):
            # a bare function-valued update outside FunEq/App: hoist
            return self.lower_fun(t)
        if isinstance(t, Eq):
            return Eq(self.lower(t.lhs), self.lower(t.rhs))
        if isinstance(t, Not):
            return Not(self.lower(t.arg))
        if isinstance(t, And):
            return And(tuple(self.lower(a) for a in t.args))
        if isinstance(t, Or):
            return Or(tuple(self.lower(a) for a in t.args))
        if isinstance(t, Implies):
            return Implies(self.lower(t.lhs), self.lower(t.rhs))
        if isinstance(t, Ite):
            return Ite(self.lower(t.cond), self.lower(t.then), self.lower(t.other))
        if isinstance(t, Quantified):
            return Quantified(t.kind, t.var, t.sort, self.lower(t.body))
        return t

    def lower_fun(self, t: Term) -> Term:
        """A function-valued term: hoist Update nodes into define-funs."""
        if isinstance(t, Update):
            fn = self.lower_fun(t.fn)
            at = tuple(self.lower(a) for a in t.at)
            val = t.val
            fs = sort_of(fn)
            assert isinstance(fs, FunSort)
            self.aux_count += 1
            name = f"_upd{self.aux_count}"
            params = tuple((f"_p{i + 1}", s) for i, s in enumerate(fs.args))
            pvars = tuple(Var(n, s) for n, s in params)
            point = conj(*(Eq(pvars[i], at[i]) for i in range(len(at))))
            if isinstance(sort_of(val), FunSort):
                new_val: Term = apply_term(self.lower_fun(val), pvars[len(at):])
            else:
                new_val = self.lower(val)
            body = Ite(point, new_val, apply_term(fn, pvars))
            body = self.lower(body)
            self._pending_defs.append(DefineFun(name, params, fs.ret, body))
            return Sym(name, fs)
        if isinstance(t, App):
            return App(self.lower_fun(t.fn), tuple(self.lower(a) for a in t.args))
        return t

    def _apply_update(self, upd: Update, args: tuple[Term, ...]) -> Term:
        """Direct application of an update: inline the ite."""
        point = conj(*(Eq(args[i], upd.at[i]) for i in range(len(upd.at))))
        val = upd.val
        if isinstance(sort_of(val), FunSort):
            then = self.lower(apply_term(val, args[len(upd.at):]))
        else:
            then = self.lower(val)
        return Ite(point, then, self.lower(apply_term(upd.fn, args)))

    # --------------------------------------------------------------- printing

    def fmt(self, t: Term) -> str:
        if isinstance(t, Sym):
            return self.sym(t.name)
        if isinstance(t, Var):
            return self.sym(t.name)
        if isinstance(t, BoolLit):
            return "true" if t.value else "false"
        if isinstance(t, App):
            if isinstance(t.fn, App):
                return self.fmt(apply_term(t.fn.fn, t.fn.args + t.args))
            return f"({self.fmt(t.fn)} {' '.join(self.fmt(a) for a in t.args)})"
        if isinstance(t, Eq):
            return f"(= {self.fmt(t.lhs)} {self.fmt(t.rhs)})"
        if isinstance(t, Not):
            if isinstance(t.arg, Eq):
                return f"(distinct {self.fmt(t.arg.lhs)} {self.fmt(t.arg.rhs)})"
            return f"(not {self.fmt(t.arg)})"
        if isinstance(t, And):
            return f"(and {' '.join(self.fmt(a) for a in t.args)})"
        if isinstance(t, Or):
            return f"(or {' '.join(self.fmt(a) for a in t.args)})"
        if isinstance(t, Implies):
            return f"(=> {self.fmt(t.lhs)} {self.fmt(t.rhs)})"
        if isinstance(t, Ite):
            return f"(ite {self.fmt(t.cond)} {self.fmt(t.then)} {self.fmt(t.other)})"
        if isinstance(t, Quantified):
            binders = [(t.var, t.sort)]
            body = t.body
            while (isinstance(body, Quantified) and body.kind == t.kind
                   and body.var not in {v for v, _ in binders}):
                binders.append((body.var, body.sort))
                body = body.body
            bs = " ".join(f"({self.sym(v)} {s})" for v, s in binders)
            return f"({t.kind} ({bs}) {self.fmt(body)})"
        raise TypeError(f"cannot print {type(t).__name__}: {t!r}")

    def emit(self, want_model: bool, extra_options: dict[str, str]) -> str:
        s = self.script
        self.lines.append(f"(set-logic {s.logic})")
        if want_model:
            self.lines.append("(set-option :produce-models true)")
        for k, v in extra_options.items():
            self.lines.append(f"(set-option :{k} {v})")
        for cmd in s.commands:
            self._emit_command(cmd)
        self.lines.append("(check-sat)")
        if want_model:
            self.lines.append("(get-model)")
        s.symbol_map = dict(self.symbols)
        return "\n".join(self.lines) + "\n"

    def _src_comment(self, src: Optional[int]) -> None:
        if src is not None:
            self.lines.append(f";; src: line {src}")

    def _emit_command(self, cmd: Command) -> None:
        if isinstance(cmd, Comment):
            self.lines.append(f";; {cmd.text}")
            return
        if isinstance(cmd, DeclareSort):
            self._src_comment(cmd.src)
            self.lines.append(f"(declare-sort {self.sym(cmd.name)} 0)")
            return
        if isinstance(cmd, DeclareFun):
            self._src_comment(cmd.src)
            args = " ".join(cmd.args)
            self.lines.append(f"(declare-fun {self.sym(cmd.name)} ({args}) {cmd.ret})")
            return
        if isinstance(cmd, DeclareConst):
            self._src_comment(cmd.src)
            self.lines.append(f"(declare-const {self.sym(cmd.name)} {cmd.sort})")
            return
        if isinstance(cmd, DefineFun):
            self._src_comment(cmd.src)
            params = " ".join(f"({self.sym(n)} {s})" for n, s in cmd.params)
            self.lines.append(f"(define-fun {self.sym(cmd.name)} ({params}) {cmd.ret} {self.fmt(cmd.body)})")
            return
        if isinstance(cmd, Assert):
            self._pending_defs = []
            lowered = self.lower(cmd.term)
            for d in self._pending_defs:
                self._emit_command(d)
            self._src_comment(cmd.src)
            self.lines.append(f"(assert {self.fmt(lowered)})")
            return
        raise TypeError(f"unknown command {cmd!r}")


def emit(script: SmtScript, want_model: bool = False, extra_options: Optional[dict[str, str]] = None) -> str:
    """Render a script as SMT-LIB v2.6 text. Pure: identical input gives
    byte-identical output."""
    return _Emitter(script).emit(want_model, dict(extra_options or {}))
