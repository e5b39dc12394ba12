"""Recursive-descent parser for the Alloy subset.

Operator precedence, loosest to tightest:
    implies < or < and < not < comparisons
    `+`/`-` < `&` < `->` < `.` < unary `^`/`*`
"""

from __future__ import annotations

from .errors import FeatureOutOfScope, ParseError
from .lexer import OUT_OF_SCOPE_KEYWORDS, OUT_OF_SCOPE_OPERATORS, Token, tokenize
from .syntax import (
    AssertDecl, BinOp, BoolOp, Call, Card, CheckDecl, Cmp, Expr, FactDecl,
    FieldDecl, Formula, FunDecl, NameRef, Not, Param, Paragraph, Pos,
    PredDecl, Quant, SigDecl, SourceModel, UnOp,
)

_QUANT_WORDS = ("all", "some", "one", "lone", "no")
_MULT_WORDS = ("one", "lone", "some", "set")


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # ------------------------------------------------------------- utilities

    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if self.i < len(self.tokens) - 1:
            self.i += 1
        return tok

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind in kinds:
            return self.advance()
        self._check_out_of_scope(tok)
        raise ParseError(
            f"unexpected {tok.kind if tok.kind != 'ident' else tok.text!r}",
            tok.line, tok.col, expected=frozenset(kinds),
        )

    def pos(self) -> Pos:
        tok = self.peek()
        return Pos(tok.line, tok.col)

    def _check_out_of_scope(self, tok: Token) -> None:
        if tok.kind in OUT_OF_SCOPE_KEYWORDS or tok.kind in OUT_OF_SCOPE_OPERATORS:
            raise FeatureOutOfScope(tok.text, tok.line, tok.col)
        if tok.kind == "run":
            raise FeatureOutOfScope("run", tok.line, tok.col)

    # ------------------------------------------------------------- model

    def parse_model(self, name: str = "model") -> SourceModel:
        sigs: list[SigDecl] = []
        paragraphs: list[Paragraph] = []
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind == "sig" or (tok.kind == "abstract" and self.peek(1).kind == "sig"):
                sigs.extend(self.sig_decl())
            elif tok.kind == "fact":
                paragraphs.append(self.fact_decl())
            elif tok.kind == "pred":
                paragraphs.append(self.pred_decl())
            elif tok.kind == "fun":
                paragraphs.append(self.fun_decl())
            elif tok.kind == "assert":
                paragraphs.append(self.assert_decl())
            elif tok.kind == "check":
                paragraphs.append(self.check_decl())
            else:
                self._check_out_of_scope(tok)
                raise ParseError(
                    f"unexpected {tok.text!r} at top level", tok.line, tok.col,
                    expected=frozenset(["sig", "abstract", "fact", "pred", "fun", "assert", "check"]),
                )
        self._check_unique_checks(paragraphs)
        return SourceModel(tuple(sigs), tuple(paragraphs), name)

    @staticmethod
    def _check_unique_checks(paragraphs: list[Paragraph]) -> None:
        seen: dict[str, CheckDecl] = {}
        for p in paragraphs:
            if isinstance(p, CheckDecl):
                if p.assert_name in seen:
                    raise ParseError(
                        f"duplicate check for assertion {p.assert_name!r}",
                        p.pos.line, p.pos.col,
                    )
                seen[p.assert_name] = p

    def sig_decl(self) -> list[SigDecl]:
        pos = self.pos()
        abstract = False
        if self.at("abstract"):
            self.advance()
            abstract = True
        self.expect("sig")
        names = [self.expect("ident").text]
        while self.at(","):
            self.advance()
            names.append(self.expect("ident").text)
        kind, parent = "top", None
        if self.at("extends"):
            self.advance()
            kind, parent = "extends", self.expect("ident").text
        elif self.at("in"):
            self.advance()
            kind, parent = "in", self.expect("ident").text
        self.expect("{")
        fields: list[FieldDecl] = []
        if not self.at("}"):
            fields.append(self.field_decl())
            while self.at(","):
                self.advance()
                fields.append(self.field_decl())
        self.expect("}")
        if len(names) > 1 and fields:
            raise FeatureOutOfScope("fields on a multi-name sig declaration", pos.line, pos.col)
        return [SigDecl(n, kind, parent, abstract, tuple(fields), pos) for n in names]

    def field_decl(self) -> FieldDecl:
        pos = self.pos()
        name = self.expect("ident").text
        self.expect(":")
        cols: list[Expr] = []
        mult = "one"
        while True:
            if self.peek().kind in _MULT_WORDS:
                mult_tok = self.advance()
                cols.append(self.expr(no_arrow=True))
                if self.at("->"):
                    raise FeatureOutOfScope(
                        "multiplicity on a non-range column", mult_tok.line, mult_tok.col
                    )
                mult = mult_tok.kind
                break
            cols.append(self.expr(no_arrow=True))
            if self.at("->"):
                self.advance()
                continue
            break
        return FieldDecl(name, tuple(cols), mult, pos)

    def fact_decl(self) -> FactDecl:
        pos = self.pos()
        self.expect("fact")
        name = self.advance().text if self.at("ident") else None
        return FactDecl(name, self.formula_block(), pos)

    def pred_decl(self) -> PredDecl:
        pos = self.pos()
        self.expect("pred")
        name = self.expect("ident").text
        params = self.param_list()
        return PredDecl(name, params, self.formula_block(), pos)

    def fun_decl(self) -> FunDecl:
        pos = self.pos()
        self.expect("fun")
        name = self.expect("ident").text
        params = self.param_list()
        self.expect(":")
        ret_mult = "one"
        if self.peek().kind in _MULT_WORDS:
            ret_mult = self.advance().kind
        ret_type = self.expr(no_arrow=True)
        self.expect("{")
        body = self.expr()
        self.expect("}")
        return FunDecl(name, params, ret_mult, ret_type, body, pos)

    def assert_decl(self) -> AssertDecl:
        pos = self.pos()
        self.expect("assert")
        name = self.expect("ident").text
        return AssertDecl(name, self.formula_block(), pos)

    def check_decl(self) -> CheckDecl:
        pos = self.pos()
        self.expect("check")
        name = self.expect("ident").text
        scope = None
        if self.at("for"):
            self.advance()
            scope = int(self.expect("num").text)
            if self.peek().kind == "but":
                tok = self.peek()
                raise FeatureOutOfScope("but", tok.line, tok.col)
        return CheckDecl(name, scope, pos)

    def param_list(self) -> tuple[Param, ...]:
        # Groups look like `b, b': Book, n: Name`: names accumulate until the
        # colon, and a comma after a type starts the next group.
        self.expect("(")
        params: list[Param] = []
        if not self.at(")"):
            while True:
                group = [(self.pos(), self.expect("ident").text)]
                while self.at(","):
                    self.advance()
                    group.append((self.pos(), self.expect("ident").text))
                self.expect(":")
                ty = self.expr(no_arrow=True)
                params.extend(Param(n, ty, p) for p, n in group)
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect(")")
        return tuple(params)

    def formula_block(self) -> tuple[Formula, ...]:
        self.expect("{")
        body: list[Formula] = []
        while not self.at("}"):
            body.append(self.formula())
        self.expect("}")
        return tuple(body)

    # ------------------------------------------------------------- formulas

    def formula(self) -> Formula:
        return self.implies_formula()

    def implies_formula(self) -> Formula:
        lhs = self.or_formula()
        if self.at("implies", "=>"):
            pos = self.pos()
            self.advance()
            rhs = self.implies_formula()
            return BoolOp("implies", lhs, rhs, pos)
        return lhs

    def or_formula(self) -> Formula:
        f = self.and_formula()
        while self.at("or"):
            pos = self.pos()
            self.advance()
            f = BoolOp("or", f, self.and_formula(), pos)
        return f

    def and_formula(self) -> Formula:
        f = self.not_formula()
        while self.at("and"):
            pos = self.pos()
            self.advance()
            f = BoolOp("and", f, self.not_formula(), pos)
        return f

    def not_formula(self) -> Formula:
        if self.at("not", "!"):
            pos = self.pos()
            self.advance()
            return Not(self.not_formula(), pos)
        return self.atom_formula()

    def _starts_quantifier(self) -> bool:
        """After a quantifier word: idents separated by commas then a colon."""
        k = 0
        if self.peek(k).kind != "ident":
            return False
        k += 1
        while self.peek(k).kind == ",":
            if self.peek(k + 1).kind != "ident":
                return False
            k += 2
        return self.peek(k).kind == ":"

    def atom_formula(self) -> Formula:
        tok = self.peek()
        if tok.kind in _QUANT_WORDS:
            if tok.kind != "all" and not (self.peek(1).kind == "ident" and self._peek_is_quant_tail()):
                # cardinality form: quantifier word applied to an expression
                pos = self.pos()
                self.advance()
                return Card(tok.kind, self.expr(), pos)
            return self.quantified()
        if tok.kind == "(":
            # Could be a parenthesized formula or a parenthesized expression
            # starting a comparison; resolved by backtracking.
            save = self.i
            try:
                self.advance()
                f = self.formula()
                self.expect(")")
                if self.peek().kind in ("=", "!=", "in", ":", ".", "+", "-", "&", "->", "^", "*", "["):
                    raise ParseError("parenthesized formula followed by an operator", tok.line, tok.col)
                return f
            except FeatureOutOfScope:
                raise
            except ParseError:
                self.i = save
                return self.comparison()
        return self.comparison()

    def _peek_is_quant_tail(self) -> bool:
        save = self.i
        self.advance()
        ok = self._starts_quantifier()
        self.i = save
        return ok

    def quantified(self) -> Formula:
        pos = self.pos()
        q = self.advance().kind
        if not self._starts_quantifier():
            tok = self.peek()
            raise ParseError("expected quantified variable declarations", tok.line, tok.col,
                             expected=frozenset(["ident"]))
        decls: list[tuple[str, Expr, Pos]] = []
        while True:
            group = [(self.pos(), self.expect("ident").text)]
            while self.at(","):
                self.advance()
                group.append((self.pos(), self.expect("ident").text))
            self.expect(":")
            bound = self.expr()
            decls.extend((n, bound, p) for p, n in group)
            if self.at(","):
                self.advance()
                continue
            break
        self.expect("|")
        body = self.formula()
        for name, bound, p in reversed(decls):
            body = Quant(q, name, bound, body, p if p else pos)
        return body

    def comparison(self) -> Formula:
        pos = self.pos()
        lhs = self.expr()
        tok = self.peek()
        if tok.kind in ("=", "!=", "in", ":"):
            self.advance()
            rhs = self.expr()
            return Cmp(tok.kind, lhs, rhs, pos)
        if isinstance(lhs, Call):
            return lhs  # predicate invocation in formula position
        self._check_out_of_scope(tok)
        raise ParseError(
            "expression used where a formula is required", tok.line, tok.col,
            expected=frozenset(["=", "!=", "in", ":"]),
        )

    # ------------------------------------------------------------ expressions

    def expr(self, no_arrow: bool = False) -> Expr:
        e = self.inter_expr(no_arrow)
        while self.at("+", "-"):
            pos = self.pos()
            op = self.advance().kind
            e = BinOp(op, e, self.inter_expr(no_arrow), pos)
        return e

    def inter_expr(self, no_arrow: bool = False) -> Expr:
        e = self.arrow_expr(no_arrow)
        while self.at("&"):
            pos = self.pos()
            self.advance()
            e = BinOp("&", e, self.arrow_expr(no_arrow), pos)
        return e

    def arrow_expr(self, no_arrow: bool = False) -> Expr:
        e = self.join_expr()
        if no_arrow:
            return e
        while self.at("->"):
            pos = self.pos()
            self.advance()
            e = BinOp("->", e, self.join_expr(), pos)
        return e

    def join_expr(self) -> Expr:
        e = self.unary_expr()
        while self.at("."):
            pos = self.pos()
            self.advance()
            e = BinOp(".", e, self.unary_expr(), pos)
        return e

    def unary_expr(self) -> Expr:
        if self.at("^", "*"):
            pos = self.pos()
            op = self.advance().kind
            return UnOp(op, self.unary_expr(), pos)
        return self.atom_expr()

    def atom_expr(self) -> Expr:
        tok = self.peek()
        if tok.kind == "ident":
            pos = self.pos()
            name = self.advance().text
            if self.at("["):
                self.advance()
                args: list[Expr] = []
                if not self.at("]"):
                    args.append(self.expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.expr())
                self.expect("]")
                return Call(name, tuple(args), pos)
            return NameRef(name, pos)
        if tok.kind == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self._check_out_of_scope(tok)
        raise ParseError(
            f"unexpected {tok.text!r} in expression", tok.line, tok.col,
            expected=frozenset(["ident", "("]),
        )


def parse_model(source: str, name: str = "model") -> SourceModel:
    """Parse source text into a SourceModel."""
    return Parser(tokenize(source)).parse_model(name)


def parse_formula(source: str) -> Formula:
    """Parse a single formula; convenience entry point for tests."""
    p = Parser(tokenize(source))
    f = p.formula()
    p.expect("eof")
    return f


def parse_expr(source: str) -> Expr:
    p = Parser(tokenize(source))
    e = p.expr()
    p.expect("eof")
    return e
