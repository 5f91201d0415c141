"""Parsers for `.cfp` program files and `.spec` protocol files.

Program syntax (one class block per class):

    class Main {
      static Lock g = *;
      void main() {
        l := new Lock;
        call foo(l);
      }
      void foo(Lock l) {
        if (*) { call foo(l); } else { skip; }
        api_call l.lock();
        assume(l > 0);
      }
    }

Protocol syntax:

    wildcards: $1: Lock;
    start: S;
    S -> eps | $1.lock() S $1.unlock() S ;
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .lang import (AndP, ApiCall, Assign, Assume, BinE, Call, ClassDecl, CmpP,
                   Expr, FieldDecl, FieldE, If, MethodDecl, New, NotP, NumE,
                   OrP, Pred, ProgramAst, Skip, Stmt, Store, StarE, VarE,
                   ExprP, validate)


class SyntaxErr(Exception):
    def __init__(self, msg: str, line: int, col: int = 0):
        super().__init__(f"line {line}: {msg}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>:=|->|&&|\|\||[{}();,.<>=!*+\-|:])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    line = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise SyntaxErr(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            toks.append(Tok(kind, s, line))
        line += s.count("\n")
        pos = m.end()
    toks.append(Tok("eof", "", line))
    return toks


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.i = 0

    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Tok:
        t = self.cur
        self.i += 1
        return t

    def expect(self, text: str) -> Tok:
        if self.cur.text != text:
            raise SyntaxErr(f"expected {text!r}, got {self.cur.text!r}", self.cur.line)
        return self.advance()

    def expect_id(self) -> Tok:
        if self.cur.kind != "id":
            raise SyntaxErr(f"expected identifier, got {self.cur.text!r}", self.cur.line)
        return self.advance()


# ---------------------------------------------------------------------------
# Program parser

class _ProgParser(_Parser):
    def program(self) -> ProgramAst:
        classes = []
        while self.cur.kind != "eof":
            classes.append(self.class_decl())
        ast = ProgramAst(classes)
        validate(ast)
        return ast

    def class_decl(self) -> ClassDecl:
        self.expect("class")
        name = self.expect_id().text
        self.expect("{")
        fields: list[FieldDecl] = []
        methods: list[MethodDecl] = []
        while self.cur.text != "}":
            if self.cur.text == "void":
                methods.append(self.method_decl())
            else:
                fields.append(self.field_decl())
        self.expect("}")
        return ClassDecl(name, fields, methods)

    def field_decl(self) -> FieldDecl:
        static = self.cur.text == "static"
        if static:
            self.advance()
        ty = self.expect_id().text
        name = self.expect_id().text
        init = None
        if self.cur.text == "=":
            self.advance()
            init = self.expr()
        self.expect(";")
        return FieldDecl(name, ty, static, init)

    def method_decl(self) -> MethodDecl:
        self.expect("void")
        name = self.expect_id().text
        self.expect("(")
        params: list[tuple[str, str]] = []
        while self.cur.text != ")":
            ty = self.expect_id().text
            pname = self.expect_id().text
            params.append((pname, ty))
            if self.cur.text == ",":
                self.advance()
        self.expect(")")
        body = self.block()
        return MethodDecl(name, params, body)

    def block(self) -> list[Stmt]:
        self.expect("{")
        stmts: list[Stmt] = []
        while self.cur.text != "}":
            stmts.append(self.stmt())
        self.expect("}")
        return stmts

    def stmt(self) -> Stmt:
        t = self.cur
        if t.text == "skip":
            self.advance()
            self.expect(";")
            return Skip(line=t.line)
        if t.text == "assume":
            self.advance()
            self.expect("(")
            p = self.pred()
            self.expect(")")
            self.expect(";")
            return Assume(p, line=t.line)
        if t.text == "if":
            self.advance()
            self.expect("(")
            p = self.pred()
            self.expect(")")
            then = self.block()
            els: list[Stmt] = []
            if self.cur.text == "else":
                self.advance()
                if self.cur.text == "if":
                    els = [self.stmt()]
                else:
                    els = self.block()
            return If(p, then, els, line=t.line)
        if t.text == "call":
            self.advance()
            m = self.expect_id().text
            args = self.arg_names()
            self.expect(";")
            return Call(m, args, line=t.line)
        if t.text == "api_call":
            self.advance()
            recv = self.expect_id().text
            self.expect(".")
            m = self.expect_id().text
            args = self.arg_names()
            self.expect(";")
            return ApiCall(recv, m, args, line=t.line)
        if t.kind == "id":
            name = self.advance().text
            if self.cur.text == ".":
                self.advance()
                f = self.expect_id().text
                self.expect(":=")
                e = self.expr()
                self.expect(";")
                return Store(name, f, e, line=t.line)
            self.expect(":=")
            if self.cur.text == "new":
                self.advance()
                cls = self.expect_id().text
                self.expect(";")
                return New(name, cls, line=t.line)
            e = self.expr()
            self.expect(";")
            return Assign(name, e, line=t.line)
        raise SyntaxErr(f"unexpected token {t.text!r}", t.line)

    def arg_names(self) -> list[str]:
        self.expect("(")
        args: list[str] = []
        while self.cur.text != ")":
            args.append(self.expect_id().text)
            if self.cur.text == ",":
                self.advance()
        self.expect(")")
        return args

    # predicates -----------------------------------------------------------
    def pred(self) -> Pred:
        p = self.pred_and()
        while self.cur.text == "||":
            self.advance()
            p = OrP(p, self.pred_and())
        return p

    def pred_and(self) -> Pred:
        p = self.pred_unary()
        while self.cur.text == "&&":
            self.advance()
            p = AndP(p, self.pred_unary())
        return p

    def pred_unary(self) -> Pred:
        if self.cur.text == "!":
            self.advance()
            return NotP(self.pred_unary())
        if self.cur.text == "(":
            # try a parenthesized predicate; fall back to expression
            save = self.i
            try:
                self.advance()
                p = self.pred()
                self.expect(")")
                if isinstance(p, ExprP) and self.cur.text in ("<", ">", "="):
                    op = self.advance().text
                    return CmpP(op, p.expr, self.expr())
                return p
            except SyntaxErr:
                self.i = save
        e = self.expr()
        if self.cur.text in ("<", ">", "="):
            op = self.advance().text
            return CmpP(op, e, self.expr())
        return ExprP(e)

    # expressions ----------------------------------------------------------
    def expr(self) -> Expr:
        e = self.term()
        while self.cur.text in ("+", "-"):
            op = self.advance().text
            e = BinE(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.atom()
        while self.cur.text == "*" and self.peek(1).text not in (";", ")", ","):
            self.advance()
            e = BinE("*", e, self.atom())
        return e

    def atom(self) -> Expr:
        t = self.cur
        if t.text == "-":
            self.advance()
            inner = self.atom()
            if isinstance(inner, NumE):
                return NumE(-inner.value)
            return BinE("-", NumE(0), inner)
        if t.text == "*":
            self.advance()
            return StarE()
        if t.kind == "num":
            self.advance()
            return NumE(int(t.text))
        if t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "id":
            self.advance()
            if self.cur.text == "." and self.peek(1).kind == "id" and self.peek(2).text != "(":
                self.advance()
                f = self.expect_id().text
                return FieldE(t.text, f)
            return VarE(t.text)
        raise SyntaxErr(f"unexpected token {t.text!r} in expression", t.line)


def parse_program(text: str) -> ProgramAst:
    return _ProgParser(tokenize(text)).program()


# ---------------------------------------------------------------------------
# Protocol specs

@dataclass(frozen=True)
class ApiCallPattern:
    receiver: str  # wildcard, e.g. "$1"
    method: str
    args: tuple[str, ...] = ()

    def wildcard_set(self) -> frozenset[str]:
        return frozenset({self.receiver, *self.args})

    def __repr__(self) -> str:
        return f"{self.receiver}.{self.method}({', '.join(self.args)})"


@dataclass
class SpecProtocol:
    terminals: set[ApiCallPattern]
    nonterminals: set[str]
    productions: list[tuple[str, tuple[object, ...]]]  # rhs over ApiCallPattern | str
    start: str
    wildcard_types: dict[str, str]


class _SpecParser(_Parser):
    def spec(self) -> SpecProtocol:
        wildcard_types: dict[str, str] = {}
        if self.cur.text == "wildcards":
            self.advance()
            self.expect(":")
            while self.cur.text != ";":
                w = self.expect_id().text
                self.expect(":")
                ty = self.expect_id().text
                wildcard_types[w] = ty
                if self.cur.text == ",":
                    self.advance()
            self.expect(";")
        self.expect("start")
        self.expect(":")
        start = self.expect_id().text
        self.expect(";")

        productions: list[tuple[str, tuple[object, ...]]] = []
        terminals: set[ApiCallPattern] = set()
        nonterminals: set[str] = set()
        while self.cur.kind != "eof":
            lhs = self.expect_id().text
            nonterminals.add(lhs)
            self.expect("->")
            alt: list[object] = []
            while True:
                t = self.cur
                if t.text in ("|", ";"):
                    productions.append((lhs, tuple(alt)))
                    alt = []
                    self.advance()
                    if t.text == ";":
                        break
                    continue
                if t.text == "eps":
                    self.advance()
                    continue
                if t.kind == "id" and t.text.startswith("$"):
                    alt.append(self.terminal(wildcard_types))
                    terminals.add(alt[-1])  # type: ignore[arg-type]
                    continue
                if t.kind == "id":
                    alt.append(self.advance().text)
                    continue
                raise SyntaxErr(f"unexpected token {t.text!r} in production", t.line)

        spec = SpecProtocol(terminals, nonterminals, productions, start, wildcard_types)
        _validate_spec(spec)
        return spec

    def terminal(self, wildcard_types: dict[str, str]) -> ApiCallPattern:
        w = self.expect_id().text
        self.expect(".")
        m = self.expect_id().text
        self.expect("(")
        args: list[str] = []
        while self.cur.text != ")":
            args.append(self.expect_id().text)
            if self.cur.text == ",":
                self.advance()
        self.expect(")")
        pat = ApiCallPattern(w, m, tuple(args))
        for x in pat.wildcard_set():
            if x not in wildcard_types:
                raise SyntaxErr(f"undeclared wildcard {x}", self.cur.line)
        return pat


def _validate_spec(spec: SpecProtocol) -> None:
    if spec.start not in spec.nonterminals:
        raise SyntaxErr(f"start symbol {spec.start} has no productions", 0)
    for lhs, rhs in spec.productions:
        for sym in rhs:
            if isinstance(sym, str) and sym not in spec.nonterminals:
                raise SyntaxErr(f"undeclared nonterminal {sym} in a production of {lhs}", 0)


def parse_spec(text: str) -> SpecProtocol:
    return _SpecParser(tokenize(text)).spec()


def wildcards(spec: SpecProtocol) -> set[str]:
    out: set[str] = set()
    for t in spec.terminals:
        out |= t.wildcard_set()
    return out


def terminals_for_method(spec: SpecProtocol, m: str) -> set[ApiCallPattern]:
    return {t for t in spec.terminals if t.method == m}


def lint_uniform_wildcards(spec: SpecProtocol) -> list[str]:
    warnings = []
    ts = sorted(spec.terminals, key=repr)
    for i, a in enumerate(ts):
        for b in ts[i + 1:]:
            if a.wildcard_set() != b.wildcard_set():
                warnings.append(
                    f"terminals {a} and {b} use different wildcard sets; "
                    "instrumentation may be incomplete")
    return warnings


# ---------------------------------------------------------------------------
# Pretty printers

from .lang import expr_text, pred_text  # noqa: E402


def _print_stmt(s: Stmt, ind: str, out: list[str]) -> None:
    if isinstance(s, Skip):
        out.append(f"{ind}skip;")
    elif isinstance(s, Assign):
        out.append(f"{ind}{s.target} := {expr_text(s.expr)};")
    elif isinstance(s, Store):
        out.append(f"{ind}{s.base}.{s.field} := {expr_text(s.expr)};")
    elif isinstance(s, Assume):
        out.append(f"{ind}assume({pred_text(s.pred)});")
    elif isinstance(s, New):
        out.append(f"{ind}{s.target} := new {s.cls};")
    elif isinstance(s, Call):
        out.append(f"{ind}call {s.method}({', '.join(s.args)});")
    elif isinstance(s, ApiCall):
        out.append(f"{ind}api_call {s.receiver}.{s.method}({', '.join(s.args)});")
    elif isinstance(s, If):
        out.append(f"{ind}if ({pred_text(s.pred)}) {{")
        for c in s.then:
            _print_stmt(c, ind + "  ", out)
        if s.els:
            out.append(f"{ind}}} else {{")
            for c in s.els:
                _print_stmt(c, ind + "  ", out)
        out.append(f"{ind}}}")
    else:
        raise TypeError(s)


def print_program(ast: ProgramAst) -> str:
    out: list[str] = []
    for c in ast.classes:
        out.append(f"class {c.name} {{")
        for f in c.fields:
            prefix = "static " if f.static else ""
            init = f" = {expr_text(f.init)}" if f.init is not None else ""
            out.append(f"  {prefix}{f.type} {f.name}{init};")
        for m in c.methods:
            params = ", ".join(f"{ty} {n}" for n, ty in m.params)
            out.append(f"  void {m.name}({params}) {{")
            for s in m.body:
                _print_stmt(s, "    ", out)
            out.append("  }")
        out.append("}")
    return "\n".join(out) + "\n"


def print_spec(spec: SpecProtocol) -> str:
    out: list[str] = []
    if spec.wildcard_types:
        ws = ", ".join(f"{w}: {t}" for w, t in sorted(spec.wildcard_types.items()))
        out.append(f"wildcards: {ws};")
    out.append(f"start: {spec.start};")
    by_lhs: dict[str, list[str]] = {}
    for lhs, rhs in spec.productions:
        body = " ".join(repr(x) if isinstance(x, ApiCallPattern) else x for x in rhs) or "eps"
        by_lhs.setdefault(lhs, []).append(body)
    for lhs in sorted(by_lhs, key=lambda n: (n != spec.start, n)):
        out.append(f"{lhs} -> {' | '.join(by_lhs[lhs])} ;")
    return "\n".join(out) + "\n"
