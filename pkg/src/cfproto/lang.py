"""AST for the input language: classes, fields, methods, statements.

Also defines the atomic statements that label control-flow automaton
edges, plus the translation from surface expressions/predicates to
solver terms over qualified variable names.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import formula as fm


# ---------------------------------------------------------------------------
# Expressions

@dataclass(frozen=True)
class VarE:
    name: str


@dataclass(frozen=True)
class NumE:
    value: int


@dataclass(frozen=True)
class StarE:
    """Nondeterministic value."""


@dataclass(frozen=True)
class FieldE:
    base: str
    field: str


@dataclass(frozen=True)
class BinE:
    op: str  # '+', '-', '*'
    left: "Expr"
    right: "Expr"


Expr = VarE | NumE | StarE | FieldE | BinE


# ---------------------------------------------------------------------------
# Predicates

@dataclass(frozen=True)
class CmpP:
    op: str  # '<', '>', '='
    left: Expr
    right: Expr


@dataclass(frozen=True)
class NotP:
    arg: "Pred"


@dataclass(frozen=True)
class AndP:
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class OrP:
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class ExprP:
    """A bare expression as predicate; `*` means a nondeterministic branch."""
    expr: Expr


Pred = CmpP | NotP | AndP | OrP | ExprP


# ---------------------------------------------------------------------------
# Statements (surface syntax)

@dataclass
class Skip:
    line: int = 0


@dataclass
class Assign:
    target: str
    expr: Expr
    line: int = 0


@dataclass
class Store:
    base: str
    field: str
    expr: Expr
    line: int = 0


@dataclass
class Assume:
    pred: Pred
    line: int = 0


@dataclass
class If:
    pred: Pred
    then: list["Stmt"]
    els: list["Stmt"]
    line: int = 0


@dataclass
class New:
    target: str
    cls: str
    line: int = 0


@dataclass
class Call:
    method: str
    args: list[str]
    line: int = 0


@dataclass
class ApiCall:
    receiver: str
    method: str
    args: list[str]
    line: int = 0


Stmt = Skip | Assign | Store | Assume | If | New | Call | ApiCall


@dataclass
class FieldDecl:
    name: str
    type: str
    static: bool
    init: Optional[Expr]


@dataclass
class MethodDecl:
    name: str
    params: list[tuple[str, str]]  # (name, type)
    body: list[Stmt]


@dataclass
class ClassDecl:
    name: str
    fields: list[FieldDecl]
    methods: list[MethodDecl]


@dataclass
class ProgramAst:
    classes: list[ClassDecl]
    entry: str = "main"

    def methods(self) -> dict[str, MethodDecl]:
        out: dict[str, MethodDecl] = {}
        for c in self.classes:
            for m in c.methods:
                out[m.name] = m
        return out

    def static_fields(self) -> list[FieldDecl]:
        return [f for c in self.classes for f in c.fields if f.static]

    def instance_fields(self, cls: str) -> list[FieldDecl]:
        for c in self.classes:
            if c.name == cls:
                return [f for f in c.fields if not f.static]
        return []


class ResolutionError(Exception):
    pass


def validate(ast: ProgramAst) -> None:
    methods = ast.methods()
    mains = [m for c in ast.classes for m in c.methods if m.name == ast.entry]
    if len(mains) != 1:
        raise ResolutionError(f"expected exactly one `{ast.entry}` method, found {len(mains)}")
    if mains[0].params:
        raise ResolutionError(f"`{ast.entry}` must not take parameters")
    statics = {f.name for f in ast.static_fields()}

    def check_body(m: MethodDecl, body: list[Stmt], known: set[str]) -> None:
        for s in body:
            if isinstance(s, (Assign, New)):
                known.add(s.target)
            if isinstance(s, Call):
                if s.method not in methods:
                    raise ResolutionError(f"call to undefined method `{s.method}` (line {s.line})")
                if len(s.args) != len(methods[s.method].params):
                    raise ResolutionError(f"arity mismatch calling `{s.method}` (line {s.line})")
            if isinstance(s, ApiCall) and s.method in methods:
                raise ResolutionError(
                    f"api_call target `{s.method}` is defined in the program (line {s.line})")
            if isinstance(s, If):
                check_body(m, s.then, known)
                check_body(m, s.els, known)

    for m in methods.values():
        check_body(m, m.body, {p for p, _ in m.params} | statics)


# ---------------------------------------------------------------------------
# Atomic statements (edge labels)

WILDCARD_PREFIX = "$"
ALLOC_VAR = "#alloc"


def qualify(name: str, method: str, statics: set[str]) -> str:
    if name in statics or name.startswith(WILDCARD_PREFIX):
        return name
    return f"{method}::{name}"


@dataclass(frozen=True)
class ASkip:
    line: int = 0


@dataclass(frozen=True)
class AAssign:
    target: str  # qualified
    expr: Expr   # qualified variable names inside
    line: int = 0


@dataclass(frozen=True)
class ABind:
    """Formal-to-actual assignment emitted just before a call edge."""
    target: str  # qualified callee formal
    expr: Expr
    callee: str = ""
    line: int = 0


@dataclass(frozen=True)
class AStore:
    base: str
    field: str
    expr: Expr
    line: int = 0


@dataclass(frozen=True)
class AAssume:
    pred: Pred  # qualified names
    line: int = 0


@dataclass(frozen=True)
class ANew:
    target: str
    cls: str
    line: int = 0


@dataclass(frozen=True)
class ACall:
    method: str
    line: int = 0


@dataclass(frozen=True)
class AReturn:
    method: str
    line: int = 0


@dataclass(frozen=True)
class AApiCall:
    receiver: str  # qualified variable
    method: str
    args: tuple[str, ...]
    line: int = 0


AtomicStmt = ASkip | AAssign | ABind | AStore | AAssume | ANew | ACall | AReturn | AApiCall


def stmt_text(s: AtomicStmt) -> str:
    if isinstance(s, ASkip):
        return "skip"
    if isinstance(s, AAssign):
        return f"{s.target} := {expr_text(s.expr)}"
    if isinstance(s, ABind):
        return f"{s.target} := {expr_text(s.expr)}"
    if isinstance(s, AStore):
        return f"{s.base}.{s.field} := {expr_text(s.expr)}"
    if isinstance(s, AAssume):
        return f"assume({pred_text(s.pred)})"
    if isinstance(s, ANew):
        return f"{s.target} := new {s.cls}"
    if isinstance(s, ACall):
        return f"call {s.method}"
    if isinstance(s, AReturn):
        return f"return from {s.method}"
    if isinstance(s, AApiCall):
        return f"api_call {s.receiver}.{s.method}({', '.join(s.args)})"
    raise TypeError(s)


def expr_text(e: Expr) -> str:
    if isinstance(e, VarE):
        return e.name
    if isinstance(e, NumE):
        return str(e.value)
    if isinstance(e, StarE):
        return "*"
    if isinstance(e, FieldE):
        return f"{e.base}.{e.field}"
    if isinstance(e, BinE):
        return f"({expr_text(e.left)} {e.op} {expr_text(e.right)})"
    raise TypeError(e)


def pred_text(p: Pred) -> str:
    if isinstance(p, CmpP):
        return f"{expr_text(p.left)} {p.op} {expr_text(p.right)}"
    if isinstance(p, NotP):
        return f"!({pred_text(p.arg)})"
    if isinstance(p, AndP):
        return f"({pred_text(p.left)} && {pred_text(p.right)})"
    if isinstance(p, OrP):
        return f"({pred_text(p.left)} || {pred_text(p.right)})"
    if isinstance(p, ExprP):
        return expr_text(p.expr)
    raise TypeError(p)


def qualify_expr(e: Expr, method: str, statics: set[str]) -> Expr:
    if isinstance(e, VarE):
        return VarE(qualify(e.name, method, statics))
    if isinstance(e, (NumE, StarE)):
        return e
    if isinstance(e, FieldE):
        return FieldE(qualify(e.base, method, statics), e.field)
    if isinstance(e, BinE):
        return BinE(e.op, qualify_expr(e.left, method, statics),
                    qualify_expr(e.right, method, statics))
    raise TypeError(e)


def qualify_pred(p: Pred, method: str, statics: set[str]) -> Pred:
    if isinstance(p, CmpP):
        return CmpP(p.op, qualify_expr(p.left, method, statics),
                    qualify_expr(p.right, method, statics))
    if isinstance(p, NotP):
        return NotP(qualify_pred(p.arg, method, statics))
    if isinstance(p, AndP):
        return AndP(qualify_pred(p.left, method, statics),
                    qualify_pred(p.right, method, statics))
    if isinstance(p, OrP):
        return OrP(qualify_pred(p.left, method, statics),
                   qualify_pred(p.right, method, statics))
    if isinstance(p, ExprP):
        return ExprP(qualify_expr(p.expr, method, statics))
    raise TypeError(p)


def heap_array(field_name: str) -> fm.Var:
    return fm.Var(f"#heap_{field_name}")


class _StarCounter:
    """Hands out fresh variables for `*` occurrences during encoding."""

    def __init__(self, prefix: str = "#star"):
        self.prefix = prefix
        self.n = 0

    def fresh(self) -> fm.Var:
        self.n += 1
        return fm.Var(f"{self.prefix}{self.n}")


def expr_to_term(e: Expr, stars: Optional[_StarCounter] = None) -> fm.Term:
    """Translate a qualified expression to a term; `*` becomes a fresh var."""
    if isinstance(e, VarE):
        return fm.Var(e.name)
    if isinstance(e, NumE):
        return fm.Num(e.value)
    if isinstance(e, StarE):
        if stars is None:
            raise ValueError("unexpected `*` in this context")
        return stars.fresh()
    if isinstance(e, FieldE):
        return fm.Select(heap_array(e.field), fm.Var(e.base))
    if isinstance(e, BinE):
        return fm.BinOp(e.op, expr_to_term(e.left, stars), expr_to_term(e.right, stars))
    raise TypeError(e)


def pred_to_formula(p: Pred, stars: Optional[_StarCounter] = None) -> fm.Formula:
    if isinstance(p, CmpP):
        op = {"<": "<", ">": ">", "=": "="}[p.op]
        return fm.Atom(op, expr_to_term(p.left, stars), expr_to_term(p.right, stars))
    if isinstance(p, NotP):
        return fm.neg(pred_to_formula(p.arg, stars))
    if isinstance(p, AndP):
        return fm.conj(pred_to_formula(p.left, stars), pred_to_formula(p.right, stars))
    if isinstance(p, OrP):
        return fm.disj(pred_to_formula(p.left, stars), pred_to_formula(p.right, stars))
    if isinstance(p, ExprP):
        if isinstance(p.expr, StarE):
            # nondeterministic branch condition: no constraint either way
            return fm.TRUE
        return fm.Atom("!=", expr_to_term(p.expr, stars), fm.Num(0))
    raise TypeError(p)


def pred_is_star(p: Pred) -> bool:
    return isinstance(p, ExprP) and isinstance(p.expr, StarE)
