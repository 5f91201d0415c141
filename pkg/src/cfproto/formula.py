"""Quantifier-free formulas over linear integer arithmetic with arrays.

Terms and formulas are immutable; helper constructors do light
simplification so that `TRUE`/`FALSE` propagate and conjunctions stay flat.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional


# ---------------------------------------------------------------------------
# Terms

@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Num:
    value: int

    def __repr__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*'
    left: "Term"
    right: "Term"

    def __repr__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Select:
    array: "Term"
    index: "Term"

    def __repr__(self) -> str:
        return f"{self.array}[{self.index}]"


@dataclass(frozen=True)
class Update:
    array: "Term"
    index: "Term"
    value: "Term"

    def __repr__(self) -> str:
        return f"{self.array}[{self.index} := {self.value}]"


Term = Var | Num | BinOp | Select | Update


# ---------------------------------------------------------------------------
# Formulas

@dataclass(frozen=True)
class TrueF:
    def __repr__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FalseF:
    def __repr__(self) -> str:
        return "false"


@dataclass(frozen=True)
class Atom:
    op: str  # '=', '!=', '<', '<=', '>', '>='
    left: Term
    right: Term

    def __repr__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __repr__(self) -> str:
        return f"!({self.arg})"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]

    def __repr__(self) -> str:
        return "(" + " & ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]

    def __repr__(self) -> str:
        return "(" + " | ".join(map(repr, self.args)) + ")"


Formula = TrueF | FalseF | Atom | Not | And | Or

TRUE = TrueF()
FALSE = FalseF()

_NEG = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def conj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, FalseF):
            return FALSE
        if isinstance(p, TrueF):
            continue
        if isinstance(p, And):
            flat.extend(p.args)
        else:
            flat.append(p)
    seen: list[Formula] = []
    for p in flat:
        if p not in seen:
            seen.append(p)
    if not seen:
        return TRUE
    if len(seen) == 1:
        return seen[0]
    return And(tuple(seen))


def disj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, TrueF):
            return TRUE
        if isinstance(p, FalseF):
            continue
        if isinstance(p, Or):
            flat.extend(p.args)
        else:
            flat.append(p)
    seen: list[Formula] = []
    for p in flat:
        if p not in seen:
            seen.append(p)
    if not seen:
        return FALSE
    if len(seen) == 1:
        return seen[0]
    return Or(tuple(seen))


def neg(f: Formula) -> Formula:
    """Negation pushed to NNF."""
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    if isinstance(f, Atom):
        return Atom(_NEG[f.op], f.left, f.right)
    if isinstance(f, Not):
        return nnf(f.arg)
    if isinstance(f, And):
        return disj(*(neg(a) for a in f.args))
    if isinstance(f, Or):
        return conj(*(neg(a) for a in f.args))
    raise TypeError(f)


def nnf(f: Formula) -> Formula:
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, Not):
        return neg(f.arg)
    if isinstance(f, And):
        return conj(*(nnf(a) for a in f.args))
    if isinstance(f, Or):
        return disj(*(nnf(a) for a in f.args))
    raise TypeError(f)


def eq(a: Term, b: Term) -> Formula:
    return Atom("=", a, b)


def ne(a: Term, b: Term) -> Formula:
    return Atom("!=", a, b)


# ---------------------------------------------------------------------------
# Traversal helpers

def term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Num):
        return set()
    if isinstance(t, BinOp):
        return term_vars(t.left) | term_vars(t.right)
    if isinstance(t, Select):
        return term_vars(t.array) | term_vars(t.index)
    if isinstance(t, Update):
        return term_vars(t.array) | term_vars(t.index) | term_vars(t.value)
    raise TypeError(t)


def free_vars(f: Formula) -> set[str]:
    if isinstance(f, (TrueF, FalseF)):
        return set()
    if isinstance(f, Atom):
        return term_vars(f.left) | term_vars(f.right)
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for a in f.args:
            out |= free_vars(a)
        return out
    raise TypeError(f)


def subst_term(t: Term, sub: Mapping[str, Term]) -> Term:
    if isinstance(t, Var):
        return sub.get(t.name, t)
    if isinstance(t, Num):
        return t
    if isinstance(t, BinOp):
        return BinOp(t.op, subst_term(t.left, sub), subst_term(t.right, sub))
    if isinstance(t, Select):
        return Select(subst_term(t.array, sub), subst_term(t.index, sub))
    if isinstance(t, Update):
        return Update(subst_term(t.array, sub), subst_term(t.index, sub),
                      subst_term(t.value, sub))
    raise TypeError(t)


def subst(f: Formula, sub: Mapping[str, Term]) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        return Atom(f.op, subst_term(f.left, sub), subst_term(f.right, sub))
    if isinstance(f, Not):
        return Not(subst(f.arg, sub))
    if isinstance(f, And):
        return conj(*(subst(a, sub) for a in f.args))
    if isinstance(f, Or):
        return disj(*(subst(a, sub) for a in f.args))
    raise TypeError(f)


Literal = Formula  # an Atom (negations are eliminated by nnf)
Cube = tuple[Literal, ...]


def dnf(f: Formula, limit: int = 4096) -> list[Cube]:
    """Disjunctive normal form as a list of cubes of atoms.

    Raises OverflowError when the expansion would exceed `limit` cubes.
    """
    f = nnf(f)

    def go(g: Formula) -> list[Cube]:
        if isinstance(g, TrueF):
            return [()]
        if isinstance(g, FalseF):
            return []
        if isinstance(g, Atom):
            return [(g,)]
        if isinstance(g, Or):
            out: list[Cube] = []
            for a in g.args:
                out.extend(go(a))
                if len(out) > limit:
                    raise OverflowError("DNF blowup")
            return out
        if isinstance(g, And):
            cubes: list[Cube] = [()]
            for a in g.args:
                sub_cubes = go(a)
                nxt: list[Cube] = []
                for c in cubes:
                    for d in sub_cubes:
                        nxt.append(c + d)
                        if len(nxt) > limit:
                            raise OverflowError("DNF blowup")
                cubes = nxt
            return cubes
        raise TypeError(g)

    return go(f)


def formula_key(f: Formula) -> str:
    """Canonical text used for caching and deduplication."""
    if isinstance(f, And):
        return "(& " + " ".join(sorted(formula_key(a) for a in f.args)) + ")"
    if isinstance(f, Or):
        return "(| " + " ".join(sorted(formula_key(a) for a in f.args)) + ")"
    if isinstance(f, Not):
        return "(! " + formula_key(f.arg) + ")"
    if isinstance(f, Atom) and f.op in ("=", "!="):
        a, b = sorted([repr(f.left), repr(f.right)])
        return f"({f.op} {a} {b})"
    return repr(f)


def equivalent_syntactically(a: Formula, b: Formula) -> bool:
    return formula_key(nnf(a)) == formula_key(nnf(b))
