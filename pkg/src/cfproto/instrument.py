"""Program instrumentation: route every api_call through the protocol's
wildcard fields, and add per-method symbolic-constant ghosts."""
from __future__ import annotations

import copy

from .frontend import ApiCallPattern, SpecProtocol, terminals_for_method
from .lang import (AndP, ApiCall, Assign, ClassDecl, CmpP, FieldDecl, If,
                   MethodDecl, Pred, ProgramAst, Skip, StarE, Stmt, VarE,
                   ExprP)


class InstrumentError(Exception):
    pass


def guard(t: ApiCallPattern, s: ApiCall) -> Pred:
    """Conjunction equating each wildcard position of t with the matching
    variable of s; `true` (encoded as ExprP(1)) for zero positions."""
    positions = [(t.receiver, s.receiver)] + list(zip(t.args, s.args))
    if len(t.args) != len(s.args):
        raise InstrumentError(
            f"arity mismatch between pattern {t} and call {s.receiver}.{s.method}")
    clauses: list[Pred] = [CmpP("=", VarE(w), VarE(v)) for w, v in positions]
    if not clauses:
        from .lang import NumE
        return ExprP(NumE(1))
    out = clauses[0]
    for c in clauses[1:]:
        out = AndP(out, c)
    return out


def _instrument_stmt(s: Stmt, spec: SpecProtocol) -> Stmt:
    if isinstance(s, ApiCall):
        pats = sorted(terminals_for_method(spec, s.method), key=repr)
        if not pats:
            return Skip(line=s.line)
        chain: Stmt = Skip(line=s.line)
        for t in reversed(pats):
            replaced = ApiCall(t.receiver, t.method, list(t.args), line=s.line)
            chain = If(guard(t, s), [replaced], [chain], line=s.line)
        return chain
    if isinstance(s, If):
        out = copy.copy(s)
        out.then = [_instrument_stmt(c, spec) for c in s.then]
        out.els = [_instrument_stmt(c, spec) for c in s.els]
        return out
    return s


def instrument(ast: ProgramAst, spec: SpecProtocol) -> ProgramAst:
    out = copy.deepcopy(ast)
    existing = {f.name for f in out.static_fields()}
    wilds = sorted({w for t in spec.terminals for w in t.wildcard_set()})
    for w in wilds:
        if w in existing:
            raise InstrumentError(f"static field {w} clashes with a wildcard")
    if wilds:
        host = out.classes[0]
        for w in wilds:
            host.fields.append(FieldDecl(w, spec.wildcard_types.get(w, "int"),
                                         static=True, init=StarE()))
    for c in out.classes:
        for m in c.methods:
            m.body = [_instrument_stmt(s, spec) for s in m.body]
    return out


def ghost_name(param: str, method: str) -> str:
    short = method[:3] if len(method) > 3 else method
    return f"{param}_{short}"


def add_symbolic_constants(ast: ProgramAst) -> ProgramAst:
    """Prefix each method body with ghost bindings freezing parameter
    entry values, for call-site-polymorphic interpolants."""
    out = copy.deepcopy(ast)
    for c in out.classes:
        for m in c.methods:
            prelude = []
            for p, _ty in m.params:
                g = ghost_name(p, m.name)
                if any(g == q for q, _ in m.params):
                    raise InstrumentError(f"ghost name {g} clashes in {m.name}")
                prelude.append(Assign(g, VarE(p), line=0))
            m.body = prelude + m.body
    return out


def ghost_names(ast: ProgramAst) -> set[str]:
    return {ghost_name(p, m.name)
            for m in ast.methods().values() for p, _ in m.params}
