"""Predicated control-flow automata: construction from the instrumented
AST and predicate-driven refinement (complete cubes, state cloning,
transition feasibility filtering)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import formula as fm
from . import lang
from .formula import Formula, TRUE, conj, formula_key, neg
from .lang import (AAssume, ABind, ACall, ASkip, AtomicStmt, ExprP, NotP,
                   Pred, ProgramAst, StarE, pred_is_star)
from .solver import Solver, sp


@dataclass(frozen=True)
class State:
    loc: int
    pred: Formula

    def __repr__(self) -> str:
        return f"s{self.loc}[{self.pred}]"


Edge = tuple[State, AtomicStmt, State]


@dataclass
class Pcfa:
    method: str
    states: set[State]
    transitions: set[Edge]
    entry_loc: int
    exit_loc: int
    locations: list[int]  # in creation order

    def entry_states(self) -> set[State]:
        return {s for s in self.states if s.loc == self.entry_loc}

    def exit_states(self) -> set[State]:
        return {s for s in self.states if s.loc == self.exit_loc}

    def out_edges(self, s: State) -> list[Edge]:
        return sorted((e for e in self.transitions if e[0] == s), key=_edge_key)

    def in_edges(self, s: State) -> list[Edge]:
        return sorted((e for e in self.transitions if e[2] == s), key=_edge_key)


def _edge_key(e: Edge):
    return (e[0].loc, formula_key(e[0].pred), e[2].loc, formula_key(e[2].pred),
            lang.stmt_text(e[1]))


@dataclass
class ProgramPcfa:
    methods: dict[str, Pcfa]
    loc_method: dict[int, str]
    statics: set[str]


# ---------------------------------------------------------------------------
# Construction

class _Lowerer:
    def __init__(self, ast: ProgramAst):
        self.ast = ast
        self.statics = {f.name for f in ast.static_fields()}
        self.next_loc = 0
        self.loc_method: dict[int, str] = {}

    def fresh(self, method: str) -> int:
        l = self.next_loc
        self.next_loc += 1
        self.loc_method[l] = method
        return l

    def lower_method(self, m: lang.MethodDecl) -> Pcfa:
        edges: list[tuple[int, AtomicStmt, int]] = []
        entry = self.fresh(m.name)
        exit_pending = object()
        locs = [entry]

        def fresh() -> int:
            l = self.fresh(m.name)
            locs.append(l)
            return l

        def q(e: lang.Expr) -> lang.Expr:
            return lang.qualify_expr(e, m.name, self.statics)

        def qp(p: Pred) -> Pred:
            return lang.qualify_pred(p, m.name, self.statics)

        def lower_stmts(body: list[lang.Stmt], cur: int, nxt: int) -> None:
            if not body:
                edges.append((cur, ASkip(), nxt))
                return
            for i, s in enumerate(body):
                tgt = nxt if i == len(body) - 1 else fresh()
                lower_stmt(s, cur, tgt)
                cur = tgt

        def lower_stmt(s: lang.Stmt, cur: int, nxt: int) -> None:
            if isinstance(s, lang.Skip):
                edges.append((cur, ASkip(s.line), nxt))
            elif isinstance(s, lang.Assign):
                tgt = lang.qualify(s.target, m.name, self.statics)
                edges.append((cur, lang.AAssign(tgt, q(s.expr), s.line), nxt))
            elif isinstance(s, lang.Store):
                base = lang.qualify(s.base, m.name, self.statics)
                edges.append((cur, lang.AStore(base, s.field, q(s.expr), s.line), nxt))
            elif isinstance(s, lang.Assume):
                edges.append((cur, AAssume(qp(s.pred), s.line), nxt))
            elif isinstance(s, lang.New):
                tgt = lang.qualify(s.target, m.name, self.statics)
                edges.append((cur, lang.ANew(tgt, s.cls, s.line), nxt))
            elif isinstance(s, lang.ApiCall):
                recv = lang.qualify(s.receiver, m.name, self.statics)
                args = tuple(lang.qualify(a, m.name, self.statics) for a in s.args)
                edges.append((cur, lang.AApiCall(recv, s.method, args, s.line), nxt))
            elif isinstance(s, lang.Call):
                callee = self.ast.methods()[s.method]
                pos = cur
                for (formal, _ty), actual in zip(callee.params, s.args):
                    tgt = lang.qualify(formal, s.method, self.statics)
                    mid = fresh()
                    edges.append((pos, ABind(tgt, q(lang.VarE(actual)), s.method, s.line), mid))
                    pos = mid
                edges.append((pos, ACall(s.method, s.line), nxt))
            elif isinstance(s, lang.If):
                else_cond: Pred = s.pred if pred_is_star(s.pred) else NotP(s.pred)
                for cond, body in ((s.pred, s.then), (else_cond, s.els)):
                    if not body:
                        edges.append((cur, AAssume(qp(cond), s.line), nxt))
                    else:
                        mid = fresh()
                        edges.append((cur, AAssume(qp(cond), s.line), mid))
                        lower_stmts(body, mid, nxt)
            else:
                raise TypeError(s)

        exit_loc = self.fresh(m.name)
        lower_stmts(m.body, entry, exit_loc)
        locs.append(exit_loc)
        states = {State(l, TRUE) for l in locs}
        trans = {(State(a, TRUE), st, State(b, TRUE)) for a, st, b in edges}
        return Pcfa(m.name, states, trans, entry, exit_loc, locs)


def build_initial(ast: ProgramAst) -> ProgramPcfa:
    lw = _Lowerer(ast)
    methods = {}
    for c in ast.classes:
        for m in c.methods:
            methods[m.name] = lw.lower_method(m)
    return ProgramPcfa(methods, lw.loc_method, lw.statics)


# ---------------------------------------------------------------------------
# Refinement

def states_at(p: Pcfa, loc: int) -> set[State]:
    return {s for s in p.states if s.loc == loc}


def complete_cubes(preds: Iterable[Formula]) -> set[Formula]:
    ps = sorted(set(preds), key=formula_key)
    cubes = [TRUE]
    for p in ps:
        cubes = [conj(c, p) for c in cubes] + [conj(c, neg(p)) for c in cubes]
    return set(cubes)


def clone_states(states: set[State], loc: int, cubes: set[Formula],
                 solver: Optional[Solver] = None) -> set[State]:
    here = {s for s in states if s.loc == loc}
    out = states - here
    for s in here:
        for phi in sorted(cubes, key=formula_key):
            cand = conj(s.pred, phi)
            if solver is not None and not solver.is_sat(cand):
                continue  # unsatisfiable clone can never carry edges
            out.add(State(loc, cand))
    return out


def edge_feasible(e: Edge, solver: Solver) -> bool:
    s1, stmt, s2 = e
    if isinstance(stmt, (ACall,)):
        return solver.is_sat(conj(s1.pred, s2.pred))
    return solver.is_sat(conj(sp(stmt, s1.pred), s2.pred))


def update_transitions(delta: set[Edge], loc: int, new_states: set[State],
                       solver: Solver) -> set[Edge]:
    incoming = {e for e in delta if e[2].loc == loc}
    outgoing = {e for e in delta if e[0].loc == loc}
    out = delta - incoming - outgoing
    here = sorted((s for s in new_states if s.loc == loc),
                  key=lambda s: formula_key(s.pred))
    for (src, stmt, _old) in sorted(incoming, key=_edge_key):
        if src.loc == loc:
            continue  # handled as a self-loop below
        for s2 in here:
            e = (src, stmt, s2)
            if edge_feasible(e, solver):
                out.add(e)
    for (_old, stmt, dst) in sorted(outgoing, key=_edge_key):
        if dst.loc == loc:
            # self-loop: re-add among clone pairs
            for s1 in here:
                for s2 in here:
                    e = (s1, stmt, s2)
                    if edge_feasible(e, solver):
                        out.add(e)
            continue
        for s1 in here:
            e = (s1, stmt, dst)
            if edge_feasible(e, solver):
                out.add(e)
    return out


def refine(P: ProgramPcfa, psi: dict[int, set[Formula]], solver: Solver,
           cube_cap: int = 6) -> ProgramPcfa:
    new_methods = {m: Pcfa(p.method, set(p.states), set(p.transitions),
                           p.entry_loc, p.exit_loc, list(p.locations))
                   for m, p in P.methods.items()}
    for loc in sorted(psi):
        method = P.loc_method[loc]
        pcfa = new_methods[method]
        preds = sorted(psi[loc], key=formula_key)
        if len(preds) > cube_cap:
            preds = preds[:cube_cap]
        if not preds:
            continue
        cubes = complete_cubes(preds)
        pcfa.states = clone_states(pcfa.states, loc, cubes, solver)
        pcfa.transitions = update_transitions(pcfa.transitions, loc,
                                              states_at(pcfa, loc), solver)
    return ProgramPcfa(new_methods, dict(P.loc_method), set(P.statics))
