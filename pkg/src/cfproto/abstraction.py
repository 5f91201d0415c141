"""Extraction of the context-free abstraction grammar from PCFAs.

One nonterminal per (method, exit-clone, state); one clone-start symbol
per (method, exit-clone); productions follow the PCFA edges, gated by
backward reachability toward the exit clone and by call-clone
feasibility."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .formula import Formula, conj, formula_key
from .frontend import ApiCallPattern
from .grammar import Grammar, Production
from .lang import AApiCall, ACall, AtomicStmt
from .pcfa import Edge, Pcfa, ProgramPcfa, State
from .solver import Solver


@dataclass(frozen=True)
class CloneStart:
    method: str
    exit_state: State

    def __repr__(self) -> str:
        return f"{self.method.capitalize()}{{{self.exit_state.pred}}}"


@dataclass(frozen=True)
class StateSym:
    method: str
    exit_state: State
    state: State

    def __repr__(self) -> str:
        return f"{self.method}:{self.state.loc}[{self.state.pred}]" \
               f"@{{{self.exit_state.pred}}}"


@dataclass(frozen=True)
class RootSym:
    def __repr__(self) -> str:
        return "<root>"


@dataclass(frozen=True)
class Prov:
    kind: str                       # 'edge' | 'call' | 'start' | 'exit' | 'chain' | 'root'
    method: str = ""
    edge: Optional[Edge] = None
    edges: tuple[Edge, ...] = ()    # for chains


def call_clone_feasible(e: Edge, phi_prime: Formula, solver: Solver) -> bool:
    s, _stmt, s2 = e
    return solver.is_sat(conj(s.pred, s2.pred, phi_prime))


def _backward_reachable(A: Pcfa, c: State) -> set[State]:
    seen = {c}
    frontier = [c]
    preds: dict[State, list[State]] = {}
    for (a, _st, b) in A.transitions:
        preds.setdefault(b, []).append(a)
    while frontier:
        cur = frontier.pop()
        for a in preds.get(cur, []):
            if a not in seen:
                seen.add(a)
                frontier.append(a)
    return seen


def _state_key(s: State):
    return (s.loc, formula_key(s.pred))


def gen_grammar(A: Pcfa, c: State, theta: list[tuple[str, State]],
                solver: Solver) -> list[Production]:
    """Productions contributed by exit clone (c, A.method)."""
    m = A.method
    reach = _backward_reachable(A, c)
    prods: list[Production] = []

    def sym(s: State) -> StateSym:
        return StateSym(m, c, s)

    for (s, stmt, s2) in sorted(A.transitions, key=lambda e: (_state_key(e[0]), _state_key(e[2]), repr(e[1]))):
        if s2 not in reach:
            continue
        if isinstance(stmt, ACall):
            for (m2, c2) in theta:
                if m2 != stmt.method:
                    continue
                if call_clone_feasible((s, stmt, s2), c2.pred, solver):
                    prods.append(Production(sym(s), (CloneStart(m2, c2), sym(s2)),
                                            Prov("call", m, (s, stmt, s2))))
        elif isinstance(stmt, AApiCall):
            t = ApiCallPattern(stmt.receiver, stmt.method, stmt.args)
            prods.append(Production(sym(s), (t, sym(s2)), Prov("edge", m, (s, stmt, s2))))
        else:
            prods.append(Production(sym(s), (sym(s2),), Prov("edge", m, (s, stmt, s2))))
    for s in sorted(A.entry_states(), key=_state_key):
        if s in reach:
            prods.append(Production(CloneStart(m, c), (sym(s),), Prov("start", m)))
    prods.append(Production(sym(c), (), Prov("exit", m)))
    return prods


def construct_cfg(P: ProgramPcfa, solver: Solver, entry: str = "main") -> Grammar:
    theta: list[tuple[str, State]] = []
    for m in sorted(P.methods):
        for c in sorted(P.methods[m].exit_states(), key=_state_key):
            theta.append((m, c))
    if not any(m == entry for m, _ in theta):
        raise ValueError(f"{entry} has no exit states")
    prods: list[Production] = []
    for (m, c) in theta:
        prods.extend(gen_grammar(P.methods[m], c, theta, solver))
    main_starts = [CloneStart(m, c) for (m, c) in theta if m == entry]
    if len(main_starts) == 1:
        start = main_starts[0]
    else:
        start = RootSym()
        for s in main_starts:
            prods.append(Production(start, (s,), Prov("root", entry)))
    nts = {p.lhs for p in prods}
    terms = {s for p in prods for s in p.rhs if isinstance(s, ApiCallPattern)}
    return Grammar(nts, terms, prods, start)


def compact_grammar(g: Grammar) -> Grammar:
    """Contract chains of plain unit productions (basic-block grouping).

    A nonterminal with exactly one production, whose production is a pure
    state-to-state step, is merged into its references; merged provenance
    keeps the full edge sequence so derivations still map to paths."""
    prods = list(g.productions)
    changed = True
    while changed:
        changed = False
        by_lhs: dict = {}
        for p in prods:
            by_lhs.setdefault(p.lhs, []).append(p)
        for nt, plist in by_lhs.items():
            if nt == g.start or not isinstance(nt, StateSym):
                continue
            if len(plist) != 1:
                continue
            p = plist[0]
            if not (isinstance(p.prov, Prov) and p.prov.kind in ("edge", "chain")
                    and len(p.rhs) == 1 and isinstance(p.rhs[0], StateSym)):
                continue
            if p.rhs[0] == nt:
                continue
            refs = [q for q in prods if q is not p and nt in q.rhs]
            if not all(len(q.rhs) == 1 and isinstance(q.prov, Prov)
                       and q.prov.kind in ("edge", "chain") for q in refs):
                continue  # contracting would drop a statement from some path
            edges = p.prov.edges if p.prov.kind == "chain" else (p.prov.edge,)
            new_prods = []
            for q in prods:
                if q is p:
                    continue
                if nt in q.rhs:
                    rhs = tuple(p.rhs[0] if s == nt else s for s in q.rhs)
                    if isinstance(q.prov, Prov) and q.prov.kind in ("edge", "chain") \
                            and len(q.rhs) == 1:
                        qedges = q.prov.edges if q.prov.kind == "chain" else (q.prov.edge,)
                        new_prods.append(Production(q.lhs, rhs,
                                                    Prov("chain", q.prov.method,
                                                         edges=qedges + edges)))
                    else:
                        new_prods.append(Production(q.lhs, rhs, q.prov))
                else:
                    new_prods.append(q)
            prods = new_prods
            changed = True
            break
    nts = {p.lhs for p in prods}
    terms = set(g.terminals)
    return Grammar(nts, terms, prods, g.start)
