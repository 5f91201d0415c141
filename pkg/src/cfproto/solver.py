"""Logical backend: satisfiability, strongest postconditions, trace
feasibility and nested interpolants.

The built-in decision procedure covers conjunctions of linear equalities,
dis-equalities and inequalities over the integers (complete for the
unit-coefficient difference fragment the guard instrumentation produces).
Array select/update terms are eliminated by case splitting; multiplication
by a variable is over-approximated with an uninterpreted proxy.
"""
from __future__ import annotations

import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor
from typing import Callable, Iterable, Optional

from . import formula as fm
from . import lang
from .formula import (FALSE, TRUE, And, Atom, Cube, FalseF, Formula, Not, Num,
                      Or, Select, Term, TrueF, Update, Var, conj, disj, dnf,
                      eq, formula_key, free_vars, neg, nnf, subst, subst_term)


class SolverError(Exception):
    pass


LinExpr = tuple[dict[str, Fraction], Fraction]  # sum coeff*var + const


def _lin_zero() -> LinExpr:
    return ({}, Fraction(0))


def _lin_add(a: LinExpr, b: LinExpr, k: int = 1) -> LinExpr:
    coeffs = dict(a[0])
    for v, c in b[0].items():
        coeffs[v] = coeffs.get(v, Fraction(0)) + k * c
        if coeffs[v] == 0:
            del coeffs[v]
    return coeffs, a[1] + k * b[1]


def _term_canon(t: Term) -> str:
    return repr(t)


def _linearize(t: Term, proxies: dict[str, Term]) -> LinExpr:
    """Linear view of a term; nonlinear subterms become proxy variables."""
    if isinstance(t, Var):
        return {t.name: Fraction(1)}, Fraction(0)
    if isinstance(t, Num):
        return {}, Fraction(t.value)
    if isinstance(t, fm.BinOp):
        if t.op == "+":
            return _lin_add(_linearize(t.left, proxies), _linearize(t.right, proxies))
        if t.op == "-":
            return _lin_add(_linearize(t.left, proxies), _linearize(t.right, proxies), -1)
        if t.op == "*":
            l = _linearize(t.left, proxies)
            r = _linearize(t.right, proxies)
            if not l[0]:
                return {v: c * l[1] for v, c in r[0].items() if c * l[1] != 0}, r[1] * l[1]
            if not r[0]:
                return {v: c * r[1] for v, c in l[0].items() if c * r[1] != 0}, l[1] * r[1]
            name = f"#mul{_term_canon(t)}"
            proxies[name] = t
            return {name: Fraction(1)}, Fraction(0)
    if isinstance(t, Select):
        name = f"#sel{_term_canon(t)}"
        proxies[name] = t
        return {name: Fraction(1)}, Fraction(0)
    raise SolverError(f"cannot linearize term {t!r}")


# ---------------------------------------------------------------------------
# Array elimination within a cube

def _has_sel_of_update(t: Term) -> Optional[Select]:
    if isinstance(t, Select):
        if isinstance(t.array, Update):
            return t
        return _has_sel_of_update(t.array) or _has_sel_of_update(t.index)
    if isinstance(t, Update):
        return (_has_sel_of_update(t.array) or _has_sel_of_update(t.index)
                or _has_sel_of_update(t.value))
    if isinstance(t, fm.BinOp):
        return _has_sel_of_update(t.left) or _has_sel_of_update(t.right)
    return None


def _replace_term(t: Term, old: Term, new: Term) -> Term:
    if t == old:
        return new
    if isinstance(t, Select):
        return Select(_replace_term(t.array, old, new), _replace_term(t.index, old, new))
    if isinstance(t, Update):
        return Update(_replace_term(t.array, old, new), _replace_term(t.index, old, new),
                      _replace_term(t.value, old, new))
    if isinstance(t, fm.BinOp):
        return fm.BinOp(t.op, _replace_term(t.left, old, new), _replace_term(t.right, old, new))
    return t


def _cube_replace(cube: Cube, old: Term, new: Term) -> Cube:
    return tuple(Atom(a.op, _replace_term(a.left, old, new), _replace_term(a.right, old, new))
                 for a in cube)


def _is_array_def(a: Atom) -> Optional[tuple[str, Term]]:
    if a.op != "=":
        return None
    if isinstance(a.left, Var) and isinstance(a.right, Update):
        return a.left.name, a.right
    if isinstance(a.right, Var) and isinstance(a.left, Update):
        return a.right.name, a.left
    return None


def _mentions_update(t: Term) -> bool:
    if isinstance(t, Update):
        return True
    if isinstance(t, Select):
        return _mentions_update(t.array) or _mentions_update(t.index)
    if isinstance(t, fm.BinOp):
        return _mentions_update(t.left) or _mentions_update(t.right)
    return False


def _expand_arrays(cube: Cube, limit: int = 512) -> list[Cube]:
    """Split a cube into array-free cubes (read-over-write case analysis)."""
    # inline array definitions h' = update(h, i, v) into selects on h'
    defs: dict[str, Update] = {}
    for a in cube:
        d = _is_array_def(a)
        if d and d[0] not in defs:
            defs[d[0]] = d[1]  # type: ignore[assignment]
    if defs:
        changed = True
        rounds = 0
        while changed and rounds < 32:
            changed = False
            rounds += 1
            new_cube = []
            for a in cube:
                if _is_array_def(a):
                    new_cube.append(a)
                    continue
                l, r = a.left, a.right
                for name, u in defs.items():
                    l2 = _substitute_array_var(l, name, u)
                    r2 = _substitute_array_var(r, name, u)
                    if l2 != l or r2 != r:
                        changed = True
                    l, r = l2, r2
                new_cube.append(Atom(a.op, l, r))
            cube = tuple(new_cube)
        cube = tuple(a for a in cube if not _is_array_def(a))

    work = [cube]
    done: list[Cube] = []
    while work:
        c = work.pop()
        target = None
        for a in c:
            target = _has_sel_of_update(a.left) or _has_sel_of_update(a.right)
            if target:
                break
        if target is None:
            done.append(c)
            continue
        u: Update = target.array  # type: ignore[assignment]
        hit = _cube_replace(c, target, u.value) + (Atom("=", u.index, target.index),)
        miss = _cube_replace(c, target, Select(u.array, target.index)) \
            + (Atom("!=", u.index, target.index),)
        work.extend([hit, miss])
        if len(work) + len(done) > limit:
            raise SolverError("array case-split blowup")
    return done


def _substitute_array_var(t: Term, name: str, u: Update) -> Term:
    if isinstance(t, Select) and isinstance(t.array, Var) and t.array.name == name:
        return Select(u, _substitute_array_var(t.index, name, u))
    if isinstance(t, Select):
        return Select(_substitute_array_var(t.array, name, u),
                      _substitute_array_var(t.index, name, u))
    if isinstance(t, fm.BinOp):
        return fm.BinOp(t.op, _substitute_array_var(t.left, name, u),
                        _substitute_array_var(t.right, name, u))
    return t


def _congruence_splits(cube: Cube) -> list[Cube]:
    """Functional consistency for selects over the same base array."""
    proxies: dict[str, Term] = {}
    for a in cube:
        for t in (a.left, a.right):
            _collect_selects(t, proxies)
    sels = [(name, t) for name, t in proxies.items()]
    cubes = [cube]
    for i in range(len(sels)):
        for j in range(i + 1, len(sels)):
            (_, s1), (_, s2) = sels[i], sels[j]
            assert isinstance(s1, Select) and isinstance(s2, Select)
            if s1.array != s2.array:
                continue
            nxt: list[Cube] = []
            for c in cubes:
                nxt.append(c + (Atom("=", s1.index, s2.index), Atom("=", s1, s2)))
                nxt.append(c + (Atom("!=", s1.index, s2.index),))
            cubes = nxt
            if len(cubes) > 256:
                raise SolverError("select congruence blowup")
    return cubes


def _collect_selects(t: Term, out: dict[str, Term]) -> None:
    if isinstance(t, Select):
        out[_term_canon(t)] = t
        _collect_selects(t.index, out)
    elif isinstance(t, fm.BinOp):
        _collect_selects(t.left, out)
        _collect_selects(t.right, out)


# ---------------------------------------------------------------------------
# Linear cube decision with model construction

def _atom_to_lin(a: Atom, proxies: dict[str, Term]) -> tuple[str, LinExpr]:
    diff = _lin_add(_linearize(a.left, proxies), _linearize(a.right, proxies), -1)
    return a.op, diff


def _fm_feasible_model(ineqs: list[LinExpr]) -> Optional[dict[str, Fraction]]:
    """Fourier-Motzkin with back-substitution; each ineq means expr <= 0."""
    ineqs = [i for i in ineqs if i[0] or i[1] > 0]
    for coeffs, c in ineqs:
        if not coeffs and c > 0:
            return None
    vars_order = sorted({v for coeffs, _ in ineqs for v in coeffs})
    layers: list[tuple[str, list[LinExpr], list[LinExpr]]] = []
    cur = ineqs
    for x in vars_order:
        lowers: list[LinExpr] = []   # x >= expr form: coeff < 0
        uppers: list[LinExpr] = []   # coeff > 0
        rest: list[LinExpr] = []
        for coeffs, c in cur:
            k = coeffs.get(x, Fraction(0))
            if k == 0:
                rest.append((coeffs, c))
            elif k > 0:
                uppers.append((coeffs, c))
            else:
                lowers.append((coeffs, c))
        combined = list(rest)
        for lc, lconst in [(co, cn) for co, cn in lowers]:
            for uc, uconst in [(co, cn) for co, cn in uppers]:
                kl = -lc[x]
                ku = uc[x]
                coeffs = dict()
                merged = _lin_add(_scale((lc, lconst), ku), _scale((uc, uconst), kl))
                m_coeffs = {v: c for v, c in merged[0].items() if v != x and c != 0}
                combined.append((m_coeffs, merged[1]))
        for coeffs, c in combined:
            if not coeffs and c > 0:
                return None
        layers.append((x, lowers, uppers))
        cur = combined
    # back-substitute
    model: dict[str, Fraction] = {}
    for x, lowers, uppers in reversed(layers):
        lo: Optional[Fraction] = None
        hi: Optional[Fraction] = None
        for coeffs, c in lowers:
            k = coeffs[x]
            val = (-c - sum(cc * model.get(v, Fraction(0)) for v, cc in coeffs.items() if v != x)) / k
            lo = val if lo is None else max(lo, val)
        for coeffs, c in uppers:
            k = coeffs[x]
            val = (-c - sum(cc * model.get(v, Fraction(0)) for v, cc in coeffs.items() if v != x)) / k
            hi = val if hi is None else min(hi, val)
        if lo is not None:
            v = Fraction(ceil(lo))
            if hi is not None and v > hi:
                v = lo  # fall back to a rational witness
        elif hi is not None:
            v = Fraction(floor(hi))
        else:
            v = Fraction(0)
        model[x] = v
    return model


def _scale(e: LinExpr, k: Fraction) -> LinExpr:
    return {v: c * k for v, c in e[0].items()}, e[1] * k


def _lin_eval(e: LinExpr, model: dict[str, Fraction]) -> Fraction:
    return sum((c * model.get(v, Fraction(0)) for v, c in e[0].items()), e[1])


def _solve_linear_cube(eqs: list[LinExpr], ineqs: list[LinExpr],
                       diseqs: list[LinExpr]) -> Optional[dict[str, Fraction]]:
    # Gaussian elimination on equalities
    sub: dict[str, LinExpr] = {}
    work = list(eqs)
    while work:
        coeffs, c = work.pop()
        coeffs = dict(coeffs)
        # apply current substitution
        expr: LinExpr = ({}, c)
        for v, k in coeffs.items():
            if v in sub:
                expr = _lin_add(expr, _scale(sub[v], Fraction(k)), 1)
            else:
                expr = _lin_add(expr, ({v: Fraction(k)}, Fraction(0)))
        coeffs, c = expr
        if not coeffs:
            if c != 0:
                return None
            continue
        pivot = sorted(coeffs)[0]
        k = coeffs[pivot]
        rhs = ({v: -cc / k for v, cc in coeffs.items() if v != pivot}, -c / k)
        # normalize existing substitutions through the new pivot
        for v in list(sub):
            e = sub[v]
            if pivot in e[0]:
                kk = e[0][pivot]
                e2 = ({a: b for a, b in e[0].items() if a != pivot}, e[1])
                sub[v] = _lin_add(e2, _scale(rhs, kk))
        sub[pivot] = rhs

    def apply_sub(e: LinExpr) -> LinExpr:
        out: LinExpr = ({}, e[1])
        for v, k in e[0].items():
            if v in sub:
                out = _lin_add(out, _scale(sub[v], k))
            else:
                out = _lin_add(out, ({v: k}, Fraction(0)))
        return out

    ineqs2 = [apply_sub(e) for e in ineqs]
    diseqs2 = []
    for e in diseqs:
        e2 = apply_sub(e)
        if not e2[0]:
            if e2[1] == 0:
                return None
            continue
        diseqs2.append(e2)

    def search(ineqs_now: list[LinExpr], remaining: list[LinExpr]) -> Optional[dict[str, Fraction]]:
        model = _fm_feasible_model(ineqs_now)
        if model is None:
            return None
        pending = [d for d in remaining if _lin_eval(d, model) == 0]
        if not pending:
            return model
        d = pending[0]
        rest = [x for x in remaining if x is not d]
        for branch in (_lin_add(d, ({}, Fraction(1))),      # d <= -1
                       _scale(_lin_add(({}, Fraction(1)), _scale(d, Fraction(-1))), Fraction(1))):
            m = search(ineqs_now + [branch], rest)
            if m is not None:
                return m
        return None

    model = search(ineqs2, diseqs2)
    if model is None:
        return None
    # recover eliminated variables
    for v in sub:
        model[v] = _lin_eval(sub[v], model)
    return model


def _cube_model(cube: Cube) -> Optional[dict[str, Fraction]]:
    for c in _expand_arrays(cube):
        for c2 in _congruence_splits(c):
            proxies: dict[str, Term] = {}
            eqs: list[LinExpr] = []
            ineqs: list[LinExpr] = []
            diseqs: list[LinExpr] = []
            ok = True
            for a in c2:
                try:
                    op, e = _atom_to_lin(a, proxies)
                except SolverError:
                    ok = False
                    break
                if op == "=":
                    eqs.append(e)
                elif op == "!=":
                    diseqs.append(e)
                elif op == "<":
                    ineqs.append(_lin_add(e, ({}, Fraction(1))))
                elif op == "<=":
                    ineqs.append(e)
                elif op == ">":
                    ineqs.append(_lin_add(_scale(e, Fraction(-1)), ({}, Fraction(1))))
                elif op == ">=":
                    ineqs.append(_scale(e, Fraction(-1)))
                else:
                    raise SolverError(f"unknown relation {op}")
            if not ok:
                raise SolverError("unsupported atom in cube")
            m = _solve_linear_cube(eqs, ineqs, diseqs)
            if m is not None:
                return m
    return None


# ---------------------------------------------------------------------------
# Solver facade with memoization

class Solver:
    def __init__(self, backend: Optional["SmtlibBackend"] = None):
        self.backend = backend
        self._cache: dict[str, bool] = {}
        self.num_queries = 0

    def is_sat(self, f: Formula) -> bool:
        key = formula_key(nnf(f))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        self.num_queries += 1
        if self.backend is not None:
            res = self.backend.is_sat(f)
        else:
            res = self.get_model(f) is not None
        self._cache[key] = res
        return res

    def get_model(self, f: Formula) -> Optional[dict[str, int]]:
        for cube in dnf(f):
            m = _cube_model(cube)
            if m is not None:
                out: dict[str, int] = {}
                for v, val in m.items():
                    if val.denominator != 1:
                        raise SolverError(f"non-integral witness for {v}")
                    out[v] = int(val)
                return out
        return None

    def valid(self, antecedent: Formula, consequent: Formula) -> bool:
        return not self.is_sat(conj(antecedent, neg(consequent)))


# ---------------------------------------------------------------------------
# Strongest postcondition

class FreshNames:
    def __init__(self) -> None:
        self.n = 0

    def fresh(self, base: str) -> str:
        self.n += 1
        return f"{base}'{self.n}"


def sp(stmt: lang.AtomicStmt, P: Formula, names: Optional[FreshNames] = None) -> Formula:
    """Strongest postcondition over program-level variables.

    Assignments havoc the target through a fresh name, so the result stays
    quantifier-free.
    """
    names = names or FreshNames()
    if isinstance(stmt, (lang.ASkip, lang.ACall, lang.AReturn, lang.AApiCall)):
        return P
    if isinstance(stmt, lang.AAssume):
        stars = lang._StarCounter(prefix=f"#star'{names.fresh('s')}")
        return conj(P, lang.pred_to_formula(stmt.pred, stars))
    if isinstance(stmt, (lang.AAssign, lang.ABind)):
        v = stmt.target
        old = Var(names.fresh(v))
        P2 = subst(P, {v: old})
        stars = lang._StarCounter(prefix=f"#star'{names.fresh('s')}")
        rhs = lang.expr_to_term(stmt.expr, stars)
        rhs = subst_term(rhs, {v: old})
        if isinstance(stmt.expr, lang.StarE):
            return P2
        return conj(P2, eq(Var(v), rhs))
    if isinstance(stmt, lang.ANew):
        v = stmt.target
        oldv = Var(names.fresh(v))
        olda = Var(names.fresh(lang.ALLOC_VAR))
        P2 = subst(P, {v: oldv, lang.ALLOC_VAR: olda})
        return conj(P2,
                    eq(Var(v), fm.BinOp("+", olda, Num(1))),
                    eq(Var(lang.ALLOC_VAR), fm.BinOp("+", olda, Num(1))))
    if isinstance(stmt, lang.AStore):
        h = lang.heap_array(stmt.field).name
        oldh = Var(names.fresh(h))
        P2 = subst(P, {h: oldh})
        stars = lang._StarCounter(prefix=f"#star'{names.fresh('s')}")
        val = lang.expr_to_term(stmt.expr, stars)
        return conj(P2, eq(Var(h), Update(oldh, Var(stmt.base), val)))
    raise SolverError(f"sp undefined for {stmt!r}")


# ---------------------------------------------------------------------------
# Trace feasibility and nested interpolants
# (traces are encoded by the traces module into SsaTrace bundles)

@dataclass
class SsaTrace:
    """SSA view of a nested trace, aligned position-by-position."""
    statements: list[lang.AtomicStmt]          # original atomic statements
    constraints: list[Formula]                 # SSA constraint per position
    nesting: dict[int, int]                    # call position -> return position
    var_frame: dict[str, int]                  # SSA name -> owning frame id
    pos_rename: list[dict[str, str]]           # per position: SSA name -> program name
    states: list[object]                       # PCFA state per position (n+1 entries)


def feasible_trace(tr: SsaTrace, solver: Solver):
    """Sat(model) / Unsat for the conjunction of the trace constraints."""
    whole = conj(*tr.constraints)
    model = solver.get_model(whole)
    if model is None:
        return None
    return model


def _project(f: Formula, drop: Callable[[str], bool]) -> Formula:
    """Exact existential projection of the variables selected by `drop`."""
    cubes = dnf(f)
    out = []
    for cube in cubes:
        lits = list(cube)
        victims = sorted({v for a in lits for v in free_vars(a) if drop(v)})
        for x in victims:
            with_x = [a for a in lits if x in free_vars(a)]
            without = [a for a in lits if x not in free_vars(a)]
            # try an equality definition x = t
            definition: Optional[Term] = None
            for a in with_x:
                if a.op != "=":
                    continue
                for lhs, rhs in ((a.left, a.right), (a.right, a.left)):
                    if isinstance(lhs, Var) and lhs.name == x and x not in fm.term_vars(rhs):
                        definition = rhs
                        break
                if definition is not None:
                    break
            if definition is not None:
                rep = {x: definition}
                without.extend(
                    Atom(a.op, subst_term(a.left, rep), subst_term(a.right, rep))
                    for a in with_x
                    if not (a.op == "=" and
                            subst_term(a.left, rep) == subst_term(a.right, rep)))
                lits = without
                continue
            # inequalities: Fourier-Motzkin; dis-equalities on x are droppable
            lowers, uppers, keep = [], [], []
            proxies: dict[str, Term] = {}
            linear_ok = True
            for a in with_x:
                if a.op == "!=":
                    continue
                try:
                    op, e = _atom_to_lin(a, proxies)
                except SolverError:
                    linear_ok = False
                    break
                if op == "=":
                    linear_ok = False  # equality on x without a var definition
                    break
                if op == "<":
                    e = _lin_add(e, ({}, Fraction(1)))
                elif op == ">":
                    e = _lin_add(_scale(e, Fraction(-1)), ({}, Fraction(1)))
                elif op == ">=":
                    e = _scale(e, Fraction(-1))
                k = e[0].get(x, Fraction(0))
                if k > 0:
                    uppers.append(e)
                elif k < 0:
                    lowers.append(e)
                else:
                    keep.append(e)
            if not linear_ok:
                # weaken: drop every literal mentioning x
                lits = without
                continue
            for lo in lowers:
                for up in uppers:
                    merged = _lin_add(_scale(lo, up[0][x]), _scale(up, -lo[0][x]))
                    keep.append((({v: c for v, c in merged[0].items() if v != x}), merged[1]))
            without.extend(_lin_to_atom(e) for e in keep)
            lits = without
        out.append(conj(*lits))
    return disj(*out)


def _lin_to_atom(e: LinExpr) -> Formula:
    coeffs, c = e
    if not coeffs:
        return TRUE if c <= 0 else FALSE
    # expr <= 0 rendered as sum <= -c with integer coefficients
    mult = 1
    for k in list(coeffs.values()) + [c]:
        mult = mult * k.denominator // _gcd(mult, k.denominator)
    left = None
    for v in sorted(coeffs):
        k = int(coeffs[v] * mult)
        part: Term = Var(v) if k == 1 else fm.BinOp("*", Num(k), Var(v))
        left = part if left is None else fm.BinOp("+", left, part)
    assert left is not None
    return Atom("<=", left, Num(-int(c * mult)))


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def nested_interpolants(tr: SsaTrace, solver: Solver) -> list[Formula]:
    """Interpolant sequence [I0 .. I_{n+1}] for an infeasible nested trace.

    Computed by frame-local strongest postconditions restricted to an
    unsat core of the trace constraints, with exact projection of callee
    locals at return positions.
    """
    whole = conj(*tr.constraints)
    if solver.is_sat(whole):
        raise SolverError("trace is feasible; no interpolants exist")
    core = _unsat_core(tr.constraints, solver)
    for active in (core, set(range(len(tr.constraints)))):
        seq = _frame_sp_sequence(tr, active, solver)
        if seq is not None and check_interpolant_contract(tr, seq, solver):
            return seq
    raise SolverError("could not produce a valid interpolant sequence")


def _unsat_core(constraints: list[Formula], solver: Solver) -> set[int]:
    active = {i for i, c in enumerate(constraints) if not isinstance(c, TrueF)}
    for i in sorted(active):
        trial = active - {i}
        if not solver.is_sat(conj(*(constraints[j] for j in sorted(trial)))):
            active = trial
    return active


def _frame_sp_sequence(tr: SsaTrace, active: set[int],
                       solver: Solver) -> Optional[list[Formula]]:
    n = len(tr.statements)
    returns = {j: i for i, j in tr.nesting.items()}  # return pos -> call pos
    frame_of_pos: list[int] = _frame_ids(tr)
    interps: list[Formula] = []
    stack: list[Formula] = [TRUE]
    call_interp: dict[int, Formula] = {}
    frame_stack: list[int] = [frame_of_pos[0]]
    try:
        for i in range(n):
            interps.append(_simplify(stack[-1], solver))
            sigma = tr.statements[i]
            if isinstance(sigma, lang.ACall):
                call_interp[i] = stack[-1]
                stack.append(TRUE)
                frame_stack.append(frame_of_pos[i + 1] if i + 1 < len(frame_of_pos) else -1)
            elif isinstance(sigma, lang.AReturn):
                callee_f = stack.pop()
                callee_frame = frame_stack.pop()
                j = returns[i]
                merged = conj(callee_f, call_interp[j])
                merged = _project(
                    merged, lambda v: tr.var_frame.get(v, -1) == callee_frame)
                stack[-1] = merged
            else:
                if i in active:
                    stack[-1] = conj(stack[-1], tr.constraints[i])
        final = stack[-1]
        if solver.is_sat(final):
            return None
        interps.append(FALSE)
        interps[0] = TRUE
        return interps
    except OverflowError:
        return None


def _frame_ids(tr: SsaTrace) -> list[int]:
    """Frame id owning each position (the callee's id for entry positions)."""
    ids = []
    depth_stack = [0]
    next_id = 1
    returns = {j for j in tr.nesting.values()}
    for i, s in enumerate(tr.statements):
        ids.append(depth_stack[-1])
        if isinstance(s, lang.ACall):
            depth_stack.append(next_id)
            next_id += 1
        elif isinstance(s, lang.AReturn):
            depth_stack.pop()
    return ids


def _simplify(f: Formula, solver: Solver) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, And):
        args = tuple(a for a in f.args
                     if not (isinstance(a, Atom) and a.op == "=" and a.left == a.right))
        # dedupe by canonical key
        seen: dict[str, Formula] = {}
        for a in args:
            seen.setdefault(formula_key(a), a)
        return conj(*seen.values())
    return f


def check_interpolant_contract(tr: SsaTrace, interps: list[Formula],
                               solver: Solver) -> bool:
    n = len(tr.statements)
    if len(interps) != n + 1:
        return False
    if not isinstance(interps[0], TrueF) or not isinstance(interps[-1], FalseF):
        return False
    returns = {j: i for i, j in tr.nesting.items()}
    for i in range(n):
        post = conj(interps[i], tr.constraints[i])
        if i in returns:
            post = conj(post, interps[returns[i]])
        if not solver.valid(post, interps[i + 1]):
            return False
    return True


# ---------------------------------------------------------------------------
# External SMT-LIB backend (optional)

class SmtlibBackend:
    """Client for an external solver process speaking SMT-LIB 2 text.

    One process per query keeps the protocol simple and robust; queries at
    this scale are tiny.
    """

    def __init__(self, command: str, timeout: float = 10.0):
        self.command = command.split()
        self.timeout = timeout

    def is_sat(self, f: Formula) -> bool:
        script = self._script(f) + "(check-sat)\n"
        out = self._run(script)
        verdict = out.strip().splitlines()[-1] if out.strip() else ""
        if verdict == "sat":
            return True
        if verdict == "unsat":
            return False
        raise SolverError(f"external solver answered {out!r}")

    def _script(self, f: Formula) -> str:
        decls = []
        arrays = set()
        for v in sorted(free_vars(f)):
            if v.startswith("#heap_"):
                arrays.add(v)
            else:
                decls.append(f"(declare-const {_smt_name(v)} Int)")
        for v in sorted(arrays):
            decls.append(f"(declare-const {_smt_name(v)} (Array Int Int))")
        return "(set-logic ALL)\n" + "\n".join(decls) + f"\n(assert {_smt_formula(f)})\n"

    def _run(self, script: str) -> str:
        try:
            proc = subprocess.run(self.command, input=script, text=True,
                                  capture_output=True, timeout=self.timeout)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise SolverError(f"external solver failed: {e}") from e
        return proc.stdout


def _smt_name(v: str) -> str:
    return "|" + v.replace("|", "_") + "|"


def _smt_term(t: Term) -> str:
    if isinstance(t, Var):
        return _smt_name(t.name)
    if isinstance(t, Num):
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    if isinstance(t, fm.BinOp):
        return f"({t.op} {_smt_term(t.left)} {_smt_term(t.right)})"
    if isinstance(t, Select):
        return f"(select {_smt_term(t.array)} {_smt_term(t.index)})"
    if isinstance(t, Update):
        return f"(store {_smt_term(t.array)} {_smt_term(t.index)} {_smt_term(t.value)})"
    raise SolverError(f"cannot serialize {t!r}")


def _smt_formula(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        if f.op == "!=":
            return f"(not (= {_smt_term(f.left)} {_smt_term(f.right)}))"
        return f"({f.op} {_smt_term(f.left)} {_smt_term(f.right)})"
    if isinstance(f, Not):
        return f"(not {_smt_formula(f.arg)})"
    if isinstance(f, And):
        return "(and " + " ".join(_smt_formula(a) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(_smt_formula(a) for a in f.args) + ")"
    raise SolverError(f"cannot serialize {f!r}")
