"""Generic context-free grammar algorithms.

Nonterminals and terminals are arbitrary hashable values; a symbol is a
nonterminal iff it belongs to the grammar's nonterminal set.  CNF
conversion keeps enough bookkeeping to map CYK parses back to leftmost
derivations in the original grammar.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Optional

Symbol = Hashable


@dataclass(frozen=True)
class Production:
    lhs: Symbol
    rhs: tuple[Symbol, ...]
    prov: object = None

    def __repr__(self) -> str:
        body = " ".join(map(str, self.rhs)) or "eps"
        return f"{self.lhs} -> {body}"


@dataclass
class Grammar:
    nonterminals: set
    terminals: set
    productions: list[Production]
    start: Symbol

    def is_nt(self, sym: Symbol) -> bool:
        return sym in self.nonterminals

    def prods_of(self, sym: Symbol) -> list[tuple[int, Production]]:
        return [(i, p) for i, p in enumerate(self.productions) if p.lhs == sym]


@dataclass
class ParseNode:
    """Derivation tree node in the *original* grammar."""
    symbol: Symbol
    prod_index: Optional[int]          # None for terminal leaves
    children: list["ParseNode"] = field(default_factory=list)

    def word(self) -> tuple[Symbol, ...]:
        if self.prod_index is None:
            return (self.symbol,)
        out: tuple[Symbol, ...] = ()
        for c in self.children:
            out += c.word()
        return out


def term_key(t: Symbol) -> str:
    return repr(t)


# ---------------------------------------------------------------------------
# Basic analyses

def nullable_symbols(g: Grammar) -> set:
    nullable: set = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs not in nullable and all(s in nullable for s in p.rhs):
                nullable.add(p.lhs)
                changed = True
    return nullable


def generating_symbols(g: Grammar) -> set:
    gen: set = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs not in gen and all((not g.is_nt(s)) or s in gen for s in p.rhs):
                gen.add(p.lhs)
                changed = True
    return gen


def is_empty(g: Grammar) -> bool:
    return g.start not in generating_symbols(g)


def shortest_word(g: Grammar, sym: Symbol) -> Optional[tuple[Symbol, ...]]:
    """A minimum-length terminal word derivable from `sym`, if any."""
    best: dict[Symbol, tuple[Symbol, ...]] = {}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            parts = []
            ok = True
            for s in p.rhs:
                if g.is_nt(s):
                    if s not in best:
                        ok = False
                        break
                    parts.append(best[s])
                else:
                    parts.append((s,))
            if not ok:
                continue
            w = tuple(x for part in parts for x in part)
            cur = best.get(p.lhs)
            if cur is None or len(w) < len(cur) or \
                    (len(w) == len(cur) and [term_key(x) for x in w] < [term_key(x) for x in cur]):
                best[p.lhs] = w
                changed = True
    if not g.is_nt(sym):
        return (sym,)
    return best.get(sym)


# ---------------------------------------------------------------------------
# Bounded enumeration

def _words_table(g: Grammar, max_len: int) -> dict[Symbol, dict[tuple, ParseNode]]:
    """All terminal words of length <= max_len per nonterminal, one tree each."""
    table: dict[Symbol, dict[tuple, ParseNode]] = {nt: {} for nt in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for idx, p in enumerate(g.productions):
            for word, children in _expand_rhs(g, table, p.rhs, max_len):
                if word not in table[p.lhs]:
                    table[p.lhs][word] = ParseNode(p.lhs, idx, children)
                    changed = True
    return table


def _expand_rhs(g: Grammar, table, rhs: tuple, max_len: int
                ) -> Iterator[tuple[tuple, list[ParseNode]]]:
    if not rhs:
        yield (), []
        return
    head, rest = rhs[0], rhs[1:]
    if g.is_nt(head):
        head_opts = [(w, t) for w, t in sorted(table[head].items(),
                                               key=lambda kv: (len(kv[0]), [term_key(x) for x in kv[0]]))]
    else:
        head_opts = [((head,), ParseNode(head, None))]
    for hw, ht in head_opts:
        if len(hw) > max_len:
            continue
        for rw, rts in _expand_rhs(g, table, rest, max_len - len(hw)):
            yield hw + rw, [ht] + rts


def enumerate_words(g: Grammar, max_len: int) -> list[tuple[tuple, ParseNode]]:
    """Words of the start symbol up to max_len: nondecreasing length, then
    lexicographic by terminal key; one derivation per word."""
    table = _words_table(g, max_len)
    items = table.get(g.start, {})
    return sorted(items.items(), key=lambda kv: (len(kv[0]), [term_key(x) for x in kv[0]]))


# ---------------------------------------------------------------------------
# CNF conversion with back-mapping

@dataclass(frozen=True)
class _IRule:
    """Intermediate (ε-eliminated) rule tied to an original production."""
    lhs: Symbol
    rhs: tuple[Symbol, ...]
    orig_index: int
    dropped: tuple[int, ...]   # positions of the original rhs erased (nullable)


@dataclass(frozen=True)
class CnfRule:
    lhs: Symbol
    rhs: tuple[Symbol, ...]    # (B, C) nonterminals | (a,) terminal | () for start-ε
    chain: tuple[_IRule, ...]  # unit rules applied outermost-first
    base: Optional[_IRule]     # None for the synthetic wrap/ε rules


@dataclass
class CnfGrammar:
    start: Symbol
    rules: list[CnfRule]
    nonterminals: set
    terminals: set


@dataclass
class Backmap:
    grammar: Grammar
    eps_tree: dict[Symbol, ParseNode]  # canonical ε-derivation per nullable NT
    preterminal: dict[Symbol, Symbol]  # preterminal NT -> terminal
    wrapped_start: Symbol              # original start


_FRESH = 0


def _fresh(tag: str) -> str:
    global _FRESH
    _FRESH += 1
    return f"<{tag}{_FRESH}>"


def _eps_trees(g: Grammar, nullable: set) -> dict[Symbol, ParseNode]:
    trees: dict[Symbol, ParseNode] = {}
    changed = True
    while changed:
        changed = False
        for idx, p in enumerate(g.productions):
            if p.lhs in trees or p.lhs not in nullable:
                continue
            if all(s in trees for s in p.rhs):
                trees[p.lhs] = ParseNode(p.lhs, idx, [trees[s] for s in p.rhs])
                changed = True
    return trees


def to_cnf(g: Grammar) -> tuple[CnfGrammar, Backmap]:
    nullable = nullable_symbols(g)
    eps_tree = _eps_trees(g, nullable)
    s0 = _fresh("S")

    # ε-elimination over original rules
    irules: list[_IRule] = []
    for idx, p in enumerate(g.productions):
        droppable = [i for i, s in enumerate(p.rhs) if g.is_nt(s) and s in nullable]
        for mask in range(1 << len(droppable)):
            dropped = tuple(droppable[i] for i in range(len(droppable)) if mask >> i & 1)
            rhs = tuple(s for i, s in enumerate(p.rhs) if i not in dropped)
            if not rhs:
                continue
            irules.append(_IRule(p.lhs, rhs, idx, dropped))
    # dedupe, keeping the lowest original index / fewest drops
    seen: dict[tuple, _IRule] = {}
    for r in irules:
        key = (r.lhs, r.rhs)
        if key not in seen:
            seen[key] = r
    irules = list(seen.values())

    # unit closure
    unit_next: dict[Symbol, list[tuple[Symbol, _IRule]]] = {}
    non_unit: dict[Symbol, list[_IRule]] = {}
    for r in irules:
        if len(r.rhs) == 1 and g.is_nt(r.rhs[0]):
            unit_next.setdefault(r.lhs, []).append((r.rhs[0], r))
        else:
            non_unit.setdefault(r.lhs, []).append(r)

    def unit_chains(a: Symbol) -> list[tuple[Symbol, tuple[_IRule, ...]]]:
        out: list[tuple[Symbol, tuple[_IRule, ...]]] = [(a, ())]
        frontier = [(a, ())]
        visited = {a}
        while frontier:
            cur, chain = frontier.pop(0)
            for nxt, rule in unit_next.get(cur, []):
                if nxt in visited:
                    continue
                visited.add(nxt)
                out.append((nxt, chain + (rule,)))
                frontier.append((nxt, chain + (rule,)))
        return out

    rules: list[CnfRule] = []
    new_nts: set = set(g.nonterminals) | {s0}
    preterminal: dict[Symbol, Symbol] = {}
    pre_of: dict[Symbol, Symbol] = {}

    def preterm(a: Symbol) -> Symbol:
        if a not in pre_of:
            nt = _fresh("T")
            pre_of[a] = nt
            preterminal[nt] = a
            new_nts.add(nt)
            rules.append(CnfRule(nt, (a,), (), None))
        return pre_of[a]

    # start wrapper
    rules.append(CnfRule(s0, (g.start,), (), None))  # unit; resolved below
    if g.start in nullable:
        rules.append(CnfRule(s0, (), (), None))

    expanded: list[CnfRule] = []
    for a in sorted(new_nts - set(preterminal), key=str):
        if a == s0:
            targets = unit_chains(g.start)
            for tgt, chain in targets:
                for base in non_unit.get(tgt, []):
                    expanded.append(CnfRule(s0, base.rhs, chain, base))
        else:
            for tgt, chain in unit_chains(a):
                for base in non_unit.get(tgt, []):
                    if a == base.lhs and not chain:
                        expanded.append(CnfRule(a, base.rhs, (), base))
                    else:
                        expanded.append(CnfRule(a, base.rhs, chain, base))
    rules = [r for r in rules if r.rhs == () or r.base is not None or r.lhs in preterminal]
    rules.extend(expanded)

    # TERM + BIN
    final: list[CnfRule] = []
    for r in rules:
        if len(r.rhs) <= 1:
            if len(r.rhs) == 1 and g.is_nt(r.rhs[0]):
                raise AssertionError("unit rule survived elimination")
            final.append(r)
            continue
        body = tuple(preterm(s) if not g.is_nt(s) else s for s in r.rhs)
        if len(body) == 2:
            final.append(CnfRule(r.lhs, body, r.chain, r.base))
            continue
        cur_lhs = r.lhs
        cur_chain, cur_base = r.chain, r.base
        for i in range(len(body) - 2):
            nxt = _fresh("B")
            new_nts.add(nxt)
            final.append(CnfRule(cur_lhs, (body[i], nxt), cur_chain, cur_base))
            cur_lhs = nxt
            cur_chain, cur_base = (), None  # continuation rules carry no payload
        final.append(CnfRule(cur_lhs, (body[-2], body[-1]), (), None))

    cnf = CnfGrammar(s0, final, new_nts, set(g.terminals))
    return cnf, Backmap(g, eps_tree, preterminal, g.start)


# ---------------------------------------------------------------------------
# CYK with parse extraction

@dataclass
class _CnfNode:
    rule_index: int
    children: list["_CnfNode"]  # 0 (terminal/ε) or 2


def cyk_member(cnf: CnfGrammar, word: tuple) -> Optional[_CnfNode]:
    rules = cnf.rules
    n = len(word)
    if n == 0:
        for i, r in enumerate(rules):
            if r.lhs == cnf.start and r.rhs == ():
                return _CnfNode(i, [])
        return None
    term_rules: dict[Symbol, list[int]] = {}
    pair_rules: list[tuple[int, Symbol, Symbol, Symbol]] = []
    for i, r in enumerate(rules):
        if len(r.rhs) == 1:
            term_rules.setdefault(r.rhs[0], []).append(i)
        elif len(r.rhs) == 2:
            pair_rules.append((i, r.lhs, r.rhs[0], r.rhs[1]))
    table: list[list[dict[Symbol, _CnfNode]]] = [[{} for _ in range(n)] for _ in range(n)]
    for i, a in enumerate(word):
        for ri in term_rules.get(a, []):
            lhs = rules[ri].lhs
            table[i][i].setdefault(lhs, _CnfNode(ri, []))
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length - 1
            cell = table[i][j]
            for k in range(i, j):
                left, right = table[i][k], table[k + 1][j]
                if not left or not right:
                    continue
                for ri, lhs, b, c in pair_rules:
                    if lhs in cell:
                        continue
                    lb = left.get(b)
                    rc = right.get(c)
                    if lb is not None and rc is not None:
                        cell[lhs] = _CnfNode(ri, [lb, rc])
    return table[0][n - 1].get(cnf.start)


def cnf_parse_to_derivation(parse: _CnfNode, cnf: CnfGrammar, back: Backmap) -> ParseNode:
    """Leftmost derivation in the original grammar for a CYK parse."""
    g = back.grammar

    def flat_children(node: _CnfNode) -> list[ParseNode]:
        """Subtrees for the (TERM/BIN-expanded) rhs of node's payload rule."""
        r = cnf.rules[node.rule_index]
        out: list[ParseNode] = []
        work = [node]
        while work:
            cur = work.pop(0)
            rc = cnf.rules[cur.rule_index]
            for sym, child in zip(rc.rhs, cur.children or [None] * len(rc.rhs)):
                if sym in back.preterminal:
                    out.append(ParseNode(back.preterminal[sym], None))
                elif isinstance(sym, str) and sym.startswith("<B"):
                    assert child is not None
                    work.append(child)
                elif g.is_nt(sym):
                    assert child is not None
                    out.append(reconstruct(child))
                else:  # terminal in a length-1 rhs
                    out.append(ParseNode(sym, None))
        return out

    def apply_irule(r: _IRule, kept: list[ParseNode]) -> ParseNode:
        p = g.productions[r.orig_index]
        children: list[ParseNode] = []
        ki = 0
        for pos, sym in enumerate(p.rhs):
            if pos in r.dropped:
                children.append(back.eps_tree[sym])
            else:
                children.append(kept[ki])
                ki += 1
        return ParseNode(p.lhs, r.orig_index, children)

    def reconstruct(node: _CnfNode) -> ParseNode:
        r = cnf.rules[node.rule_index]
        if r.base is None and r.rhs == ():
            # start ε-rule
            return back.eps_tree[back.wrapped_start]
        if r.base is None and r.lhs in back.preterminal:
            return ParseNode(back.preterminal[r.lhs], None)
        assert r.base is not None, f"rule without payload: {r}"
        kept = flat_children(node)
        tree = apply_irule(r.base, kept)
        for unit in reversed(r.chain):
            tree = apply_irule(unit, [tree])
        return tree

    return reconstruct(parse)


def member(g: Grammar, word: tuple,
           cnf_cache: Optional[dict] = None) -> bool:
    """Convenience membership test via CNF + CYK."""
    if cnf_cache is not None:
        entry = cnf_cache.get(id(g))
        if entry is None:
            entry = to_cnf(g)
            cnf_cache[id(g)] = entry
        cnf, _ = entry
    else:
        cnf, _ = to_cnf(g)
    return cyk_member(cnf, word) is not None
