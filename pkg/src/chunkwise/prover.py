"""Bounded bidirectional proof search.

The search runs over arith-normal terms (no literal Add/Mul redexes): a move
is one axiom application followed by eagerly folding the literal redexes it
creates.  The left frontier walks forward from one side of the goal, the
right frontier walks predecessor moves from the other side (enumerated by
unfold-matching, so reverse uses of rules like cancellation are found without
ever emitting a literal-splitting step), and chains are assembled so that
every arithmetic step is a fold.  Found proofs are re-checked by the proof
kernel before being returned.

`NotFoundWithinBounds` is advisory: derivability here is semi-decidable and a
bounded search never certifies non-derivability.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

from .proof import ArithStep, AxiomStep, CalcProof, Direction, check_proof
from .terms import (
    Add, Denom, ErrA, FAdd, FMul, FracCons, FVar, Lit, Mul, NVar, Num, Term,
    Valuation, apply_substitution, children, is_ground, iter_positions,
    match_schema, order_key, replace_at, sort_of, subterm_at, term_size,
)
from .theory import AxiomSchema, Catalog, Equation


@dataclass(frozen=True)
class SearchBounds:
    max_depth: int = 12
    max_term_size: int = 64
    fresh_lit_bound: int = 12
    max_states: int = 200_000


@dataclass
class Found:
    proof: CalcProof


@dataclass
class NotFoundWithinBounds:
    states_explored: int
    bounds_hit: tuple


ProveResult = Union[Found, NotFoundWithinBounds]


def _axiom_order_key(axiom_id: str):
    return (len(axiom_id), axiom_id)


def _is_redex(t: Term) -> bool:
    return (
        isinstance(t, (Add, Mul))
        and isinstance(t.left, Lit)
        and isinstance(t.right, Lit)
    )


def _first_redex(t: Term, prefix=()):
    for i, c in enumerate(children(t)):
        pos = _first_redex(c, prefix + (i,))
        if pos is not None:
            return pos
    return prefix if _is_redex(t) else None


def _fold_value(t) -> Lit:
    if isinstance(t, Add):
        return Lit(t.left.value + t.right.value)
    return Lit(t.left.value * t.right.value)


def fold_normalize(t: Term):
    """Fold every literal redex, innermost first; returns (term, arith steps)."""
    steps = []
    while True:
        pos = _first_redex(t)
        if pos is None:
            return t, steps
        steps.append(ArithStep(pos))
        t = replace_at(t, pos, _fold_value(subterm_at(t, pos)))


def is_canonical(t: Term) -> bool:
    if _is_redex(t):
        return False
    return all(is_canonical(c) for c in children(t))


def _sides(schema: AxiomSchema, direction: Direction):
    if direction == Direction.LR:
        return schema.lhs, schema.rhs
    return schema.rhs, schema.lhs


def _nat_var_names(t: Term, out: set):
    if isinstance(t, NVar):
        out.add(t.name)
    for c in children(t):
        _nat_var_names(c, out)


def _frac_var_names(t: Term, out: set):
    if isinstance(t, FVar):
        out.add(t.name)
    for c in children(t):
        _frac_var_names(c, out)


def _conditions_hold(schema: AxiomSchema, val: Valuation) -> bool:
    return all(c.holds(val) for c in schema.conditions)


def _fresh_ranges(schema: AxiomSchema, names, flb: int):
    zero_forbidden = {
        c.variable for c in schema.conditions if c.forbidden.value == "0"
    }
    return [
        range(1 if name in zero_forbidden else 0, flb + 1) for name in names
    ]


def _fresh_extensions(schema: AxiomSchema, produced: Term, base: Valuation, flb: int):
    """Extend a match valuation over produce-side-only variables (literals
    up to the fresh-literal bound, smallest first)."""
    fresh_nat: set = set()
    _nat_var_names(produced, fresh_nat)
    fresh_frac: set = set()
    _frac_var_names(produced, fresh_frac)
    fresh_nat -= set(base.nat)
    fresh_frac -= set(base.frac)
    if fresh_frac:
        return  # fresh fraction variables are not enumerable
    names = sorted(fresh_nat)
    if not names:
        yield base
        return
    for combo in itertools.product(*_fresh_ranges(schema, names, flb)):
        val = base.copy()
        for name, v in zip(names, combo):
            val.nat[name] = v
        yield val


class _Context:
    """One search's static data: ordered schemas, bounds, move caches."""

    def __init__(self, catalog: Catalog, theory_ids, bounds: SearchBounds):
        self.catalog = catalog
        self.theory_ids = tuple(theory_ids)
        self.bounds = bounds
        self.schemas = [
            catalog.schema(a) for a in sorted(self.theory_ids, key=_axiom_order_key)
        ]
        self.succ_cache: dict = {}
        self.pred_cache: dict = {}

    def successors(self, t: Term):
        hit = self.succ_cache.get(t)
        if hit is None:
            hit = _successors(self, t)
            if len(self.succ_cache) > 120_000:
                self.succ_cache.clear()
            self.succ_cache[t] = hit
        return hit

    def predecessors(self, t: Term):
        hit = self.pred_cache.get(t)
        if hit is None:
            hit = _predecessors(self, t)
            if len(self.pred_cache) > 120_000:
                self.pred_cache.clear()
            self.pred_cache[t] = hit
        return hit


def _record(best: dict, order: list, target: Term, cost: int, steps: tuple):
    prev = best.get(target)
    if prev is None:
        best[target] = (cost, steps)
        order.append(target)
    elif cost < prev[0]:
        best[target] = (cost, steps)


def _successors(ctx: _Context, t: Term):
    """Forward macro moves from an arith-normal term: one axiom step plus the
    folds it makes necessary.  Deterministic order: position, axiom, direction,
    fresh literals ascending."""
    bounds = ctx.bounds
    best: dict = {}
    order: list = []
    for pos, sub in iter_positions(t):
        sub_sort = sort_of(sub)
        for schema in ctx.schemas:
            if schema.sort != sub_sort:
                continue
            for direction in (Direction.LR, Direction.RL):
                matched, produced = _sides(schema, direction)
                base = match_schema(matched, sub)
                if base is None:
                    continue
                for val in _fresh_extensions(schema, produced, base, bounds.fresh_lit_bound):
                    if not _conditions_hold(schema, val):
                        continue
                    replacement = apply_substitution(produced, val)
                    t2 = replace_at(t, pos, replacement)
                    t2c, folds = fold_normalize(t2)
                    if t2c == t or term_size(t2c) > bounds.max_term_size:
                        continue
                    cost = 2 if len(val.names()) > len(base.names()) else 1
                    steps = (AxiomStep(schema.axiom_id, direction, pos, val), *folds)
                    _record(best, order, t2c, cost, steps)
    return tuple((u, *best[u]) for u in order)


_MAX_SPLIT_ENUM = 4096


def _value_cap(p: Term, flb: int) -> int:
    """Largest literal value a pattern fragment can take under the bound."""
    if isinstance(p, NVar):
        return flb
    if isinstance(p, Lit):
        return p.value
    if isinstance(p, Add):
        return _value_cap(p.left, flb) + _value_cap(p.right, flb)
    if isinstance(p, Mul):
        return _value_cap(p.left, flb) * _value_cap(p.right, flb)
    return 0  # other node kinds never match a literal value


def _unfold_value(p: Term, v: int, val: Valuation, flb: int):
    """Match a numeral pattern fragment against a folded literal value,
    enumerating the bounded splits that realize it."""
    if isinstance(p, NVar):
        bound = val.nat.get(p.name)
        if bound is not None:
            if bound == v:
                yield val
        elif v <= flb:
            ext = val.copy()
            ext.nat[p.name] = v
            yield ext
        return
    if isinstance(p, Lit):
        if p.value == v:
            yield val
        return
    if isinstance(p, Add):
        lo = max(0, v - _value_cap(p.right, flb))
        hi = min(_value_cap(p.left, flb), v)
        if hi - lo > _MAX_SPLIT_ENUM:
            return
        for a in range(lo, hi + 1):
            for val2 in _unfold_value(p.left, a, val, flb):
                yield from _unfold_value(p.right, v - a, val2, flb)
        return
    if isinstance(p, Mul):
        lcap = _value_cap(p.left, flb)
        rcap = _value_cap(p.right, flb)
        if v == 0:
            for a in range(0, min(lcap, _MAX_SPLIT_ENUM) + 1):
                for val2 in _unfold_value(p.left, a, val, flb):
                    yield from _unfold_value(p.right, 0, val2, flb)
            for b in range(0, min(rcap, _MAX_SPLIT_ENUM) + 1):
                for val2 in _unfold_value(p.left, 0, val, flb):
                    yield from _unfold_value(p.right, b, val2, flb)
            return
        for a in range(1, min(lcap, v) + 1):
            if v % a == 0 and v // a <= rcap:
                for val2 in _unfold_value(p.left, a, val, flb):
                    yield from _unfold_value(p.right, v // a, val2, flb)
        return


def _unfold_match(p: Term, s: Term, val: Valuation, flb: int):
    """Match a pattern against a term, allowing compound numeral fragments to
    match literals via splitting (the reverse image of eager folding)."""
    if isinstance(p, NVar):
        if isinstance(s, Lit):
            bound = val.nat.get(p.name)
            if bound is None:
                ext = val.copy()
                ext.nat[p.name] = s.value
                yield ext
            elif bound == s.value:
                yield val
        return
    if isinstance(p, FVar):
        if sort_of(s) != sort_of(p):
            return
        bound = val.frac.get(p.name)
        if bound is None:
            ext = val.copy()
            ext.frac[p.name] = s
            yield ext
        elif bound == s:
            yield val
        return
    if isinstance(p, (Add, Mul)) and isinstance(s, Lit):
        yield from _unfold_value(p, s.value, val, flb)
        return
    if type(p) is not type(s):
        return
    if isinstance(p, Lit):
        if p.value == s.value:
            yield val
        return
    pk, sk = children(p), children(s)
    if not pk:
        yield val
        return

    def rec(i, cur):
        if i == len(pk):
            yield cur
            return
        for nxt in _unfold_match(pk[i], sk[i], cur, flb):
            yield from rec(i + 1, nxt)

    yield from rec(0, val)


def _predecessors(ctx: _Context, t: Term):
    """Arith-normal terms u with a forward macro u -> t.

    Enumerated by unfold-matching each axiom's produce side against subterms
    of t; every candidate is verified by replaying the forward macro.
    """
    bounds = ctx.bounds
    flb = bounds.fresh_lit_bound
    best: dict = {}
    order: list = []
    for pos, sub in iter_positions(t):
        sub_sort = sort_of(sub)
        for schema in ctx.schemas:
            if schema.sort != sub_sort:
                continue
            for direction in (Direction.LR, Direction.RL):
                matched, produced = _sides(schema, direction)
                fresh_cost = 2 if _has_fresh(produced, matched) else 1
                for val in _unfold_match(produced, sub, Valuation(), flb):
                    for full in _fresh_extensions(schema, matched, val, flb):
                        if not _conditions_hold(schema, full):
                            continue
                        try:
                            matched_inst = apply_substitution(matched, full)
                        except Exception:
                            continue
                        u = replace_at(t, pos, matched_inst)
                        if u == t or term_size(u) > bounds.max_term_size:
                            continue
                        if not is_canonical(u):
                            continue
                        produced_inst = apply_substitution(produced, full)
                        forward = replace_at(u, pos, produced_inst)
                        fwd_norm, folds = fold_normalize(forward)
                        if fwd_norm != t:
                            continue
                        steps = (
                            AxiomStep(schema.axiom_id, direction, pos, full),
                            *folds,
                        )
                        _record(best, order, u, fresh_cost, steps)
    return tuple((u, *best[u]) for u in order)


def _has_fresh(produced: Term, matched: Term) -> bool:
    pv: set = set()
    _nat_var_names(produced, pv)
    mv: set = set()
    _nat_var_names(matched, mv)
    return bool(pv - mv)


def _contains_kind(t: Term, kind) -> bool:
    if isinstance(t, kind):
        return True
    return any(_contains_kind(c, kind) for c in children(t))


def _goal_unreachable(schemas, goal: Equation) -> bool:
    """Sound impossibility check: node kinds no theory axiom mentions can
    neither be created nor destroyed by any chain."""
    for kind in (Num, Denom, ErrA):
        lhs_has = _contains_kind(goal.lhs, kind)
        rhs_has = _contains_kind(goal.rhs, kind)
        if lhs_has == rhs_has:
            continue
        mentioned = any(
            _contains_kind(s.lhs, kind) or _contains_kind(s.rhs, kind)
            for s in schemas
        )
        if not mentioned:
            return True
    return False


class _Frontier:
    def __init__(self, seed: Term, mover):
        self.dist = {seed: 0}
        self.depth = {seed: 0}
        self.parent: dict = {}
        self.settled: set = set()
        self.buckets: list = [[seed]]
        self.min_cost = 0
        self.mover = mover

    def pop(self) -> Optional[Term]:
        while self.min_cost < len(self.buckets):
            bucket = self.buckets[self.min_cost]
            while bucket:
                t = bucket.pop(0)
                if t in self.settled or self.dist[t] != self.min_cost:
                    continue
                return t
            self.min_cost += 1
        return None

    def frontier_cost(self) -> Optional[int]:
        c = self.min_cost
        while c < len(self.buckets):
            if any(
                t not in self.settled and self.dist[t] == c
                for t in self.buckets[c]
            ):
                return c
            c += 1
        return None

    def push(self, t: Term, cost: int, parent: Term, steps: tuple, depth: int):
        old = self.dist.get(t)
        if old is not None and old <= cost:
            return
        self.dist[t] = cost
        self.depth[t] = depth
        self.parent[t] = (parent, steps)
        while len(self.buckets) <= cost:
            self.buckets.append([])
        self.buckets[cost].append(t)


def _search(ctx: _Context, left_seed: Term, right_seed: Term, state_budget: int):
    """Bidirectional uniform-cost search; returns (meet, L, R, states, reasons)."""
    bounds = ctx.bounds
    left = _Frontier(left_seed, ctx.successors)
    right = _Frontier(right_seed, ctx.predecessors)
    best: Optional[tuple] = None  # (cost, order_key, meet term)
    reasons: set = set()

    def consider(t):
        nonlocal best
        dl = left.dist.get(t)
        dr = right.dist.get(t)
        if dl is None or dr is None:
            return
        cand = (dl + dr, order_key(t), t)
        if best is None or cand[:2] < best[:2]:
            best = cand

    consider(left_seed)
    while True:
        states = len(left.dist) + len(right.dist)
        if states >= state_budget:
            reasons.add("max-states")
            break
        lc = left.frontier_cost()
        rc = right.frontier_cost()
        if lc is None and rc is None:
            reasons.add("frontier-exhausted")
            break
        if best is not None and (lc or 0) + (rc or 0) >= best[0] and lc is not None and rc is not None:
            break
        if best is not None and (lc is None or rc is None):
            break
        if rc is None or (lc is not None and len(left.settled) <= len(right.settled)):
            side = left
        else:
            side = right
        t = side.pop()
        if t is None:
            # only the other side can still move
            side = right if side is left else left
            t = side.pop()
            if t is None:
                reasons.add("frontier-exhausted")
                break
        side.settled.add(t)
        consider(t)
        if side.depth[t] >= bounds.max_depth:
            reasons.add("max-depth")
            continue
        for entry in side.mover(t):
            u, cost, steps = entry
            side.push(u, side.dist[t] + cost, t, steps, side.depth[t] + 1)
            consider(u)
    states = len(left.dist) + len(right.dist)
    if best is None:
        return None, left, right, states, reasons
    return best[2], left, right, states, reasons


def _walk_left(frontier: _Frontier, meet: Term, seed: Term):
    steps: list = []
    t = meet
    while t != seed:
        parent, s = frontier.parent[t]
        steps = list(s) + steps
        t = parent
    return steps


def _walk_right(frontier: _Frontier, meet: Term, seed: Term):
    steps: list = []
    t = meet
    while t != seed:
        parent, s = frontier.parent[t]
        steps.extend(s)
        t = parent
    return steps


def prove(
    catalog: Catalog,
    theory_ids,
    goal: Equation,
    bounds: SearchBounds = SearchBounds(),
) -> ProveResult:
    """Search for a calculation chain establishing the goal equation.

    Deterministic given the theory, goal and bounds.  Found proofs always pass
    check_proof under the same theory (asserted before returning).  The
    fresh-literal bound is escalated through an internal ladder so small
    searches stay small; every rung respects the caller's bounds.
    """
    theory_ids = tuple(theory_ids)
    if not (is_ground(goal.lhs) and is_ground(goal.rhs)):
        raise ValueError("prove needs a ground goal")
    if goal.lhs == goal.rhs:
        proof = CalcProof(theory_ids, goal, goal.lhs, [])
        check_proof(catalog, proof)
        return Found(proof)
    schemas = [catalog.schema(a) for a in theory_ids]
    if _goal_unreachable(schemas, goal):
        return NotFoundWithinBounds(0, ("goal-unreachable",))
    if is_canonical(goal.rhs):
        start, target = goal.lhs, goal.rhs
    elif is_canonical(goal.lhs):
        start, target = goal.rhs, goal.lhs
    else:
        return NotFoundWithinBounds(0, ("both-sides-unnormalized",))
    seed, prefix = fold_normalize(start)
    if term_size(seed) > bounds.max_term_size or term_size(target) > bounds.max_term_size:
        return NotFoundWithinBounds(0, ("max-term-size",))
    if seed == target:
        proof = CalcProof(theory_ids, goal, start, prefix)
        check_proof(catalog, proof)
        return Found(proof)

    ladder = sorted({min(4, bounds.fresh_lit_bound), min(8, bounds.fresh_lit_bound), bounds.fresh_lit_bound})
    total_states = 0
    reasons: set = set()
    for i, flb in enumerate(ladder):
        remaining_rungs = len(ladder) - i
        rung_budget = max(1000, (bounds.max_states - total_states) // remaining_rungs)
        rung_bounds = SearchBounds(
            bounds.max_depth, bounds.max_term_size, flb, rung_budget
        )
        ctx = _Context(catalog, theory_ids, rung_bounds)
        meet, left, right, states, rung_reasons = _search(ctx, seed, target, rung_budget)
        total_states += states
        reasons |= rung_reasons
        if meet is None:
            continue
        steps = prefix + _walk_left(left, meet, seed) + _walk_right(right, meet, target)
        proof = CalcProof(theory_ids, goal, start, steps)
        check_proof(catalog, proof)  # self-check: the kernel has the last word
        return Found(proof)
    return NotFoundWithinBounds(total_states, tuple(sorted(reasons)))


def enumerate_moves(
    catalog: Catalog,
    theory_ids,
    t: Term,
    bounds: SearchBounds = SearchBounds(),
):
    """All single-step successors of a raw ground term.

    Ordering: position (lexicographic), then axiom id, then direction LR
    before RL, then enumerated fresh literals ascending; at each position the
    axiom moves are followed by the fold move and the literal-splitting moves
    (splits are inverse arith steps: they appear as forward folds when a chain
    is assembled in the opposite direction, and are recorded as ArithSteps).
    """
    if not is_ground(t):
        raise ValueError("enumerate_moves needs a ground term")
    schemas = [catalog.schema(a) for a in sorted(theory_ids, key=_axiom_order_key)]
    flb = bounds.fresh_lit_bound
    out = []

    def emit(step, result):
        if term_size(result) <= bounds.max_term_size:
            out.append((step, result))

    for pos, sub in iter_positions(t):
        sub_sort = sort_of(sub)
        for schema in schemas:
            if schema.sort != sub_sort:
                continue
            for direction in (Direction.LR, Direction.RL):
                matched, produced = _sides(schema, direction)
                base = match_schema(matched, sub)
                if base is None:
                    continue
                for val in _fresh_extensions(schema, produced, base, flb):
                    if not _conditions_hold(schema, val):
                        continue
                    replacement = apply_substitution(produced, val)
                    emit(
                        AxiomStep(schema.axiom_id, direction, pos, val),
                        replace_at(t, pos, replacement),
                    )
        if _is_redex(sub):
            emit(ArithStep(pos), replace_at(t, pos, _fold_value(sub)))
        if isinstance(sub, Lit):
            v = sub.value
            for w in range(0, min(v, flb) + 1):
                if v - w > flb:
                    continue
                emit(ArithStep(pos), replace_at(t, pos, Add(Lit(w), Lit(v - w))))
            for d in range(1, min(v, flb) + 1):
                if v % d == 0 and v // d <= flb:
                    emit(ArithStep(pos), replace_at(t, pos, Mul(Lit(d), Lit(v // d))))
    return out
