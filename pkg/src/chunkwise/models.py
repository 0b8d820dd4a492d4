"""Computable interpretations of the signature and bounded satisfaction checking.

Four models: the pair algebra M (fractions as plain numerator/denominator
pairs with (0,0) as the error fraction), the zero-totalized rationals Q0, the
error-totalized rationals Qa, and the gcd-addition pair variant Mgcd.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Optional, Union

from . import syntax
from .terms import (
    Add, Denom, ErrA, FAdd, FMul, FracCons, FVar, Lit, Mul, NVar, Num, Sort,
    Term, Valuation, children, sort_of,
)
from .theory import AxiomSchema, Catalog, Equation, Forbidden, Theory


class ModelError(Exception):
    pass


class BoundsTooLargeError(ModelError):
    pass


class _ErrValue:
    """The absorbed error element; a singleton per carrier."""

    __slots__ = ("_label",)

    def __init__(self, label: str):
        self._label = label

    def __repr__(self):
        return self._label


ERR = _ErrValue("a")  # error in the numeral carrier
ERR_F = _ErrValue("a")  # error in the fraction carrier (Qa only)

NatValue = Union[int, _ErrValue]
FracValue = Union[tuple, Fraction, _ErrValue]


def value_text(v) -> str:
    if isinstance(v, tuple):
        return f"({v[0]},{v[1]})"
    return str(v)


class PairModel:
    """Fractions as pairs of naturals: same-denominator addition, componentwise
    multiplication, and (0,0) whenever a case clause falls through."""

    name = "M"

    def err_nat(self):
        return ERR

    def nat_add(self, x, y):
        if x is ERR or y is ERR:
            return ERR
        return x + y

    def nat_mul(self, x, y):
        if x is ERR or y is ERR:
            return ERR
        return x * y

    def frac_cons(self, x, y):
        if x is ERR or y is ERR:
            return (0, 0)
        return (x, y)

    def fadd(self, a, b):
        if a[1] == b[1] != 0:
            return (a[0] + b[0], a[1])
        return (0, 0)

    def fmul(self, a, b):
        if a[1] != 0 and b[1] != 0:
            return (a[0] * b[0], a[1] * b[1])
        return (0, 0)

    def num(self, f):
        return f[0] if f[1] != 0 else ERR

    def denom(self, f):
        return f[1] if f[1] != 0 else ERR

    # vectorized counterparts over int64 (numerator, denominator) arrays

    def vec_encode(self, v):
        return v

    def vec_fadd(self, np, n1, d1, n2, d2):
        same = (d1 == d2) & (d1 != 0)
        return np.where(same, n1 + n2, 0), np.where(same, d1, 0)

    def vec_fmul(self, np, n1, d1, n2, d2):
        ok = (d1 != 0) & (d2 != 0)
        return np.where(ok, n1 * n2, 0), np.where(ok, d1 * d2, 0)

    def bound_fadd(self, bn1, bd1, bn2, bd2):
        return bn1 + bn2, max(bd1, bd2)

    def bound_fmul(self, bn1, bd1, bn2, bd2):
        return bn1 * bn2, bd1 * bd2


class GcdPairModel(PairModel):
    """As M, but addition rescales by the gcd of the denominators."""

    name = "Mgcd"

    def fadd(self, a, b):
        n, m = a
        k, l = b
        if m != 0 and l != 0:
            g = gcd(m, l)
            return ((n * l + k * m) // g, (m * l) // g)
        return (0, 0)

    def vec_fadd(self, np, n1, d1, n2, d2):
        ok = (d1 != 0) & (d2 != 0)
        g = np.gcd(d1, d2)
        g = np.where(g == 0, 1, g)
        return (
            np.where(ok, (n1 * d2 + n2 * d1) // g, 0),
            np.where(ok, (d1 * d2) // g, 0),
        )

    def bound_fadd(self, bn1, bd1, bn2, bd2):
        return bn1 * bd2 + bn2 * bd1, bd1 * bd2


class RationalModel:
    """The totalized rationals: division by zero yields 0 (Q0) or an absorbed
    error element (Qa); num/denom project the canonical lowest-terms form."""

    def __init__(self, name: str, absorbing: bool):
        self.name = name
        self.absorbing = absorbing

    def err_nat(self):
        return ERR if self.absorbing else 0

    def nat_add(self, x, y):
        if x is ERR or y is ERR:
            return ERR
        return x + y

    def nat_mul(self, x, y):
        if x is ERR or y is ERR:
            return ERR
        return x * y

    def frac_cons(self, x, y):
        if x is ERR or y is ERR:
            return ERR_F
        if y == 0:
            return ERR_F if self.absorbing else Fraction(0)
        return Fraction(x, y)

    def fadd(self, a, b):
        if a is ERR_F or b is ERR_F:
            return ERR_F
        return a + b

    def fmul(self, a, b):
        if a is ERR_F or b is ERR_F:
            return ERR_F
        return a * b

    def _project(self, f, which):
        if f is ERR_F:
            return ERR
        # no subtraction in the signature, so rationals stay non-negative
        assert f >= 0, "negative rational reached a projection"
        return f.numerator if which == 0 else f.denominator

    def num(self, f):
        return self._project(f, 0)

    def denom(self, f):
        return self._project(f, 1)

    # vectorized counterparts; rationals encoded as normalized (p, q) with
    # q >= 1, and the Qa error as (0, -1)

    def vec_encode(self, v):
        if v is ERR_F:
            return (0, -1)
        return (v.numerator, v.denominator)

    def _vec_norm(self, np, n, d):
        g = np.gcd(n, d)
        g = np.where(g == 0, 1, g)
        return n // g, d // g

    def vec_fadd(self, np, n1, d1, n2, d2):
        err = (d1 < 0) | (d2 < 0)
        d1s = np.where(err, 1, d1)
        d2s = np.where(err, 1, d2)
        n, d = self._vec_norm(np, n1 * d2s + n2 * d1s, d1s * d2s)
        return np.where(err, 0, n), np.where(err, -1, d)

    def vec_fmul(self, np, n1, d1, n2, d2):
        err = (d1 < 0) | (d2 < 0)
        d1s = np.where(err, 1, d1)
        d2s = np.where(err, 1, d2)
        n, d = self._vec_norm(np, n1 * n2, d1s * d2s)
        return np.where(err, 0, n), np.where(err, -1, d)

    def bound_fadd(self, bn1, bd1, bn2, bd2):
        return bn1 * bd2 + bn2 * bd1, bd1 * bd2

    def bound_fmul(self, bn1, bd1, bn2, bd2):
        return bn1 * bn2, bd1 * bd2


MODELS = {
    "M": PairModel(),
    "Q0": RationalModel("Q0", absorbing=False),
    "Qa": RationalModel("Qa", absorbing=True),
    "Mgcd": GcdPairModel(),
}


def get_model(name: str):
    try:
        return MODELS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r} (choose from {', '.join(MODELS)})") from None


def eval_nat(model, t: Term, env: Optional[dict] = None) -> NatValue:
    if isinstance(t, Lit):
        return t.value
    if isinstance(t, ErrA):
        return model.err_nat()
    if isinstance(t, Add):
        return model.nat_add(eval_nat(model, t.left, env), eval_nat(model, t.right, env))
    if isinstance(t, Mul):
        return model.nat_mul(eval_nat(model, t.left, env), eval_nat(model, t.right, env))
    if isinstance(t, Num):
        return model.num(eval_frac(model, t.arg, env))
    if isinstance(t, Denom):
        return model.denom(eval_frac(model, t.arg, env))
    if isinstance(t, NVar):
        if env is None or t.name not in env:
            raise ModelError(f"cannot evaluate open term (variable {t.name!r})")
        return env[t.name]
    raise ModelError(f"not a numeral term: {t!r}")


def eval_frac(model, t: Term, env: Optional[dict] = None) -> FracValue:
    if isinstance(t, FracCons):
        return model.frac_cons(eval_nat(model, t.numer, env), eval_nat(model, t.denom, env))
    if isinstance(t, FAdd):
        return model.fadd(eval_frac(model, t.left, env), eval_frac(model, t.right, env))
    if isinstance(t, FMul):
        return model.fmul(eval_frac(model, t.left, env), eval_frac(model, t.right, env))
    if isinstance(t, FVar):
        if env is None or t.name not in env:
            raise ModelError(f"cannot evaluate open term (variable {t.name!r})")
        return env[t.name]
    raise ModelError(f"not a fraction term: {t!r}")


def eval_term(model, t: Term, env: Optional[dict] = None):
    return eval_nat(model, t, env) if sort_of(t) == Sort.NAT else eval_frac(model, t, env)


def holds(model, eq: Equation) -> bool:
    if eq.sort == Sort.NAT:
        return eval_nat(model, eq.lhs) == eval_nat(model, eq.rhs)
    return eval_frac(model, eq.lhs) == eval_frac(model, eq.rhs)


def frac_candidates(nat_bound: int, depth: int) -> list:
    """Ground fraction terms used to instantiate fraction variables: all pairs
    i/j with i,j <= nat_bound, composed by +/* up to the given depth.

    Pairs with j = 0 are deliberately included so error values are reachable.
    """
    if nat_bound < 0 or depth < 0:
        raise BoundsTooLargeError("bounds must be non-negative")
    out = [
        FracCons(Lit(i), Lit(j))
        for i in range(nat_bound + 1)
        for j in range(nat_bound + 1)
    ]
    for _ in range(depth):
        base = list(out)
        if 2 * len(base) * len(base) + len(base) > 200_000:
            raise BoundsTooLargeError(
                f"fraction enumeration too large ({len(base)} terms before composition)"
            )
        for op in (FAdd, FMul):
            for s in base:
                for t in base:
                    out.append(op(s, t))
    return out


@dataclass
class AxiomCheck:
    axiom_id: str
    status: str  # "verified-at-bound" | "falsified" | "skipped"
    instances: int
    witness: Optional[Valuation] = None
    lhs_value: Optional[str] = None
    rhs_value: Optional[str] = None

    def to_dict(self) -> dict:
        entry: dict = {"axiom": self.axiom_id, "status": self.status}
        if self.witness is not None:
            entry["witness"] = {
                "nat": dict(sorted(self.witness.nat.items())),
                "frac": {
                    name: syntax.print_term(t)
                    for name, t in sorted(self.witness.frac.items())
                },
                "lhsValue": self.lhs_value,
                "rhsValue": self.rhs_value,
            }
        entry["instances"] = self.instances
        return entry


@dataclass
class CheckReport:
    model: str
    theory: str
    bounds: dict
    entries: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if any(e.status == "falsified" for e in self.entries):
            return "falsified"
        return "verified-at-bound"

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "theory": self.theory,
            "bounds": self.bounds,
            "entries": [e.to_dict() for e in self.entries],
            "verdict": self.verdict,
        }


def _collect_vars(t: Term, out: dict):
    if isinstance(t, NVar):
        out[t.name] = "nat"
    elif isinstance(t, FVar):
        out[t.name] = "frac"
    for c in children(t):
        _collect_vars(c, out)


def _var_axes(schema: AxiomSchema, nat_bound: int):
    """Sorted variable names with their candidate descriptions.

    Conditions in the catalog are all per-variable, so they restrict the
    candidate list of that variable alone.
    """
    kinds: dict = {}
    _collect_vars(schema.lhs, kinds)
    _collect_vars(schema.rhs, kinds)
    forbidden_zero = {
        c.variable for c in schema.conditions if c.forbidden == Forbidden.ZERO
    }
    axes = []
    for name in sorted(kinds):
        if kinds[name] == "frac":
            axes.append((name, "frac", None))
        else:
            lo = 1 if name in forbidden_zero else 0
            axes.append((name, "nat", list(range(lo, nat_bound + 1))))
    return axes


def check_axiom(
    model,
    schema: AxiomSchema,
    nat_bound: int,
    frac_depth: int,
    mode: str = "exhaustive",
    count: int = 1000,
    seed: int = 0,
) -> AxiomCheck:
    """Check one axiom schema against a model at the given bounds.

    Exhaustive mode enumerates valuations in lexicographic order (by variable
    name, then candidate order) and reports the first counterexample; random
    mode draws `count` seeded valuations.  The reported instance count covers
    the full enumerated space.
    """
    if nat_bound < 1:
        raise BoundsTooLargeError("nat bound must be >= 1")
    axes = _var_axes(schema, nat_bound)
    frac_terms = None
    if any(kind == "frac" for _, kind, _ in axes):
        frac_terms = frac_candidates(nat_bound, frac_depth)
    if not axes:
        ok = _instance_holds(model, schema, Valuation())
        return AxiomCheck(schema.axiom_id, "verified-at-bound" if ok else "falsified", 1)
    sizes = [len(frac_terms) if kind == "frac" else len(vals) for _, kind, vals in axes]
    if any(s == 0 for s in sizes):
        return AxiomCheck(schema.axiom_id, "skipped", 0)
    if mode == "random":
        return _check_random(model, schema, axes, frac_terms, count, seed)
    total = 1
    for s in sizes:
        total *= s
    all_frac = all(kind == "frac" for _, kind, _ in axes)
    if all_frac and total > 200_000:
        result = _check_vectorized(model, schema, axes, frac_terms, total)
        if result is not None:
            return result
    if total > 20_000_000:
        raise BoundsTooLargeError(f"{total} instances exceed the exhaustive-check limit")
    return _check_product(model, schema, axes, frac_terms, total)


def _candidate_values(model, frac_terms):
    return [eval_frac(model, t) for t in frac_terms]


def _instance_holds(model, schema: AxiomSchema, val: Valuation) -> bool:
    env: dict = dict(val.nat)
    for name, term in val.frac.items():
        env[name] = eval_frac(model, term)
    return _env_holds(model, schema, env)


def _env_holds(model, schema: AxiomSchema, env: dict) -> bool:
    if schema.sort == Sort.NAT:
        return eval_nat(model, schema.lhs, env) == eval_nat(model, schema.rhs, env)
    return eval_frac(model, schema.lhs, env) == eval_frac(model, schema.rhs, env)


def _witness_check(model, schema, axes, assignment, frac_terms, instances):
    val = Valuation()
    env: dict = {}
    for (name, kind, vals), pick in zip(axes, assignment):
        if kind == "nat":
            val.nat[name] = pick
            env[name] = pick
        else:
            term = frac_terms[pick]
            val.frac[name] = term
            env[name] = eval_frac(model, term)
    lhs = eval_term(model, schema.lhs, env)
    rhs = eval_term(model, schema.rhs, env)
    return AxiomCheck(
        schema.axiom_id,
        "falsified",
        instances,
        witness=val,
        lhs_value=value_text(lhs),
        rhs_value=value_text(rhs),
    )


def _check_product(model, schema, axes, frac_terms, total) -> AxiomCheck:
    pools = []
    for name, kind, vals in axes:
        if kind == "nat":
            pools.append(vals)
        else:
            pools.append(list(range(len(frac_terms))))
    frac_values = _candidate_values(model, frac_terms) if frac_terms else []
    env: dict = {}
    checked = 0
    for combo in itertools.product(*pools):
        checked += 1
        assignment = []
        for (name, kind, _), pick in zip(axes, combo):
            env[name] = pick if kind == "nat" else frac_values[pick]
            assignment.append(pick)
        if not _env_holds(model, schema, env):
            return _witness_check(model, schema, axes, assignment, frac_terms, checked)
    return AxiomCheck(schema.axiom_id, "verified-at-bound", total)


def _check_random(model, schema, axes, frac_terms, count, seed) -> AxiomCheck:
    rng = random.Random(seed)
    frac_values = _candidate_values(model, frac_terms) if frac_terms else []
    env: dict = {}
    for i in range(count):
        assignment = []
        for name, kind, vals in axes:
            if kind == "nat":
                pick = vals[rng.randrange(len(vals))]
                env[name] = pick
            else:
                pick = rng.randrange(len(frac_terms))
                env[name] = frac_values[pick]
            assignment.append(pick)
        if not _env_holds(model, schema, env):
            return _witness_check(model, schema, axes, assignment, frac_terms, i + 1)
    return AxiomCheck(schema.axiom_id, "verified-at-bound", count)


def _vec_value_bound(model, t, base: int):
    if isinstance(t, FVar):
        return base, base
    if isinstance(t, FAdd):
        ln, ld = _vec_value_bound(model, t.left, base)
        rn, rd = _vec_value_bound(model, t.right, base)
        return model.bound_fadd(ln, ld, rn, rd)
    if isinstance(t, FMul):
        ln, ld = _vec_value_bound(model, t.left, base)
        rn, rd = _vec_value_bound(model, t.right, base)
        return model.bound_fmul(ln, ld, rn, rd)
    return None


def _check_vectorized(model, schema, axes, frac_terms, total) -> Optional[AxiomCheck]:
    """Fast path for axioms whose variables are all fraction-sorted.

    Candidate terms are deduplicated by model value (evaluation factors
    through values, so checking distinct values covers every term instance);
    the first counterexample is mapped back to the lexicographically first
    failing term assignment.
    """
    import numpy as np

    values = _candidate_values(model, frac_terms)
    encoded = {}
    first_index = []
    ids = []
    for idx, v in enumerate(values):
        enc = model.vec_encode(v)
        if enc not in encoded:
            encoded[enc] = len(first_index)
            first_index.append(idx)
        ids.append(encoded[enc])
    V = len(first_index)
    enc_list = list(encoded)
    base = max((max(abs(n), abs(d)) for n, d in enc_list), default=1)
    bounds = set()
    for side in (schema.lhs, schema.rhs):
        b = _vec_value_bound(model, side, max(base, 1))
        if b is None:
            return None  # unsupported node shape; fall back to the plain path
        bounds.add(b)
    if max(max(b) for b in bounds) >= 2**62:
        return None
    k = len(axes)
    nums = np.array([n for n, _ in enc_list], dtype=np.int64)
    dens = np.array([d for _, d in enc_list], dtype=np.int64)

    def shaped(arr, axis, rows=None):
        a = arr if rows is None else arr[rows]
        shape = [1] * k
        shape[axis] = len(a)
        return a.reshape(shape)

    def eval_side(t, env):
        if isinstance(t, FVar):
            return env[t.name]
        ln, ld = eval_side(t.left, env)
        rn, rd = eval_side(t.right, env)
        if isinstance(t, FAdd):
            return model.vec_fadd(np, ln, ld, rn, rd)
        return model.vec_fmul(np, ln, ld, rn, rd)

    chunk = max(1, 4_000_000 // max(1, V ** (k - 1)))
    var_names = [name for name, _, _ in axes]
    T = len(frac_terms)
    for start in range(0, V, chunk):
        rows = slice(start, min(start + chunk, V))
        env = {}
        for axis, name in enumerate(var_names):
            if axis == 0:
                env[name] = (shaped(nums, 0, rows), shaped(dens, 0, rows))
            else:
                env[name] = (shaped(nums, axis), shaped(dens, axis))
        ln, ld = eval_side(schema.lhs, env)
        rn, rd = eval_side(schema.rhs, env)
        mism = (ln != rn) | (ld != rd)
        shape = [V] * k
        shape[0] = rows.stop - rows.start
        mism = np.broadcast_to(mism, tuple(shape))
        if mism.any():
            flat = int(np.argmax(mism))
            local = np.unravel_index(flat, tuple(shape))
            vids = [int(local[0]) + start] + [int(x) for x in local[1:]]
            term_indices = [first_index[v] for v in vids]
            checked = 0
            for ti in term_indices:
                checked = checked * T + ti
            return _witness_check(model, schema, axes, term_indices, frac_terms, checked + 1)
    return AxiomCheck(schema.axiom_id, "verified-at-bound", total)


def check_theory(
    model,
    catalog: Catalog,
    theory: Theory,
    nat_bound: int,
    frac_depth: int,
    mode: str = "exhaustive",
    count: int = 1000,
    seed: int = 0,
) -> CheckReport:
    """Check every axiom of a theory; per-axiom seeds are seed + position."""
    bounds: dict = {"natBound": nat_bound, "fracDepth": frac_depth, "mode": mode}
    if mode == "random":
        bounds["count"] = count
        bounds["seed"] = seed
    report = CheckReport(model.name, theory.name, bounds)
    for i, axiom_id in enumerate(theory.axiom_ids):
        schema = catalog.schema(axiom_id)
        report.entries.append(
            check_axiom(model, schema, nat_bound, frac_depth, mode, count, seed + i)
        )
    return report
