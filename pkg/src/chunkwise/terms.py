"""Two-sorted abstract syntax: numeral terms, fraction terms, positions, matching."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union


class Sort(Enum):
    NAT = "nat"
    FRAC = "frac"


class TermError(Exception):
    pass


class InvalidPositionError(TermError):
    pass


class SortMismatchError(TermError):
    pass


class UnboundVariableError(TermError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


# Terms are immutable and hashed once at construction; every operation below is
# pure, so terms can be shared freely (including across worker processes).


@dataclass(frozen=True)
class Lit:
    """A natural-number literal (arbitrary precision, canonical)."""

    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("literals are naturals")
        object.__setattr__(self, "_h", hash(("lit", self.value)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class ErrA:
    """The error constant produced by division by zero."""

    def __post_init__(self):
        object.__setattr__(self, "_h", hash("err_a"))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class Add:
    left: "NatTerm"
    right: "NatTerm"

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("add", self.left, self.right)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class Mul:
    left: "NatTerm"
    right: "NatTerm"

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("mul", self.left, self.right)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class Num:
    arg: "FracTerm"

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("num", self.arg)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class Denom:
    arg: "FracTerm"

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("denom", self.arg)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class NVar:
    """Numeral schema variable; only ever bound to literals."""

    name: str

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("nvar", self.name)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class FracCons:
    """The fraction constructor: a syntactic pair, never numeric division."""

    numer: "NatTerm"
    denom: "NatTerm"

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("frac", self.numer, self.denom)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class FAdd:
    left: "FracTerm"
    right: "FracTerm"

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("fadd", self.left, self.right)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class FMul:
    left: "FracTerm"
    right: "FracTerm"

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("fmul", self.left, self.right)))

    def __hash__(self):
        return self._h


@dataclass(frozen=True)
class FVar:
    """Fraction schema variable; bound to arbitrary ground fraction terms."""

    name: str

    def __post_init__(self):
        object.__setattr__(self, "_h", hash(("fvar", self.name)))

    def __hash__(self):
        return self._h


NatTerm = Union[Lit, ErrA, Add, Mul, Num, Denom, NVar]
FracTerm = Union[FracCons, FAdd, FMul, FVar]
Term = Union[NatTerm, FracTerm]

ERR_A = ErrA()

_NAT_TYPES = (Lit, ErrA, Add, Mul, Num, Denom, NVar)
_FRAC_TYPES = (FracCons, FAdd, FMul, FVar)

# (tag, binary) metadata used for ordering and reconstruction
_TAGS = {
    Lit: 0, ErrA: 1, Add: 2, Mul: 3, Num: 4, Denom: 5, NVar: 6,
    FracCons: 7, FAdd: 8, FMul: 9, FVar: 10,
}


def sort_of(t: Term) -> Sort:
    return Sort.NAT if isinstance(t, _NAT_TYPES) else Sort.FRAC


def children(t: Term) -> tuple:
    k = type(t)
    if k in (Add, Mul, FAdd, FMul):
        return (t.left, t.right)
    if k is FracCons:
        return (t.numer, t.denom)
    if k in (Num, Denom):
        return (t.arg,)
    return ()


def with_children(t: Term, kids: tuple) -> Term:
    k = type(t)
    if k in (Add, Mul, FAdd, FMul):
        return k(kids[0], kids[1])
    if k is FracCons:
        return FracCons(kids[0], kids[1])
    if k in (Num, Denom):
        return k(kids[0])
    return t


def term_size(t: Term) -> int:
    return 1 + sum(term_size(c) for c in children(t))


def is_ground(t: Term) -> bool:
    if isinstance(t, (NVar, FVar)):
        return False
    return all(is_ground(c) for c in children(t))


def variables(t: Term) -> set:
    """All schema variable names in t, regardless of sort."""
    if isinstance(t, (NVar, FVar)):
        return {t.name}
    out: set = set()
    for c in children(t):
        out |= variables(c)
    return out


Position = tuple  # tuple of 0-based child indices; () is the root


def iter_positions(t: Term, prefix: Position = ()) -> Iterator[tuple]:
    """Yield (position, subterm) pairs in pre-order, children left to right."""
    yield prefix, t
    for i, c in enumerate(children(t)):
        yield from iter_positions(c, prefix + (i,))


def subterm_at(t: Term, pos) -> Term:
    cur = t
    for depth, i in enumerate(pos):
        kids = children(cur)
        if not 0 <= i < len(kids):
            raise InvalidPositionError(
                f"position {list(pos)} invalid at index {depth}: node has {len(kids)} children"
            )
        cur = kids[i]
    return cur


def replace_at(t: Term, pos, s: Term) -> Term:
    old = subterm_at(t, pos)
    if sort_of(old) != sort_of(s):
        raise SortMismatchError(
            f"cannot put a {sort_of(s).value} term into a {sort_of(old).value} slot at {list(pos)}"
        )
    return _replace(t, tuple(pos), s)


def _replace(t: Term, pos, s: Term) -> Term:
    if not pos:
        return s
    i = pos[0]
    kids = list(children(t))
    kids[i] = _replace(kids[i], pos[1:], s)
    return with_children(t, tuple(kids))


@dataclass
class Valuation:
    """Bindings for schema variables: numerals for NVars, ground terms for FVars."""

    nat: dict = field(default_factory=dict)
    frac: dict = field(default_factory=dict)

    def names(self) -> set:
        return set(self.nat) | set(self.frac)

    def copy(self) -> "Valuation":
        return Valuation(dict(self.nat), dict(self.frac))


def apply_substitution(pattern: Term, val: Valuation) -> Term:
    """Replace every schema variable by its binding; the result is ground.

    Raises UnboundVariableError naming the first unbound variable in
    leftmost-innermost order.
    """
    if isinstance(pattern, NVar):
        if pattern.name not in val.nat:
            raise UnboundVariableError(pattern.name)
        return Lit(val.nat[pattern.name])
    if isinstance(pattern, FVar):
        if pattern.name not in val.frac:
            raise UnboundVariableError(pattern.name)
        return val.frac[pattern.name]
    kids = children(pattern)
    if not kids:
        return pattern
    return with_children(pattern, tuple(apply_substitution(c, val) for c in kids))


def match_schema(pattern: Term, ground: Term) -> Optional[Valuation]:
    """Purely syntactic matching of a schema pattern against a ground term.

    NVars match literals only (side conditions must stay decidable); FVars
    match any ground fraction term; repeated variables must bind equal terms.
    Returns the unique matching valuation, or None.
    """
    val = Valuation()
    return val if _match(pattern, ground, val) else None


def _match(p: Term, g: Term, val: Valuation) -> bool:
    if isinstance(p, NVar):
        if not isinstance(g, Lit):
            return False
        bound = val.nat.get(p.name)
        if bound is None:
            val.nat[p.name] = g.value
            return True
        return bound == g.value
    if isinstance(p, FVar):
        bound = val.frac.get(p.name)
        if bound is None:
            val.frac[p.name] = g
            return True
        return bound == g
    if type(p) is not type(g):
        return False
    pk, gk = children(p), children(g)
    if len(pk) != len(gk):
        return False
    if isinstance(p, Lit) and p.value != g.value:
        return False
    return all(_match(pc, gc, val) for pc, gc in zip(pk, gk))


def order_key(t: Term):
    """Total order on terms used for deterministic tie-breaking."""
    tag = _TAGS[type(t)]
    if isinstance(t, Lit):
        return (tag, t.value)
    if isinstance(t, (NVar, FVar)):
        return (tag, t.name)
    return (tag,) + tuple(order_key(c) for c in children(t))
