"""Axiom schemas with side conditions, named theories, and the builtin catalog."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

from . import syntax
from .terms import (
    Sort, Term, UnboundVariableError, Valuation, apply_substitution, is_ground,
    sort_of, variables,
)


class TheoryError(Exception):
    pass


class ConditionViolatedError(TheoryError):
    def __init__(self, variable: str, forbidden: "Forbidden"):
        super().__init__(f"condition violated: {variable} /= {forbidden.value}")
        self.variable = variable
        self.forbidden = forbidden


class Forbidden(Enum):
    ZERO = "0"
    ERR_A = "a"


@dataclass(frozen=True)
class Condition:
    """A decidable side condition `variable /= 0` or `variable /= a`.

    Numeral variables only ever bind literals, so `/= a` conditions are
    vacuously true; they are kept for fidelity to the axiom tables.
    """

    variable: str
    forbidden: Forbidden

    def holds(self, val: Valuation) -> bool:
        if self.forbidden == Forbidden.ZERO:
            return val.nat[self.variable] != 0
        return True

    def __str__(self):
        return f"{self.variable} /= {self.forbidden.value}"


@dataclass(frozen=True)
class AxiomSchema:
    axiom_id: str
    conditions: tuple
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if sort_of(self.lhs) != sort_of(self.rhs):
            raise TheoryError(f"axiom {self.axiom_id}: sides have different sorts")
        occurring = variables(self.lhs) | variables(self.rhs)
        for cond in self.conditions:
            if cond.variable not in occurring:
                raise TheoryError(
                    f"axiom {self.axiom_id}: condition variable {cond.variable!r} "
                    "does not occur in the equation"
                )

    @property
    def sort(self) -> Sort:
        return sort_of(self.lhs)

    def variable_names(self) -> set:
        return variables(self.lhs) | variables(self.rhs)

    def __str__(self):
        conds = ""
        if self.conditions:
            conds = "[" + ", ".join(str(c) for c in self.conditions) + "] "
        return f"axiom {self.axiom_id} {conds}: {syntax.print_equation(self.lhs, self.rhs)}"


@dataclass(frozen=True)
class Theory:
    name: str
    axiom_ids: tuple

    def __contains__(self, axiom_id: str) -> bool:
        return axiom_id in self.axiom_ids


@dataclass(frozen=True)
class Equation:
    """A ground equation; the only sentences this artifact works with."""

    sort: Sort
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if not (is_ground(self.lhs) and is_ground(self.rhs)):
            raise TheoryError("equation sides must be ground")
        if sort_of(self.lhs) != self.sort or sort_of(self.rhs) != self.sort:
            raise TheoryError("equation sides disagree with the stated sort")

    def __str__(self):
        return syntax.print_equation(self.lhs, self.rhs)


@dataclass
class Catalog:
    schemas: dict  # axiom id -> AxiomSchema, in declaration order
    theories: dict  # name -> Theory

    def schema(self, axiom_id: str) -> AxiomSchema:
        try:
            return self.schemas[axiom_id]
        except KeyError:
            raise TheoryError(f"unknown axiom id {axiom_id!r}") from None

    def theory(self, name: str) -> Theory:
        try:
            return self.theories[name]
        except KeyError:
            raise TheoryError(f"unknown theory {name!r}") from None

    def resolve(self, names) -> tuple:
        """Union of the named theories' axiom ids, order-preserving."""
        out: list = []
        for name in names:
            for axiom_id in self.theory(name).axiom_ids:
                if axiom_id not in out:
                    out.append(axiom_id)
        return tuple(out)


def build_catalog(text: str, base: Optional[Catalog] = None) -> Catalog:
    """Build a catalog from theory-file text, optionally on top of a base catalog.

    Checks the file-level rules: unique axiom ids and theory references that
    resolve against declared (or base) axioms.
    """
    axiom_decls, theory_decls = syntax.parse_theory_file(text)
    schemas = dict(base.schemas) if base else {}
    theories = dict(base.theories) if base else {}
    for decl in axiom_decls:
        if decl.axiom_id in schemas:
            raise TheoryError(f"duplicate axiom id {decl.axiom_id!r}")
        conditions = tuple(
            Condition(var, Forbidden.ZERO if what == "0" else Forbidden.ERR_A)
            for var, what in decl.conditions
        )
        schemas[decl.axiom_id] = AxiomSchema(decl.axiom_id, conditions, decl.lhs, decl.rhs)
    for decl in theory_decls:
        for axiom_id in decl.axiom_ids:
            if axiom_id not in schemas:
                raise TheoryError(
                    f"theory {decl.name!r} references undeclared axiom {axiom_id!r}"
                )
        if len(set(decl.axiom_ids)) != len(decl.axiom_ids):
            raise TheoryError(f"theory {decl.name!r} lists a duplicate axiom id")
        theories[decl.name] = Theory(decl.name, tuple(decl.axiom_ids))
    return Catalog(schemas, theories)


# The two axiom tables, transcribed verbatim, plus the named axiom sets:
# gamma is the full (inconsistent) theory, gamma_s/gamma_t the source and
# target chunks, and rho_st the source-to-target permeability filter
# (the source axioms minus the num/denom projections 16 and 17).
CATALOG_SOURCE = """\
axiom 1  : n + 0 = n
axiom 2  : (n + m) + l = n + (m + l)
axiom 3  : n + m = m + n
axiom 4  : n * 1 = n
axiom 5  : (n * m) * l = n * (m * l)
axiom 6  : n * m = m * n
axiom 7  : n * (m + l) = n * m + n * l
axiom 8  [m /= 0, k /= 0] : n/m * l/k = (n * l)/(m * k)
axiom 9  [m /= 0, k /= 0] : n/m + l/k = (n * k + l * m)/(m * k)
axiom 10 [m /= 0] : n/m + l/m = (n + l)/m
axiom 11 : (alpha + beta) + gamma = alpha + (beta + gamma)
axiom 12 : alpha + beta = beta + alpha
axiom 13 : (alpha * beta) * gamma = alpha * (beta * gamma)
axiom 14 : alpha * beta = beta * alpha
axiom 15 : alpha * (beta + gamma) = alpha * beta + alpha * gamma
axiom 16 [m /= 0, m /= a] : num(n/m) = n
axiom 17 [m /= 0, n /= a] : denom(n/m) = m
axiom 18 [m /= 0] : n/m = n/1 * 1/m
axiom 19 : n/1 + m/1 = (n + m)/1
axiom 20 [m /= 0, k /= 0] : (n * k)/(m * k) = n/m

theory gamma   { axioms 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17 }
theory gamma_s { axioms 1, 2, 3, 4, 5, 6, 7, 8, 11, 12, 13, 14, 15, 16, 17, 18, 19 }
theory gamma_t { axioms 20 }
theory rho_st  { axioms 1, 2, 3, 4, 5, 6, 7, 8, 11, 12, 13, 14, 15, 18, 19 }
"""


@lru_cache(maxsize=1)
def builtin_catalog() -> Catalog:
    return build_catalog(CATALOG_SOURCE)


def render_catalog(catalog: Catalog) -> str:
    """Canonical, byte-stable theory-file rendering of a catalog."""
    lines = []
    for schema in catalog.schemas.values():
        conds = ""
        if schema.conditions:
            conds = " [" + ", ".join(str(c) for c in schema.conditions) + "]"
        lines.append(
            f"axiom {schema.axiom_id}{conds} : "
            f"{syntax.print_equation(schema.lhs, schema.rhs)}"
        )
    if catalog.theories:
        lines.append("")
    for theory in catalog.theories.values():
        lines.append(f"theory {theory.name} {{ axioms {', '.join(theory.axiom_ids)} }}")
    return "\n".join(lines) + "\n"


def instantiate_axiom(schema: AxiomSchema, val: Valuation) -> Equation:
    """Instantiate a schema at a valuation, checking every side condition.

    No arithmetic is performed: compound sides stay compound terms.
    """
    for name, term in val.frac.items():
        if not is_ground(term):
            raise TheoryError(f"binding for {name!r} is not ground")
    for cond in schema.conditions:
        if cond.variable not in val.nat:
            raise UnboundVariableError(cond.variable)
        if not cond.holds(val):
            raise ConditionViolatedError(cond.variable, cond.forbidden)
    lhs = apply_substitution(schema.lhs, val)
    rhs = apply_substitution(schema.rhs, val)
    return Equation(schema.sort, lhs, rhs)
