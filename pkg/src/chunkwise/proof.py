"""Calculation-chain proof objects and their checker.

A proof is a start term plus a list of justified steps; each step either
applies one axiom instance at one position (in either direction) or folds a
literal addition/multiplication.  Checking is purely syntactic and is the
trusted kernel behind every derivability claim the other modules make.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from . import syntax
from .terms import (
    Add, Lit, Mul, Term, TermError, Valuation, apply_substitution, is_ground,
    replace_at, subterm_at,
)
from .theory import AxiomSchema, Catalog, ConditionViolatedError, Equation, TheoryError


class ProofError(Exception):
    pass


class AxiomNotInTheoryError(ProofError):
    pass


class RedexMismatchError(ProofError):
    def __init__(self, expected: Term, found: Term, position):
        super().__init__(
            f"at position {list(position)}: expected {syntax.print_term(expected)!r}, "
            f"found {syntax.print_term(found)!r}"
        )
        self.expected = expected
        self.found = found


class NotAnArithRedexError(ProofError):
    pass


class EndpointMismatchError(ProofError):
    pass


class Direction(Enum):
    LR = "->"
    RL = "<-"


@dataclass
class AxiomStep:
    axiom_id: str
    direction: Direction
    position: tuple
    valuation: Valuation


@dataclass
class ArithStep:
    position: tuple


ProofStep = Union[AxiomStep, ArithStep]


@dataclass
class CalcProof:
    theory_ids: tuple
    claim: Equation
    start: Term
    steps: list


@dataclass
class VerifiedEquation:
    """Evidence token: only produced by check_proof."""

    equation: Equation
    theory_ids: tuple
    step_count: int


def check_step(schemas: dict, allowed, current: Term, step: ProofStep) -> Term:
    """Apply one justified step to a ground term, verifying the justification.

    An axiom step instantiates the schema at the step's valuation (side
    conditions checked), requires the matched side to equal the addressed
    subterm exactly, and replaces it with the other side.  An arith step folds
    a literal Add/Mul redex.
    """
    if isinstance(step, ArithStep):
        sub = subterm_at(current, step.position)
        if isinstance(sub, Add) and isinstance(sub.left, Lit) and isinstance(sub.right, Lit):
            folded = Lit(sub.left.value + sub.right.value)
        elif isinstance(sub, Mul) and isinstance(sub.left, Lit) and isinstance(sub.right, Lit):
            folded = Lit(sub.left.value * sub.right.value)
        else:
            raise NotAnArithRedexError(
                f"at position {list(step.position)}: {syntax.print_term(sub)!r} is not a "
                "literal addition or multiplication"
            )
        return replace_at(current, step.position, folded)
    if step.axiom_id not in allowed:
        raise AxiomNotInTheoryError(f"axiom {step.axiom_id} is not in the proof's theory")
    schema: AxiomSchema = schemas[step.axiom_id]
    names = schema.variable_names()
    bound = step.valuation.names()
    if bound != names:
        missing = sorted(names - bound)
        extra = sorted(bound - names)
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"extraneous {extra}")
        raise ProofError(f"axiom {step.axiom_id} valuation {', '.join(detail)}")
    for cond in schema.conditions:
        if not cond.holds(step.valuation):
            raise ConditionViolatedError(cond.variable, cond.forbidden)
    if step.direction == Direction.LR:
        matched, produced = schema.lhs, schema.rhs
    else:
        matched, produced = schema.rhs, schema.lhs
    expected = apply_substitution(matched, step.valuation)
    found = subterm_at(current, step.position)
    if expected != found:
        raise RedexMismatchError(expected, found, step.position)
    replacement = apply_substitution(produced, step.valuation)
    return replace_at(current, step.position, replacement)


def check_proof(catalog: Catalog, proof: CalcProof) -> VerifiedEquation:
    """Check a full calculation chain against its claim.

    The chain may run in either orientation: from claim.lhs to claim.rhs or
    the reverse (symmetry of equality; splitting a literal is expressed by
    running the chain from the compound side).
    """
    schemas = {}
    for axiom_id in proof.theory_ids:
        schemas[axiom_id] = catalog.schema(axiom_id)
    allowed = set(proof.theory_ids)
    if not is_ground(proof.start):
        raise ProofError("start term must be ground")
    if proof.start == proof.claim.lhs:
        target = proof.claim.rhs
    elif proof.start == proof.claim.rhs:
        target = proof.claim.lhs
    else:
        raise EndpointMismatchError(
            f"start term {syntax.print_term(proof.start)!r} is neither side of the claim"
        )
    current = proof.start
    for i, step in enumerate(proof.steps):
        try:
            current = check_step(schemas, allowed, current, step)
        except (ProofError, TheoryError, TermError) as e:
            raise ProofError(f"step {i + 1}: {e}") from e
    if current != target:
        raise EndpointMismatchError(
            f"chain ends at {syntax.print_term(current)!r}, claim needs "
            f"{syntax.print_term(target)!r}"
        )
    return VerifiedEquation(proof.claim, proof.theory_ids, len(proof.steps))


def replay(catalog: Catalog, proof: CalcProof) -> list:
    """All intermediate terms of a chain, starting with the start term."""
    schemas = {a: catalog.schema(a) for a in proof.theory_ids}
    allowed = set(proof.theory_ids)
    terms = [proof.start]
    for step in proof.steps:
        terms.append(check_step(schemas, allowed, terms[-1], step))
    return terms


def from_script(catalog: Catalog, script: syntax.ProofScript) -> CalcProof:
    """Resolve a parsed proof script against a catalog."""
    theory_ids = catalog.resolve(script.theory_names)
    sort, lhs, rhs = script.claim
    claim = Equation(sort, lhs, rhs)
    steps: list = []
    for decl in script.steps:
        if decl.kind == "arith":
            steps.append(ArithStep(decl.position))
        else:
            direction = Direction.LR if decl.direction == "->" else Direction.RL
            val = Valuation(dict(decl.nat_bindings), dict(decl.frac_bindings))
            steps.append(AxiomStep(decl.axiom_id, direction, decl.position, val))
    return CalcProof(theory_ids, claim, script.start, steps)


def load_proof(catalog: Catalog, text: str) -> CalcProof:
    return from_script(catalog, syntax.parse_proof_file(text))


def proof_to_dict(proof: CalcProof) -> dict:
    """JSON shape for found/bundled proofs."""
    steps = []
    for step in proof.steps:
        if isinstance(step, ArithStep):
            steps.append({"kind": "arith", "at": list(step.position)})
        else:
            steps.append(
                {
                    "kind": "axiom",
                    "axiom": step.axiom_id,
                    "direction": step.direction.value,
                    "at": list(step.position),
                    "with": {
                        **{k: v for k, v in sorted(step.valuation.nat.items())},
                        **{
                            k: syntax.print_term(v)
                            for k, v in sorted(step.valuation.frac.items())
                        },
                    },
                }
            )
    return {
        "theory": list(proof.theory_ids),
        "claim": str(proof.claim),
        "start": syntax.print_term(proof.start),
        "steps": steps,
    }
