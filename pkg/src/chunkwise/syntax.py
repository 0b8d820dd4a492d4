"""Concrete syntax: tokenizer, term/equation parsing, printing, and file formats.

The grammar is ASCII-only and whitespace-insensitive, with `#` line comments.
`/` builds the fraction constructor and binds tighter than `*`, which binds
tighter than `+`; all three are left-associative.  `n m k l p q` are numeral
schema variables, `alpha beta gamma` are fraction schema variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .terms import (
    ERR_A, Add, Denom, FAdd, FMul, FracCons, FVar, Lit, Mul, NVar, Num, Sort,
    Term, children, sort_of, variables,
)

NAT_VARS = ("n", "m", "k", "l", "p", "q")
FRAC_VARS = ("alpha", "beta", "gamma")


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int

    def __str__(self):
        return f"{self.line}:{self.column}"


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r\n]+)
      | (?P<comment>\#[^\n]*)
      | (?P<int>\d+)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op>/=|->|<-|[+*/()=\[\]{},:;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int" | "ident" | an operator string | "eof"
    text: str
    span: SourceSpan


def tokenize(text: str) -> list:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", SourceSpan(line, col, 1))
        lexeme = m.group(0)
        kind = m.lastgroup
        if kind == "int":
            tokens.append(Token("int", lexeme, SourceSpan(line, col, len(lexeme))))
        elif kind == "ident":
            tokens.append(Token("ident", lexeme, SourceSpan(line, col, len(lexeme))))
        elif kind == "op":
            tokens.append(Token(lexeme, lexeme, SourceSpan(line, col, len(lexeme))))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(line, col, 0)))
    return tokens


class _Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.span)
        return self.next()

    def accept(self, kind: str) -> Optional[Token]:
        if self.peek().kind == kind:
            return self.next()
        return None


_PREC = {"+": 1, "*": 2, "/": 3}


def _parse_expr(cur: _Cursor, min_prec: int, allow_vars: bool) -> Term:
    left = _parse_atom(cur, allow_vars)
    while True:
        tok = cur.peek()
        prec = _PREC.get(tok.kind)
        if prec is None or prec < min_prec:
            return left
        cur.next()
        right = _parse_expr(cur, prec + 1, allow_vars)
        left = _combine(tok, left, right)


def _combine(op: Token, left: Term, right: Term) -> Term:
    ls, rs = sort_of(left), sort_of(right)
    if op.kind == "/":
        if ls != Sort.NAT or rs != Sort.NAT:
            raise ParseError("'/' takes numerator and denominator of numeral sort", op.span)
        return FracCons(left, right)
    if ls != rs:
        raise ParseError(
            f"operands of {op.kind!r} have different sorts ({ls.value} vs {rs.value})", op.span
        )
    if op.kind == "+":
        return Add(left, right) if ls == Sort.NAT else FAdd(left, right)
    return Mul(left, right) if ls == Sort.NAT else FMul(left, right)


def _parse_atom(cur: _Cursor, allow_vars: bool) -> Term:
    tok = cur.peek()
    if tok.kind == "int":
        cur.next()
        return Lit(int(tok.text))
    if tok.kind == "(":
        cur.next()
        inner = _parse_expr(cur, 1, allow_vars)
        cur.expect(")")
        return inner
    if tok.kind == "ident":
        cur.next()
        name = tok.text
        if name == "a":
            return ERR_A
        if name in ("num", "denom"):
            cur.expect("(")
            arg = _parse_expr(cur, 1, allow_vars)
            cur.expect(")")
            if sort_of(arg) != Sort.FRAC:
                raise ParseError(f"{name}(...) takes a fraction argument", tok.span)
            return Num(arg) if name == "num" else Denom(arg)
        if name in NAT_VARS:
            if not allow_vars:
                raise ParseError(f"schema variable {name!r} not allowed in a ground term", tok.span)
            return NVar(name)
        if name in FRAC_VARS:
            if not allow_vars:
                raise ParseError(f"schema variable {name!r} not allowed in a ground term", tok.span)
            return FVar(name)
        raise ParseError(f"unknown identifier {name!r}", tok.span)
    raise ParseError(f"expected a term, found {tok.text or 'end of input'!r}", tok.span)


def parse_term(text: str, allow_vars: bool = False) -> Term:
    cur = _Cursor(tokenize(text))
    t = _parse_expr(cur, 1, allow_vars)
    cur.expect("eof")
    return t


def _parse_equation_tokens(cur: _Cursor, allow_vars: bool):
    lhs = _parse_expr(cur, 1, allow_vars)
    eq = cur.expect("=")
    rhs = _parse_expr(cur, 1, allow_vars)
    if sort_of(lhs) != sort_of(rhs):
        raise ParseError(
            f"equation sides have different sorts ({sort_of(lhs).value} vs {sort_of(rhs).value})",
            eq.span,
        )
    return lhs, rhs


def parse_equation(text: str, allow_vars: bool = False):
    """Parse `term = term`; returns (sort, lhs, rhs)."""
    cur = _Cursor(tokenize(text))
    lhs, rhs = _parse_equation_tokens(cur, allow_vars)
    cur.expect("eof")
    return sort_of(lhs), lhs, rhs


# ---------------------------------------------------------------------------
# printing

_NODE_PREC = {Add: 1, FAdd: 1, Mul: 2, FMul: 2, FracCons: 3}


def print_term(t: Term) -> str:
    """Minimal-parentheses rendering; `parse_term(print_term(t)) == t`."""
    return _print(t, 0, False)


def _print(t, parent_prec: int, is_right: bool) -> str:
    if isinstance(t, Lit):
        return str(t.value)
    if isinstance(t, (NVar, FVar)):
        return t.name
    if type(t).__name__ == "ErrA":
        return "a"
    if isinstance(t, Num):
        return f"num({_print(t.arg, 0, False)})"
    if isinstance(t, Denom):
        return f"denom({_print(t.arg, 0, False)})"
    prec = _NODE_PREC[type(t)]
    op = "+" if isinstance(t, (Add, FAdd)) else "*" if isinstance(t, (Mul, FMul)) else "/"
    kids = children(t)
    sep = op if op == "/" else f" {op} "
    text = f"{_print(kids[0], prec, False)}{sep}{_print(kids[1], prec, True)}"
    if prec < parent_prec or (prec == parent_prec and is_right):
        return f"({text})"
    return text


def print_equation(lhs: Term, rhs: Term) -> str:
    return f"{print_term(lhs)} = {print_term(rhs)}"


# ---------------------------------------------------------------------------
# theory files

@dataclass
class AxiomDecl:
    axiom_id: str
    conditions: list  # (variable, "0" | "a") pairs
    lhs: Term
    rhs: Term
    span: SourceSpan


@dataclass
class TheoryDecl:
    name: str
    axiom_ids: list
    span: SourceSpan


def parse_theory_file(text: str):
    """Parse `axiom` and `theory` declarations; returns (axiom decls, theory decls).

    Uniqueness and reference checks live in the catalog builder; here only the
    per-declaration shape is validated (in particular that every condition
    variable occurs in the equation).
    """
    cur = _Cursor(tokenize(text))
    axioms, theories = [], []
    while cur.peek().kind != "eof":
        tok = cur.expect("ident")
        if tok.text == "axiom":
            axioms.append(_parse_axiom_decl(cur, tok.span))
        elif tok.text == "theory":
            theories.append(_parse_theory_decl(cur, tok.span))
        else:
            raise ParseError(f"expected 'axiom' or 'theory', found {tok.text!r}", tok.span)
    return axioms, theories


def _axiom_id(cur: _Cursor) -> str:
    tok = cur.peek()
    if tok.kind in ("int", "ident"):
        cur.next()
        return tok.text
    raise ParseError(f"expected an axiom id, found {tok.text or 'end of input'!r}", tok.span)


def _parse_axiom_decl(cur: _Cursor, span: SourceSpan) -> AxiomDecl:
    axiom_id = _axiom_id(cur)
    conditions = []
    if cur.accept("["):
        while True:
            var = cur.expect("ident")
            if var.text not in NAT_VARS:
                raise ParseError(f"condition variable {var.text!r} is not a numeral variable", var.span)
            cur.expect("/=")
            forb = cur.peek()
            if forb.kind == "int" and forb.text == "0":
                cur.next()
                conditions.append((var.text, "0"))
            elif forb.kind == "ident" and forb.text == "a":
                cur.next()
                conditions.append((var.text, "a"))
            else:
                raise ParseError("condition compares against '0' or 'a'", forb.span)
            if not cur.accept(","):
                break
        cur.expect("]")
    cur.expect(":")
    lhs, rhs = _parse_equation_tokens(cur, allow_vars=True)
    occurring = variables(lhs) | variables(rhs)
    for var, _ in conditions:
        if var not in occurring:
            raise ParseError(f"condition variable {var!r} does not occur in the equation", span)
    return AxiomDecl(axiom_id, conditions, lhs, rhs, span)


def _parse_theory_decl(cur: _Cursor, span: SourceSpan) -> TheoryDecl:
    name = cur.expect("ident").text
    cur.expect("{")
    kw = cur.expect("ident")
    if kw.text != "axioms":
        raise ParseError(f"expected 'axioms', found {kw.text!r}", kw.span)
    ids = [_axiom_id(cur)]
    while cur.accept(","):
        ids.append(_axiom_id(cur))
    cur.expect("}")
    return TheoryDecl(name, ids, span)


# ---------------------------------------------------------------------------
# proof scripts

@dataclass
class StepDecl:
    kind: str  # "axiom" | "arith"
    axiom_id: Optional[str]
    direction: Optional[str]  # "->" | "<-"
    position: tuple
    nat_bindings: dict = field(default_factory=dict)
    frac_bindings: dict = field(default_factory=dict)


@dataclass
class ProofScript:
    name: str
    theory_names: list
    claim: tuple  # (sort, lhs, rhs), ground
    start: Term
    steps: list


def _parse_position(cur: _Cursor) -> tuple:
    cur.expect("[")
    indices = []
    if cur.peek().kind == "int":
        indices.append(int(cur.next().text))
        while cur.accept(","):
            indices.append(int(cur.expect("int").text))
    cur.expect("]")
    return tuple(indices)


def parse_proof_file(text: str) -> ProofScript:
    cur = _Cursor(tokenize(text))
    kw = cur.expect("ident")
    if kw.text != "proof":
        raise ParseError(f"expected 'proof', found {kw.text!r}", kw.span)
    name = cur.expect("ident").text
    kw = cur.expect("ident")
    if kw.text != "in":
        raise ParseError(f"expected 'in', found {kw.text!r}", kw.span)
    theory_names = [cur.expect("ident").text]
    while cur.accept("+"):
        theory_names.append(cur.expect("ident").text)
    cur.expect("{")
    claim = None
    start = None
    steps = []
    while not cur.accept("}"):
        kw = cur.expect("ident")
        if kw.text == "claim":
            cur.expect(":")
            lhs, rhs = _parse_equation_tokens(cur, allow_vars=False)
            claim = (sort_of(lhs), lhs, rhs)
        elif kw.text == "start":
            cur.expect(":")
            start = _parse_expr(cur, 1, allow_vars=False)
        elif kw.text == "step":
            steps.append(_parse_step(cur))
        else:
            raise ParseError(f"expected 'claim', 'start' or 'step', found {kw.text!r}", kw.span)
        cur.accept(";")
    cur.expect("eof")
    if claim is None:
        raise ParseError("proof has no claim", kw.span)
    if start is None:
        raise ParseError("proof has no start term", kw.span)
    return ProofScript(name, theory_names, claim, start, steps)


def _parse_step(cur: _Cursor) -> StepDecl:
    kw = cur.expect("ident")
    if kw.text == "arith":
        at = cur.expect("ident")
        if at.text != "at":
            raise ParseError(f"expected 'at', found {at.text!r}", at.span)
        return StepDecl("arith", None, None, _parse_position(cur))
    if kw.text != "axiom":
        raise ParseError(f"expected 'axiom' or 'arith', found {kw.text!r}", kw.span)
    axiom_id = _axiom_id(cur)
    tok = cur.peek()
    if tok.kind in ("->", "<-"):
        cur.next()
        direction = tok.kind
    else:
        raise ParseError("expected '->' or '<-'", tok.span)
    at = cur.expect("ident")
    if at.text != "at":
        raise ParseError(f"expected 'at', found {at.text!r}", at.span)
    position = _parse_position(cur)
    nat_bindings: dict = {}
    frac_bindings: dict = {}
    tok = cur.peek()
    if tok.kind == "ident" and tok.text == "with":
        cur.next()
        cur.expect("{")
        while True:
            var = cur.expect("ident")
            cur.expect("=")
            if var.text in NAT_VARS:
                nat_bindings[var.text] = int(cur.expect("int").text)
            elif var.text in FRAC_VARS:
                frac_bindings[var.text] = _parse_expr(cur, 1, allow_vars=False)
            else:
                raise ParseError(f"{var.text!r} is not a schema variable", var.span)
            if not cur.accept(","):
                break
        cur.expect("}")
    return StepDecl("axiom", axiom_id, direction, position, nat_bindings, frac_bindings)


# ---------------------------------------------------------------------------
# chunk-and-permeate configuration files

@dataclass
class ChunkDecl:
    chunk_id: str
    theory_name: Optional[str]  # either a named theory ...
    axiom_ids: Optional[list]  # ... or an inline axiom list


@dataclass
class PermeateDecl:
    source: str
    target: str
    mode: str  # "all" | "none" | "only" | "except"
    axiom_ids: list


@dataclass
class CPConfig:
    name: str
    chunks: list
    permeations: list
    designated: str


def parse_cp_file(text: str) -> CPConfig:
    cur = _Cursor(tokenize(text))
    kw = cur.expect("ident")
    if kw.text != "cp":
        raise ParseError(f"expected 'cp', found {kw.text!r}", kw.span)
    name = cur.expect("ident").text
    cur.expect("{")
    chunks, permeations = [], []
    designated = None
    while not cur.accept("}"):
        kw = cur.expect("ident")
        if kw.text == "chunk":
            chunk_id = cur.expect("ident").text
            cur.expect("=")
            if cur.accept("{"):
                ax = cur.expect("ident")
                if ax.text != "axioms":
                    raise ParseError(f"expected 'axioms', found {ax.text!r}", ax.span)
                ids = [_axiom_id(cur)]
                while cur.accept(","):
                    ids.append(_axiom_id(cur))
                cur.expect("}")
                chunks.append(ChunkDecl(chunk_id, None, ids))
            else:
                chunks.append(ChunkDecl(chunk_id, cur.expect("ident").text, None))
        elif kw.text == "permeate":
            src = cur.expect("ident").text
            cur.expect("->")
            dst = cur.expect("ident").text
            cur.expect(":")
            mode_tok = cur.expect("ident")
            mode = mode_tok.text
            ids: list = []
            if mode in ("only", "except"):
                ids.append(_axiom_id(cur))
                while cur.accept(","):
                    ids.append(_axiom_id(cur))
            elif mode not in ("all", "none"):
                raise ParseError(
                    f"expected 'all', 'none', 'only' or 'except', found {mode!r}", mode_tok.span
                )
            permeations.append(PermeateDecl(src, dst, mode, ids))
        elif kw.text == "designated":
            designated = cur.expect("ident").text
        else:
            raise ParseError(
                f"expected 'chunk', 'permeate' or 'designated', found {kw.text!r}", kw.span
            )
        cur.accept(";")
    cur.expect("eof")
    if designated is None:
        raise ParseError("cp structure has no designated chunk", kw.span)
    return CPConfig(name, chunks, permeations, designated)
