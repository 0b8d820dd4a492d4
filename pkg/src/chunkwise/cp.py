"""The chunk-and-permeate engine: coverings, permeability filters, and queries.

Chunks are named theories; a permeability filter on an edge (j, i) describes
the axiom schemas whose ground instances may flow from chunk j to chunk i.
Availability states iterate to a fixpoint, and queries run the bounded prover
over the designated chunk's accumulated axiom set.
"""

from __future__ import annotations

import concurrent.futures
import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from . import prover, syntax
from .proof import CalcProof, check_proof, proof_to_dict
from .prover import Found, NotFoundWithinBounds, SearchBounds, fold_normalize
from .terms import FracCons, Lit, Valuation
from .theory import AxiomSchema, Catalog, Equation, Theory, TheoryError, instantiate_axiom


class CPError(Exception):
    pass


@dataclass(frozen=True)
class Nothing:
    def allowed(self, universe) -> frozenset:
        return frozenset()

    def describe(self) -> str:
        return "none"


@dataclass(frozen=True)
class Allowlist:
    ids: frozenset

    def allowed(self, universe) -> frozenset:
        return frozenset(self.ids)

    def describe(self) -> str:
        return "only " + ", ".join(sorted(self.ids, key=prover._axiom_order_key))


@dataclass(frozen=True)
class AllExcept:
    ids: frozenset

    def allowed(self, universe) -> frozenset:
        return frozenset(universe) - self.ids

    def describe(self) -> str:
        if not self.ids:
            return "all"
        return "except " + ", ".join(sorted(self.ids, key=prover._axiom_order_key))


PermFilter = Union[Nothing, Allowlist, AllExcept]


@dataclass
class CPStructure:
    name: str
    chunks: dict  # chunk id -> Theory
    permeability: dict  # (from, to) -> PermFilter; missing edges mean Nothing
    designated: str

    def __post_init__(self):
        if self.designated not in self.chunks:
            raise CPError(f"designated chunk {self.designated!r} is not a chunk")
        universe = self.universe()
        for (src, dst), filt in self.permeability.items():
            for cid in (src, dst):
                if cid not in self.chunks:
                    raise CPError(f"permeation edge names unknown chunk {cid!r}")
            for axiom_id in getattr(filt, "ids", frozenset()):
                if axiom_id not in universe:
                    raise CPError(
                        f"filter on {src}->{dst} names axiom {axiom_id!r} "
                        "outside every chunk"
                    )

    def universe(self) -> frozenset:
        out: set = set()
        for theory in self.chunks.values():
            out.update(theory.axiom_ids)
        return frozenset(out)

    def filter_for(self, src: str, dst: str) -> PermFilter:
        return self.permeability.get((src, dst), Nothing())


@dataclass
class RoundState:
    """Axiom schemas currently available to each chunk (own plus received)."""

    available: dict  # chunk id -> frozenset of axiom ids

    def __eq__(self, other):
        return isinstance(other, RoundState) and self.available == other.available


def initial_state(cp: CPStructure) -> RoundState:
    return RoundState({cid: frozenset(t.axiom_ids) for cid, t in cp.chunks.items()})


def permeate_round(cp: CPStructure, state: RoundState) -> RoundState:
    universe = cp.universe()
    new = {}
    for cid in cp.chunks:
        acc = set(state.available[cid])
        for src in cp.chunks:
            if src == cid:
                continue
            filt = cp.filter_for(src, cid)
            acc |= state.available[src] & filt.allowed(universe)
        new[cid] = frozenset(acc)
    return RoundState(new)


def run_permeation(cp: CPStructure, max_rounds: int = 4):
    """Iterate permeation to a fixpoint (or the round cap).

    Returns (final state, provenance, rounds_used) where rounds_used counts
    the rounds that actually changed some chunk's availability.
    """
    state = initial_state(cp)
    provenance = []
    rounds_used = 0
    for _ in range(max_rounds):
        nxt = permeate_round(cp, state)
        if nxt == state:
            break
        crossings = []
        universe = cp.universe()
        for src in sorted(cp.chunks):
            for dst in sorted(cp.chunks):
                if src == dst:
                    continue
                filt = cp.filter_for(src, dst)
                gained = (state.available[src] & filt.allowed(universe)) - state.available[dst]
                if gained:
                    crossings.append(
                        {
                            "from": src,
                            "to": dst,
                            "axioms": sorted(gained, key=prover._axiom_order_key),
                        }
                    )
        provenance.append({"round": rounds_used + 1, "crossings": crossings})
        state = nxt
        rounds_used += 1
    return state, provenance, rounds_used


@dataclass
class CPAnswer:
    derivable: bool
    rounds_used: int
    available: dict  # chunk id -> sorted axiom ids after permeation
    provenance: list
    proof: Optional[CalcProof] = None
    states_explored: int = 0
    bounds_hit: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "derivable": self.derivable,
            "roundsUsed": self.rounds_used,
            "available": self.available,
            "permeation": self.provenance,
        }
        if self.proof is not None:
            out["proof"] = proof_to_dict(self.proof)
        else:
            out["statesExplored"] = self.states_explored
            out["boundsHit"] = list(self.bounds_hit)
        return out


def cp_query(
    catalog: Catalog,
    cp: CPStructure,
    goal: Equation,
    bounds: SearchBounds = SearchBounds(),
    max_rounds: int = 4,
) -> CPAnswer:
    """Permeate to fixpoint, then search for the goal in the designated chunk."""
    state, provenance, rounds_used = run_permeation(cp, max_rounds)
    available = {
        cid: sorted(ids, key=prover._axiom_order_key)
        for cid, ids in sorted(state.available.items())
    }
    theory_ids = tuple(available[cp.designated])
    result = prover.prove(catalog, theory_ids, goal, bounds)
    if isinstance(result, Found):
        return CPAnswer(True, rounds_used, available, provenance, proof=result.proof)
    return CPAnswer(
        False,
        rounds_used,
        available,
        provenance,
        states_explored=result.states_explored,
        bounds_hit=result.bounds_hit,
    )


@dataclass
class InstanceResult:
    valuation: Valuation
    derivable: bool
    reduct: Optional[str] = None
    main_steps: int = 0
    fold_steps: int = 0

    def to_dict(self) -> dict:
        out: dict = {
            "valuation": {
                **dict(sorted(self.valuation.nat.items())),
                **{
                    k: syntax.print_term(v)
                    for k, v in sorted(self.valuation.frac.items())
                },
            },
            "derivable": self.derivable,
        }
        if self.derivable:
            out["reduct"] = self.reduct
            out["steps"] = {"derivation": self.main_steps, "folds": self.fold_steps}
        return out


@dataclass
class CoveringEntry:
    axiom_id: str
    status: str  # "syntactically-present" | "derived" | "underived"
    instances: list = field(default_factory=list)

    @property
    def found(self) -> int:
        return sum(1 for r in self.instances if r.derivable)

    def to_dict(self) -> dict:
        out = {"axiom": self.axiom_id, "status": self.status}
        if self.instances:
            out["found"] = self.found
            out["total"] = len(self.instances)
            out["instances"] = [r.to_dict() for r in self.instances]
        return out


@dataclass
class CoveringReport:
    structure: str
    target: str
    entries: list

    @property
    def verdict(self) -> str:
        return "covered" if all(e.status != "underived" for e in self.entries) else "not-covered"

    def to_dict(self) -> dict:
        return {
            "structure": self.structure,
            "target": self.target,
            "entries": [e.to_dict() for e in self.entries],
            "verdict": self.verdict,
        }


def _sample_valuations(schema: AxiomSchema, sample_values):
    """All condition-respecting valuations with numeral variables drawn from
    sample_values (fraction variables, if any, get the matching literal pairs)."""
    from .models import _var_axes  # same variable analysis as model checking

    axes = _var_axes(schema, max(sample_values))
    frac_pool = [
        FracCons(Lit(i), Lit(j)) for i in sample_values for j in sample_values
    ]
    pools = []
    for name, kind, vals in axes:
        if kind == "nat":
            allowed = set(vals)
            pools.append([v for v in sample_values if v in allowed])
        else:
            pools.append(frac_pool)
    out = []
    for combo in itertools.product(*pools):
        val = Valuation()
        for (name, kind, _), pick in zip(axes, combo):
            if kind == "nat":
                val.nat[name] = pick
            else:
                val.frac[name] = pick
        out.append(val)
    return out


def _derive_instance(args):
    """Derive one sampled instance via a common reduct.

    The instance equation's sides both rewrite to the reduct: the right side
    by literal folding alone, the left by a searched chain.  Together the two
    checker-verified chains witness the instance (symmetry and transitivity
    are meta-level here, as in any calculation format).
    """
    catalog, theory_ids, schema_id, val, bounds = args
    schema = catalog.schema(schema_id)
    eq = instantiate_axiom(schema, val)
    reduct, fold_steps = fold_normalize(eq.rhs)
    fold_proof = CalcProof(
        tuple(theory_ids), Equation(eq.sort, eq.rhs, reduct), eq.rhs, fold_steps
    )
    check_proof(catalog, fold_proof)
    goal = Equation(eq.sort, eq.lhs, reduct)
    result = prover.prove(catalog, theory_ids, goal, bounds)
    if isinstance(result, Found):
        return InstanceResult(
            val,
            True,
            reduct=syntax.print_term(reduct),
            main_steps=len(result.proof.steps),
            fold_steps=len(fold_steps),
        )
    return InstanceResult(val, False)


def verify_covering(
    catalog: Catalog,
    cp: CPStructure,
    target: Theory,
    bounds: SearchBounds = SearchBounds(),
    sample_values=(1, 2, 3),
    jobs: int = 1,
) -> CoveringReport:
    """Check that the chunks cover a target theory, derivationally.

    Axioms present in some chunk are reported as such; for the rest, every
    sampled instance is derived from the union of the chunk axiom sets.
    """
    union_ids = tuple(
        sorted(cp.universe(), key=prover._axiom_order_key)
    )
    entries = []
    tasks = []  # (entry index, args)
    for axiom_id in target.axiom_ids:
        if any(axiom_id in t.axiom_ids for t in cp.chunks.values()):
            entries.append(CoveringEntry(axiom_id, "syntactically-present"))
            continue
        schema = catalog.schema(axiom_id)
        entry = CoveringEntry(axiom_id, "underived")
        entries.append(entry)
        for val in _sample_valuations(schema, sample_values):
            tasks.append((len(entries) - 1, (catalog, union_ids, axiom_id, val, bounds)))
    if jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_derive_instance, [args for _, args in tasks], chunksize=4))
    else:
        results = [_derive_instance(args) for _, args in tasks]
    for (idx, _), res in zip(tasks, results):
        entries[idx].instances.append(res)
    for entry in entries:
        if entry.instances:
            entry.status = "derived" if entry.found == len(entry.instances) else "underived"
    return CoveringReport(cp.name, target.name, entries)


def from_config(catalog: Catalog, config: syntax.CPConfig) -> CPStructure:
    chunks = {}
    for decl in config.chunks:
        if decl.chunk_id in chunks:
            raise CPError(f"duplicate chunk {decl.chunk_id!r}")
        if decl.theory_name is not None:
            chunks[decl.chunk_id] = catalog.theory(decl.theory_name)
        else:
            for axiom_id in decl.axiom_ids:
                catalog.schema(axiom_id)  # raises for unknown ids
            chunks[decl.chunk_id] = Theory(decl.chunk_id, tuple(decl.axiom_ids))
    permeability = {}
    for decl in config.permeations:
        key = (decl.source, decl.target)
        if decl.mode == "none":
            permeability[key] = Nothing()
        elif decl.mode == "all":
            permeability[key] = AllExcept(frozenset())
        elif decl.mode == "only":
            permeability[key] = Allowlist(frozenset(decl.axiom_ids))
        else:
            permeability[key] = AllExcept(frozenset(decl.axiom_ids))
    return CPStructure(config.name, chunks, permeability, config.designated)


def load_structure(catalog: Catalog, text: str) -> CPStructure:
    return from_config(catalog, syntax.parse_cp_file(text))
