"""Outcome types shared by the solver driver and the oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

PROVEN = "proven"
COUNTEREXAMPLE = "counterexample"
BOUNDED_NO_COUNTEREXAMPLE = "bounded-no-counterexample"
UNKNOWN = "unknown"
TIMEOUT = "timeout"


@dataclass
class Counterexample:
    """A finite structure witnessing the negated assertion: atom universes per
    top-level type, one tuple set per relation, and the skolem bindings."""

    universes: dict[str, tuple[str, ...]]  # top-level type -> atoms
    extents: dict[str, tuple[str, ...]]  # every type -> member atoms
    relations: dict[str, frozenset]
    bindings: dict[str, str]  # skolem constant -> atom
    source: str = "oracle"
    validated: bool = False

    def describe(self) -> str:
        lines = []
        for t, atoms in self.universes.items():
            subs = [
                f"{s}={{{', '.join(self.extents[s])}}}"
                for s in self.extents
                if s not in self.universes and set(self.extents[s]) <= set(atoms) and self.extents[s]
            ]
            lines.append(f"  {t} = {{{', '.join(atoms)}}}" + (f"  ({'; '.join(subs)})" if subs else ""))
        for r, tuples in self.relations.items():
            rows = ", ".join("(" + ", ".join(tu) + ")" for tu in sorted(tuples))
            lines.append(f"  {r} = {{{rows}}}")
        if self.bindings:
            lines.append("  where " + ", ".join(f"{k} = {v}" for k, v in self.bindings.items()))
        return "\n".join(lines)


@dataclass
class Verdict:
    """proven | counterexample | bounded-no-counterexample | unknown | timeout.

    `proven` is only ever produced for an all-unbounded plan with an unsat
    answer; `bounded-no-counterexample` carries the exact bounds checked."""

    outcome: str
    counterexample: Optional[Counterexample] = None
    bounds: dict[str, int] = field(default_factory=dict)
    solver_time: Optional[float] = None
    detail: str = ""

    @property
    def tautology_column(self) -> str:
        """Table semantics: Yes = proof, No = validated counterexample,
        Don't know = bounded check came back clean."""
        return {
            PROVEN: "Yes",
            COUNTEREXAMPLE: "No",
            BOUNDED_NO_COUNTEREXAMPLE: "Don't know",
            UNKNOWN: "Unknown",
            TIMEOUT: "Unknown",
        }[self.outcome]

    def describe(self) -> str:
        if self.outcome == PROVEN:
            return "proven (unsat with no finitized types: the assertion is a tautology)"
        if self.outcome == BOUNDED_NO_COUNTEREXAMPLE:
            bounds = ", ".join(f"{t}<={n}" for t, n in sorted(self.bounds.items()))
            return f"no counterexample within bounds ({bounds})"
        if self.outcome == COUNTEREXAMPLE:
            assert self.counterexample is not None
            return "counterexample:\n" + self.counterexample.describe()
        if self.detail:
            return f"{self.outcome}: {self.detail}"
        return self.outcome
