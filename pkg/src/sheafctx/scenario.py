"""Measurement scenarios, contexts and sections of the event sheaf.

A scenario is a triple of measurement labels, outcome labels and an antichain
cover of maximal contexts. Contexts are carried as tuples of measurement labels
in the scenario's measurement order, so every enumeration below is canonical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Mapping


class ScenarioError(ValueError):
    """Raised for malformed scenarios and context misuse."""


class AntichainViolation(ScenarioError):
    pass


class CoverIncomplete(ScenarioError):
    pass


class EmptyContext(ScenarioError):
    pass


class NotASubcontext(ScenarioError):
    pass


class UnknownMeasurement(ScenarioError):
    pass


Context = tuple[str, ...]


@dataclass(frozen=True, eq=False)
class Assignment:
    """A section s: U -> O, stored as parallel tuples.

    Equality and hashing ignore the order of the domain, so an assignment
    glued from two pieces compares equal to the canonically ordered one.
    """

    context: Context
    values: tuple[str, ...]

    def __post_init__(self):
        if len(self.context) != len(self.values):
            raise ScenarioError("assignment domain and values differ in length")
        if len(set(self.context)) != len(self.context):
            raise ScenarioError(f"repeated measurement in {self.context}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str], order: Iterable[str] | None = None) -> "Assignment":
        keys = tuple(order) if order is not None else tuple(mapping)
        return cls(keys, tuple(mapping[k] for k in keys))

    def as_dict(self) -> dict[str, str]:
        return dict(zip(self.context, self.values))

    def __getitem__(self, measurement: str) -> str:
        try:
            return self.values[self.context.index(measurement)]
        except ValueError:
            raise KeyError(measurement) from None

    @property
    def domain(self) -> frozenset[str]:
        return frozenset(self.context)

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.domain == other.domain and self.as_dict() == other.as_dict()

    def __hash__(self):
        return hash(frozenset(zip(self.context, self.values)))

    def __repr__(self):
        inner = ", ".join(f"{m}->{o}" for m, o in zip(self.context, self.values))
        return f"Assignment({{{inner}}})"


def restrict(s: Assignment, sub: Iterable[str]) -> Assignment:
    """Restrict a section to a subcontext, keeping the order of ``s``."""
    wanted = set(sub)
    missing = wanted - s.domain
    if missing:
        raise NotASubcontext(f"{sorted(missing)} not in domain {s.context}")
    pairs = [(m, o) for m, o in zip(s.context, s.values) if m in wanted]
    return Assignment(tuple(m for m, _ in pairs), tuple(o for _, o in pairs))


def glue(s1: Assignment, s2: Assignment) -> Assignment:
    """Union of two sections on disjoint domains."""
    if s1.domain & s2.domain:
        raise ScenarioError(f"cannot glue overlapping sections {s1} and {s2}")
    return Assignment(s1.context + s2.context, s1.values + s2.values)


@dataclass(frozen=True)
class MeasurementScenario:
    measurements: tuple[str, ...]
    outcomes: tuple[str, ...]
    cover: tuple[Context, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if not self.measurements:
            raise ScenarioError("scenario needs at least one measurement")
        if not self.outcomes:
            raise ScenarioError("scenario needs at least one outcome")
        for name, labels in (("measurement", self.measurements), ("outcome", self.outcomes)):
            if len(set(labels)) != len(labels):
                raise ScenarioError(f"duplicate {name} labels in {labels}")
        object.__setattr__(self, "_index", {m: i for i, m in enumerate(self.measurements)})

        cover = []
        for raw in self.cover:
            members = set(raw)
            if not members:
                raise EmptyContext("cover contains an empty context")
            cover.append(self.context(members))
        # duplicates collapse; the cover is a set
        cover = sorted(set(cover), key=self._context_key)
        for c1, c2 in combinations(cover, 2):
            s1, s2 = set(c1), set(c2)
            if s1 < s2 or s2 < s1:
                small, big = (c1, c2) if s1 < s2 else (c2, c1)
                raise AntichainViolation(f"context {list(small)} is strictly contained in {list(big)}")
        covered = set().union(*map(set, cover)) if cover else set()
        uncovered = [m for m in self.measurements if m not in covered]
        if uncovered:
            raise CoverIncomplete(f"measurements {uncovered} are not covered")
        object.__setattr__(self, "cover", tuple(cover))

    def _context_key(self, ctx: Context):
        return (len(ctx), [self._index[m] for m in ctx])

    def context(self, members: Iterable[str]) -> Context:
        """Canonical (measurement-ordered) tuple for a set of labels."""
        members = set(members)
        unknown = members - set(self._index)
        if unknown:
            raise UnknownMeasurement(f"unknown measurements {sorted(unknown)}")
        return tuple(sorted(members, key=self._index.__getitem__))

    def is_context(self, members: Iterable[str]) -> bool:
        """True iff ``members`` lies below some maximal context."""
        members = set(members)
        return any(members <= set(c) for c in self.cover)

    def contexts(self) -> list[Context]:
        """All contexts below the cover, the empty one included."""
        seen = set()
        for c in self.cover:
            for k in range(len(c) + 1):
                for sub in combinations(c, k):
                    seen.add(sub)
        return sorted(seen, key=self._context_key)

    def sections(self, members: Iterable[str]) -> list[Assignment]:
        ctx = self.context(members)
        return [Assignment(ctx, vals) for vals in product(self.outcomes, repeat=len(ctx))]

    def global_sections(self) -> list[Assignment]:
        return self.sections(self.measurements)

    def as_dict(self) -> dict:
        return {
            "measurements": list(self.measurements),
            "outcomes": list(self.outcomes),
            "cover": [list(c) for c in self.cover],
        }


def sections(scenario: MeasurementScenario, members: Iterable[str]) -> list[Assignment]:
    return scenario.sections(members)


def validate_scenario(raw) -> MeasurementScenario:
    """Build a validated scenario from a mapping or an existing scenario."""
    if isinstance(raw, MeasurementScenario):
        return MeasurementScenario(raw.measurements, raw.outcomes, raw.cover)
    try:
        measurements = raw["measurements"]
        outcomes = raw["outcomes"]
        cover = raw["cover"]
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"scenario is missing field {exc}") from None
    return MeasurementScenario(tuple(measurements), tuple(outcomes), tuple(tuple(c) for c in cover))
