"""Semiring-valued distributions on sections and the distribution functor.

Three carriers are supported: exact nonnegative rationals, booleans (the
possibilistic semiring) and doubles for quantum-derived weights. Only the
double carrier compares with a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping

from .scenario import Assignment, NotASubcontext, ScenarioError, glue, restrict

# absolute tolerance for the double carrier
ETA = 1e-9


class DistributionError(ValueError):
    pass


class SemiringMismatch(DistributionError):
    pass


class PartialMap(DistributionError):
    pass


class OverlappingContexts(DistributionError):
    pass


class NotNormalized(DistributionError):
    pass


@dataclass(frozen=True)
class Semiring:
    name: str
    zero: object
    one: object
    add: Callable
    mul: Callable
    exact: bool

    def coerce(self, value):
        if self.name == "boolean":
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes")
            return bool(value)
        if self.name == "probability":
            if isinstance(value, float):
                raise DistributionError(f"float {value!r} given to the exact rational carrier")
            value = Fraction(value)
            if value < 0:
                raise DistributionError(f"negative weight {value}")
            return value
        value = float(value)
        if value < -ETA:
            raise DistributionError(f"negative weight {value}")
        return value

    def is_zero(self, value) -> bool:
        return value == self.zero if self.exact else abs(value) <= ETA

    def equal(self, x, y, tol: float = ETA) -> bool:
        if self.exact:
            return x == y
        return abs(x - y) <= tol

    def total(self, values: Iterable):
        acc = self.zero
        for v in values:
            acc = self.add(acc, v)
        return acc


PROBABILITY = Semiring("probability", Fraction(0), Fraction(1), lambda a, b: a + b, lambda a, b: a * b, True)
BOOLEAN = Semiring("boolean", False, True, lambda a, b: a or b, lambda a, b: a and b, True)
REAL = Semiring("real", 0.0, 1.0, lambda a, b: a + b, lambda a, b: a * b, False)

SEMIRINGS = {s.name: s for s in (PROBABILITY, BOOLEAN, REAL)}


class Distribution:
    """Normalized, finitely supported weights on sections of one context.

    ``context`` may be ``None`` for a bare distribution over arbitrary
    hashable points (a hidden-variable set, say); marginals then make no sense.
    Zero weights are dropped on construction.
    """

    __slots__ = ("context", "semiring", "_weights")

    def __init__(self, context, weights: Mapping[Hashable, object], semiring: Semiring = PROBABILITY,
                 check: bool = True):
        self.context = None if context is None else tuple(context)
        self.semiring = semiring
        cleaned = {}
        for key, value in weights.items():
            value = semiring.coerce(value)
            if semiring.exact and value == semiring.zero:
                continue
            if self.context is not None:
                if not isinstance(key, Assignment):
                    raise DistributionError(f"key {key!r} is not an assignment")
                if key.domain != frozenset(self.context):
                    raise DistributionError(f"section {key} does not live on context {self.context}")
            cleaned[key] = value
        self._weights = cleaned
        if check:
            total = semiring.total(cleaned.values())
            if not semiring.equal(total, semiring.one):
                raise NotNormalized(f"weights on {self.context} sum to {total}, not {semiring.one}")

    def __getitem__(self, key):
        return self._weights.get(key, self.semiring.zero)

    weight = __getitem__

    def items(self):
        return self._weights.items()

    def support(self) -> list:
        return [k for k, v in self._weights.items() if not self.semiring.is_zero(v)]

    def __len__(self):
        return len(self._weights)

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        if self.semiring is not other.semiring:
            return False
        if (self.context is None) != (other.context is None):
            return False
        if self.context is not None and set(self.context) != set(other.context):
            return False
        keys = set(self._weights) | set(other._weights)
        return all(self.semiring.equal(self[k], other[k]) for k in keys)

    def __repr__(self):
        body = ", ".join(f"{k!r}: {v}" for k, v in self._weights.items())
        return f"Distribution({self.semiring.name}, {self.context}, {{{body}}})"

    def possibilistic(self) -> "Distribution":
        """Support as a boolean distribution."""
        return Distribution(self.context, {k: True for k in self.support()}, BOOLEAN)


def point(s: Hashable, semiring: Semiring = PROBABILITY, context=None) -> Distribution:
    if context is None and isinstance(s, Assignment):
        context = s.context
    return Distribution(context, {s: semiring.one}, semiring)


def uniform(keys: Iterable[Hashable], context=None) -> Distribution:
    keys = list(keys)
    if context is None and keys and isinstance(keys[0], Assignment):
        context = keys[0].context
    return Distribution(context, {k: Fraction(1, len(keys)) for k in keys})


def marginal(d: Distribution, sub: Iterable[str]) -> Distribution:
    """Sum the weights of all sections restricting to the same subsection."""
    if d.context is None:
        raise DistributionError("marginal needs a distribution over sections")
    sub = set(sub)
    if not sub <= set(d.context):
        raise NotASubcontext(f"{sorted(sub - set(d.context))} not in context {d.context}")
    target = tuple(m for m in d.context if m in sub)
    sr = d.semiring
    acc: dict = {}
    for s, w in d.items():
        t = restrict(s, target)
        acc[t] = sr.add(acc.get(t, sr.zero), w)
    return Distribution(target, acc, sr, check=sr.exact)


def push_forward(f, d: Distribution, context=None) -> Distribution:
    """Image of ``d`` under a map of sections (the functor on morphisms).

    ``f`` is a mapping or a callable; it must be defined on the support of
    ``d``. The target context is inferred from the images when not given.
    """
    sr = d.semiring
    acc: dict = {}
    for s, w in d.items():
        try:
            t = f[s] if isinstance(f, Mapping) else f(s)
        except KeyError:
            raise PartialMap(f"map undefined on {s!r}") from None
        acc[t] = sr.add(acc.get(t, sr.zero), w)
    if context is None and acc:
        first = next(iter(acc))
        context = first.context if isinstance(first, Assignment) else None
    return Distribution(context, acc, sr, check=sr.exact)


def product(d1: Distribution, d2: Distribution) -> Distribution:
    """Independent product of distributions on disjoint contexts."""
    if d1.semiring is not d2.semiring:
        raise SemiringMismatch(f"{d1.semiring.name} vs {d2.semiring.name}")
    if d1.context is None or d2.context is None:
        raise DistributionError("product needs distributions over sections")
    overlap = set(d1.context) & set(d2.context)
    if overlap:
        raise OverlappingContexts(f"contexts share {sorted(overlap)}")
    sr = d1.semiring
    weights = {}
    for s1, w1 in d1.items():
        for s2, w2 in d2.items():
            weights[glue(s1, s2)] = sr.mul(w1, w2)
    return Distribution(d1.context + d2.context, weights, sr, check=sr.exact)


def check_same_semiring(*ds: Distribution) -> Semiring:
    kinds = {d.semiring.name for d in ds}
    if len(kinds) > 1:
        raise SemiringMismatch(f"mixed carriers {sorted(kinds)}")
    return ds[0].semiring


__all__ = [
    "ETA", "Semiring", "PROBABILITY", "BOOLEAN", "REAL", "SEMIRINGS", "Distribution",
    "DistributionError", "SemiringMismatch", "PartialMap", "OverlappingContexts", "NotNormalized",
    "NotASubcontext", "ScenarioError", "point", "uniform", "marginal", "push_forward", "product",
    "check_same_semiring",
]
