"""Pairwise correlation tables, the three-setting Bell inequality and
hidden-variable sample spaces built from response functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Hashable, Mapping, Sequence

from .distribution import PROBABILITY, Distribution
from .empirical import EmpiricalModel
from .lp import FarkasCertificate, solve_feasibility
from .scenario import Assignment, MeasurementScenario

PLUS, MINUS = "+1", "-1"


class MissingPair(KeyError):
    pass


class CorrelationTable:
    """Symmetric table of E(X_x X_y) keyed by unordered label pairs."""

    def __init__(self, values: Mapping | None = None):
        self._values: dict[frozenset, object] = {}
        for key, v in (values or {}).items():
            x, y = key if not isinstance(key, str) else key.split(",")
            self[x, y] = v

    def __setitem__(self, pair, value):
        x, y = pair
        if not isinstance(value, (int, Fraction)):
            value = float(value)
        if abs(value) > 1 + 1e-12:
            raise ValueError(f"correlation {value} for ({x}, {y}) outside [-1, 1]")
        self._values[frozenset((x, y))] = value

    def __getitem__(self, pair):
        x, y = pair
        try:
            return self._values[frozenset((x, y))]
        except KeyError:
            raise MissingPair(f"no correlation for ({x}, {y})") from None

    def __contains__(self, pair):
        return frozenset(pair) in self._values

    def pairs(self) -> list[tuple[str, str]]:
        return sorted((min(k), max(k)) for k in self._values)

    def as_dict(self) -> dict:
        return {f"{x},{y}": self[x, y] for x, y in self.pairs()}


@dataclass(frozen=True)
class BellCheck:
    holds: bool
    lhs: object
    rhs: object
    variant: str

    def __bool__(self):
        return self.holds


def check_bell_inequality(t: CorrelationTable, a: str, b: str, c: str, variant: str = "same") -> BellCheck:
    """Evaluate |E(ab) - E(cb)| <= 1 - E(ac).

    With ``variant="same"`` the right-hand side is 1 - t[a, c], the reading in
    which the table already holds inner products <x, y> (singlet substituted).
    With ``variant="cross"`` it is 1 + t[a, c], for tables whose (a, c) entry
    is a cross-particle correlation.
    """
    lhs = abs(t[a, b] - t[c, b])
    if variant == "same":
        rhs = 1 - t[a, c]
    elif variant == "cross":
        rhs = 1 + t[a, c]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return BellCheck(lhs <= rhs, lhs, rhs, variant)


@dataclass(frozen=True)
class CorrelationLP:
    feasible: bool
    atoms: tuple[tuple[int, ...], ...]
    weights: tuple[Fraction, ...] | None
    certificate: FarkasCertificate | None
    targets: dict

    def __bool__(self):
        return self.feasible


def correlation_lp(labels: Sequence[str], targets: Mapping[tuple[str, str], object],
                   partner_anticorrelated: bool = True) -> CorrelationLP:
    """Is there a distribution on {-1, 1}^n with prescribed pair correlations?

    ``targets[(x, y)]`` is the required E(X_x^(1) X_y^(2)) for distinct labels.
    With ``partner_anticorrelated`` the second particle is tied to the first by
    X_y^(2) = -X_y^(1) (the diagonal E(X_x^(1) X_x^(2)) = -1 of the singlet), so
    every atom is a triple of first-particle values. Without it the targets
    constrain E(X_x X_y) of a single family of variables directly.
    """
    labels = list(labels)
    atoms = tuple(product((-1, 1), repeat=len(labels)))
    sign = -1 if partner_anticorrelated else 1
    A = [[1] * len(atoms)]
    b = [Fraction(1)]
    keys = {}
    for (x, y), v in targets.items():
        if x == y:
            raise ValueError("targets range over distinct pairs only")
        i, j = labels.index(x), labels.index(y)
        A.append([sign * w[i] * w[j] for w in atoms])
        b.append(Fraction(v))
        keys[(x, y)] = Fraction(v)
    res = solve_feasibility(A, b)
    return CorrelationLP(res.feasible, atoms, res.x, res.certificate, keys)


@dataclass
class SampleSpaceFactorization:
    """Hidden values, per-party setting sets and response tables.

    ``responses[i][(lam, m)]`` is party i's outcome (+1 or -1) for hidden
    value lam under setting m; a response never sees other parties' settings.
    """

    lambda_set: tuple
    setting_sets: tuple[tuple[str, ...], ...]
    responses: tuple[Mapping[tuple[Hashable, str], int], ...]

    def __post_init__(self):
        self.lambda_set = tuple(self.lambda_set)
        self.setting_sets = tuple(tuple(s) for s in self.setting_sets)
        if len(self.responses) != len(self.setting_sets):
            raise ValueError("one response table per party")
        tables = []
        for i, resp in enumerate(self.responses):
            if callable(resp):
                resp = {(lam, m): resp(lam, m) for lam in self.lambda_set for m in self.setting_sets[i]}
            for lam in self.lambda_set:
                for m in self.setting_sets[i]:
                    if resp.get((lam, m)) not in (-1, 1):
                        raise ValueError(f"party {i} response at ({lam!r}, {m!r}) must be +1 or -1")
            tables.append(dict(resp))
        self.responses = tuple(tables)

    @classmethod
    def from_functions(cls, lambda_set, setting_sets, functions: Sequence[Callable]):
        return cls(lambda_set, setting_sets, tuple(functions))

    def label(self, party: int, setting: str) -> str:
        return f"{party}:{setting}"

    def scenario(self) -> MeasurementScenario:
        measurements = [self.label(i, m) for i, ms in enumerate(self.setting_sets) for m in ms]
        cover = [tuple(self.label(i, m) for i, m in enumerate(choice)) for choice in product(*self.setting_sets)]
        return MeasurementScenario(tuple(measurements), (MINUS, PLUS), tuple(cover))


@dataclass(frozen=True)
class LocalityEvaluation:
    model: EmpiricalModel
    correlations: CorrelationTable
    joint: Distribution


def _outcome(v: int) -> str:
    return PLUS if v == 1 else MINUS


def evaluate_locality_assumption(f: SampleSpaceFactorization, lambda_dist: Mapping,
                                 setting_dists: Sequence[Mapping]) -> LocalityEvaluation:
    """Outcome statistics of X^(i) = F^(i)(lambda, m_i) under the product measure.

    ``joint`` is the product measure on hidden values times settings. The
    empirical model conditions on settings, so it depends on the hidden-value
    distribution only; correlations are keyed by pairs of party-tagged
    measurement labels.
    """
    lam_w = {lam: Fraction(w) for lam, w in lambda_dist.items()}
    set_w = [{m: Fraction(w) for m, w in d.items()} for d in setting_dists]
    if sum(lam_w.values()) != 1 or any(sum(d.values()) != 1 for d in set_w):
        raise ValueError("hidden-value and setting distributions must be normalized")
    scenario = f.scenario()
    joint = {}
    for lam, w in lam_w.items():
        for choice in product(*(sorted(d.items()) for d in set_w)):
            joint[(lam,) + tuple(m for m, _ in choice)] = w * _prod(v for _, v in choice)
    table = {}
    for choice in product(*f.setting_sets):
        ctx = tuple(f.label(i, m) for i, m in enumerate(choice))
        weights = {}
        for lam, w in lam_w.items():
            vals = tuple(_outcome(f.responses[i][(lam, m)]) for i, m in enumerate(choice))
            s = Assignment(ctx, vals)
            weights[s] = weights.get(s, Fraction(0)) + w
        table[ctx] = Distribution(ctx, weights)
    model = EmpiricalModel(scenario, table)
    corr = CorrelationTable()
    parties = range(len(f.setting_sets))
    for i, j in combinations(parties, 2):
        for mi in f.setting_sets[i]:
            for mj in f.setting_sets[j]:
                corr[f.label(i, mi), f.label(j, mj)] = sum(
                    (w * f.responses[i][(lam, mi)] * f.responses[j][(lam, mj)] for lam, w in lam_w.items()),
                    start=Fraction(0))
    return LocalityEvaluation(model, corr, Distribution(None, joint, PROBABILITY))


def _prod(values):
    acc = Fraction(1)
    for v in values:
        acc *= v
    return acc


def inner_product_table(vectors: Mapping[str, Sequence]) -> CorrelationTable:
    """Table of <x, y> for labelled vectors (exact when entries are rational)."""
    t = CorrelationTable()
    for x, y in combinations(vectors, 2):
        t[x, y] = sum((p * q for p, q in zip(vectors[x], vectors[y])), start=0)
    return t

