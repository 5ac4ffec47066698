"""Empirical models, hidden-variable models and the local-model LP.

An empirical model assigns a distribution to every maximal context. The
local-model question is decided by an exact LP whose columns are the
deterministic global assignments X -> O.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Iterable, Mapping, Sequence

from .distribution import (
    ETA, PROBABILITY, REAL, Distribution, DistributionError, check_same_semiring,
    marginal, point,
)
from .lp import FarkasCertificate, solve_feasibility
from .oracle import least_norm_correction, oracle_feasible
from .scenario import Assignment, Context, MeasurementScenario, restrict
from .verdict import Verdict

DEFAULT_DENOMINATOR_BOUND = 10**6


class ModelError(ValueError):
    pass


class ScenarioMismatch(ModelError):
    pass


class NonRationalModel(ModelError):
    pass


class EmpiricalModel:
    """One normalized distribution per maximal context of a scenario."""

    def __init__(self, scenario: MeasurementScenario, table: Mapping[Iterable[str], Distribution]):
        self.scenario = scenario
        resolved: dict[Context, Distribution] = {}
        for members, dist in table.items():
            ctx = scenario.context(members)
            if ctx not in scenario.cover:
                raise ModelError(f"{list(ctx)} is not a maximal context")
            if ctx in resolved:
                raise ModelError(f"context {list(ctx)} given twice")
            if dist.context is None or set(dist.context) != set(ctx):
                raise ModelError(f"distribution for {list(ctx)} lives on {dist.context}")
            for s in dist.support():
                if any(o not in scenario.outcomes for o in s.values):
                    raise ModelError(f"section {s} uses an unknown outcome")
            resolved[ctx] = dist
        missing = [list(c) for c in scenario.cover if c not in resolved]
        if missing:
            raise ModelError(f"no distribution for contexts {missing}")
        if resolved:
            check_same_semiring(*resolved.values())
        self.table = {c: resolved[c] for c in scenario.cover}

    @property
    def semiring(self):
        return next(iter(self.table.values())).semiring

    def __getitem__(self, ctx) -> Distribution:
        return self.table[self.scenario.context(ctx)]

    def __eq__(self, other):
        if not isinstance(other, EmpiricalModel):
            return NotImplemented
        return self.scenario == other.scenario and self.table == other.table

    def weight(self, ctx, s: Assignment):
        return self[ctx][s]

    def possibilistic(self) -> "EmpiricalModel":
        return EmpiricalModel(self.scenario, {c: d.possibilistic() for c, d in self.table.items()})

    def as_float(self) -> "EmpiricalModel":
        return EmpiricalModel(self.scenario, {
            c: Distribution(c, {s: float(w) for s, w in d.items()}, REAL) for c, d in self.table.items()
        })


def model_from_global(scenario: MeasurementScenario, global_dist: Distribution) -> EmpiricalModel:
    """Empirical model induced by a distribution on global assignments."""
    return EmpiricalModel(scenario, {c: marginal(global_dist, c) for c in scenario.cover})


def product_model(scenario: MeasurementScenario, singles: Mapping[str, Distribution]) -> EmpiricalModel:
    """Every context gets the product of fixed single-measurement distributions."""
    table = {}
    for c in scenario.cover:
        sr = singles[c[0]].semiring
        weights = {}
        for s in scenario.sections(c):
            w = sr.one
            for m in c:
                w = sr.mul(w, singles[m][restrict(s, [m])])
            weights[s] = w
        table[c] = Distribution(c, weights, sr)
    return EmpiricalModel(scenario, table)


@dataclass(frozen=True)
class SignallingWitness:
    context: Context
    other: Context
    section: Assignment
    left: object
    right: object


def _first_disagreement(scenario, families, tol):
    """Scan cover pairs for overlap marginals that disagree."""
    for c1, c2 in combinations(scenario.cover, 2):
        d1, d2 = families[c1], families[c2]
        overlap = [m for m in c1 if m in c2]
        m1, m2 = marginal(d1, overlap), marginal(d2, overlap)
        sr = d1.semiring
        for s in scenario.sections(overlap):
            if not sr.equal(m1[s], m2[s], tol):
                return SignallingWitness(c1, c2, s, m1[s], m2[s])
    return None


def is_no_signalling(e: EmpiricalModel, tol: float = ETA) -> Verdict:
    witness = _first_disagreement(e.scenario, e.table, tol)
    return Verdict(witness is None, witness)


@dataclass
class HiddenVariableModel:
    scenario: MeasurementScenario
    lambda_weight: Distribution
    per_lambda: dict

    def __post_init__(self):
        if self.lambda_weight.context is not None:
            raise ModelError("hidden-variable weight must be a bare distribution")
        self.lambda_set = tuple(k for k, _ in self.lambda_weight.items())
        resolved = {}
        for (lam, ctx), dist in self.per_lambda.items():
            resolved[(lam, self.scenario.context(ctx))] = dist
        for lam in self.lambda_set:
            for c in self.scenario.cover:
                if (lam, c) not in resolved:
                    raise ModelError(f"no distribution for hidden value {lam!r} on {list(c)}")
        self.per_lambda = resolved

    def family(self, lam: Hashable) -> dict[Context, Distribution]:
        return {c: self.per_lambda[(lam, c)] for c in self.scenario.cover}

    def average(self) -> EmpiricalModel:
        """The empirical model this hidden-variable model realizes."""
        sr = self.lambda_weight.semiring
        table = {}
        for c in self.scenario.cover:
            acc = {}
            for lam, w in self.lambda_weight.items():
                for s, v in self.per_lambda[(lam, c)].items():
                    acc[s] = sr.add(acc.get(s, sr.zero), sr.mul(v, w))
            table[c] = Distribution(c, acc, sr, check=sr.exact)
        return EmpiricalModel(self.scenario, table)


def realizes(h: HiddenVariableModel, e: EmpiricalModel, tol: float = ETA) -> Verdict:
    """Check e_C(s) = sum over hidden values of h_C^lambda(s) h(lambda)."""
    if h.scenario != e.scenario:
        raise ScenarioMismatch("hidden-variable model and empirical model use different scenarios")
    exact = h.lambda_weight.semiring.exact and e.semiring.exact
    avg = h.average()
    for c in e.scenario.cover:
        for s in e.scenario.sections(c):
            left, right = avg[c][s], e[c][s]
            same = left == right if exact else abs(float(left) - float(right)) <= tol
            if not same:
                return Verdict(False, (c, s, left, right))
    return Verdict(True)


def is_parameter_independent(h: HiddenVariableModel, tol: float = ETA) -> Verdict:
    for lam in h.lambda_set:
        witness = _first_disagreement(h.scenario, h.family(lam), tol)
        if witness is not None:
            return Verdict(False, (lam, witness))
    return Verdict(True)


def is_factorizable(h: HiddenVariableModel, tol: float = ETA) -> Verdict:
    """Each h_C^lambda must equal the product of its single-measurement marginals."""
    for lam in h.lambda_set:
        for c in h.scenario.cover:
            d = h.per_lambda[(lam, c)]
            sr = d.semiring
            singles = {m: marginal(d, [m]) for m in c}
            for s in h.scenario.sections(c):
                factored = sr.one
                for m in c:
                    factored = sr.mul(factored, singles[m][restrict(s, [m])])
                if not sr.equal(d[s], factored, tol):
                    return Verdict(False, (lam, c, s, d[s], factored))
    return Verdict(True)


@dataclass(frozen=True)
class LocalModelResult:
    """Outcome of the local-model LP.

    On infeasibility ``certificate.y`` is indexed like ``rows``: the linear
    functional sum y[C, s] e_C(s) is positive on the model but nonpositive on
    every deterministic assignment, i.e. a violated Bell inequality.
    """

    feasible: bool
    scenario: MeasurementScenario
    columns: tuple[Assignment, ...]
    rows: tuple[tuple[Context, Assignment], ...]
    global_distribution: Distribution | None = None
    certificate: FarkasCertificate | None = None

    def __bool__(self):
        return self.feasible

    def bell_inequality(self) -> dict:
        if self.certificate is None:
            return {}
        return {row: y for row, y in zip(self.rows, self.certificate.y) if y != 0}

    def hidden_variable_model(self) -> HiddenVariableModel:
        """Deterministic hidden-variable model over the supported assignments."""
        if not self.feasible:
            raise ModelError("no local model to convert")
        per_lambda = {}
        for g, _ in self.global_distribution.items():
            for c in self.scenario.cover:
                per_lambda[(g, c)] = point(restrict(g, c))
        lam_weight = Distribution(None, dict(self.global_distribution.items()))
        return HiddenVariableModel(self.scenario, lam_weight, per_lambda)


def local_polytope_system(e: EmpiricalModel):
    """Columns, row labels and (A, b) for the local-model feasibility LP."""
    scenario = e.scenario
    columns = tuple(scenario.global_sections())
    rows, A, b = [], [], []
    for c in scenario.cover:
        restricted = [restrict(g, c) for g in columns]
        dist = e.table[c]
        for s in scenario.sections(c):
            rows.append((c, s))
            A.append([1 if r == s else 0 for r in restricted])
            b.append(dist[s])
    return columns, tuple(rows), A, b


def _require_rational(e: EmpiricalModel):
    if e.semiring is not PROBABILITY:
        raise NonRationalModel(f"model uses the {e.semiring.name} carrier; rationalize it first")


def find_local_model(e: EmpiricalModel) -> LocalModelResult:
    _require_rational(e)
    columns, rows, A, b = local_polytope_system(e)
    res = solve_feasibility(A, b)
    if not res.feasible:
        return LocalModelResult(False, e.scenario, columns, rows, certificate=res.certificate)
    weights = {g: x for g, x in zip(columns, res.x) if x != 0}
    return LocalModelResult(True, e.scenario, columns, rows,
                            Distribution(e.scenario.measurements, weights))


def oracle_local_model(e: EmpiricalModel) -> Distribution | None:
    """Same question answered by vertex enumeration instead of simplex."""
    _require_rational(e)
    columns, _, A, b = local_polytope_system(e)
    x = oracle_feasible(A, b)
    if x is None:
        return None
    return Distribution(e.scenario.measurements, {g: v for g, v in zip(columns, x) if v != 0})


@dataclass(frozen=True)
class RationalizationReport:
    denominator_bound: int
    max_perturbation: float
    repaired: bool
    no_signalling: bool


def rationalize(e: EmpiricalModel, denominator_bound: int = DEFAULT_DENOMINATOR_BOUND,
                repair: bool = True) -> tuple[EmpiricalModel, RationalizationReport]:
    """Exact-rational copy of a double-carrier model.

    Each weight becomes its best rational approximation with denominator at
    most ``denominator_bound`` and every context is renormalized. If the
    input was no-signalling within tolerance but rounding broke exact
    agreement on overlaps, a minimum-norm correction supported on the
    nonzero weights restores it exactly.
    """
    if e.semiring is PROBABILITY:
        return e, RationalizationReport(denominator_bound, 0.0, False, bool(is_no_signalling(e)))
    if e.semiring is not REAL:
        raise NonRationalModel("only double-carrier models can be rationalized")
    table = {}
    for c, d in e.table.items():
        approx = {s: Fraction(max(float(w), 0.0)).limit_denominator(denominator_bound) for s, w in d.items()}
        total = sum(approx.values())
        table[c] = Distribution(c, {s: w / total for s, w in approx.items()})
    out = EmpiricalModel(e.scenario, table)
    repaired = False
    if repair and is_no_signalling(e) and not is_no_signalling(out):
        fixed = _repair_no_signalling(out)
        if fixed is not None:
            out, repaired = fixed, True
    perturbation = max(
        abs(float(out[c][s]) - float(e[c][s])) for c in e.scenario.cover for s in e.scenario.sections(c)
    )
    return out, RationalizationReport(denominator_bound, perturbation, repaired, bool(is_no_signalling(out)))


def _repair_no_signalling(e: EmpiricalModel) -> EmpiricalModel | None:
    scenario = e.scenario
    entries = [(c, s) for c in scenario.cover for s in e.table[c].support()]
    index = {entry: k for k, entry in enumerate(entries)}
    current = [e.table[c][s] for c, s in entries]
    N, rhs = [], []

    def add_row(coeffs):
        row = [Fraction(0)] * len(entries)
        for entry, v in coeffs:
            if entry in index:
                row[index[entry]] += v
        N.append(row)
        rhs.append(-sum(r * x for r, x in zip(row, current)))

    for c in scenario.cover:
        add_row(((c, s), Fraction(1)) for s in e.table[c].support())
        rhs[-1] += 1
    for c1, c2 in combinations(scenario.cover, 2):
        overlap = [m for m in c1 if m in c2]
        if not overlap:
            continue
        for t in scenario.sections(overlap):
            coeffs = [((c1, s), Fraction(1)) for s in scenario.sections(c1) if restrict(s, overlap) == t]
            coeffs += [((c2, s), Fraction(-1)) for s in scenario.sections(c2) if restrict(s, overlap) == t]
            add_row(coeffs)
    delta = least_norm_correction(N, rhs)
    if delta is None:
        return None
    fixed = [x + d for x, d in zip(current, delta)]
    if any(v < 0 for v in fixed):
        return None
    table = {c: {} for c in scenario.cover}
    for (c, s), v in zip(entries, fixed):
        table[c][s] = v
    return EmpiricalModel(scenario, {c: Distribution(c, w) for c, w in table.items()})


def correlation(e: EmpiricalModel, x: str, y: str, values: Mapping[str, object] | None = None):
    """E(X_x X_y) from any context containing both measurements.

    ``values`` maps outcome labels to numbers; by default labels are parsed
    as numbers, with "0"/"1" read as +1/-1.
    """
    values = values or _default_values(e.scenario.outcomes)
    for c in e.scenario.cover:
        if x in c and y in c:
            d = marginal(e.table[c], [x, y])
            return sum((d[s] * values[s[x]] * values[s[y]] for s in d.support()),
                       start=d.semiring.zero)
    raise ModelError(f"no context contains both {x} and {y}")


def _default_values(outcomes: Sequence[str]) -> dict:
    if set(outcomes) <= {"0", "1"}:
        return {"0": 1, "1": -1}
    try:
        return {o: Fraction(o) for o in outcomes}
    except ValueError:
        raise ModelError(f"outcomes {outcomes} are not numeric; pass an explicit value map") from None


def chsh_value(e: EmpiricalModel, a: Sequence[str], b: Sequence[str], values=None):
    """Largest |E11 + E12 + E21 + E22 - 2 E_ij| over the four sign placements."""
    E = {(i, j): correlation(e, a[i], b[j], values) for i in range(2) for j in range(2)}
    total = sum(E.values())
    return max(abs(total - 2 * E[k]) for k in E)


__all__ = [
    "EmpiricalModel", "HiddenVariableModel", "LocalModelResult", "RationalizationReport",
    "SignallingWitness", "ModelError", "ScenarioMismatch", "NonRationalModel", "DistributionError",
    "is_no_signalling", "realizes", "is_parameter_independent", "is_factorizable",
    "find_local_model", "oracle_local_model", "local_polytope_system", "rationalize",
    "model_from_global", "product_model", "correlation", "chsh_value", "DEFAULT_DENOMINATOR_BOUND",
]
