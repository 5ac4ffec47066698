"""Exact Minkowski geometry and a lattice local net of qudits.

Points carry rational coordinates; every causal predicate is decided in exact
arithmetic. The local algebra of a double cone is the full matrix algebra on
the lattice sites inside the (closed) cone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Hashable, NamedTuple, Sequence

import numpy as np

from .distribution import ETA, marginal
from .empirical import EmpiricalModel, is_no_signalling
from .quantum import (
    ObservableContext, QuantumState, as_state, born_model, commutator, embed, pauli,
    reduced_density, spin_direction, spin_observable,
)
from .verdict import Verdict


class GeometryError(ValueError):
    pass


class NotOnePlusOne(GeometryError):
    pass


class NetError(ValueError):
    pass


class RegionsShareSites(NetError):
    pass


class RegionsNotSeparated(NetError):
    pass


class NonCommutingAcrossRegions(NetError):
    pass


class ZeroProjection(NetError):
    pass


class OverlappingFactors(NetError):
    pass


class InvalidState(NetError):
    pass


class SpacetimePoint(NamedTuple):
    t: Fraction
    x: Fraction
    y: Fraction = Fraction(0)
    z: Fraction = Fraction(0)

    @classmethod
    def of(cls, *coords) -> "SpacetimePoint":
        if not 2 <= len(coords) <= 4:
            raise GeometryError(f"expected 2 to 4 coordinates, got {len(coords)}")
        return cls(*(Fraction(c) for c in coords))

    def __sub__(self, other):
        return SpacetimePoint(*(a - b for a, b in zip(self, other)))

    def __add__(self, other):
        return SpacetimePoint(*(a + b for a, b in zip(self, other)))

    @property
    def u(self) -> Fraction:
        return self.t - self.x

    @property
    def v(self) -> Fraction:
        return self.t + self.x


def minkowski_sq(p: Sequence) -> Fraction:
    """x0^2 - (x1^2 + x2^2 + x3^2); positive for timelike vectors."""
    t, *space = p
    return Fraction(t) ** 2 - sum(Fraction(s) ** 2 for s in space)


def in_closed_future(p: SpacetimePoint) -> bool:
    return minkowski_sq(p) >= 0 and p.t >= 0


@dataclass(frozen=True)
class DoubleCone:
    """(base + V+) intersect (apex - V+), with closed boundary for site membership."""

    base: SpacetimePoint
    apex: SpacetimePoint

    def __post_init__(self):
        d = self.apex - self.base
        if not (minkowski_sq(d) > 0 and d.t > 0):
            raise GeometryError(f"apex {self.apex} is not in the open future of base {self.base}")

    @classmethod
    def diamond(cls, t, x, radius) -> "DoubleCone":
        """1+1D double cone centred at (t, x) with temporal half-height ``radius``."""
        r = Fraction(radius)
        return cls(SpacetimePoint.of(Fraction(t) - r, x), SpacetimePoint.of(Fraction(t) + r, x))

    def contains(self, p: SpacetimePoint) -> bool:
        return in_closed_future(p - self.base) and in_closed_future(self.apex - p)

    def contains_cone(self, other: "DoubleCone") -> bool:
        return in_closed_future(other.base - self.base) and in_closed_future(self.apex - other.apex)

    def translate(self, g: Sequence) -> "DoubleCone":
        g = SpacetimePoint.of(*g)
        return DoubleCone(self.base + g, self.apex + g)

    @property
    def one_plus_one(self) -> bool:
        return all(c == 0 for p in (self.base, self.apex) for c in (p.y, p.z))

    def lightcone_box(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        """(u_min, u_max, v_min, v_max) with u = t - x, v = t + x."""
        if not self.one_plus_one:
            raise NotOnePlusOne("lightcone boxes exist only for 1+1D cones")
        return self.base.u, self.apex.u, self.base.v, self.apex.v

    def corners(self) -> list[SpacetimePoint]:
        u0, u1, v0, v1 = self.lightcone_box()
        return [_from_uv(u, v) for u in (u0, u1) for v in (v0, v1)]

    def sample(self, per_side: int) -> list[SpacetimePoint]:
        """Rational grid of (per_side + 1)^2 points in lightcone coordinates, corners included."""
        u0, u1, v0, v1 = self.lightcone_box()
        k = per_side
        return [_from_uv(u0 + (u1 - u0) * i / k, v0 + (v1 - v0) * j / k)
                for i in range(k + 1) for j in range(k + 1)]


def _from_uv(u: Fraction, v: Fraction) -> SpacetimePoint:
    return SpacetimePoint((u + v) / 2, (v - u) / 2)


def spacelike_separated(s1: Sequence[SpacetimePoint], s2: Sequence[SpacetimePoint]) -> Verdict:
    """Every pair has strictly negative Minkowski square."""
    for p in s1:
        for q in s2:
            if not minkowski_sq(p - q) < 0:
                return Verdict(False, (p, q))
    return Verdict(True)


def separation_gaps(o1: DoubleCone, o2: DoubleCone) -> tuple[Fraction, Fraction] | None:
    """Gaps between the u- and v-intervals when they sit in opposite orders."""
    a, b = o1.lightcone_box(), o2.lightcone_box()
    # o1 left of o2 in u and right of it in v, or the mirror image
    for (p, q) in ((a, b), (b, a)):
        gap_u = q[0] - p[1]
        gap_v = p[2] - q[3]
        if gap_u >= 0 and gap_v >= 0:
            return gap_u, gap_v
    return None


def strictly_spacelike_separated(o1: DoubleCone, o2: DoubleCone, eps) -> Verdict:
    """Spacelike separation that survives every translation with |dt|, |dx| <= eps.

    Such a translation moves both lightcone coordinates by at most 2 eps, so
    the boxes must be disjoint in opposite orders with both gaps above 2 eps.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise GeometryError("eps must be positive")
    gaps = separation_gaps(o1, o2)
    if gaps is None:
        return Verdict(False, None, {"gaps": None})
    ok = min(gaps) > 2 * eps
    return Verdict(ok, None if ok else gaps, {"gaps": gaps})


def separation_margin(o1: DoubleCone, o2: DoubleCone) -> Fraction | None:
    """Largest eps for which the cones stay spacelike, None when there is none."""
    gaps = separation_gaps(o1, o2)
    if gaps is None or min(gaps) == 0:
        return None
    return min(gaps) / 2


class LatticeNet:
    """Sites with rational coordinates, one qudit each, and a global state."""

    def __init__(self, sites: Sequence[tuple[Hashable, SpacetimePoint]], state, local_dim: int = 2):
        sites = sorted(((sid, SpacetimePoint.of(*p)) for sid, p in sites), key=lambda s: s[0])
        ids = [sid for sid, _ in sites]
        if len(set(ids)) != len(ids):
            raise NetError("duplicate site ids")
        points = [p for _, p in sites]
        if len(set(points)) != len(points):
            raise NetError("two sites share a point")
        self.sites = tuple(sites)
        self.local_dim = local_dim
        self.position = {sid: k for k, sid in enumerate(ids)}
        self.point = dict(sites)
        self.state = as_state(state)
        if self.state.dim != local_dim ** len(sites):
            raise NetError(f"state of dimension {self.state.dim} for {len(sites)} sites of dimension {local_dim}")

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def site_ids(self) -> tuple:
        return tuple(sid for sid, _ in self.sites)

    def region_sites(self, cone: DoubleCone) -> tuple:
        return tuple(sid for sid, p in self.sites if cone.contains(p))

    def points(self, site_ids) -> list[SpacetimePoint]:
        return [self.point[s] for s in site_ids]

    def operator(self, op: np.ndarray, site_ids: Sequence) -> np.ndarray:
        """Embed an operator on the given sites (in the given order)."""
        return embed(np.asarray(op, dtype=complex), [self.position[s] for s in site_ids],
                     self.n_sites, self.local_dim)

    def local_basis(self) -> list[np.ndarray]:
        if self.local_dim == 2:
            return [pauli(i) for i in (1, 2, 3)]
        return _matrix_units(self.local_dim)

    def generators(self, site_ids) -> list[tuple[Hashable, int, np.ndarray]]:
        """Single-site generators (site, index, embedded matrix) of the algebra on ``site_ids``."""
        return [(s, k, self.operator(g, [s])) for s in site_ids for k, g in enumerate(self.local_basis())]

    def local_state(self, site_ids) -> np.ndarray:
        keep = sorted(self.position[s] for s in site_ids)
        return reduced_density(self.state.density, keep, self.n_sites, self.local_dim)


def _matrix_units(d: int) -> list[np.ndarray]:
    out = []
    for i in range(d):
        for j in range(d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = 1
            out.append(m)
    return out


def _cones_spacelike(net: LatticeNet, o1: DoubleCone, o2: DoubleCone) -> bool:
    if o1.one_plus_one and o2.one_plus_one:
        gaps = separation_gaps(o1, o2)
        return gaps is not None and min(gaps) > 0
    s1, s2 = net.region_sites(o1), net.region_sites(o2)
    return bool(s1) and bool(s2) and bool(spacelike_separated(net.points(s1), net.points(s2)))


def _commute_exactly(gens1, gens2):
    for s1, k1, g1 in gens1:
        for s2, k2, g2 in gens2:
            if np.any(commutator(g1, g2) != 0):
                return (s1, k1, s2, k2)
    return None


@dataclass
class NetAxiomReport:
    isotony_checked: int = 0
    isotony_failures: list = field(default_factory=list)
    microcausality_checked: int = 0
    microcausality_failures: list = field(default_factory=list)
    covariance: str = "not_requested"
    covariance_checked: int = 0
    covariance_failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.isotony_failures or self.microcausality_failures or self.covariance_failures)


def check_net_axioms(net: LatticeNet, cones: Sequence[DoubleCone], translation: Sequence | None = None) -> NetAxiomReport:
    report = NetAxiomReport()
    region = [net.region_sites(c) for c in cones]
    for i, j in product(range(len(cones)), repeat=2):
        if i != j and cones[j].contains_cone(cones[i]):
            report.isotony_checked += 1
            if not set(region[i]) <= set(region[j]):
                report.isotony_failures.append((i, j))
    for i, j in combinations(range(len(cones)), 2):
        if not (region[i] and region[j]) or not _cones_spacelike(net, cones[i], cones[j]):
            continue
        report.microcausality_checked += 1
        bad = _commute_exactly(net.generators(region[i]), net.generators(region[j]))
        if set(region[i]) & set(region[j]) or bad is not None:
            report.microcausality_failures.append((i, j, bad))
    if translation is not None:
        report.covariance, report.covariance_checked = _check_covariance(
            net, cones, region, translation, report.covariance_failures)
    return report


def _check_covariance(net, cones, region, translation, failures) -> tuple[str, int]:
    """Compare sites(O) + g with sites(O + g) for every cone the lattice carries both ways."""
    g = SpacetimePoint.of(*translation)
    by_point = {p: sid for sid, p in net.sites}
    checked = 0
    for k, cone in enumerate(cones):
        forward = [by_point.get(net.point[s] + g) for s in region[k]]
        moved = net.region_sites(cone.translate(g))
        if None in forward or any(by_point.get(net.point[s] - g) is None for s in moved):
            continue
        checked += 1
        if sorted(forward) != sorted(moved):
            failures.append(k)
    if not checked:
        return "not_applicable", 0
    return ("ok" if not failures else "failed"), checked


def _as_projection(net: LatticeNet, op, site_ids) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape[0] != net.local_dim ** len(site_ids):
        raise OverlappingFactors(f"projection of shape {op.shape} does not fit sites {list(site_ids)}")
    if np.max(np.abs(op)) < 1e-12:
        raise ZeroProjection("projection is zero")
    if np.max(np.abs(op @ op - op)) > 1e-10 or np.max(np.abs(op - op.conj().T)) > 1e-10:
        raise NetError("operator is not an orthogonal projection")
    return net.operator(op, site_ids)


def schlieder_check(net: LatticeNet, sites1: Sequence, e, sites2: Sequence, f, threshold: float = 1e-8) -> Verdict:
    """Is range(e) intersect range(f) nonzero for local projections on disjoint sites?"""
    if set(sites1) & set(sites2):
        raise OverlappingFactors(f"sites {sorted(set(sites1) & set(sites2))} are shared")
    E = _as_projection(net, e, sites1)
    F = _as_projection(net, f, sites2)
    eye = np.eye(E.shape[0])
    sv = np.linalg.svd((eye - E) + (eye - F), compute_uv=False)
    dim = int(np.sum(sv < threshold))
    return Verdict(dim > 0, None, {"dimension": dim})


def split_check(net: LatticeNet, o1: DoubleCone, o2: DoubleCone) -> Verdict:
    """Exhibit a type I factor between A(o1) and the commutant of A(o2).

    The factor is the full matrix algebra on every site outside o2; the
    inclusions are verified through exact generator commutation.
    """
    s1, s2 = net.region_sites(o1), net.region_sites(o2)
    if set(s1) & set(s2):
        raise RegionsShareSites(f"regions share sites {sorted(set(s1) & set(s2))}")
    middle = tuple(s for s in net.site_ids if s not in s2)
    outside_middle = tuple(s for s in net.site_ids if s not in middle)
    # N1 in M iff N1 commutes with M' = A(sites outside M); M in N2' iff M commutes with N2
    n1_in_m = set(s1) <= set(middle) and _commute_exactly(net.generators(s1), net.generators(outside_middle)) is None
    m_in_n2c = _commute_exactly(net.generators(middle), net.generators(s2)) is None
    ok = n1_in_m and m_in_n2c
    return Verdict(ok, middle, {"n1_in_m": n1_in_m, "m_in_n2_commutant": m_in_n2c})


def _pauli_strings(k: int, d: int) -> list[np.ndarray]:
    basis = [np.eye(d, dtype=complex)] + ([pauli(i) for i in (1, 2, 3)] if d == 2 else _matrix_units(d))
    out = []
    for combo in product(basis, repeat=k):
        m = np.eye(1, dtype=complex)
        for b in combo:
            m = np.kron(m, b)
        out.append(m)
    return out


@dataclass(frozen=True)
class LocalStateMap:
    """T(X) = sum_j C_j* X C_j with Kraus operators on the sites of o1."""

    sites: tuple
    phi: np.ndarray
    kraus: tuple[np.ndarray, ...]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return sum(C.conj().T @ X @ C for C in self.kraus)


def local_state_map(net: LatticeNet, sites1: Sequence, phi) -> LocalStateMap:
    k = len(sites1)
    dim = net.local_dim ** k
    try:
        rho = QuantumState.mixed(phi).density
    except ValueError as exc:
        raise InvalidState(str(exc)) from None
    if rho.shape != (dim, dim):
        raise InvalidState(f"state of shape {rho.shape} on {k} sites")
    probs, vecs = np.linalg.eigh(rho)
    kraus = []
    for p, psi in zip(probs, vecs.T):
        if p <= 1e-15:
            continue
        for l in range(dim):
            e_l = np.zeros(dim, dtype=complex)
            e_l[l] = 1
            kraus.append(net.operator(np.sqrt(p) * np.outer(psi, e_l.conj()), sites1))
    return LocalStateMap(tuple(sites1), rho, tuple(kraus))


def partial_evaluation(net: LatticeNet, sites1: Sequence, phi: np.ndarray, X: np.ndarray) -> np.ndarray:
    """I on sites1 tensor Tr_1[(phi tensor I) X], computed by reshaping rather than Kraus sums."""
    d, n = net.local_dim, net.n_sites
    front = [net.position[s] for s in sites1]
    rest = [k for k in range(n) if k not in front]
    order = front + rest
    k = len(front)
    da, db = d ** k, d ** (n - k)
    Xp = X.reshape([d] * (2 * n)).transpose(order + [n + o for o in order]).reshape(da * db, da * db)
    Y = np.einsum("ij,jbic->bc", phi, Xp.reshape(da, db, da, db))
    out = np.kron(np.eye(da), Y).reshape([d] * (2 * n))
    inverse = list(np.argsort(order))
    return out.transpose(inverse + [n + o for o in inverse]).reshape(d ** n, d ** n)


def local_state_check(net: LatticeNet, o1: DoubleCone, o2: DoubleCone, phi, tol: float = 1e-10) -> Verdict:
    """Verify the local-state identities for T built from phi on A(o1).

    Checks T(I) = I, T(X) = phi(X) I on a basis of A(o1), T(AB) = T(A) B for
    single-site A anywhere and B on sites outside both regions, and that the
    Kraus operators lie in A(o2) when o1's sites are inside o2's.
    """
    s1, s2 = net.region_sites(o1), net.region_sites(o2)
    T = local_state_map(net, s1, phi)
    eye = np.eye(net.state.dim, dtype=complex)
    residuals = {"unital": float(np.max(np.abs(T(eye) - eye)))}

    worst = 0.0
    for X in _pauli_strings(len(s1), net.local_dim):
        expected = np.trace(T.phi @ X) * eye
        worst = max(worst, float(np.max(np.abs(T(net.operator(X, s1)) - expected))))
    residuals["evaluation"] = worst

    outside = [s for s in net.site_ids if s not in s2 and s not in s1]
    A_gens = [eye] + [g for _, _, g in net.generators(net.site_ids)]
    worst = 0.0
    for _, _, B in net.generators(outside):
        for A in A_gens:
            worst = max(worst, float(np.max(np.abs(T(A @ B) - T(A) @ B))))
    residuals["bimodule"] = worst

    worst = 0.0
    for A in A_gens:
        worst = max(worst, float(np.max(np.abs(T(A) - partial_evaluation(net, s1, T.phi, A)))))
    residuals["kraus_vs_partial"] = worst

    details = {"residuals": residuals, "outside_sites": tuple(outside)}
    if set(s1) <= set(s2):
        off = [s for s in net.site_ids if s not in s2]
        details["kraus_in_o2"] = all(
            _commute_exactly([(None, 0, C)], net.generators(off)) is None for C in T.kraus)
    ok = max(residuals.values()) <= tol and details.get("kraus_in_o2", True)
    return Verdict(ok, None, details)


@dataclass(frozen=True)
class Setting:
    label: str
    matrix: np.ndarray


def spin_settings(angles: Sequence[float]) -> list[Setting]:
    """Single-qubit spin observables in the x-z plane, labelled by angle."""
    return [Setting(f"{a:g}", spin_observable(spin_direction(a))) for a in angles]


@dataclass
class SpacetimeSheafAssignment:
    """Empirical models indexed by tuples of region indices."""

    names: tuple[str, ...]
    models: dict[tuple[int, ...], EmpiricalModel]
    verdicts: dict[tuple[int, ...], Verdict]

    def restriction_consistent(self, tol: float = ETA) -> Verdict:
        """Model on a sub-tuple equals the marginal of the model on any super-tuple."""
        for big, model in self.models.items():
            for small in self.models:
                if small == big or not set(small) < set(big):
                    continue
                sub = self.models[small]
                for ctx in model.scenario.cover:
                    keep = [m for m in ctx if m.split(":", 1)[0] in {self.names[i] for i in small}]
                    target = sub[keep]
                    if not (marginal(model[ctx], keep) == target):
                        return Verdict(False, (big, small, ctx))
        return Verdict(True)


def spacetime_sheaf(net: LatticeNet, regions: Sequence[DoubleCone], settings: Sequence[Sequence[Setting]],
                    names: Sequence[str] | None = None) -> SpacetimeSheafAssignment:
    names = tuple(names) if names is not None else tuple(f"R{k}" for k in range(len(regions)))
    if len(names) != len(regions) or len(settings) != len(regions):
        raise NetError("need one name and one setting list per region")
    sites = [net.region_sites(r) for r in regions]
    for k, s in enumerate(sites):
        if not s:
            raise NetError(f"region {names[k]} contains no sites")
    for i, j in combinations(range(len(regions)), 2):
        if set(sites[i]) & set(sites[j]):
            raise RegionsNotSeparated(f"{names[i]} and {names[j]} share sites")
        sep = spacelike_separated(net.points(sites[i]), net.points(sites[j]))
        if not sep:
            raise RegionsNotSeparated(f"{names[i]} and {names[j]} are not spacelike separated: {sep.witness}")

    embedded = [[(f"{names[k]}:{st.label}", net.operator(st.matrix, sites[k])) for st in settings[k]]
                for k in range(len(regions))]
    for i, j in combinations(range(len(regions)), 2):
        for li, a in embedded[i]:
            for lj, b in embedded[j]:
                if np.any(commutator(a, b) != 0):
                    raise NonCommutingAcrossRegions(f"{li} and {lj} do not commute")

    models, verdicts = {}, {}
    for size in range(1, len(regions) + 1):
        for tup in combinations(range(len(regions)), size):
            contexts = []
            for choice in product(*(embedded[k] for k in tup)):
                contexts.append(ObservableContext(tuple(l for l, _ in choice), tuple(m for _, m in choice)))
            model = born_model(net.state, contexts, [l for k in tup for l, _ in embedded[k]])
            verdict = is_no_signalling(model)
            if not verdict:
                raise NetError(f"region tuple {tup} produced a signalling model: {verdict.witness}")
            models[tup] = model
            verdicts[tup] = verdict
    return SpacetimeSheafAssignment(names, models, verdicts)
