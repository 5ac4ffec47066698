"""Finite-dimensional quantum realizations of empirical models.

Basis convention: e1 = (0, 1), e2 = (1, 0), so the singlet
(e1 x e2 - e2 x e1)/sqrt(2) is (0, -1, 1, 0)/sqrt(2) in the computational order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .distribution import REAL, Distribution
from .empirical import EmpiricalModel, is_no_signalling
from .scenario import Assignment, MeasurementScenario
from .verdict import Verdict

HERMITIAN_TOL = 1e-12
COMMUTE_TOL = 1e-10
CLUSTER_TOL = 1e-8
TSIRELSON = 2 * math.sqrt(2)


class QuantumError(ValueError):
    pass


class IndexOutOfRange(QuantumError):
    pass


class NotUnitVector(QuantumError):
    pass


class DimensionMismatch(QuantumError):
    pass


class InvalidState(QuantumError):
    pass


class NonCommutingContext(QuantumError):
    pass


class InconsistentSharedObservable(QuantumError):
    pass


class NonCommutingParties(QuantumError):
    pass


class SpectrumOutOfRange(QuantumError):
    pass


_PAULI = (
    np.array([[1, 0], [0, 1]], dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

E1 = np.array([0, 1], dtype=complex)
E2 = np.array([1, 0], dtype=complex)


def pauli(i: int) -> np.ndarray:
    if i not in (0, 1, 2, 3):
        raise IndexOutOfRange(f"Pauli index {i} not in 0..3")
    return _PAULI[i].copy()


def kron(*ops) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return a.shape[0] == a.shape[1] and np.max(np.abs(a - a.conj().T), initial=0.0) <= tol


def spin_direction(theta_deg: float) -> np.ndarray:
    """Unit vector at angle theta (degrees) from the z axis in the x-z plane."""
    t = math.radians(theta_deg)
    return np.array([math.sin(t), 0.0, math.cos(t)])


def spin_observable(a: Sequence[float]) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (3,) or abs(np.linalg.norm(a) - 1) > 1e-12:
        raise NotUnitVector(f"{a} is not a unit 3-vector")
    return a[0] * _PAULI[1] + a[1] * _PAULI[2] + a[2] * _PAULI[3]


def spin_projectors(a: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """(P+, P-) = ((I + S_a)/2, (I - S_a)/2)."""
    s = spin_observable(a)
    eye = np.eye(2, dtype=complex)
    return (eye + s) / 2, (eye - s) / 2


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A pure vector or a density matrix; ``density`` is always available."""

    density: np.ndarray
    vector: np.ndarray | None = None

    @classmethod
    def pure(cls, vector) -> "QuantumState":
        u = np.asarray(vector, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(u) - 1) > 1e-12:
            raise InvalidState(f"state vector has norm {np.linalg.norm(u)}")
        return cls(np.outer(u, u.conj()), u)

    @classmethod
    def mixed(cls, rho) -> "QuantumState":
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidState("density matrix must be square")
        if not is_hermitian(rho):
            raise InvalidState("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1) > 1e-12:
            raise InvalidState(f"density matrix has trace {np.trace(rho).real}")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise InvalidState("density matrix is not positive semidefinite")
        return cls(rho)

    @property
    def dim(self) -> int:
        return self.density.shape[0]


def as_state(state) -> QuantumState:
    if isinstance(state, QuantumState):
        return state
    arr = np.asarray(state)
    return QuantumState.pure(arr) if arr.ndim == 1 else QuantumState.mixed(arr)


def singlet_state() -> QuantumState:
    return QuantumState.pure((np.kron(E1, E2) - np.kron(E2, E1)) / math.sqrt(2))


def maximally_mixed(dim: int) -> QuantumState:
    return QuantumState.mixed(np.eye(dim, dtype=complex) / dim)


def expectation(state, A: np.ndarray) -> complex:
    """<u, A u> for pure states, Tr(rho A) otherwise."""
    state = as_state(state)
    A = np.asarray(A)
    if A.shape != (state.dim, state.dim):
        raise DimensionMismatch(f"operator of shape {A.shape} on a {state.dim}-dimensional state")
    if state.vector is not None:
        u = state.vector
        return complex(np.vdot(u, A @ u))
    return complex(np.trace(state.density @ A))


def embed(op: np.ndarray, sites: Sequence[int], n_sites: int, d: int = 2) -> np.ndarray:
    """Lift an operator on the listed sites (in that order) to n_sites factors."""
    sites = list(sites)
    k = len(sites)
    if op.shape != (d**k, d**k):
        raise DimensionMismatch(f"operator of shape {op.shape} on {k} sites of dimension {d}")
    rest = [s for s in range(n_sites) if s not in sites]
    full = np.kron(op, np.eye(d ** len(rest), dtype=complex))
    inv = list(np.argsort(sites + rest))
    t = full.reshape([d] * (2 * n_sites)).transpose(inv + [n_sites + i for i in inv])
    return t.reshape(d**n_sites, d**n_sites)


def reduced_density(rho: np.ndarray, keep: Sequence[int], n_sites: int, d: int = 2) -> np.ndarray:
    """Partial trace onto ``keep`` (sorted)."""
    keep = sorted(keep)
    t = np.asarray(rho).reshape([d] * (2 * n_sites))
    traced = [s for s in range(n_sites) if s not in keep]
    for s in sorted(traced, reverse=True):
        t = np.trace(t, axis1=s, axis2=s + t.ndim // 2)
    k = len(keep)
    return t.reshape(d**k, d**k)


def _label(value: float) -> str:
    v = round(value, 6) + 0.0
    return f"{v:+g}"


@dataclass(eq=False)
class ObservableContext:
    """Labelled pairwise-commuting Hermitian matrices."""

    labels: tuple[str, ...]
    matrices: tuple[np.ndarray, ...]
    _joint: dict | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.matrices = tuple(np.asarray(m, dtype=complex) for m in self.matrices)
        if len(self.labels) != len(self.matrices) or not self.labels:
            raise QuantumError("context needs one matrix per label")
        if len(set(self.labels)) != len(self.labels):
            raise QuantumError(f"repeated labels in {self.labels}")
        dims = {m.shape for m in self.matrices}
        if len(dims) != 1:
            raise DimensionMismatch(f"mixed shapes {dims} in one context")
        for lab, m in zip(self.labels, self.matrices):
            if not is_hermitian(m):
                raise QuantumError(f"observable {lab} is not Hermitian")
        for i in range(len(self.matrices)):
            for j in range(i + 1, len(self.matrices)):
                c = commutator(self.matrices[i], self.matrices[j])
                if np.max(np.abs(c)) > COMMUTE_TOL:
                    raise NonCommutingContext(f"{self.labels[i]} and {self.labels[j]} do not commute")

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __eq__(self, other):
        if not isinstance(other, ObservableContext):
            return NotImplemented
        return self.labels == other.labels and all(
            np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices))

    def joint_projectors(self) -> dict[tuple[str, ...], np.ndarray]:
        """Projectors onto the joint eigenspaces, keyed by eigenvalue labels."""
        if self._joint is None:
            self._joint = _joint_diagonalize(self.matrices)
        return self._joint

    def spectrum(self, i: int) -> list[str]:
        vals = {key[i] for key in self.joint_projectors()}
        return sorted(vals, key=float)


def _joint_diagonalize(mats: Sequence[np.ndarray]) -> dict:
    """Common eigenbasis of a commuting Hermitian family.

    A generic real combination of the family has eigenspaces that refine the
    joint eigenspaces; the result is checked and retried with fresh weights
    if a coincidental degeneracy mixes two joint eigenspaces.
    """
    dim = mats[0].shape[0]
    rng = np.random.default_rng(7)
    weights = np.sqrt(np.arange(2, 2 + len(mats)))
    for _ in range(20):
        H = sum(w * m for w, m in zip(weights, mats))
        _, V = np.linalg.eigh(H)
        diag = [V.conj().T @ m @ V for m in mats]
        off = max(np.max(np.abs(D - np.diag(np.diag(D)))) for D in diag)
        if off <= CLUSTER_TOL:
            break
        weights = rng.uniform(0.5, 1.5, size=len(mats))
    else:
        raise NonCommutingContext("could not find a common eigenbasis")
    groups: dict[tuple[str, ...], list[int]] = {}
    values = [np.real(np.diag(D)) for D in diag]
    for col in range(dim):
        key = tuple(_cluster(vals[col], vals) for vals in values)
        groups.setdefault(key, []).append(col)
    out = {}
    for key in sorted(groups, key=lambda k: tuple(float(x) for x in k)):
        cols = V[:, groups[key]]
        out[key] = cols @ cols.conj().T
    return out


def _cluster(value: float, all_values: np.ndarray) -> str:
    # representative: smallest eigenvalue within tolerance, so near-equal values share a label
    close = all_values[np.abs(all_values - value) <= CLUSTER_TOL]
    return _label(float(close.min()))


def born_model(state, contexts: Sequence[ObservableContext],
               measurements: Sequence[str] | None = None) -> EmpiricalModel:
    """Empirical model of a state measured in commuting contexts.

    The weight of a joint eigenvalue section is Tr(rho P) for the joint
    spectral projector P; observables sharing a label must be equal.
    ``measurements`` fixes the label order (default: order of first use).
    """
    state = as_state(state)
    seen: dict[str, np.ndarray] = {}
    order: list[str] = []
    for ctx in contexts:
        if ctx.dim != state.dim:
            raise DimensionMismatch(f"context of dimension {ctx.dim} on a {state.dim}-dimensional state")
        for lab, m in zip(ctx.labels, ctx.matrices):
            if lab in seen:
                if not np.allclose(seen[lab], m, atol=HERMITIAN_TOL, rtol=0):
                    raise InconsistentSharedObservable(f"label {lab} names two different matrices")
            else:
                seen[lab] = m
                order.append(lab)
    if measurements is not None:
        if sorted(measurements) != sorted(order):
            raise ValueError(f"measurement order {list(measurements)} does not match labels {order}")
        order = list(measurements)
    outcomes = sorted({v for ctx in contexts for key in ctx.joint_projectors() for v in key}, key=float)
    scenario = MeasurementScenario(tuple(order), tuple(outcomes), tuple(ctx.labels for ctx in contexts))
    table = {}
    for ctx in contexts:
        weights = {}
        for key, P in ctx.joint_projectors().items():
            weights[Assignment(ctx.labels, key)] = float(np.real(np.trace(state.density @ P)))
        table[ctx.labels] = Distribution(ctx.labels, weights, REAL)
    return EmpiricalModel(scenario, table)


def bell_operator(a1, a2, b1, b2) -> np.ndarray:
    """a1 b1 + a1 b2 + a2 b1 - a2 b2 for Hermitian contractions with [a_i, b_j] = 0."""
    ops = [np.asarray(x, dtype=complex) for x in (a1, a2, b1, b2)]
    if len({o.shape for o in ops}) != 1:
        raise DimensionMismatch("setting observables have different shapes")
    for name, o in zip(("a1", "a2", "b1", "b2"), ops):
        if not is_hermitian(o):
            raise SpectrumOutOfRange(f"{name} is not Hermitian")
        ev = np.linalg.eigvalsh(o)
        if ev.min() < -1 - 1e-12 or ev.max() > 1 + 1e-12:
            raise SpectrumOutOfRange(f"{name} has spectrum outside [-1, 1]")
    a1, a2, b1, b2 = ops
    for x in (a1, a2):
        for y in (b1, b2):
            if np.max(np.abs(commutator(x, y))) > COMMUTE_TOL:
                raise NonCommutingParties("party observables do not commute")
    return a1 @ b1 + a1 @ b2 + a2 @ b1 - a2 @ b2


def chsh_observables(angles: Sequence[float]) -> tuple[np.ndarray, ...]:
    """S(a1) x I, S(a2) x I, I x S(b1), I x S(b2) for coplanar angles in degrees."""
    a1, a2, b1, b2 = (spin_observable(spin_direction(t)) for t in angles)
    eye = np.eye(2, dtype=complex)
    return np.kron(a1, eye), np.kron(a2, eye), np.kron(eye, b1), np.kron(eye, b2)


CHSH_LABELS = ("a1", "a2", "b1", "b2")


def chsh_model(state, angles: Sequence[float], labels: Sequence[str] = CHSH_LABELS) -> EmpiricalModel:
    """Born model of a two-qubit state in the four CHSH contexts {a_i, b_j}."""
    obs = dict(zip(labels, chsh_observables(angles)))
    la1, la2, lb1, lb2 = labels
    contexts = [ObservableContext((x, y), (obs[x], obs[y])) for x in (la1, la2) for y in (lb1, lb2)]
    return born_model(state, contexts, labels)


def correlation_tensor(state) -> np.ndarray:
    """T[i, j] = phi(sigma_i x sigma_j) for i, j in 1..3."""
    return np.array([[expectation(state, np.kron(_PAULI[i], _PAULI[j])).real for j in (1, 2, 3)]
                     for i in (1, 2, 3)])


@dataclass(frozen=True)
class BellScan:
    value: float
    signed_value: float
    angles: tuple[float, float, float, float]
    step: float


def max_bell_violation(state, step: float) -> BellScan:
    """Grid search of |phi(B)| over coplanar spin settings in the x-z plane."""
    if step <= 0 or abs(360 / step - round(360 / step)) > 1e-9:
        raise ValueError(f"grid step {step} does not divide 360")
    n = int(round(360 / step))
    angles = np.arange(n) * step
    dirs = np.array([spin_direction(t) for t in angles])
    E = dirs @ correlation_tensor(state) @ dirs.T
    best_value, best_signed, best_angles = -1.0, 0.0, (0, 0, 0, 0)
    # B = (E[a1] + E[a2])[b1] + (E[a1] - E[a2])[b2]; rows of u, v run over a2
    for i in range(n):
        u = E[i] + E
        v = E[i] - E
        for sign in (1.0, -1.0):
            su, sv = sign * u, sign * v
            total = su.max(axis=1) + sv.max(axis=1)
            j = int(np.argmax(total))
            if total[j] > best_value + 1e-15:
                b1, b2 = int(np.argmax(su[j])), int(np.argmax(sv[j]))
                best_value, best_signed = float(total[j]), sign * float(total[j])
                best_angles = (i, j, b1, b2)
    return BellScan(best_value, best_signed, tuple(float(angles[k]) for k in best_angles), step)


@dataclass(eq=False)
class FiniteSystemPresentation:
    """Algebra block sizes, observable contexts, states and formal markers."""

    blocks: tuple[int, ...]
    contexts: tuple[ObservableContext, ...]
    states: tuple[np.ndarray, ...]
    markers: tuple[str, ...] = ()

    def __post_init__(self):
        self.blocks = tuple(int(b) for b in self.blocks)
        self.contexts = tuple(self.contexts)
        self.states = tuple(np.asarray(s, dtype=complex) for s in self.states)
        self.markers = tuple(self.markers)
        if not self.blocks or any(b < 1 for b in self.blocks):
            raise QuantumError(f"invalid block sizes {self.blocks}")
        dim = sum(self.blocks)
        for ctx in self.contexts:
            if ctx.dim != dim:
                raise DimensionMismatch(f"context of dimension {ctx.dim} in a {dim}-dimensional algebra")
        for s in self.states:
            QuantumState.mixed(s)
            if s.shape != (dim, dim):
                raise DimensionMismatch(f"state of shape {s.shape} in a {dim}-dimensional algebra")

    @property
    def dim(self) -> int:
        return sum(self.blocks)

    def __eq__(self, other):
        if not isinstance(other, FiniteSystemPresentation):
            return NotImplemented
        return (self.blocks == other.blocks and self.markers == other.markers
                and len(self.contexts) == len(other.contexts)
                and all(a == b for a, b in zip(self.contexts, other.contexts))
                and len(self.states) == len(other.states)
                and all(np.array_equal(a, b) for a, b in zip(self.states, other.states)))


def adjoin_marker(p: FiniteSystemPresentation, marker: str = "*") -> FiniteSystemPresentation:
    """Add a fresh formal element (primed until unused)."""
    while marker in p.markers:
        marker += "'"
    return replace(p, markers=p.markers + (marker,))


def remove_marker(p: FiniteSystemPresentation, marker: str | None = None) -> FiniteSystemPresentation:
    """Drop a formal element; by default the most recently adjoined one."""
    if not p.markers:
        return p
    if marker is None:
        return replace(p, markers=p.markers[:-1])
    return replace(p, markers=tuple(m for m in p.markers if m != marker))


def roundtrip_identity(p: FiniteSystemPresentation) -> Verdict:
    back = remove_marker(adjoin_marker(p))
    return Verdict(back == p, None if back == p else back)


@dataclass(frozen=True)
class SystemImage:
    scenario: MeasurementScenario
    models: tuple[EmpiricalModel, ...]
    no_signalling: tuple[Verdict, ...]


def system_from_algebra(p: FiniteSystemPresentation) -> SystemImage:
    """Scenario and empirical models of a presentation's states.

    Contexts strictly contained in another given context are dropped, so the
    cover consists of the maximal ones.
    """
    maximal = [c for c in p.contexts
               if not any(set(c.labels) < set(o.labels) for o in p.contexts)]
    models = tuple(born_model(QuantumState.mixed(rho), maximal) for rho in p.states)
    if models:
        scenario = models[0].scenario
    else:
        scenario = born_model(maximally_mixed(p.dim), maximal).scenario
    return SystemImage(scenario, models, tuple(is_no_signalling(m) for m in models))


def example_presentations() -> dict[str, FiniteSystemPresentation]:
    """Small presentations used as fixtures: qubit, singlet pair, block algebra, pre-marked."""
    s1, s3 = pauli(1), pauli(3)
    e1 = np.outer(E1, E1.conj())
    qubit = FiniteSystemPresentation(
        (2,), (ObservableContext(("z",), (s3,)), ObservableContext(("x",), (s1,))),
        (np.eye(2) / 2, e1))
    a1, a2, b1, b2 = chsh_observables((0, 90, 45, 135))
    pair = FiniteSystemPresentation(
        (4,), tuple(ObservableContext((x, y), (mx, my)) for x, mx in (("a1", a1), ("a2", a2))
                    for y, my in (("b1", b1), ("b2", b2))),
        (singlet_state().density, maximally_mixed(4).density))
    # M(1) + M(2) realized block-diagonally in dimension 3
    d = np.diag([1.0, -1.0, -1.0]).astype(complex)
    flip = np.zeros((3, 3), dtype=complex)
    flip[0, 0] = 1
    flip[1:, 1:] = s1
    turn = np.zeros((3, 3), dtype=complex)
    turn[0, 0] = 1
    turn[1:, 1:] = s3
    block = FiniteSystemPresentation(
        (1, 2), (ObservableContext(("d",), (d,)), ObservableContext(("d", "f"), (d, flip)),
                 ObservableContext(("d", "g"), (d, turn))),
        (np.diag([0.5, 0.25, 0.25]).astype(complex),))
    marked = replace(qubit, markers=("*",))
    return {"qubit": qubit, "singlet_pair": pair, "block": block, "marked": marked}


Endomorphism = Callable[[np.ndarray], np.ndarray]


def conjugation(V: np.ndarray) -> Endomorphism:
    """N -> V N V*."""
    V = np.asarray(V, dtype=complex)
    return lambda N: V @ N @ V.conj().T


def amplify_left(d: int) -> Endomorphism:
    """N -> N x I_d."""
    return lambda N: np.kron(N, np.eye(d, dtype=complex))


def amplify_right(d: int) -> Endomorphism:
    """N -> I_d x N."""
    return lambda N: np.kron(np.eye(d, dtype=complex), N)


def identity_endomorphism(N: np.ndarray) -> np.ndarray:
    return N


def is_intertwiner(J: np.ndarray, j1: Endomorphism, j2: Endomorphism, generators: Sequence[np.ndarray],
                   tol: float = 1e-10) -> Verdict:
    """j1(N) J = J j2(N) for every generator N."""
    J = np.asarray(J, dtype=complex)
    for k, N in enumerate(generators):
        left, right = j1(N), j2(N)
        if left.shape[1] != J.shape[0] or J.shape[1] != right.shape[0]:
            raise DimensionMismatch(f"intertwiner of shape {J.shape} between {left.shape} and {right.shape}")
        gap = float(np.max(np.abs(left @ J - J @ right)))
        if gap > tol:
            return Verdict(False, k, {"residual": gap})
    return Verdict(True)
