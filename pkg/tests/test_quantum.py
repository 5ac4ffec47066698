import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sheafctx.scenario import Assignment
from sheafctx.empirical import find_local_model, is_no_signalling, rationalize
from sheafctx.quantum import (
    TSIRELSON, DimensionMismatch, FiniteSystemPresentation, InconsistentSharedObservable, IndexOutOfRange,
    NonCommutingContext, NonCommutingParties, NotUnitVector, ObservableContext, SpectrumOutOfRange,
    adjoin_marker, amplify_left, amplify_right, bell_operator, born_model, chsh_model, chsh_observables,
    conjugation, embed, example_presentations, expectation, identity_endomorphism, is_intertwiner,
    max_bell_violation, maximally_mixed, pauli, reduced_density, remove_marker, roundtrip_identity,
    singlet_state, spin_direction, spin_observable, spin_projectors, system_from_algebra,
)

I2 = np.eye(2)
SQ2 = math.sqrt(2)

unit = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: 0.1 < np.linalg.norm(v)).map(lambda v: tuple(np.array(v) / np.linalg.norm(v)))


def test_pauli_algebra():
    s0, s1, s2, s3 = (pauli(i) for i in range(4))
    assert np.array_equal(s1 @ s1, s0)
    assert np.array_equal(s1 @ s2, 1j * s3)
    for s in (s0, s1, s2, s3):
        assert np.array_equal(s, s.conj().T)
    with pytest.raises(IndexOutOfRange):
        pauli(4)


def test_spin_observable_axes():
    assert np.allclose(spin_observable((0, 0, 1)), pauli(3), atol=0)
    assert np.allclose(spin_observable((1, 0, 0)), pauli(1), atol=0)
    with pytest.raises(NotUnitVector):
        spin_observable((1, 1, 0))


@given(unit)
def test_spin_projectors(a):
    S = spin_observable(a)
    P, M = spin_projectors(a)
    assert np.allclose(S @ S, I2, atol=1e-12)
    assert np.allclose(P + M, I2, atol=1e-12) and np.allclose(P @ M, 0, atol=1e-12)


def test_singlet_vector_in_flipped_basis():
    u = singlet_state().vector
    # e1 = (0, 1), e2 = (1, 0)
    e1, e2 = np.array([0, 1]), np.array([1, 0])
    assert np.allclose(u, (np.kron(e1, e2) - np.kron(e2, e1)) / SQ2, atol=1e-15)
    assert np.allclose(u, np.array([0, -1, 1, 0]) / SQ2, atol=1e-15)
    assert abs(np.linalg.norm(u) - 1) < 1e-12
    assert abs(expectation(singlet_state(), np.eye(4)) - 1) < 1e-12
    assert abs(expectation(singlet_state(), np.kron(pauli(3), pauli(3))) + 1) < 1e-12


@given(unit, unit)
def test_singlet_correlation_law(a, b):
    val = expectation(singlet_state(), np.kron(spin_observable(a), spin_observable(b)))
    assert abs(val.real + np.dot(a, b)) <= 1e-10 and abs(val.imag) <= 1e-10


def test_expectation_errors_and_identity():
    assert abs(expectation(maximally_mixed(4), np.eye(4)) - 1) < 1e-12
    assert abs(expectation(singlet_state(), np.kron(pauli(1), pauli(3)))) < 1e-12
    with pytest.raises(DimensionMismatch):
        expectation(singlet_state(), np.eye(2))


@given(unit, unit)
def test_born_weight_plus_plus(a, b):
    ctx = ObservableContext(("A", "B"), (np.kron(spin_observable(a), I2), np.kron(I2, spin_observable(b))))
    e = born_model(singlet_state(), [ctx])
    pp = e[("A", "B")][Assignment(("A", "B"), ("+1", "+1"))]
    assert abs(pp - (1 - np.dot(a, b)) / 4) < 1e-10


def test_born_same_axis_never_plus_plus():
    S = spin_observable(spin_direction(30))
    ctx = ObservableContext(("A", "B"), (np.kron(S, I2), np.kron(I2, S)))
    d = born_model(singlet_state(), [ctx])[("A", "B")]
    assert all(abs(v) < 1e-12 for s, v in d.items() if s.values in (("+1", "+1"), ("-1", "-1")))


def test_born_errors():
    with pytest.raises(NonCommutingContext):
        ObservableContext(("x", "z"), (pauli(1), pauli(3)))
    with pytest.raises(InconsistentSharedObservable):
        born_model(maximally_mixed(2), [ObservableContext(("x",), (pauli(1),)),
                                        ObservableContext(("x",), (pauli(3),))])


def random_hermitian(rng, d):
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (M + M.conj().T) / 2


def random_density(rng, d):
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = M @ M.conj().T
    return rho / np.trace(rho)


@given(st.integers(0, 10 ** 6))
def test_projector_completeness_with_degeneracy(seed):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    A = U @ np.diag([1.0, 1.0, -1.0, 2.0]) @ U.conj().T
    B = U @ np.diag([0.5, -0.5, -0.5, -0.5]) @ U.conj().T
    ctx = ObservableContext(("A", "B"), (A, B))
    proj = ctx.joint_projectors()
    assert len(proj) == 4
    assert np.allclose(sum(proj.values()), np.eye(4), atol=1e-10)
    for P in proj.values():
        assert np.allclose(P @ P, P, atol=1e-10)


@given(st.integers(0, 10 ** 6))
def test_born_models_are_no_signalling(seed):
    rng = np.random.default_rng(seed)
    As = [np.kron(random_hermitian(rng, 2), I2) for _ in range(2)]
    Bs = [np.kron(I2, random_hermitian(rng, 2)) for _ in range(2)]
    contexts = [ObservableContext((f"a{i}", f"b{j}"), (As[i], Bs[j])) for i in range(2) for j in range(2)]
    e = born_model(random_density(rng, 4), contexts)
    assert is_no_signalling(e)
    for d in e.table.values():
        assert min(w for _, w in d.items()) >= -1e-10
        assert abs(sum(w for _, w in d.items()) - 1) <= 1e-9


def test_chsh_model_no_signalling():
    assert is_no_signalling(chsh_model(singlet_state(), (0, 90, 45, 135)))


def singlet_bell_value(angles):
    """Sum of -cos(angle differences) with the CHSH signs."""
    a1, a2, b1, b2 = angles
    E = lambda x, y: -math.cos(math.radians(x - y))
    return E(a1, b1) + E(a1, b2) + E(a2, b1) - E(a2, b2)


def test_bell_operator_values():
    obs = chsh_observables((0, 90, 45, 135))
    B = bell_operator(*obs)
    assert abs(singlet_bell_value((0, 90, 45, 135))) < 1e-12
    assert abs(expectation(singlet_state(), B)) < 1e-9
    B2 = bell_operator(*chsh_observables((0, 90, 45, 315)))
    assert abs(expectation(singlet_state(), B2).real + 2 * SQ2) < 1e-9
    assert abs(singlet_bell_value((0, 90, 45, 315)) + 2 * SQ2) < 1e-12


def test_bell_operator_collapse():
    a, _, b, _ = chsh_observables((10, 10, 70, 70))
    B = bell_operator(a, a, b, b)
    assert np.allclose(B, 2 * a @ b)
    assert abs(expectation(singlet_state(), B)) <= 2 + 1e-12


def test_bell_operator_errors():
    a1, a2, b1, b2 = chsh_observables((0, 90, 45, 135))
    with pytest.raises(NonCommutingParties):
        bell_operator(a1, a2, a2, b2)
    with pytest.raises(SpectrumOutOfRange):
        bell_operator(2 * a1, a2, b1, b2)


@given(unit, unit, unit, unit)
def test_tsirelson_ceiling(a1, a2, b1, b2):
    ops = [np.kron(spin_observable(a1), I2), np.kron(spin_observable(a2), I2),
           np.kron(I2, spin_observable(b1)), np.kron(I2, spin_observable(b2))]
    assert np.linalg.eigvalsh(bell_operator(*ops)).max() <= TSIRELSON + 1e-9


def test_scan_singlet_and_mixed():
    scan = max_bell_violation(singlet_state(), 45)
    assert abs(scan.value - 2 * SQ2) < 1e-9
    assert abs(abs(singlet_bell_value(scan.angles)) - scan.value) < 1e-9
    assert max_bell_violation(maximally_mixed(4), 45).value < 1e-12
    with pytest.raises(ValueError):
        max_bell_violation(singlet_state(), 7)


@pytest.mark.parametrize("step", [90, 60, 45])
def test_scan_matches_brute_force(step):
    grid = np.arange(0, 360, step)
    best = max(abs(singlet_bell_value(t)) for t in product(grid, repeat=4))
    assert abs(max_bell_violation(singlet_state(), step).value - best) < 1e-9


def test_scan_monotone_in_step():
    vals = [max_bell_violation(singlet_state(), s).value for s in (90, 45, 15)]
    assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12


def test_product_state_is_local():
    psi = np.kron([math.cos(0.4), math.sin(0.4)], [math.cos(1.1), -math.sin(1.1)])
    scan = max_bell_violation(psi, 45)
    assert scan.value <= 2 + 1e-9
    exact, rep = rationalize(chsh_model(psi, scan.angles), 10 ** 6)
    assert rep.no_signalling and find_local_model(exact).feasible


def test_system_from_algebra_examples():
    ex = example_presentations()
    q = system_from_algebra(ex["qubit"])
    mixed, e1 = q.models
    for ctx in (("z",), ("x",)):
        assert all(abs(w - 0.5) < 1e-12 for _, w in mixed[ctx].items())
    # e1 = (0, 1) is the -1 eigenvector of sigma_3
    z = {s.values[0]: w for s, w in e1[("z",)].items()}
    assert abs(z["-1"] - 1) < 1e-12 and abs(z.get("+1", 0.0)) < 1e-12
    assert all(abs(w - 0.5) < 1e-12 for _, w in e1[("x",)].items())
    pair = system_from_algebra(ex["singlet_pair"])
    ref = chsh_model(singlet_state(), (0, 90, 45, 135))
    assert all(pair.models[0][c] == ref[c] for c in ref.scenario.cover)
    assert all(pair.no_signalling)
    block = system_from_algebra(ex["block"])
    assert set(map(frozenset, block.scenario.cover)) == {frozenset("df"), frozenset("dg")}


def test_roundtrip_identity_on_fixtures():
    for p in example_presentations().values():
        assert roundtrip_identity(p)
        once = remove_marker(adjoin_marker(p))
        assert remove_marker(adjoin_marker(once)) == once
    marked = example_presentations()["marked"]
    assert adjoin_marker(marked).markers == ("*", "*'")


def test_presentation_validation():
    with pytest.raises(DimensionMismatch):
        FiniteSystemPresentation((2,), (ObservableContext(("z",), (np.eye(3),)),), ())


def test_intertwiner_examples():
    gens = [pauli(i) for i in (1, 2, 3)]
    assert is_intertwiner(np.eye(2), identity_endomorphism, identity_endomorphism, gens)
    swap = np.eye(4)[[0, 2, 1, 3]]
    assert is_intertwiner(swap, amplify_left(2), amplify_right(2), gens)
    v = is_intertwiner(pauli(1), identity_endomorphism, identity_endomorphism, [pauli(3)])
    assert not v and v.witness == 0
    U = spin_observable(spin_direction(30))
    assert is_intertwiner(U, conjugation(U), identity_endomorphism, gens)
    with pytest.raises(DimensionMismatch):
        is_intertwiner(np.eye(3), identity_endomorphism, identity_endomorphism, gens)


def test_embed_and_reduce_against_kron():
    rng = np.random.default_rng(5)
    A = random_hermitian(rng, 2)
    B = random_hermitian(rng, 2)
    # A on site 2, B on site 0 of three
    assert np.allclose(embed(np.kron(A, B), [2, 0], 3), np.kron(np.kron(B, I2), A))
    r0, r1, r2 = (random_density(rng, 2) for _ in range(3))
    rho = np.kron(np.kron(r0, r1), r2)
    assert np.allclose(reduced_density(rho, [0, 2], 3), np.kron(r0, r2))
    assert np.allclose(reduced_density(rho, [1], 3), r1)
