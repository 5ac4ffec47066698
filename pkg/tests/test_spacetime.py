from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sheafctx.empirical import chsh_value, find_local_model, is_no_signalling, rationalize
from sheafctx.quantum import chsh_model, pauli, singlet_state
from sheafctx.scenario import Assignment
from sheafctx.spacetime import (
    DoubleCone, GeometryError, InvalidState, LatticeNet, NetError, NonCommutingAcrossRegions, NotOnePlusOne,
    OverlappingFactors, RegionsNotSeparated, RegionsShareSites, SpacetimePoint, ZeroProjection,
    check_net_axioms, local_state_check, local_state_map, minkowski_sq, partial_evaluation, schlieder_check,
    separation_margin, spacelike_separated, spacetime_sheaf, spin_settings, split_check,
    strictly_spacelike_separated,
)

P = SpacetimePoint.of
F = Fraction
UP = np.array([[1, 0], [0, 0]])      # sigma_3 eigenvalue +1
DOWN = np.array([[0, 0], [0, 1]])


def line_net(xs, state=None):
    n = len(xs)
    if state is None:
        state = np.zeros(2 ** n)
        state[0] = 1
    return LatticeNet([(k + 1, P(0, x)) for k, x in enumerate(xs)], state)


def test_minkowski_sq():
    assert minkowski_sq(P(1, 0, 0, 0)) == 1
    assert minkowski_sq(P(0, 1, 0, 0)) == -1
    assert minkowski_sq(P(1, 1, 0, 0)) == 0
    assert minkowski_sq(P(0, 1, 1, 1)) == -3


def test_spacelike_examples():
    assert spacelike_separated([P(0, 0)], [P(0, 5)])
    v = spacelike_separated([P(0, 0)], [P(5, 0)])
    assert not v and v.witness == (P(0, 0), P(5, 0))


def test_double_cone_validation_and_membership():
    with pytest.raises(GeometryError):
        DoubleCone(P(0, 0), P(1, 1))
    with pytest.raises(GeometryError):
        DoubleCone(P(1, 0), P(0, 0))
    c = DoubleCone.diamond(0, 0, 1)
    assert c.contains(P(0, 1)) and c.contains(P(1, 0)) and not c.contains(P(0, F(11, 10)))
    assert DoubleCone.diamond(0, 0, 2).contains_cone(c) and not c.contains_cone(DoubleCone.diamond(0, 0, 2))


def test_strictly_spacelike_examples():
    a, b = DoubleCone.diamond(0, -3, 1), DoubleCone.diamond(0, 3, 1)
    v = strictly_spacelike_separated(a, b, F(1, 2))
    assert v and v.details["gaps"] == (4, 4)
    assert not strictly_spacelike_separated(a, b, 3)
    touching = DoubleCone.diamond(0, 2, 1)
    left = DoubleCone.diamond(0, 0, 1)
    for eps in (F(1, 10 ** 6), F(1, 3), 1):
        assert not strictly_spacelike_separated(left, touching, eps)
    assert separation_margin(left, touching) is None and separation_margin(a, b) == 2
    with pytest.raises(NotOnePlusOne):
        strictly_spacelike_separated(DoubleCone(P(-1, 0, 0, 1), P(1, 0, 0, 1)), b, 1)
    with pytest.raises(GeometryError):
        strictly_spacelike_separated(a, b, 0)


rat = st.fractions(F(-8), F(8), max_denominator=6)
pos = st.fractions(F(1, 6), F(4), max_denominator=6)


@st.composite
def diamonds(draw):
    return DoubleCone.diamond(draw(rat), draw(rat), draw(pos))


@given(diamonds(), diamonds(), st.fractions(F(1, 100), F(2), max_denominator=100))
def test_box_criterion_matches_sampling(o1, o2, eps):
    samples = spacelike_separated(o1.sample(3), o2.sample(3)).holds
    margin = separation_margin(o1, o2)
    assert samples == (margin is not None)
    v = strictly_spacelike_separated(o1, o2, eps)
    assert v.holds == (margin is not None and margin > eps)
    assert all(isinstance(g, Fraction) for g in (v.details["gaps"] or ()))
    if v.holds:
        # every corner of the eps-box of translations keeps the cones apart
        for dt in (-eps, eps):
            for dx in (-eps, eps):
                moved = o1.translate((dt, dx))
                assert spacelike_separated(moved.sample(2), o2.sample(2))


def test_lattice_net_validation():
    with pytest.raises(NetError):
        LatticeNet([("a", P(0, 0)), ("a", P(0, 1))], np.eye(4) / 4)
    with pytest.raises(NetError):
        LatticeNet([("a", P(0, 0)), ("b", P(0, 0))], np.eye(4) / 4)
    with pytest.raises(NetError):
        LatticeNet([("a", P(0, 0))], np.eye(4) / 4)


def test_net_axioms_examples():
    net = line_net([-3, 3], singlet_state())
    a, b = DoubleCone.diamond(0, -3, 1), DoubleCone.diamond(0, 3, 1)
    r = check_net_axioms(net, [a, b, DoubleCone.diamond(0, -3, 2)])
    assert r.ok and r.microcausality_checked >= 1 and r.isotony_checked == 1
    r = check_net_axioms(net, [a, b], translation=(0, 1))
    assert r.covariance == "not_applicable"
    grid = line_net([0, 2, 4, 6])
    r = check_net_axioms(grid, [DoubleCone.diamond(0, 0, 1), DoubleCone.diamond(0, 2, 1),
                                DoubleCone.diamond(0, 3, 2)], translation=(0, 2))
    assert r.covariance == "ok" and r.covariance_checked == 3 and r.ok


def test_schlieder_examples():
    net = line_net([-3, 3])
    v = schlieder_check(net, [1], UP, [2], DOWN)
    assert v and v.details["dimension"] == 1
    assert schlieder_check(net, [1], np.eye(2), [2], np.eye(2)).details["dimension"] == 4
    with pytest.raises(ZeroProjection):
        schlieder_check(net, [1], np.zeros((2, 2)), [2], DOWN)
    with pytest.raises(OverlappingFactors):
        schlieder_check(net, [1], UP, [1], DOWN)


@given(st.integers(0, 10 ** 6))
def test_schlieder_rank_one_pairs_intersect(seed):
    rng = np.random.default_rng(seed)
    net = line_net([-6, -2, 2])
    v1 = rng.normal(size=4) + 1j * rng.normal(size=4)
    v2 = rng.normal(size=2) + 1j * rng.normal(size=2)
    e = np.outer(v1, v1.conj()) / np.vdot(v1, v1)
    f = np.outer(v2, v2.conj()) / np.vdot(v2, v2)
    assert schlieder_check(net, [1, 3], e, [2], f).details["dimension"] == 1


def test_split_examples():
    net = line_net([-4, 0, 4])
    o1, o2 = DoubleCone.diamond(0, -4, 1), DoubleCone.diamond(0, 4, 1)
    v = split_check(net, o1, o2)
    assert v and v.witness == (1, 2)
    two = line_net([-4, 4])
    assert split_check(two, DoubleCone.diamond(0, -4, 1), DoubleCone.diamond(0, 4, 1)).witness == (1,)
    with pytest.raises(RegionsShareSites):
        split_check(net, o1, o1)


@given(st.integers(2, 5), st.data())
def test_split_for_every_disjoint_pair(n, data):
    net = line_net([4 * k for k in range(n)])
    cones = [DoubleCone.diamond(0, 4 * k + data.draw(st.sampled_from([0, 2])), data.draw(st.sampled_from([1, 3, 5])))
             for k in range(3)]
    for c1, c2 in combinations(cones, 2):
        s1, s2 = net.region_sites(c1), net.region_sites(c2)
        if set(s1) & set(s2):
            continue
        assert split_check(net, c1, c2)


def test_local_state_examples():
    rng = np.random.default_rng(2)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    net = line_net([-4, 0, 4], psi / np.linalg.norm(psi))
    o1, o2 = DoubleCone.diamond(0, 0, 1), DoubleCone.diamond(0, 0, 2)
    v = local_state_check(net, o1, o2, UP)
    assert v and max(v.details["residuals"].values()) <= 1e-10
    T = local_state_map(net, [2], UP)
    eye = np.eye(8)
    assert np.allclose(T(eye), eye, atol=1e-12)
    assert np.allclose(T(net.operator(pauli(3), [2])), eye, atol=1e-12)
    A, B = net.operator(pauli(1), [2]), net.operator(pauli(2), [3])
    assert np.max(np.abs(T(A @ B) - T(A) @ B)) <= 1e-12
    with pytest.raises(InvalidState):
        local_state_check(net, o1, o2, np.eye(4) / 4)
    with pytest.raises(InvalidState):
        local_state_check(net, o1, o2, np.array([[1, 0], [0, 1]]))


@given(st.integers(0, 10 ** 6))
def test_kraus_and_partial_evaluation_agree(seed):
    rng = np.random.default_rng(seed)
    net = line_net([-4, 0, 4])
    M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    phi = M @ M.conj().T
    phi /= np.trace(phi)
    T = local_state_map(net, [3, 1], phi)
    X = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    assert np.allclose(T(X), partial_evaluation(net, [3, 1], phi, X), atol=1e-12)


def singlet_net():
    net = line_net([-3, 3], singlet_state())
    return net, [DoubleCone.diamond(0, -3, 1), DoubleCone.diamond(0, 3, 1)]


def test_sheaf_reproduces_chsh_model():
    net, regions = singlet_net()
    sheaf = spacetime_sheaf(net, regions, [spin_settings([0, 90]), spin_settings([45, 135])], ["A", "B"])
    assert all(sheaf.verdicts.values()) and sheaf.restriction_consistent()
    e = sheaf.models[(0, 1)]
    ref = chsh_model(singlet_state(), (0, 90, 45, 135))
    rename = {"a1": "A:0", "a2": "A:90", "b1": "B:45", "b2": "B:135"}
    for ctx, d in ref.table.items():
        mine = e[[rename[m] for m in ctx]]
        for s, w in d.items():
            assert abs(mine[Assignment(tuple(rename[m] for m in s.context), s.values)] - w) < 1e-12
    assert abs(float(chsh_value(e, ("A:0", "A:90"), ("B:45", "B:135"))) - 2 * 2 ** 0.5) < 1e-9
    exact, _ = rationalize(e)
    assert not find_local_model(exact).feasible


def test_sheaf_single_region():
    net, regions = singlet_net()
    sheaf = spacetime_sheaf(net, regions[:1], [spin_settings([0])])
    (model,) = sheaf.models.values()
    assert len(model.scenario.cover) == 1 and is_no_signalling(model)


def test_sheaf_product_state_is_local():
    a = np.array([np.cos(0.3), np.sin(0.3)])
    b = np.array([np.cos(1.2), -np.sin(1.2)])
    net = line_net([-3, 3], np.kron(a, b))
    _, regions = singlet_net()
    sheaf = spacetime_sheaf(net, regions, [spin_settings([0, 50]), spin_settings([20, 110])])
    for model in sheaf.models.values():
        exact, _ = rationalize(model)
        assert find_local_model(exact).feasible


def test_sheaf_rejects_unseparated_regions():
    net, regions = singlet_net()
    big = DoubleCone.diamond(0, 0, 4)
    with pytest.raises(RegionsNotSeparated):
        spacetime_sheaf(net, [regions[0], big], [spin_settings([0]), spin_settings([0])])
    timelike = LatticeNet([(1, P(0, 0)), (2, P(3, 0))], singlet_state())
    with pytest.raises(RegionsNotSeparated):
        spacetime_sheaf(timelike, [DoubleCone.diamond(0, 0, 1), DoubleCone.diamond(3, 0, 1)],
                        [spin_settings([0]), spin_settings([0])])


class _LeakyNet(LatticeNet):
    """Embeds every operator on the first site, violating locality on purpose."""

    def operator(self, op, site_ids):
        return super().operator(op, [self.site_ids[0]])


def test_sheaf_detects_cross_region_commutators():
    net, regions = singlet_net()
    leaky = _LeakyNet(net.sites, singlet_state())
    with pytest.raises(NonCommutingAcrossRegions):
        spacetime_sheaf(leaky, regions, [spin_settings([0]), spin_settings([90])])
