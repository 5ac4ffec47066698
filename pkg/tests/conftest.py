import sys
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from sheafctx.distribution import Distribution
from sheafctx.empirical import EmpiricalModel
from sheafctx.scenario import Assignment, MeasurementScenario

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BITS = ("0", "1")


def chsh_scenario(labels=("a1", "a2", "b1", "b2")):
    a1, a2, b1, b2 = labels
    return MeasurementScenario(labels, BITS, ((a1, b1), (a1, b2), (a2, b1), (a2, b2)))


def box(rule, labels=("a1", "a2", "b1", "b2")):
    """Two-party binary model whose context (ai, bj) has weights rule(i, j, x, y)."""
    sc = chsh_scenario(labels)
    table = {}
    for ctx in sc.cover:
        i, j = labels.index(ctx[0]), labels.index(ctx[1]) - 2
        weights = {Assignment(ctx, (x, y)): Fraction(rule(i, j, int(x), int(y))) for x in BITS for y in BITS}
        table[ctx] = Distribution(ctx, weights)
    return EmpiricalModel(sc, table)


def pr_box():
    # equal outcomes except in the (a2, b2) context
    return box(lambda i, j, x, y: Fraction(1, 2) if (x ^ y) == (i & j) else 0)


@pytest.fixture
def prbox():
    return pr_box()


@pytest.fixture
def chsh():
    return chsh_scenario()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
