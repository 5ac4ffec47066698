"""Regenerate the JSON fixtures shipped in sheafctx/fixtures."""

from fractions import Fraction
from pathlib import Path

import numpy as np

from sheafctx.distribution import Distribution
from sheafctx.documents import ModelDocument, NetDocument, Region, canonical_dumps, dump_model, net_to_dict
from sheafctx.empirical import EmpiricalModel
from sheafctx.quantum import chsh_model, singlet_state
from sheafctx.scenario import Assignment, MeasurementScenario
from sheafctx.spacetime import DoubleCone, LatticeNet, SpacetimePoint

OUT = Path(__file__).resolve().parents[1] / "src" / "sheafctx" / "fixtures"
BITS = ("0", "1")
CHSH = MeasurementScenario(("a0", "a1", "b0", "b1"), BITS,
                           (("a0", "b0"), ("a0", "b1"), ("a1", "b0"), ("a1", "b1")))


def box(rule):
    table = {}
    for ctx in CHSH.cover:
        i, j = int(ctx[0][1]), int(ctx[1][1])
        table[ctx] = Distribution(ctx, {Assignment(ctx, (x, y)): Fraction(w)
                                        for x in BITS for y in BITS
                                        if (w := rule(i, j, int(x), int(y)))})
    return EmpiricalModel(CHSH, table)


def write(name, text):
    (OUT / name).write_text(text, encoding="utf-8")


def main():
    OUT.mkdir(exist_ok=True)
    pr = box(lambda i, j, x, y: Fraction(1, 2) if (x ^ y) == (i & j) else 0)
    product = box(lambda i, j, x, y: Fraction(1, 4))
    # a0's marginal depends on whether b0 or b1 is measured
    signalling = box(lambda i, j, x, y: (Fraction(1, 2) if x == y else 0) if (i, j) != (0, 1)
                     else (1 if (x, y) == (0, 0) else 0))
    write("prbox.model", dump_model(ModelDocument(pr, "prbox")))
    write("product.model", dump_model(ModelDocument(product, "product")))
    write("signalling.model", dump_model(ModelDocument(signalling, "signalling")))
    singlet = chsh_model(singlet_state(), (0, 90, 45, 135))
    write("singlet_chsh.model", dump_model(ModelDocument(singlet, "singlet-chsh-0-90-45-135", 10 ** 6)))
    write("bad_antichain.model", canonical_dumps({
        "metadata": {"name": "bad-antichain", "carrier": "probability"},
        "scenario": {"measurements": ["a", "b"], "outcomes": ["0", "1"], "cover": [["a", "b"], ["a"]]},
        "model": {},
    }))
    write("bell120.corr", canonical_dumps({
        "metadata": {"name": "inner-products-0-120-60", "variant": "same",
                     "angles": {"a": 0, "b": 120, "c": 60}},
        "correlations": {"a,b": "-1/2", "a,c": "1/2", "b,c": "1/2"},
    }))

    P = SpacetimePoint.of
    s = singlet_state().vector
    net2 = LatticeNet([("a", P(0, -3)), ("b", P(0, 3))], s)
    write("net2.net", canonical_dumps(net_to_dict(NetDocument(
        net2,
        (Region("A", DoubleCone.diamond(0, -3, 1), (0, 90)), Region("B", DoubleCone.diamond(0, 3, 1), (45, 135))),
        None, Fraction(1, 2), ("A", "B"), "singlet-two-sites"))))

    # singlets on (s1, s4) and (s2, s3)
    psi = np.einsum("ad,bc->abcd", s.reshape(2, 2), s.reshape(2, 2)).reshape(16)
    net4 = LatticeNet([(f"s{k + 1}", P(0, x)) for k, x in enumerate((-6, -2, 2, 6))], psi)
    regions = tuple(Region(f"R{k + 1}", DoubleCone.diamond(0, x, 1), (0, 90))
                    for k, x in enumerate((-6, -2, 2, 6)))
    regions += (Region("M", DoubleCone.diamond(0, 0, 3), (0,)), Region("L", DoubleCone.diamond(0, -4, 3), (0,)))
    write("net4.net", canonical_dumps(net_to_dict(NetDocument(
        net4, regions, (Fraction(0), Fraction(4)), Fraction(1, 2), ("R1", "R2", "R3", "R4"),
        "two-singlets-four-sites"))))


if __name__ == "__main__":
    main()
