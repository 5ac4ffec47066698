"""Command-line front end.

Exit codes: 0 when the checked property holds (or the LP is feasible), 1
when it fails (the report carries the witness or certificate), 2 for
malformed input or usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from itertools import combinations

import numpy as np

from .bell import CorrelationTable, MissingPair, check_bell_inequality, correlation_lp
from .distribution import PROBABILITY
from .documents import (
    DocumentError, fraction_to_str, is_correlation_document, load_json, parse_correlations, parse_model,
    parse_net, read_text,
)
from .empirical import (
    DEFAULT_DENOMINATOR_BOUND, chsh_value, correlation, find_local_model, is_no_signalling, rationalize,
)
from .quantum import (
    TSIRELSON, CHSH_LABELS, bell_operator, chsh_model, chsh_observables, expectation, max_bell_violation,
    maximally_mixed, singlet_state, spin_direction, spin_observable,
)
from .scenario import validate_scenario
from .spacetime import (
    Setting, check_net_axioms, local_state_check, schlieder_check, spacelike_separated, spacetime_sheaf,
    split_check, strictly_spacelike_separated,
)

FORMATS = ("text", "json")
ENV_FORMAT = "SHEAFCTX_FORMAT"


class UsageError(ValueError):
    pass


def _jsonable(x):
    if isinstance(x, Fraction):
        return fraction_to_str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return str(x)


def _render_text(report: dict, indent: int = 0) -> list[str]:
    lines = []
    pad = "  " * indent
    for key, value in report.items():
        label = key.replace("_", "-")
        if isinstance(value, dict):
            lines.append(f"{pad}{label}:")
            lines.extend(_render_text(value, indent + 1))
        elif isinstance(value, bool):
            lines.append(f"{pad}{label}: {str(value).lower()}")
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{pad}{label}:")
            for item in value:
                lines.extend(_render_text(item, indent + 1))
                lines.append("")
        elif isinstance(value, Fraction):
            lines.append(f"{pad}{label}: {value}")
        else:
            lines.append(f"{pad}{label}: {_jsonable(value)}")
    return lines


def emit(report: dict, fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    else:
        out.write("\n".join(_render_text(report)) + "\n")


def _keyed(ctx, s) -> str:
    return f"{','.join(ctx)}|{','.join(s.values)}"


# -- scenario / model ---------------------------------------------------------

def cmd_scenario_validate(args):
    text = read_text(args.file)
    raw = load_json(text)
    if isinstance(raw, dict) and "model" in raw:
        doc = parse_model(text)
        scenario = doc.model.scenario
    else:
        if not isinstance(raw, dict) or "scenario" not in raw:
            raise DocumentError("missing required field 'scenario'")
        try:
            scenario = validate_scenario(raw["scenario"])
        except ValueError as exc:
            raise DocumentError(str(exc), "scenario") from None
    return 0, {
        "valid": True,
        "measurements": list(scenario.measurements),
        "outcomes": list(scenario.outcomes),
        "maximal_contexts": len(scenario.cover),
        "contexts": len(scenario.contexts()),
    }


def cmd_check_nosig(args):
    doc = parse_model(read_text(args.file))
    v = is_no_signalling(doc.model)
    report = {"model": doc.name, "carrier": doc.model.semiring.name, "no_signalling": v.holds}
    if not v.holds:
        w = v.witness
        report["witness"] = {
            "context": ",".join(w.context), "other": ",".join(w.other),
            "section": ",".join(f"{m}={o}" for m, o in zip(w.section.context, w.section.values)),
            "left": w.left, "right": w.right,
        }
    return (0 if v.holds else 1), report


def _exact_model(doc, bound):
    model = doc.model
    if model.semiring is PROBABILITY:
        return model, None
    if model.semiring.name == "boolean":
        raise UsageError("the local-model LP needs probabilities; this model is possibilistic")
    bound = bound or doc.denominator_bound or DEFAULT_DENOMINATOR_BOUND
    exact, rep = rationalize(model, bound)
    return exact, {
        "denominator_bound": rep.denominator_bound,
        "max_perturbation": rep.max_perturbation,
        "repaired": rep.repaired,
        "no_signalling_after": rep.no_signalling,
    }


def local_model_report(model, rationalization=None) -> tuple[int, dict]:
    res = find_local_model(model)
    report = {"local_model": "feasible" if res.feasible else "infeasible"}
    if rationalization is not None:
        report["rationalization"] = rationalization
    if res.feasible:
        report["global_distribution"] = {
            ",".join(f"{m}={o}" for m, o in zip(g.context, g.values)): w
            for g, w in res.global_distribution.items()}
    else:
        report["certificate"] = {_keyed(c, s): y for (c, s), y in zip(res.rows, res.certificate.y)}
        report["bell_inequality"] = {
            "functional": {_keyed(c, s): y for (c, s), y in res.bell_inequality().items()},
            "local_bound": Fraction(0),
            "model_value": sum((y * model[c][s] for (c, s), y in res.bell_inequality().items()),
                               start=Fraction(0)),
        }
    return (0 if res.feasible else 1), report


def cmd_find_local(args):
    doc = parse_model(read_text(args.file))
    if args.denom_bound is not None and args.denom_bound < 1:
        raise UsageError("--denom-bound must be a positive integer")
    exact, rep = _exact_model(doc, args.denom_bound)
    code, report = local_model_report(exact, rep)
    return code, {"model": doc.name, **report}


def _parse_labels(raw: str, n: int, flag: str) -> list[str]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != n or not all(parts):
        raise UsageError(f"{flag} expects {n} comma-separated values, got {raw!r}")
    return parts


def cmd_bell(args):
    a, b, c = _parse_labels(args.pairs, 3, "--pairs")
    text = read_text(args.file)
    if is_correlation_document(text):
        doc = parse_correlations(text)
        table, variant, name = doc.table, doc.variant, doc.name
    else:
        mdoc = parse_model(text)
        # a model's correlations are those of one family of +-1 variables
        table, variant, name = CorrelationTable(), "same", mdoc.name
        for x, y in ((a, b), (c, b), (a, c)):
            table[x, y] = correlation(mdoc.model, x, y)
    try:
        check = check_bell_inequality(table, a, b, c, variant)
    except MissingPair as exc:
        raise DocumentError(str(exc.args[0]), "correlations") from None
    report = {"name": name, "variant": variant, "pairs": f"{a},{b},{c}",
              "lhs": check.lhs, "rhs": check.rhs, "inequality_holds": check.holds}
    if variant == "same":
        targets = {(x, y): -table[x, y] for x, y in combinations((a, b, c), 2)}
        if all(isinstance(v, (int, Fraction)) for v in targets.values()):
            lp = correlation_lp((a, b, c), targets)
            report["correlation_lp"] = "feasible" if lp.feasible else "infeasible"
            if lp.feasible:
                report["atom_weights"] = {",".join(map(str, w)): x for w, x in zip(lp.atoms, lp.weights) if x}
            else:
                rows = ["normalization"] + [f"{x},{y}" for x, y in targets]
                report["certificate"] = dict(zip(rows, lp.certificate.y))
    return (0 if check.holds else 1), report


# -- quantum ------------------------------------------------------------------

def _angles(raw: str) -> list[float]:
    try:
        return [float(t) for t in _parse_labels(raw, 4, "--angles")]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _state(name: str):
    if name == "singlet":
        return singlet_state()
    if name == "mixed":
        return maximally_mixed(4)
    raise UsageError(f"unknown state {name!r}")


def cmd_singlet(args):
    angles = _angles(args.angles)
    state = _state(args.state)
    model = chsh_model(state, angles)
    a1, a2, b1, b2 = CHSH_LABELS
    B = bell_operator(*chsh_observables(angles))
    report = {
        "angles": dict(zip(CHSH_LABELS, angles)),
        "correlations": {f"{x},{y}": correlation(model, x, y) for x in (a1, a2) for y in (b1, b2)},
        "bell_operator_expectation": float(expectation(state, B).real),
        "chsh_value": float(chsh_value(model, (a1, a2), (b1, b2))),
        "no_signalling": is_no_signalling(model).holds,
    }
    exact, rep = _exact_model(_Bare(model), args.denom_bound)
    code, lp = local_model_report(exact, rep)
    report.update(lp)
    return code, report


class _Bare:
    """Adapter giving a bare model the attributes of a ModelDocument."""

    def __init__(self, model):
        self.model, self.name, self.denominator_bound = model, "", None


def cmd_chsh_scan(args):
    if args.step <= 0:
        raise UsageError("--step must be positive")
    state = _state(args.state)
    try:
        scan = max_bell_violation(state, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    B = bell_operator(*chsh_observables(scan.angles))
    top = float(np.max(np.abs(np.linalg.eigvalsh(B))))
    holds = scan.value <= TSIRELSON + 1e-9 and top <= TSIRELSON + 1e-9
    return (0 if holds else 1), {
        "step": args.step,
        "value": scan.value,
        "signed_value": scan.signed_value,
        "angles": dict(zip(CHSH_LABELS, scan.angles)),
        "exceeds_local_bound": scan.value > 2,
        "tsirelson_bound": TSIRELSON,
        "bell_operator_spectral_radius": top,
        "tsirelson_bound_holds": holds,
    }


# -- lattice nets ---------------------------------------------------------------

def _region_observable(net, sites, angle):
    """Spin along the angle on every site of the region, tensored together."""
    S = spin_observable(spin_direction(angle))
    op = np.eye(1, dtype=complex)
    for _ in sites:
        op = np.kron(op, S)
    return op


def _settings(net, region):
    sites = net.region_sites(region.cone)
    return [Setting(f"{a:g}", _region_observable(net, sites, a)) for a in region.settings]


def cmd_aqft_check(args):
    doc = parse_net(read_text(args.file))
    net, regions = doc.net, doc.regions
    cones = [r.cone for r in regions]
    axioms = check_net_axioms(net, cones, doc.translation)
    ok = axioms.ok
    report = {
        "sites": len(net.sites),
        "regions": {r.name: ",".join(net.region_sites(r.cone)) for r in regions},
        "isotony": {"pairs_checked": axioms.isotony_checked, "holds": not axioms.isotony_failures},
        "microcausality": {"pairs_checked": axioms.microcausality_checked,
                           "holds": not axioms.microcausality_failures},
        "covariance": {"status": axioms.covariance, "cones_checked": axioms.covariance_checked},
    }
    pairs = []
    for r1, r2 in combinations(regions, 2):
        s1, s2 = net.region_sites(r1.cone), net.region_sites(r2.cone)
        if not s1 or not s2 or set(s1) & set(s2):
            continue
        entry = {"pair": f"{r1.name},{r2.name}",
                 "spacelike": spacelike_separated(net.points(s1), net.points(s2)).holds}
        if doc.eps is not None and r1.cone.one_plus_one and r2.cone.one_plus_one:
            entry["strictly_spacelike"] = strictly_spacelike_separated(r1.cone, r2.cone, doc.eps).holds
        split = split_check(net, r1.cone, r2.cone)
        entry["split"] = split.holds
        entry["split_factor_sites"] = ",".join(split.witness)
        e = _spin_up(net, s1, r1.settings)
        f = _spin_up(net, s2, r2.settings)
        sch = schlieder_check(net, s1, e, s2, f)
        entry["schlieder"] = sch.holds
        entry["schlieder_dimension"] = sch.details["dimension"]
        ok = ok and split.holds and sch.holds
        pairs.append(entry)
    report["region_pairs"] = pairs
    states = {}
    for r in regions:
        s = net.region_sites(r.cone)
        if not s:
            continue
        v = local_state_check(net, r.cone, r.cone, net.local_state(s))
        states[r.name] = {"holds": v.holds, **{k: float(x) for k, x in v.details["residuals"].items()}}
        ok = ok and v.holds
    report["local_states"] = states
    report["all_hold"] = ok
    return (0 if ok else 1), report


def _spin_up(net, sites, settings):
    """Rank-one projection: spin up along the first setting on every site."""
    if net.local_dim == 2:
        angle = settings[0] if settings else 0.0
        P = (np.eye(2, dtype=complex) + spin_observable(spin_direction(angle))) / 2
    else:
        P = np.zeros((net.local_dim, net.local_dim), dtype=complex)
        P[0, 0] = 1
    op = np.eye(1, dtype=complex)
    for _ in sites:
        op = np.kron(op, P)
    return op


def cmd_aqft_sheaf(args):
    doc = parse_net(read_text(args.file))
    net = doc.net
    by_name = {r.name: r for r in doc.regions}
    chosen = [by_name[n] for n in doc.sheaf_regions]
    for r in chosen:
        if not r.settings:
            raise DocumentError(f"region {r.name} has no settings", f"regions.{r.name}.settings")
        if net.local_dim != 2:
            raise UsageError("spin settings need qubit sites")
    sheaf = spacetime_sheaf(net, [r.cone for r in chosen], [_settings(net, r) for r in chosen],
                            [r.name for r in chosen])
    models = {}
    for tup, model in sheaf.models.items():
        models["+".join(sheaf.names[i] for i in tup)] = {
            "contexts": len(model.scenario.cover),
            "no_signalling": sheaf.verdicts[tup].holds,
        }
    consistent = sheaf.restriction_consistent()
    report = {"regions": list(sheaf.names), "models": models, "restriction_consistent": consistent.holds}
    full = tuple(range(len(chosen)))
    if args.local_model:
        exact, rep = _exact_model(_Bare(sheaf.models[full]), None)
        _, lp = local_model_report(exact, rep)
        report["full_tuple_local_model"] = lp["local_model"]
    holds = all(v.holds for v in sheaf.verdicts.values()) and consistent.holds
    report["no_signalling"] = holds
    return (0 if holds else 1), report


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS,
                        help=f"report format (default: ${ENV_FORMAT} or text)")
    p = argparse.ArgumentParser(prog="sheafctx", parents=[common],
                                description="Locality, no-signalling and contextuality checks.")
    groups = p.add_subparsers(dest="group", required=True)

    sc = groups.add_parser("scenario", parents=[common]).add_subparsers(dest="action", required=True)
    v = sc.add_parser("validate", parents=[common], help="validate the scenario block of a document")
    v.add_argument("file")
    v.set_defaults(func=cmd_scenario_validate)

    md = groups.add_parser("model", parents=[common]).add_subparsers(dest="action", required=True)
    ns = md.add_parser("check-nosig", parents=[common], help="check no-signalling")
    ns.add_argument("file")
    ns.set_defaults(func=cmd_check_nosig)
    fl = md.add_parser("find-local", parents=[common], help="solve the local-model LP")
    fl.add_argument("file")
    fl.add_argument("--denom-bound", type=int, default=None)
    fl.set_defaults(func=cmd_find_local)
    bl = md.add_parser("bell", parents=[common], help="three-setting Bell inequality")
    bl.add_argument("file")
    bl.add_argument("--pairs", required=True, help="settings a,b,c")
    bl.set_defaults(func=cmd_bell)

    qu = groups.add_parser("quantum", parents=[common]).add_subparsers(dest="action", required=True)
    sg = qu.add_parser("singlet", parents=[common], help="CHSH model of a two-qubit state")
    sg.add_argument("--angles", default="0,90,45,135", help="a1,a2,b1,b2 in degrees")
    sg.add_argument("--state", default="singlet", choices=("singlet", "mixed"))
    sg.add_argument("--denom-bound", type=int, default=None)
    sg.set_defaults(func=cmd_singlet)
    cs = qu.add_parser("chsh-scan", parents=[common], help="grid search for the largest Bell value")
    cs.add_argument("--step", type=float, default=45.0)
    cs.add_argument("--state", default="singlet", choices=("singlet", "mixed"))
    cs.set_defaults(func=cmd_chsh_scan)

    aq = groups.add_parser("aqft", parents=[common]).add_subparsers(dest="action", required=True)
    ck = aq.add_parser("check", parents=[common], help="net axioms, split and Schlieder checks")
    ck.add_argument("file")
    ck.set_defaults(func=cmd_aqft_check)
    sh = aq.add_parser("sheaf", parents=[common], help="spacetime empirical models")
    sh.add_argument("file")
    sh.add_argument("--local-model", action="store_true", help="also run the LP on the full region tuple")
    sh.set_defaults(func=cmd_aqft_sheaf)
    return p


def resolve_format(args) -> str:
    explicit = getattr(args, "format", None)
    if explicit:
        return explicit
    env = os.environ.get(ENV_FORMAT)
    if env:
        if env not in FORMATS:
            raise UsageError(f"{ENV_FORMAT}={env!r} is not one of {', '.join(FORMATS)}")
        return env
    return "text"


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        fmt = resolve_format(args)
        code, report = args.func(args)
    except (ValueError, KeyError) as exc:
        # every domain error derives from ValueError; KeyError covers missing pairs
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        err.write(f"error: {message}\n")
        return 2
    emit(report, fmt, out)
    return code


if __name__ == "__main__":
    sys.exit(main())
