"""JSON document formats for models, correlation tables and lattice nets.

Rationals travel as strings "p/q" in lowest terms. Contexts and sections are
keyed by comma-joined labels, so labels themselves may not contain commas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bell import CorrelationTable
from .distribution import PROBABILITY, REAL, SEMIRINGS, Distribution
from .empirical import EmpiricalModel
from .scenario import Assignment, MeasurementScenario
from .spacetime import DoubleCone, LatticeNet, SpacetimePoint


class DocumentError(ValueError):
    """Malformed document; carries the offending field path and source line when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.message, self.field, self.line = message, field, line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def canonical_dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def fraction_to_str(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_fraction(raw, field: str) -> Fraction:
    if isinstance(raw, bool) or not isinstance(raw, (int, str)):
        raise DocumentError(f"expected a rational string like \"1/2\", got {raw!r}", field)
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise DocumentError(f"{raw!r} is not a rational number", field) from None


class _Source:
    """Raw text plus a best-effort map from field names to line numbers."""

    def __init__(self, text: str):
        self.text = text
        self.lines = text.splitlines()

    def line_of(self, key: str, after: str | None = None) -> int | None:
        start = (self.line_of(after) or 1) if after is not None else 1
        needle = json.dumps(key, ensure_ascii=False)
        for k in range(start, len(self.lines) + 1):
            if needle in self.lines[k - 1]:
                return k
        return None

    def error(self, message: str, field: str, key: str | None = None, after: str | None = None) -> DocumentError:
        return DocumentError(message, field, self.line_of(key, after) if key is not None else None)


def load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, line=exc.lineno) from None


def read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None


def _require(obj, key, kind, field, src: _Source):
    if not isinstance(obj, dict) or key not in obj:
        raise src.error(f"missing required field {key!r}", field)
    value = obj[key]
    if not isinstance(value, kind):
        raise src.error(f"expected a {kind.__name__}", f"{field}.{key}" if field else key, key)
    return value


def _labels(raw, field, src) -> tuple[str, ...]:
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise src.error("expected a list of strings", field)
    for x in raw:
        if "," in x:
            raise src.error(f"label {x!r} contains a comma", field, x)
    return tuple(raw)


# -- models ---------------------------------------------------------------

@dataclass(frozen=True)
class ModelDocument:
    model: EmpiricalModel
    name: str
    denominator_bound: int | None = None


def _scenario_from(raw, src: _Source) -> MeasurementScenario:
    from .scenario import ScenarioError
    block = _require(raw, "scenario", dict, "", src)
    measurements = _labels(_require(block, "measurements", list, "scenario", src), "scenario.measurements", src)
    outcomes = _labels(_require(block, "outcomes", list, "scenario", src), "scenario.outcomes", src)
    cover_raw = _require(block, "cover", list, "scenario", src)
    cover = [_labels(c, f"scenario.cover[{k}]", src) for k, c in enumerate(cover_raw)]
    try:
        return MeasurementScenario(measurements, outcomes, tuple(cover))
    except ScenarioError as exc:
        raise src.error(str(exc), "scenario.cover", "cover") from None


def _weight(raw, carrier, field, src, key, after):
    if carrier is PROBABILITY:
        try:
            return parse_fraction(raw, field)
        except DocumentError as exc:
            raise src.error(exc.message, field, key, after) from None
    if carrier is REAL:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise src.error(f"expected a number, got {raw!r}", field, key, after)
        return float(raw)
    if not isinstance(raw, bool):
        raise src.error(f"expected true or false, got {raw!r}", field, key, after)
    return raw


def parse_model(text: str) -> ModelDocument:
    from .distribution import DistributionError
    from .empirical import ModelError
    from .scenario import ScenarioError
    src = _Source(text)
    raw = load_json(text)
    if not isinstance(raw, dict):
        raise DocumentError("top level must be an object", line=1)
    meta = _require(raw, "metadata", dict, "", src)
    carrier_name = _require(meta, "carrier", str, "metadata", src)
    if carrier_name not in SEMIRINGS:
        raise src.error(f"unknown carrier {carrier_name!r}; expected one of {sorted(SEMIRINGS)}",
                        "metadata.carrier", "carrier")
    carrier = SEMIRINGS[carrier_name]
    name = meta.get("name", "")
    bound = meta.get("denominator_bound")
    if bound is not None and (isinstance(bound, bool) or not isinstance(bound, int) or bound < 1):
        raise src.error("denominator_bound must be a positive integer", "metadata.denominator_bound",
                        "denominator_bound")
    scenario = _scenario_from(raw, src)
    block = _require(raw, "model", dict, "", src)
    table = {}
    for ctx_key, weights in block.items():
        field = f"model[{ctx_key!r}]"
        members = ctx_key.split(",")
        try:
            ctx = scenario.context(members)
        except ScenarioError as exc:
            raise src.error(str(exc), field, ctx_key) from None
        if list(ctx) != members:
            raise src.error(f"context key must list measurements in scenario order: {','.join(ctx)}",
                            field, ctx_key)
        if not isinstance(weights, dict):
            raise src.error("expected an object of section weights", field, ctx_key)
        dist = {}
        for sec_key, w in weights.items():
            values = tuple(sec_key.split(","))
            if len(values) != len(ctx):
                raise src.error(f"section {sec_key!r} does not match context {ctx_key!r}",
                                f"{field}[{sec_key!r}]", sec_key, ctx_key)
            dist[Assignment(ctx, values)] = _weight(w, carrier, f"{field}[{sec_key!r}]", src, sec_key, ctx_key)
        try:
            table[ctx] = Distribution(ctx, dist, carrier)
        except DistributionError as exc:
            raise src.error(str(exc), field, ctx_key) from None
    try:
        model = EmpiricalModel(scenario, table)
    except ModelError as exc:
        raise src.error(str(exc), "model", "model") from None
    return ModelDocument(model, name, bound)


def _weight_out(w, carrier):
    if carrier is PROBABILITY:
        return fraction_to_str(w)
    if carrier is REAL:
        return float(w)
    return bool(w)


def model_to_dict(doc: ModelDocument) -> dict:
    m = doc.model
    meta = {"name": doc.name, "carrier": m.semiring.name}
    if doc.denominator_bound is not None:
        meta["denominator_bound"] = doc.denominator_bound
    block = {}
    for ctx, dist in m.table.items():
        block[",".join(ctx)] = {",".join(s.values): _weight_out(w, m.semiring) for s, w in dist.items()}
    return {"metadata": meta, "scenario": m.scenario.as_dict(), "model": block}


def dump_model(doc: ModelDocument) -> str:
    return canonical_dumps(model_to_dict(doc))


# -- correlation tables -----------------------------------------------------

@dataclass(frozen=True)
class CorrelationDocument:
    table: CorrelationTable
    name: str
    variant: str = "same"


def parse_correlations(text: str) -> CorrelationDocument:
    src = _Source(text)
    raw = load_json(text)
    block = _require(raw, "correlations", dict, "", src)
    table = CorrelationTable()
    for key, v in block.items():
        parts = key.split(",")
        if len(parts) != 2:
            raise src.error("pair keys look like \"x,y\"", f"correlations[{key!r}]", key)
        value = parse_fraction(v, f"correlations[{key!r}]") if isinstance(v, str) else v
        if isinstance(value, bool) or not isinstance(value, (int, float, Fraction)):
            raise src.error(f"expected a correlation, got {v!r}", f"correlations[{key!r}]", key)
        try:
            table[parts[0], parts[1]] = value
        except ValueError as exc:
            raise src.error(str(exc), f"correlations[{key!r}]", key) from None
    meta = raw.get("metadata", {})
    variant = meta.get("variant", "same")
    if variant not in ("same", "cross"):
        raise src.error(f"unknown variant {variant!r}", "metadata.variant", "variant")
    return CorrelationDocument(table, meta.get("name", ""), variant)


def is_correlation_document(text: str) -> bool:
    raw = load_json(text)
    return isinstance(raw, dict) and "correlations" in raw


# -- lattice nets -------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    name: str
    cone: DoubleCone
    settings: tuple[float, ...]


@dataclass(frozen=True)
class NetDocument:
    net: LatticeNet
    regions: tuple[Region, ...]
    translation: tuple[Fraction, ...] | None
    eps: Fraction | None
    sheaf_regions: tuple[str, ...]
    name: str = ""


def _point(raw, field, src, key) -> SpacetimePoint:
    if not isinstance(raw, list) or not 2 <= len(raw) <= 4:
        raise src.error("coordinates are a list of 2 to 4 rationals", field, key)
    return SpacetimePoint.of(*(parse_fraction(c, f"{field}[{k}]") for k, c in enumerate(raw)))


def _complex(raw, field, src):
    if isinstance(raw, list) and len(raw) == 2 and all(isinstance(x, (int, float)) for x in raw):
        return complex(raw[0], raw[1])
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return complex(raw)
    raise src.error(f"expected a number or [re, im], got {raw!r}", field)


def parse_net(text: str) -> NetDocument:
    from .quantum import QuantumError
    from .spacetime import GeometryError, NetError
    src = _Source(text)
    raw = load_json(text)
    if not isinstance(raw, dict):
        raise DocumentError("top level must be an object", line=1)
    sites_raw = _require(raw, "sites", list, "", src)
    sites = []
    for k, s in enumerate(sites_raw):
        field = f"sites[{k}]"
        sid = _require(s, "id", str, field, src)
        try:
            sites.append((sid, _point(_require(s, "coords", list, field, src), f"{field}.coords", src, sid)))
        except GeometryError as exc:
            raise src.error(str(exc), field, sid) from None
    local_dim = raw.get("local_dim", 2)
    if isinstance(local_dim, bool) or not isinstance(local_dim, int) or local_dim < 2:
        raise src.error("local_dim must be an integer >= 2", "local_dim", "local_dim")
    state_raw = _require(raw, "state", dict, "", src)
    if "vector" in state_raw:
        state = np.array([_complex(x, f"state.vector[{k}]", src) for k, x in enumerate(state_raw["vector"])])
    elif "density" in state_raw:
        rows = state_raw["density"]
        if not isinstance(rows, list):
            raise src.error("density is a list of rows", "state.density", "density")
        state = np.array([[_complex(x, f"state.density[{i}][{j}]", src) for j, x in enumerate(row)]
                          for i, row in enumerate(rows)])
    else:
        raise src.error("state needs a \"vector\" or a \"density\"", "state", "state")
    try:
        net = LatticeNet(sites, state, local_dim)
    except (NetError, QuantumError) as exc:
        raise src.error(str(exc), "state", "state") from None

    regions = []
    for k, r in enumerate(_require(raw, "regions", list, "", src)):
        field = f"regions[{k}]"
        name = _require(r, "name", str, field, src)
        base = _point(_require(r, "base", list, field, src), f"{field}.base", src, name)
        apex = _point(_require(r, "apex", list, field, src), f"{field}.apex", src, name)
        try:
            cone = DoubleCone(base, apex)
        except GeometryError as exc:
            raise src.error(str(exc), field, name) from None
        settings = r.get("settings", [])
        if not isinstance(settings, list) or not all(
                isinstance(a, (int, float)) and not isinstance(a, bool) for a in settings):
            raise src.error("settings are a list of angles in degrees", f"{field}.settings", name)
        regions.append(Region(name, cone, tuple(float(a) for a in settings)))
    names = [r.name for r in regions]
    if len(set(names)) != len(names):
        raise src.error("region names must be unique", "regions", "regions")

    translation = raw.get("translation")
    if translation is not None:
        translation = tuple(_point(translation, "translation", src, "translation"))
    eps = raw.get("eps")
    if eps is not None:
        eps = parse_fraction(eps, "eps")
        if eps <= 0:
            raise src.error("eps must be positive", "eps", "eps")
    sheaf = raw.get("sheaf_regions", names)
    if not isinstance(sheaf, list) or any(s not in names for s in sheaf):
        raise src.error("sheaf_regions must name declared regions", "sheaf_regions", "sheaf_regions")
    return NetDocument(net, tuple(regions), translation, eps, tuple(sheaf), raw.get("name", ""))


def net_to_dict(doc: NetDocument) -> dict:
    net = doc.net

    def coords(p):
        keep = p[:2] if all(c == 0 for c in p[2:]) else p
        return [fraction_to_str(c) for c in keep]

    state = net.state
    if state.vector is not None:
        state_out = {"vector": [[float(z.real), float(z.imag)] for z in state.vector]}
    else:
        state_out = {"density": [[[float(z.real), float(z.imag)] for z in row] for row in state.density]}
    out = {
        "name": doc.name,
        "local_dim": net.local_dim,
        "sites": [{"id": sid, "coords": coords(p)} for sid, p in net.sites],
        "state": state_out,
        "regions": [{"name": r.name, "base": coords(r.cone.base), "apex": coords(r.cone.apex),
                     "settings": [int(a) if a == int(a) else a for a in r.settings]} for r in doc.regions],
        "sheaf_regions": list(doc.sheaf_regions),
    }
    if doc.translation is not None:
        out["translation"] = coords(doc.translation)
    if doc.eps is not None:
        out["eps"] = fraction_to_str(doc.eps)
    return out
