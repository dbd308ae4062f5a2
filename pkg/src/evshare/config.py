"""YAML configuration documents (schema_version 1).

Numbers may be written as YAML numbers or as strings such as ``"1/3"`` or
``"2e5"``; probabilities written as fractions stay exact.  Unknown keys
are rejected and every validation message carries the line it refers to.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .distributions import TimeLaw
from .economics import Economics, FleetCost
from .errors import ConfigError, InvalidConfig
from .network import NetworkModel, StationSpec, TravelSpec, build_network

SCHEMA_VERSION = 1

_NUM = {"oneOf": [
    {"type": "number"},
    {"type": "string", "pattern": r"^\s*[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?"
                                  r"(\s*/\s*\d+(\.\d*)?)?\s*$"},
]}
_NUMS = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]}
_INT = {"type": "integer", "minimum": 0}
_LAW = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {"family": {"type": "string"}, "scv": _NUM},
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "stations"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "stations": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "arrival_rate", "charge_prob", "mean_charge_time",
                             "num_chargers", "dest_probs"],
                "properties": {
                    "id": {"type": ["string", "integer"]},
                    "arrival_rate": _NUM,
                    "charge_prob": _NUM,
                    "mean_charge_time": _NUM,
                    "num_chargers": {"type": "integer"},
                    "dest_probs": {"oneOf": [
                        {"const": "uniform"},
                        {"type": "object", "additionalProperties": _NUM},
                    ]},
                },
            },
        },
        "travel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "default_time": _NUM,
                "times": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["from", "to", "mean"],
                        "properties": {"from": {"type": ["string", "integer"]},
                                       "to": {"type": ["string", "integer"]},
                                       "mean": _NUM, "scv": _NUM},
                    },
                },
                "family": {"type": "string"},
                "scv": _NUM,
            },
        },
        "economics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "revenue": _NUMS,
                "fleet_cost": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"per_vehicle": _NUM,
                                   "table": {"type": "array", "items": _NUM}},
                },
                "availability_target": _NUMS,
                "charger_cost": _NUMS,
                "loss_penalty": _NUMS,
                "charger_bounds": {"oneOf": [
                    {"type": "null"}, {"type": "integer"},
                    {"type": "array", "items": {"type": "integer"}},
                ]},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["mva", "convolution", "both"]},
                "fleet_size": _INT,
                "max_fleet": {"type": "integer", "minimum": 1},
                "arrival_scv": _NUMS,
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": _NUM,
                "warmup": _NUM,
                "replications": {"type": "integer", "minimum": 1},
                "batches": {"type": "integer", "minimum": 2},
                "charging": _LAW,
                "arrivals": _LAW,
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "selection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "utilisation": _NUM,
                "t0": _NUM,
                "scv": {"type": "array", "items": _NUM},
            },
        },
    },
}


def number(x) -> Fraction | float:
    """YAML scalar -> Fraction (strings, ints) or float (YAML floats)."""
    if isinstance(x, bool):
        raise InvalidConfig(f"expected a number, got {x!r}")
    if isinstance(x, float):
        return x
    try:
        return Fraction(str(x).replace(" ", ""))
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidConfig(f"not a number: {x!r}") from exc


def _floats(x):
    if x is None:
        return None
    if isinstance(x, list):
        return [float(number(v)) for v in x]
    return float(number(x))


@dataclass
class SolverSettings:
    method: str = "mva"
    fleet_size: int | None = None
    max_fleet: int = 100_000
    arrival_scv: float | list[float] | None = None


@dataclass
class SimSettings:
    horizon: float = 2e4
    warmup: float | None = None
    replications: int = 5
    batches: int = 20
    charging: TimeLaw | None = None
    arrivals: TimeLaw | None = None
    workers: int | None = None


@dataclass
class SelectionSettings:
    utilisation: float = 0.5
    t0: float = 0.5
    scv: list[float] = field(default_factory=lambda: [1.0, 3.0, 5.0, 7.0, 9.0])


@dataclass
class Config:
    model: NetworkModel
    stations: list[StationSpec]
    travel: TravelSpec
    economics: Economics
    solver: SolverSettings
    sim: SimSettings
    selection: SelectionSettings
    source: str = "<string>"


def _locate(node: yaml.Node | None, path) -> int | None:
    """1-based line of the YAML node at ``path`` (or its nearest parent)."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def _where(source: str, line: int | None) -> str:
    return f"{source}:{line}" if line else source


def loads(text: str, source: str = "<string>") -> Config:
    try:
        tree = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise InvalidConfig(f"{_where(source, line)}: YAML syntax error: "
                            f"{getattr(exc, 'problem', exc)}") from None
    if not isinstance(doc, dict):
        raise InvalidConfig(f"{source}: expected a mapping at the top level")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for err in errors:
            path = list(err.absolute_path)
            if err.validator == "additionalProperties" and isinstance(err.instance, dict):
                known = err.schema.get("properties", {})
                extra = [k for k in err.instance if k not in known]
                if extra:
                    path.append(extra[0])
            where = _where(source, _locate(tree, path))
            at = "/".join(map(str, path)) or "(top level)"
            lines.append(f"{where}: {at}: {err.message}")
        raise InvalidConfig("invalid configuration\n" + "\n".join(lines))
    try:
        return _build(doc, tree, source)
    except ConfigError as exc:
        raise type(exc)(f"{source}: {exc}") from None


def load(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text, str(path))


def _build(doc: dict, tree, source: str) -> Config:
    raw_stations = doc["stations"]
    ids = [str(s["id"]) for s in raw_stations]
    if len(set(ids)) != len(ids):
        raise InvalidConfig("station ids must be unique")
    stations = []
    for k, s in enumerate(raw_stations):
        sid = str(s["id"])
        if s["dest_probs"] == "uniform":
            share = Fraction(1, len(ids) - 1)
            dests = {j: share for j in ids if j != sid}
        else:
            dests = {str(j): number(p) for j, p in s["dest_probs"].items()}
            unknown = set(dests) - set(ids)
            if unknown:
                line = _locate(tree, ["stations", k, "dest_probs"])
                raise InvalidConfig(f"line {line}: unknown destination station(s) "
                                    f"{sorted(unknown)}")
        stations.append(StationSpec(sid, float(number(s["arrival_rate"])), number(s["charge_prob"]),
                                    float(number(s["mean_charge_time"])), int(s["num_chargers"]),
                                    dests))

    tr = doc.get("travel", {})
    default = tr.get("default_time")
    times: dict[tuple[str, str], float] = {}
    if default is not None:
        for s in stations:
            for j, p in s.dest_probs.items():
                if p > 0:
                    times[(s.id, j)] = float(number(default))
    edge_scv: dict[tuple[str, str], float] = {}
    for e in tr.get("times", []):
        key = (str(e["from"]), str(e["to"]))
        times[key] = float(number(e["mean"]))
        if "scv" in e:
            edge_scv[key] = float(number(e["scv"]))
    family = tr.get("family", "exponential")
    base_scv = tr.get("scv")
    TimeLaw(family, None if base_scv is None else float(number(base_scv)))  # validate
    scv: float | dict = float(number(base_scv)) if base_scv is not None else (
        0.0 if family == "deterministic" else 1.0)
    if edge_scv:
        scv = {key: edge_scv.get(key, scv) for key in times}
    travel = TravelSpec(times, family, scv)
    model = build_network(stations, travel)

    ec = doc.get("economics", {})
    fc = ec.get("fleet_cost", {"per_vehicle": 4})
    if "table" in fc and "per_vehicle" in fc:
        raise InvalidConfig("fleet_cost takes per_vehicle or table, not both")
    cost = (FleetCost(table=tuple(float(number(v)) for v in fc["table"])) if "table" in fc
            else FleetCost(per_vehicle=float(number(fc.get("per_vehicle", 4)))))
    bounds = ec.get("charger_bounds")
    econ = Economics(
        revenue=_floats(ec.get("revenue", 30)),
        fleet_cost=cost,
        availability_target=_floats(ec.get("availability_target", 0.2)),
        charger_cost=_floats(ec.get("charger_cost", 0)),
        loss_penalty=_floats(ec.get("loss_penalty", 0)),
        charger_bounds=bounds,
    )
    # surface shape errors now rather than at first use
    econ.revenue_vector(model), econ.epsilon(model), econ.charger_costs(model)
    econ.penalties(model), econ.bounds(model)

    so = doc.get("solver", {})
    solver = SolverSettings(so.get("method", "mva"), so.get("fleet_size"),
                            so.get("max_fleet", 100_000), _floats(so.get("arrival_scv")))

    si = doc.get("sim", {})

    def law(d):
        return None if d is None else TimeLaw(d["family"], _floats(d.get("scv")))

    sim = SimSettings(float(number(si.get("horizon", 2e4))), _floats(si.get("warmup")),
                      si.get("replications", 5), si.get("batches", 20),
                      law(si.get("charging")), law(si.get("arrivals")), si.get("workers"))
    se = doc.get("selection", {})
    sel = SelectionSettings(float(number(se.get("utilisation", 0.5))),
                            float(number(se.get("t0", 0.5))),
                            [float(number(v)) for v in se.get("scv", [1, 3, 5, 7, 9])])
    return Config(model, stations, travel, econ, solver, sim, sel, source)


def travel_laws(cfg: Config) -> dict[int, TimeLaw]:
    """Per-IS-node travel law from the travel section."""
    model, travel = cfg.model, cfg.travel
    out = {}
    for i in model.is_:
        nd = model.nodes[i]
        edge = (model.station_ids[nd.origin], model.station_ids[nd.dest])
        c2 = travel.edge_scv(edge)
        out[int(i)] = TimeLaw(travel.family, c2)
    return out
