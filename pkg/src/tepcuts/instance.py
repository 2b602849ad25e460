"""TEP instances: buses, corridors with existing and candidate lines.

Instances are stored as JSON documents::

    {
      "header": {"name": "garver6", "sigma": 1.0, "default_angle_limit": 1.0},
      "buses": [{"id": 0, "demand": 0.8, "gen_capacity": 1.5, "gen_cost": 10.0}, ...],
      "corridors": [
        {"from": 0, "to": 1, "angle_limit": 1.0,
         "existing": [{"x": 0.4, "capacity": 1.0, "b": -2.5}],
         "candidates": [{"x": 0.4, "capacity": 1.0, "cost": 40.0}]},
        ...
      ]
    }

Powers are per-unit, angles radians. ``b`` (susceptance) and ``angle_limit``
are optional; ``b`` defaults to ``-1/x`` and ``angle_limit`` to the header's
``default_angle_limit``. ``sigma`` defaults to 1.0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import networkx as nx

SUSCEPTANCE_RTOL = 1e-9


class ParseError(ValueError):
    """Instance document does not follow the schema."""


class ValidationError(ValueError):
    """Instance parsed but violates one or more invariants."""

    def __init__(self, failures: list[str]):
        self.failures = list(failures)
        super().__init__("invalid instance:\n  " + "\n  ".join(self.failures))


@dataclass(frozen=True)
class Bus:
    id: int
    demand: float = 0.0
    gen_capacity: float = 0.0
    gen_cost: float = 0.0


@dataclass(frozen=True)
class Line:
    reactance: float
    capacity: float
    build_cost: float = 0.0
    susceptance: float | None = None

    def __post_init__(self):
        if self.susceptance is None and self.reactance != 0:
            object.__setattr__(self, "susceptance", -1.0 / self.reactance)

    @property
    def cr(self) -> float:
        """Capacity-reactance product x * Pbar."""
        return self.reactance * self.capacity


@dataclass(frozen=True)
class Corridor:
    from_bus: int
    to_bus: int
    existing: tuple[Line, ...] = ()
    candidates: tuple[Line, ...] = ()
    angle_limit: float = math.inf

    @property
    def key(self) -> tuple[int, int]:
        return (self.from_bus, self.to_bus)

    @property
    def n_existing(self) -> int:
        return len(self.existing)

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    @property
    def established(self) -> bool:
        return len(self.existing) > 0

    def line(self, kind: str, k: int) -> Line:
        """1-based access to a line; kind is 'existing' or 'candidate'."""
        lines = self.existing if kind == "existing" else self.candidates
        if not 1 <= k <= len(lines):
            raise IndexError(f"corridor {self.key} has no {kind} line {k}")
        return lines[k - 1]

    def min_existing_cr(self) -> float:
        return min(ln.cr for ln in self.existing)

    def max_cr(self) -> float:
        return max(ln.cr for ln in self.existing + self.candidates)


@dataclass(frozen=True)
class TepInstance:
    buses: tuple[Bus, ...]
    corridors: tuple[Corridor, ...]
    sigma: float = 1.0
    default_angle_limit: float = math.inf
    name: str = ""
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self._index.update({c.key: i for i, c in enumerate(self.corridors)})

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_candidates(self) -> int:
        return sum(c.n_candidates for c in self.corridors)

    def corridor(self, i: int, j: int) -> Corridor:
        """Corridor joining buses i and j, in either orientation."""
        key = (min(i, j), max(i, j))
        try:
            return self.corridors[self._index[key]]
        except KeyError:
            raise KeyError(f"no corridor between buses {i} and {j}") from None

    def has_corridor(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._index

    def potential_graph(self) -> nx.Graph:
        """Every corridor, weighted by the largest x*Pbar among its lines."""
        g = nx.Graph()
        g.add_nodes_from(b.id for b in self.buses)
        for c in self.corridors:
            g.add_edge(c.from_bus, c.to_bus, weight=c.max_cr())
        return g


def established_subgraph(instance: TepInstance) -> nx.Graph:
    """Graph over all buses with one edge per corridor holding an existing line.

    Edge attribute ``weight`` is the smallest x*Pbar over the corridor's
    existing lines, which bounds the angle difference across that corridor.
    """
    g = nx.Graph()
    g.add_nodes_from(b.id for b in instance.buses)
    for c in instance.corridors:
        if c.established:
            g.add_edge(c.from_bus, c.to_bus, weight=c.min_existing_cr())
    return g


# -- parsing ---------------------------------------------------------------

def _get(obj: dict, key: str, where: str, kind=float, default: Any = ...):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object, got {type(obj).__name__}")
    if key not in obj:
        if default is ...:
            raise ParseError(f"{where}.{key}: missing required field")
        return default
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{where}.{key}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{where}.{key}: expected an integer, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ParseError(f"{where}.{key}: expected a list, got {value!r}")
        return value
    return value


def _parse_line(obj: dict, where: str, candidate: bool) -> Line:
    return Line(
        reactance=_get(obj, "x", where),
        capacity=_get(obj, "capacity", where),
        build_cost=_get(obj, "cost", where) if candidate else 0.0,
        susceptance=_get(obj, "b", where, default=None),
    )


def instance_from_dict(doc: dict) -> TepInstance:
    if not isinstance(doc, dict):
        raise ParseError("document: expected an object at top level")
    header = doc.get("header", {})
    if not isinstance(header, dict):
        raise ParseError("header: expected an object")
    sigma = _get(header, "sigma", "header", default=1.0)
    default_limit = _get(header, "default_angle_limit", "header", default=math.inf)
    name = str(header.get("name", ""))

    buses = []
    for n, b in enumerate(_get(doc, "buses", "document", kind=list)):
        where = f"buses[{n}]"
        buses.append(Bus(
            id=_get(b, "id", where, kind=int),
            demand=_get(b, "demand", where, default=0.0),
            gen_capacity=_get(b, "gen_capacity", where, default=0.0),
            gen_cost=_get(b, "gen_cost", where, default=0.0),
        ))

    corridors = []
    for n, c in enumerate(_get(doc, "corridors", "document", kind=list)):
        where = f"corridors[{n}]"
        i, j = _get(c, "from", where, kind=int), _get(c, "to", where, kind=int)
        existing = tuple(_parse_line(e, f"{where}.existing[{k}]", False)
                         for k, e in enumerate(_get(c, "existing", where, kind=list, default=[])))
        cands = tuple(_parse_line(e, f"{where}.candidates[{k}]", True)
                      for k, e in enumerate(_get(c, "candidates", where, kind=list, default=[])))
        corridors.append(Corridor(
            from_bus=i, to_bus=j, existing=existing, candidates=cands,
            angle_limit=_get(c, "angle_limit", where, default=default_limit),
        ))

    buses.sort(key=lambda b: b.id)
    return TepInstance(buses=tuple(buses), corridors=tuple(corridors), sigma=sigma,
                       default_angle_limit=default_limit, name=name)


def validate(instance: TepInstance) -> TepInstance:
    """Check every invariant; raise ValidationError listing all failures."""
    fails = []
    ids = [b.id for b in instance.buses]
    if ids != list(range(len(ids))):
        fails.append(f"bus ids must be unique and dense 0..{len(ids) - 1}, got {sorted(ids)}")
    for b in instance.buses:
        for attr in ("demand", "gen_capacity", "gen_cost"):
            if getattr(b, attr) < 0:
                fails.append(f"bus {b.id}: {attr} must be >= 0")
    seen = set()
    for n, c in enumerate(instance.corridors):
        tag = f"corridor {n} ({c.from_bus},{c.to_bus})"
        if c.from_bus == c.to_bus:
            fails.append(f"{tag}: from and to must differ")
        elif c.from_bus > c.to_bus:
            fails.append(f"{tag}: from must be < to")
        if c.from_bus not in ids or c.to_bus not in ids:
            fails.append(f"{tag}: references unknown bus")
        pair = (min(c.from_bus, c.to_bus), max(c.from_bus, c.to_bus))
        if pair in seen:
            fails.append(f"{tag}: duplicate corridor for bus pair {pair}")
        seen.add(pair)
        if not c.angle_limit > 0:
            fails.append(f"{tag}: angle_limit must be > 0")
        if not (c.existing or c.candidates):
            fails.append(f"{tag}: corridor has no lines")
        for kind, lines in (("existing", c.existing), ("candidate", c.candidates)):
            for k, ln in enumerate(lines, start=1):
                ltag = f"{tag} {kind} line {k}"
                if not ln.reactance > 0:
                    fails.append(f"{ltag}: reactance must be > 0")
                elif not math.isclose(ln.susceptance, -1.0 / ln.reactance,
                                      rel_tol=SUSCEPTANCE_RTOL):
                    fails.append(f"{ltag}: susceptance {ln.susceptance} != -1/x")
                if not ln.capacity > 0:
                    fails.append(f"{ltag}: capacity must be > 0")
                if ln.build_cost < 0:
                    fails.append(f"{ltag}: cost must be >= 0")
    demand = sum(b.demand for b in instance.buses)
    supply = sum(b.gen_capacity for b in instance.buses)
    if supply < demand:
        fails.append(f"total generation capacity {supply} < total demand {demand}: infeasible")
    if fails:
        raise ValidationError(fails)
    return instance


def parse_instance(text: str) -> TepInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno} column {e.colno}: {e.msg}") from e
    return validate(instance_from_dict(doc))


def load_instance(path) -> TepInstance:
    with open(path) as f:
        return parse_instance(f.read())


def instance_to_dict(instance: TepInstance) -> dict:
    header = {"name": instance.name, "sigma": instance.sigma}
    if not math.isinf(instance.default_angle_limit):
        header["default_angle_limit"] = instance.default_angle_limit
    corridors = []
    for c in instance.corridors:
        d = {"from": c.from_bus, "to": c.to_bus}
        if not math.isinf(c.angle_limit):
            d["angle_limit"] = c.angle_limit
        d["existing"] = [{"x": ln.reactance, "capacity": ln.capacity, "b": ln.susceptance}
                         for ln in c.existing]
        d["candidates"] = [{"x": ln.reactance, "capacity": ln.capacity,
                            "cost": ln.build_cost, "b": ln.susceptance}
                           for ln in c.candidates]
        corridors.append(d)
    return {
        "header": header,
        "buses": [{"id": b.id, "demand": b.demand, "gen_capacity": b.gen_capacity,
                   "gen_cost": b.gen_cost} for b in instance.buses],
        "corridors": corridors,
    }


def serialize_instance(instance: TepInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2)
