"""Structural backbones: same-direction flow overlays and the paths inside them."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .instance import TepInstance, established_subgraph
from .model import INT_TOL, VariableRef, p, p0, y

EPS_FLOW = 1e-4


@dataclass(frozen=True)
class FlowOverlay:
    arcs: frozenset  # of (i, j): net flow i -> j
    labels: tuple = ()

    def __post_init__(self):
        for i, j in self.arcs:
            if (j, i) in self.arcs:
                raise ValueError(f"corridor ({i},{j}) carries both directions")

    def successors(self, i: int) -> list[int]:
        return sorted(j for a, j in self.arcs if a == i)

    @property
    def nodes(self) -> list[int]:
        return sorted({u for arc in self.arcs for u in arc})

    def records(self) -> str:
        return "".join(json.dumps({"from": i, "to": j, "labels": list(self.labels)}) + "\n"
                       for i, j in sorted(self.arcs))


@dataclass(frozen=True)
class DirectedPath:
    buses: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.buses)) != len(self.buses):
            raise ValueError(f"path {self.buses} repeats a bus")

    @property
    def start(self) -> int:
        return self.buses[0]

    @property
    def end(self) -> int:
        return self.buses[-1]

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.buses, self.buses[1:]))

    @property
    def corridors(self) -> list[tuple[int, int]]:
        return [(min(a, b), max(a, b)) for a, b in self.steps]

    @property
    def intermediates(self) -> frozenset:
        return frozenset(self.buses[1:-1])

    def __len__(self):
        return len(self.buses) - 1

    def record(self) -> str:
        return json.dumps({"buses": list(self.buses)})


@dataclass(frozen=True)
class ParallelFamily:
    start: int
    end: int
    members: tuple[DirectedPath, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("a parallel family needs at least two members")
        for r, a in enumerate(self.members):
            if (a.start, a.end) != (self.start, self.end):
                raise ValueError("family members must share endpoints")
            for b in self.members[r + 1:]:
                if a.intermediates & b.intermediates:
                    raise ValueError("family members must have disjoint intermediate buses")


def net_corridor_flows(values: Mapping[VariableRef, float], instance: TepInstance) -> dict:
    """Net flow from the lower to the higher bus id of every corridor.

    Candidate flows only count for lines that are (at least partly) built.
    """
    out = {}
    for c in instance.corridors:
        i, j = c.key
        total = sum(values.get(p0(i, j, k), 0.0) for k in range(1, c.n_existing + 1))
        for k in range(1, c.n_candidates + 1):
            if values.get(y(i, j, k), 0.0) > INT_TOL:
                total += values.get(p(i, j, k), 0.0)
        out[c.key] = total
    return out


def extract_flow_directions(solution, instance: TepInstance, eps_flow: float = EPS_FLOW,
                            label: str = "") -> FlowOverlay:
    if isinstance(solution, Mapping):
        values, status = solution, "optimal"
    else:
        values, status = solution.values, solution.status
    if status != "optimal":
        raise ValueError(f"cannot read flow directions from a {status} solution")
    arcs = set()
    for (i, j), f in net_corridor_flows(values, instance).items():
        if f > eps_flow:
            arcs.add((i, j))
        elif f < -eps_flow:
            arcs.add((j, i))
    return FlowOverlay(frozenset(arcs), (label,) if label else ())


def layered_overlay(instance: TepInstance, source: int = 0,
                    include_candidates: bool = False) -> FlowOverlay:
    """Orient corridors away from ``source`` by hop depth in the established subgraph.

    Ties (and corridors touching unreachable buses) point from the lower id
    to the higher. Useful as a flow-free backbone for tests and examples.
    """
    graph = established_subgraph(instance)
    depth = nx.single_source_shortest_path_length(graph, source) if source in graph else {}
    arcs = set()
    for c in instance.corridors:
        if not (c.established or include_candidates):
            continue
        i, j = c.key
        di, dj = depth.get(i, math.inf), depth.get(j, math.inf)
        arcs.add((j, i) if dj < di else (i, j))
    return FlowOverlay(frozenset(arcs), ("layered",))


def intersect_overlays(graphs: Sequence[FlowOverlay]) -> FlowOverlay:
    if not graphs:
        raise ValueError("need at least one overlay")
    arcs = frozenset.intersection(*(gr.arcs for gr in graphs))
    labels = tuple(lab for gr in graphs for lab in gr.labels)
    return FlowOverlay(arcs, labels)


def enumerate_paths(overlay: FlowOverlay, max_len: int = 20,
                    max_per_start: int = 1000) -> list[DirectedPath]:
    """Breadth-first enumeration of simple directed paths from every bus.

    ``max_len`` caps the number of buses on a path and ``max_per_start`` the
    number of paths emitted per starting bus. Order: start bus ascending,
    then path length, then successor ids lexicographically.
    """
    if max_len < 2 or max_per_start < 1:
        raise ValueError("need max_len >= 2 and max_per_start >= 1")
    succ = {u: overlay.successors(u) for u in overlay.nodes}
    paths = []
    for s in overlay.nodes:
        emitted = 0
        queue = deque([(s,)])
        while queue and emitted < max_per_start:
            partial = queue.popleft()
            for v in succ.get(partial[-1], ()):
                if v in partial:
                    continue
                ext = partial + (v,)
                paths.append(DirectedPath(ext))
                emitted += 1
                if emitted >= max_per_start:
                    break
                if len(ext) < max_len:
                    queue.append(ext)
    return paths


def group_parallel(paths: Iterable[DirectedPath]) -> list[ParallelFamily]:
    """Greedy first-fit grouping of same-endpoint, intermediate-disjoint paths."""
    groups: dict[tuple[int, int], list[list[DirectedPath]]] = {}
    seen = set()
    for path in paths:
        if path.buses in seen:
            continue
        seen.add(path.buses)
        fams = groups.setdefault((path.start, path.end), [])
        for fam in fams:
            if all(not (path.intermediates & other.intermediates) for other in fam):
                fam.append(path)
                break
        else:
            fams.append([path])
    out = []
    for (s, e), fams in groups.items():
        out.extend(ParallelFamily(s, e, tuple(f)) for f in fams if len(f) >= 2)
    return out


def dump_paths(paths: Iterable[DirectedPath]) -> str:
    return "".join(pth.record() + "\n" for pth in paths)
