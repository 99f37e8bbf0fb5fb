"""Game instances, distances, and utility accounting.

An instance is a connected undirected graph with integer edge costs (turns),
a set of alarmed target vertices each carrying a value and a penetration
time, and the number of attacking resources.  Solvers never look at the
weighted graph directly: they call :func:`compile_instance`, which subdivides
heavy edges into unit chains and precomputes shortest paths.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

INF = 10**9


class InstanceError(ValueError):
    """Raised when an instance document cannot be parsed or is invalid."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ParseError(InstanceError):
    pass


class ValidationError(InstanceError):
    """An instance invariant is violated; ``invariant`` names which one."""

    def __init__(self, invariant: str, message: str, location: str | None = None):
        self.invariant = invariant
        super().__init__(f"[{invariant}] {message}", location)


class BudgetExceeded(RuntimeError):
    """An exponential computation would exceed its configured budget."""


@dataclass(frozen=True)
class TargetSpec:
    value: float
    deadline: int


@dataclass(frozen=True)
class PatrolInstance:
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str, int], ...]
    targets: Mapping[str, TargetSpec]
    k: int = 1
    defender_start: str | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple((u, v, int(w)) for u, v, w in self.edges))
        # sorted for deterministic iteration regardless of input order
        object.__setattr__(
            self, "targets", dict(sorted((t, spec) for t, spec in self.targets.items()))
        )
        validate(self)

    @property
    def target_names(self) -> list[str]:
        return list(self.targets)

    def value(self, t: str) -> float:
        return self.targets[t].value

    def deadline(self, t: str) -> int:
        return self.targets[t].deadline

    def is_unit(self) -> bool:
        return all(w == 1 for _, _, w in self.edges)

    def with_k(self, k: int) -> "PatrolInstance":
        return replace(self, k=k)

    @cached_property
    def compiled(self) -> "Board":
        return Board(expand_to_unit_time(self), self.vertices)

    def __hash__(self):
        return hash((self.vertices, self.edges, tuple(self.targets.items()), self.k))


def validate(inst: PatrolInstance) -> None:
    seen = set()
    for v in inst.vertices:
        if not isinstance(v, str) or not v:
            raise ValidationError("vertex-id", f"vertex identifiers must be non-empty strings, got {v!r}")
        if v in seen:
            raise ValidationError("unique-vertices", f"duplicate vertex {v!r}")
        seen.add(v)
    if not inst.vertices:
        raise ValidationError("non-empty", "graph has no vertices")
    for i, (u, v, w) in enumerate(inst.edges):
        loc = f"edges[{i}]"
        for x in (u, v):
            if x not in seen:
                raise ValidationError("unknown-vertex", f"edge endpoint {x!r} is not a vertex", loc)
        if u == v:
            raise ValidationError("no-self-loops", f"self loop on {u!r}", loc)
        if w < 1:
            raise ValidationError("weight >= 1", f"edge weight {w} is below 1", loc)
    for t, spec in inst.targets.items():
        loc = f"targets[{t}]"
        if t not in seen:
            raise ValidationError("unknown-vertex", f"target {t!r} is not a vertex", loc)
        if not (0.0 < spec.value <= 1.0):
            raise ValidationError("value in (0,1]", f"target value {spec.value} out of range", loc)
        if int(spec.deadline) != spec.deadline or spec.deadline < 1:
            raise ValidationError("deadline >= 1", f"deadline {spec.deadline} must be an integer >= 1", loc)
    if inst.k < 1:
        raise ValidationError("k >= 1", f"attacker resources k={inst.k} must be >= 1")
    if inst.defender_start is not None and inst.defender_start not in seen:
        raise ValidationError("unknown-vertex", f"defender_start {inst.defender_start!r} is not a vertex")
    # connectivity
    adj: dict[str, list[str]] = {v: [] for v in inst.vertices}
    for u, v, _ in inst.edges:
        adj[u].append(v)
        adj[v].append(u)
    stack, reached = [inst.vertices[0]], {inst.vertices[0]}
    while stack:
        for y in adj[stack.pop()]:
            if y not in reached:
                reached.add(y)
                stack.append(y)
    if len(reached) != len(inst.vertices):
        missing = sorted(seen - reached)
        raise ValidationError("connected", f"graph is disconnected; unreachable: {missing}")


# --------------------------------------------------------------------------
# instance documents

_TOP_FIELDS = {"vertices", "edges", "targets", "k", "defender_start", "name", "comment"}
_TARGET_FIELDS = {"vertex", "value", "deadline"}


def load_instance(source: str | Path | Mapping) -> PatrolInstance:
    """Parse an instance from a JSON document, a path to one, or a decoded mapping."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        return instance_from_dict(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return instance_from_dict(doc)


def instance_from_dict(doc: Mapping) -> PatrolInstance:
    if not isinstance(doc, Mapping):
        raise ParseError("top level must be an object")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise ParseError(f"unknown field(s) {sorted(unknown)}")
    for req in ("vertices", "edges", "targets", "k"):
        if req not in doc:
            raise ParseError(f"missing required field {req!r}")
    vertices = doc["vertices"]
    if not isinstance(vertices, list) or not all(isinstance(v, str) for v in vertices):
        raise ParseError("must be a list of strings", "vertices")
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not (isinstance(e, list) and len(e) == 3 and isinstance(e[2], int) and not isinstance(e[2], bool)):
            raise ParseError("edge must be [u, v, integer weight]", f"edges[{i}]")
        edges.append((e[0], e[1], e[2]))
    targets = {}
    for i, t in enumerate(doc["targets"]):
        loc = f"targets[{i}]"
        if not isinstance(t, Mapping):
            raise ParseError("target must be an object", loc)
        unknown = set(t) - _TARGET_FIELDS
        if unknown:
            raise ParseError(f"unknown field(s) {sorted(unknown)}", loc)
        try:
            vertex, value, deadline = t["vertex"], t["value"], t["deadline"]
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", loc) from None
        if not isinstance(deadline, int) or isinstance(deadline, bool):
            raise ParseError("deadline must be an integer", loc)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError("value must be a number", loc)
        if vertex in targets:
            raise ValidationError("unique-targets", f"target {vertex!r} listed twice", loc)
        targets[vertex] = TargetSpec(float(value), deadline)
    k = doc["k"]
    if not isinstance(k, int) or isinstance(k, bool):
        raise ParseError("must be an integer", "k")
    return PatrolInstance(
        vertices=tuple(vertices),
        edges=tuple(edges),
        targets=targets,
        k=k,
        defender_start=doc.get("defender_start"),
        name=doc.get("name", ""),
    )


def instance_to_dict(inst: PatrolInstance) -> dict:
    doc = {
        "vertices": list(inst.vertices),
        "edges": [[u, v, w] for u, v, w in inst.edges],
        "targets": [
            {"vertex": t, "value": s.value, "deadline": s.deadline} for t, s in inst.targets.items()
        ],
        "k": inst.k,
    }
    if inst.defender_start is not None:
        doc["defender_start"] = inst.defender_start
    if inst.name:
        doc["name"] = inst.name
    return doc


def dump_instance(inst: PatrolInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


# --------------------------------------------------------------------------
# distances


@dataclass(frozen=True)
class DistanceMatrix:
    vertices: tuple[str, ...]
    dist: np.ndarray
    next_hop: tuple[tuple[str | None, ...], ...]

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    def __call__(self, u: str, v: str) -> int:
        return int(self.dist[self.index[u], self.index[v]])

    def path(self, u: str, v: str) -> list[str]:
        out = [u]
        while out[-1] != v:
            out.append(self.next_hop[self.index[out[-1]]][self.index[v]])
        return out


def all_pairs_shortest_paths(inst: PatrolInstance) -> DistanceMatrix:
    """Floyd-Warshall over the weighted graph.

    ``next_hop[i][j]`` is the lexicographically smallest neighbour of ``i``
    lying on some shortest ``i -> j`` path.
    """
    names = inst.vertices
    idx = {v: i for i, v in enumerate(names)}
    n = len(names)
    dist = np.full((n, n), INF, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    nbrs: list[dict[int, int]] = [dict() for _ in range(n)]
    for u, v, w in inst.edges:
        i, j = idx[u], idx[v]
        w = min(w, nbrs[i].get(j, INF))
        nbrs[i][j] = nbrs[j][i] = w
        dist[i, j] = dist[j, i] = w
    for m in range(n):
        dist = np.minimum(dist, dist[:, m, None] + dist[None, m, :])
    hops = []
    for i in range(n):
        order = sorted(nbrs[i], key=lambda j: names[j])
        row = []
        for j in range(n):
            if i == j:
                row.append(None)
                continue
            row.append(next(names[u] for u in order if nbrs[i][u] + dist[u, j] == dist[i, j]))
        hops.append(tuple(row))
    dist.setflags(write=False)
    return DistanceMatrix(tuple(names), dist, tuple(hops))


def expand_to_unit_time(inst: PatrolInstance) -> PatrolInstance:
    """Subdivide every edge of weight w > 1 into w unit edges.

    Fresh vertices are named ``u~v#i`` and carry no target.  Unit instances
    are returned as-is.
    """
    if inst.is_unit():
        return inst
    vertices = list(inst.vertices)
    taken = set(vertices)
    edges = []
    for u, v, w in inst.edges:
        if w == 1:
            edges.append((u, v, 1))
            continue
        chain = [u]
        for i in range(1, w):
            name = f"{u}~{v}#{i}"
            while name in taken:
                name += "'"
            taken.add(name)
            vertices.append(name)
            chain.append(name)
        chain.append(v)
        edges.extend((a, b, 1) for a, b in zip(chain, chain[1:]))
    return replace(inst, vertices=tuple(vertices), edges=tuple(edges))


def normalize_values_topk(inst: PatrolInstance, k: int) -> PatrolInstance:
    """Divide every target value by the sum of the k largest values."""
    ranked = sorted(inst.targets.items(), key=lambda item: (-item[1].value, item[0]))
    scale = sum(spec.value for _, spec in ranked[:k])
    targets = {t: TargetSpec(spec.value / scale, spec.deadline) for t, spec in inst.targets.items()}
    return replace(inst, targets=targets)


def topk_total(inst: PatrolInstance, k: int) -> float:
    return sum(sorted((s.value for s in inst.targets.values()), reverse=True)[:k])


# --------------------------------------------------------------------------
# outcomes


@dataclass(frozen=True)
class AttackEvent:
    turn: int
    targets: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(self.targets))
        if self.turn < 0:
            raise ValueError("attack turn must be non-negative")
        if not self.targets:
            raise ValueError("an attack needs at least one target")


@dataclass(frozen=True)
class GameOutcome:
    saved: frozenset[str]
    lost: frozenset[str]
    defender_utility: float

    def to_dict(self) -> dict:
        return {
            "saved": sorted(self.saved),
            "lost": sorted(self.lost),
            "defender_utility": self.defender_utility,
        }


def outcome_utility(lost: Iterable[str], inst: PatrolInstance) -> float:
    lost = set(lost)
    unknown = lost - set(inst.targets)
    if unknown:
        raise ValueError(f"not targets: {sorted(unknown)}")
    return -sum(inst.targets[t].value for t in sorted(lost))


# --------------------------------------------------------------------------
# compiled form used by the solvers


class Board:
    """Integer-indexed, unit-time view of an instance.

    Vertices are indexed in lexicographic order of their identifiers so that
    "smallest index" is the tie-break everywhere.
    """

    def __init__(self, unit: PatrolInstance, original: Iterable[str] | None = None):
        self.instance = unit
        self.names: list[str] = sorted(unit.vertices)
        self.index = {v: i for i, v in enumerate(self.names)}
        self.n = len(self.names)
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for u, v, _ in unit.edges:
            adj[self.index[u]].add(self.index[v])
            adj[self.index[v]].add(self.index[u])
        self.adj: list[tuple[int, ...]] = [tuple(sorted(a)) for a in adj]
        # moves available each turn: stay first, then neighbours
        self.moves: list[tuple[int, ...]] = [(i,) + self.adj[i] for i in range(self.n)]
        dm = all_pairs_shortest_paths(unit)
        order = [dm.index[v] for v in self.names]
        self.dist: list[list[int]] = dm.dist[np.ix_(order, order)].tolist()
        self.distances = dm
        self.targets: list[int] = sorted(self.index[t] for t in unit.targets)
        self.value: dict[int, float] = {self.index[t]: s.value for t, s in unit.targets.items()}
        self.deadline: dict[int, int] = {self.index[t]: s.deadline for t, s in unit.targets.items()}
        # candidate placements: vertices of the instance before subdivision
        self.original: list[int] = sorted(self.index[v] for v in (original or unit.vertices))
        # declaration order, for tie-breaks that should follow how the instance was written
        declared = list(original or unit.vertices)
        seen = set(declared)
        declared += [v for v in self.names if v not in seen]
        self.rank: list[int] = [0] * self.n
        for pos, v in enumerate(declared):
            self.rank[self.index[v]] = pos

    def name(self, i: int) -> str:
        return self.names[i]

    def path(self, u: int, v: int) -> list[int]:
        return [self.index[x] for x in self.distances.path(self.names[u], self.names[v])]

    def walk(self, waypoints: list[int]) -> list[int]:
        out = [waypoints[0]]
        for a, b in zip(waypoints, waypoints[1:]):
            out.extend(self.path(a, b)[1:])
        return out

    def loss(self, targets: Iterable[int]) -> float:
        return -sum(self.value[t] for t in sorted(targets))


def compile_instance(inst: PatrolInstance) -> Board:
    return inst.compiled
