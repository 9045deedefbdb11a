"""Path graph loading and map-constrained node movement.

Nodes walk shortest paths between uniformly chosen destination vertices at a
constant group speed.  A walker's trajectory depends only on its own random
stream, never on the simulation tick, so positions can be sampled lazily at
any set of times.
"""

from __future__ import annotations

import heapq
import math
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

import numpy as np

EDGE_TAGS = ("land", "water", "both")

_LINE_RE = re.compile(r"^LINE(?::(\w+))?(?:\s+(.*))?$")


class MapError(ValueError):
    """Raised for malformed or unusable map files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float
    tag: str = "both"

    def other(self, w: int) -> int:
        return self.v if w == self.u else self.u


class PathGraph:
    """Undirected planar graph with metre coordinates."""

    def __init__(self, vertices, edges):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.edges: list[Edge] = list(edges)
        self.adjacency: list[list[tuple[int, int]]] = [[] for _ in range(len(self.vertices))]
        self._edge_index: dict[tuple[int, int], int] = {}
        for k, e in enumerate(self.edges):
            if e.u == e.v:
                raise MapError(f"self-loop at vertex {e.u}")
            key = (min(e.u, e.v), max(e.u, e.v))
            if key in self._edge_index:
                raise MapError(f"duplicate edge {key}")
            self._edge_index[key] = k
            self.adjacency[e.u].append((e.v, k))
            self.adjacency[e.v].append((e.u, k))
        for nbrs in self.adjacency:
            nbrs.sort()

    def __len__(self) -> int:
        return len(self.vertices)

    def edge_between(self, a: int, b: int) -> int:
        return self._edge_index[(min(a, b), max(a, b))]

    def components(self, tags=None) -> list[list[int]]:
        """Connected components, optionally restricted to edges whose tag is in `tags`.

        Vertices without any admissible edge are omitted when `tags` is given.
        Components are sorted by size (descending), then smallest vertex.
        """
        seen = [False] * len(self)
        comps = []
        for start in range(len(self)):
            if seen[start]:
                continue
            if tags is not None and not any(self.edges[k].tag in tags for _, k in self.adjacency[start]):
                continue
            seen[start] = True
            stack, comp = [start], []
            while stack:
                u = stack.pop()
                comp.append(u)
                for w, k in self.adjacency[u]:
                    if not seen[w] and (tags is None or self.edges[k].tag in tags):
                        seen[w] = True
                        stack.append(w)
            comps.append(sorted(comp))
        comps.sort(key=lambda c: (-len(c), c[0]))
        return comps

    def to_text(self) -> str:
        lines = []
        for e in self.edges:
            (x1, y1), (x2, y2) = self.vertices[e.u].tolist(), self.vertices[e.v].tolist()
            lines.append(f"LINE:{e.tag} {x1!r},{y1!r} {x2!r},{y2!r}")
        return "\n".join(lines) + "\n"


def _merge_tag(old: str, new: str) -> str:
    return old if old == new else "both"


def load_map(text: str, *, require_connected: bool = True) -> PathGraph:
    """Parse polyline map text into a :class:`PathGraph`.

    Each non-blank line is ``LINE[:tag] x1,y1 x2,y2 ...``; ``#`` starts a
    comment.  Points with identical coordinates are merged into one vertex,
    and a segment given twice keeps a single edge (tags merged to ``both``).
    """
    index: dict[tuple[float, float], int] = {}
    coords: list[tuple[float, float]] = []
    edges: dict[tuple[int, int], Edge] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise MapError(f"expected 'LINE[:tag] x,y x,y ...', got {raw.strip()!r}", lineno)
        tag = m.group(1) or "both"
        if tag not in EDGE_TAGS:
            raise MapError(f"unknown tag {tag!r} (expected one of {', '.join(EDGE_TAGS)})", lineno)
        tokens = [t for t in re.split(r"[\s,]+", m.group(2) or "") if t]
        try:
            values = [float(t) for t in tokens]
        except ValueError as exc:
            raise MapError(f"bad coordinate: {exc}", lineno) from None
        if len(values) % 2 or len(values) < 4:
            raise MapError("a polyline needs an even number of coordinates and at least two points", lineno)
        if not all(math.isfinite(v) for v in values):
            raise MapError("coordinates must be finite", lineno)

        ids = []
        for x, y in zip(values[0::2], values[1::2]):
            key = (x, y)
            if key not in index:
                index[key] = len(coords)
                coords.append(key)
            ids.append(index[key])
        for a, b in zip(ids, ids[1:]):
            if a == b:
                raise MapError("zero-length segment", lineno)
            key = (min(a, b), max(a, b))
            if key in edges:
                old = edges[key]
                edges[key] = Edge(old.u, old.v, old.length, _merge_tag(old.tag, tag))
            else:
                (x1, y1), (x2, y2) = coords[a], coords[b]
                edges[key] = Edge(key[0], key[1], math.hypot(x2 - x1, y2 - y1), tag)

    if not coords:
        raise MapError("map contains no polylines")
    graph = PathGraph(coords, edges.values())
    if require_connected:
        comps = graph.components()
        if len(comps) > 1:
            sizes = ", ".join(str(len(c)) for c in comps)
            raise MapError(f"map graph is disconnected: {len(comps)} components of sizes {sizes}")
    return graph


def _tag_filter(tags) -> frozenset | None:
    if tags is None or tags == "both":
        return None
    if isinstance(tags, str):
        return frozenset((tags, "both"))
    return frozenset(tags)


def shortest_path(graph: PathGraph, source: int, target: int, tags=None) -> list[int]:
    """Minimum-length vertex path from `source` to `target`.

    Equal-cost alternatives are resolved towards the smaller predecessor index.
    """
    dist, pred = _dijkstra(graph, source, _tag_filter(tags))
    if target not in dist:
        raise ValueError(f"vertex {target} unreachable from {source}")
    return _unwind(pred, source, target)


def path_length(graph: PathGraph, path) -> float:
    return sum(graph.edges[graph.edge_between(a, b)].length for a, b in zip(path, path[1:]))


def _dijkstra(graph: PathGraph, source: int, allowed):
    dist = {source: 0.0}
    pred = {source: -1}
    done = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for w, k in graph.adjacency[u]:
            edge = graph.edges[k]
            if allowed is not None and edge.tag not in allowed:
                continue
            nd = d + edge.length
            old = dist.get(w)
            if old is None or nd < old:
                dist[w] = nd
                pred[w] = u
                heapq.heappush(heap, (nd, w))
            elif nd == old and w not in done and u < pred[w]:
                pred[w] = u
    return dist, pred


def _unwind(pred, source, target):
    path = [target]
    while path[-1] != source:
        path.append(pred[path[-1]])
    path.reverse()
    return path


class MovementArea:
    """The part of a graph one node group may use.

    Only edges whose tag the group accepts are traversable, and movement is
    confined to the largest connected component of those edges.
    """

    def __init__(self, graph: PathGraph, tags="both"):
        self.graph = graph
        self.allowed = _tag_filter(tags)
        if len(graph) == 1:
            self.vertices = [0]
        else:
            comps = graph.components(self.allowed)
            if not comps:
                raise MapError(f"no edges usable with tag filter {tags!r}")
            self.vertices = comps[0]
        self._position = {v: i for i, v in enumerate(self.vertices)}
        self._trees: dict[int, dict] = {}

    def path(self, source: int, target: int) -> list[int]:
        if source == target:
            return [source]
        pred = self._trees.get(source)
        if pred is None:
            _, pred = _dijkstra(self.graph, source, self.allowed)
            self._trees[source] = pred
        if target not in pred:
            raise ValueError(f"vertex {target} unreachable from {source}")
        return _unwind(pred, source, target)

    def pick_destination(self, rng: np.random.Generator, exclude: int | None = None) -> int:
        return pick_destination(rng, self.vertices, exclude, self._position.get(exclude))


def pick_destination(rng: np.random.Generator, vertices, exclude=None, exclude_pos=None) -> int:
    """Uniform vertex from `vertices`, never `exclude` unless it is the only one."""
    n = len(vertices)
    if n == 1:
        return vertices[0]
    if exclude_pos is None and exclude is not None:
        try:
            exclude_pos = list(vertices).index(exclude)
        except ValueError:
            exclude_pos = None
    if exclude_pos is None:
        return vertices[int(rng.integers(n))]
    k = int(rng.integers(n - 1))
    return vertices[k + 1 if k >= exclude_pos else k]


@dataclass
class NodePose:
    node: int
    edge: int
    offset: float
    heading: int
    route: list[int]
    speed: float
    x: float = 0.0
    y: float = 0.0


@dataclass
class Walker:
    """One node moving on a :class:`MovementArea`.

    The trajectory is a list of waypoints ``(time, vertex)``; consecutive
    equal vertices encode a pause.  Waypoints are generated on demand.
    """

    node: int
    area: MovementArea
    speed: float
    rng: np.random.Generator
    pause: float = 0.0
    clock: float = 0.0
    times: list[float] = field(default_factory=list)
    path: list[int] = field(default_factory=list)
    start: int | None = None

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        start = self.area.pick_destination(self.rng) if self.start is None else self.start
        if start not in self.area.vertices:
            raise ValueError(f"start vertex {start} is outside the movement area")
        self.times = [0.0]
        self.path = [start]
        self._xy = [tuple(self.area.graph.vertices[start])]
        self._stationary = len(self.area.vertices) == 1

    def extend(self, horizon: float) -> None:
        """Generate waypoints until the trajectory covers `horizon` seconds."""
        if self._stationary:
            return
        g = self.area.graph
        while self.times[-1] < horizon:
            here = self.path[-1]
            dest = self.area.pick_destination(self.rng, here)
            route = self.area.path(here, dest)
            t = self.times[-1]
            for a, b in zip(route, route[1:]):
                t += g.edges[g.edge_between(a, b)].length / self.speed
                self.times.append(t)
                self.path.append(b)
                self._xy.append(tuple(g.vertices[b]))
            if self.pause > 0:
                self.times.append(t + self.pause)
                self.path.append(dest)
                self._xy.append(self._xy[-1])

    def positions(self, times) -> np.ndarray:
        """(len(times), 2) array of positions at the given times."""
        times = np.asarray(times, dtype=float)
        if self._stationary:
            return np.tile(np.asarray(self._xy[0]), (len(times), 1))
        if not len(times):
            return np.empty((0, 2))
        lo, hi = float(times.min()), float(times.max())
        self.extend(hi)
        i0 = max(0, bisect_right(self.times, lo) - 1)
        i1 = bisect_left(self.times, hi, lo=i0) + 1
        xy = np.asarray(self._xy[i0:i1])
        wt = np.asarray(self.times[i0:i1])
        out = np.empty((len(times), 2))
        out[:, 0] = np.interp(times, wt, xy[:, 0])
        out[:, 1] = np.interp(times, wt, xy[:, 1])
        return out

    def pose_at(self, t: float) -> NodePose:
        if self._stationary:
            x, y = self._xy[0]
            return NodePose(self.node, -1, 0.0, 1, [], self.speed, x, y)
        self.extend(t)
        g = self.area.graph
        k = bisect_right(self.times, t) - 1
        k = max(0, min(k, len(self.times) - 2))
        # skip back over pause legs so the pose refers to a real edge
        a, b = self.path[k], self.path[k + 1]
        if a == b:
            j = k
            while j > 0 and self.path[j - 1] == self.path[j]:
                j -= 1
            if j == 0:
                b = self.path[1] if self.path[1] != a else next(w for w, _ in g.adjacency[a])
                edge = g.edges[g.edge_between(a, b)]
                heading = 1 if edge.u == a else -1
                offset = 0.0 if heading == 1 else edge.length
                x, y = self._xy[k]
                return NodePose(self.node, g.edge_between(a, b), offset, heading, self.path[k + 1 :], self.speed, x, y)
            a, b = self.path[j - 1], self.path[j]
            frac = 1.0
        else:
            span = self.times[k + 1] - self.times[k]
            frac = min(1.0, max(0.0, (t - self.times[k]) / span))
        ek = g.edge_between(a, b)
        edge = g.edges[ek]
        heading = 1 if edge.u == a else -1
        along = frac * edge.length
        offset = along if heading == 1 else edge.length - along
        (x1, y1), (x2, y2) = g.vertices[a], g.vertices[b]
        x = x1 + (x2 - x1) * frac
        y = y1 + (y2 - y1) * frac
        return NodePose(self.node, ek, offset, heading, self.path[k + 1 :], self.speed, x, y)

    def advance(self, dt: float) -> NodePose:
        """Move the walker's clock forward by `dt` and return the new pose."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.clock += dt
        return self.pose_at(self.clock)

    def distance_travelled(self, t: float) -> float:
        """Arc length covered by time `t` (pauses excluded)."""
        if self._stationary:
            return 0.0
        self.extend(t)
        g = self.area.graph
        total = 0.0
        for k in range(len(self.times) - 1):
            t0, t1 = self.times[k], self.times[k + 1]
            if t0 >= t:
                break
            a, b = self.path[k], self.path[k + 1]
            if a == b:
                continue
            length = g.edges[g.edge_between(a, b)].length
            total += length * min(1.0, (t - t0) / (t1 - t0))
        return total
