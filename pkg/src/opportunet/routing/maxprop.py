"""MaxProp: meeting-frequency path costs, hop-count head, ack purging."""

from __future__ import annotations

import heapq
import math

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, dijkstra

from .base import Router, _age_key

INF_COST = math.inf


def maxprop_meeting_update(vec: dict, met) -> dict:
    """Increment the met peer's weight by one and renormalise to sum 1."""
    out = dict(vec)
    out[met] = out.get(met, 0.0) + 1.0
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}


def maxprop_costs(source, vectors: dict) -> dict:
    """Cheapest path cost from `source` to every reachable node.

    `vectors[u]` is u's meeting vector; hop u->w costs ``1 - vectors[u][w]``.
    """
    dist = {source: 0.0}
    done = set()
    heap = [(0.0, _order(source), source)]
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for w, f in vectors.get(u, {}).items():
            nd = d + (1.0 - f)
            if nd < dist.get(w, INF_COST):
                dist[w] = nd
                heapq.heappush(heap, (nd, _order(w), w))
    return dist


def _order(node):
    return (str(type(node)), node)


def maxprop_cost(source, dst, vectors: dict) -> float:
    if source == dst:
        return 0.0
    return maxprop_costs(source, vectors).get(dst, INF_COST)


def hop_threshold(avg_bytes_per_contact: float, capacity: float, mean_size: float) -> int:
    if mean_size <= 0:
        return 0
    return int(math.floor(min(avg_bytes_per_contact, capacity) / mean_size))


def maxprop_rank(messages, costs: dict, threshold: int) -> list:
    """Head: hop_count < threshold by (hops, cost); tail: the rest by cost."""

    def key(m):
        cost = costs.get(m.destination, INF_COST)
        if m.hop_count < threshold:
            return (0, m.hop_count, cost, m.created_at, m.id)
        return (1, cost, m.hop_count, m.created_at, m.id)

    return sorted(messages, key=key)


def maxprop_ack_purge(acks, *buffers) -> list[list[str]]:
    """Delete every buffered copy whose id is acknowledged; ids removed per buffer."""
    removed = []
    for buf in buffers:
        gone = [mid for mid in buf.ids() if mid in acks]
        for mid in sorted(gone):
            buf.remove(mid)
        removed.append(sorted(gone))
    return removed


class MaxPropRouter(Router):
    """MaxProp node state.

    Meeting vectors are kept as rows of an ``n x n`` matrix: row ``u`` is the
    newest copy of u's vector this node has seen, ``stamps[u]`` its age.
    """

    name = "maxprop"

    def __init__(self, node, capacity, n_hosts):
        super().__init__(node, capacity)
        self.n_hosts = n_hosts
        self.matrix = np.zeros((n_hosts, n_hosts))
        self.stamps = np.full(n_hosts, -np.inf)
        self.acks: dict[str, float] = {}
        self.contacts = 0
        self.avg_bytes = 0.0
        self._costs = None

    @property
    def vector(self) -> dict:
        row = self.matrix[self.node]
        return {int(k): float(row[k]) for k in np.flatnonzero(row)}

    def vectors(self) -> dict:
        """Known meeting vectors as ``{node: {peer: f}}``."""
        out = {}
        for u in np.flatnonzero(np.isfinite(self.stamps)):
            row = self.matrix[u]
            out[int(u)] = {int(k): float(row[k]) for k in np.flatnonzero(row)}
        return out

    def costs(self) -> dict:
        if self._costs is None:
            weights = np.where(self.matrix > 0, 1.0 - self.matrix, np.inf)
            graph = csgraph_from_dense(weights, null_value=np.inf)
            dist = dijkstra(graph, directed=True, indices=self.node)
            self._costs = {int(k): float(dist[k]) for k in np.flatnonzero(np.isfinite(dist))}
        return self._costs

    def _bump(self, peer, t):
        row = self.matrix[self.node]
        row[peer] += 1.0
        row /= row.sum()
        self.stamps[self.node] = t

    def _expire_acks(self, t):
        for mid in [m for m, exp in self.acks.items() if exp <= t]:
            del self.acks[mid]

    def meet(self, other, t):
        self._bump(other.node, t)
        other._bump(self.node, t)
        # share every vector each side knows, newest copy wins
        take = other.stamps > self.stamps
        give = self.stamps > other.stamps
        take[self.node] = give[other.node] = False
        mine = self.matrix[give].copy()
        self.matrix[take] = other.matrix[take]
        self.stamps[take] = other.stamps[take]
        other.matrix[give] = mine
        other.stamps[give] = self.stamps[give]
        self._costs = other._costs = None

        self._expire_acks(t)
        other._expire_acks(t)
        merged = {**self.acks, **other.acks}
        self.acks = dict(merged)
        other.acks = dict(merged)
        mine_gone, theirs_gone = maxprop_ack_purge(merged, self.buffer, other.buffer)
        return {self.node: mine_gone, other.node: theirs_gone}

    def contact_down(self, other, t, bytes_moved):
        self.contacts += 1
        self.avg_bytes += (bytes_moved - self.avg_bytes) / self.contacts

    # -- ordering -----------------------------------------------------------
    def threshold(self) -> int:
        sizes = [m.size for m in self.buffer]
        mean = sum(sizes) / len(sizes) if sizes else 0.0
        return hop_threshold(self.avg_bytes, self.buffer.capacity, mean)

    def ranked(self, extra=None) -> list:
        msgs = list(self.buffer)
        if extra is not None:
            msgs.append(extra)
        if len(msgs) < 2:
            return msgs
        return maxprop_rank(msgs, self.costs(), self.threshold())

    def order_for(self, peer, t):
        todo = [m for m in self.buffer if m.destination != peer.node and m.id not in peer.buffer]
        if len(todo) < 2:
            return todo
        return maxprop_rank(todo, self.costs(), self.threshold())

    def wants(self, msg):
        return super().wants(msg) and msg.id not in self.acks

    def eviction_order(self, incoming, t):
        return [m.id for m in reversed(self.ranked(incoming))]

    def on_delivered(self, msg, t):
        super().on_delivered(msg, t)
        self.acks[msg.id] = msg.expires_at
