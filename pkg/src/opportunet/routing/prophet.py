"""PRoPHET delivery-predictability routing."""

from __future__ import annotations

from dataclasses import dataclass

from .base import Router, _age_key


@dataclass(frozen=True)
class ProphetParams:
    p_init: float = 0.75
    transitivity_scale: float = 0.25  # "beta" key
    aging_base: float = 0.98  # "gamma" key
    seconds_in_time_unit: float = 30.0
    v2_encounter_scaling: bool = False
    typical_interval: float = 1800.0


def prophet_encounter_update(p_ab: float, p_init: float = 0.75) -> float:
    return p_ab + (1.0 - p_ab) * p_init


def prophet_age(p: float, dt: float, aging_base: float = 0.98, seconds_in_time_unit: float = 30.0) -> float:
    if dt < 0:
        raise ValueError("cannot age backwards in time")
    if dt == 0:
        return p
    return p * aging_base ** (dt / seconds_in_time_unit)


def prophet_transitive_update(p_ac: float, p_ab: float, p_bc: float, scale: float = 0.25) -> float:
    return p_ac + (1.0 - p_ac) * p_ab * p_bc * scale


class DeliveryPredictability:
    """Per-node table destination -> P, aged lazily on every access."""

    def __init__(self, params: ProphetParams = ProphetParams(), t: float = 0.0):
        self.params = params
        self.preds: dict[int, float] = {}
        self.last_aged = t

    def age_to(self, t: float) -> None:
        if t < self.last_aged:
            raise ValueError("predictability table aged backwards in time")
        dt = t - self.last_aged
        if dt > 0 and self.preds:
            factor = self.params.aging_base ** (dt / self.params.seconds_in_time_unit)
            for k in self.preds:
                self.preds[k] *= factor
        self.last_aged = t

    def get(self, dst: int) -> float:
        return self.preds.get(dst, 0.0)

    def snapshot(self, t: float) -> dict[int, float]:
        self.age_to(t)
        return dict(self.preds)


def prophet_forward_filter(own: DeliveryPredictability, peer: DeliveryPredictability, messages, peer_node=None):
    """Messages to replicate to a neighbour: destination first, then P_peer > P_own.

    Ordered by descending peer predictability, older messages first on ties.
    Both tables must already be aged to the same time.
    """
    direct, better = [], []
    for m in messages:
        if m.destination == peer_node:
            direct.append(m)
            continue
        pp = peer.get(m.destination)
        if pp > own.get(m.destination):
            better.append((-pp, m.created_at, m.id, m))
    direct.sort(key=_age_key)
    better.sort(key=lambda r: r[:3])
    return direct + [r[3] for r in better]


class ProphetRouter(Router):
    name = "prophet"

    def __init__(self, node, capacity, params: ProphetParams = ProphetParams()):
        super().__init__(node, capacity)
        self.params = params
        self.table = DeliveryPredictability(params)
        self._last_met: dict[int, float] = {}

    def _encounter_p_init(self, peer: int, t: float) -> float:
        p = self.params.p_init
        if self.params.v2_encounter_scaling and peer in self._last_met:
            p *= min(1.0, (t - self._last_met[peer]) / self.params.typical_interval)
        return p

    def meet(self, other, t):
        a, b = self.table, other.table
        a.age_to(t)
        b.age_to(t)
        pa = self._encounter_p_init(other.node, t)
        pb = other._encounter_p_init(self.node, t)
        a.preds[other.node] = prophet_encounter_update(a.get(other.node), pa)
        b.preds[self.node] = prophet_encounter_update(b.get(self.node), pb)
        self._last_met[other.node] = t
        other._last_met[self.node] = t
        # transitive step reads both tables as they stood after the encounter step
        snap_a, snap_b = dict(a.preds), dict(b.preds)
        scale = self.params.transitivity_scale
        for c, p_bc in snap_b.items():
            if c != self.node:
                a.preds[c] = prophet_transitive_update(snap_a.get(c, 0.0), snap_a[other.node], p_bc, scale)
        scale = other.params.transitivity_scale
        for c, p_ac in snap_a.items():
            if c != other.node:
                b.preds[c] = prophet_transitive_update(snap_b.get(c, 0.0), snap_b[self.node], p_ac, scale)
        return {}

    def outgoing(self, peer, t):
        self.table.age_to(t)
        peer.table.age_to(t)
        return prophet_forward_filter(self.table, peer.table, self.buffer, peer.node)
