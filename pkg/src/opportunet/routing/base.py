"""Routing hook contract shared by all protocols."""

from __future__ import annotations

from .message import Buffer, Message, admit


class Router:
    """Per-node routing state and decisions.

    The engine owns time and links; it calls :meth:`meet` once per contact
    (for the pair), asks :meth:`outgoing` for the send order towards a
    neighbour whenever their link is idle, and routes buffer admission through
    :meth:`admit`.  Subclasses override the ordering and eviction policies.
    """

    name = "base"

    def __init__(self, node: int, capacity: float):
        self.node = node
        self.buffer = Buffer(capacity)
        self.delivered: set[str] = set()

    # -- metadata -----------------------------------------------------------
    def meet(self, other: Router, t: float) -> dict[int, list[str]]:
        """Exchange control state with `other` at contact up.

        Returns ids removed from each node's buffer as a result, keyed by node.
        """
        return {}

    def contact_down(self, other: Router, t: float, bytes_moved: int) -> None:
        pass

    # -- forwarding ---------------------------------------------------------
    def outgoing(self, peer: Router, t: float) -> list[Message]:
        """Messages to offer `peer`, best first (peer possession not filtered)."""
        deliverable = [m for m in self.buffer if m.destination == peer.node]
        deliverable.sort(key=_age_key)
        return deliverable + self.order_for(peer, t)

    def order_for(self, peer: Router, t: float) -> list[Message]:
        raise NotImplementedError

    def wants(self, msg: Message) -> bool:
        """Whether this node would accept `msg` at all (before space checks)."""
        return msg.id not in self.buffer and msg.id not in self.delivered

    # -- buffer -------------------------------------------------------------
    def eviction_order(self, incoming: Message, t: float) -> list[str]:
        """Resident ids in drop order: oldest received first."""
        return [m.id for m in self.buffer]

    def admit(self, msg: Message, t: float, protected=()) -> tuple[bool, list[str]]:
        return admit(self.buffer, msg, self.eviction_order(msg, t), protected)

    def on_received(self, msg: Message, sender: int, t: float) -> None:
        pass

    def on_delivered(self, msg: Message, t: float) -> None:
        self.delivered.add(msg.id)

    def on_removed(self, msg: Message) -> None:
        pass


def _age_key(m: Message):
    return (m.created_at, m.id)
