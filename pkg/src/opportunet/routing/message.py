from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, replace


@dataclass(frozen=True, slots=True)
class Message:
    id: str
    source: int
    destination: int
    size: int
    created_at: float
    hop_count: int = 0
    ttl: float = math.inf

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"message {self.id}: size must be at least 1 byte")
        if self.source == self.destination:
            raise ValueError(f"message {self.id}: source and destination must differ")
        if self.hop_count < 0:
            raise ValueError(f"message {self.id}: negative hop count")

    @property
    def expires_at(self) -> float:
        return self.created_at + self.ttl

    def relayed(self) -> Message:
        """The copy a receiver stores after one more hop."""
        return replace(self, hop_count=self.hop_count + 1)


class BufferOverflow(AssertionError):
    pass


class Buffer:
    """Per-node message store.

    Iteration order is arrival order, so the first entry is the
    oldest-received copy.  ``reserved`` holds space promised to transfers
    still in flight towards this node.
    """

    def __init__(self, capacity: float):
        if capacity <= 0:
            raise ValueError("buffer capacity must be positive")
        self.capacity = capacity
        self._items: OrderedDict[str, tuple[Message, float]] = OrderedDict()
        self.occupancy = 0
        self.reserved = 0

    def __contains__(self, msg_id: str) -> bool:
        return msg_id in self._items

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return (m for m, _ in self._items.values())

    def get(self, msg_id: str) -> Message | None:
        item = self._items.get(msg_id)
        return None if item is None else item[0]

    def received_at(self, msg_id: str) -> float:
        return self._items[msg_id][1]

    def ids(self) -> set[str]:
        return set(self._items)

    @property
    def free(self) -> float:
        return self.capacity - self.occupancy - self.reserved

    def add(self, msg: Message, t: float, *, from_reservation: bool = False) -> None:
        if msg.id in self._items:
            raise ValueError(f"duplicate message {msg.id} in buffer")
        reserved = self.reserved - msg.size if from_reservation else self.reserved
        if self.occupancy + msg.size + reserved > self.capacity:
            raise BufferOverflow(
                f"adding {msg.id} ({msg.size} B) to {self.occupancy} B + {reserved} B reserved exceeds {self.capacity} B"
            )
        self.reserved = reserved
        self._items[msg.id] = (msg, t)
        self.occupancy += msg.size
        self.check()

    def remove(self, msg_id: str) -> Message:
        msg, _ = self._items.pop(msg_id)
        self.occupancy -= msg.size
        return msg

    def reserve(self, size: int) -> None:
        if self.occupancy + self.reserved + size > self.capacity:
            raise BufferOverflow(f"cannot reserve {size} B: only {self.free} B free")
        self.reserved += size

    def release(self, size: int) -> None:
        self.reserved -= size

    def check(self) -> None:
        if self.occupancy + self.reserved > self.capacity or self.reserved < 0:
            raise BufferOverflow(
                f"buffer holds {self.occupancy} B + {self.reserved} B reserved > capacity {self.capacity} B"
            )


def admit(buffer: Buffer, msg: Message, eviction_order, protected=()) -> tuple[bool, list[str]]:
    """Decide whether `msg` fits, evicting from `eviction_order` as needed.

    `eviction_order` lists resident ids, first victim first; it may contain
    ``msg.id`` itself, meaning the incoming message ranks below the rest and
    is rejected at that point.  Nothing is evicted when the answer is reject.
    Returns ``(accepted, evicted_ids)``; the caller removes the victims.
    """
    if msg.size > buffer.capacity:
        return False, []
    need = msg.size - buffer.free
    if need <= 0:
        return True, []
    victims = []
    for mid in eviction_order:
        if mid == msg.id:
            return False, []
        if mid in protected or mid not in buffer:
            continue
        victims.append(mid)
        need -= buffer.get(mid).size
        if need <= 0:
            return True, victims
    return False, []
