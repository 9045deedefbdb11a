"""Range-based contact detection, link speed and transfer timing."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

UP = "up"
DOWN = "down"


@dataclass(frozen=True, order=True)
class ContactEvent:
    time: float
    a: int
    b: int
    kind: str

    def __post_init__(self):
        if self.kind not in (UP, DOWN):
            raise ValueError(f"contact kind must be 'up' or 'down', not {self.kind!r}")
        if self.a == self.b:
            raise ValueError("a node cannot be in contact with itself")


@dataclass(frozen=True)
class LinkModel:
    """Timing parameters of the shared radio link (bytes, seconds)."""

    speed: float = 500_000.0
    speed_after: float = 1_000_000.0
    switch_time: float = 10_000.0
    latency: float = 0.2
    instantaneous: bool = False

    def speed_at(self, t: float) -> float:
        return self.speed_after if t > self.switch_time else self.speed

    def duration(self, size: int, t: float) -> float:
        if self.instantaneous:
            return 0.0
        return self.latency + size / self.speed_at(t)

    def control_duration(self) -> float:
        return 0.0 if self.instantaneous else self.latency


def link_speed(t: float, model: LinkModel = LinkModel()) -> float:
    """Link rate in bytes/s at simulation time `t` (step after the switch time)."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return model.speed_at(t)


@dataclass
class TransferJob:
    msg_id: str
    sender: int
    receiver: int
    start: float
    finish: float
    size: int = 0
    aborted: bool = False


def start_transfer(msg, sender: int, receiver: int, t: float, model: LinkModel = LinkModel()) -> TransferJob:
    """Transfer job for `msg`; the rate is sampled once, at `t`."""
    return TransferJob(msg.id, sender, receiver, t, t + model.duration(msg.size, t), msg.size)


def in_range_matrix(positions: np.ndarray, radius: float) -> np.ndarray:
    """Boolean (n, n) upper-triangular matrix of pairs within `radius` (closed)."""
    pos = np.asarray(positions, dtype=float)
    d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    return np.triu(d <= radius, k=1)


def detect_contacts(positions, radius: float, previous: set | None = None, time: float = 0.0):
    """Contact changes for one tick.

    `previous` is the set of ``(a, b)`` pairs (a < b) in contact at the prior
    tick; it is updated in place.  Returns the events, downs before ups, each
    group ordered by pair.
    """
    if previous is None:
        previous = set()
    ia, ib = np.nonzero(in_range_matrix(positions, radius))
    now = set(zip(ia.tolist(), ib.tolist()))
    events = [ContactEvent(time, a, b, DOWN) for a, b in sorted(previous - now)]
    events += [ContactEvent(time, a, b, UP) for a, b in sorted(now - previous)]
    previous.clear()
    previous.update(now)
    return events


def scan_contacts(walkers, radius: float, tick: float, n_ticks: int, chunk: int = 256):
    """Contact events for ticks ``1..n_ticks`` of a mobility scenario.

    Equivalent to calling :func:`detect_contacts` at every tick, but works on
    blocks of ticks and only measures pairs whose bounding boxes come within
    `radius` of each other during the block.  Yields ``(tick_index, a, b, kind)``.
    """
    n = len(walkers)
    up: set[tuple[int, int]] = set()
    if n < 2:
        return
    first = 1
    while first <= n_ticks:
        last = min(n_ticks, first + chunk - 1)
        ks = np.arange(first, last + 1)
        times = ks * tick
        pos = np.stack([w.positions(times) for w in walkers], axis=1)  # (K, n, 2)
        lo = pos.min(axis=0) - radius
        hi = pos.max(axis=0)
        overlap = (
            (lo[:, None, 0] <= hi[None, :, 0])
            & (lo[None, :, 0] <= hi[:, None, 0])
            & (lo[:, None, 1] <= hi[None, :, 1])
            & (lo[None, :, 1] <= hi[:, None, 1])
        )
        ca, cb = np.nonzero(np.triu(overlap, k=1))
        cand = set(zip(ca.tolist(), cb.tolist())) | up
        if cand:
            pairs = np.array(sorted(cand))
            a, b = pairs[:, 0], pairs[:, 1]
            delta = pos[:, a, :] - pos[:, b, :]
            inside = np.hypot(delta[..., 0], delta[..., 1]) <= radius  # (K, m)
            before = np.array([(int(x), int(y)) in up for x, y in pairs])
            state = np.vstack([before[None, :], inside])
            change = state[1:] != state[:-1]
            rows, cols = np.nonzero(change)
            # nonzero is row-major: tick order, then pair order
            batch = []
            for r, c in zip(rows.tolist(), cols.tolist()):
                pair = (int(a[c]), int(b[c]))
                kind = UP if inside[r, c] else DOWN
                batch.append((first + r, kind != DOWN, pair, kind))
            batch.sort()
            for k, _, pair, kind in batch:
                if kind == UP:
                    up.add(pair)
                else:
                    up.discard(pair)
                yield k, pair[0], pair[1], kind
        first = last + 1


def contacts_to_csv(events) -> str:
    """Contact trace CSV with header ``time,a,b,kind``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "a", "b", "kind"])
    for e in events:
        w.writerow([repr(float(e.time)), e.a, e.b, e.kind])
    return buf.getvalue()


def contacts_from_csv(text: str) -> list[ContactEvent]:
    """Parse a contact trace; in time order, up/down must alternate per pair.

    Rows may appear in any order.  Returns events sorted by time, downs
    before ups at equal times.
    """
    reader = csv.reader(io.StringIO(text))
    rows = []
    for lineno, row in enumerate(reader, start=1):
        if not row or row[0].startswith("#"):
            continue
        if lineno == 1 and row[0].strip() == "time":
            continue
        if len(row) != 4:
            raise ValueError(f"line {lineno}: expected time,a,b,kind")
        try:
            t, a, b = float(row[0]), int(row[1]), int(row[2])
        except ValueError:
            raise ValueError(f"line {lineno}: bad number in {row!r}") from None
        kind = row[3].strip()
        if kind not in (UP, DOWN):
            raise ValueError(f"line {lineno}: kind must be up or down")
        if not math.isfinite(t) or t < 0:
            raise ValueError(f"line {lineno}: bad time {row[0]!r}")
        if a == b or a < 0 or b < 0:
            raise ValueError(f"line {lineno}: bad node pair {a},{b}")
        rows.append((lineno, ContactEvent(t, min(a, b), max(a, b), kind)))
    rows.sort(key=lambda r: (r[1].time, r[1].kind == UP, r[1].a, r[1].b))
    state: dict[tuple[int, int], bool] = {}
    for lineno, e in rows:
        pair = (e.a, e.b)
        if state.get(pair, False) == (e.kind == UP):
            raise ValueError(f"line {lineno}: {e.kind} event for {pair} does not alternate")
        state[pair] = e.kind == UP
    return [e for _, e in rows]
