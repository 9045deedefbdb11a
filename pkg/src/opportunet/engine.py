"""Deterministic fixed-tick simulation loop.

Node movement never depends on routing, so contacts are computed up front
(or read from a trace) and the loop only visits ticks on which something
happens: a contact change, a transfer finishing, a message being created or
expiring, or a link that became free to send.  Visiting every tick would
produce the same event log.
"""

from __future__ import annotations

import heapq
import logging
import math
import os
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from pathlib import Path

import numpy as np

from .config import ConfigDocument, ScenarioConfig
from .link import DOWN, UP, ContactEvent, TransferJob, contacts_to_csv, scan_contacts
from .maps import BUILTIN_NAME, river_town_map
from .metrics import EventLog, RunReport
from .routing import BufferOverflow, Message, make_router
from .world import MovementArea, PathGraph, Walker, load_map

log = logging.getLogger(__name__)


class InvariantViolation(AssertionError):
    """A runtime consistency check failed during simulation."""


def tick_of(time: float, tick: float) -> int:
    """Index of the first tick at or after `time`."""
    return math.ceil(round(time / tick, 6))


def time_of(k: int, tick: float) -> float:
    return round(k * tick, 9)


# -- scenario pieces --------------------------------------------------------

def rng_streams(seed: int, n_hosts: int):
    """Per-node mobility generators and one traffic generator from one seed."""
    mobility, traffic = np.random.SeedSequence(seed).spawn(2)
    walkers = [np.random.default_rng(s) for s in mobility.spawn(n_hosts)]
    return walkers, np.random.default_rng(traffic)


@lru_cache(maxsize=8)
def _load_graph(map_file: str) -> PathGraph:
    if not map_file or map_file == BUILTIN_NAME:
        return load_map(river_town_map())
    return load_map(Path(map_file).read_text(encoding="utf-8"))


def load_graph(config: ScenarioConfig) -> PathGraph:
    return _load_graph(config.map_file)


def build_walkers(config: ScenarioConfig, graph: PathGraph | None = None) -> list[Walker]:
    graph = graph or load_graph(config)
    rngs, _ = rng_streams(config.seed, config.n_hosts)
    walkers = []
    node = 0
    for group in config.groups:
        area = MovementArea(graph, group.edges)
        for _ in range(group.count):
            walkers.append(Walker(node, area, group.speed, rngs[node], pause=group.pause))
            node += 1
    return walkers


_TRACE_CACHE: OrderedDict = OrderedDict()
_TRACE_CACHE_SIZE = 16


def mobility_contacts(config: ScenarioConfig) -> tuple:
    """``(tick, a, b, kind)`` contact changes produced by the mobility model.

    Cached per mobility-relevant settings, so runs differing only in router
    or message size reuse one trace.
    """
    key = config.mobility_key()
    hit = _TRACE_CACHE.get(key)
    if hit is None:
        walkers = build_walkers(config)
        hit = tuple(scan_contacts(walkers, config.range, config.tick, config.n_ticks))
        _TRACE_CACHE[key] = hit
        while len(_TRACE_CACHE) > _TRACE_CACHE_SIZE:
            _TRACE_CACHE.popitem(last=False)
    else:
        _TRACE_CACHE.move_to_end(key)
    return hit


def quantize_trace(events, tick: float) -> list[tuple]:
    """Map a contact trace onto ticks.

    A contact that comes up and goes down within one tick is never observed
    by a tick-sampled detector, so both of its events are dropped.
    """
    per_pair: dict[tuple[int, int], list] = {}
    for e in sorted(events, key=lambda e: (e.time, e.kind == UP)):
        per_pair.setdefault((min(e.a, e.b), max(e.a, e.b)), []).append((tick_of(e.time, tick), e.kind))
    out = []
    for (a, b), evs in per_pair.items():
        kept = []
        for k, kind in evs:
            if kept and kept[-1][0] == k and kept[-1][1] == UP and kind == DOWN:
                kept.pop()
                continue
            kept.append((k, kind))
        out.extend((k, a, b, kind) for k, kind in kept)
    out.sort(key=lambda r: (r[0], r[3] == UP, r[1], r[2]))
    return out


class TrafficGenerator:
    """Creates one message per uniformly drawn inter-arrival interval."""

    def __init__(self, rng: np.random.Generator, n_hosts: int, config: ScenarioConfig):
        if n_hosts < 2:
            raise ValueError("traffic needs at least two hosts")
        self.rng = rng
        self.n_hosts = n_hosts
        self.traffic = config.traffic
        self.tick = config.tick
        self.stop = config.duration - config.traffic.cooldown
        self.count = 0
        self.next_time = self._draw(0.0)

    def _draw(self, t: float) -> float:
        return t + float(self.rng.uniform(self.traffic.interval_min, self.traffic.interval_max))

    @property
    def next_tick(self) -> int | None:
        if self.next_time >= self.stop:
            return None
        return tick_of(self.next_time, self.tick)

    def generate(self, k: int) -> list[Message]:
        """Messages due at tick `k` (at most one per drawn interval)."""
        out = []
        t = time_of(k, self.tick)
        while self.next_time < self.stop and tick_of(self.next_time, self.tick) <= k:
            src = int(self.rng.integers(self.n_hosts))
            dst = int(self.rng.integers(self.n_hosts - 1))
            if dst >= src:
                dst += 1
            self.count += 1
            out.append(Message(f"M{self.count}", src, dst, self.traffic.size, t, 0, self.traffic.ttl))
            self.next_time = self._draw(self.next_time)
        return out


def generate_traffic(rng, duration: float, n_hosts: int, config: ScenarioConfig) -> list[Message]:
    """Whole-run message schedule, for inspection and tests."""
    gen = TrafficGenerator(rng, n_hosts, replace(config, duration=duration))
    out = []
    while gen.next_tick is not None:
        out.extend(gen.generate(gen.next_tick))
    return out


class _FixedTraffic:
    """Explicit message list, e.g. for trace replay."""

    def __init__(self, messages, tick):
        self.tick = tick
        self.queue = sorted(
            ((tick_of(m.created_at, tick), i, m) for i, m in enumerate(messages)), key=lambda r: r[:2]
        )
        self.pos = 0

    @property
    def next_tick(self):
        return self.queue[self.pos][0] if self.pos < len(self.queue) else None

    def generate(self, k):
        out = []
        while self.pos < len(self.queue) and self.queue[self.pos][0] <= k:
            m = self.queue[self.pos][2]
            out.append(replace(m, created_at=time_of(k, self.tick)))
            self.pos += 1
        return out


# -- the loop ---------------------------------------------------------------

@dataclass(eq=False)
class _Link:
    a: int
    b: int
    busy: bool = False
    job: TransferJob | None = None
    msg: Message | None = None
    from_a_next: bool = True
    bytes_moved: int = 0


@dataclass
class RunResult:
    config: ScenarioConfig
    events: EventLog
    report: RunReport
    final_status: dict = field(default_factory=dict)
    contacts: list = field(default_factory=list)
    ticks_run: int = 0

    def events_csv(self) -> str:
        return self.events.to_csv()

    def contacts_csv(self) -> str:
        return contacts_to_csv(ContactEvent(time_of(k, self.config.tick), a, b, kind) for k, a, b, kind in self.contacts)


class Simulation:
    """Routing over a fixed contact schedule.

    Tick k is the instant ``k * tick``.  Tick 0 is the start of the run,
    and ticks ``1..n_ticks`` are the clock advances; ``ticks_run`` counts
    the advances visited.  With `every_tick` the loop visits all of them
    instead of skipping idle ones, which is slower but must give the same
    event log.
    """

    def __init__(self, config: ScenarioConfig, contacts, traffic, n_hosts: int | None = None, every_tick: bool = False):
        self.cfg = config
        self.every_tick = every_tick
        self.ticks_run = 0
        self.tick = config.tick
        self.n = n_hosts if n_hosts is not None else config.n_hosts
        self.routers = [make_router(config.router, i, config.buffer_size, config.prophet, self.n) for i in range(self.n)]
        self.contacts = list(contacts)
        for k, a, b, _ in self.contacts:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"contact between {a} and {b} references an unknown node (hosts: {self.n})")
        self.traffic = traffic
        self.events = EventLog()
        self.report = RunReport(
            router=config.router,
            size=config.traffic.size,
            seed=config.seed,
            count_aborts=config.count_aborts,
            scenario=config.scenario_key(),
        )
        self.links: dict[tuple[int, int], _Link] = {}
        self.node_links: list[set] = [set() for _ in range(self.n)]
        self.sending: list[set] = [set() for _ in range(self.n)]
        self.incoming: list[set] = [set() for _ in range(self.n)]
        self.active = [0] * self.n
        self.dirty: set[tuple[int, int]] = set()
        self.heap: list = []
        self.seq = 0
        self.expiry: list = []
        self.messages: dict[str, Message] = {}
        self.delivered: dict[str, float] = {}
        self.expired_ids: set[str] = set()
        self.k = -1

    # -- bookkeeping ------------------------------------------------------
    def _log(self, event, msg: Message, src, dst, hops=None):
        self.events.add(time_of(self.k, self.tick), event, msg.id, src, dst, msg.size, msg.hop_count if hops is None else hops)

    def _mark(self, node: int):
        self.dirty.update(self.node_links[node])

    def _push(self, k, link, job):
        self.seq += 1
        heapq.heappush(self.heap, (k, self.seq, link, job))

    # -- main loop --------------------------------------------------------
    def run(self) -> RunResult:
        n_ticks = self.cfg.n_ticks
        ci = 0
        contacts = self.contacts
        while True:
            cands = []
            if ci < len(contacts):
                cands.append(contacts[ci][0])
            if self.heap:
                cands.append(self.heap[0][0])
            nt = self.traffic.next_tick
            if nt is not None:
                cands.append(nt)
            if self.expiry:
                cands.append(self.expiry[0][0])
            if self.every_tick:
                k = self.k + 1
            elif not cands:
                break
            else:
                k = max(min(cands), self.k + 1)
            if k > n_ticks:
                break
            if k < self.k:
                raise InvariantViolation("clock moved backwards")
            self.k = k
            if k > 0:
                self.ticks_run += 1
            t = time_of(k, self.tick)
            try:
                self._expire(k)
                while ci < len(contacts) and contacts[ci][0] <= k:
                    _, a, b, kind = contacts[ci]
                    ci += 1
                    if kind == UP:
                        self._contact_up(a, b, k, t)
                    else:
                        self._contact_down(a, b, t)
                while self.heap and self.heap[0][0] <= k:
                    _, _, link, job = heapq.heappop(self.heap)
                    self._finish(link, job, k, t)
                for msg in self.traffic.generate(k):
                    self._create(msg, t)
                self._pump(k, t)
            except BufferOverflow as exc:
                raise InvariantViolation(f"t={t}: {exc}") from exc
        self.report.check()
        return RunResult(self.cfg, self.events, self.report, self._final_status(), self.contacts, self.ticks_run)

    def _final_status(self) -> dict:
        status = {"delivered": 0, "buffered": 0, "expired": 0, "dropped": 0}
        held = set()
        for r in self.routers:
            held |= r.buffer.ids()
        for mid in self.messages:
            if mid in self.delivered:
                status["delivered"] += 1
            elif mid in held:
                status["buffered"] += 1
            elif mid in self.expired_ids:
                status["expired"] += 1
            else:
                status["dropped"] += 1
        return status

    # -- steps ------------------------------------------------------------
    def _expire(self, k):
        while self.expiry and self.expiry[0][0] <= k:
            _, mid = heapq.heappop(self.expiry)
            self.expired_ids.add(mid)
            for link in list(self.links.values()):
                if link.job is not None and link.job.msg_id == mid:
                    self._abort(link, time_of(k, self.tick))
            for r in self.routers:
                if mid in r.buffer:
                    msg = r.buffer.remove(mid)
                    r.on_removed(msg)
                    self.report.expired += 1
                    self._log("expired", msg, r.node, None)
                    self._mark(r.node)

    def _contact_up(self, a, b, k, t):
        pair = (a, b)
        if pair in self.links:
            raise InvariantViolation(f"contact {pair} came up twice")
        link = _Link(a, b)
        self.links[pair] = link
        self.node_links[a].add(pair)
        self.node_links[b].add(pair)
        purged = self.routers[a].meet(self.routers[b], t)
        for node in sorted(purged):
            for mid in purged[node]:
                msg = self.messages[mid]
                self.report.removed += 1
                self._log("removed", msg, node, None)
        control = self.cfg.link.control_duration()
        if control > 0:
            link.busy = True
            self._push(tick_of(t + control, self.tick), link, None)
        else:
            self.dirty.add(pair)

    def _contact_down(self, a, b, t):
        pair = (a, b)
        link = self.links.pop(pair, None)
        if link is None:
            raise InvariantViolation(f"contact {pair} went down while not up")
        if link.job is not None:
            self._abort(link, t)
        self.node_links[a].discard(pair)
        self.node_links[b].discard(pair)
        self.dirty.discard(pair)
        ra, rb = self.routers[a], self.routers[b]
        ra.contact_down(rb, t, link.bytes_moved)
        rb.contact_down(ra, t, link.bytes_moved)

    def _release(self, link: _Link):
        job = link.job
        self.sending[job.sender].discard(job.msg_id)
        self.incoming[job.receiver].discard(job.msg_id)
        self.active[job.sender] -= 1
        self.active[job.receiver] -= 1
        link.busy = False
        link.job = None
        link.msg = None
        if self.cfg.single_transfer_per_node:
            self._mark(job.sender)
            self._mark(job.receiver)

    def _abort(self, link: _Link, t):
        job, msg = link.job, link.msg
        job.aborted = True
        if job.receiver != msg.destination:
            self.routers[job.receiver].buffer.release(msg.size)
        self.report.aborted += 1
        self._log("aborted", msg, job.sender, job.receiver)
        self._release(link)
        if self.links.get((link.a, link.b)) is link:
            self.dirty.add((link.a, link.b))

    def _finish(self, link: _Link, job, k, t):
        if job is None:
            if self.links.get((link.a, link.b)) is link:
                link.busy = False
                self.dirty.add((link.a, link.b))
            return
        if job.aborted or link.job is not job:
            return
        msg = link.msg
        copy = msg.relayed()
        link.bytes_moved += msg.size
        self._release(link)
        s, r = job.sender, job.receiver
        self.report.relayed += 1
        self._log("relayed", copy, s, r)
        receiver = self.routers[r]
        if r == msg.destination:
            if msg.id not in self.delivered:
                self.delivered[msg.id] = t
                self.report.delivered += 1
                self.report.latencies.append(t - self.messages[msg.id].created_at)
                self.report.hop_counts.append(copy.hop_count)
                self._log("delivered", copy, s, r)
            receiver.on_delivered(copy, t)
        elif not receiver.wants(copy):
            receiver.buffer.release(msg.size)
            self.report.removed += 1
            self._log("removed", copy, r, None)
        else:
            receiver.buffer.add(copy, t, from_reservation=True)
            receiver.on_received(copy, s, t)
        self.dirty.add((link.a, link.b))
        self._mark(s)
        self._mark(r)

    def _create(self, msg: Message, t):
        self.messages[msg.id] = msg
        self.report.created += 1
        self._log("created", msg, msg.source, msg.destination)
        if math.isfinite(msg.ttl):
            heapq.heappush(self.expiry, (tick_of(msg.expires_at, self.tick), msg.id))
        router = self.routers[msg.source]
        ok, victims = router.admit(msg, t, self.sending[msg.source])
        if not ok:
            self.report.dropped += 1
            self._log("dropped", msg, msg.source, None)
            return
        self._evict(router, victims)
        router.buffer.add(msg, t)
        self._mark(msg.source)

    def _evict(self, router, victims):
        for mid in victims:
            victim = router.buffer.remove(mid)
            router.on_removed(victim)
            self.report.dropped += 1
            self._log("dropped", victim, router.node, None)

    def _pump(self, k, t):
        while self.dirty:
            pending = sorted(self.dirty)
            self.dirty.clear()
            for pair in pending:
                link = self.links.get(pair)
                if link is not None and not link.busy:
                    self._try_start(link, k, t)

    def _try_start(self, link: _Link, k, t):
        a, b = link.a, link.b
        order = ((a, b), (b, a)) if link.from_a_next else ((b, a), (a, b))
        single = self.cfg.single_transfer_per_node
        for s, r in order:
            if single and (self.active[s] or self.active[r]):
                continue
            msg = self._select(s, r, t)
            if msg is None:
                continue
            link.from_a_next = s != a
            duration = self.cfg.link.duration(msg.size, t)
            job = TransferJob(msg.id, s, r, t, t + duration, msg.size)
            link.busy, link.job, link.msg = True, job, msg
            self.sending[s].add(msg.id)
            self.incoming[r].add(msg.id)
            self.active[s] += 1
            self.active[r] += 1
            fk = tick_of(t + duration, self.tick)
            if fk <= k:
                self._finish(link, job, k, t)
            else:
                self._push(fk, link, job)
            return

    def _select(self, s, r, t) -> Message | None:
        sender, receiver = self.routers[s], self.routers[r]
        for msg in sender.outgoing(receiver, t):
            if msg.id in self.incoming[r] or msg.id in self.expired_ids:
                continue
            if msg.destination == r:
                if msg.id in receiver.delivered:
                    continue
                return msg
            if not receiver.wants(msg):
                continue
            ok, victims = receiver.admit(msg.relayed(), t, self.sending[r])
            if not ok:
                continue
            self._evict(receiver, victims)
            receiver.buffer.reserve(msg.size)
            return msg
        return None


# -- entry points ----------------------------------------------------------

def run(
    config: ScenarioConfig, *, contacts=None, messages=None, n_hosts: int | None = None, every_tick: bool = False
) -> RunResult:
    """Run one scenario.

    `contacts` is a list of :class:`ContactEvent` (replay); when omitted the
    mobility model produces them.  `messages` replaces generated traffic.
    """
    if contacts is None:
        ticks = mobility_contacts(config)
    else:
        ticks = quantize_trace(contacts, config.tick)
    hosts = n_hosts if n_hosts is not None else config.n_hosts
    if messages is None:
        _, traffic_rng = rng_streams(config.seed, config.n_hosts)
        traffic = TrafficGenerator(traffic_rng, hosts, config)
    else:
        traffic = _FixedTraffic(messages, config.tick)
    return Simulation(config, ticks, traffic, hosts, every_tick).run()


# -- sweeps ----------------------------------------------------------------

class SweepError(RuntimeError):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def _one(doc: ConfigDocument, router: str, size: int, seed: int, keep_events: bool):
    cfg = doc.replace({"router": router, "traffic.size": size, "sim.seed": seed}).scenario()
    result = run(cfg)
    return (router, size, seed), result.report, result.events_csv() if keep_events else None


def _batch(doc, jobs, keep_events):
    return [_one(doc, *job, keep_events) for job in jobs]


def default_workers() -> int:
    env = os.environ.get("OPPORTUNET_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class SweepResult:
    reports: list
    events: dict = field(default_factory=dict)
    failed: bool = False


def sweep(doc: ConfigDocument, sizes, seeds, routers, *, workers: int | None = None, keep_events: bool = False, on_result=None) -> SweepResult:
    """Run every (router, size, seed) combination.

    Runs sharing a seed share one mobility trace, so jobs are batched by seed.
    Parallel and serial execution give identical reports.
    """
    sizes, seeds, routers = list(sizes), list(seeds), list(routers)
    if not sizes or not seeds or not routers:
        raise ValueError("sizes, seeds and routers must all be non-empty")
    workers = default_workers() if workers is None else workers
    by_seed = {seed: [(ro, si, seed) for ro, si in product(routers, sizes)] for seed in seeds}
    result = SweepResult([])

    def collect(batch):
        for key, report, events in batch:
            result.reports.append(report)
            if events is not None:
                result.events[key] = events
            if on_result is not None:
                on_result(key, report, events)

    try:
        if workers <= 1 or len(by_seed) == 1:
            for jobs in by_seed.values():
                collect(_batch(doc, jobs, keep_events))
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(by_seed))) as pool:
                futures = [pool.submit(_batch, doc, jobs, keep_events) for jobs in by_seed.values()]
                for fut in futures:
                    collect(fut.result())
    except Exception as exc:
        result.failed = True
        raise SweepError(f"sweep aborted after {len(result.reports)} runs: {exc}", result) from exc
    result.reports.sort(key=lambda r: (r.router, r.size, r.seed))
    return result
