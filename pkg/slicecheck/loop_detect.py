# loop_detect.py
"""
Distributed loop-freedom checking.

The network is divided into segments, one per checker. Each checker traverses its own segment
with the loop predicate; a path that steps into another segment is handed over as an external
path message carrying its full history, and the owner resumes it. Messages are exchanged in
supersteps (or consumed as they arrive in free-running mode) until none are in flight.
"""
import logging
import random
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx

from slicecheck.config import DEFAULT_MAX_HOPS
from slicecheck.dpa import DpaStore, TableRef, Topology
from slicecheck.flow_engine import (
    Path,
    Vertex,
    ViolationStatus,
    get_next_path,
    seed_frontier,
    vertex_from_json,
    vertex_json,
)
from slicecheck.header_space import HeaderSpace
from slicecheck.intents import (
    IntentSpec,
    IntentType,
    Outcome,
    Verdict,
    loop_predicate,
    verdict_meta,
)
from slicecheck.slicing import SliceContext

logger = logging.getLogger(__name__)

LOOP_INTENT_ID = "loop-freedom"


@dataclass(frozen=True)
class Segment:
    segment_id: int
    device_ids: frozenset
    checker: int


def _segments(groups: list[list[str]]) -> list[Segment]:
    return [Segment(i, frozenset(g), i) for i, g in enumerate(groups)]


# ---------------------- Dividing the network ----------------------


def partition_random(devices: Iterable[str], k: int, seed: int = 0) -> list[Segment]:
    """
    Random partitioning: every segment gets one device first, the rest land uniformly.
    Args:
        devices (Iterable[str]): Devices to divide.
        k (int): Number of segments (>= 1).
        seed (int): Seed; equal seeds give equal partitions.
    Returns:
        list[Segment]: k segments, none empty when k <= number of devices.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = random.Random(seed)
    order = sorted(devices)
    rng.shuffle(order)
    groups: list[list[str]] = [[] for _ in range(k)]
    for i, device in enumerate(order):
        groups[i if i < k else rng.randrange(k)].append(device)
    return _segments([sorted(g) for g in groups])


def _link_counts(links: Iterable[tuple[str, str]]) -> Counter:
    return Counter(tuple(sorted(pair)) for pair in links if pair[0] != pair[1])


def sparsest_objective(labels: dict[str, int], links: Iterable[tuple[str, str]], k: int) -> float:
    """Inter-segment links divided by the product of all segment sizes."""
    sizes = Counter(labels.values())
    product = 1
    for s in range(k):
        product *= sizes.get(s, 0)
    if product == 0:
        return float("inf")
    cut = sum(n for (a, b), n in _link_counts(links).items() if labels[a] != labels[b])
    return cut / product


def _local_search(labels: dict[str, int], adjacency: dict, order: list[str], k: int) -> dict:
    sizes = Counter(labels.values())
    cut = sum(
        n for a in order for b, n in adjacency[a].items() if a < b and labels[a] != labels[b]
    )

    def product(sz):
        out = 1
        for s in range(k):
            out *= sz[s]
        return out

    current = cut / product(sizes)
    while True:
        best = None
        for device in order:
            src = labels[device]
            if sizes[src] == 1:
                continue
            towards = Counter()
            for peer, n in adjacency[device].items():
                towards[labels[peer]] += n
            for dst in range(k):
                if dst == src:
                    continue
                new_cut = cut + towards[src] - towards[dst]
                trial = product(sizes) // (sizes[src] * sizes[dst])
                trial *= (sizes[src] - 1) * (sizes[dst] + 1)
                value = new_cut / trial
                if value < current - 1e-12 and (best is None or value < best[0] - 1e-12):
                    best = (value, device, dst, new_cut)
        if best is None:
            return labels
        current, device, dst, cut = best
        sizes[labels[device]] -= 1
        sizes[dst] += 1
        labels[device] = dst


def partition_sparsest(
    devices: Iterable[str],
    links: Iterable[tuple[str, str]],
    k: int,
    seed: int = 0,
    restarts: int = 4,
) -> list[Segment]:
    """
    Sparsest-cut partitioning by greedy single-device moves.
    Args:
        devices (Iterable[str]): Devices to divide.
        links (Iterable[tuple[str, str]]): Device pairs, one per link.
        k (int): Number of segments (>= 2; 1 returns everything in one segment).
        seed (int): Seed of the random balanced starts.
        restarts (int): Number of random balanced starts.
    Returns:
        list[Segment]: The best local minimum over all starts, earliest start on ties. A start
        packing whole connected components is tried first when there are at least k of them.
    """
    order = sorted(devices)
    if k <= 1 or len(order) <= k:
        if k <= 1:
            return _segments([order])
        return _segments([[d] for d in order] + [[] for _ in range(k - len(order))])
    links = [tuple(pair) for pair in links]
    adjacency: dict[str, Counter] = {d: Counter() for d in order}
    for (a, b), n in _link_counts(links).items():
        adjacency[a][b] += n
        adjacency[b][a] += n

    starts = []
    graph = nx.Graph()
    graph.add_nodes_from(order)
    graph.add_edges_from(_link_counts(links))
    components = sorted(
        (sorted(c) for c in nx.connected_components(graph)), key=lambda c: (-len(c), c[0])
    )
    if len(components) >= k:
        bins: list[list[str]] = [[] for _ in range(k)]
        for comp in components:
            min(bins, key=len).extend(comp)
        starts.append({d: i for i, b in enumerate(bins) for d in b})
    rng = random.Random(seed)
    for _ in range(restarts):
        shuffled = list(order)
        rng.shuffle(shuffled)
        starts.append({d: i % k for i, d in enumerate(shuffled)})

    best_labels, best_value = None, float("inf")
    for labels in starts:
        labels = _local_search(dict(labels), adjacency, order, k)
        value = sparsest_objective(labels, links, k)
        if value < best_value - 1e-12:
            best_labels, best_value = labels, value
    logger.debug("Sparsest cut over %d starts reached %.6f", len(starts), best_value)
    groups: list[list[str]] = [[] for _ in range(k)]
    for device in order:
        groups[best_labels[device]].append(device)
    return _segments(groups)


def partition(topology: Topology, k: int, scheme: str = "random", seed: int = 0) -> list[Segment]:
    devices = sorted(topology.devices())
    if scheme == "random":
        return partition_random(devices, k, seed)
    if scheme == "sparsest":
        links = [(l.device_a, l.device_b) for l in topology.links]
        return partition_sparsest(devices, links, k, seed)
    raise ValueError(f"unknown partition scheme {scheme!r}")


# ---------------------- Hand-off ----------------------


@dataclass
class ExternalPathMessage:
    path: Path
    next_vertex: Vertex
    segment_id: int

    def to_json(self) -> dict:
        return {
            "path": self.path.to_json(),
            "next_vertex": vertex_json(self.next_vertex),
            "segment": self.segment_id,
        }

    @classmethod
    def from_json(cls, obj: dict, space: HeaderSpace) -> "ExternalPathMessage":
        return cls(
            Path.from_json(obj["path"], space),
            vertex_from_json(obj["next_vertex"], space),
            int(obj["segment"]),
        )


@dataclass
class SegmentStats:
    segment_id: int
    devices: int = 0
    received: int = 0
    emitted: int = 0
    rules_modeled: int = 0
    tables: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "segment": self.segment_id,
            "devices": self.devices,
            "received": self.received,
            "emitted": self.emitted,
            "rules_modeled": self.rules_modeled,
            "tables": self.tables,
        }


class SegmentChecker:
    """Loop checker owning one segment; keeps its own header space and slice."""

    def __init__(
        self,
        segment: Segment,
        owner: dict[str, int],
        store: DpaStore,
        topology: Topology,
        max_hops: int = DEFAULT_MAX_HOPS,
    ):
        self.segment = segment
        self.owner = owner
        self.ctx = SliceContext(store, topology=topology, max_hops=max_hops)
        self.ctx.begin_intent(LOOP_INTENT_ID)
        self.frontier: list[Path] = []
        self.outbox: list[ExternalPathMessage] = []
        self.stats = SegmentStats(segment.segment_id, devices=len(segment.device_ids))

    @property
    def space(self) -> HeaderSpace:
        return self.ctx.space

    def seed(self, refs: Iterable[TableRef]):
        own = [r for r in sorted(set(refs), key=str) if r.device in self.segment.device_ids]
        self.frontier.extend(seed_frontier((r, self.space.universe) for r in own))

    def receive(self, obj: dict):
        msg = ExternalPathMessage.from_json(obj, self.space)
        self.stats.received += 1
        self.frontier.append(msg.path)

    def _predicate(self, path: Path, frontier: list) -> ViolationStatus:
        last = path.last
        if isinstance(last, Vertex) and last.device not in self.segment.device_ids:
            self.outbox.append(
                ExternalPathMessage(path, last, self.owner.get(last.device, -1))
            )
            return ViolationStatus.NEVER
        return loop_predicate(path, frontier)

    def run(self) -> Path | None:
        """Drain the local frontier; returns the first looping path found."""
        witness = get_next_path(self.frontier, self._predicate, self.ctx, self.ctx.max_hops)
        if witness is not None:
            self.frontier.clear()
        return witness

    def collect(self) -> list[dict]:
        out = [m.to_json() for m in self.outbox]
        self.stats.emitted += len(out)
        self.outbox = []
        return out

    def finish(self) -> SegmentStats:
        self.stats.rules_modeled = self.ctx.rules_modeled()
        self.stats.tables = sorted(str(r) for r in self.ctx.tables)
        return self.stats


def boundary_ingress(topology: Topology, owner: dict[str, int]) -> list[TableRef]:
    """Ingress tables on links whose two ends sit in different segments."""
    out = []
    for link in topology.links:
        if owner.get(link.device_a) == owner.get(link.device_b):
            continue
        for device, iface in ((link.device_a, link.interface_a), (link.device_b, link.interface_b)):
            ref = topology.ingress_table(device, iface)
            if ref is not None:
                out.append(ref)
    return out


@dataclass
class LoopRun:
    verdict: Verdict
    messages: int
    supersteps: int
    segments: list[Segment]
    stats: list[SegmentStats]

    @property
    def max_rules_per_checker(self) -> int:
        return max((s.rules_modeled for s in self.stats), default=0)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.to_json(),
            "messages": self.messages,
            "supersteps": self.supersteps,
            "max_rules_per_checker": self.max_rules_per_checker,
            "segments": [s.to_json() for s in self.stats],
        }


def detect_loops_distributed(
    segments: list[Segment],
    store: DpaStore,
    topology: Topology | None = None,
    mode: str = "superstep",
    seed_boundaries: bool = True,
    max_hops: int = DEFAULT_MAX_HOPS,
) -> LoopRun:
    """
    Loop freedom over a divided network.
    Args:
        segments (list[Segment]): Disjoint segments covering every device.
        store (DpaStore): DPA store; every checker opens its own view of it.
        topology (Topology, optional): Wiring; read from the store when omitted.
        mode (str): "superstep" (barrier between rounds) or "free" (messages consumed as they
            arrive).
        seed_boundaries (bool): Also start from ingress tables on inter-segment links.
        max_hops (int): Traversal bound for the full (cross-segment) path.
    Returns:
        LoopRun: Violated with the first looping path found, Holds otherwise, plus message
        counts and per-segment statistics.
    Raises:
        PathLengthExceeded: If a path grows past max_hops.
    """
    start = time.perf_counter()
    topology = topology if topology is not None else store.load_topology()
    owner = {d: s.segment_id for s in segments for d in s.device_ids}
    checkers = [
        SegmentChecker(s, owner, DpaStore(store.root, store.schema), topology, max_hops)
        for s in segments
    ]
    seeds = list(topology.entry_points)
    if seed_boundaries:
        seeds += boundary_ingress(topology, owner)
    for checker in checkers:
        checker.seed(seeds)

    if mode == "superstep":
        witness, messages, steps = _run_supersteps(checkers)
    elif mode == "free":
        witness, messages, steps = _run_free(checkers)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    stats = [c.finish() for c in checkers]
    space = checkers[0].space if checkers else None
    intent = IntentSpec(LOOP_INTENT_ID, int(IntentType.LOOP_FREEDOM))
    verdict = Verdict(
        LOOP_INTENT_ID,
        Outcome.VIOLATED if witness is not None else Outcome.HOLDS,
        witness.to_json() if witness is not None else None,
        meta=verdict_meta(intent, space) if space is not None else {},
    )
    verdict.stats.rules_modeled = sum(s.rules_modeled for s in stats)
    verdict.stats.tables_touched = sum(len(s.tables) for s in stats)
    verdict.stats.steps = sum(c.ctx.steps for c in checkers)
    logger.info(
        "Distributed loop check over %d segments -> %s (%d messages, %d rounds) in %.4f seconds",
        len(segments),
        verdict.outcome.value,
        messages,
        steps,
        time.perf_counter() - start,
    )
    return LoopRun(verdict, messages, steps, segments, stats)


def _run_supersteps(checkers: list[SegmentChecker]):
    inbox: dict[int, list[dict]] = {c.segment.segment_id: [] for c in checkers}
    messages = 0
    step = 0
    while True:
        step += 1
        witness = None
        outgoing: list[dict] = []
        for checker in checkers:
            for obj in inbox[checker.segment.segment_id]:
                checker.receive(obj)
            found = checker.run()
            witness = witness or found
            outgoing.extend(checker.collect())
        if witness is not None:
            return witness, messages + len(outgoing), step
        inbox = {sid: [] for sid in inbox}
        for obj in outgoing:
            inbox[obj["segment"]].append(obj)
        messages += len(outgoing)
        if not outgoing:
            return None, messages, step


def _run_free(checkers: list[SegmentChecker]):
    by_segment = {c.segment.segment_id: c for c in checkers}
    in_flight: deque[dict] = deque()
    messages = 0
    rounds = 0
    for checker in checkers:
        found = checker.run()
        if found is not None:
            return found, messages, 1
        sent = checker.collect()
        messages += len(sent)
        in_flight.extend(sent)
    while in_flight:
        rounds += 1
        obj = in_flight.popleft()
        checker = by_segment[obj["segment"]]
        checker.receive(obj)
        found = checker.run()
        sent = checker.collect()
        messages += len(sent)
        if found is not None:
            return found, messages, rounds
        in_flight.extend(sent)
    return None, messages, rounds
