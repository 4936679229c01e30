# flow_engine.py
"""
Flow nodes and the symbolic depth-first traversal.

A traversal path is a list of (rule table, packet set) vertices, optionally closed by a
terminal. `get_next_path` pops paths from a stack frontier and asks an intent predicate
whether each can still violate; successors come from `get_next_hops`, which builds flow nodes
lazily for the universe each table has been visited with.
"""
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum, IntEnum
from typing import Callable, Iterable, Iterator, Protocol

from slicecheck.config import DEFAULT_MAX_HOPS
from slicecheck.dpa import (
    DEPTH_PUSH,
    DPA,
    SET_FIELD_CODES,
    Action,
    ActionType,
    RelevantRuleHash,
    RuleTable,
    TableRef,
    Topology,
    digest_rules,
    resolve_forward,
)
from slicecheck.errors import PathLengthExceeded
from slicecheck.header_space import HeaderSpace, PacketSet, parse_field_value

logger = logging.getLogger(__name__)

DEFAULT_ACTIONS = (Action(ActionType.DROP),)


class PathEnd(str, Enum):
    ACCEPTED = "Accepted"
    DROPPED = "Dropped"
    LEFT_NETWORK = "LeftNetwork"
    LOOPED = "Looped"
    OPEN = "Open"


class ViolationStatus(IntEnum):
    NEVER = -1
    INCONCLUSIVE = 0
    VIOLATION = 1


@dataclass(frozen=True)
class FlowNode:
    packet_set: PacketSet
    actions: tuple[Action, ...]
    source_rules: frozenset
    # index of the highest-priority contributing rule; len(rules) for the table default
    priority: int


@dataclass(frozen=True)
class Vertex:
    table: TableRef
    packet_set: PacketSet
    rewritten: bool = False

    @property
    def device(self) -> str:
        return self.table.device


@dataclass(frozen=True)
class Terminal:
    kind: PathEnd
    device: str
    table: TableRef | None
    packet_set: PacketSet
    endpoint: str = ""
    interface: str = ""
    dangling: bool = False


Hop = Vertex | Terminal


@dataclass(frozen=True)
class Path:
    vertices: tuple[Vertex, ...]
    terminal: Terminal | None = None
    # some proper prefix already repeated a vertex
    prefix_looped: bool = field(default=False, compare=False)

    @property
    def last(self) -> Hop:
        return self.terminal if self.terminal is not None else self.vertices[-1]

    def __len__(self):
        return len(self.vertices)

    def extend(self, hop: Hop) -> "Path":
        if self.terminal is not None:
            raise ValueError("cannot extend a terminated path")
        if isinstance(hop, Terminal):
            return Path(self.vertices, hop, self.looped)
        return Path(self.vertices + (hop,), None, self.looped)

    @property
    def looped(self) -> bool:
        return self.prefix_looped or self.loop_start() is not None

    def loop_start(self) -> int | None:
        """
        Index of an earlier vertex the last vertex repeats, or None.
        The last vertex (R, P) repeats an earlier (R, P') when P ⊆ P' and no hop in between
        rewrote headers, or when P = P' regardless of rewrites.
        After a rewrite P ⊆ P' does not show that the packets of P went round the cycle;
        P = P' does, because the cycle then maps all of P' onto itself.
        """
        return self._loop_start

    @cached_property
    def _loop_start(self) -> int | None:
        if self.terminal is not None or len(self.vertices) < 2:
            return None
        last = self.vertices[-1]
        rewrite_free = not last.rewritten
        for i in range(len(self.vertices) - 2, -1, -1):
            earlier = self.vertices[i]
            if earlier.table == last.table:
                if last.packet_set == earlier.packet_set:
                    return i
                if rewrite_free and last.packet_set <= earlier.packet_set:
                    return i
            if earlier.rewritten:
                rewrite_free = False
        return None

    @property
    def end(self) -> PathEnd:
        if self.terminal is not None:
            return self.terminal.kind
        if self.loop_start() is not None:
            return PathEnd.LOOPED
        return PathEnd.OPEN

    def devices(self) -> list[str]:
        out = [v.device for v in self.vertices]
        if self.terminal is not None and self.terminal.device and (
            not out or out[-1] != self.terminal.device
        ):
            out.append(self.terminal.device)
        return out

    def cycle(self) -> list[TableRef]:
        """Tables of the repeated segment when the path loops, else []."""
        start = self.loop_start()
        if start is None:
            return []
        return [v.table for v in self.vertices[start:-1]]

    def to_json(self) -> dict:
        out = {"vertices": [vertex_json(v) for v in self.vertices]}
        if self.terminal is not None:
            t = self.terminal
            out["terminal"] = {
                "kind": t.kind.value,
                "device": t.device,
                "table": t.table.table if t.table else None,
                "packet_set": t.packet_set.space.to_expression(t.packet_set),
                "endpoint": t.endpoint,
                "interface": t.interface,
                "dangling": t.dangling,
            }
        else:
            out["terminal"] = {"kind": self.end.value}
        return out

    @classmethod
    def from_json(cls, obj: dict, space: HeaderSpace) -> "Path":
        vertices = tuple(vertex_from_json(v, space) for v in obj.get("vertices", []))
        raw = obj.get("terminal") or {}
        terminal = None
        if raw.get("kind") in (PathEnd.ACCEPTED, PathEnd.DROPPED, PathEnd.LEFT_NETWORK):
            device = raw.get("device", "")
            terminal = Terminal(
                PathEnd(raw["kind"]),
                device,
                TableRef(device, raw["table"]) if raw.get("table") else None,
                space.from_cubes(raw.get("packet_set", [])),
                raw.get("endpoint", ""),
                raw.get("interface", ""),
                bool(raw.get("dangling", False)),
            )
        return cls(vertices, terminal)


def vertex_json(v: Vertex) -> dict:
    return {
        "device": v.table.device,
        "table": v.table.table,
        "packet_set": v.packet_set.space.to_expression(v.packet_set),
        "rewritten": v.rewritten,
    }


def vertex_from_json(obj: dict, space: HeaderSpace) -> Vertex:
    return Vertex(
        TableRef(obj["device"], obj["table"]),
        space.from_cubes(obj["packet_set"]),
        bool(obj.get("rewritten", False)),
    )


# ---------------------- Flow nodes ----------------------


def build_flow_nodes(
    table: RuleTable,
    universe: PacketSet,
    matches: list[PacketSet] | None = None,
    default_actions: tuple[Action, ...] = DEFAULT_ACTIONS,
) -> list[FlowNode]:
    """
    Partition a universe into flow nodes, one per distinct action sequence.
    Args:
        table (RuleTable): Prioritized rules (earlier wins).
        universe (PacketSet): Domain to partition.
        matches (list[PacketSet], optional): Precomputed match set per rule.
        default_actions (tuple[Action, ...]): Actions for packets no rule matches.
    Returns:
        list[FlowNode]: Disjoint nodes covering the universe, ordered by priority.
    """
    space = universe.space
    remaining = universe
    groups: dict[tuple, list] = {}
    for idx, rule in enumerate(table.rules):
        if remaining.is_empty():
            break
        match = matches[idx] if matches is not None else space.match(rule.match)
        hit = match & remaining
        if hit.is_empty():
            continue
        group = groups.setdefault(rule.actions, [space.empty, set(), idx])
        group[0] = group[0] | hit
        group[1].add(idx)
        remaining = remaining - match
    if not remaining.is_empty():
        group = groups.setdefault(default_actions, [space.empty, set(), len(table.rules)])
        group[0] = group[0] | remaining
    nodes = [
        FlowNode(ps, actions, frozenset(rules), first)
        for actions, (ps, rules, first) in groups.items()
    ]
    nodes.sort(key=lambda n: n.priority)
    return nodes


@dataclass
class TableState:
    """Model fragment of one rule table inside a slice."""

    ref: TableRef
    table: RuleTable
    universe: PacketSet
    flow_nodes: list[FlowNode] | None = None
    relevant: list[int] = field(default_factory=list)
    relevant_hash: RelevantRuleHash | None = None
    _matches: list[PacketSet] | None = None

    def matches(self) -> list[PacketSet]:
        if self._matches is None:
            space = self.universe.space
            self._matches = [space.match(r.match) for r in self.table.rules]
        return self._matches

    def replace_table(self, table: RuleTable):
        self.table = table
        self._matches = None
        self.flow_nodes = None

    def rebuild(self):
        start = time.perf_counter()
        matches = self.matches()
        self.flow_nodes = build_flow_nodes(self.table, self.universe, matches)
        if self.universe.is_empty():
            self.relevant = []
        else:
            self.relevant = [i for i, m in enumerate(matches) if m.overlaps(self.universe)]
        self.relevant_hash = digest_rules(self.table, self.relevant)
        logger.debug(
            "Built %d flow nodes for %s in %.4f seconds",
            len(self.flow_nodes),
            self.ref,
            time.perf_counter() - start,
        )

    def expand(self, ps: PacketSet) -> bool:
        """Grow the universe to cover ps; returns True when flow nodes were rebuilt."""
        if ps <= self.universe:
            if self.flow_nodes is None:
                self.rebuild()
                return True
            return False
        self.universe = self.universe | ps
        self.rebuild()
        return True

    def rule_key(self, index: int) -> tuple[str, str, int]:
        return (self.ref.device, self.ref.table, index)


class ModelSource(Protocol):
    """What the traversal needs from a slice context."""

    space: HeaderSpace
    topology: Topology

    def table_state(self, ref: TableRef) -> TableState: ...

    def device(self, device_id: str) -> DPA: ...

    def note_traversal(self, state: TableState, fn: FlowNode) -> None: ...

    def note_step(self) -> None: ...


# ---------------------- Actions ----------------------


def apply_actions(
    fn: FlowNode, ps: PacketSet, topology: Topology, dpa: DPA, at: TableRef
) -> list[Hop]:
    """
    Apply a flow node's action sequence to ps.
    Args:
        fn (FlowNode): Node whose actions run; ps must be a subset of its packet set.
        ps (PacketSet): Packets being processed.
        topology (Topology): Wiring used to resolve Forward interfaces.
        dpa (DPA): Device that owns the table.
        at (TableRef): Table the actions run in.
    Returns:
        list[Hop]: One successor per Forward/Accept, or a single Dropped terminal.
    """
    space = ps.space
    current = ps
    rewritten = False
    hops: list[Hop] = []
    for action in fn.actions:
        code = action.type_code
        if code in SET_FIELD_CODES:
            field_code = SET_FIELD_CODES[code]
            value = parse_field_value(action.value, space.schema.field(field_code))
            current = space.set_field(current, field_code, 0, value)
            rewritten = True
        elif code == ActionType.SET_DEPTH:
            if action.value == DEPTH_PUSH:
                current = space.push_depth(current)
            else:
                current = space.pop_depth(current)
            rewritten = True
        elif code == ActionType.FORWARD:
            target = resolve_forward(dpa, topology, action.outgoing_interface_id)
            if target.table is not None:
                hops.append(Vertex(target.table, current, rewritten))
            else:
                if target.dangling:
                    logger.warning(
                        "Interface %s on %s resolves nowhere",
                        action.outgoing_interface_id,
                        dpa.name,
                    )
                hops.append(
                    Terminal(
                        PathEnd.LEFT_NETWORK,
                        dpa.name,
                        at,
                        current,
                        interface=action.outgoing_interface_id,
                        dangling=target.dangling,
                    )
                )
        elif code == ActionType.ACCEPT:
            hops.append(Terminal(PathEnd.ACCEPTED, dpa.name, at, current, endpoint=action.value))
        elif code == ActionType.DROP:
            break
    if not hops:
        hops.append(Terminal(PathEnd.DROPPED, dpa.name, at, current))
    return hops


# ---------------------- Traversal ----------------------


def get_next_hops(v: Hop, ctx: ModelSource) -> list[Hop]:
    """
    Successors of a vertex. Loads the device lazily, grows the table universe when v brings
    packets it has not seen and rebuilds the flow nodes for the grown universe.
    """
    if isinstance(v, Terminal):
        return []
    state = ctx.table_state(v.table)
    state.expand(v.packet_set)
    dpa = ctx.device(v.table.device)
    hops: list[Hop] = []
    for fn in state.flow_nodes:
        overlap = fn.packet_set & v.packet_set
        if overlap.is_empty():
            continue
        ctx.note_traversal(state, fn)
        hops.extend(apply_actions(fn, overlap, ctx.topology, dpa, v.table))
    return hops


Predicate = Callable[[Path, list], ViolationStatus]


def seed_frontier(starts: Iterable[tuple[TableRef, PacketSet]]) -> list[Path]:
    """One single-vertex path per (start table, initial set); the first start is popped first."""
    paths = [Path((Vertex(ref, ps),)) for ref, ps in starts if not ps.is_empty()]
    paths.reverse()
    return paths


def get_next_path(
    frontier: list[Path], predicate: Predicate, ctx: ModelSource, max_hops: int = DEFAULT_MAX_HOPS
) -> Path | None:
    """
    Depth-first search for the next violating path.
    Args:
        frontier (list[Path]): Stack of partial paths; left resumable between calls.
        predicate (Predicate): Intent predicate returning a ViolationStatus.
        ctx (ModelSource): Slice context supplying models.
        max_hops (int): Longest path allowed before PathLengthExceeded.
    Returns:
        Path | None: The next path with status 1, or None when the frontier empties.
    Raises:
        PathLengthExceeded: If a path grows past max_hops vertices.
    """
    while True:
        while True:
            if not frontier:
                return None
            path = frontier.pop()
            ctx.note_step()
            status = predicate(path, frontier)
            if status != ViolationStatus.NEVER:
                break
        if status != ViolationStatus.VIOLATION:
            if len(path) >= max_hops:
                raise PathLengthExceeded(
                    f"path exceeded {max_hops} hops at {path.last.table}", max_hops=max_hops
                )
            successors = get_next_hops(path.last, ctx)
            for hop in reversed(successors):
                frontier.append(path.extend(hop))
        if status != ViolationStatus.INCONCLUSIVE:
            return path


def complete_path_predicate(path: Path, frontier: list) -> ViolationStatus:
    if path.terminal is not None or path.loop_start() is not None:
        return ViolationStatus.VIOLATION
    return ViolationStatus.INCONCLUSIVE


def explore(
    ctx: ModelSource, starts: Iterable[tuple[TableRef, PacketSet]], max_hops: int = DEFAULT_MAX_HOPS
) -> Iterator[Path]:
    """Every complete path (terminated or looped) reachable from the starts, in DFS order."""
    frontier = seed_frontier(starts)
    while True:
        path = get_next_path(frontier, complete_path_predicate, ctx, max_hops)
        if path is None:
            return
        yield path
