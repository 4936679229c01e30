# simulate.py
"""
Per-packet reference simulator. Pushes one concrete header at a time through the tables and
decides intents by brute force, for cross-checking the symbolic verifier on small schemas.
"""
import logging
from dataclasses import dataclass

from slicecheck.config import DEFAULT_MAX_HOPS, ENUMERATION_BOUND_BITS
from slicecheck.dpa import (
    DEPTH_PUSH,
    SET_FIELD_CODES,
    ActionType,
    DpaStore,
    RuleTable,
    TableRef,
    Topology,
    resolve_forward,
)
from slicecheck.errors import PathLengthExceeded, UnknownDevice, UnknownTable
from slicecheck.flow_engine import PathEnd
from slicecheck.header_space import (
    DEFAULT_SCHEMA,
    FieldSchema,
    Header,
    HeaderSpace,
    parse_field_value,
)
from slicecheck.intents import (
    PAIRWISE_TYPES,
    VERIFICATION_ERRORS,
    IntentSpec,
    IntentType,
    Outcome,
    initial_set,
    start_tables,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Branch:
    """Where one copy of a packet ended up."""

    end: PathEnd
    device: str
    devices: tuple[str, ...]
    endpoint: str = ""

    def delivers(self, targets) -> bool:
        if self.end != PathEnd.ACCEPTED:
            return False
        targets = list(targets)
        if not targets:
            return True
        return any(
            self.device == e.model_key
            and (not self.endpoint or not e.vm_name or self.endpoint == e.vm_name)
            for e in targets
        )


def first_match(table: RuleTable, schema: FieldSchema, header: Header) -> int:
    """Index of the first rule matching header; len(table.rules) when none does."""
    for index, rule in enumerate(table.rules):
        if all(mv.matches(schema, header) for mv in rule.match):
            return index
    return len(table.rules)


def _shift(schema: FieldSchema, header: Header, push: bool) -> Header:
    out = list(header)
    for spec in schema.fields:
        levels = spec.depth_levels
        if levels < 2:
            continue
        idx = [schema.dimension_index(spec.code, d) for d in range(levels)]
        values = [header[i] for i in idx]
        values = [0] + values[:-1] if push else values[1:] + [0]
        for i, v in zip(idx, values):
            out[i] = v
    return tuple(out)


class Simulator:
    """
    Concrete packet walker over a stored network.
    Args:
        store (DpaStore): Network models.
        topology (Topology, optional): Wiring; read from the store when omitted.
        max_hops (int): Longest branch before PathLengthExceeded.
    """

    def __init__(
        self, store: DpaStore, topology: Topology | None = None, max_hops: int = DEFAULT_MAX_HOPS
    ):
        self.store = store
        self.schema = store.schema or DEFAULT_SCHEMA
        self.topology = topology if topology is not None else store.load_topology()
        self.max_hops = max_hops
        self.dpas = {d: store.load_dpa(d) for d in store.list_devices()}
        self.packets = 0

    def _table(self, ref: TableRef) -> RuleTable:
        dpa = self.dpas.get(ref.device)
        if dpa is None:
            raise UnknownDevice(f"device {ref.device} is not in the store", device=ref.device)
        table = dpa.table(ref.table)
        if table is None:
            raise UnknownTable(f"{ref} does not exist", device=ref.device, table=ref.table)
        return table

    def _step(self, ref: TableRef, header: Header) -> list[tuple]:
        """Successors of one table visit: (TableRef, header) to continue, or a Branch tail."""
        table = self._table(ref)
        dpa = self.dpas[ref.device]
        index = first_match(table, self.schema, header)
        actions = table.rules[index].actions if index < len(table.rules) else ()
        out = []
        current = header
        for action in actions:
            code = action.type_code
            if code in SET_FIELD_CODES:
                field_code = SET_FIELD_CODES[code]
                value = parse_field_value(action.value, self.schema.field(field_code))
                current = list(current)
                current[self.schema.dimension_index(field_code, 0)] = value
                current = tuple(current)
            elif code == ActionType.SET_DEPTH:
                current = _shift(self.schema, current, action.value == DEPTH_PUSH)
            elif code == ActionType.FORWARD:
                target = resolve_forward(dpa, self.topology, action.outgoing_interface_id)
                if target.table is not None:
                    out.append((target.table, current))
                else:
                    out.append((PathEnd.LEFT_NETWORK, ""))
            elif code == ActionType.ACCEPT:
                out.append((PathEnd.ACCEPTED, action.value))
            elif code == ActionType.DROP:
                break
        if not out:
            out.append((PathEnd.DROPPED, ""))
        return out

    def trace(self, start: TableRef, header: Header) -> list[Branch]:
        """
        Every branch of one packet injected at start.
        Raises:
            PathLengthExceeded: If a branch is longer than max_hops tables.
            UnknownDevice / UnknownTable: If the walk reaches a missing model.
        """
        self.packets += 1
        branches = []
        stack = [((start, header),)]
        while stack:
            history = stack.pop()
            ref, current = history[-1]
            devices = tuple(r.device for r, _ in history)
            if len(history) >= self.max_hops:
                raise PathLengthExceeded(
                    f"packet walk exceeded {self.max_hops} hops at {ref}", max_hops=self.max_hops
                )
            successors = self._step(ref, current)
            for succ in reversed(successors):
                head, tail = succ
                if isinstance(head, TableRef):
                    if (head, tail) in history:
                        looped = Branch(PathEnd.LOOPED, head.device, devices + (head.device,))
                        branches.append(looped)
                    else:
                        stack.append(history + ((head, tail),))
                else:
                    branches.append(Branch(head, ref.device, devices, tail))
        return branches


# ---------------------- Oracle verdicts ----------------------


def _headers(space: HeaderSpace, intent: IntentSpec, origins, targets) -> list[Header]:
    ps = initial_set(intent, space, origins, targets)
    return list(space.enumerate(ps, ENUMERATION_BOUND_BITS))


def _pair_outcome(sim: Simulator, space, intent: IntentSpec, origins, targets) -> Outcome:
    headers = _headers(space, intent, origins, targets)
    starts = start_tables(intent, sim.topology, origins)
    kind = intent.kind
    waypoints = set(intent.waypoints)
    for ref in starts:
        for header in headers:
            for branch in sim.trace(ref, header):
                if kind == IntentType.REACHABILITY and branch.delivers(targets):
                    return Outcome.HOLDS
                if kind == IntentType.SEGMENTATION and branch.delivers(targets):
                    return Outcome.VIOLATED
                if kind == IntentType.WAYPOINT and branch.delivers(targets):
                    if not waypoints & set(branch.devices):
                        return Outcome.VIOLATED
                if kind == IntentType.LOOP_FREEDOM and branch.end == PathEnd.LOOPED:
                    return Outcome.VIOLATED
                if kind == IntentType.BLACKHOLE_FREEDOM and branch.end == PathEnd.DROPPED:
                    return Outcome.VIOLATED
    return Outcome.VIOLATED if kind == IntentType.REACHABILITY else Outcome.HOLDS


def _consistency_outcome(sim: Simulator, space, intent: IntentSpec) -> Outcome:
    headers = _headers(space, intent, None, None)
    signatures = []
    for ref in start_tables(intent, sim.topology):
        categories, devices = set(), set()
        for header in headers:
            for branch in sim.trace(ref, header):
                categories.add(branch.end)
                devices.add(branch.device)
        signatures.append((categories, devices))
    if all(s == signatures[0] for s in signatures[1:]):
        return Outcome.HOLDS
    return Outcome.VIOLATED


def oracle_outcome(intent: IntentSpec, sim: Simulator, space: HeaderSpace | None = None) -> Outcome:
    """
    Brute-force outcome of an intent.
    Args:
        intent (IntentSpec): Intent to decide.
        sim (Simulator): Walker over the same network the verifier sees.
        space (HeaderSpace, optional): Used only to enumerate the initial headers.
    Returns:
        Outcome: Holds / Violated, or Error when the initial set, a start point or a walk fails.
    """
    space = space or HeaderSpace(sim.schema)
    try:
        if intent.kind == IntentType.FLOW_CONSISTENCY:
            return _consistency_outcome(sim, space, intent)
        directions = [intent, intent.reversed()] if intent.bidirectional else [intent]
        outcome = Outcome.HOLDS
        for direction in directions:
            if intent.kind in PAIRWISE_TYPES and direction.origins and direction.targets:
                pairs = [((o,), (t,)) for o in direction.origins for t in direction.targets]
            else:
                pairs = [(direction.origins or None, direction.targets)]
            for origins, targets in pairs:
                result = _pair_outcome(sim, space, direction, origins, targets)
                if result != Outcome.HOLDS and outcome == Outcome.HOLDS:
                    outcome = result
        return outcome
    except VERIFICATION_ERRORS as e:
        logger.debug("Oracle error for %s: %s", intent.id, e)
        return Outcome.ERROR


def oracle_outcomes(intents: list[IntentSpec], store: DpaStore) -> dict[str, Outcome]:
    sim = Simulator(store)
    space = HeaderSpace(sim.schema)
    return {i.id: oracle_outcome(i, sim, space) for i in intents}
