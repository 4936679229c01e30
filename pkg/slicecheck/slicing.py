# slicing.py
"""
Intent slices: the per-checker model fragment built while verifying intents, kept across
network updates and pruned by relevant-rule hashing.
"""
import logging
import time
from dataclasses import dataclass, field

from slicecheck.config import DEFAULT_MAX_HOPS
from slicecheck.dpa import (
    DPA,
    DpaStore,
    TableRef,
    Topology,
    interfaces_changed,
    relevant_rule_hash,
)
from slicecheck.errors import NotFound, UnknownDevice, UnknownTable
from slicecheck.flow_engine import FlowNode, TableState
from slicecheck.header_space import DEFAULT_SCHEMA, HeaderSpace, PacketSet

logger = logging.getLogger(__name__)

RuleKey = tuple  # (device, table, rule index)


class SliceContext:
    """
    Everything one checker keeps between verifications.
    Args:
        store (DpaStore): Source of device models.
        space (HeaderSpace, optional): Packet-set manager; one per checker.
        topology (Topology, optional): Wiring; read from the store when omitted.
        max_hops (int): Traversal bound for verify().
        scope (PacketSet, optional): Restricts every initial packet set (Libra blocks).
    """

    def __init__(
        self,
        store: DpaStore,
        space: HeaderSpace | None = None,
        topology: Topology | None = None,
        max_hops: int = DEFAULT_MAX_HOPS,
        scope: PacketSet | None = None,
    ):
        self.store = store
        self.space = space or HeaderSpace(store.schema or DEFAULT_SCHEMA)
        self.topology = topology if topology is not None else store.load_topology()
        self.max_hops = max_hops
        self.scope = scope
        self.devices: dict[str, DPA] = {}
        self.tables: dict[TableRef, TableState] = {}
        self.intent_tables: dict[str, set[TableRef]] = {}
        self.intent_rules: dict[str, set[RuleKey]] = {}
        self.device_index: dict[str, set[TableRef]] = {}
        self.missing_devices: dict[str, set[str]] = {}
        self.traversal_log: list[tuple[str, RuleKey]] = []
        self.full_model = False
        self.dpa_loads = 0
        self.steps = 0
        self.current: str | None = None

    # -------- intent bookkeeping --------

    def begin_intent(self, intent_id: str):
        """Start (or restart) recording the slice of one intent."""
        self.current = intent_id
        self.intent_tables[intent_id] = set()
        self.intent_rules[intent_id] = set()
        for waiting in self.missing_devices.values():
            waiting.discard(intent_id)

    def end_intent(self):
        self.current = None

    def registered(self) -> set[str]:
        return set(self.intent_tables)

    def unregister(self, intent_id: str):
        self.intent_tables.pop(intent_id, None)
        self.intent_rules.pop(intent_id, None)
        for waiting in self.missing_devices.values():
            waiting.discard(intent_id)

    def touched_devices(self, intent_id: str) -> set[str]:
        return {ref.device for ref in self.intent_tables.get(intent_id, ())}

    def rules_modeled_for(self, intent_id: str) -> int:
        return sum(
            len(self.tables[ref].relevant)
            for ref in self.intent_tables.get(intent_id, ())
            if ref in self.tables
        )

    # -------- model access used by the traversal --------

    def device(self, device_id: str) -> DPA:
        dpa = self.devices.get(device_id)
        if dpa is not None:
            return dpa
        try:
            dpa = self.store.load_dpa(device_id)
        except NotFound:
            if self.current is not None:
                self.missing_devices.setdefault(device_id, set()).add(self.current)
            raise UnknownDevice(f"device {device_id} is not in the store", device=device_id)
        self.dpa_loads += 1
        self.devices[device_id] = dpa
        return dpa

    def table_state(self, ref: TableRef) -> TableState:
        state = self.tables.get(ref)
        if state is None:
            table = self.device(ref.device).table(ref.table)
            if table is None:
                raise UnknownTable(f"{ref} does not exist", device=ref.device, table=ref.table)
            state = TableState(ref, table, self.space.empty)
            self.tables[ref] = state
            self.device_index.setdefault(ref.device, set()).add(ref)
        if self.current is not None:
            self.intent_tables[self.current].add(ref)
        return state

    def note_traversal(self, state: TableState, fn: FlowNode):
        if self.current is None:
            return
        keys = self.intent_rules[self.current]
        for index in sorted(fn.source_rules):
            key = state.rule_key(index)
            keys.add(key)
            self.traversal_log.append((self.current, key))

    def note_step(self):
        self.steps += 1

    # -------- maintenance --------

    def evict(self, ref: TableRef):
        self.tables.pop(ref, None)
        refs = self.device_index.get(ref.device)
        if refs is not None:
            refs.discard(ref)
            if not refs:
                del self.device_index[ref.device]
                self.devices.pop(ref.device, None)

    def intents_touching(self, refs: set[TableRef]) -> set[str]:
        return {i for i, touched in self.intent_tables.items() if touched & refs}

    def prebuild(self, universe: PacketSet | None = None):
        """
        Model every table of every stored device over one universe (full model baselines).
        Args:
            universe (PacketSet, optional): Defaults to the full header space.
        """
        universe = universe if universe is not None else self.space.universe
        start = time.perf_counter()
        for device_id in self.store.list_devices():
            self.rebuild_device(device_id, universe)
        self.full_model = True
        logger.info(
            "Prebuilt %d tables in %.4f seconds", len(self.tables), time.perf_counter() - start
        )

    def rebuild_device(self, device_id: str, universe: PacketSet | None = None):
        universe = universe if universe is not None else self.space.universe
        for ref in list(self.device_index.get(device_id, ())):
            self.evict(ref)
        dpa = self.store.load_dpa(device_id)
        self.dpa_loads += 1
        self.devices[device_id] = dpa
        for table in dpa.rule_tables:
            ref = TableRef(device_id, table.name)
            state = TableState(ref, table, universe)
            state.rebuild()
            self.tables[ref] = state
            self.device_index.setdefault(device_id, set()).add(ref)

    def rules_modeled(self) -> int:
        return sum(len(s.relevant) for s in self.tables.values())


def handle_update(ctx: SliceContext, updated_devices, store: DpaStore | None = None) -> set[str]:
    """
    Filter a network update through the slice.
    Args:
        ctx (SliceContext): The checker's slice.
        updated_devices (Iterable[str]): Devices whose DPAs changed.
        store (DpaStore, optional): Where the new DPAs live; defaults to ctx.store.
    Returns:
        set[str]: Intents that must be re-verified. Devices outside the slice are ignored
        without being loaded; tables whose relevant rules are unchanged are kept.
    """
    store = store or ctx.store
    registered = ctx.registered()
    rechecks: set[str] = set()
    for device_id in sorted(set(updated_devices)):
        rechecks |= ctx.missing_devices.pop(device_id, set()) & registered
        refs = ctx.device_index.get(device_id)
        if not refs:
            ctx.devices.pop(device_id, None)
            continue
        try:
            new = store.load_dpa(device_id)
        except NotFound:
            new = None
        ctx.dpa_loads += 1
        old = ctx.devices.get(device_id)
        wiring_changed = new is None or old is None or interfaces_changed(old, new)
        evicted = set()
        for ref in sorted(refs, key=str):
            state = ctx.tables[ref]
            table = new.table(ref.table) if new is not None else None
            if (
                wiring_changed
                or table is None
                or relevant_rule_hash(table, state.universe) != state.relevant_hash
            ):
                evicted.add(ref)
            else:
                state.replace_table(table)
        rechecks |= ctx.intents_touching(evicted)
        for ref in evicted:
            ctx.evict(ref)
        if new is not None and device_id in ctx.device_index:
            ctx.devices[device_id] = new
        logger.debug("Update of %s evicted %d tables", device_id, len(evicted))
    return rechecks


def garbage_collect(ctx: SliceContext) -> set[TableRef]:
    """Drop tables no registered intent touches; universes of kept tables are not shrunk."""
    if ctx.full_model:
        return set()
    live = set().union(*ctx.intent_tables.values()) if ctx.intent_tables else set()
    dead = {ref for ref in ctx.tables if ref not in live}
    for ref in dead:
        ctx.evict(ref)
    for device_id in [d for d in ctx.devices if d not in ctx.device_index]:
        del ctx.devices[device_id]
    return dead


@dataclass
class SliceStats:
    rules_modeled: int = 0
    tables_modeled: int = 0
    per_intent_rules: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "rules_modeled": self.rules_modeled,
            "tables_modeled": self.tables_modeled,
            "per_intent_rules": {
                i: sorted("/".join(map(str, k)) for k in keys)
                for i, keys in sorted(self.per_intent_rules.items())
            },
        }


def slice_stats(ctx: SliceContext) -> SliceStats:
    return SliceStats(
        rules_modeled=ctx.rules_modeled(),
        tables_modeled=len(ctx.tables),
        per_intent_rules={i: set(keys) for i, keys in ctx.intent_rules.items()},
    )
