# dpa.py
"""
Data Plane Abstractions: parsing, canonical serialization, the file store, semantic diffs,
topology resolution and relevant-rule hashing.
"""
import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Iterable

from slicecheck.config import DIGEST_SIZE_BYTES
from slicecheck.errors import (
    DeviceMismatch,
    IoFailure,
    MalformedJson,
    NotFound,
    SchemaViolation,
    UnknownActionCode,
)
from slicecheck.header_space import (
    ETH_DST,
    ETH_SRC,
    IP_DST,
    IP_SRC,
    VLAN,
    FieldSchema,
    HeaderSpace,
    MaskedValue,
    PacketSet,
)

logger = logging.getLogger(__name__)


class ActionType(IntEnum):
    FORWARD = 0
    DROP = 1
    ACCEPT = 2
    SET_L2_SRC = 101
    SET_L2_DST = 102
    SET_IP_SRC = 103
    SET_VLAN = 104
    SET_IP_DST = 105
    SET_DEPTH = 106


SET_FIELD_CODES = {
    ActionType.SET_L2_SRC: ETH_SRC,
    ActionType.SET_L2_DST: ETH_DST,
    ActionType.SET_IP_SRC: IP_SRC,
    ActionType.SET_VLAN: VLAN,
    ActionType.SET_IP_DST: IP_DST,
}
REWRITE_ACTIONS = frozenset(SET_FIELD_CODES) | {ActionType.SET_DEPTH}
DEPTH_PUSH, DEPTH_POP = "push", "pop"


@dataclass(frozen=True)
class Action:
    type_code: int
    value: str = ""
    outgoing_interface_id: str | None = None
    extras: str = ""

    @property
    def kind(self) -> ActionType:
        return ActionType(self.type_code)

    @property
    def rewrites(self) -> bool:
        return self.type_code in REWRITE_ACTIONS

    def to_json(self) -> dict:
        out = _unpack(self.extras)
        out["type"] = self.type_code
        out["value"] = self.value
        out["outgoing_interface_id"] = self.outgoing_interface_id
        return out


@dataclass(frozen=True)
class Rule:
    match: tuple[MaskedValue, ...]
    actions: tuple[Action, ...]
    extras: str = ""

    def to_json(self) -> dict:
        out = _unpack(self.extras)
        out["match"] = {"masked_values": [mv.to_json() for mv in self.match]}
        out["actions"] = [a.to_json() for a in self.actions]
        return out


@dataclass(frozen=True)
class RuleTable:
    name: str
    rules: tuple[Rule, ...]
    owning_device: str = ""
    extras: str = ""

    def to_json(self) -> dict:
        out = _unpack(self.extras)
        out["name"] = self.name
        out["rules"] = [r.to_json() for r in self.rules]
        return out


@dataclass(frozen=True)
class Interface:
    interface_id: str
    attributes: str = ""

    @property
    def next_table(self) -> str | None:
        return _unpack(self.attributes).get("next_table")

    def to_json(self) -> dict:
        out = _unpack(self.attributes)
        out["id"] = self.interface_id
        return out


@dataclass(frozen=True)
class DPA:
    name: str
    vendor: str = ""
    model: str = ""
    timestamp: str = ""
    interfaces: tuple[Interface, ...] = ()
    rule_tables: tuple[RuleTable, ...] = ()
    extras: str = ""

    def table(self, name: str) -> RuleTable | None:
        for t in self.rule_tables:
            if t.name == name:
                return t
        return None

    def interface(self, interface_id: str) -> Interface | None:
        for i in self.interfaces:
            if i.interface_id == interface_id:
                return i
        return None

    @property
    def rule_count(self) -> int:
        return sum(len(t.rules) for t in self.rule_tables)

    def to_json(self) -> dict:
        out = _unpack(self.extras)
        out.update(
            {
                "name": self.name,
                "vendor": self.vendor,
                "model": self.model,
                "timestamp": self.timestamp,
                "interfaces": [i.to_json() for i in self.interfaces],
                "rule_tables": [t.to_json() for t in self.rule_tables],
            }
        )
        return out


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serialize_dpa(dpa: DPA) -> bytes:
    return canonical_json(dpa.to_json()).encode("utf-8")


# ---------------------- Parsing ----------------------


def _load_json(document: bytes | str) -> Any:
    try:
        text = document.decode("utf-8") if isinstance(document, (bytes, bytearray)) else document
        return json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedJson(str(e)) from e


def _expect(obj: Any, kind: type, path: str):
    if not isinstance(obj, kind):
        raise SchemaViolation(path, f"expected {kind.__name__}, got {type(obj).__name__}")
    return obj


def _pack(obj: dict, known: Iterable[str] = ()) -> str:
    extra = {k: v for k, v in obj.items() if k not in known}
    return canonical_json(extra) if extra else ""


def _unpack(packed: str) -> dict:
    return json.loads(packed) if packed else {}


def parse_masked_value(obj: Any, path: str, schema: FieldSchema | None = None) -> MaskedValue:
    obj = _expect(obj, dict, path)
    if "field_type" not in obj:
        raise SchemaViolation(f"{path}.field_type", "missing")
    try:
        mv = MaskedValue.from_json(obj)
    except (TypeError, ValueError) as e:
        raise SchemaViolation(path, str(e)) from e
    if schema is not None:
        try:
            mv.bits(schema)
        except Exception as e:
            raise SchemaViolation(path, str(e)) from e
    return mv


def parse_action(obj: Any, path: str) -> Action:
    obj = _expect(obj, dict, path)
    if "type" not in obj:
        raise SchemaViolation(f"{path}.type", "missing")
    try:
        code = int(obj["type"])
    except (TypeError, ValueError):
        raise SchemaViolation(f"{path}.type", "not an integer")
    if code not in ActionType._value2member_map_:
        raise UnknownActionCode(f"{path}: unknown action code {code}", code=code, path=path)
    value = obj.get("value")
    value = "" if value is None else str(value)
    out_if = obj.get("outgoing_interface_id")
    out_if = None if out_if in (None, "") else str(out_if)
    if code == ActionType.FORWARD and out_if is None:
        raise SchemaViolation(f"{path}.outgoing_interface_id", "Forward needs an interface")
    if code in SET_FIELD_CODES and value == "":
        raise SchemaViolation(f"{path}.value", "set-field action needs a value")
    if code == ActionType.SET_DEPTH and value not in (DEPTH_PUSH, DEPTH_POP):
        raise SchemaViolation(f"{path}.value", "Set depth takes 'push' or 'pop'")
    extras = _pack(obj, ("type", "value", "outgoing_interface_id"))
    return Action(code, value, out_if, extras)


def parse_rule(obj: Any, path: str, schema: FieldSchema | None = None) -> Rule:
    obj = _expect(obj, dict, path)
    match = obj.get("match", {})
    match = _expect(match, dict, f"{path}.match")
    mvs = _expect(match.get("masked_values", []), list, f"{path}.match.masked_values")
    actions = _expect(obj.get("actions", []), list, f"{path}.actions")
    return Rule(
        tuple(
            parse_masked_value(mv, f"{path}.match.masked_values[{i}]", schema)
            for i, mv in enumerate(mvs)
        ),
        tuple(parse_action(a, f"{path}.actions[{i}]") for i, a in enumerate(actions)),
        _pack(obj, ("match", "actions")),
    )


def parse_dpa(document: bytes | str, schema: FieldSchema | None = None) -> DPA:
    """
    Parse and validate one device's DPA JSON.
    Args:
        document (bytes | str): UTF-8 JSON text.
        schema (FieldSchema, optional): When given, every masked value is checked against it.
    Returns:
        DPA: Immutable device model; unknown keys are kept for round trips.
    Raises:
        MalformedJson: If the text is not JSON.
        SchemaViolation: With the JSON path of the first offending element.
        UnknownActionCode: For unregistered action type codes.
    """
    obj = _expect(_load_json(document), dict, "$")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaViolation("$.name", "device name required")
    interfaces = []
    for i, raw in enumerate(_expect(obj.get("interfaces", []), list, "$.interfaces")):
        if isinstance(raw, str):
            interfaces.append(Interface(raw))
            continue
        raw = _expect(raw, dict, f"$.interfaces[{i}]")
        if "id" not in raw:
            raise SchemaViolation(f"$.interfaces[{i}].id", "missing")
        attrs = {k: v for k, v in raw.items() if k != "id"}
        interfaces.append(Interface(str(raw["id"]), _pack(attrs)))
    tables = []
    seen = set()
    for t, raw in enumerate(_expect(obj.get("rule_tables", []), list, "$.rule_tables")):
        path = f"$.rule_tables[{t}]"
        raw = _expect(raw, dict, path)
        tname = raw.get("name")
        if not isinstance(tname, str) or not tname:
            raise SchemaViolation(f"{path}.name", "table name required")
        if tname in seen:
            raise SchemaViolation(f"{path}.name", f"duplicate table {tname}")
        seen.add(tname)
        rules = _expect(raw.get("rules", []), list, f"{path}.rules")
        tables.append(
            RuleTable(
                tname,
                tuple(parse_rule(r, f"{path}.rules[{i}]", schema) for i, r in enumerate(rules)),
                name,
                _pack(raw, ("name", "rules")),
            )
        )
    known = ("name", "vendor", "model", "timestamp", "interfaces", "rule_tables")
    return DPA(
        name=name,
        vendor=str(obj.get("vendor", "")),
        model=str(obj.get("model", "")),
        timestamp=str(obj.get("timestamp", "")),
        interfaces=tuple(interfaces),
        rule_tables=tuple(tables),
        extras=_pack(obj, known),
    )


# ---------------------- Topology ----------------------


@dataclass(frozen=True)
class TableRef:
    device: str
    table: str

    def __str__(self):
        return f"{self.device}/{self.table}"


@dataclass(frozen=True)
class Link:
    device_a: str
    interface_a: str
    device_b: str
    interface_b: str


@dataclass
class Topology:
    """
    Inter-device wiring.
    Args:
        links (list[Link]): Bidirectional links between device interfaces.
        entry_points (list[TableRef]): Tables where packets enter the network.
        ingress (dict): (device, interface) -> table receiving packets on that interface.
    """

    links: list[Link] = field(default_factory=list)
    entry_points: list[TableRef] = field(default_factory=list)
    ingress: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        self._peer: dict[tuple[str, str], tuple[str, str]] = {}
        for link in self.links:
            a, b = (link.device_a, link.interface_a), (link.device_b, link.interface_b)
            for x, y in ((a, b), (b, a)):
                if x in self._peer and self._peer[x] != y:
                    raise SchemaViolation(f"links.{x[0]}.{x[1]}", "interface linked twice")
                self._peer[x] = y

    def check_interfaces(self, dpas: Iterable[DPA]):
        """Reject links whose endpoint names an interface its device does not declare."""
        declared = {d.name: {i.interface_id for i in d.interfaces} for d in dpas}
        for index, link in enumerate(self.links):
            for side, device, interface in (
                ("a", link.device_a, link.interface_a),
                ("b", link.device_b, link.interface_b),
            ):
                # links to devices outside the snapshot stay unchecked
                if device in declared and interface not in declared[device]:
                    raise SchemaViolation(
                        f"$.links[{index}].interface_{side}",
                        f"{device} declares no interface {interface!r}",
                    )

    def peer(self, device: str, interface: str) -> tuple[str, str] | None:
        return self._peer.get((device, interface))

    def entry_tables(self, device: str) -> list[TableRef]:
        return [e for e in self.entry_points if e.device == device]

    def ingress_table(self, device: str, interface: str) -> TableRef | None:
        table = self.ingress.get((device, interface))
        if table is not None:
            return TableRef(device, table)
        entries = self.entry_tables(device)
        return entries[0] if entries else None

    def devices(self) -> set[str]:
        out = {e.device for e in self.entry_points}
        for link in self.links:
            out.update((link.device_a, link.device_b))
        out.update(d for d, _ in self.ingress)
        return out

    def device_graph(self):
        """Undirected networkx graph of devices with one edge per linked device pair."""
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(sorted(self.devices()))
        for link in self.links:
            if link.device_a != link.device_b:
                g.add_edge(link.device_a, link.device_b)
        return g

    def to_json(self) -> dict:
        return {
            "links": [
                {
                    "device_a": l.device_a,
                    "interface_a": l.interface_a,
                    "device_b": l.device_b,
                    "interface_b": l.interface_b,
                }
                for l in self.links
            ],
            "entry_points": [
                {"device": e.device, "rule_table": e.table} for e in self.entry_points
            ],
            "ingress": [
                {"device": d, "interface": i, "rule_table": t}
                for (d, i), t in sorted(self.ingress.items())
            ],
        }


def parse_topology(document: bytes | str) -> Topology:
    obj = _expect(_load_json(document), dict, "$")
    links = []
    for i, raw in enumerate(_expect(obj.get("links", []), list, "$.links")):
        raw = _expect(raw, dict, f"$.links[{i}]")
        try:
            links.append(
                Link(
                    str(raw["device_a"]),
                    str(raw["interface_a"]),
                    str(raw["device_b"]),
                    str(raw["interface_b"]),
                )
            )
        except KeyError as e:
            raise SchemaViolation(f"$.links[{i}].{e.args[0]}", "missing")
    entries = []
    for i, raw in enumerate(_expect(obj.get("entry_points", []), list, "$.entry_points")):
        raw = _expect(raw, dict, f"$.entry_points[{i}]")
        if "device" not in raw or "rule_table" not in raw:
            raise SchemaViolation(f"$.entry_points[{i}]", "device and rule_table required")
        entries.append(TableRef(str(raw["device"]), str(raw["rule_table"])))
    ingress = {}
    for i, raw in enumerate(_expect(obj.get("ingress", []), list, "$.ingress")):
        raw = _expect(raw, dict, f"$.ingress[{i}]")
        try:
            ingress[(str(raw["device"]), str(raw["interface"]))] = str(raw["rule_table"])
        except KeyError as e:
            raise SchemaViolation(f"$.ingress[{i}].{e.args[0]}", "missing")
    return Topology(links, entries, ingress)


@dataclass(frozen=True)
class ForwardTarget:
    """Where a Forward action sends packets: a table, or out of the network."""

    table: TableRef | None
    dangling: bool = False


def resolve_forward(dpa: DPA, topology: Topology, interface_id: str) -> ForwardTarget:
    """
    Resolve a Forward's outgoing interface.
    Args:
        dpa (DPA): Device executing the Forward.
        topology (Topology): Network wiring.
        interface_id (str): The action's outgoing interface.
    Returns:
        ForwardTarget: Local next table, peer ingress table, or leave-the-network (flagged
        dangling when the interface is not declared anywhere).
    """
    iface = dpa.interface(interface_id)
    if iface is not None and iface.next_table:
        return ForwardTarget(TableRef(dpa.name, iface.next_table))
    peer = topology.peer(dpa.name, interface_id)
    if peer is not None:
        target = topology.ingress_table(*peer)
        if target is not None:
            return ForwardTarget(target)
        return ForwardTarget(None, dangling=True)
    return ForwardTarget(None, dangling=iface is None)


# ---------------------- Store ----------------------


def write_atomic(path: Path, data: bytes):
    """Write through a temp file in the same directory and rename over the target."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


class DpaStore:
    """
    File store laid out as `<root>/devices/<device_id>.json` plus `<root>/topology.json`
    and `<root>/schema.json`. A store opened without a schema uses the recorded one.
    Many readers, one writer per device file.
    """

    def __init__(self, root: str | Path, schema: FieldSchema | None = None):
        self.root = Path(root)
        self.schema = schema if schema is not None else self.load_schema()
        self.loads = 0

    def _device_path(self, device_id: str) -> Path:
        return self.root / "devices" / f"{device_id}.json"

    def _write(self, path: Path, data: bytes):
        write_atomic(path, data)

    def _read(self, path: Path, what: str) -> bytes:
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"{what} not found at {path}", path=str(path))
        except OSError as e:
            raise IoFailure(f"cannot read {path}: {e}") from e

    def store_dpa(self, dpa: DPA):
        self._write(self._device_path(dpa.name), serialize_dpa(dpa))

    def load_dpa(self, device_id: str) -> DPA:
        self.loads += 1
        raw = self._read(self._device_path(device_id), f"device {device_id}")
        return parse_dpa(raw, self.schema)

    def has_device(self, device_id: str) -> bool:
        return self._device_path(device_id).exists()

    def remove_dpa(self, device_id: str):
        try:
            self._device_path(device_id).unlink(missing_ok=True)
        except OSError as e:
            raise IoFailure(str(e)) from e

    def list_devices(self) -> list[str]:
        folder = self.root / "devices"
        if not folder.exists():
            return []
        return sorted(p.stem for p in folder.glob("*.json"))

    def store_topology(self, topology: Topology):
        self._write(self.root / "topology.json", canonical_json(topology.to_json()).encode())

    def load_topology(self) -> Topology:
        path = self.root / "topology.json"
        if not path.exists():
            return Topology()
        return parse_topology(self._read(path, "topology"))

    def store_schema(self, schema: FieldSchema):
        self._write(
            self.root / "schema.json",
            canonical_json({"name": schema.name, "fields": schema.to_list()}).encode(),
        )
        self.schema = schema

    def load_schema(self) -> FieldSchema | None:
        path = self.root / "schema.json"
        if not path.exists():
            return None
        raw = _expect(_load_json(self._read(path, "schema")), dict, "$")
        try:
            return FieldSchema([tuple(f) for f in raw["fields"]], name=raw.get("name", "custom"))
        except (KeyError, TypeError) as e:
            raise SchemaViolation("$.fields", str(e))

    def total_rules(self) -> int:
        return sum(self.load_dpa(d).rule_count for d in self.list_devices())


def store_dpa(store_root: str | Path, dpa: DPA):
    DpaStore(store_root).store_dpa(dpa)


def load_dpa(store_root: str | Path, device_id: str) -> DPA:
    return DpaStore(store_root).load_dpa(device_id)


# ---------------------- Diffs & hashes ----------------------


def semantic_diff(old: DPA, new: DPA) -> set[str]:
    """
    Rule tables whose rule lists differ between two versions of one device.
    Args:
        old (DPA): Previous version.
        new (DPA): Current version.
    Returns:
        set[str]: Names of changed, added or removed tables; timestamps are ignored.
    Raises:
        DeviceMismatch: If the versions describe different devices.
    """
    if old.name != new.name:
        raise DeviceMismatch(f"cannot diff {old.name} against {new.name}")
    before = {t.name: t.rules for t in old.rule_tables}
    after = {t.name: t.rules for t in new.rule_tables}
    return {n for n in before.keys() | after.keys() if before.get(n) != after.get(n)}


def interfaces_changed(old: DPA, new: DPA) -> bool:
    return old.interfaces != new.interfaces


def rule_digest_bytes(rule: Rule) -> bytes:
    return canonical_json(rule.to_json()).encode("utf-8")


@dataclass(frozen=True)
class RelevantRuleHash:
    digest: str
    algorithm: str = "blake2b-128"


def relevant_rules(table: RuleTable, universe: PacketSet, space: HeaderSpace) -> list[int]:
    """Indices of rules whose match overlaps the universe, in priority order."""
    if universe.is_empty():
        return []
    return [
        i for i, rule in enumerate(table.rules) if space.match(rule.match).overlaps(universe)
    ]


def digest_rules(table: RuleTable, indices: Iterable[int]) -> RelevantRuleHash:
    """Order-sensitive digest over the given rules of a table."""
    h = hashlib.blake2b(digest_size=DIGEST_SIZE_BYTES)
    for i in indices:
        encoded = rule_digest_bytes(table.rules[i])
        h.update(len(encoded).to_bytes(4, "big"))
        h.update(encoded)
    return RelevantRuleHash(h.hexdigest())


def relevant_rule_hash(table: RuleTable, universe: PacketSet) -> RelevantRuleHash:
    return digest_rules(table, relevant_rules(table, universe, universe.space))
