# generator.py
"""
Synthetic data-centre networks with known ground truth.

A GenSpec describes a fabric family, an overlay, ACL density and injected faults. `generate`
writes a snapshot (`devices/`, `topology.json`, `schema.json`, `manifest.json`) whose manifest
records hosts, routing trees, segmentation pairs and resolved faults. `generate_intents` and
`expected_outcomes` derive intents and their correct outcomes from the manifest alone, and
`gen_updates` replays a seeded stream of rule edits as further snapshots.
"""
import json
import logging
import random
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx

from slicecheck.dpa import (
    ActionType,
    DpaStore,
    canonical_json,
    parse_dpa,
    parse_topology,
    write_atomic,
)
from slicecheck.errors import InvalidSpec, IoFailure
from slicecheck.header_space import IP_DST, IP_SRC, VLAN, toy_schema
from slicecheck.intents import IntentSpec, Outcome, parse_intent

logger = logging.getLogger(__name__)

FAMILIES = ("leaf-spine", "fat-tree", "chained-pods")
OVERLAYS = ("none", "vlan", "encap")
FAULT_KINDS = ("loop", "blackhole", "acl_hole")
UPDATE_CATEGORIES = ("noop", "irrelevant", "relevant", "add", "remove")
UPDATE_WEIGHTS = (2, 2, 2, 2, 1)
MAX_SEGMENTS = 7

HOST_TABLE, ROUTE_TABLE, FABRIC_TABLE, TRANSIT_TABLE = "host_in", "l3", "fabric_in", "fwd"
TO_ROUTER = "to-l3"


@dataclass(frozen=True)
class Fault:
    """
    One injected fault.
    loop: ring of `length` devices starting at leaf `device` (seeded when empty).
    blackhole: `device` loses its route towards host `target` (both seeded when empty).
    acl_hole: the deny between hosts `origin` and `target` is left out.
    """

    kind: str
    length: int = 0
    device: str = ""
    origin: str = ""
    target: str = ""

    @classmethod
    def from_json(cls, obj) -> "Fault":
        if isinstance(obj, str):
            m = re.fullmatch(r"\s*(\w+)\s*(?:\((.*)\))?\s*", obj)
            if not m:
                raise InvalidSpec(f"cannot read fault {obj!r}")
            kind = m.group(1)
            args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
            first = args[0] if args else ""
            second = args[1] if len(args) > 1 else ""
            if kind == "loop":
                return cls(kind, length=int(first or 3), device=second)
            if kind == "blackhole":
                return cls(kind, device=first, target=second)
            if kind == "acl_hole":
                return cls(kind, origin=first, target=second)
            raise InvalidSpec(f"unknown fault kind {kind!r}")
        if not isinstance(obj, dict) or "kind" not in obj:
            raise InvalidSpec(f"cannot read fault {obj!r}")
        return cls(
            str(obj["kind"]),
            int(obj.get("length", 0)),
            str(obj.get("device", "")),
            str(obj.get("origin", "")),
            str(obj.get("target", "")),
        )

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for key in ("length", "device", "origin", "target"):
            value = getattr(self, key)
            if value:
                out[key] = value
        return out


@dataclass(frozen=True)
class GenSpec:
    """
    What to generate. Counts are per pod for fat-tree and chained-pods.
    Args:
        family (str): leaf-spine | fat-tree | chained-pods.
        leaves (int): Host-facing switches (edge switches for fat-tree).
        spines (int): Spines (aggregation switches and cores for fat-tree).
        pods (int): Pods; leaf-spine has one.
        hosts_per_leaf (int): Hosts attached to each leaf.
        overlay (str): none | vlan (segments enforced at the destination) | encap (push/pop).
        segments (int): Host segments, assigned round-robin.
        acl_density (float): Share of same-segment host pairs denied by an ACL.
        seed (int): Seed for every random choice.
        faults (tuple[Fault, ...]): Faults to inject.
    """

    family: str = "leaf-spine"
    leaves: int = 2
    spines: int = 2
    pods: int = 1
    hosts_per_leaf: int = 2
    overlay: str = "none"
    segments: int = 1
    acl_density: float = 0.0
    seed: int = 0
    faults: tuple[Fault, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}")
        if self.overlay not in OVERLAYS:
            raise InvalidSpec(f"unknown overlay {self.overlay!r}")
        if self.leaves < 1 or self.spines < 1 or self.pods < 1 or self.hosts_per_leaf < 1:
            raise InvalidSpec("leaves, spines, pods and hosts_per_leaf must be positive")
        if self.family == "leaf-spine" and self.pods != 1:
            raise InvalidSpec("leaf-spine has exactly one pod")
        if not 1 <= self.segments <= MAX_SEGMENTS:
            raise InvalidSpec(f"segments must be within 1..{MAX_SEGMENTS}")
        if not 0.0 <= self.acl_density <= 1.0:
            raise InvalidSpec("acl_density must be within [0, 1]")
        for fault in self.faults:
            if fault.kind not in FAULT_KINDS:
                raise InvalidSpec(f"unknown fault kind {fault.kind!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "GenSpec":
        data = dict(obj)
        data["faults"] = tuple(Fault.from_json(f) for f in data.get("faults", ()))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown GenSpec keys {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["faults"] = [f.to_json() for f in self.faults]
        return out


@dataclass(frozen=True)
class Host:
    vm: str
    ip: int
    leaf: str
    segment: int


@dataclass
class Network:
    """An in-memory snapshot: device documents, topology document, schema and manifest."""

    devices: dict[str, dict]
    topology: dict
    schema: object
    manifest: dict


# ---------------------- JSON builders ----------------------


def _mv(code: int, value: int, depth: int = 0) -> dict:
    return {"field_type": code, "value": str(value), "mask": "", "depth": depth}


def _action(code: int, value: str = "", interface: str | None = None) -> dict:
    return {"type": int(code), "value": value, "outgoing_interface_id": interface}


def _forward(interface: str) -> dict:
    return _action(ActionType.FORWARD, interface=interface)


def _rule(match: list[dict], actions: list[dict]) -> dict:
    return {"match": {"masked_values": match}, "actions": actions}


def _ring_interfaces(k: int) -> tuple[str, str]:
    return f"loop{k}-out", f"loop{k}-in"


# ---------------------- Network construction ----------------------


class _Builder:
    def __init__(self, spec: GenSpec):
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.graph = nx.Graph()
        self.leaves: list[str] = []
        self.fabric: list[str] = []
        self._layout()
        if not nx.is_connected(self.graph):
            raise InvalidSpec(f"{spec.family} layout is not connected")
        self.leaf_set = set(self.leaves)
        self.hosts: list[Host] = []
        for li, leaf in enumerate(self.leaves):
            for h in range(spec.hosts_per_leaf):
                g = len(self.hosts)
                self.hosts.append(Host(f"{leaf}-h{h}", g + 1, leaf, g % spec.segments + 1))
        self.by_vm = {h.vm: h for h in self.hosts}
        n_loops = sum(1 for f in spec.faults if f.kind == "loop")
        encap = spec.overlay == "encap"
        needed = len(self.hosts) + (len(self.leaves) if encap else 0) + n_loops + 1
        self.ip_bits = max(4, needed.bit_length())
        top = (1 << self.ip_bits) - 1
        self.tunnels = (
            {leaf: len(self.hosts) + 1 + i for i, leaf in enumerate(self.leaves)} if encap else {}
        )
        self.loop_addresses = [top - k for k in range(n_loops)]
        self.spare_address = top - n_loops
        self.schema = toy_schema(
            depth_levels=2 if encap else 1,
            name=f"generated-ip{self.ip_bits}{'-encap' if encap else ''}",
            ip_src=self.ip_bits,
            ip_dst=self.ip_bits,
        )
        self.routes = {leaf: self._tree(leaf) for leaf in self.leaves}

    def _layout(self):
        spec = self.spec
        if spec.family == "leaf-spine":
            self.leaves = [f"leaf{i}" for i in range(spec.leaves)]
            self.fabric = [f"spine{j}" for j in range(spec.spines)]
            self.graph.add_edges_from((l, s) for l in self.leaves for s in self.fabric)
            return
        for p in range(spec.pods):
            kind = ("edge", "agg") if spec.family == "fat-tree" else ("leaf", "spine")
            pod_leaves = [f"p{p}-{kind[0]}{i}" for i in range(spec.leaves)]
            pod_spines = [f"p{p}-{kind[1]}{j}" for j in range(spec.spines)]
            self.leaves += pod_leaves
            self.fabric += pod_spines
            self.graph.add_edges_from((l, s) for l in pod_leaves for s in pod_spines)
            if spec.family == "chained-pods" and p > 0:
                self.graph.add_edges_from(
                    (f"p{p - 1}-spine{j}", f"p{p}-spine{j}") for j in range(spec.spines)
                )
        if spec.family == "fat-tree":
            cores = [f"core{j}" for j in range(spec.spines)]
            self.fabric += cores
            self.graph.add_edges_from(
                (f"p{p}-agg{j}", cores[j]) for p in range(spec.pods) for j in range(spec.spines)
            )

    def _tree(self, dest: str) -> dict[str, str]:
        """Next hop towards dest for every other device; leaves never carry transit traffic."""
        shift = self.leaves.index(dest)
        parent: dict[str, str | None] = {dest: None}
        queue = deque([dest])
        while queue:
            u = queue.popleft()
            if u != dest and u in self.leaf_set:
                continue
            neighbours = sorted(self.graph.neighbors(u))
            k = shift % len(neighbours) if neighbours else 0
            for v in neighbours[k:] + neighbours[:k]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        return {v: u for v, u in parent.items() if u is not None}

    # -------- faults --------

    def _resolve_faults(self) -> tuple[list[dict], list[dict]]:
        candidates = [
            (o.vm, t.vm)
            for o in self.hosts
            for t in self.hosts
            if o.vm != t.vm and o.segment == t.segment
        ]
        n_acl = round(self.spec.acl_density * len(candidates))
        acl = sorted(self.rng.sample(candidates, n_acl)) if n_acl else []
        pairs = {p: False for p in acl}
        faults = []
        devices = sorted(self.leaves + self.fabric)
        loop_index = 0
        for fault in self.spec.faults:
            if fault.kind == "loop":
                n = fault.length or 3
                if not 2 <= n <= len(devices):
                    raise InvalidSpec(f"loop length {n} needs 2..{len(devices)} devices")
                start = fault.device or self.rng.choice(self.leaves)
                if start not in self.leaf_set:
                    raise InvalidSpec(f"loop must start at a leaf, got {start!r}")
                others = self.rng.sample([d for d in devices if d != start], n - 1)
                faults.append(
                    {
                        "kind": "loop",
                        "length": n,
                        "ring": [start] + others,
                        "address": self.loop_addresses[loop_index],
                    }
                )
                loop_index += 1
            elif fault.kind == "blackhole":
                device, target = self._pick_blackhole(fault)
                faults.append({"kind": "blackhole", "device": device, "target": target})
            else:
                if fault.origin and fault.target:
                    pair = (fault.origin, fault.target)
                    for vm in pair:
                        if vm not in self.by_vm:
                            raise InvalidSpec(f"unknown host {vm!r} in acl_hole")
                else:
                    pool = sorted(p for p, opened in pairs.items() if not opened) or candidates
                    if not pool:
                        raise InvalidSpec("acl_hole needs at least two hosts in one segment")
                    pair = self.rng.choice(pool)
                pairs[pair] = True
                faults.append({"kind": "acl_hole", "origin": pair[0], "target": pair[1]})
        segmentation = [
            {"origin": o, "target": t, "open": opened} for (o, t), opened in sorted(pairs.items())
        ]
        return segmentation, faults

    def _pick_blackhole(self, fault: Fault) -> tuple[str, str]:
        devices = set(self.leaves + self.fabric)
        if fault.device and fault.device not in devices:
            raise InvalidSpec(f"unknown device {fault.device!r} in blackhole")
        if fault.target and fault.target not in self.by_vm:
            raise InvalidSpec(f"unknown host {fault.target!r} in blackhole")
        target = self.by_vm[fault.target] if fault.target else None
        if fault.device:
            if target is None:
                target = self.rng.choice(self.hosts)
            return fault.device, target.vm
        target = target or self.rng.choice(self.hosts)
        origins = [
            h
            for h in self.hosts
            if h.leaf != target.leaf
            and (self.spec.overlay != "vlan" or h.segment == target.segment)
        ] or [h for h in self.hosts if h != target] or self.hosts
        origin = self.rng.choice(origins)
        walk = route_walk(self.routes, origin.leaf, target.leaf)
        return self.rng.choice(walk), target.vm

    # -------- devices --------

    def build(self) -> Network:
        segmentation, faults = self._resolve_faults()
        overlay = self.spec.overlay
        denied = {(p["origin"], p["target"]) for p in segmentation if not p["open"]}
        blackholes = [(f["device"], f["target"]) for f in faults if f["kind"] == "blackhole"]
        rings = [f for f in faults if f["kind"] == "loop"]
        interfaces: dict[str, list[dict]] = {d: [] for d in self.leaves + self.fabric}
        links, ingress = [], []
        for a, b in sorted(self.graph.edges()):
            links.append(
                {"device_a": a, "interface_a": f"to-{b}", "device_b": b, "interface_b": f"to-{a}"}
            )
            for x, y in ((a, b), (b, a)):
                interfaces[x].append({"id": f"to-{y}"})
                table = TRANSIT_TABLE if x not in self.leaf_set else (
                    FABRIC_TABLE if overlay == "encap" else ROUTE_TABLE
                )
                ingress.append({"device": x, "interface": f"to-{y}", "rule_table": table})
        ring_rules: dict[str, list[dict]] = {}
        for k, ring in enumerate(rings):
            out_if, in_if = _ring_interfaces(k)
            members = ring["ring"]
            for i, dev in enumerate(members):
                nxt = members[(i + 1) % len(members)]
                links.append(
                    {"device_a": dev, "interface_a": out_if, "device_b": nxt, "interface_b": in_if}
                )
                interfaces[dev] += [{"id": out_if}, {"id": in_if}]
                table = ROUTE_TABLE if dev in self.leaf_set else TRANSIT_TABLE
                ingress.append({"device": dev, "interface": in_if, "rule_table": table})
                ring_rules.setdefault(dev, []).append(
                    _rule([_mv(IP_DST, ring["address"])], [_forward(out_if)])
                )
        devices = {}
        for leaf in self.leaves:
            devices[leaf] = self._leaf(leaf, interfaces[leaf], denied, blackholes, ring_rules)
        for dev in self.fabric:
            devices[dev] = self._transit(dev, interfaces[dev], blackholes, ring_rules)
        entry = [{"device": l, "rule_table": HOST_TABLE} for l in self.leaves]
        entry += [{"device": d, "rule_table": TRANSIT_TABLE} for d in self.fabric]
        topology = {"links": links, "entry_points": entry, "ingress": ingress}
        manifest = {
            "spec": self.spec.to_json(),
            "schema": self.schema.name,
            "overlay": overlay,
            "leaves": self.leaves,
            "fabric": self.fabric,
            "hosts": [
                {"vm": h.vm, "ip": h.ip, "leaf": h.leaf, "segment": h.segment} for h in self.hosts
            ],
            "tunnels": self.tunnels,
            "routes": self.routes,
            "spare_address": self.spare_address,
            "segmentation_pairs": segmentation,
            "waypoints": self.fabric,
            "faults": faults,
        }
        for fault in faults:
            if fault["kind"] == "blackhole":
                fault["affected_pairs"] = [
                    [o, t] for o, t in host_pairs(manifest) if blackhole_cuts(manifest, o, t)
                ]
        return Network(devices, topology, self.schema, manifest)

    def _device(self, name: str, interfaces: list[dict], tables: list[dict]) -> dict:
        return {
            "name": name,
            "vendor": "slicecheck-gen",
            "model": self.spec.family,
            "timestamp": "0",
            "interfaces": interfaces,
            "rule_tables": tables,
        }

    def _leaf(self, leaf, interfaces, denied, blackholes, ring_rules) -> dict:
        overlay = self.spec.overlay
        local = [h for h in self.hosts if h.leaf == leaf]
        host_rules = [
            _rule(
                [_mv(IP_SRC, self.by_vm[o].ip), _mv(IP_DST, self.by_vm[t].ip)],
                [_action(ActionType.DROP)],
            )
            for o, t in sorted(denied)
            if self.by_vm[o].leaf == leaf
        ]
        for h in local:
            actions = [_action(ActionType.SET_VLAN, str(h.segment))] if overlay == "vlan" else []
            host_rules.append(_rule([_mv(IP_SRC, h.ip)], actions + [_forward(TO_ROUTER)]))
        routes = list(ring_rules.get(leaf, []))
        for h in self.hosts:
            if (leaf, h.vm) in blackholes:
                continue
            if h.leaf == leaf:
                match = [_mv(IP_DST, h.ip)]
                if overlay == "vlan":
                    match.append(_mv(VLAN, h.segment))
                routes.append(_rule(match, [_action(ActionType.ACCEPT, h.vm)]))
                continue
            up = _forward(f"to-{self.routes[h.leaf][leaf]}")
            if overlay == "encap":
                actions = [
                    _action(ActionType.SET_DEPTH, "push"),
                    _action(ActionType.SET_IP_DST, str(self.tunnels[h.leaf])),
                    up,
                ]
            else:
                actions = [up]
            routes.append(_rule([_mv(IP_DST, h.ip)], actions))
        tables = [
            {"name": HOST_TABLE, "rules": host_rules},
            {"name": ROUTE_TABLE, "rules": routes},
        ]
        if overlay == "encap":
            tables.append(
                {
                    "name": FABRIC_TABLE,
                    "rules": [
                        _rule(
                            [_mv(IP_DST, self.tunnels[leaf])],
                            [_action(ActionType.SET_DEPTH, "pop"), _forward(TO_ROUTER)],
                        )
                    ],
                }
            )
        router = {"id": TO_ROUTER, "next_table": ROUTE_TABLE}
        return self._device(leaf, [router] + interfaces, tables)

    def _transit(self, dev, interfaces, blackholes, ring_rules) -> dict:
        rules = list(ring_rules.get(dev, []))
        cut = {self.by_vm[t] for d, t in blackholes if d == dev}
        if self.spec.overlay == "encap":
            cut_leaves = {h.leaf for h in cut}
            for leaf in self.leaves:
                if leaf not in cut_leaves:
                    hop = _forward(f"to-{self.routes[leaf][dev]}")
                    rules.append(_rule([_mv(IP_DST, self.tunnels[leaf])], [hop]))
        else:
            for h in self.hosts:
                if h not in cut:
                    rules.append(
                        _rule([_mv(IP_DST, h.ip)], [_forward(f"to-{self.routes[h.leaf][dev]}")])
                    )
        return self._device(dev, interfaces, [{"name": TRANSIT_TABLE, "rules": rules}])


def build_network(spec: GenSpec) -> Network:
    """Generate a network in memory. Raises InvalidSpec for inconsistent specs."""
    network = _Builder(spec).build()
    logger.info(
        "Generated %s network: %d devices, %d hosts, %d faults",
        spec.family,
        len(network.devices),
        len(network.manifest["hosts"]),
        len(network.manifest["faults"]),
    )
    return network


def write_snapshot(network: Network, out_dir: str | Path, with_manifest: bool = True) -> Path:
    """Write a snapshot in the store layout; identical networks give identical bytes."""
    out = Path(out_dir)
    store = DpaStore(out, network.schema)
    store.store_schema(network.schema)
    for name in sorted(network.devices):
        store.store_dpa(parse_dpa(canonical_json(network.devices[name]), network.schema))
    store.store_topology(parse_topology(canonical_json(network.topology)))
    if with_manifest:
        text = json.dumps(network.manifest, sort_keys=True, indent=2) + "\n"
        write_atomic(out / "manifest.json", text.encode())
    return out


def generate(spec: GenSpec, out_dir: str | Path) -> Path:
    """
    Generate a snapshot directory.
    Args:
        spec (GenSpec): What to build.
        out_dir (str | Path): Target directory (created).
    Returns:
        Path: The snapshot directory.
    Raises:
        InvalidSpec: If the spec cannot be realised.
    """
    return write_snapshot(build_network(spec), out_dir)


def load_manifest(snapshot_dir: str | Path) -> dict:
    path = Path(snapshot_dir) / "manifest.json"
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise IoFailure(f"{path} does not exist", path=str(path))


# ---------------------- Ground truth ----------------------


def route_walk(routes: dict, origin_leaf: str, dest_leaf: str) -> list[str]:
    """Devices a packet visits from origin_leaf to dest_leaf, both included."""
    walk = [origin_leaf]
    tree = routes[dest_leaf]
    while walk[-1] != dest_leaf:
        walk.append(tree[walk[-1]])
    return walk


def _hosts(manifest: dict) -> dict[str, dict]:
    return {h["vm"]: h for h in manifest["hosts"]}


def host_pairs(manifest: dict) -> list[tuple[str, str]]:
    vms = sorted(_hosts(manifest))
    return [(o, t) for o in vms for t in vms if o != t]


def _route_removed(manifest: dict, device: str, target: str, cut_target: str) -> bool:
    """Whether losing device's route towards cut_target also loses its route towards target."""
    if device in manifest["leaves"] or manifest["overlay"] != "encap":
        return target == cut_target
    hosts = _hosts(manifest)
    return hosts[target]["leaf"] == hosts[cut_target]["leaf"]


def blackhole_cuts(manifest: dict, origin: str, target: str) -> bool:
    hosts = _hosts(manifest)
    walk = route_walk(manifest["routes"], hosts[origin]["leaf"], hosts[target]["leaf"])
    return any(
        f["device"] in walk and _route_removed(manifest, f["device"], target, f["target"])
        for f in manifest["faults"]
        if f["kind"] == "blackhole"
    )


def delivered(manifest: dict, origin: str, target: str) -> bool:
    """Ground truth: do packets from origin to target reach it?"""
    hosts = _hosts(manifest)
    if manifest["overlay"] == "vlan" and hosts[origin]["segment"] != hosts[target]["segment"]:
        return False
    for pair in manifest["segmentation_pairs"]:
        if (pair["origin"], pair["target"]) == (origin, target) and not pair["open"]:
            return False
    return not blackhole_cuts(manifest, origin, target)


def consistent(manifest: dict, target: str) -> bool:
    """Ground truth of flow consistency towards target from every fabric device."""
    hosts = _hosts(manifest)
    dest = hosts[target]["leaf"]
    tree = manifest["routes"][dest]
    cuts = [f for f in manifest["faults"] if f["kind"] == "blackhole"]
    ends = set()
    for start in manifest["fabric"]:
        node, end = start, dest
        while node != dest:
            if any(
                f["device"] == node and _route_removed(manifest, node, target, f["target"])
                for f in cuts
            ):
                end = node
                break
            node = tree[node]
        ends.add(end)
    return len(ends) <= 1


# ---------------------- Intents ----------------------


def _doc(intent_id: str, kind: int, **params) -> dict:
    return {"id": intent_id, "type": kind, "intent_parameters": params}


def _plan(manifest: dict) -> list[tuple[dict, Outcome]]:
    hosts = _hosts(manifest)
    ep = {
        vm: {"vmName": vm, "ip": str(h["ip"]), "mac": "", "modelKey": h["leaf"]}
        for vm, h in hosts.items()
    }
    vlan = manifest["overlay"] == "vlan"
    fabric = manifest["fabric"]
    holds = {True: Outcome.HOLDS, False: Outcome.VIOLATED}
    loops = any(f["kind"] == "loop" for f in manifest["faults"])
    plan = [(_doc("loop-all", 1), holds[not loops])]
    segmentation = {(p["origin"], p["target"]) for p in manifest["segmentation_pairs"]}
    for o, t in host_pairs(manifest):
        same_segment = hosts[o]["segment"] == hosts[t]["segment"]
        ok = delivered(manifest, o, t)
        pair = {"origin_set": [ep[o]], "target_set": [ep[t]]}
        if same_segment or not vlan:
            plan.append((_doc(f"reach-{o}-{t}", 7, **pair), holds[ok]))
            flow = [[_mv(IP_SRC, hosts[o]["ip"]), _mv(IP_DST, hosts[t]["ip"])]]
            doc = _doc(
                f"blackhole-{o}-{t}", 4, origin_set=[ep[o]], target_subnet=json.dumps(flow)
            )
            plan.append((doc, holds[ok]))
            if fabric:
                waypoint = dict(pair, waypoint_set=list(fabric))
                local = hosts[o]["leaf"] == hosts[t]["leaf"]
                plan.append(
                    (_doc(f"waypoint-{o}-{t}", 3, **waypoint), holds[not (local and ok)])
                )
        if (o, t) in segmentation or (vlan and not same_segment):
            plan.append((_doc(f"segment-{o}-{t}", 2, **pair), holds[not ok]))
    if len(fabric) >= 2:
        for vm in sorted(hosts):
            h = hosts[vm]
            if manifest["overlay"] == "encap":
                address = manifest["tunnels"][h["leaf"]]
            else:
                address = h["ip"]
            starts = [{"device": d, "rule_table": TRANSIT_TABLE} for d in fabric]
            doc = _doc(
                f"consistency-{vm}",
                5,
                target_subnet=json.dumps([[_mv(IP_DST, address)]]),
                start_points=starts,
            )
            plan.append((doc, holds[consistent(manifest, vm)]))
    segments = sorted({h["segment"] for h in hosts.values()})
    for seg in segments:
        by_leaf: dict[str, list[str]] = {}
        for vm in sorted(hosts):
            if hosts[vm]["segment"] == seg:
                by_leaf.setdefault(hosts[vm]["leaf"], []).append(vm)
        if len(by_leaf) < 2:
            continue
        a, b = sorted(by_leaf)[:2]
        pairs = [(o, t) for o in by_leaf[a] for t in by_leaf[b]]
        ok = all(delivered(manifest, o, t) and delivered(manifest, t, o) for o, t in pairs)
        doc = _doc(
            f"wide-s{seg}",
            7,
            origin_set=[ep[vm] for vm in by_leaf[a]],
            target_set=[ep[vm] for vm in by_leaf[b]],
            bidirectional=True,
        )
        plan.append((doc, holds[ok]))
    return plan


def generate_intents(manifest: dict, count: int | None = None, seed: int = 0) -> list[IntentSpec]:
    """
    Intents over a generated network.
    Args:
        manifest (dict): Manifest written by generate().
        count (int, optional): How many; sampled with the seed when smaller than the plan,
            repeated with `~k` id suffixes when larger. All planned intents by default.
        seed (int): Sampling seed.
    Returns:
        list[IntentSpec]: Parsed intents, in plan order.
    """
    docs = [doc for doc, _ in _plan(manifest)]
    if count is not None:
        if count <= len(docs):
            keep = set(random.Random(seed).sample(range(len(docs)), count))
            docs = [d for i, d in enumerate(docs) if i in keep]
        else:
            extra = []
            for k in range(count - len(docs)):
                base = docs[k % len(docs)]
                extra.append(dict(base, id=f"{base['id']}~{k // len(docs) + 1}"))
            docs = docs + extra
    return [parse_intent(d) for d in docs]


def expected_outcomes(manifest: dict) -> dict[str, Outcome]:
    """Correct outcome of every planned intent id (copies share their base id's outcome)."""
    return {doc["id"]: outcome for doc, outcome in _plan(manifest)}


def base_id(intent_id: str) -> str:
    return intent_id.split("~", 1)[0]


# ---------------------- Update streams ----------------------


@dataclass(frozen=True)
class Update:
    index: int
    category: str
    device: str
    snapshot: Path

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "category": self.category,
            "device": self.device,
            "snapshot": str(self.snapshot),
        }


def _interfaces(doc: dict) -> list[str]:
    return sorted(i["id"] if isinstance(i, dict) else str(i) for i in doc.get("interfaces", []))


def _mutate(doc: dict, category: str, rng: random.Random, index: int, ip_bits: int, spare: int):
    tables = doc["rule_tables"]
    if category == "noop" or not tables:
        doc["timestamp"] = str(index + 1)
        return
    table = rng.choice(tables)
    rules = table["rules"]
    if category == "irrelevant":
        rules.append(_rule([_mv(IP_DST, spare)], [_action(ActionType.DROP)]))
    elif category == "relevant" and rules:
        rule = rng.choice(rules)
        if any(a["type"] == ActionType.DROP for a in rule["actions"]):
            rule["actions"] = [_forward(rng.choice(_interfaces(doc)))] if _interfaces(doc) else []
        else:
            rule["actions"] = [_action(ActionType.DROP)]
    elif category == "remove" and rules:
        del rules[rng.randrange(len(rules))]
    else:
        match = [_mv(IP_DST, rng.randrange(1 << ip_bits))]
        choices = [[_action(ActionType.DROP)]]
        choices += [[_forward(i)] for i in _interfaces(doc)]
        rules.insert(rng.randrange(len(rules) + 1), _rule(match, rng.choice(choices)))


def gen_updates(
    snapshot_dir: str | Path, count: int, seed: int, out_dir: str | Path
) -> list[Update]:
    """
    A seeded stream of cumulative updates, one full snapshot directory each.
    Args:
        snapshot_dir (str | Path): Starting snapshot.
        count (int): Number of updates.
        seed (int): Stream seed.
        out_dir (str | Path): Parent directory for `update-NNNN/` snapshots.
    Returns:
        list[Update]: Tagged noop | irrelevant | relevant | add | remove.
    """
    base = DpaStore(snapshot_dir)
    if base.schema is None:
        raise IoFailure(f"{snapshot_dir} has no schema.json", path=str(snapshot_dir))
    devices = {d: base.load_dpa(d).to_json() for d in base.list_devices()}
    if not devices:
        raise IoFailure(f"{snapshot_dir} holds no devices", path=str(snapshot_dir))
    topology = base.load_topology().to_json()
    ip_bits = base.schema.field(IP_DST).bit_width
    try:
        spare = load_manifest(snapshot_dir)["spare_address"]
    except IoFailure:
        spare = (1 << ip_bits) - 1
    rng = random.Random(seed)
    updates = []
    for i in range(count):
        category = rng.choices(UPDATE_CATEGORIES, UPDATE_WEIGHTS)[0]
        device = rng.choice(sorted(devices))
        _mutate(devices[device], category, rng, i, ip_bits, spare)
        network = Network(devices, topology, base.schema, {})
        path = write_snapshot(network, Path(out_dir) / f"update-{i + 1:04d}", with_manifest=False)
        updates.append(Update(i + 1, category, device, path))
    logger.info("Generated %d updates from %s", count, snapshot_dir)
    return updates
