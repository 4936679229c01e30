# intents.py
"""
Intent specifications, per-type violation predicates and verdicts.

Every intent is checked by the same depth-first search (`flow_engine.get_next_path`); what
differs is the predicate deciding whether a partial path can still violate the intent.
Reachability runs the search the other way round: a "violation" is a delivery witness.
"""
import json
import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Any, Iterable

from slicecheck.config import DIGEST_ALGORITHM
from slicecheck.dpa import TableRef, canonical_json
from slicecheck.errors import (
    EmptyInitialSet,
    MalformedJson,
    NotComposite,
    PathLengthExceeded,
    SchemaViolation,
    StartPointUnresolved,
    UnknownDevice,
    UnknownIntentType,
    UnknownTable,
)
from slicecheck.expressions import Expr, parse_expression
from slicecheck.flow_engine import (
    Path,
    PathEnd,
    Predicate,
    ViolationStatus,
    complete_path_predicate,
    explore,
    get_next_path,
    seed_frontier,
)
from slicecheck.header_space import IP_DST, IP_SRC, HeaderSpace, PacketSet, parse_field_value

logger = logging.getLogger(__name__)

NEVER = ViolationStatus.NEVER
INCONCLUSIVE = ViolationStatus.INCONCLUSIVE
VIOLATION = ViolationStatus.VIOLATION

VERIFICATION_ERRORS = (
    EmptyInitialSet,
    StartPointUnresolved,
    PathLengthExceeded,
    UnknownDevice,
    UnknownTable,
)


class IntentType(IntEnum):
    LOOP_FREEDOM = 1
    SEGMENTATION = 2
    WAYPOINT = 3
    BLACKHOLE_FREEDOM = 4
    FLOW_CONSISTENCY = 5
    REACHABILITY = 7


PAIRWISE_TYPES = (IntentType.REACHABILITY, IntentType.SEGMENTATION, IntentType.WAYPOINT)


class Outcome(str, Enum):
    HOLDS = "Holds"
    VIOLATED = "Violated"
    ERROR = "Error"


@dataclass(frozen=True)
class Endpoint:
    """A VM or host named by an intent; modelKey is the device it hangs off."""

    vm_name: str = ""
    ip: str = ""
    mac: str = ""
    model_key: str = ""

    @classmethod
    def from_json(cls, obj: Any) -> "Endpoint":
        if isinstance(obj, str):
            return cls(model_key=obj)
        return cls(
            vm_name=str(obj.get("vmName", "")),
            ip=str(obj.get("ip", "")),
            mac=str(obj.get("mac", "")),
            model_key=str(obj.get("modelKey", "")),
        )

    def to_json(self) -> dict:
        return {"vmName": self.vm_name, "ip": self.ip, "mac": self.mac, "modelKey": self.model_key}


@dataclass(frozen=True)
class IntentSpec:
    id: str
    type_code: int
    origins: tuple[Endpoint, ...] = ()
    targets: tuple[Endpoint, ...] = ()
    expression: Expr | None = None
    bidirectional: bool = False
    waypoints: tuple[str, ...] = ()
    start_points: tuple[TableRef, ...] = ()
    parent: str | None = None
    # unrecognised intent_parameters, canonical JSON
    extras: str = "{}"

    @property
    def kind(self) -> IntentType:
        return IntentType(self.type_code)

    @property
    def width(self) -> int:
        return len(self.origins) * len(self.targets)

    def reversed(self) -> "IntentSpec":
        """The opposite direction: origins and targets swap, src/dst fields swap."""
        return replace(
            self,
            origins=self.targets,
            targets=self.origins,
            expression=self.expression.reverse() if self.expression is not None else None,
            bidirectional=False,
        )

    def parameters(self) -> dict:
        params = dict(json.loads(self.extras))
        if self.origins:
            params["origin_set"] = [e.to_json() for e in self.origins]
        if self.targets:
            params["target_set"] = [e.to_json() for e in self.targets]
        if self.expression is not None:
            params["target_subnet"] = self.expression.to_text()
        if self.bidirectional:
            params["bidirectional"] = True
        if self.waypoints:
            params["waypoint_set"] = list(self.waypoints)
        if self.start_points:
            params["start_points"] = [
                {"device": r.device, "rule_table": r.table} for r in self.start_points
            ]
        if self.parent is not None:
            params["parent"] = self.parent
        return params

    def to_json(self) -> dict:
        return {"intent_parameters": self.parameters(), "id": self.id, "type": self.type_code}

    def canonical(self) -> str:
        return canonical_json(self.to_json())


KNOWN_PARAMETERS = (
    "origin_set",
    "target_set",
    "target_subnet",
    "bidirectional",
    "waypoint_set",
    "start_points",
    "parent",
)


def parse_intent(document: bytes | str | dict) -> IntentSpec:
    """
    Parse one intent specification.
    Args:
        document (bytes | str | dict): `{"intent_parameters": {...}, "id": ..., "type": ...}`.
    Returns:
        IntentSpec: Parsed intent; endpoints are resolved against the topology at verify time.
    Raises:
        MalformedJson: If the document is not JSON.
        UnknownIntentType: If the type code is not registered.
        BadExpression: If target_subnet does not parse.
        SchemaViolation: If a field is missing or a type lacks its required parameters.
    """
    if isinstance(document, (bytes, str)):
        try:
            document = json.loads(document)
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise MalformedJson(str(e))
    if not isinstance(document, dict):
        raise SchemaViolation("$", "intent must be an object")
    for key in ("id", "type"):
        if key not in document:
            raise SchemaViolation(f"$.{key}", "missing")
    try:
        kind = IntentType(int(document["type"]))
    except (TypeError, ValueError):
        raise UnknownIntentType(f"intent type {document['type']!r} is not registered")
    params = document.get("intent_parameters") or {}
    if not isinstance(params, dict):
        raise SchemaViolation("$.intent_parameters", "must be an object")

    expression = None
    if params.get("target_subnet") not in (None, "", []):
        expression = parse_expression(params["target_subnet"])
    starts = []
    for i, raw in enumerate(params.get("start_points", [])):
        if not isinstance(raw, dict) or "device" not in raw or "rule_table" not in raw:
            raise SchemaViolation(f"$.intent_parameters.start_points[{i}]", "bad start point")
        starts.append(TableRef(str(raw["device"]), str(raw["rule_table"])))
    waypoints = tuple(
        w if isinstance(w, str) else str(w.get("modelKey", ""))
        for w in params.get("waypoint_set", [])
    )
    intent = IntentSpec(
        id=str(document["id"]),
        type_code=int(kind),
        origins=tuple(Endpoint.from_json(e) for e in params.get("origin_set", [])),
        targets=tuple(Endpoint.from_json(e) for e in params.get("target_set", [])),
        expression=expression,
        bidirectional=bool(params.get("bidirectional", False)),
        waypoints=waypoints,
        start_points=tuple(starts),
        parent=params.get("parent"),
        extras=canonical_json({k: v for k, v in params.items() if k not in KNOWN_PARAMETERS}),
    )
    if kind in PAIRWISE_TYPES and not intent.targets and expression is None:
        raise SchemaViolation("$.intent_parameters.target_set", f"required for {kind.name}")
    if kind == IntentType.WAYPOINT and not waypoints:
        raise SchemaViolation("$.intent_parameters.waypoint_set", "required for WAYPOINT")
    return intent


def load_intents(path) -> list[IntentSpec]:
    """Read a JSON file holding one intent or a list of intents."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        docs = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedJson(f"{path}: {e}")
    if isinstance(docs, dict):
        docs = [docs]
    return [parse_intent(d) for d in docs]


# ---------------------- Predicates ----------------------


def delivers(path: Path, targets: Iterable[Endpoint]) -> bool:
    """True when the path ends Accepted at one of the targets (any Accept if none given)."""
    t = path.terminal
    if t is None or t.kind != PathEnd.ACCEPTED:
        return False
    targets = list(targets)
    if not targets:
        return True
    return any(
        t.device == e.model_key and (not t.endpoint or not e.vm_name or t.endpoint == e.vm_name)
        for e in targets
    )


def _finished(path: Path) -> bool:
    return path.terminal is not None or path.looped


def loop_predicate(path: Path, frontier: list) -> ViolationStatus:
    if path.looped:
        return VIOLATION
    if path.terminal is not None:
        return NEVER
    return INCONCLUSIVE


def blackhole_predicate(path: Path, frontier: list) -> ViolationStatus:
    if path.terminal is not None:
        return VIOLATION if path.terminal.kind == PathEnd.DROPPED else NEVER
    if path.looped:
        return NEVER
    return INCONCLUSIVE


def delivery_predicate(targets: Iterable[Endpoint]) -> Predicate:
    """Status 1 once a path delivers to a target; shared by reachability and segmentation."""
    targets = tuple(targets)

    def predicate(path: Path, frontier: list) -> ViolationStatus:
        if delivers(path, targets):
            return VIOLATION
        if _finished(path):
            return NEVER
        return INCONCLUSIVE

    return predicate


def waypoint_predicate(targets: Iterable[Endpoint], waypoints: Iterable[str]) -> Predicate:
    targets = tuple(targets)
    waypoints = frozenset(waypoints)

    def predicate(path: Path, frontier: list) -> ViolationStatus:
        if any(v.device in waypoints for v in path.vertices):
            return NEVER
        if delivers(path, targets):
            return VIOLATION
        if _finished(path):
            return NEVER
        return INCONCLUSIVE

    return predicate


def predicate_for(
    type_code: int, targets: Iterable[Endpoint] = (), waypoints: Iterable[str] = ()
) -> Predicate:
    """
    Look up the violation predicate of an intent type.
    Args:
        type_code (int): Registered intent type.
        targets (Iterable[Endpoint]): Delivery targets, for the pairwise types.
        waypoints (Iterable[str]): Devices a waypoint intent requires.
    Returns:
        Predicate: (path, frontier) -> ViolationStatus.
    Raises:
        UnknownIntentType: If the code is not registered.
    """
    try:
        kind = IntentType(int(type_code))
    except ValueError:
        raise UnknownIntentType(f"intent type {type_code!r} is not registered")
    if kind == IntentType.LOOP_FREEDOM:
        return loop_predicate
    if kind == IntentType.BLACKHOLE_FREEDOM:
        return blackhole_predicate
    if kind == IntentType.WAYPOINT:
        return waypoint_predicate(targets, waypoints)
    if kind == IntentType.FLOW_CONSISTENCY:
        return complete_path_predicate
    return delivery_predicate(targets)


# ---------------------- Verdicts ----------------------


@dataclass
class VerdictStats:
    tables_touched: int = 0
    rules_modeled: int = 0
    steps: int = 0

    def __add__(self, other: "VerdictStats") -> "VerdictStats":
        return VerdictStats(
            self.tables_touched + other.tables_touched,
            self.rules_modeled + other.rules_modeled,
            self.steps + other.steps,
        )

    def to_json(self) -> dict:
        return {
            "tables_touched": self.tables_touched,
            "rules_modeled": self.rules_modeled,
            "steps": self.steps,
        }


@dataclass
class Verdict:
    """
    Result of verifying one intent. The witness is kept in its JSON form (Path.to_json()) so
    verdicts travel between checkers unchanged; witness_path() rebuilds it in a header space.
    """

    intent_id: str
    outcome: Outcome
    witness: dict | None = None
    stats: VerdictStats = field(default_factory=VerdictStats)
    error: str = ""
    error_kind: str = ""
    detail: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.outcome == Outcome.HOLDS

    def witness_path(self, space: HeaderSpace) -> Path | None:
        return Path.from_json(self.witness, space) if self.witness is not None else None

    def to_json(self) -> dict:
        out = {
            "intent_id": self.intent_id,
            "outcome": self.outcome.value,
            "stats": self.stats.to_json(),
            "meta": self.meta,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.error:
            out["error"] = self.error
            out["error_kind"] = self.error_kind
        if self.detail:
            out["detail"] = self.detail
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Verdict":
        return cls(
            intent_id=obj["intent_id"],
            outcome=Outcome(obj["outcome"]),
            witness=obj.get("witness"),
            stats=VerdictStats(**obj.get("stats", {})),
            error=obj.get("error", ""),
            error_kind=obj.get("error_kind", ""),
            detail=obj.get("detail", {}),
            meta=obj.get("meta", {}),
        )

    def same_result(self, other: "Verdict") -> bool:
        return self.outcome == other.outcome and self.error_kind == other.error_kind


def verdict_meta(intent: IntentSpec, space: HeaderSpace) -> dict:
    return {
        "type": intent.type_code,
        "parent": intent.parent,
        "schema": space.schema.name,
        "digest": DIGEST_ALGORITHM,
    }


# ---------------------- Verification ----------------------


def _ip_set(space: HeaderSpace, code: int, endpoints: Iterable[Endpoint]) -> PacketSet | None:
    spec = space.schema.by_code.get(code)
    ips = [e.ip for e in endpoints if e.ip]
    if spec is None or not ips:
        return None
    return space.union_all(
        space.field_equals(code, 0, parse_field_value(ip, spec)) for ip in ips
    )


def initial_set(
    intent: IntentSpec,
    space: HeaderSpace,
    origins: Iterable[Endpoint] | None = None,
    targets: Iterable[Endpoint] | None = None,
    scope: PacketSet | None = None,
) -> PacketSet:
    """
    Packets a traversal starts with: the target_subnet expression, else the endpoints'
    addresses at depth 0, else every header; always narrowed to scope.
    Raises:
        EmptyInitialSet: If nothing is left.
    """
    if intent.expression is not None:
        ps = intent.expression.build(space)
    else:
        ps = space.universe
        src = _ip_set(space, IP_SRC, intent.origins if origins is None else origins)
        dst = _ip_set(space, IP_DST, intent.targets if targets is None else targets)
        for part in (src, dst):
            if part is not None:
                ps = ps & part
    if scope is not None:
        ps = ps & scope
    if ps.is_empty():
        raise EmptyInitialSet(f"intent {intent.id} starts with no packets", intent=intent.id)
    return ps


def start_tables(intent: IntentSpec, topology, origins: Iterable[Endpoint] | None = None):
    """
    Tables the traversal is seeded at.
    Raises:
        StartPointUnresolved: If an origin has no entry table or the network declares none.
    """
    if intent.start_points:
        return list(intent.start_points)
    origins = intent.origins if origins is None else tuple(origins)
    if not origins:
        if not topology.entry_points:
            raise StartPointUnresolved("topology declares no entry points", intent=intent.id)
        return list(topology.entry_points)
    refs = []
    for origin in origins:
        found = topology.entry_tables(origin.model_key)
        if not found:
            raise StartPointUnresolved(
                f"no entry table on {origin.model_key!r} for {origin.vm_name or 'origin'}",
                intent=intent.id,
                device=origin.model_key,
            )
        refs.extend(found)
    return refs


def _search(ctx, starts, ps: PacketSet, predicate: Predicate) -> tuple[Path | None, Path | None]:
    """Run one traversal; returns (first violating path, first path pruned as finished)."""
    frontier = seed_frontier((ref, ps) for ref in starts)
    dead_end: list[Path] = []

    def watched(path: Path, frontier: list) -> ViolationStatus:
        status = predicate(path, frontier)
        if status == NEVER and not dead_end and _finished(path):
            dead_end.append(path)
        return status

    witness = get_next_path(frontier, watched, ctx, ctx.max_hops)
    return witness, (dead_end[0] if dead_end else None)


def _check_pair(intent: IntentSpec, ctx, origins, targets) -> tuple[Outcome, Path | None]:
    ps = initial_set(intent, ctx.space, origins, targets, ctx.scope)
    starts = start_tables(intent, ctx.topology, origins)
    kind = intent.kind
    if kind == IntentType.WAYPOINT:
        predicate = waypoint_predicate(targets, intent.waypoints)
    elif kind in PAIRWISE_TYPES:
        predicate = delivery_predicate(targets)
    else:
        predicate = predicate_for(kind)
    witness, dead_end = _search(ctx, starts, ps, predicate)
    if kind == IntentType.REACHABILITY:
        return (Outcome.HOLDS, None) if witness is not None else (Outcome.VIOLATED, dead_end)
    return (Outcome.VIOLATED, witness) if witness is not None else (Outcome.HOLDS, None)


def _directional(intent: IntentSpec) -> list[IntentSpec]:
    return [intent, intent.reversed()] if intent.bidirectional else [intent]


def _check_directional(intent: IntentSpec, ctx) -> tuple[Outcome, Path | None, dict]:
    """
    K² traversals for wide intents, one traversal otherwise. Every pair must hold; an error in
    any pair outranks a violation elsewhere, as it does when the pairs run as sub-intents.
    """
    failed: tuple[Outcome, Path | None] | None = None
    first_error = None
    checked = 0
    for direction in _directional(intent):
        if intent.kind in PAIRWISE_TYPES and direction.origins and direction.targets:
            pairs = [((o,), (t,)) for o in direction.origins for t in direction.targets]
        else:
            pairs = [(direction.origins, direction.targets)]
        for origins, targets in pairs:
            checked += 1
            try:
                outcome, witness = _check_pair(direction, ctx, origins or None, targets)
            except VERIFICATION_ERRORS as e:
                first_error = first_error or e
                continue
            if outcome != Outcome.HOLDS and failed is None:
                failed = (outcome, witness)
    if first_error is not None:
        raise first_error
    if failed is not None:
        return failed[0], failed[1], {"pairs": checked}
    return Outcome.HOLDS, None, {"pairs": checked}


# ---------------------- Flow consistency ----------------------


def trace_start(intent: IntentSpec, ctx, ref: TableRef, ps: PacketSet) -> dict:
    """
    Outcome categories and terminal devices of every path from one start.
    Returns:
        dict: {"start", "categories", "devices", "exemplars"}; exemplars maps "category@device"
        to the first path showing it.
    """
    categories, devices, exemplars = set(), set(), {}
    for path in explore(ctx, [(ref, ps)], ctx.max_hops):
        end = path.end.value
        device = path.terminal.device if path.terminal is not None else path.vertices[-1].device
        categories.add(end)
        devices.add(device)
        exemplars.setdefault(f"{end}@{device}", path.to_json())
    return {
        "start": str(ref),
        "categories": sorted(categories),
        "devices": sorted(devices),
        "exemplars": exemplars,
    }


def compare_traces(traces: list[dict]) -> tuple[Outcome, dict | None]:
    """Holds iff every start shares the outcome categories and terminal devices of the first."""
    if not traces:
        return Outcome.HOLDS, None
    reference = traces[0]
    for trace in traces[1:]:
        if trace["categories"] == reference["categories"] and (
            trace["devices"] == reference["devices"]
        ):
            continue
        for one, other in ((trace, reference), (reference, trace)):
            for key, path in sorted(one["exemplars"].items()):
                end, device = key.split("@", 1)
                if end not in other["categories"] or device not in other["devices"]:
                    return Outcome.VIOLATED, path
    return Outcome.HOLDS, None


def _check_consistency(intent: IntentSpec, ctx) -> tuple[Outcome, dict | None, dict]:
    ps = initial_set(intent, ctx.space, scope=ctx.scope)
    traces = [trace_start(intent, ctx, ref, ps) for ref in start_tables(intent, ctx.topology)]
    outcome, witness = compare_traces(traces)
    return outcome, witness, {"traces": traces}


def verify(intent: IntentSpec, ctx) -> Verdict:
    """
    Verify one intent inside a slice context.
    Args:
        intent (IntentSpec): Intent to check.
        ctx (SliceContext): Slice that supplies (and keeps) the model fragments.
    Returns:
        Verdict: Holds / Violated (with witness) / Error. Traversal errors become Error
        verdicts; the slice keeps what the traversal touched either way.
    """
    start = time.perf_counter()
    steps_before = ctx.steps
    ctx.begin_intent(intent.id)
    witness, detail, error, error_kind = None, {}, "", ""
    try:
        if intent.kind == IntentType.FLOW_CONSISTENCY:
            outcome, witness, detail = _check_consistency(intent, ctx)
        else:
            outcome, path, detail = _check_directional(intent, ctx)
            witness = path.to_json() if path is not None else None
    except VERIFICATION_ERRORS as e:
        outcome = Outcome.ERROR
        error_kind = e.__class__.__name__
        error = f"{error_kind}: {e.message}"
        logger.warning("Intent %s could not be verified: %s", intent.id, error)
    finally:
        ctx.end_intent()
    verdict = Verdict(
        intent_id=intent.id,
        outcome=outcome,
        witness=witness,
        stats=VerdictStats(
            tables_touched=len(ctx.intent_tables.get(intent.id, ())),
            rules_modeled=ctx.rules_modeled_for(intent.id),
            steps=ctx.steps - steps_before,
        ),
        error=error,
        error_kind=error_kind,
        detail=detail,
        meta=verdict_meta(intent, ctx.space),
    )
    logger.info(
        "Verified intent %s (%s) -> %s in %.4f seconds",
        intent.id,
        intent.kind.name,
        outcome.value,
        time.perf_counter() - start,
    )
    return verdict


# ---------------------- Composite intents ----------------------


def is_composite(intent: IntentSpec) -> bool:
    if intent.kind == IntentType.FLOW_CONSISTENCY:
        return True
    return intent.kind in PAIRWISE_TYPES and intent.width > 1


def disaggregate(intent: IntentSpec, topology=None) -> list[IntentSpec]:
    """
    Split a composite intent into independently verifiable sub-intents.
    Args:
        intent (IntentSpec): Flow consistency, or a pairwise intent with width > 1.
        topology (Topology, optional): Needed to resolve consistency start points.
    Returns:
        list[IntentSpec]: One per (origin, target) pair or per consistency start table.
    Raises:
        NotComposite: If the intent cannot be split.
    """
    if not is_composite(intent):
        raise NotComposite(f"intent {intent.id} is not composite", intent=intent.id)
    if intent.kind == IntentType.FLOW_CONSISTENCY:
        if intent.start_points:
            refs = list(intent.start_points)
        else:
            if topology is None:
                raise StartPointUnresolved("consistency starts need a topology", intent=intent.id)
            refs = start_tables(intent, topology)
        return [
            replace(intent, id=f"{intent.id}#{k}", start_points=(ref,), parent=intent.id)
            for k, ref in enumerate(refs)
        ]
    return [
        replace(intent, id=f"{intent.id}#{k}", origins=(o,), targets=(t,), parent=intent.id)
        for k, (o, t) in enumerate((o, t) for o in intent.origins for t in intent.targets)
    ]


def aggregate(sub_verdicts: list[Verdict], parent_id: str | None = None) -> Verdict:
    """
    Combine sub-verdicts into the verdict of their composite parent.
    Consistency holds iff every start shares outcome categories and terminal devices; the
    pairwise types hold iff every sub-intent holds. Any Error makes the parent an Error.
    """
    if not sub_verdicts:
        raise NotComposite("no sub-verdicts to aggregate")
    meta = dict(sub_verdicts[0].meta)
    parent_id = parent_id or meta.get("parent") or sub_verdicts[0].intent_id
    meta["parent"] = None
    ordered = sorted(sub_verdicts, key=lambda v: _sub_index(v.intent_id))
    stats = VerdictStats()
    for v in ordered:
        stats = stats + v.stats
    for v in ordered:
        if v.outcome == Outcome.ERROR:
            return Verdict(
                parent_id, Outcome.ERROR, None, stats, v.error, v.error_kind, {}, meta
            )
    if meta.get("type") == IntentType.FLOW_CONSISTENCY:
        traces = [t for v in ordered for t in v.detail.get("traces", [])]
        outcome, witness = compare_traces(traces)
        return Verdict(parent_id, outcome, witness, stats, detail={"traces": traces}, meta=meta)
    for v in ordered:
        if v.outcome != Outcome.HOLDS:
            return Verdict(parent_id, v.outcome, v.witness, stats, meta=meta)
    return Verdict(parent_id, Outcome.HOLDS, None, stats, meta=meta)


def _sub_index(intent_id: str) -> int:
    _, _, k = intent_id.rpartition("#")
    return int(k) if k.isdigit() else 0
