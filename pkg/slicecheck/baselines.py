# baselines.py
"""
Comparison methods sharing the traversal core, so that only the slicing strategy differs.

scylla  per-intent slices, rechecks filtered by relevant-rule hashes
mono    full model up front; every update rebuilds changed devices and rechecks every intent
mono+   full model; rechecks only intents whose traversal touched an updated device
libra   full model per destination-IP block; no header rewrites on IP fields
"""
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from slicecheck.cluster import preprocess
from slicecheck.config import DEFAULT_LIBRA_BLOCKS, DEFAULT_MAX_HOPS
from slicecheck.dpa import ActionType, DpaStore
from slicecheck.errors import InvalidSpec, UnsupportedRewrite
from slicecheck.header_space import IP_DST, HeaderSpace, MaskedValue, PacketSet
from slicecheck.intents import (
    IntentSpec,
    IntentType,
    Outcome,
    Verdict,
    VerdictStats,
    aggregate,
    compare_traces,
    disaggregate,
    verify,
)
from slicecheck.slicing import SliceContext, garbage_collect, handle_update

logger = logging.getLogger(__name__)

METHODS = ("scylla", "mono", "mono+", "libra")
LIBRA_UNSUPPORTED = (ActionType.SET_IP_SRC, ActionType.SET_IP_DST, ActionType.SET_DEPTH)


@dataclass(frozen=True)
class MethodConfig:
    method: str = "scylla"
    libra_block_count: int = DEFAULT_LIBRA_BLOCKS
    max_hops: int = DEFAULT_MAX_HOPS

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidSpec(f"unknown method {self.method!r}; expected one of {METHODS}")
        blocks = self.libra_block_count
        if blocks < 1 or blocks & (blocks - 1):
            raise InvalidSpec(f"libra block count {blocks} is not a power of two")


@dataclass
class RoundResult:
    verdicts: dict[str, Verdict]
    rechecks: int
    rules_modeled: int
    seconds: float
    slice_rules: list[int] = field(default_factory=list)
    traversals: int = 0

    def to_json(self) -> dict:
        return {
            "verdicts": {i: v.outcome.value for i, v in sorted(self.verdicts.items())},
            "rechecks": self.rechecks,
            "rules_modeled": self.rules_modeled,
            "seconds": round(self.seconds, 6),
            "slice_rules": self.slice_rules,
            "traversals": self.traversals,
        }


@dataclass
class MethodRun:
    method: str
    rounds: list[RoundResult] = field(default_factory=list)
    total_rules: int = 0

    @property
    def verdicts(self) -> dict[str, Verdict]:
        return self.rounds[-1].verdicts if self.rounds else {}

    def outcomes(self) -> list[dict[str, str]]:
        return [{i: v.outcome.value for i, v in r.verdicts.items()} for r in self.rounds]

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "total_rules": self.total_rules,
            "rounds": [r.to_json() for r in self.rounds],
        }


# ---------------------- Full-model helpers ----------------------


def _refresh_devices(ctx: SliceContext, changed, universe: PacketSet | None = None):
    """Rebuild (or drop) every table of the changed devices in a full model."""
    ctx.topology = ctx.store.load_topology()
    for device_id in sorted(changed):
        for ref in list(ctx.device_index.get(device_id, ())):
            ctx.evict(ref)
        ctx.devices.pop(device_id, None)
        if ctx.store.has_device(device_id):
            ctx.rebuild_device(device_id, universe)


def _verify_all(intents: list[IntentSpec], ctx: SliceContext) -> dict[str, Verdict]:
    return {i.id: verify(i, ctx) for i in intents}


# ---------------------- Methods ----------------------


class _Method:
    name = ""

    def __init__(self, store: DpaStore, intents: list[IntentSpec], config: MethodConfig):
        self.store = store
        self.intents = sorted(intents, key=lambda i: i.id)
        self.config = config
        self.verdicts: dict[str, Verdict] = {}
        self._logged = 0

    def start(self) -> RoundResult:
        raise NotImplementedError

    def update(self, changed: set[str]) -> RoundResult:
        raise NotImplementedError

    def _new_traversals(self, *contexts: SliceContext) -> int:
        """Traversals logged since the previous round."""
        total = sum(len(ctx.traversal_log) for ctx in contexts)
        fresh, self._logged = total - self._logged, total
        return fresh


class Scylla(_Method):
    name = "scylla"

    def start(self):
        t0 = time.perf_counter()
        self.ctx = SliceContext(self.store, max_hops=self.config.max_hops)
        self.verdicts = _verify_all(self.intents, self.ctx)
        elapsed = time.perf_counter() - t0
        rules = self.ctx.rules_modeled()
        return RoundResult(
            dict(self.verdicts),
            len(self.intents),
            rules,
            elapsed,
            traversals=self._new_traversals(self.ctx),
        )

    def update(self, changed):
        t0 = time.perf_counter()
        topology = self.store.load_topology()
        rewired = topology.to_json() != self.ctx.topology.to_json()
        self.ctx.topology = topology
        rechecks = handle_update(self.ctx, changed)
        if rewired:
            rechecks = self.ctx.registered()
        for intent in self.intents:
            if intent.id in rechecks:
                self.verdicts[intent.id] = verify(intent, self.ctx)
        garbage_collect(self.ctx)
        return RoundResult(
            dict(self.verdicts),
            len(rechecks),
            self.ctx.rules_modeled(),
            time.perf_counter() - t0,
            traversals=self._new_traversals(self.ctx),
        )


class Mono(_Method):
    name = "mono"

    def start(self):
        t0 = time.perf_counter()
        self.ctx = SliceContext(self.store, max_hops=self.config.max_hops)
        self.ctx.prebuild()
        self.verdicts = _verify_all(self.intents, self.ctx)
        elapsed = time.perf_counter() - t0
        rules = self.ctx.rules_modeled()
        return RoundResult(
            dict(self.verdicts),
            len(self.intents),
            rules,
            elapsed,
            traversals=self._new_traversals(self.ctx),
        )

    def affected(self, changed: set[str]) -> set[str]:
        return {i.id for i in self.intents}

    def update(self, changed):
        t0 = time.perf_counter()
        topology_before = self.ctx.topology.to_json()
        affected = self.affected(changed)
        _refresh_devices(self.ctx, changed)
        if self.ctx.topology.to_json() != topology_before:
            affected = {i.id for i in self.intents}
        for intent in self.intents:
            if intent.id in affected:
                self.verdicts[intent.id] = verify(intent, self.ctx)
        return RoundResult(
            dict(self.verdicts),
            len(affected),
            self.ctx.rules_modeled(),
            time.perf_counter() - t0,
            traversals=self._new_traversals(self.ctx),
        )


class MonoPlus(Mono):
    """Full model, rechecks by touched device; an approximation of per-EC tracking."""

    name = "mono+"

    def affected(self, changed):
        out = set()
        for intent in self.intents:
            touched = self.ctx.touched_devices(intent.id)
            waiting = any(intent.id in self.ctx.missing_devices.get(d, ()) for d in changed)
            if touched & set(changed) or waiting:
                out.add(intent.id)
        return out


def libra_blocks(space: HeaderSpace, count: int) -> list[PacketSet]:
    """Equal destination-IP blocks over the top bits of depth-0 ip_dst."""
    width = space.schema.field(IP_DST).bit_width
    bits = count.bit_length() - 1
    if bits > width:
        raise InvalidSpec(f"{count} blocks do not fit a {width}-bit ip_dst")
    mask = ((1 << bits) - 1) << (width - bits)
    return [
        space.match([MaskedValue(IP_DST, str(b << (width - bits)), str(mask), 0)])
        for b in range(count)
    ]


def check_rewrite_free(store: DpaStore):
    """
    Raises:
        UnsupportedRewrite: On the first rule that sets an IP field or changes depth.
    """
    for device_id in store.list_devices():
        dpa = store.load_dpa(device_id)
        for table in dpa.rule_tables:
            for index, rule in enumerate(table.rules):
                for action in rule.actions:
                    if action.type_code in LIBRA_UNSUPPORTED:
                        raise UnsupportedRewrite(device_id, table.name, index, action.type_code)


def _libra_units(intent: IntentSpec) -> list[IntentSpec]:
    """Directional, single-pair pieces an IP-block verifier can place in blocks."""
    composite = intent.kind != IntentType.FLOW_CONSISTENCY and intent.width > 1
    pieces = disaggregate(intent) if composite else [intent]
    units = []
    for piece in pieces:
        if piece.bidirectional:
            forward = replace(piece, bidirectional=False)
            units.extend([forward, forward.reversed()])
        else:
            units.append(piece)
    return units


def combine_blocks(intent: IntentSpec, per_block: list[Verdict]) -> Verdict:
    """
    Merge the per-block verdicts of one directional intent. Blocks the intent's packets do
    not reach (EmptyInitialSet) are ignored; reachability holds if any block delivers, the
    other types need every block; consistency merges traces per start.
    """
    covered = [v for v in per_block if v.error_kind != "EmptyInitialSet"]
    stats = VerdictStats()
    for v in per_block:
        stats = stats + v.stats
    meta = per_block[0].meta if per_block else {}
    if not covered:
        first = per_block[0]
        return Verdict(
            intent.id, Outcome.ERROR, None, stats, first.error, first.error_kind, meta=meta
        )
    errors = [v for v in covered if v.outcome == Outcome.ERROR]
    if errors:
        e = errors[0]
        return Verdict(intent.id, Outcome.ERROR, None, stats, e.error, e.error_kind, meta=meta)
    if intent.kind == IntentType.FLOW_CONSISTENCY:
        merged: dict[str, dict] = {}
        for v in covered:
            for trace in v.detail.get("traces", []):
                slot = merged.setdefault(
                    trace["start"],
                    {"start": trace["start"], "categories": [], "devices": [], "exemplars": {}},
                )
                slot["categories"] = sorted(set(slot["categories"]) | set(trace["categories"]))
                slot["devices"] = sorted(set(slot["devices"]) | set(trace["devices"]))
                for key, path in trace["exemplars"].items():
                    slot["exemplars"].setdefault(key, path)
        outcome, witness = compare_traces(list(merged.values()))
        traces = list(merged.values())
        return Verdict(intent.id, outcome, witness, stats, detail={"traces": traces}, meta=meta)
    if intent.kind == IntentType.REACHABILITY:
        if any(v.outcome == Outcome.HOLDS for v in covered):
            return Verdict(intent.id, Outcome.HOLDS, None, stats, meta=meta)
        return Verdict(intent.id, Outcome.VIOLATED, covered[0].witness, stats, meta=meta)
    for v in covered:
        if v.outcome == Outcome.VIOLATED:
            return Verdict(intent.id, Outcome.VIOLATED, v.witness, stats, meta=meta)
    return Verdict(intent.id, Outcome.HOLDS, None, stats, meta=meta)


class Libra(_Method):
    name = "libra"

    def _build(self):
        check_rewrite_free(self.store)
        self.contexts = []
        for index in range(self.config.libra_block_count):
            ctx = SliceContext(self.store, max_hops=self.config.max_hops)
            block = libra_blocks(ctx.space, self.config.libra_block_count)[index]
            ctx.scope = block
            ctx.prebuild(block)
            self.contexts.append(ctx)

    def slice_rules(self) -> list[int]:
        return [ctx.rules_modeled() for ctx in self.contexts]

    def _verify(self, intent: IntentSpec) -> Verdict:
        unit_verdicts = []
        for unit in _libra_units(intent):
            per_block = [verify(unit, ctx) for ctx in self.contexts]
            unit_verdicts.append(combine_blocks(unit, per_block))
        if len(unit_verdicts) == 1:
            verdict = unit_verdicts[0]
            verdict.intent_id = intent.id
            return verdict
        for v in unit_verdicts:
            v.meta = dict(v.meta, parent=intent.id)
        return aggregate(unit_verdicts, intent.id)

    def _round(self, t0: float) -> RoundResult:
        self.verdicts = {i.id: self._verify(i) for i in self.intents}
        rules = self.slice_rules()
        return RoundResult(
            dict(self.verdicts),
            len(self.intents),
            sum(rules),
            time.perf_counter() - t0,
            rules,
            traversals=self._new_traversals(*self.contexts),
        )

    def start(self):
        t0 = time.perf_counter()
        self._build()
        return self._round(t0)

    def update(self, changed):
        t0 = time.perf_counter()
        check_rewrite_free(self.store)
        for ctx in self.contexts:
            _refresh_devices(ctx, changed, ctx.scope)
        return self._round(t0)


METHOD_CLASSES = {cls.name: cls for cls in (Scylla, Mono, MonoPlus, Libra)}


def run_method(
    config: MethodConfig,
    store_root: str | Path,
    snapshots: list[str | Path],
    intents: list[IntentSpec],
) -> MethodRun:
    """
    Replay snapshots through one method.
    Args:
        config (MethodConfig): Method and its parameters.
        store_root (str | Path): Fresh directory for this method's DPA store.
        snapshots (list): The initial network followed by one snapshot per update.
        intents (list[IntentSpec]): Intents verified in every round.
    Returns:
        MethodRun: One RoundResult per snapshot.
    Raises:
        UnsupportedRewrite: For libra on networks that rewrite IP fields or encapsulate.
    """
    store = DpaStore(store_root)
    if not snapshots:
        raise InvalidSpec("at least the initial snapshot is required")
    preprocess(snapshots[0], store, 1)
    method = METHOD_CLASSES[config.method](store, intents, config)
    run = MethodRun(config.method, total_rules=store.total_rules())
    run.rounds.append(method.start())
    for generation, snapshot in enumerate(snapshots[1:], start=2):
        msg = preprocess(snapshot, store, generation)
        changed = set(msg.updated_device_ids) if msg is not None else set()
        run.rounds.append(method.update(changed))
    logger.info(
        "Method %s over %d snapshots: %d rechecks, %d rules modeled at the end",
        config.method,
        len(snapshots),
        sum(r.rechecks for r in run.rounds),
        run.rounds[-1].rules_modeled,
    )
    return run


def run_mono(store_root, snapshots, intents, max_hops: int = DEFAULT_MAX_HOPS) -> MethodRun:
    return run_method(MethodConfig("mono", max_hops=max_hops), store_root, snapshots, intents)


def run_mono_plus(store_root, snapshots, intents, max_hops: int = DEFAULT_MAX_HOPS) -> MethodRun:
    return run_method(MethodConfig("mono+", max_hops=max_hops), store_root, snapshots, intents)


def run_libra(
    store_root,
    snapshots,
    intents,
    block_count: int = DEFAULT_LIBRA_BLOCKS,
    max_hops: int = DEFAULT_MAX_HOPS,
) -> MethodRun:
    config = MethodConfig("libra", block_count, max_hops)
    return run_method(config, store_root, snapshots, intents)


def run_scylla(store_root, snapshots, intents, max_hops: int = DEFAULT_MAX_HOPS) -> MethodRun:
    return run_method(MethodConfig("scylla", max_hops=max_hops), store_root, snapshots, intents)


RUNNERS = {
    "scylla": run_scylla,
    "mono": run_mono,
    "mono+": run_mono_plus,
    "libra": run_libra,
}
