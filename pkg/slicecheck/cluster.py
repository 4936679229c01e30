# cluster.py
"""
The verification pipeline as share-nothing workers.

Preprocessing ingests snapshots into the DPA store and announces semantically changed devices.
The orchestrator turns each announcement into one work message per intent, routed by the
colocation scheme. Intent checkers own a slice context each, filter updates through it and
write verdicts to the results store. Checkers run in-process or as one OS process each,
talking over a pipe with length-prefixed JSON frames.
"""
import json
import logging
import multiprocessing
import random
import struct
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from slicecheck.colocation import Assignment, assign
from slicecheck.config import DEFAULT_MAX_HOPS, ClusterConfig
from slicecheck.dpa import (
    DpaStore,
    canonical_json,
    interfaces_changed,
    parse_dpa,
    parse_topology,
    semantic_diff,
    write_atomic,
)
from slicecheck.errors import (
    IoFailure,
    MalformedJson,
    NotFound,
    SchemaViolation,
    SliceCheckError,
    WorkerCrashed,
)
from slicecheck.intent_store import close_connection, create_connection, list_intents
from slicecheck.intents import (
    IntentSpec,
    Verdict,
    aggregate,
    disaggregate,
    is_composite,
    load_intents,
    parse_intent,
    verify,
)
from slicecheck.slicing import SliceContext, garbage_collect, handle_update

logger = logging.getLogger(__name__)

FRAME_HEADER = struct.Struct(">I")


# ---------------------- Messages ----------------------


@dataclass(frozen=True)
class UpdateMessage:
    updated_device_ids: frozenset
    generation: int
    full: bool = False

    def to_json(self) -> dict:
        return {
            "updated_device_ids": sorted(self.updated_device_ids),
            "generation": self.generation,
            "full": self.full,
        }


@dataclass(frozen=True)
class IntentWorkMessage:
    intent_id: str
    updated_device_ids: frozenset
    routing_key: str
    generation: int
    intent: dict = field(default_factory=dict, compare=False, hash=False)
    op: str = "check"
    # devices changed by the generation itself; updated_device_ids may be wider or empty
    generation_update: frozenset | None = field(default=None, compare=False, hash=False)

    @property
    def generation_devices(self) -> frozenset:
        if self.generation_update is None:
            return self.updated_device_ids
        return self.generation_update

    def to_json(self) -> dict:
        return {
            "op": self.op,
            "intent_id": self.intent_id,
            "updated_device_ids": sorted(self.updated_device_ids),
            "generation_update": sorted(self.generation_devices),
            "routing_key": self.routing_key,
            "generation": self.generation,
            "intent": self.intent,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IntentWorkMessage":
        return cls(
            intent_id=obj["intent_id"],
            updated_device_ids=frozenset(obj["updated_device_ids"]),
            routing_key=obj["routing_key"],
            generation=int(obj["generation"]),
            intent=obj.get("intent", {}),
            op=obj.get("op", "check"),
            generation_update=(
                frozenset(obj["generation_update"]) if "generation_update" in obj else None
            ),
        )


def encode_frame(obj: dict) -> bytes:
    payload = json.dumps(obj, sort_keys=True).encode("utf-8")
    return FRAME_HEADER.pack(len(payload)) + payload


def decode_frame(frame: bytes) -> dict:
    """
    Decode one length-prefixed JSON frame.
    Raises:
        MalformedJson: If the length prefix disagrees with the payload or the JSON is bad.
    """
    if len(frame) < FRAME_HEADER.size:
        raise MalformedJson("frame shorter than its header")
    (length,) = FRAME_HEADER.unpack_from(frame)
    payload = frame[FRAME_HEADER.size :]
    if len(payload) != length:
        raise MalformedJson(f"frame announces {length} bytes, carries {len(payload)}")
    try:
        return json.loads(payload)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedJson(str(e))


# ---------------------- Results store ----------------------


class ResultsStore:
    """
    `<root>/verdicts/<generation>/<intent_id>.json`, `<root>/slices/checker-<i>.json` summaries
    and `<root>/traversals/checker-<i>.jsonl` raw traversal logs.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def write_verdict(self, generation: int, verdict: Verdict):
        path = self.root / "verdicts" / str(generation) / f"{verdict.intent_id}.json"
        write_atomic(path, canonical_json(verdict.to_json()).encode())

    def read_verdict(self, generation: int, intent_id: str) -> Verdict:
        path = self.root / "verdicts" / str(generation) / f"{intent_id}.json"
        try:
            return Verdict.from_json(json.loads(path.read_bytes()))
        except FileNotFoundError:
            raise NotFound(f"no verdict for {intent_id} in generation {generation}")
        except json.JSONDecodeError as e:
            raise MalformedJson(f"{path}: {e}")

    def verdicts(self, generation: int) -> dict[str, Verdict]:
        folder = self.root / "verdicts" / str(generation)
        if not folder.exists():
            raise NotFound(f"generation {generation} has no verdicts")
        paths = sorted(folder.glob("*.json"))
        return {p.stem: self.read_verdict(generation, p.stem) for p in paths}

    def generations(self) -> list[int]:
        folder = self.root / "verdicts"
        if not folder.exists():
            return []
        return sorted(int(p.name) for p in folder.iterdir() if p.name.isdigit())

    def write_slice(self, checker: int, summary: dict):
        path = self.root / "slices" / f"checker-{checker}.json"
        write_atomic(path, canonical_json(summary).encode())

    def slices(self) -> dict[str, list]:
        """Touched rule keys per intent, merged over every checker summary."""
        out: dict[str, list] = {}
        folder = self.root / "slices"
        if not folder.exists():
            return out
        for path in sorted(folder.glob("checker-*.json")):
            out.update(json.loads(path.read_bytes()).get("intents", {}))
        return out

    def checker_stats(self) -> list[dict]:
        """Statistics each checker published with its last summary."""
        folder = self.root / "slices"
        if not folder.exists():
            return []
        summaries = [json.loads(p.read_bytes()) for p in sorted(folder.glob("checker-*.json"))]
        return sorted((s["stats"] for s in summaries if "stats" in s), key=lambda s: s["checker"])

    def _traversal_path(self, checker: int) -> Path:
        return self.root / "traversals" / f"checker-{checker}.jsonl"

    def append_traversals(self, checker: int, events, generation: int = 0):
        """Append raw (intent, rule key) traversal events of one generation, one JSON line each."""
        path = self._traversal_path(checker)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as f:
            for intent_id, key in events:
                rule = "/".join(map(str, key))
                f.write(json.dumps({"intent": intent_id, "rule": rule, "generation": generation}))
                f.write("\n")

    def reset_traversals(self, checker: int):
        self._traversal_path(checker).unlink(missing_ok=True)

    def traversals(self, generation: int | None = None) -> dict[int, list[tuple[str, str]]]:
        """Traversal events per checker, only those of `generation` when given."""
        out: dict[int, list[tuple[str, str]]] = {}
        folder = self.root / "traversals"
        if not folder.exists():
            return out
        for path in sorted(folder.glob("checker-*.jsonl")):
            events = []
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    if generation is not None and obj.get("generation", 0) != generation:
                        continue
                    events.append((obj["intent"], obj["rule"]))
            out[int(path.stem.split("-", 1)[1])] = events
        return out


# ---------------------- Preprocessing ----------------------


def preprocess(snapshot_dir: str | Path, store: DpaStore, generation: int) -> UpdateMessage | None:
    """
    Ingest one snapshot (`devices/*.json`, `topology.json`, optional `schema.json`).
    Args:
        snapshot_dir (str | Path): Snapshot directory.
        store (DpaStore): Store receiving the DPAs.
        generation (int): Generation number the message will carry.
    Returns:
        UpdateMessage | None: Semantically changed devices (added and removed ones included);
        every device when the topology changed; None when nothing changed.
    Raises:
        IoFailure: If the snapshot cannot be read.
        SchemaViolation: If a document is malformed or a link names an undeclared interface;
            no DPA is stored then.
    """
    snapshot = Path(snapshot_dir)
    folder = snapshot / "devices"
    if not folder.is_dir():
        raise IoFailure(f"{snapshot} has no devices/ folder", path=str(snapshot))
    schema_path = snapshot / "schema.json"
    if schema_path.exists() and store.schema is None:
        store.store_schema(DpaStore(snapshot).load_schema())
    changed: set[str] = set()
    parsed = []
    for path in sorted(folder.glob("*.json")):
        try:
            parsed.append(parse_dpa(path.read_bytes(), store.schema))
        except OSError as e:
            raise IoFailure(f"cannot read {path}: {e}") from e
    topo_path = snapshot / "topology.json"
    topology = parse_topology(topo_path.read_bytes()) if topo_path.exists() else None
    (topology if topology is not None else store.load_topology()).check_interfaces(parsed)
    seen: set[str] = set()
    for new in parsed:
        seen.add(new.name)
        try:
            old = store.load_dpa(new.name)
        except NotFound:
            old = None
        if old is None or semantic_diff(old, new) or interfaces_changed(old, new):
            store.store_dpa(new)
            changed.add(new.name)
    for gone in set(store.list_devices()) - seen:
        store.remove_dpa(gone)
        changed.add(gone)
    full = False
    if topology is not None and topology.to_json() != store.load_topology().to_json():
        store.store_topology(topology)
        changed |= seen
        full = True
    if not changed:
        logger.info("Snapshot %s carries no semantic change", snapshot)
        return None
    logger.info("Snapshot %s changed %d devices", snapshot, len(changed))
    return UpdateMessage(frozenset(changed), generation, full)


class Preprocessor:
    def __init__(self, store: DpaStore):
        self.store = store
        self.generation = 0

    def ingest(self, snapshot_dir: str | Path) -> UpdateMessage | None:
        msg = preprocess(snapshot_dir, self.store, self.generation + 1)
        if msg is not None:
            self.generation = msg.generation
        return msg


# ---------------------- Orchestrator ----------------------


def orchestrate(
    msg: UpdateMessage,
    intents: Iterable[IntentSpec],
    assignment: Assignment,
    all_devices: Iterable[str] = (),
    new_intents: Iterable[str] = (),
) -> list[IntentWorkMessage]:
    """
    One work message per configured intent, routed by the assignment.
    Intents named in new_intents receive every device id instead of the update's.
    """
    fresh = set(new_intents)
    every = frozenset(all_devices) | msg.updated_device_ids
    out = []
    for intent in sorted(intents, key=lambda i: i.id):
        out.append(
            IntentWorkMessage(
                intent_id=intent.id,
                updated_device_ids=every if intent.id in fresh else msg.updated_device_ids,
                routing_key=assignment.routing[intent.id],
                generation=msg.generation,
                intent=intent.to_json(),
                generation_update=msg.updated_device_ids,
            )
        )
    return out


def retire(intent_id: str, msg: UpdateMessage) -> IntentWorkMessage:
    """Tell a checker to forget an intent that moved away or was removed."""
    return IntentWorkMessage(
        intent_id,
        frozenset(),
        "",
        msg.generation,
        op="remove",
        generation_update=msg.updated_device_ids,
    )


# ---------------------- Checkers ----------------------


@dataclass
class CheckerStats:
    checker: int
    messages: int = 0
    verifications: int = 0
    rechecks: int = 0
    skipped: int = 0
    dpa_loads: int = 0
    rules_modeled: int = 0
    traversals: int = 0
    peak_tables: int = 0
    steps: int = 0
    seconds: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


class Checker:
    """
    One intent checker and its slice.
    Work messages are idempotent: the update filter runs once per generation and an intent
    is re-verified at most once per generation.
    """

    def __init__(
        self,
        index: int,
        store: DpaStore,
        results: ResultsStore,
        max_hops: int = DEFAULT_MAX_HOPS,
    ):
        self.index = index
        self.store = store
        self.results = results
        self.max_hops = max_hops
        self.ctx: SliceContext | None = None
        self.stats = CheckerStats(index)
        self.intents: dict[str, IntentSpec] = {}
        self.verdicts: dict[str, Verdict] = {}
        self.generation = 0
        self.pending: set[str] = set()
        self.done: set[str] = set()
        self.logged = 0

    def _start_generation(self, msg: IntentWorkMessage):
        self.generation = msg.generation
        if self.ctx is None:
            # the schema is only known once the first snapshot has been ingested
            if self.store.schema is None:
                self.store.schema = self.store.load_schema()
            self.ctx = SliceContext(self.store, max_hops=self.max_hops)
        topology = self.store.load_topology()
        rewired = topology.to_json() != self.ctx.topology.to_json()
        self.ctx.topology = topology
        self.pending = handle_update(self.ctx, msg.generation_devices)
        if rewired:
            self.pending |= self.ctx.registered()
        self.done = set()
        self.stats.rechecks += len(self.pending)

    def handle(self, msg: IntentWorkMessage) -> Verdict | None:
        start = time.perf_counter()
        self.stats.messages += 1
        if msg.generation > self.generation:
            self._start_generation(msg)
        if msg.op == "remove":
            self.ctx.unregister(msg.intent_id)
            self.intents.pop(msg.intent_id, None)
            self.verdicts.pop(msg.intent_id, None)
            return None
        intent = parse_intent(msg.intent)
        known = self.intents.get(intent.id)
        if known is not None and known.canonical() != intent.canonical():
            self.ctx.unregister(intent.id)
        stale = intent.id not in self.ctx.registered() or intent.id in self.pending
        if stale and intent.id not in self.done:
            verdict = verify(intent, self.ctx)
            self.stats.verifications += 1
            self.done.add(intent.id)
        elif intent.id in self.verdicts:
            verdict = self.verdicts[intent.id]
            self.stats.skipped += 1
        else:
            verdict = verify(intent, self.ctx)
            self.stats.verifications += 1
        self.intents[intent.id] = intent
        self.verdicts[intent.id] = verdict
        self.results.write_verdict(msg.generation, verdict)
        self.stats.seconds += time.perf_counter() - start
        return verdict

    def finish_generation(self, generation: int | None = None) -> dict:
        """Drop unreferenced tables and publish the touched-rule summary."""
        if generation is not None:
            self.generation = generation
        if self.ctx is None:
            return {"checker": self.index, "generation": self.generation, "intents": {}}
        self.stats.peak_tables = max(self.stats.peak_tables, len(self.ctx.tables))
        garbage_collect(self.ctx)
        fresh = self.ctx.traversal_log[self.logged :]
        self.results.append_traversals(self.index, fresh, self.generation)
        self.logged = len(self.ctx.traversal_log)
        self.stats.dpa_loads = self.ctx.dpa_loads
        self.stats.rules_modeled = self.ctx.rules_modeled()
        self.stats.steps = self.ctx.steps
        # traversals of the current generation only
        self.stats.traversals = len(fresh)
        summary = {
            "checker": self.index,
            "generation": self.generation,
            "intents": {
                i: sorted("/".join(map(str, k)) for k in keys)
                for i, keys in sorted(self.ctx.intent_rules.items())
            },
            "stats": self.stats.to_json(),
        }
        self.results.write_slice(self.index, summary)
        return summary


class CheckerProcess(multiprocessing.Process):
    """Checker in its own process, fed through one end of a Pipe with framed JSON."""

    def __init__(self, index: int, conn, store_root: str, results_root: str, max_hops: int):
        super().__init__(name=f"checker-{index}", daemon=True)
        self.index = index
        self._conn = conn
        self._store_root = store_root
        self._results_root = results_root
        self._max_hops = max_hops

    def run(self) -> None:
        checker = Checker(
            self.index, DpaStore(self._store_root), ResultsStore(self._results_root), self._max_hops
        )
        while True:
            request = decode_frame(self._conn.recv_bytes())
            op = request.get("op")
            if op == "stop":
                break
            try:
                if op == "sync":
                    summary = checker.finish_generation(request.get("generation"))
                    reply = {"op": "synced", "stats": checker.stats.to_json(), "summary": summary}
                else:
                    verdict = checker.handle(IntentWorkMessage.from_json(request))
                    reply = {
                        "op": "verdict",
                        "intent_id": request["intent_id"],
                        "verdict": verdict.to_json() if verdict is not None else None,
                    }
            except SliceCheckError as e:
                reply = {"op": "failed", "error": e.to_dict(), "request": request}
            self._conn.send_bytes(encode_frame(reply))


# ---------------------- Cluster ----------------------


@dataclass
class ClusterResult:
    verdicts: dict[str, Verdict]
    sub_verdicts: dict[str, Verdict]
    checker_stats: list[CheckerStats]
    generations: int
    assignment: Assignment | None = None


class Cluster:
    """
    Preprocessor, orchestrator and checkers wired over an in-process or pipe message bus.
    Args:
        config (ClusterConfig): Paths, checker count, scheme, mode and seed.
        intents (list[IntentSpec], optional): Overrides the intents named by the config.
    """

    def __init__(self, config: ClusterConfig, intents: list[IntentSpec] | None = None):
        self.config = config
        self.store = DpaStore(config.store_root)
        self.results = ResultsStore(config.results_root)
        self.preprocessor = Preprocessor(self.store)
        self.intents = intents if intents is not None else read_intents(config.intents)
        self.rng = random.Random(config.seed)
        self.assignment: Assignment | None = None
        self.dispatched: dict[str, int] = {}
        self.sent: dict[int, list[IntentWorkMessage]] = {}
        self.sub_verdicts: dict[str, Verdict] = {}
        self.verdicts: dict[str, Verdict] = {}
        self.generation = 0
        self.checkers: list[Checker] = []
        self.processes: list[tuple[CheckerProcess, object]] = []
        self._stats: dict[int, CheckerStats] = {}
        for i in range(config.n_checkers):
            self.results.reset_traversals(i)
        if config.mode == "ipc":
            self._spawn()
        else:
            self.checkers = [self._new_checker(i) for i in range(config.n_checkers)]

    def _new_checker(self, index: int) -> Checker:
        return Checker(index, DpaStore(self.config.store_root), self.results, self.config.max_hops)

    def _spawn(self):
        for i in range(self.config.n_checkers):
            parent, child = multiprocessing.Pipe()
            proc = CheckerProcess(
                i, child, self.config.store_root, self.config.results_root, self.config.max_hops
            )
            proc.start()
            child.close()
            self.processes.append((proc, parent))

    # -------- intents --------

    def expanded(self) -> list[IntentSpec]:
        """Configured intents with composite ones replaced by their sub-intents."""
        out = []
        topology = self.store.load_topology()
        for intent in self.intents:
            if self.config.decompose and is_composite(intent):
                out.extend(disaggregate(intent, topology))
            else:
                out.append(intent)
        return out

    # -------- generations --------

    def step(self, snapshot_dir: str | Path) -> UpdateMessage | None:
        msg = self.preprocessor.ingest(snapshot_dir)
        if msg is None:
            return None
        self.generation = msg.generation
        intents = self.expanded()
        slices = self.results.slices() if self.config.scheme == "dynamic" else None
        self.assignment = assign(self.config.scheme, intents, self.config.n_checkers, slices)
        work: dict[int, list[IntentWorkMessage]] = {i: [] for i in range(self.config.n_checkers)}
        new_ids = set()
        for intent in intents:
            checker = self.assignment.checker_of(intent.id)
            previous = self.dispatched.get(intent.id)
            if previous != checker:
                new_ids.add(intent.id)
                if previous is not None:
                    work[previous].append(retire(intent.id, msg))
        devices = self.store.list_devices()
        for wm in orchestrate(msg, intents, self.assignment, devices, new_ids):
            work[self.assignment.checker_of(wm.intent_id)].append(wm)
        live = {i.id for i in intents}
        for intent_id, checker in list(self.dispatched.items()):
            if intent_id not in live:
                work[checker].append(retire(intent_id, msg))
                del self.dispatched[intent_id]
                self.sub_verdicts.pop(intent_id, None)
        for intent in intents:
            self.dispatched[intent.id] = self.assignment.checker_of(intent.id)
        self.sent = work
        self._run(work)
        self._aggregate()
        return msg

    def _run(self, work: dict[int, list[IntentWorkMessage]]):
        if self.config.mode == "ipc":
            self._run_ipc(work)
            return
        if self.config.debug:
            queues = {i: deque(msgs) for i, msgs in work.items()}
            while any(queues.values()):
                for i in sorted(queues):
                    if queues[i]:
                        self._deliver(self.checkers[i], queues[i].popleft())
        else:
            for msgs in work.values():
                self.rng.shuffle(msgs)
            with ThreadPoolExecutor(max_workers=len(self.checkers)) as pool:
                futures = [
                    pool.submit(self._drain, self.checkers[i], msgs) for i, msgs in work.items()
                ]
                for f in futures:
                    f.result()
        for i in work:
            self.checkers[i].finish_generation(self.generation)
            self._stats[i] = self.checkers[i].stats

    def _drain(self, checker: Checker, msgs: list[IntentWorkMessage]):
        for wm in msgs:
            self._deliver(checker, wm)

    def _deliver(self, checker: Checker, wm: IntentWorkMessage):
        try:
            verdict = checker.handle(wm)
        except SliceCheckError as e:
            raise WorkerCrashed(checker.index, wm.to_json(), f"checker {checker.index}: {e}")
        if verdict is not None:
            self.sub_verdicts[verdict.intent_id] = verdict

    def _run_ipc(self, work: dict[int, list[IntentWorkMessage]], timeout: float = 600.0):
        for i, msgs in work.items():
            _, conn = self.processes[i]
            for wm in msgs:
                conn.send_bytes(encode_frame(wm.to_json()))
            conn.send_bytes(encode_frame({"op": "sync", "generation": self.generation}))
        for i, msgs in work.items():
            proc, conn = self.processes[i]
            outstanding = len(msgs) + 1
            while outstanding:
                reply = self._receive(i, timeout)
                outstanding -= 1
                if reply["op"] == "failed":
                    raise WorkerCrashed(i, reply["request"], reply["error"]["message"])
                if reply["op"] == "verdict" and reply["verdict"] is not None:
                    self.sub_verdicts[reply["intent_id"]] = Verdict.from_json(reply["verdict"])
                elif reply["op"] == "synced":
                    self._stats[i] = CheckerStats(**reply["stats"])

    def _receive(self, index: int, timeout: float) -> dict:
        proc, conn = self.processes[index]
        waited = 0.0
        try:
            while not conn.poll(0.5):
                waited += 0.5
                if not proc.is_alive() or waited >= timeout:
                    raise WorkerCrashed(index, None, f"checker {index} stopped answering")
            return decode_frame(conn.recv_bytes())
        except (EOFError, OSError) as e:
            raise WorkerCrashed(index, None, f"checker {index} hung up: {e}")

    def _aggregate(self):
        by_parent: dict[str, list[Verdict]] = {}
        self.verdicts = {}
        for intent_id, verdict in self.sub_verdicts.items():
            parent = verdict.meta.get("parent")
            if parent:
                by_parent.setdefault(parent, []).append(verdict)
            else:
                self.verdicts[intent_id] = verdict
        for parent, subs in by_parent.items():
            verdict = aggregate(subs, parent)
            self.verdicts[parent] = verdict
            self.results.write_verdict(self.generation, verdict)

    def restart_checker(self, index: int):
        """Replace an in-process checker with a fresh one and replay its generation."""
        self.checkers[index] = self._new_checker(index)
        self.results.reset_traversals(index)
        self._run({index: list(self.sent.get(index, []))})
        self._aggregate()

    def close(self):
        for proc, conn in self.processes:
            if proc.is_alive():
                try:
                    conn.send_bytes(encode_frame({"op": "stop"}))
                except OSError:
                    pass
            proc.join(timeout=5)
            if proc.is_alive():
                proc.terminate()
        self.processes = []

    def result(self) -> ClusterResult:
        return ClusterResult(
            verdicts=dict(sorted(self.verdicts.items())),
            sub_verdicts=dict(sorted(self.sub_verdicts.items())),
            checker_stats=[
                self._stats.get(i, CheckerStats(i)) for i in range(self.config.n_checkers)
            ],
            generations=self.generation,
            assignment=self.assignment,
        )


def read_intents(source: str | Path) -> list[IntentSpec]:
    """Intents from a JSON file, or from the SQLite registry when the path ends in .db."""
    source = str(source)
    if source.endswith((".db", ".sqlite")):
        conn = create_connection(source)
        try:
            return list_intents(conn)
        finally:
            close_connection(conn)
    try:
        return load_intents(source)
    except FileNotFoundError:
        raise SchemaViolation("intents", f"intent file {source} does not exist")


def run_cluster(config: ClusterConfig, intents: list[IntentSpec] | None = None) -> ClusterResult:
    """
    Replay the configured snapshots through the pipeline.
    Args:
        config (ClusterConfig): Cluster configuration.
        intents (list[IntentSpec], optional): Overrides the configured intent source.
    Returns:
        ClusterResult: Verdicts of the last generation (composites aggregated) and per-checker
        statistics; verdicts of every generation are in the results store.
    Raises:
        WorkerCrashed: If a checker dies or fails on a message.
    """
    start = time.perf_counter()
    cluster = Cluster(config, intents)
    try:
        for snapshot in config.snapshots:
            cluster.step(snapshot)
        result = cluster.result()
    finally:
        cluster.close()
    logger.info(
        "Cluster run over %d snapshots in %.4f seconds",
        len(config.snapshots),
        time.perf_counter() - start,
    )
    return result
