# config.py
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from dotenv import load_dotenv

from slicecheck.errors import MalformedJson, SchemaViolation

DEFAULT_MAX_HOPS = 256
ENUMERATION_BOUND_BITS = 24
DIGEST_ALGORITHM = "blake2b-128"
DIGEST_SIZE_BYTES = 16
DEFAULT_LIBRA_BLOCKS = 8
# (endpoint devices, initial packet-set terms)
SPEC_DISTANCE_WEIGHTS = (0.5, 0.5)
DEFAULT_N_CHECKERS = 1
SCHEMES = ("hashing", "kmedoids", "dynamic")
MODES = ("in-process", "ipc")


@dataclass
class Settings:
    """Process-wide settings; values from the environment override the defaults."""

    store_root: str = "store"
    results_root: str = "results"
    db_file: str = "intents.db"
    max_hops: int = DEFAULT_MAX_HOPS
    n_checkers: int = DEFAULT_N_CHECKERS
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "Settings":
        load_dotenv()
        env = os.environ
        return cls(
            store_root=env.get("SLICECHECK_STORE", cls.store_root),
            results_root=env.get("SLICECHECK_RESULTS", cls.results_root),
            db_file=env.get("SLICECHECK_DB", cls.db_file),
            max_hops=int(env.get("SLICECHECK_MAX_HOPS", cls.max_hops)),
            n_checkers=int(env.get("SLICECHECK_CHECKERS", cls.n_checkers)),
            log_level=env.get("SLICECHECK_LOG_LEVEL", cls.log_level).upper(),
        )


@dataclass
class ClusterConfig:
    """
    Configuration of one cluster run, usually read from a JSON file.
    Args:
        store_root (str): DPA store directory.
        results_root (str): Results store directory (verdicts and slice summaries).
        n_checkers (int): Number of intent checkers.
        scheme (str): Colocation scheme, one of SCHEMES.
        seed (int): Seed for every randomized step.
        intents (str): Path to a JSON list of intent documents.
        snapshots (list[str]): Snapshot directories replayed in order.
        mode (str): "in-process" or "ipc".
        debug (bool): Single message in flight, deterministic order.
        decompose (bool): Split composite intents into sub-intents.
        max_hops (int): Traversal bound per path.
    """

    store_root: str = "store"
    results_root: str = "results"
    n_checkers: int = DEFAULT_N_CHECKERS
    scheme: str = "hashing"
    seed: int = 0
    intents: str = "intents.json"
    snapshots: list = field(default_factory=list)
    mode: str = "in-process"
    debug: bool = True
    decompose: bool = True
    max_hops: int = DEFAULT_MAX_HOPS

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise SchemaViolation("scheme", f"expected one of {SCHEMES}, got {self.scheme!r}")
        if self.mode not in MODES:
            raise SchemaViolation("mode", f"expected one of {MODES}, got {self.mode!r}")
        if int(self.n_checkers) < 1:
            raise SchemaViolation("n_checkers", "must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def from_file(cls, path: str | Path) -> "ClusterConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise MalformedJson(f"{path}: {e}") from e
        if not isinstance(data, dict):
            raise SchemaViolation("$", "config must be a JSON object")
        return cls.from_dict(data)
