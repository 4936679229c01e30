# colocation.py
"""
Intent colocation: which checker verifies which intent.

Three schemes are offered. Hashing digests the specification parameters. KMedoids clusters
intents by a specification distance (endpoint devices and initial packet-set terms). Dynamic
clusters by the rules each intent actually traversed in the previous round.
"""
import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from slicecheck.config import SPEC_DISTANCE_WEIGHTS
from slicecheck.dpa import canonical_json
from slicecheck.errors import NoSliceData, TooFewIntents
from slicecheck.expressions import term_multiset
from slicecheck.intents import IntentSpec

logger = logging.getLogger(__name__)


@dataclass
class Assignment:
    scheme: str
    checkers: dict[str, int] = field(default_factory=dict)
    routing: dict[str, str] = field(default_factory=dict)

    def checker_of(self, intent_id: str) -> int:
        return self.checkers[intent_id]

    def loads(self, n_checkers: int) -> list[int]:
        out = [0] * n_checkers
        for c in self.checkers.values():
            out[c] += 1
        return out

    def to_json(self) -> dict:
        return {"scheme": self.scheme, "checkers": dict(sorted(self.checkers.items()))}


# ---------------------- PAM ----------------------


class KMedoids(ClusterMixin, BaseEstimator):
    """
    Partitioning Around Medoids over a precomputed distance matrix.
    Args:
        n_clusters (int): Number of medoids k.
        max_iter (int): Upper bound on SWAP rounds.
    Attributes:
        medoid_indices_ (np.ndarray): Row index of each medoid, in BUILD order.
        labels_ (np.ndarray): Cluster of every row (nearest medoid, lowest on ties).
        inertia_ (float): Sum of distances to the nearest medoid.
    """

    def __init__(self, n_clusters: int = 2, max_iter: int = 300):
        self.n_clusters = n_clusters
        self.max_iter = max_iter

    def fit(self, X, y=None):
        D = np.asarray(X, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError(f"expected a square distance matrix, got shape {D.shape}")
        n = D.shape[0]
        if self.n_clusters > n:
            raise TooFewIntents(f"{self.n_clusters} clusters for {n} items", k=self.n_clusters, n=n)
        medoids = self._build(D, self.n_clusters)
        self.n_iter_ = 0
        cost = self._cost(D, medoids)
        while self.n_iter_ < self.max_iter:
            swap, new_cost = self._best_swap(D, medoids, cost)
            if swap is None:
                break
            medoids[swap[0]] = swap[1]
            cost = new_cost
            self.n_iter_ += 1
        self.medoid_indices_ = np.array(medoids)
        self.labels_ = np.argmin(D[:, self.medoid_indices_], axis=1)
        self.inertia_ = float(cost)
        return self

    def predict(self, X):
        """Nearest medoid for rows of a (n_samples, n_train) distance matrix."""
        if not hasattr(self, "medoid_indices_"):
            raise NotFittedError("KMedoids is not fitted yet")
        D = np.asarray(X, dtype=float)
        return np.argmin(D[:, self.medoid_indices_], axis=1)

    @staticmethod
    def _cost(D: np.ndarray, medoids: list[int]) -> float:
        return float(D[:, medoids].min(axis=1).sum())

    @staticmethod
    def _build(D: np.ndarray, k: int) -> list[int]:
        medoids = [int(np.argmin(D.sum(axis=1)))]
        nearest = D[:, medoids[0]].copy()
        while len(medoids) < k:
            gains = np.maximum(nearest[:, None] - D, 0.0).sum(axis=0)
            gains[medoids] = -1.0
            best = int(np.argmax(gains))
            medoids.append(best)
            nearest = np.minimum(nearest, D[:, best])
        return medoids

    def _best_swap(self, D: np.ndarray, medoids: list[int], cost: float):
        best, best_cost = None, cost
        chosen = set(medoids)
        for i in range(len(medoids)):
            for h in range(D.shape[0]):
                if h in chosen:
                    continue
                trial = list(medoids)
                trial[i] = h
                trial_cost = self._cost(D, trial)
                if trial_cost < best_cost - 1e-9:
                    best, best_cost = (i, h), trial_cost
        return best, best_cost


# ---------------------- Distances ----------------------


def jaccard_distance(a: Iterable, b: Iterable) -> float:
    """Multiset Jaccard distance; two empty collections are at distance 0."""
    ca, cb = Counter(a), Counter(b)
    union = sum((ca | cb).values())
    if union == 0:
        return 0.0
    return 1.0 - sum((ca & cb).values()) / union


def endpoint_devices(intent: IntentSpec) -> set[str]:
    devices = {e.model_key for e in intent.origins + intent.targets if e.model_key}
    devices.update(intent.waypoints)
    devices.update(r.device for r in intent.start_points)
    return devices


def spec_distance(
    a: IntentSpec, b: IntentSpec, weights: tuple[float, float] = SPEC_DISTANCE_WEIGHTS
) -> float:
    """Weighted endpoint-device distance plus initial packet-set term distance."""
    w_devices, w_terms = weights
    return w_devices * jaccard_distance(endpoint_devices(a), endpoint_devices(b)) + (
        w_terms * jaccard_distance(term_multiset(a.expression), term_multiset(b.expression))
    )


def spec_distance_matrix(intents: list[IntentSpec], weights=SPEC_DISTANCE_WEIGHTS) -> np.ndarray:
    n = len(intents)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = spec_distance(intents[i], intents[j], weights)
    return D


def symmetric_difference_matrix(sets: list[set]) -> np.ndarray:
    n = len(sets)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = len(sets[i] ^ sets[j])
    return D


# ---------------------- Schemes ----------------------


def parameter_digest(intent: IntentSpec) -> bytes:
    """Digest of type and parameters; the id and the parent link do not take part."""
    params = intent.parameters()
    params.pop("parent", None)
    return hashlib.sha256(canonical_json([intent.type_code, params]).encode()).digest()


def assign_hashing(intents: Iterable[IntentSpec], n_checkers: int) -> Assignment:
    out = Assignment("hashing")
    for intent in intents:
        digest = parameter_digest(intent)
        out.checkers[intent.id] = int.from_bytes(digest[:8], "big") % n_checkers
        out.routing[intent.id] = digest.hex()
    return out


def _from_labels(scheme: str, ids: list[str], labels) -> Assignment:
    out = Assignment(scheme)
    for intent_id, label in zip(ids, labels):
        out.checkers[intent_id] = int(label)
        out.routing[intent_id] = f"{scheme}:{int(label)}"
    return out


def _cluster(D: np.ndarray, n_checkers: int) -> np.ndarray:
    try:
        return KMedoids(n_clusters=n_checkers).fit(D).labels_
    except TooFewIntents:
        logger.warning("Fewer intents than checkers; one intent per checker")
        return np.arange(D.shape[0])


def assign_kmedoids(
    intents: list[IntentSpec], n_checkers: int, weights=SPEC_DISTANCE_WEIGHTS
) -> Assignment:
    """
    Static colocation by PAM over the specification distance.
    Returns:
        Assignment: Cluster index = checker index. With more checkers than intents every
        intent gets its own checker and the rest stay empty.
    """
    intents = sorted(intents, key=lambda i: i.id)
    if not intents:
        return Assignment("kmedoids")
    labels = _cluster(spec_distance_matrix(intents, weights), n_checkers)
    return _from_labels("kmedoids", [i.id for i in intents], labels)


def _normalise(keys: Iterable) -> set[tuple]:
    out = set()
    for key in keys:
        if isinstance(key, str):
            device, table, index = key.rsplit("/", 2)
            key = (device, table, int(index))
        out.add(tuple(key))
    return out


def _dynamic(
    intents: list[IntentSpec], n_checkers: int, slices: Mapping[str, Iterable]
) -> Assignment:
    if not slices or any(i.id not in slices for i in intents):
        raise NoSliceData("touched-rule sets are missing for some intents")
    ids = [i.id for i in intents]
    rules = {i: _normalise(slices[i]) for i in ids}
    devices = {i: {k[0] for k in rules[i]} for i in ids}
    everyone = Counter(k for i in ids for k in rules[i])
    solitary = [i for i in ids if all(everyone[k] == 1 for k in rules[i])]
    shared = [i for i in ids if i not in solitary]
    if not shared:
        labels = _cluster(symmetric_difference_matrix([devices[i] for i in ids]), n_checkers)
        return _from_labels("dynamic", ids, labels)
    labels = _cluster(symmetric_difference_matrix([rules[i] for i in shared]), n_checkers)
    out = _from_labels("dynamic", shared, labels)
    cluster_devices: dict[int, set] = {}
    for intent_id, label in zip(shared, labels):
        cluster_devices.setdefault(int(label), set()).update(devices[intent_id])
    for intent_id in solitary:
        nearest = min(
            sorted(cluster_devices),
            key=lambda c: len(devices[intent_id] ^ cluster_devices[c]),
        )
        out.checkers[intent_id] = nearest
        out.routing[intent_id] = f"dynamic:{nearest}"
    logger.debug("Dynamic colocation: %d shared, %d solitary", len(shared), len(solitary))
    return out


def assign_dynamic(
    intents: list[IntentSpec],
    n_checkers: int,
    slices: Mapping[str, Iterable] | None,
    weights=SPEC_DISTANCE_WEIGHTS,
) -> Assignment:
    """
    Colocation by the rules intents traversed last round.
    Args:
        intents (list[IntentSpec]): Registered intents.
        n_checkers (int): Number of checkers.
        slices (Mapping[str, Iterable]): intent id -> touched rule keys (device, table, index)
            or their "device/table/index" form.
    Returns:
        Assignment: Rule-sharing intents clustered by symmetric difference of rule sets,
        rule-solitary intents merged into the cluster nearest by device set. Falls back to
        the static KMedoids scheme when slice data is missing.
    """
    intents = sorted(intents, key=lambda i: i.id)
    if not intents:
        return Assignment("dynamic")
    try:
        return _dynamic(intents, n_checkers, slices or {})
    except NoSliceData as e:
        logger.warning("Dynamic colocation falls back to KMedoids: %s", e.message)
        return assign_kmedoids(intents, n_checkers, weights)


def assign(
    scheme: str,
    intents: list[IntentSpec],
    n_checkers: int,
    slices: Mapping[str, Iterable] | None = None,
) -> Assignment:
    if scheme == "hashing":
        return assign_hashing(intents, n_checkers)
    if scheme == "kmedoids":
        return assign_kmedoids(intents, n_checkers)
    if scheme == "dynamic":
        return assign_dynamic(intents, n_checkers, slices)
    raise ValueError(f"unknown colocation scheme {scheme!r}")


def duplicated_rules(assignment: Assignment, slices: Mapping[str, Iterable]) -> int:
    """Rules modeled on more than one checker, counted once per extra checker."""
    holders: dict[tuple, set[int]] = {}
    for intent_id, keys in slices.items():
        checker = assignment.checkers.get(intent_id)
        if checker is None:
            continue
        for key in _normalise(keys):
            holders.setdefault(key, set()).add(checker)
    return sum(len(c) - 1 for c in holders.values())
