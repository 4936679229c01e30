"""
Distributed loop freedom: any division of the network, any message schedule, same answer as
one checker holding the whole network.
"""

import pytest

from slicecheck.dpa import DpaStore
from slicecheck.generator import Fault, GenSpec, generate
from slicecheck.intents import IntentSpec, Outcome, verify
from slicecheck.loop_detect import (
    LOOP_INTENT_ID,
    boundary_ingress,
    detect_loops_distributed,
    partition,
    partition_random,
    partition_sparsest,
    sparsest_objective,
)
from slicecheck.slicing import SliceContext

pytestmark = pytest.mark.integration


@pytest.fixture(scope="module")
def fabrics(tmp_path_factory):
    """Four leaves and four spines, with and without a three-device ring."""
    root = tmp_path_factory.mktemp("fabrics")
    base = dict(leaves=4, spines=4, hosts_per_leaf=1, seed=4)
    return {
        "clean": DpaStore(generate(GenSpec(**base), root / "clean")),
        "looped": DpaStore(
            generate(GenSpec(**base, faults=(Fault("loop", length=3),)), root / "looped")
        ),
    }


def central_outcome(store):
    intent = IntentSpec(LOOP_INTENT_ID, 1)
    return verify(intent, SliceContext(store)).outcome


@pytest.mark.parametrize("mode", ["superstep", "free"])
@pytest.mark.parametrize("scheme", ["random", "sparsest"])
@pytest.mark.parametrize("k", [1, 2, 4, 8])
@pytest.mark.parametrize("network", ["clean", "looped"])
def test_any_division_agrees_with_one_checker(fabrics, network, k, scheme, mode):
    store = fabrics[network]
    topology = store.load_topology()
    segments = partition(topology, k, scheme, seed=k)
    run = detect_loops_distributed(segments, store, topology, mode=mode)
    assert run.verdict.outcome == central_outcome(store)
    expected = Outcome.VIOLATED if network == "looped" else Outcome.HOLDS
    assert run.verdict.outcome == expected
    if expected == Outcome.VIOLATED:
        assert run.verdict.witness is not None
    assert len(run.stats) == k


def test_one_segment_sends_no_messages(fabrics):
    store = fabrics["clean"]
    segments = partition(store.load_topology(), 1)
    run = detect_loops_distributed(segments, store)
    assert run.messages == 0
    assert run.supersteps == 1
    assert run.to_json()["max_rules_per_checker"] == run.stats[0].rules_modeled


def test_more_segments_mean_smaller_checkers(fabrics):
    store = fabrics["clean"]
    topology = store.load_topology()
    whole = detect_loops_distributed(partition(topology, 1), store, topology)
    split = detect_loops_distributed(partition(topology, 4, "sparsest"), store, topology)
    assert split.messages > 0
    assert split.max_rules_per_checker <= whole.max_rules_per_checker
    assert sum(s.received for s in split.stats) == sum(s.emitted for s in split.stats)


def test_without_boundary_seeds(fabrics):
    store = fabrics["looped"]
    topology = store.load_topology()
    segments = partition(topology, 2, seed=1)
    run = detect_loops_distributed(segments, store, topology, seed_boundaries=False)
    assert run.verdict.outcome == Outcome.VIOLATED


def test_unknown_mode(fabrics):
    store = fabrics["clean"]
    with pytest.raises(ValueError):
        detect_loops_distributed(partition(store.load_topology(), 2), store, mode="eager")


def test_boundary_ingress_only_on_cut_links(fabrics):
    topology = fabrics["clean"].load_topology()
    everything = {d: 0 for d in topology.devices()}
    assert boundary_ingress(topology, everything) == []
    alone = dict(everything, leaf0=1)
    refs = boundary_ingress(topology, alone)
    assert refs
    assert {r.device for r in refs} <= {"leaf0"} | {f"spine{j}" for j in range(4)}


# -------- partitioning --------

SQUARE = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")]


def test_random_partition_is_seeded_and_covers_everything():
    devices = [f"d{i}" for i in range(10)]
    first = partition_random(devices, 3, seed=9)
    assert first == partition_random(devices, 3, seed=9)
    assert all(s.device_ids for s in first)
    covered = [d for s in first for d in s.device_ids]
    assert sorted(covered) == sorted(devices)
    with pytest.raises(ValueError):
        partition_random(devices, 0)


def test_sparsest_cuts_a_square_in_half():
    segments = partition_sparsest("abcd", SQUARE, 2, seed=0)
    labels = {d: s.segment_id for s in segments for d in s.device_ids}
    assert sorted(len(s.device_ids) for s in segments) == [2, 2]
    assert sparsest_objective(labels, SQUARE, 2) == pytest.approx(0.5)


def test_sparsest_keeps_components_apart():
    links = [("a", "b"), ("c", "d")]
    segments = partition_sparsest("abcd", links, 2)
    groups = sorted(sorted(s.device_ids) for s in segments)
    assert groups == [["a", "b"], ["c", "d"]]


def test_sparsest_edge_cases():
    assert [sorted(s.device_ids) for s in partition_sparsest("abc", SQUARE[:2], 1)] == [
        ["a", "b", "c"]
    ]
    small = partition_sparsest("ab", [("a", "b")], 3)
    assert [sorted(s.device_ids) for s in small] == [["a"], ["b"], []]


def test_objective_of_an_empty_segment_is_infinite():
    assert sparsest_objective({"a": 0, "b": 0}, [("a", "b")], 2) == float("inf")


def test_unknown_partition_scheme(fabrics):
    with pytest.raises(ValueError):
        partition(fabrics["clean"].load_topology(), 2, "metis")
