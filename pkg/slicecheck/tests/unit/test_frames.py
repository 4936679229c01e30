import pytest

from slicecheck.cluster import (
    IntentWorkMessage,
    ResultsStore,
    UpdateMessage,
    decode_frame,
    encode_frame,
)
from slicecheck.errors import MalformedJson, NotFound
from slicecheck.intents import Outcome, Verdict, VerdictStats


def test_frame_carries_its_length():
    frame = encode_frame({"op": "sync"})
    assert int.from_bytes(frame[:4], "big") == len(frame) - 4
    assert decode_frame(frame) == {"op": "sync"}


@pytest.mark.parametrize(
    "frame",
    [
        b"\x00\x00",
        b"\x00\x00\x00\x05{}",
        b"\x00\x00\x00\x02{x",
    ],
)
def test_bad_frames(frame):
    with pytest.raises(MalformedJson):
        decode_frame(frame)


def test_work_message_survives_a_frame():
    wm = IntentWorkMessage(
        "r#0",
        frozenset({"b", "a"}),
        "kmedoids:1",
        3,
        intent={"id": "r#0", "type": 7, "intent_parameters": {}},
        generation_update=frozenset({"a"}),
    )
    obj = decode_frame(encode_frame(wm.to_json()))
    assert obj["updated_device_ids"] == ["a", "b"]
    assert obj["generation_update"] == ["a"]
    again = IntentWorkMessage.from_json(obj)
    assert again == wm
    assert again.intent == wm.intent
    assert again.op == "check"
    assert again.generation_devices == {"a"}


def test_update_message_json():
    msg = UpdateMessage(frozenset({"leaf1", "leaf0"}), 2, full=True)
    assert msg.to_json() == {
        "updated_device_ids": ["leaf0", "leaf1"],
        "generation": 2,
        "full": True,
    }


# -------- results store --------


def test_verdicts_by_generation(tmp_path):
    results = ResultsStore(tmp_path)
    v1 = Verdict("a", Outcome.HOLDS, stats=VerdictStats(1, 2, 3))
    v2 = Verdict("b", Outcome.VIOLATED, witness={"vertices": [], "terminal": {"kind": "Dropped"}})
    results.write_verdict(1, v1)
    results.write_verdict(1, v2)
    results.write_verdict(2, v1)
    assert results.generations() == [1, 2]
    assert results.read_verdict(1, "b") == v2
    assert list(results.verdicts(1)) == ["a", "b"]
    with pytest.raises(NotFound):
        results.read_verdict(2, "b")
    with pytest.raises(NotFound):
        results.verdicts(9)


def test_empty_results_store(tmp_path):
    results = ResultsStore(tmp_path / "nothing")
    assert results.generations() == []
    assert results.slices() == {}
    assert results.checker_stats() == []
    assert results.traversals() == {}


def test_slices_and_stats_merge_over_checkers(tmp_path):
    results = ResultsStore(tmp_path)
    results.write_slice(1, {"checker": 1, "intents": {"b": ["x/t/0"]}, "stats": {"checker": 1}})
    results.write_slice(0, {"checker": 0, "intents": {"a": ["x/t/1"]}, "stats": {"checker": 0}})
    assert results.slices() == {"a": ["x/t/1"], "b": ["x/t/0"]}
    assert [s["checker"] for s in results.checker_stats()] == [0, 1]


def test_traversal_logs_append_and_reset(tmp_path):
    results = ResultsStore(tmp_path)
    results.append_traversals(0, [("a", ("x", "t", 0)), ("a", ("x", "t", 1))])
    results.append_traversals(0, [("b", ("x", "t", 0))])
    results.append_traversals(2, [])
    logs = results.traversals()
    assert logs[0] == [("a", "x/t/0"), ("a", "x/t/1"), ("b", "x/t/0")]
    assert logs[2] == []
    results.reset_traversals(0)
    assert 0 not in results.traversals()


def test_traversal_logs_filter_by_generation(tmp_path):
    results = ResultsStore(tmp_path)
    results.append_traversals(0, [("a", ("x", "t", 0))], generation=1)
    results.append_traversals(0, [("a", ("x", "t", 0)), ("b", ("y", "t", 2))], generation=2)
    assert results.traversals(1) == {0: [("a", "x/t/0")]}
    assert results.traversals(2)[0] == [("a", "x/t/0"), ("b", "y/t/2")]
    assert results.traversals(3) == {0: []}
    assert len(results.traversals()[0]) == 3
