import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from slicecheck.colocation import (
    KMedoids,
    assign,
    assign_dynamic,
    assign_hashing,
    assign_kmedoids,
    duplicated_rules,
    endpoint_devices,
    jaccard_distance,
    parameter_digest,
    spec_distance,
)
from slicecheck.errors import TooFewIntents
from slicecheck.intents import parse_intent


def ep(device, ip="1"):
    return {"vmName": f"vm-{device}", "ip": ip, "mac": "", "modelKey": device}


def reach(intent_id, src, dst, **extra):
    return parse_intent(
        {
            "id": intent_id,
            "type": 7,
            "intent_parameters": {"origin_set": [ep(src)], "target_set": [ep(dst)], **extra},
        }
    )


def two_blobs():
    # rows 0-2 sit together, rows 3-5 sit together
    D = np.full((6, 6), 10.0)
    for group in (range(0, 3), range(3, 6)):
        for i in group:
            for j in group:
                D[i, j] = 0.0 if i == j else 1.0
    return D


def test_jaccard_distance():
    assert jaccard_distance({"a", "b"}, {"b", "c"}) == pytest.approx(2 / 3)
    assert jaccard_distance([], []) == 0.0
    assert jaccard_distance(["x", "x"], ["x"]) == pytest.approx(0.5)
    assert jaccard_distance({"a"}, {"b"}) == 1.0


def test_kmedoids_separates_blobs():
    model = KMedoids(n_clusters=2).fit(two_blobs())
    labels = model.labels_
    assert len(set(labels[:3])) == 1 and len(set(labels[3:])) == 1
    assert labels[0] != labels[3]
    assert model.inertia_ == pytest.approx(4.0)
    assert list(model.predict(two_blobs())) == list(labels)


def test_kmedoids_errors():
    with pytest.raises(TooFewIntents):
        KMedoids(n_clusters=7).fit(two_blobs())
    with pytest.raises(ValueError):
        KMedoids(n_clusters=1).fit(np.zeros((2, 3)))
    with pytest.raises(NotFittedError):
        KMedoids().predict(two_blobs())


def test_kmedoids_single_cluster_picks_the_most_central_row():
    D = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    model = KMedoids(n_clusters=1).fit(D)
    assert list(model.medoid_indices_) == [1]
    assert list(model.labels_) == [0, 0, 0]


def test_spec_distance_uses_devices_and_terms():
    a = reach("a", "leaf0", "leaf1")
    same = reach("b", "leaf0", "leaf1")
    far = reach("c", "leaf2", "leaf3")
    assert endpoint_devices(a) == {"leaf0", "leaf1"}
    assert spec_distance(a, same) == 0.0
    assert spec_distance(a, far) == pytest.approx(0.5)
    expr = '[[{"field_type": 13, "value": "3"}]]'
    with_terms = reach("d", "leaf0", "leaf1", target_subnet=expr)
    assert spec_distance(a, with_terms) == pytest.approx(0.5)


def test_hashing_ignores_the_id_and_parent():
    a = reach("a", "leaf0", "leaf1")
    b = reach("b", "leaf0", "leaf1", parent="group")
    assert parameter_digest(a) == parameter_digest(b)
    out = assign_hashing([a, b, reach("c", "leaf2", "leaf3")], 4)
    assert out.checker_of("a") == out.checker_of("b")
    assert all(0 <= c < 4 for c in out.checkers.values())
    assert assign_hashing([a], 4).checkers == {"a": out.checker_of("a")}


def test_kmedoids_assignment_groups_similar_intents():
    intents = [
        reach("r1", "leaf0", "leaf1"),
        reach("r2", "leaf0", "leaf1"),
        reach("r3", "leaf0", "leaf1"),
        reach("r4", "leaf2", "leaf3"),
        reach("r5", "leaf2", "leaf3"),
    ]
    out = assign_kmedoids(intents, 2)
    assert out.scheme == "kmedoids"
    assert out.checker_of("r1") == out.checker_of("r2") == out.checker_of("r3")
    assert out.checker_of("r4") == out.checker_of("r5") != out.checker_of("r1")
    assert sorted(out.loads(2)) == [2, 3]


def test_more_checkers_than_intents():
    out = assign_kmedoids([reach("r1", "a", "b"), reach("r2", "a", "b")], 5)
    assert sorted(out.checkers.values()) == [0, 1]
    assert assign_kmedoids([], 3).checkers == {}


def test_dynamic_groups_by_shared_rules():
    intents = [reach(f"r{k}", "x", "y") for k in range(1, 6)]
    slices = {
        "r1": [("a", "t", 0), ("a", "t", 1)],
        "r2": ["a/t/0", "a/t/1"],
        "r3": [("b", "t", 0), ("b", "t", 1)],
        "r4": [("b", "t", 0)],
        # touches no rule anyone else touches; joins the cluster nearest by devices
        "r5": [("b", "u", 7)],
    }
    out = assign_dynamic(intents, 2, slices)
    assert out.scheme == "dynamic"
    assert out.checker_of("r1") == out.checker_of("r2")
    assert out.checker_of("r3") == out.checker_of("r4") != out.checker_of("r1")
    assert out.checker_of("r5") == out.checker_of("r3")
    assert duplicated_rules(out, slices) == 0


def test_dynamic_falls_back_without_slice_data():
    intents = [reach("r1", "x", "y"), reach("r2", "x", "y")]
    assert assign_dynamic(intents, 2, None).scheme == "kmedoids"
    assert assign_dynamic(intents, 2, {"r1": []}).scheme == "kmedoids"


def test_duplicated_rules_counts_extra_holders():
    intents = [reach("r1", "x", "y"), reach("r2", "x", "y")]
    slices = {"r1": [("a", "t", 0), ("a", "t", 1)], "r2": [("a", "t", 0)], "gone": [("z", "t", 0)]}
    split = assign_hashing(intents, 1)
    split.checkers = {"r1": 0, "r2": 1}
    assert duplicated_rules(split, slices) == 1
    split.checkers = {"r1": 0, "r2": 0}
    assert duplicated_rules(split, slices) == 0


def test_assign_dispatch():
    intents = [reach("r1", "x", "y")]
    assert assign("hashing", intents, 2).scheme == "hashing"
    assert assign("kmedoids", intents, 2).scheme == "kmedoids"
    assert assign("dynamic", intents, 2, {"r1": [("a", "t", 0)]}).scheme == "dynamic"
    with pytest.raises(ValueError):
        assign("random", intents, 2)
