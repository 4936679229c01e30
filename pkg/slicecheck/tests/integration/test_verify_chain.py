"""
Every intent type verified on the three-device chain a -- b -- c (see conftest).
"""

import json

import pytest

from slicecheck.dpa import TableRef
from slicecheck.header_space import IP_DST
from slicecheck.intents import (
    Outcome,
    aggregate,
    disaggregate,
    parse_intent,
    verify,
)
from slicecheck.slicing import SliceContext

pytestmark = pytest.mark.integration

STARTS = [{"device": "a", "rule_table": "fwd"}, {"device": "c", "rule_table": "fwd"}]


def subnet(netdocs, *terms):
    """target_subnet text for a union of ip_dst values."""
    tokens = []
    for k, value in enumerate(terms):
        if k:
            tokens.append("|")
        tokens.append([netdocs.mv(IP_DST, value)])
    return json.dumps(tokens)


def run(store, document, **ctx_args):
    ctx = SliceContext(store, **ctx_args)
    return verify(parse_intent(document), ctx), ctx


# -------- pairwise intents --------


def test_reachability_holds_both_ways(chain_store, netdocs, endpoints):
    doc = netdocs.intent(
        "r", 7, origin_set=[endpoints["h1"]], target_set=[endpoints["h3"]], bidirectional=True
    )
    verdict, _ = run(chain_store, doc)
    assert verdict.outcome == Outcome.HOLDS
    assert verdict.witness is None
    assert verdict.detail == {"pairs": 2}


def test_reachability_stats_and_meta(chain_store, netdocs, endpoints):
    doc = netdocs.intent("r", 7, origin_set=[endpoints["h1"]], target_set=[endpoints["h3"]])
    verdict, ctx = run(chain_store, doc)
    assert verdict.stats.tables_touched == 3
    assert verdict.stats.rules_modeled == 3
    assert verdict.stats.steps > 0
    assert verdict.meta == {"type": 7, "parent": None, "schema": "toy", "digest": "blake2b-128"}
    assert ctx.touched_devices("r") == {"a", "b", "c"}


def test_segmentation_is_violated_by_delivery(chain_store, netdocs, endpoints):
    doc = netdocs.intent("s", 2, origin_set=[endpoints["h1"]], target_set=[endpoints["h3"]])
    verdict, ctx = run(chain_store, doc)
    assert verdict.outcome == Outcome.VIOLATED
    path = verdict.witness_path(ctx.space)
    assert path.terminal.kind.value == "Accepted"
    assert path.devices() == ["a", "b", "c"]


@pytest.mark.parametrize("waypoints,expected", [(["b"], Outcome.HOLDS), (["z"], Outcome.VIOLATED)])
def test_waypoint(chain_store, netdocs, endpoints, waypoints, expected):
    doc = netdocs.intent(
        "w",
        3,
        origin_set=[endpoints["h1"]],
        target_set=[endpoints["h3"]],
        waypoint_set=waypoints,
    )
    verdict, _ = run(chain_store, doc)
    assert verdict.outcome == expected


def test_wide_reachability_matches_its_sub_intents(chain_store, netdocs, endpoints):
    hosts = [endpoints["h1"], endpoints["h3"]]
    intent = parse_intent(netdocs.intent("wide", 7, origin_set=hosts, target_set=hosts))
    whole = verify(intent, SliceContext(chain_store))
    assert whole.outcome == Outcome.HOLDS
    assert whole.detail == {"pairs": 4}

    ctx = SliceContext(chain_store)
    subs = [verify(sub, ctx) for sub in disaggregate(intent)]
    assert [v.meta["parent"] for v in subs] == ["wide"] * 4
    combined = aggregate(subs)
    assert combined.intent_id == "wide"
    assert combined.same_result(whole)


# -------- whole-network intents --------


def test_blackhole_from_one_host(chain_store, netdocs, endpoints):
    doc = netdocs.intent("bh", 4, origin_set=[endpoints["h1"]])
    verdict, ctx = run(chain_store, doc)
    assert verdict.outcome == Outcome.VIOLATED
    assert verdict.witness_path(ctx.space).end.value == "Dropped"


def test_blackhole_restricted_to_a_delivered_subnet(chain_store, netdocs, endpoints):
    doc = netdocs.intent(
        "bh", 4, origin_set=[endpoints["h1"]], target_subnet=subnet(netdocs, 3)
    )
    verdict, _ = run(chain_store, doc)
    assert verdict.outcome == Outcome.HOLDS


def test_loop_freedom_holds_on_the_chain(chain_store, netdocs):
    verdict, ctx = run(chain_store, netdocs.intent("loops", 1))
    assert verdict.outcome == Outcome.HOLDS
    assert ctx.touched_devices("loops") == {"a", "b", "c"}


def test_loop_freedom_finds_the_bounce(looped_store, netdocs):
    verdict, ctx = run(looped_store, netdocs.intent("loops", 1))
    assert verdict.outcome == Outcome.VIOLATED
    path = verdict.witness_path(ctx.space)
    assert path.cycle() == [TableRef("b", "fwd"), TableRef("c", "fwd")]


def test_reachability_through_a_loop_is_violated(looped_store, netdocs, endpoints):
    doc = netdocs.intent("r", 7, origin_set=[endpoints["h1"]], target_set=[endpoints["h3"]])
    verdict, ctx = run(looped_store, doc)
    assert verdict.outcome == Outcome.VIOLATED
    # the witness is the dead end: the path that bounced
    assert verdict.witness["terminal"]["kind"] == "Looped"


# -------- flow consistency --------


@pytest.mark.parametrize(
    "value,expected", [(3, Outcome.HOLDS), (1, Outcome.HOLDS), (2, Outcome.VIOLATED)]
)
def test_flow_consistency(chain_store, netdocs, value, expected):
    doc = netdocs.intent("fc", 5, start_points=STARTS, target_subnet=subnet(netdocs, value))
    verdict, _ = run(chain_store, doc)
    assert verdict.outcome == expected
    traces = verdict.detail["traces"]
    assert [t["start"] for t in traces] == ["a/fwd", "c/fwd"]


def test_flow_consistency_witness_names_the_odd_outcome(chain_store, netdocs):
    doc = netdocs.intent("fc", 5, start_points=STARTS, target_subnet=subnet(netdocs, 2))
    verdict, ctx = run(chain_store, doc)
    path = verdict.witness_path(ctx.space)
    assert path.end.value == "Dropped"
    assert path.terminal.device in {"a", "c"}


def test_consistency_sub_intents_aggregate_to_the_same_verdict(chain_store, netdocs):
    intent = parse_intent(
        netdocs.intent("fc", 5, start_points=STARTS, target_subnet=subnet(netdocs, 2))
    )
    whole = verify(intent, SliceContext(chain_store))
    ctx = SliceContext(chain_store)
    subs = [verify(sub, ctx) for sub in disaggregate(intent, ctx.topology)]
    assert all(v.holds for v in subs)
    assert aggregate(subs).outcome == whole.outcome == Outcome.VIOLATED


# -------- errors --------


def test_hop_bound_gives_an_error_verdict(chain_store, netdocs, endpoints):
    doc = netdocs.intent("r", 7, origin_set=[endpoints["h1"]], target_set=[endpoints["h3"]])
    verdict, _ = run(chain_store, doc, max_hops=2)
    assert verdict.outcome == Outcome.ERROR
    assert verdict.error_kind == "PathLengthExceeded"
    assert verdict.error.startswith("PathLengthExceeded:")


def test_origin_without_entry_table(chain_store, netdocs, endpoints):
    stray = netdocs.endpoint("hz", 5, "zz")
    doc = netdocs.intent("r", 7, origin_set=[stray], target_set=[endpoints["h3"]])
    verdict, _ = run(chain_store, doc)
    assert verdict.outcome == Outcome.ERROR
    assert verdict.error_kind == "StartPointUnresolved"


def test_empty_initial_set(chain_store, netdocs):
    term = [netdocs.mv(IP_DST, 3)]
    doc = netdocs.intent("bh", 4, target_subnet=json.dumps([term, "&", "^", term]))
    verdict, _ = run(chain_store, doc)
    assert verdict.error_kind == "EmptyInitialSet"


@pytest.mark.parametrize(
    "start,kind",
    [
        ({"device": "ghost", "rule_table": "fwd"}, "UnknownDevice"),
        ({"device": "a", "rule_table": "nope"}, "UnknownTable"),
    ],
)
def test_missing_models(chain_store, netdocs, start, kind):
    verdict, ctx = run(chain_store, netdocs.intent("loops", 1, start_points=[start]))
    assert verdict.outcome == Outcome.ERROR
    assert verdict.error_kind == kind
    if kind == "UnknownDevice":
        assert ctx.missing_devices == {"ghost": {"loops"}}
