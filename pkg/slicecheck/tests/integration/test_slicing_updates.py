"""
Slices kept across updates: relevant-rule hashing decides which tables survive and which
intents are re-verified.
"""

import json

import pytest

from slicecheck.dpa import TableRef, parse_dpa
from slicecheck.header_space import IP_DST
from slicecheck.intents import Outcome, parse_intent, verify
from slicecheck.slicing import SliceContext, garbage_collect, handle_update, slice_stats

pytestmark = pytest.mark.integration


def device_b(netdocs, to_h3=None, extra=()):
    d = netdocs
    rules = [
        d.rule([d.mv(IP_DST, 3)], to_h3 or d.forward("to-c")),
        d.rule([d.mv(IP_DST, 1)], d.forward("to-a")),
        *extra,
    ]
    return d.device("b", {"fwd": rules}, ["to-a", "to-c"])


def replace_device(store, doc):
    store.store_dpa(parse_dpa(json.dumps(doc), store.schema))


@pytest.fixture()
def reach_ctx(chain_store, netdocs, endpoints):
    """Slice holding one verified reachability intent h1 -> h3."""
    ctx = SliceContext(chain_store)
    intent = parse_intent(
        netdocs.intent("r", 7, origin_set=[endpoints["h1"]], target_set=[endpoints["h3"]])
    )
    assert verify(intent, ctx).holds
    return ctx, intent


def test_irrelevant_rule_keeps_the_slice(reach_ctx, netdocs):
    ctx, _ = reach_ctx
    before = ctx.tables[TableRef("b", "fwd")]
    extra = [netdocs.rule([netdocs.mv(IP_DST, 9)], netdocs.drop())]
    replace_device(ctx.store, device_b(netdocs, extra=extra))
    assert handle_update(ctx, {"b"}) == set()
    after = ctx.tables[TableRef("b", "fwd")]
    assert after is before
    assert len(after.table.rules) == 3


def test_relevant_change_triggers_a_recheck(reach_ctx, netdocs):
    ctx, intent = reach_ctx
    replace_device(ctx.store, device_b(netdocs, to_h3=netdocs.drop()))
    assert handle_update(ctx, {"b"}) == {"r"}
    assert TableRef("b", "fwd") not in ctx.tables
    verdict = verify(intent, ctx)
    assert verdict.outcome == Outcome.VIOLATED
    assert verdict.witness["terminal"]["kind"] == "Dropped"


def test_interface_change_evicts_every_table_of_the_device(reach_ctx, netdocs):
    ctx, _ = reach_ctx
    doc = device_b(netdocs)
    doc["interfaces"].append("spare")
    replace_device(ctx.store, doc)
    assert handle_update(ctx, {"b"}) == {"r"}


def test_removed_device(reach_ctx):
    ctx, _ = reach_ctx
    ctx.store.remove_dpa("c")
    assert handle_update(ctx, {"c"}) == {"r"}
    assert "c" not in ctx.devices


def test_devices_outside_the_slice_are_not_loaded(chain_store, netdocs, endpoints):
    ctx = SliceContext(chain_store)
    h1 = endpoints["h1"]
    local = parse_intent(netdocs.intent("local", 7, origin_set=[h1], target_set=[h1]))
    assert verify(local, ctx).holds
    assert ctx.touched_devices("local") == {"a"}
    loads = chain_store.loads
    assert handle_update(ctx, {"b", "c"}) == set()
    assert chain_store.loads == loads


def test_missing_device_arriving_rechecks_the_waiting_intent(chain_store, netdocs):
    ctx = SliceContext(chain_store)
    start = [{"device": "d", "rule_table": "fwd"}]
    intent = parse_intent(netdocs.intent("loops", 1, start_points=start))
    assert verify(intent, ctx).error_kind == "UnknownDevice"
    replace_device(
        chain_store, netdocs.device("d", {"fwd": [netdocs.rule([], netdocs.accept())]})
    )
    assert handle_update(ctx, {"d"}) == {"loops"}
    assert verify(intent, ctx).holds
    assert ctx.missing_devices == {}


def test_rechecking_a_kept_slice_loads_nothing(reach_ctx, netdocs):
    ctx, intent = reach_ctx
    extra = [netdocs.rule([netdocs.mv(IP_DST, 9)], netdocs.drop())]
    replace_device(ctx.store, device_b(netdocs, extra=extra))
    handle_update(ctx, {"b"})
    loads = ctx.store.loads
    assert verify(intent, ctx).holds
    assert ctx.store.loads == loads


def test_garbage_collect_drops_unregistered_intents(chain_store, netdocs, endpoints):
    ctx = SliceContext(chain_store)
    h1, h3 = endpoints["h1"], endpoints["h3"]
    verify(parse_intent(netdocs.intent("local", 7, origin_set=[h1], target_set=[h1])), ctx)
    verify(parse_intent(netdocs.intent("far", 7, origin_set=[h1], target_set=[h3])), ctx)
    assert garbage_collect(ctx) == set()
    ctx.unregister("far")
    dead = garbage_collect(ctx)
    assert dead == {TableRef("b", "fwd"), TableRef("c", "fwd")}
    assert set(ctx.tables) == {TableRef("a", "fwd")}
    assert set(ctx.devices) == {"a"}


def test_full_model_is_never_collected(chain_store):
    ctx = SliceContext(chain_store)
    ctx.prebuild()
    assert len(ctx.tables) == 3
    assert ctx.rules_modeled() == 6
    assert garbage_collect(ctx) == set()


def test_slice_stats(reach_ctx):
    ctx, _ = reach_ctx
    stats = slice_stats(ctx).to_json()
    assert stats["tables_modeled"] == 3
    assert stats["rules_modeled"] == 3
    assert stats["per_intent_rules"]["r"] == ["a/fwd/1", "b/fwd/0", "c/fwd/0"]
