import importlib
import types

import pytest


@pytest.mark.smoke
@pytest.mark.parametrize(
    "modname",
    [
        "slicecheck.header_space",
        "slicecheck.dpa",
        "slicecheck.flow_engine",
        "slicecheck.intents",
        "slicecheck.slicing",
        "slicecheck.colocation",
        "slicecheck.cluster",
        "slicecheck.loop_detect",
        "slicecheck.baselines",
        "slicecheck.generator",
        "slicecheck.simulate",
        "slicecheck.metrics",
        "slicecheck.pdf_report",
        "slicecheck.cli",
        "slicecheck.Flask_app",
    ],
)
def test_modules_import(modname):
    mod = importlib.import_module(modname)
    assert isinstance(mod, types.ModuleType)


@pytest.mark.smoke
def test_flask_app_exposes_app():
    from flask import Flask

    mod = importlib.import_module("slicecheck.Flask_app")
    assert isinstance(mod.app, Flask)


@pytest.mark.smoke
def test_health_route(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.get_json() == {"ok": True}


@pytest.mark.smoke
def test_chain_reachability_holds(chain_store, netdocs, endpoints):
    """One intent through the whole stack: parse, slice, traverse, verdict."""
    from slicecheck.intents import Outcome, parse_intent, verify
    from slicecheck.slicing import SliceContext

    doc = netdocs.intent(
        "r1", 7, origin_set=[endpoints["h1"]], target_set=[endpoints["h3"]]
    )
    verdict = verify(parse_intent(doc), SliceContext(chain_store))
    assert verdict.outcome == Outcome.HOLDS
    assert verdict.stats.tables_touched == 3
