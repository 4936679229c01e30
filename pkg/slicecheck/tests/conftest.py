import json

import pytest

import slicecheck.Flask_app as Flask_app
from slicecheck.dpa import DpaStore, parse_dpa, parse_topology
from slicecheck.generator import Fault, GenSpec, generate
from slicecheck.header_space import IP_DST, TOY_SCHEMA, HeaderSpace
from slicecheck.intent_store import close_connection, create_connection


class NetDocs:
    """Builders for DPA / topology / intent JSON documents used across the suite."""

    @staticmethod
    def mv(code, value, mask="", depth=0):
        return {"field_type": code, "value": str(value), "mask": str(mask), "depth": depth}

    @staticmethod
    def forward(interface):
        return {"type": 0, "value": "", "outgoing_interface_id": interface}

    @staticmethod
    def drop():
        return {"type": 1}

    @staticmethod
    def accept(vm=""):
        return {"type": 2, "value": vm}

    @staticmethod
    def set_field(type_code, value):
        return {"type": type_code, "value": str(value)}

    @staticmethod
    def rule(match, *actions):
        return {"match": {"masked_values": list(match)}, "actions": list(actions)}

    @staticmethod
    def device(name, tables: dict, interfaces=()):
        return {
            "name": name,
            "vendor": "test",
            "interfaces": list(interfaces),
            "rule_tables": [{"name": t, "rules": rules} for t, rules in tables.items()],
        }

    @staticmethod
    def link(a, ia, b, ib):
        return {"device_a": a, "interface_a": ia, "device_b": b, "interface_b": ib}

    @staticmethod
    def endpoint(vm, ip, device):
        return {"vmName": vm, "ip": str(ip), "mac": "", "modelKey": device}

    @staticmethod
    def intent(intent_id, type_code, **params):
        return {"id": intent_id, "type": type_code, "intent_parameters": params}

    @staticmethod
    def install(store: DpaStore, devices, topology: dict):
        for doc in devices:
            store.store_dpa(parse_dpa(json.dumps(doc), store.schema))
        store.store_topology(parse_topology(json.dumps(topology)))
        return store


def chain_documents(looped: bool = False):
    """
    a -- b -- c, hosts h1 (ip 1) on a and h3 (ip 3) on c, single table "fwd" everywhere.
    looped=True makes c bounce ip_dst=3 back to b instead of delivering it.
    """
    d = NetDocs
    to_h3 = d.forward("to-b") if looped else d.accept("h3")
    devices = [
        d.device(
            "a",
            {
                "fwd": [
                    d.rule([d.mv(IP_DST, 1)], d.accept("h1")),
                    d.rule([d.mv(IP_DST, 3)], d.forward("to-b")),
                ]
            },
            ["to-b"],
        ),
        d.device(
            "b",
            {
                "fwd": [
                    d.rule([d.mv(IP_DST, 3)], d.forward("to-c")),
                    d.rule([d.mv(IP_DST, 1)], d.forward("to-a")),
                ]
            },
            ["to-a", "to-c"],
        ),
        d.device(
            "c",
            {
                "fwd": [
                    d.rule([d.mv(IP_DST, 3)], to_h3),
                    d.rule([d.mv(IP_DST, 1)], d.forward("to-b")),
                ]
            },
            ["to-b"],
        ),
    ]
    topology = {
        "links": [d.link("a", "to-b", "b", "to-a"), d.link("b", "to-c", "c", "to-b")],
        "entry_points": [
            {"device": "a", "rule_table": "fwd"},
            {"device": "c", "rule_table": "fwd"},
        ],
        "ingress": [
            {"device": dev, "interface": iface, "rule_table": "fwd"}
            for dev, iface in (("a", "to-b"), ("b", "to-a"), ("b", "to-c"), ("c", "to-b"))
        ],
    }
    return devices, topology


H1 = NetDocs.endpoint("h1", 1, "a")
H3 = NetDocs.endpoint("h3", 3, "c")


@pytest.fixture()
def netdocs():
    return NetDocs


@pytest.fixture()
def toy_space():
    return HeaderSpace(TOY_SCHEMA)


@pytest.fixture()
def store(tmp_path):
    """Empty DPA store on the 12-bit toy schema."""
    s = DpaStore(tmp_path / "store", TOY_SCHEMA)
    s.store_schema(TOY_SCHEMA)
    return s


@pytest.fixture()
def chain_store(store):
    devices, topology = chain_documents()
    return NetDocs.install(store, devices, topology)


@pytest.fixture()
def looped_store(store):
    devices, topology = chain_documents(looped=True)
    return NetDocs.install(store, devices, topology)


@pytest.fixture()
def chain_snapshot(tmp_path):
    """The chain network written as a snapshot directory, ready for preprocess()."""
    devices, topology = chain_documents()
    snap = DpaStore(tmp_path / "chain-snapshot", TOY_SCHEMA)
    snap.store_schema(TOY_SCHEMA)
    NetDocs.install(snap, devices, topology)
    return snap.root


@pytest.fixture()
def endpoints():
    return {"h1": H1, "h3": H3}


@pytest.fixture(scope="session")
def clean_snapshot(tmp_path_factory):
    """Generated 2x2 leaf-spine with four hosts and no faults."""
    return generate(GenSpec(seed=1), tmp_path_factory.mktemp("clean") / "snap")


@pytest.fixture(scope="session")
def faulty_snapshot(tmp_path_factory):
    """Generated leaf-spine with a loop, a blackhole and ACL-denied pairs."""
    spec = GenSpec(
        leaves=3,
        spines=2,
        hosts_per_leaf=1,
        acl_density=0.5,
        seed=7,
        faults=(Fault("loop", length=3), Fault("blackhole"), Fault("acl_hole")),
    )
    return generate(spec, tmp_path_factory.mktemp("faulty") / "snap")


@pytest.fixture(scope="session")
def temp_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("api")
    return {
        "store": root / "store",
        "results": root / "results",
        "db": root / "intents.db",
    }


@pytest.fixture(scope="session")
def app(temp_dirs):
    Flask_app.app.config["STORE_ROOT"] = str(temp_dirs["store"])
    Flask_app.app.config["RESULTS_ROOT"] = str(temp_dirs["results"])
    Flask_app.app.config["DB_FILE"] = str(temp_dirs["db"])
    Flask_app.app.config["TESTING"] = True

    conn = create_connection(str(temp_dirs["db"]))
    close_connection(conn)
    return Flask_app.app


@pytest.fixture()
def client(app):
    with app.test_client() as c:
        yield c


@pytest.fixture(scope="session")
def api_store(temp_dirs):
    """The chain network installed in the store the API reads."""
    store = DpaStore(temp_dirs["store"], TOY_SCHEMA)
    store.store_schema(TOY_SCHEMA)
    devices, topology = chain_documents()
    return NetDocs.install(store, devices, topology)
