# tests/unit/test_header_space.py
import itertools
import os
import random

import pytest

from slicecheck.errors import (
    SchemaMismatch,
    UniverseTooLarge,
    UnknownFieldCode,
    WidthMismatch,
)
from slicecheck.header_space import (
    DEFAULT_SCHEMA,
    ETH_DST,
    IP_DST,
    IP_SRC,
    TOY_SCHEMA,
    VLAN,
    FieldSchema,
    FieldSpec,
    HeaderSpace,
    MaskedValue,
    parse_field_value,
    render_field_value,
    toy_schema,
)


def dst(space, value, mask=""):
    return space.atom(MaskedValue(IP_DST, str(value), str(mask)))


def test_toy_schema_layout():
    assert TOY_SCHEMA.total_bits == 12
    assert [f.code for f in TOY_SCHEMA.fields] == [ETH_DST, VLAN, IP_SRC, IP_DST]


def test_universe_and_empty(toy_space):
    assert toy_space.cardinality(toy_space.universe) == 4096
    assert toy_space.cardinality(toy_space.empty) == 0
    assert toy_space.empty.is_empty()
    assert not toy_space.universe.is_empty()
    assert toy_space.match([]) == toy_space.universe


def test_exact_and_masked_atoms(toy_space):
    assert toy_space.cardinality(dst(toy_space, 3)) == 256
    # top bit of ip_dst set: half the space
    assert toy_space.cardinality(dst(toy_space, 8, 8)) == 2048
    assert dst(toy_space, 3) <= dst(toy_space, 0, 8)
    assert not dst(toy_space, 9) <= dst(toy_space, 0, 8)


def test_algebra_identities(toy_space):
    a = dst(toy_space, 8, 8)
    b = toy_space.atom(MaskedValue(IP_SRC, "1"))
    assert ~(a | b) == (~a & ~b)
    assert a - b == a & ~b
    assert (a & b) <= a
    assert (a - a).is_empty()
    assert a.overlaps(b)
    assert not a.overlaps(~a)
    assert toy_space.union_all([a, ~a]) == toy_space.universe


def test_module_level_operations_agree_with_operators(toy_space):
    from slicecheck import header_space as hs

    a, b = dst(toy_space, 1), dst(toy_space, 2)
    assert hs.union(a, b) == a | b
    assert hs.intersect(a, b).is_empty()
    assert hs.complement(a) == ~a
    assert hs.is_subset(a, hs.union(a, b))
    assert hs.is_empty(hs.intersect(a, b))


def test_sets_from_two_spaces_do_not_mix():
    one, two = HeaderSpace(TOY_SCHEMA), HeaderSpace(TOY_SCHEMA)
    with pytest.raises(SchemaMismatch):
        _ = one.universe & two.universe
    with pytest.raises(SchemaMismatch):
        one.cardinality(two.universe)
    assert one.universe != two.universe


def test_set_field_is_an_image(toy_space):
    flow = toy_space.atom(MaskedValue(IP_SRC, "1")) & dst(toy_space, 3)
    moved = toy_space.set_field(flow, IP_DST, 0, 5)
    assert moved == toy_space.atom(MaskedValue(IP_SRC, "1")) & dst(toy_space, 5)
    # collapsing many destinations onto one keeps the other fields
    everything = toy_space.set_field(toy_space.universe, IP_DST, 0, 7)
    assert everything == dst(toy_space, 7)


def test_push_then_pop_restores_depth_zero():
    space = HeaderSpace(toy_schema(depth_levels=2))
    ps = space.field_equals(IP_DST, 0, 3)
    pushed = space.push_depth(ps)
    assert pushed <= space.field_equals(IP_DST, 1, 3)
    assert pushed <= space.field_equals(IP_DST, 0, 0)
    deep_zero = space.universe
    for spec in space.schema.fields:
        deep_zero = deep_zero & space.field_equals(spec.code, 1, 0)
    assert space.pop_depth(pushed) == ps & deep_zero


def test_header_membership(toy_space):
    ps = dst(toy_space, 3)
    assert toy_space.contains(ps, TOY_SCHEMA.header(ip_dst=3, ip_src=9))
    assert not toy_space.contains(ps, TOY_SCHEMA.header(ip_dst=4))
    assert toy_space.header_set(TOY_SCHEMA.header(vlan=2)) <= toy_space.universe


def test_enumerate_yields_each_member_once(toy_space):
    ps = dst(toy_space, 3) & toy_space.atom(MaskedValue(VLAN, "0", "6"))
    headers = list(toy_space.enumerate(ps))
    assert len(headers) == len(set(headers)) == toy_space.cardinality(ps)
    assert all(toy_space.contains(ps, h) for h in headers)


def test_enumerate_refuses_wide_schemas():
    space = HeaderSpace(DEFAULT_SCHEMA)
    with pytest.raises(UniverseTooLarge):
        next(space.enumerate(space.universe))


def test_cubes_cover_the_set(toy_space):
    ps = (dst(toy_space, 8, 8) - dst(toy_space, 9)) | toy_space.atom(MaskedValue(VLAN, "5"))
    cubes = toy_space.to_cubes(ps)
    assert toy_space.from_cubes(cubes) == ps
    assert toy_space.to_cubes(toy_space.empty) == []
    assert toy_space.to_cubes(toy_space.universe) == [[]]
    # the JSON form reads back too
    assert toy_space.from_cubes(toy_space.to_expression(ps)) == ps


def test_schema_requires_core_fields():
    with pytest.raises(UnknownFieldCode):
        FieldSchema([FieldSpec(IP_DST, "ip_dst", 4)])


def test_schema_rejects_duplicates_and_bad_widths():
    core = [FieldSpec(ETH_DST, "eth_dst", 1), FieldSpec(VLAN, "vlan", 1)]
    core += [FieldSpec(IP_SRC, "ip_src", 1)]
    with pytest.raises(WidthMismatch):
        FieldSchema(core + [FieldSpec(IP_DST, "ip_dst", 0)])
    with pytest.raises(WidthMismatch):
        FieldSchema(core + [FieldSpec(IP_DST, "ip_dst", 2), FieldSpec(IP_DST, "ip_dst", 2)])


def test_header_rejects_values_that_do_not_fit():
    with pytest.raises(WidthMismatch):
        TOY_SCHEMA.header(ip_dst=16)
    with pytest.raises(UnknownFieldCode):
        TOY_SCHEMA.header(l4_dst=1)
    with pytest.raises(WidthMismatch):
        TOY_SCHEMA.dimension_index(IP_DST, 1)


@pytest.mark.parametrize(
    "text,code,expected",
    [
        ("10.0.0.1", IP_DST, 0x0A000001),
        ("00:00:00:00:00:ff", ETH_DST, 255),
        ("0x10", VLAN, 16),
        ("42", VLAN, 42),
    ],
)
def test_field_native_notation(text, code, expected):
    spec = DEFAULT_SCHEMA.field(code)
    assert parse_field_value(text, spec) == expected


@pytest.mark.parametrize(
    "text,code",
    [
        ("10.0.0.1", VLAN),
        ("aa:bb", ETH_DST),
        ("4096", VLAN),
        ("-1", VLAN),
        ("nope", IP_DST),
    ],
)
def test_field_native_notation_errors(text, code):
    with pytest.raises(WidthMismatch):
        parse_field_value(text, DEFAULT_SCHEMA.field(code))


def test_render_round_trips_addresses():
    ip = DEFAULT_SCHEMA.field(IP_SRC)
    mac = DEFAULT_SCHEMA.field(ETH_DST)
    assert render_field_value(parse_field_value("192.168.1.7", ip), ip) == "192.168.1.7"
    assert render_field_value(255, mac) == "00:00:00:00:00:ff"


def test_masked_value_json_defaults():
    mv = MaskedValue.from_json({"field_type": 13, "value": "3"})
    assert mv == MaskedValue(IP_DST, "3", "", 0)
    assert mv.bits(TOY_SCHEMA) == (3, 15)
    assert mv.matches(TOY_SCHEMA, TOY_SCHEMA.header(ip_dst=3))


# -------- randomized algebra against brute force --------

FUZZ_SCALE = int(os.environ.get("SLICECHECK_FUZZ_SCALE", "1"))

ALL_HEADERS = list(itertools.product(*(range(1 << d.width) for d in TOY_SCHEMA.dimensions)))


def random_set(space, rng):
    """A union of up to three random conjunctions, and the headers it must hold."""
    ps, members = space.empty, set()
    for _ in range(rng.randint(1, 3)):
        atoms = []
        for _ in range(rng.randint(0, 3)):
            spec = rng.choice(TOY_SCHEMA.fields)
            top = 1 << spec.bit_width
            atoms.append(MaskedValue(spec.code, str(rng.randrange(top)), str(rng.randrange(top))))
        ps = ps | space.match(atoms)
        members |= {h for h in ALL_HEADERS if all(mv.matches(TOY_SCHEMA, h) for mv in atoms)}
    return ps, members


def check_against_enumeration(space, rng):
    p, p_members = random_set(space, rng)
    q, q_members = random_set(space, rng)
    everything = set(ALL_HEADERS)
    cases = [
        (space.union(p, q), p_members | q_members),
        (space.intersect(p, q), p_members & q_members),
        (space.complement(p), everything - p_members),
        (space.difference(p, q), p_members - q_members),
    ]
    for ps, expected in cases:
        assert space.cardinality(ps) == len(expected)
        assert set(space.enumerate(ps)) == expected
        assert space.is_empty(ps) == (not expected)
    for header in rng.sample(ALL_HEADERS, 16):
        assert space.contains(p, header) == (header in p_members)
    assert space.is_subset(p, q) == space.is_empty(p & ~q) == (p_members <= q_members)
    # the same set reached another way is the same set
    assert ~~p == p
    assert p | q == q | p
    assert p - q == ~(~p | q)
    if len(p_members) <= 64:
        assert space.union_all(space.header_set(h) for h in p_members) == p


@pytest.mark.parametrize("seed", range(25))
def test_algebra_agrees_with_enumeration(toy_space, seed):
    check_against_enumeration(toy_space, random.Random(seed))


@pytest.mark.oracle
def test_algebra_agrees_with_enumeration_many():
    rng = random.Random(77)
    space = HeaderSpace(TOY_SCHEMA)
    for _ in range(2000 * FUZZ_SCALE):
        check_against_enumeration(space, rng)


def test_masked_intersection_on_an_eight_bit_schema():
    space = HeaderSpace(toy_schema(eth_dst=0, vlan=0, ip_src=0, ip_dst=8))
    assert space.schema.total_bits == 8
    wide = dst(space, "0x10", "0xF0")
    exact = dst(space, "0x12", "0xFF")
    both = space.intersect(wide, exact)
    assert space.cardinality(both) == 1
    assert list(space.enumerate(both)) == [(0x12,)]
    assert space.cardinality(wide) == 16
