import json

import pytest

from slicecheck.errors import BadExpression
from slicecheck.expressions import Binary, Not, Term, parse_expression, term_multiset
from slicecheck.header_space import IP_DST, IP_SRC, VLAN, MaskedValue


def mv(code, value, mask=""):
    return {"field_type": code, "value": str(value), "mask": str(mask), "depth": 0}


def dst(space, value):
    return space.atom(MaskedValue(IP_DST, str(value)))


def test_single_term_is_a_conjunction(toy_space):
    expr = parse_expression([[mv(IP_DST, 3), mv(VLAN, 1)]])
    assert isinstance(expr, Term)
    assert expr.build(toy_space) == dst(toy_space, 3) & toy_space.atom(MaskedValue(VLAN, "1"))


def test_json_text_and_decoded_list_agree(toy_space):
    tokens = [[mv(IP_DST, 1)], "|", [mv(IP_DST, 2)]]
    a = parse_expression(json.dumps(tokens)).build(toy_space)
    b = parse_expression(tokens).build(toy_space)
    assert a == b == dst(toy_space, 1) | dst(toy_space, 2)


def test_bare_masked_value_counts_as_a_term(toy_space):
    expr = parse_expression([mv(IP_DST, 5)])
    assert expr.build(toy_space) == dst(toy_space, 5)


def test_precedence_complement_then_and_then_or(toy_space):
    a, b, c = [mv(IP_DST, 8, 8)], [mv(IP_SRC, 1)], [mv(VLAN, 2)]
    expr = parse_expression([a, "|", "^", b, "&", c])
    assert isinstance(expr, Binary) and expr.op == "|"
    A = toy_space.match([MaskedValue.from_json(a[0])])
    B = toy_space.match([MaskedValue.from_json(b[0])])
    C = toy_space.match([MaskedValue.from_json(c[0])])
    assert expr.build(toy_space) == A | (~B & C)


def test_parentheses_group(toy_space):
    a, b, c = [mv(IP_DST, 1)], [mv(IP_DST, 2)], [mv(VLAN, 0)]
    grouped = parse_expression(["(", a, "|", b, ")", "&", c]).build(toy_space)
    flat = parse_expression([a, "|", b, "&", c]).build(toy_space)
    assert grouped != flat
    V = toy_space.atom(MaskedValue(VLAN, "0"))
    assert grouped == (dst(toy_space, 1) | dst(toy_space, 2)) & V


def test_double_complement(toy_space):
    expr = parse_expression(["^", "^", [mv(IP_DST, 4)]])
    assert isinstance(expr, Not)
    assert expr.build(toy_space) == dst(toy_space, 4)


def test_tokens_reparse_to_the_same_set(toy_space):
    tokens = ["^", "(", [mv(IP_DST, 1)], "|", [mv(IP_SRC, 2)], ")", "&", [mv(VLAN, 3)]]
    expr = parse_expression(tokens)
    again = parse_expression(expr.to_text())
    assert again.build(toy_space) == expr.build(toy_space)


def test_reverse_swaps_source_and_destination(toy_space):
    expr = parse_expression([[mv(IP_SRC, 1), mv(IP_DST, 3), mv(VLAN, 2)]])
    rev = expr.reverse()
    expected = toy_space.match(
        [MaskedValue(IP_DST, "1", ""), MaskedValue(IP_SRC, "3", ""), MaskedValue(VLAN, "2", "")]
    )
    assert rev.build(toy_space) == expected
    assert rev.reverse() == expr


def test_term_multiset_counts_repeats():
    expr = parse_expression([[mv(IP_DST, 1)], "|", [mv(IP_DST, 1)], "&", [mv(VLAN, 2)]])
    counts = term_multiset(expr)
    assert counts[(IP_DST, "1", "", 0)] == 2
    assert counts[(VLAN, "2", "", 0)] == 1
    assert term_multiset(None) == {}


@pytest.mark.parametrize(
    "source,position",
    [
        ("not json", 0),
        ("{}", 0),
        ([], 0),
        ([[mv(IP_DST, 1)], "&"], 2),
        ([[mv(IP_DST, 1)], [mv(IP_DST, 2)]], 1),
        (["(", [mv(IP_DST, 1)]], 2),
        ([[{"value": "1"}]], 0),
        (["&", [mv(IP_DST, 1)]], 0),
        ([[mv(IP_DST, 1)], "|", 7], 2),
    ],
)
def test_bad_expressions_report_the_offending_token(source, position):
    with pytest.raises(BadExpression) as exc:
        parse_expression(source)
    assert exc.value.position == position
