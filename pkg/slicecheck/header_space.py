# header_space.py
"""
Symbolic packet sets over a header-field schema.

Every (field, depth) pair is an independent dimension of `bit_width` boolean variables,
most significant bit first. Sets are reduced ordered BDDs from `dd`; one manager per
HeaderSpace, so two sets compare equal iff they are the same node of the same manager.
"""
import ipaddress
import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from dd.autoref import BDD

from slicecheck.config import ENUMERATION_BOUND_BITS
from slicecheck.errors import SchemaMismatch, UniverseTooLarge, UnknownFieldCode, WidthMismatch

logger = logging.getLogger(__name__)

ETH_SRC, ETH_DST, VLAN, IP_PROTO, IP_SRC, IP_DST, L4_SRC, L4_DST = 3, 4, 6, 10, 12, 13, 14, 15
CORE_FIELD_CODES = (ETH_DST, VLAN, IP_SRC, IP_DST)

# A concrete header: one integer per schema dimension, in schema.dimensions order.
Header = tuple


@dataclass(frozen=True)
class FieldSpec:
    code: int
    name: str
    bit_width: int
    depth_levels: int = 1


@dataclass(frozen=True)
class Dimension:
    code: int
    depth: int
    width: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.code, self.depth)


class FieldSchema:
    """
    Ordered set of header fields.
    Args:
        entries (Iterable[FieldSpec | tuple]): (code, name, bit_width, depth_levels) entries.
        name (str): Label recorded in verdict metadata.
    Raises:
        UnknownFieldCode: If a core field code (4, 6, 12, 13) is missing.
        WidthMismatch: If a width or depth count is not positive, or a code repeats.
    """

    def __init__(self, entries: Iterable, name: str = "custom"):
        specs = [e if isinstance(e, FieldSpec) else FieldSpec(*e) for e in entries]
        codes = [s.code for s in specs]
        if len(set(codes)) != len(codes):
            raise WidthMismatch(f"duplicate field codes in schema {name}", codes=codes)
        for s in specs:
            if s.bit_width <= 0 or s.depth_levels <= 0:
                raise WidthMismatch(f"field {s.code} needs positive width and depth", field=s.code)
        missing = [c for c in CORE_FIELD_CODES if c not in codes]
        if missing:
            raise UnknownFieldCode(f"schema {name} lacks core fields {missing}", missing=missing)
        self.name = name
        self.fields = tuple(specs)
        self.by_code = {s.code: s for s in specs}
        self.dimensions = tuple(
            Dimension(s.code, d, s.bit_width) for s in specs for d in range(s.depth_levels)
        )
        self._dim_index = {dim.key: i for i, dim in enumerate(self.dimensions)}
        self.total_bits = sum(dim.width for dim in self.dimensions)

    def field(self, code: int) -> FieldSpec:
        try:
            return self.by_code[code]
        except KeyError:
            raise UnknownFieldCode(f"field code {code} not in schema {self.name}", field=code)

    def dimension_index(self, code: int, depth: int = 0) -> int:
        spec = self.field(code)
        if not 0 <= depth < spec.depth_levels:
            raise WidthMismatch(
                f"depth {depth} out of range for field {code} ({spec.depth_levels} levels)",
                field=code,
                depth=depth,
            )
        return self._dim_index[(code, depth)]

    def header(self, values: Mapping | None = None, **by_name: int) -> Header:
        """
        Build a concrete header; unspecified dimensions are 0.
        Args:
            values (Mapping): {(code, depth) | code: int} overrides.
            **by_name (int): Depth-0 values keyed by field name, e.g. ip_dst=3.
        Returns:
            Header: Tuple aligned with self.dimensions.
        """
        out = [0] * len(self.dimensions)
        names = {s.name: s.code for s in self.fields}
        merged = dict(values or {})
        for key, v in by_name.items():
            if key not in names:
                raise UnknownFieldCode(f"no field named {key}", field=key)
            merged[names[key]] = v
        for key, v in merged.items():
            code, depth = key if isinstance(key, tuple) else (key, 0)
            idx = self.dimension_index(code, depth)
            if not 0 <= v < (1 << self.dimensions[idx].width):
                raise WidthMismatch(f"value {v} does not fit field {code}", field=code)
            out[idx] = v
        return tuple(out)

    def to_list(self) -> list:
        return [[s.code, s.name, s.bit_width, s.depth_levels] for s in self.fields]

    def __eq__(self, other):
        return isinstance(other, FieldSchema) and self.fields == other.fields

    def __hash__(self):
        return hash(self.fields)

    def __repr__(self):
        return f"FieldSchema({self.name}, {self.total_bits} bits)"


DEFAULT_SCHEMA = FieldSchema(
    [
        FieldSpec(ETH_SRC, "eth_src", 48, 2),
        FieldSpec(ETH_DST, "eth_dst", 48, 2),
        FieldSpec(VLAN, "vlan", 12, 2),
        FieldSpec(IP_SRC, "ip_src", 32, 2),
        FieldSpec(IP_DST, "ip_dst", 32, 2),
        FieldSpec(IP_PROTO, "ip_proto", 8, 2),
        FieldSpec(L4_SRC, "l4_src", 16, 2),
        FieldSpec(L4_DST, "l4_dst", 16, 2),
    ],
    name="default",
)

_FIELD_CODES_BY_NAME = {s.name: s.code for s in DEFAULT_SCHEMA.fields}


def toy_schema(depth_levels: int = 1, name: str = "toy", **widths: int) -> FieldSchema:
    """
    Reduced schema for brute-force oracles.
    Args:
        depth_levels (int): Depth levels of every field.
        name (str): Schema label.
        **widths (int): Bit width per field name; 0 omits an optional field. Core fields
            default to eth_dst=1, vlan=3, ip_src=4, ip_dst=4.
    Returns:
        FieldSchema: Schema whose fields keep the production codes.
    """
    base = {"eth_dst": 1, "vlan": 3, "ip_src": 4, "ip_dst": 4}
    base.update(widths)
    entries = []
    for s in DEFAULT_SCHEMA.fields:
        width = base.get(s.name, 0)
        if width:
            entries.append(FieldSpec(s.code, s.name, width, depth_levels))
    unknown = set(base) - set(_FIELD_CODES_BY_NAME)
    if unknown:
        raise UnknownFieldCode(f"unknown toy fields {sorted(unknown)}")
    return FieldSchema(entries, name=name)


TOY_SCHEMA = toy_schema()


# ---------------------- Field-native notation ----------------------


def parse_field_value(text: str, spec: FieldSpec) -> int:
    """
    Parse a value or mask written in field-native notation.
    Args:
        text (str): Dotted quad (32-bit fields), colon hex MAC (48-bit fields), decimal or 0x hex.
        spec (FieldSpec): Target field.
    Returns:
        int: The value as an unsigned integer.
    Raises:
        WidthMismatch: If the text is unparsable or does not fit the field.
    """
    text = str(text).strip()
    try:
        if "." in text:
            if spec.bit_width != 32:
                raise WidthMismatch(f"dotted quad on {spec.bit_width}-bit field {spec.name}")
            value = int(ipaddress.IPv4Address(text))
        elif ":" in text:
            if spec.bit_width != 48:
                raise WidthMismatch(f"MAC notation on {spec.bit_width}-bit field {spec.name}")
            parts = text.split(":")
            if len(parts) != 6:
                raise ValueError(text)
            value = int("".join(p.zfill(2) for p in parts), 16)
        else:
            value = int(text, 0)
    except (ValueError, ipaddress.AddressValueError) as e:
        raise WidthMismatch(f"cannot parse {text!r} for field {spec.name}: {e}", field=spec.code)
    if not 0 <= value < (1 << spec.bit_width):
        raise WidthMismatch(
            f"{text!r} does not fit {spec.bit_width}-bit field {spec.name}", field=spec.code
        )
    return value


def render_field_value(value: int, spec: FieldSpec) -> str:
    if spec.bit_width == 32 and spec.code in (IP_SRC, IP_DST):
        return str(ipaddress.IPv4Address(value))
    if spec.bit_width == 48 and spec.code in (ETH_SRC, ETH_DST):
        raw = f"{value:012x}"
        return ":".join(raw[i : i + 2] for i in range(0, 12, 2))
    return str(value)


@dataclass(frozen=True)
class MaskedValue:
    """One match atom exactly as it appears in DPA and intent JSON."""

    field_code: int
    value: str
    mask: str = ""
    depth: int = 0

    @classmethod
    def from_json(cls, obj: Mapping) -> "MaskedValue":
        return cls(
            field_code=int(obj["field_type"]),
            value=str(obj.get("value", "0")),
            mask=str(obj.get("mask", "")),
            depth=int(obj.get("depth", 0)),
        )

    def to_json(self) -> dict:
        return {
            "field_type": self.field_code,
            "value": self.value,
            "mask": self.mask,
            "depth": self.depth,
        }

    def bits(self, schema: FieldSchema) -> tuple[int, int]:
        """
        Resolve value and mask to integers under a schema.
        Args:
            schema (FieldSchema): Schema the atom is interpreted in.
        Returns:
            tuple[int, int]: (value, mask); an empty mask means every bit.
        """
        spec = schema.field(self.field_code)
        schema.dimension_index(self.field_code, self.depth)
        value = parse_field_value(self.value, spec)
        full = (1 << spec.bit_width) - 1
        mask = full if self.mask == "" else parse_field_value(self.mask, spec)
        return value, mask

    def matches(self, schema: FieldSchema, header: Header) -> bool:
        value, mask = self.bits(schema)
        return (header[schema.dimension_index(self.field_code, self.depth)] & mask) == (
            value & mask
        )


# ---------------------- Packet sets ----------------------


class PacketSet:
    """Immutable set of concrete headers. Use the owning HeaderSpace to build one."""

    __slots__ = ("space", "node")

    def __init__(self, space: "HeaderSpace", node):
        self.space = space
        self.node = node

    def _peer(self, other: "PacketSet"):
        if not isinstance(other, PacketSet) or other.space is not self.space:
            raise SchemaMismatch("packet sets belong to different header spaces")
        return other.node

    def __and__(self, other):
        return PacketSet(self.space, self.node & self._peer(other))

    def __or__(self, other):
        return PacketSet(self.space, self.node | self._peer(other))

    def __sub__(self, other):
        return PacketSet(self.space, self.node & ~self._peer(other))

    def __invert__(self):
        return PacketSet(self.space, ~self.node)

    def __le__(self, other):
        return (self.node & ~self._peer(other)) == self.space.bdd.false

    def is_empty(self) -> bool:
        return self.node == self.space.bdd.false

    def overlaps(self, other: "PacketSet") -> bool:
        return (self.node & self._peer(other)) != self.space.bdd.false

    def __eq__(self, other):
        if not isinstance(other, PacketSet) or other.space is not self.space:
            return False
        return self.node == other.node

    def __hash__(self):
        return hash((id(self.space), self.node))

    def __repr__(self):
        if self.is_empty():
            return "PacketSet(∅)"
        if self.node == self.space.bdd.true:
            return "PacketSet(*)"
        return f"PacketSet({len(self.space.to_cubes(self))} cubes)"


class HeaderSpace:
    """
    A BDD manager bound to one FieldSchema. Not shared between workers; packet sets cross
    worker boundaries as cube lists (to_cubes / from_cubes).
    """

    def __init__(self, schema: FieldSchema = DEFAULT_SCHEMA):
        self.schema = schema
        self.bdd = BDD()
        self.bdd.configure(reordering=False)
        self._vars: dict[tuple[int, int], list[str]] = {}
        for dim in schema.dimensions:
            names = [f"f{dim.code}d{dim.depth}b{i}" for i in range(dim.width)]
            self._vars[dim.key] = names
            self.bdd.declare(*names)
        self._all_vars = [v for dim in schema.dimensions for v in self._vars[dim.key]]
        self._level = {v: i for i, v in enumerate(self._all_vars)}
        self._owner = {v: dim for dim in schema.dimensions for v in self._vars[dim.key]}
        self.universe = PacketSet(self, self.bdd.true)
        self.empty = PacketSet(self, self.bdd.false)

    # -------- construction --------

    def _value_node(self, code: int, depth: int, value: int, mask: int):
        names = self._vars[(code, depth)]
        width = len(names)
        cube = {
            names[i]: bool((value >> (width - 1 - i)) & 1)
            for i in range(width)
            if (mask >> (width - 1 - i)) & 1
        }
        return self.bdd.cube(cube) if cube else self.bdd.true

    def atom(self, mv: MaskedValue) -> PacketSet:
        value, mask = mv.bits(self.schema)
        return PacketSet(self, self._value_node(mv.field_code, mv.depth, value, mask))

    def match(self, masked_values: Iterable[MaskedValue]) -> PacketSet:
        """Conjunction of atoms; an empty list is the universe."""
        node = self.bdd.true
        for mv in masked_values:
            node = node & self.atom(mv).node
        return PacketSet(self, node)

    def field_equals(self, code: int, depth: int, value: int) -> PacketSet:
        self.schema.dimension_index(code, depth)
        width = self.schema.field(code).bit_width
        return PacketSet(self, self._value_node(code, depth, value, (1 << width) - 1))

    def header_set(self, header: Header) -> PacketSet:
        node = self.bdd.true
        for dim, value in zip(self.schema.dimensions, header):
            node = node & self._value_node(dim.code, dim.depth, value, (1 << dim.width) - 1)
        return PacketSet(self, node)

    # -------- algebra --------

    def _check(self, *sets: PacketSet):
        for ps in sets:
            if not isinstance(ps, PacketSet) or ps.space is not self:
                raise SchemaMismatch("packet set belongs to a different header space")

    def intersect(self, lhs: PacketSet, rhs: PacketSet) -> PacketSet:
        self._check(lhs, rhs)
        return lhs & rhs

    def union(self, lhs: PacketSet, rhs: PacketSet) -> PacketSet:
        self._check(lhs, rhs)
        return lhs | rhs

    def complement(self, ps: PacketSet) -> PacketSet:
        self._check(ps)
        return ~ps

    def difference(self, lhs: PacketSet, rhs: PacketSet) -> PacketSet:
        self._check(lhs, rhs)
        return lhs - rhs

    def is_empty(self, ps: PacketSet) -> bool:
        self._check(ps)
        return ps.is_empty()

    def is_subset(self, lhs: PacketSet, rhs: PacketSet) -> bool:
        self._check(lhs, rhs)
        return lhs <= rhs

    def union_all(self, sets: Iterable[PacketSet]) -> PacketSet:
        node = self.bdd.false
        for ps in sets:
            self._check(ps)
            node = node | ps.node
        return PacketSet(self, node)

    def contains(self, ps: PacketSet, header: Header) -> bool:
        self._check(ps)
        return ps.overlaps(self.header_set(header))

    def cardinality(self, ps: PacketSet) -> int:
        self._check(ps)
        if ps.is_empty():
            return 0
        return int(self.bdd.count(ps.node, nvars=len(self._all_vars)))

    # -------- rewrites --------

    def set_field(self, ps: PacketSet, code: int, depth: int, value: int) -> PacketSet:
        """Image of ps under "field := value": project the dimension away, then constrain it."""
        self._check(ps)
        projected = self.bdd.exist(set(self._vars[(code, depth)]), ps.node)
        return PacketSet(self, projected & self.field_equals(code, depth, value).node)

    def _move(self, node, src: tuple[int, int], dst: tuple[int, int]):
        # dst must be unconstrained in node
        src_vars, dst_vars = self._vars[src], self._vars[dst]
        link = self.bdd.true
        for a, b in zip(src_vars, dst_vars):
            link = link & self.bdd.var(a).equiv(self.bdd.var(b))
        return self.bdd.exist(set(src_vars), node & link)

    def _zero(self, node, key: tuple[int, int]):
        width = len(self._vars[key])
        return node & self._value_node(key[0], key[1], 0, (1 << width) - 1)

    def push_depth(self, ps: PacketSet) -> PacketSet:
        """Encapsulate: every depth level moves one deeper, depth 0 becomes all zeros."""
        self._check(ps)
        node = ps.node
        for spec in self.schema.fields:
            levels = spec.depth_levels
            if levels < 2:
                continue
            node = self.bdd.exist(set(self._vars[(spec.code, levels - 1)]), node)
            for d in range(levels - 2, -1, -1):
                node = self._move(node, (spec.code, d), (spec.code, d + 1))
            node = self._zero(node, (spec.code, 0))
        return PacketSet(self, node)

    def pop_depth(self, ps: PacketSet) -> PacketSet:
        """Decapsulate: every depth level moves one up, the deepest becomes all zeros."""
        self._check(ps)
        node = ps.node
        for spec in self.schema.fields:
            levels = spec.depth_levels
            if levels < 2:
                continue
            node = self.bdd.exist(set(self._vars[(spec.code, 0)]), node)
            for d in range(1, levels):
                node = self._move(node, (spec.code, d), (spec.code, d - 1))
            node = self._zero(node, (spec.code, levels - 1))
        return PacketSet(self, node)

    # -------- decomposition & enumeration --------

    def _cofactor(self, node, var: str, value: bool):
        lit = self.bdd.var(var) if value else ~self.bdd.var(var)
        return self.bdd.exist({var}, node & lit)

    def _top_var(self, node) -> str:
        if node.var is not None:
            return node.var
        return min(self.bdd.support(node), key=self._level.__getitem__)

    def _assignments(self, node, prefix: tuple) -> Iterator[tuple]:
        if node == self.bdd.false:
            return
        if node == self.bdd.true:
            yield prefix
            return
        var = self._top_var(node)
        yield from self._assignments(self._cofactor(node, var, False), prefix + ((var, False),))
        yield from self._assignments(self._cofactor(node, var, True), prefix + ((var, True),))

    def to_cubes(self, ps: PacketSet) -> list[list[MaskedValue]]:
        """
        Disjoint cube cover of ps.
        Args:
            ps (PacketSet): Set to decompose.
        Returns:
            list[list[MaskedValue]]: [] for the empty set, [[]] for the universe.
        """
        self._check(ps)
        cubes = []
        for assignment in self._assignments(ps.node, ()):
            per_dim: dict[tuple[int, int], list[int]] = {}
            for var, bit in assignment:
                dim = self._owner[var]
                pos = dim.width - 1 - self._vars[dim.key].index(var)
                acc = per_dim.setdefault(dim.key, [0, 0])
                acc[1] |= 1 << pos
                if bit:
                    acc[0] |= 1 << pos
            cube = []
            for dim in self.schema.dimensions:
                if dim.key in per_dim:
                    value, mask = per_dim[dim.key]
                    spec = self.schema.field(dim.code)
                    cube.append(
                        MaskedValue(
                            dim.code,
                            render_field_value(value, spec),
                            render_field_value(mask, spec),
                            dim.depth,
                        )
                    )
            cubes.append(cube)
        return cubes

    def from_cubes(self, cubes: Iterable[Iterable]) -> PacketSet:
        node = self.bdd.false
        for cube in cubes:
            mvs = [mv if isinstance(mv, MaskedValue) else MaskedValue.from_json(mv) for mv in cube]
            node = node | self.match(mvs).node
        return PacketSet(self, node)

    def to_expression(self, ps: PacketSet) -> list[list[dict]]:
        return [[mv.to_json() for mv in cube] for cube in self.to_cubes(ps)]

    def enumerate(
        self, ps: PacketSet, bound_bits: int = ENUMERATION_BOUND_BITS
    ) -> Iterator[Header]:
        """
        Yield every member of ps exactly once.
        Args:
            ps (PacketSet): Set to enumerate.
            bound_bits (int): Refuse schemas wider than this.
        Returns:
            Iterator[Header]: Concrete headers.
        Raises:
            UniverseTooLarge: If the schema is wider than bound_bits.
        """
        self._check(ps)
        if self.schema.total_bits > bound_bits:
            raise UniverseTooLarge(
                f"schema {self.schema.name} has {self.schema.total_bits} bits > {bound_bits}"
            )
        for assignment in self._assignments(ps.node, ()):
            fixed = dict(assignment)
            free = [v for v in self._all_vars if v not in fixed]
            for bits in itertools.product((False, True), repeat=len(free)):
                full = dict(fixed)
                full.update(zip(free, bits))
                yield self._header_of(full)

    def _header_of(self, assignment: Mapping[str, bool]) -> Header:
        out = []
        for dim in self.schema.dimensions:
            value = 0
            for var in self._vars[dim.key]:
                value = (value << 1) | int(assignment[var])
            out.append(value)
        return tuple(out)


# ---------------------- Module-level operations ----------------------


def atom(space: HeaderSpace, mv: MaskedValue) -> PacketSet:
    return space.atom(mv)


def intersect(lhs: PacketSet, rhs: PacketSet) -> PacketSet:
    return lhs.space.intersect(lhs, rhs)


def union(lhs: PacketSet, rhs: PacketSet) -> PacketSet:
    return lhs.space.union(lhs, rhs)


def complement(ps: PacketSet) -> PacketSet:
    return ps.space.complement(ps)


def is_empty(ps: PacketSet) -> bool:
    return ps.is_empty()


def is_subset(lhs: PacketSet, rhs: PacketSet) -> bool:
    return lhs.space.is_subset(lhs, rhs)
