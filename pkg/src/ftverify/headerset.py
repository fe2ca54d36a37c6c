"""Fixed-length header sets.

A header is an ``ℓ``-bit integer made by concatenating the layout's fields,
the first field occupying the most significant bits.  A :class:`HeaderSet`
is a product of one constraint per field: a ternary mask (``0``, ``1``,
``*``) for mask fields, a closed interval ``[lo, hi]`` for range fields.
Both families are closed under intersection, so every operation here stays
inside the representation.

Mask constraints of all mask fields are packed into a single ``(care,
value)`` pair over the full header bit space; the bits belonging to range
fields are never "cared" in that pair.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Union

__all__ = [
    "FieldKind",
    "Field",
    "HeaderLayout",
    "HeaderSet",
    "HeaderSetError",
    "LayoutMismatch",
    "parse_set",
]

Constraint = Union[str, int, tuple, list]


class HeaderSetError(ValueError):
    """Malformed layout or field constraint."""


class LayoutMismatch(HeaderSetError):
    """Two header sets built over different layouts were combined."""


class FieldKind(str, Enum):
    MASK = "mask"
    RANGE = "range"


@dataclass(frozen=True)
class Field:
    name: str
    width: int
    kind: FieldKind = FieldKind.MASK

    def __post_init__(self):
        if not isinstance(self.width, int) or self.width < 1:
            raise HeaderSetError(f"field {self.name!r}: width must be a positive integer")
        object.__setattr__(self, "kind", FieldKind(self.kind))


class HeaderLayout:
    """Ordered fields making up a header; immutable and hashable."""

    __slots__ = ("fields", "width", "_offsets", "_index", "_range_fields", "_mask_bits", "_hash")

    def __init__(self, fields: Iterable[Field | tuple]):
        fields = tuple(f if isinstance(f, Field) else Field(*f) for f in fields)
        if not fields:
            raise HeaderSetError("a layout needs at least one field")
        names = [f.name for f in fields]
        if len(set(names)) != len(names):
            raise HeaderSetError(f"duplicate field names in {names}")
        self.fields = fields
        self.width = sum(f.width for f in fields)
        offsets = []
        shift = self.width
        for f in fields:
            shift -= f.width
            offsets.append(shift)
        self._offsets = tuple(offsets)
        self._index = {f.name: i for i, f in enumerate(fields)}
        # (field index, offset, width) for range fields, in layout order
        self._range_fields = tuple(
            (i, offsets[i], f.width) for i, f in enumerate(fields) if f.kind is FieldKind.RANGE
        )
        mask_bits = 0
        for i, f in enumerate(fields):
            if f.kind is FieldKind.MASK:
                mask_bits |= ((1 << f.width) - 1) << offsets[i]
        self._mask_bits = mask_bits
        self._hash = hash(fields)

    @classmethod
    def single(cls, width: int, kind: FieldKind | str = FieldKind.MASK, name: str = "h") -> "HeaderLayout":
        return cls([Field(name, width, FieldKind(kind))])

    def __eq__(self, other):
        return self is other or (isinstance(other, HeaderLayout) and self.fields == other.fields)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{f.name}:{f.kind.value}{f.width}" for f in self.fields)
        return f"HeaderLayout({inner})"

    @property
    def size(self) -> int:
        """Number of headers, ``2**ℓ``."""
        return 1 << self.width

    def field(self, name: str) -> Field:
        try:
            return self.fields[self._index[name]]
        except KeyError:
            raise HeaderSetError(f"unknown field {name!r}") from None

    def offset(self, name: str) -> int:
        return self._offsets[self._index[name]]

    def universe(self) -> "HeaderSet":
        ranges = tuple((0, (1 << w) - 1) for _, _, w in self._range_fields)
        return HeaderSet._make(self, 0, 0, ranges)

    def empty(self) -> "HeaderSet":
        return HeaderSet._make(self, 0, 0, None)

    def header(self, value: int) -> "HeaderSet":
        """The singleton set holding the concrete header ``value``."""
        if not 0 <= value < self.size:
            raise HeaderSetError(f"header {value} out of range for {self.width} bits")
        ranges = tuple(((value >> off) & ((1 << w) - 1),) * 2 for _, off, w in self._range_fields)
        return HeaderSet._make(self, self._mask_bits, value & self._mask_bits, ranges)

    def encode(self, values: Mapping[str, int]) -> int:
        """Pack per-field integers into a header; missing fields are zero."""
        h = 0
        for name, v in values.items():
            f = self.field(name)
            if not 0 <= v < (1 << f.width):
                raise HeaderSetError(f"value {v} out of range for field {name!r}")
            h |= v << self.offset(name)
        return h

    def decode(self, header: int) -> dict[str, int]:
        return {f.name: (header >> off) & ((1 << f.width) - 1) for f, off in zip(self.fields, self._offsets)}

    def describe(self) -> list[dict]:
        return [{"name": f.name, "width": f.width, "kind": f.kind.value} for f in self.fields]

    @classmethod
    def from_description(cls, items: Iterable[Mapping]) -> "HeaderLayout":
        return cls([Field(str(d["name"]), int(d["width"]), FieldKind(d.get("kind", "mask"))) for d in items])


class HeaderSet:
    """An immutable set of headers; see the module docstring for the encoding.

    Equality and hashing are semantic: two values compare equal iff they
    denote the same set of headers.  All empty sets of a layout are equal.
    """

    __slots__ = ("layout", "care", "value", "ranges", "_hash")

    layout: HeaderLayout
    care: int
    value: int
    ranges: tuple | None

    @classmethod
    def _make(cls, layout, care, value, ranges):
        self = object.__new__(cls)
        self.layout = layout
        self.care = care
        self.value = value
        self.ranges = ranges
        self._hash = hash((care, value, ranges)) if ranges is not None else hash(None)
        return self

    def is_empty(self) -> bool:
        return self.ranges is None

    def __bool__(self):
        return self.ranges is not None

    @property
    def key(self):
        """Canonical hashable form; ``None`` for the empty set."""
        if self.ranges is None:
            return None
        return (self.care, self.value, self.ranges)

    def _check(self, other: "HeaderSet"):
        if self.layout is not other.layout and self.layout != other.layout:
            raise LayoutMismatch(f"{self.layout!r} vs {other.layout!r}")

    def intersect(self, other: "HeaderSet") -> "HeaderSet":
        self._check(other)
        if self.ranges is None or other.ranges is None:
            return self.layout.empty()
        if (self.value ^ other.value) & self.care & other.care:
            return self.layout.empty()
        ranges = []
        for (lo1, hi1), (lo2, hi2) in zip(self.ranges, other.ranges):
            lo = lo1 if lo1 > lo2 else lo2
            hi = hi1 if hi1 < hi2 else hi2
            if lo > hi:
                return self.layout.empty()
            ranges.append((lo, hi))
        return HeaderSet._make(self.layout, self.care | other.care, self.value | other.value, tuple(ranges))

    __and__ = intersect

    def is_subset(self, other: "HeaderSet") -> bool:
        self._check(other)
        if self.ranges is None:
            return True
        if other.ranges is None:
            return False
        if other.care & ~self.care or (self.value ^ other.value) & other.care:
            return False
        for (lo1, hi1), (lo2, hi2) in zip(self.ranges, other.ranges):
            if lo1 < lo2 or hi1 > hi2:
                return False
        return True

    __le__ = is_subset

    def __lt__(self, other: "HeaderSet") -> bool:
        return self.is_subset(other) and self != other

    def __ge__(self, other):
        return other.is_subset(self)

    def __gt__(self, other):
        return other < self

    def cardinality(self) -> int:
        """Exact number of headers in the set (a Python int, so no overflow)."""
        if self.ranges is None:
            return 0
        free = (self.layout._mask_bits & ~self.care).bit_count()
        n = 1 << free
        for lo, hi in self.ranges:
            n *= hi - lo + 1
        return n

    def contains(self, header: int) -> bool:
        """Direct membership of a concrete header, without building a singleton."""
        if self.ranges is None:
            return False
        if (header ^ self.value) & self.care:
            return False
        for (_, off, w), (lo, hi) in zip(self.layout._range_fields, self.ranges):
            v = (header >> off) & ((1 << w) - 1)
            if v < lo or v > hi:
                return False
        return True

    def equals(self, other: "HeaderSet") -> bool:
        self._check(other)
        return self.key == other.key

    def __eq__(self, other):
        if not isinstance(other, HeaderSet):
            return NotImplemented
        return self.key == other.key and self.layout == other.layout

    def __hash__(self):
        return self._hash

    def constraints(self) -> dict[str, object]:
        """Per-field constraint map: ternary strings and ``[lo, hi]`` lists.

        The empty set has no constraint map and raises.
        """
        if self.ranges is None:
            raise HeaderSetError("the empty set has no constraint form")
        out: dict[str, object] = {}
        rng = iter(self.ranges)
        for f, off in zip(self.layout.fields, self.layout._offsets):
            if f.kind is FieldKind.MASK:
                out[f.name] = _mask_text(self.care >> off, self.value >> off, f.width)
            else:
                out[f.name] = list(next(rng))
        return out

    def sort_key(self):
        """Deterministic ordering key derived from the canonical form."""
        if self.ranges is None:
            return ((),)
        parts = []
        for name, c in self.constraints().items():
            parts.append(c if isinstance(c, str) else f"{c[0]:040d}-{c[1]:040d}")
        return tuple(parts)

    def __str__(self):
        if self.ranges is None:
            return "∅"
        items = []
        for name, c in self.constraints().items():
            items.append(c if isinstance(c, str) else f"[{c[0]},{c[1]}]")
        if len(self.layout.fields) == 1:
            return items[0]
        return " ".join(f"{f.name}={t}" for f, t in zip(self.layout.fields, items))

    def __repr__(self):
        return f"HeaderSet({self})"


def _mask_text(care: int, value: int, width: int) -> str:
    chars = []
    for i in range(width - 1, -1, -1):
        bit = 1 << i
        chars.append(("1" if value & bit else "0") if care & bit else "*")
    return "".join(chars)


_MASK_RE = re.compile(r"^[01*]+$")
_RANGE_RE = re.compile(r"^\s*\[?\s*(\d+)\s*(?:[-,]\s*(\d+)\s*)?\]?\s*$")


def _parse_range(name: str, width: int, c: Constraint) -> tuple[int, int]:
    if isinstance(c, bool):
        raise HeaderSetError(f"field {name!r}: bad range {c!r}")
    if isinstance(c, int):
        lo = hi = c
    elif isinstance(c, (list, tuple)):
        if len(c) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in c):
            raise HeaderSetError(f"field {name!r}: range must be [lo, hi], got {c!r}")
        lo, hi = c
    elif isinstance(c, str):
        m = _RANGE_RE.match(c)
        if not m:
            raise HeaderSetError(f"field {name!r}: cannot parse range {c!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) is not None else lo
    else:
        raise HeaderSetError(f"field {name!r}: bad range {c!r}")
    if lo > hi:
        raise HeaderSetError(f"field {name!r}: empty range [{lo},{hi}]")
    if lo < 0 or hi >= 1 << width:
        raise HeaderSetError(f"field {name!r}: range [{lo},{hi}] outside 0..{(1 << width) - 1}")
    return lo, hi


def parse_set(layout: HeaderLayout, constraints: Mapping[str, Constraint] | str | None = None) -> HeaderSet:
    """Build a header set from a field-constraint map.

    Missing fields default to the full wildcard.  For a single-field layout
    the constraint may be given directly instead of as a map.
    >>> parse_set(HeaderLayout.single(3), "0*1").cardinality()
    2
    """
    if constraints is None:
        constraints = {}
    elif not isinstance(constraints, Mapping):
        if len(layout.fields) != 1:
            raise HeaderSetError("a bare constraint needs a single-field layout")
        constraints = {layout.fields[0].name: constraints}
    care = value = 0
    ranges = {}
    for name, c in constraints.items():
        f = layout.field(name)
        off = layout.offset(name)
        if f.kind is FieldKind.MASK:
            if not isinstance(c, str) or not _MASK_RE.match(c):
                raise HeaderSetError(f"field {name!r}: mask must be a string over 0,1,*; got {c!r}")
            if len(c) != f.width:
                raise HeaderSetError(f"field {name!r}: mask {c!r} has width {len(c)}, expected {f.width}")
            for i, ch in enumerate(c):
                if ch != "*":
                    bit = 1 << (off + f.width - 1 - i)
                    care |= bit
                    if ch == "1":
                        value |= bit
        else:
            ranges[name] = _parse_range(name, f.width, c)
    rng = tuple(
        ranges.get(layout.fields[i].name, (0, (1 << w) - 1)) for i, _, w in layout._range_fields
    )
    return HeaderSet._make(layout, care, value, rng)
