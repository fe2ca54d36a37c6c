"""Brute-force ground truth by enumerating every header.

Membership is evaluated from each set's textual constraint form over a
numpy array of all ``2**ℓ`` headers, so nothing here goes through the
intersection or inclusion code under test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable

import numpy as np

from .algebra import WeakCompletion
from .headerset import FieldKind, HeaderLayout, HeaderSet
from .network import Fate, NetworkInstance, same_fate, trace

__all__ = [
    "MAX_WIDTH",
    "OracleCapExceeded",
    "HeaderClass",
    "ClassPartition",
    "Validation",
    "OracleVerdicts",
    "all_headers",
    "membership",
    "enumerate_classes",
    "validate_completion",
    "exhaustive_verify",
]

MAX_WIDTH = 20


class OracleCapExceeded(ValueError):
    """Header length above what exhaustive enumeration accepts."""


def _check_cap(layout: HeaderLayout):
    if layout.width > MAX_WIDTH:
        raise OracleCapExceeded(f"header length {layout.width} exceeds the oracle cap of {MAX_WIDTH} bits")


def all_headers(layout: HeaderLayout) -> np.ndarray:
    _check_cap(layout)
    return np.arange(layout.size, dtype=np.int64)


def membership(s: HeaderSet, headers: np.ndarray) -> np.ndarray:
    """Boolean vector: which of ``headers`` lie in ``s``."""
    if s.is_empty():
        return np.zeros(headers.shape, dtype=bool)
    layout = s.layout
    out = np.ones(headers.shape, dtype=bool)
    shift = layout.width
    cons = s.constraints()
    for f in layout.fields:
        shift -= f.width
        vals = (headers >> shift) & ((1 << f.width) - 1)
        c = cons[f.name]
        if f.kind is FieldKind.MASK:
            for i, ch in enumerate(c):
                if ch != "*":
                    out &= ((vals >> (f.width - 1 - i)) & 1) == int(ch)
        else:
            lo, hi = c
            out &= (vals >= lo) & (vals <= hi)
    return out


@dataclass
class HeaderClass:
    signature: frozenset
    headers: np.ndarray

    @property
    def size(self) -> int:
        return int(self.headers.size)


@dataclass
class ClassPartition:
    layout: HeaderLayout
    rules: list
    classes: list[HeaderClass]
    class_of: np.ndarray  # header -> class index

    def __len__(self):
        return len(self.classes)

    def by_signature(self) -> dict[frozenset, HeaderClass]:
        return {c.signature: c for c in self.classes}


def enumerate_classes(rules: Iterable[HeaderSet], layout: HeaderLayout) -> ClassPartition:
    """Group all headers by the exact set of rules they match."""
    headers = all_headers(layout)
    rules = list(dict.fromkeys(rules))
    if rules:
        matrix = np.stack([membership(r, headers) for r in rules], axis=1)
        keys, inverse = np.unique(matrix, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
    else:
        keys = np.zeros((1, 0), dtype=bool)
        inverse = np.zeros(headers.shape, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
    classes = []
    for k, row in enumerate(keys):
        sig = frozenset(r for r, bit in zip(rules, row) if bit)
        classes.append(HeaderClass(sig, headers[order[bounds[k]:bounds[k + 1]]]))
    return ClassPartition(layout, rules, classes, inverse)


@dataclass
class Validation:
    ok: bool
    message: str = "valid"
    witness: object = None

    def __bool__(self):
        return self.ok


def validate_completion(rules: Iterable[HeaderSet], completion: WeakCompletion) -> Validation:
    """Compare a completion against the enumerated header classes.

    Checks that members and classes are in bijection, that each member's
    atom (the member minus its strict sub-members) is exactly one class,
    and that its recorded cardinality and containing rules match.
    """
    layout = completion.layout
    part = enumerate_classes(rules, layout)
    headers = all_headers(layout)
    members = list(completion.members)
    if len(members) != len(part):
        uncovered = _uncovered(members, part, headers)
        return Validation(
            False,
            f"{len(members)} members for {len(part)} header classes",
            uncovered,
        )
    if not members:
        return Validation(False, "no members", None)
    m = np.stack([membership(c, headers) for c in members]).astype(np.float32)
    sizes = m.sum(axis=1)
    inter = m @ m.T
    sub = (inter == sizes[:, None]) & ~np.eye(len(members), dtype=bool)  # sub[x, c]: x ⊊ c
    under = sub.T.astype(np.float32) @ m  # under[c, h]: strict sub-members of c holding h
    atoms = (m > 0) & (under == 0)
    used: set[int] = set()
    for i, c in enumerate(members):
        hs = np.flatnonzero(atoms[i])
        if hs.size == 0:
            return Validation(False, f"member {c} has an empty atom", c)
        ks = np.unique(part.class_of[hs])
        if ks.size != 1:
            return Validation(False, f"atom of {c} straddles {ks.size} header classes", c)
        k = int(ks[0])
        cls = part.classes[k]
        if cls.size != hs.size:
            return Validation(False, f"atom of {c} is a strict part of a header class", c)
        if k in used:
            return Validation(False, f"two members represent the same header class", c)
        used.add(k)
        if completion.atom_card(c) != cls.size:
            return Validation(
                False, f"atom cardinality of {c}: recorded {completion.atom_card(c)}, actual {cls.size}", c
            )
        if completion.rules_containing(c) != cls.signature:
            return Validation(False, f"matched rules of {c} differ from its class signature", c)
    return Validation(True)


def _uncovered(members, part, headers):
    """First header class whose signature no member reproduces."""
    if part.rules:
        rules = np.stack([membership(r, headers) for r in part.rules])
    seen = set()
    for c in members:
        mc = membership(c, headers)
        if part.rules:
            inside = (rules | ~mc).all(axis=1)
            seen.add(frozenset(r for r, ok in zip(part.rules, inside) if ok))
        else:
            seen.add(frozenset())
    for cls in part.classes:
        if cls.signature not in seen:
            return cls.signature
    return None


@dataclass
class OracleVerdicts:
    no_loop: bool
    no_blackhole: bool
    reachability: dict = field(default_factory=dict)
    consistency: dict = field(default_factory=dict)
    fates: dict = field(default_factory=dict)


def exhaustive_verify(net: NetworkInstance, pairs=None, strict: bool = False) -> OracleVerdicts:
    """All four verdicts from a per-header trace at every node.

    ``pairs`` restricts the (u, v) pairs for reachability and consistency;
    by default every ordered pair is evaluated.
    """
    _check_cap(net.layout)
    nodes = net.nodes
    if pairs is None:
        pairs = list(product(nodes, nodes))
    fates: dict[tuple, tuple[Fate, list]] = {}
    no_loop = True
    no_blackhole = True
    for h in range(net.layout.size):
        dropping = live = False
        for u in nodes:
            fate, path = trace(net, h, u)
            fates[h, u] = (fate, path)
            if fate.kind == "loop":
                no_loop = False
            if fate.kind == "dropped" and len(path) == 1:
                dropping = True
            else:
                live = True
        if dropping and live:
            no_blackhole = False
    reach = {}
    consistent = {}
    for u, v in pairs:
        reach[u, v] = any(v in fates[h, u][1] for h in range(net.layout.size))
        consistent[u, v] = all(
            same_fate(fates[h, u][0], fates[h, v][0], strict) for h in range(net.layout.size)
        )
    return OracleVerdicts(no_loop, no_blackhole, reach, consistent, fates)
