"""Minimal weak completion of a rule collection.

The completion is a collection of intersections of rules that is weakly
complete and covers every rule.  Its minimal version is unique and holds
exactly one member per header class (atom): the atom of member ``c`` is
``a(c) = c`` minus the union of the members strictly inside ``c``.  Nothing
here ever computes a set difference; atoms are known only through their
cardinalities, obtained by dynamic programming over the inclusion order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .headerset import HeaderLayout, HeaderSet, HeaderSetError, LayoutMismatch

__all__ = [
    "RuleCollection",
    "WeakCompletion",
    "AtomEntry",
    "AtomReport",
    "EmptyRule",
    "atom_cardinalities",
    "check_weak_completeness",
    "build",
]


class EmptyRule(HeaderSetError):
    """The empty set cannot be a rule."""


class RuleCollection:
    """Distinct non-empty rule sets over one layout, kept in insertion order.

    A rule is identified by its set value, so adding a semantically equal
    set twice is a no-op.
    """

    def __init__(self, layout: HeaderLayout, rules: Iterable[HeaderSet] = ()):
        self.layout = layout
        self._rules: dict[HeaderSet, None] = {}
        for r in rules:
            self.add(r)

    def add(self, rule: HeaderSet) -> bool:
        if rule.layout != self.layout:
            raise LayoutMismatch(f"rule {rule} does not use {self.layout!r}")
        if rule.is_empty():
            raise EmptyRule("empty rule")
        if rule in self._rules:
            return False
        self._rules[rule] = None
        return True

    def discard(self, rule: HeaderSet) -> bool:
        return self._rules.pop(rule, False) is None

    def __contains__(self, rule):
        return rule in self._rules

    def __iter__(self) -> Iterator[HeaderSet]:
        return iter(self._rules)

    def __len__(self):
        return len(self._rules)

    def __repr__(self):
        return f"RuleCollection({[str(r) for r in self]})"


def atom_cardinalities(members: Iterable[HeaderSet]) -> dict[HeaderSet, int]:
    """``|a(c)|`` for every member of a weakly complete collection.

    Members are processed by increasing cardinality, which is a topological
    order of strict inclusion, and ``|a(c)| = |c| - sum(|a(y)| for y ⊊ c)``.
    The result is meaningless if the collection is not weakly complete.
    """
    order = sorted({m for m in members if m}, key=HeaderSet.cardinality)
    cards: dict[HeaderSet, int] = {}
    done: list[tuple[HeaderSet, int]] = []
    for c in order:
        total = c.cardinality()
        for y, ay in done:
            if ay and y.is_subset(c):
                total -= ay
        cards[c] = total
        done.append((c, total))
    return cards


def check_weak_completeness(members: Iterable[HeaderSet], layout: HeaderLayout | None = None):
    """Decide weak completeness with intersections, inclusions and cardinals.

    Returns ``(True, None)`` or ``(False, (c, c2))`` where ``c ∩ c2`` is not
    the union of the members it contains.  Failure of the union to reach
    ``H`` is reported as the pair ``(H, H)``.

    Members are added by increasing cardinality.  While the prefix seen so
    far is weakly complete its ``a(·)`` sets partition its union, so for any
    set ``s`` the union of members inside ``s`` has cardinality
    ``sum(|a(y)| for y ⊆ s)``; equality with ``|s|`` is equivalent to ``s``
    being covered.
    """
    ms = list({m for m in members if m})
    if layout is None:
        if not ms:
            raise HeaderSetError("cannot infer a layout from an empty collection")
        layout = ms[0].layout
    ms.sort(key=HeaderSet.cardinality)
    seen: list[tuple[HeaderSet, int]] = []
    for c in ms:
        for p, _ in seen:
            s = c & p
            if not s or s == p:
                continue
            covered = sum(ay for y, ay in seen if ay and y.is_subset(s))
            if covered != s.cardinality():
                return False, (p, c)
        ac = c.cardinality() - sum(ay for y, ay in seen if ay and y.is_subset(c))
        seen.append((c, ac))
    if sum(ay for _, ay in seen) != layout.size:
        top = layout.universe()
        return False, (top, top)
    return True, None


@dataclass(frozen=True)
class AtomEntry:
    representative: HeaderSet
    cardinality: int
    matched_rules: frozenset = field(default_factory=frozenset)


@dataclass
class AtomReport:
    layout: HeaderLayout
    entries: list[AtomEntry]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def total(self) -> int:
        return sum(e.cardinality for e in self.entries)

    def to_document(self, rule_ids=None) -> dict:
        """Plain-data form; ``rule_ids`` maps a rule set to its table positions."""

        def rule(r):
            doc = {"match": r.constraints()}
            if rule_ids is not None:
                doc["at"] = list(rule_ids.get(r, ()))
            return doc

        return {
            "version": 1,
            "kind": "atoms",
            "atom_count": len(self.entries),
            "header_space": str(self.layout.size),
            "atoms": [
                {
                    "representative": e.representative.constraints(),
                    "cardinality": str(e.cardinality),
                    "matched_rules": [rule(r) for r in sorted(e.matched_rules, key=HeaderSet.sort_key)],
                }
                for e in self.entries
            ],
        }


class WeakCompletion:
    """The minimal weak completion of a rule collection, kept up to date.

    Bookkeeping per member ``c``: ``atom_card(c) = |a(c)|`` and
    ``rules_containing(c)`` (the rules ``r ⊇ c``); per rule ``r``:
    ``combos(r)`` (the members inside ``r``).  Use :meth:`insert` and
    :meth:`delete` to update in place, :meth:`copy` to branch.
    """

    def __init__(self, layout: HeaderLayout):
        self.layout = layout
        self.rules = RuleCollection(layout)
        top = layout.universe()
        self._card: dict[HeaderSet, int] = {top: layout.size}
        self._containing: dict[HeaderSet, set[HeaderSet]] = {top: set()}
        self._combos: dict[HeaderSet, set[HeaderSet]] = {}

    @classmethod
    def build(cls, rules: Iterable[HeaderSet], layout: HeaderLayout | None = None) -> "WeakCompletion":
        rules = list(rules) if not isinstance(rules, RuleCollection) else rules
        if layout is None:
            if isinstance(rules, RuleCollection):
                layout = rules.layout
            elif rules:
                layout = rules[0].layout
            else:
                raise HeaderSetError("a layout is required to build from no rules")
        wc = cls(layout)
        for r in rules:
            wc.insert(r)
        return wc

    def copy(self) -> "WeakCompletion":
        other = WeakCompletion.__new__(WeakCompletion)
        other.layout = self.layout
        other.rules = RuleCollection(self.layout, self.rules)
        other._card = dict(self._card)
        other._containing = {c: set(rc) for c, rc in self._containing.items()}
        other._combos = {r: set(cs) for r, cs in self._combos.items()}
        return other

    # -- read access -------------------------------------------------

    @property
    def members(self) -> list[HeaderSet]:
        return list(self._card)

    def member_set(self) -> frozenset:
        return frozenset(self._card)

    def __len__(self):
        return len(self._card)

    def __iter__(self):
        return iter(self._card)

    def __contains__(self, s):
        return s in self._card

    def atom_card(self, c: HeaderSet) -> int:
        return self._card[c]

    def rules_containing(self, c: HeaderSet) -> frozenset:
        return frozenset(self._containing[c])

    def combos(self, rule: HeaderSet) -> frozenset:
        return frozenset(self._combos.get(rule, ()))

    def strict_subsets(self, c: HeaderSet) -> list[HeaderSet]:
        """Members strictly inside ``c`` (inclusion order, recomputed on demand)."""
        return [y for y in self._card if y != c and y.is_subset(c)]

    def representative_of(self, header: int) -> HeaderSet:
        """The member whose atom holds ``header``: the smallest member containing it."""
        best = None
        for c in self._card:
            if c.contains(header) and (best is None or c.cardinality() < best.cardinality()):
                best = c
        return best

    def representatives(self) -> AtomReport:
        entries = [
            AtomEntry(c, self._card[c], frozenset(self._containing[c]))
            for c in sorted(self._card, key=HeaderSet.sort_key)
        ]
        return AtomReport(self.layout, entries)

    # -- updates -----------------------------------------------------

    def insert(self, rule: HeaderSet) -> None:
        """Add ``rule``; the state becomes the minimal weak completion of R ∪ {rule}."""
        if rule.layout != self.layout:
            raise LayoutMismatch(f"rule {rule} does not use {self.layout!r}")
        if rule.is_empty():
            raise EmptyRule("empty rule")
        if rule in self.rules:
            return
        self.rules.add(rule)

        inside: list[HeaderSet] = []  # old members ⊆ rule
        fresh: dict[HeaderSet, set[HeaderSet]] = {}  # new member -> R(new)
        hit: list[tuple[HeaderSet, HeaderSet]] = []  # (old member, its intersection with rule)
        containing = self._containing
        for c, rc in containing.items():
            x = c & rule
            if not x:
                continue
            hit.append((c, x))
            if x == c:
                rc.add(rule)
                inside.append(c)
            elif x not in containing:
                s = fresh.get(x)
                if s is None:
                    fresh[x] = s = set(rc)
                    s.add(rule)
                else:
                    s |= rc
        self._combos[rule] = set(inside)
        if not fresh:
            return

        # Old members inside the rule never gain a new strict sub-member, so
        # their atoms are final and the affected members are exactly those
        # whose intersection with the rule is new.
        card = self._card
        delta: dict[HeaderSet, int] = {}
        for n in sorted(fresh, key=HeaderSet.cardinality):
            total = n.cardinality()
            for y in inside:
                if y.is_subset(n):
                    total -= card[y]
            for y, dy in delta.items():
                if y.is_subset(n):
                    total -= dy
            delta[n] = total

        # Δ(c) = -Σ_{y ⊊ c} Δ(y) over new and affected members
        affected = sorted((c for c, x in hit if x in fresh), key=HeaderSet.cardinality)
        changed = list(delta.items())
        for c in affected:
            d = -sum(dy for y, dy in changed if dy and y.is_subset(c))
            changed.append((c, d))
            card[c] += d

        for n, rn in fresh.items():
            containing[n] = rn
            card[n] = delta[n]
            for r in rn:
                self._combos.setdefault(r, set()).add(n)
        for c in list(fresh) + affected:
            if card[c] == 0:
                self._drop(c)
            elif card[c] < 0:
                raise AssertionError(f"negative atom cardinality for {c}")

    def _drop(self, c: HeaderSet) -> None:
        del self._card[c]
        for r in self._containing.pop(c):
            self._combos[r].discard(c)

    def delete(self, rule: HeaderSet) -> None:
        """Remove ``rule``; the state becomes the minimal weak completion of R \\ {rule}.

        Members whose ``rules_containing`` loses ``rule`` are replaced by the
        intersection of their remaining rules (``H`` if none); members that
        collapse onto the same set are merged.
        """
        if rule not in self.rules:
            raise KeyError(f"rule {rule} is not in the collection")
        self.rules.discard(rule)
        touched = self._combos.pop(rule, set())
        top = self.layout.universe()
        merged: dict[HeaderSet, set[HeaderSet]] = {}
        for c, rc in self._containing.items():
            if c in touched:
                rc = rc - {rule}
                c2 = top
                for r in rc:
                    c2 = c2 & r
            else:
                c2 = c
            if c2 in merged:
                merged[c2] |= rc
            else:
                merged[c2] = set(rc)
        cards = atom_cardinalities(merged)
        self._containing = {}
        self._card = {}
        self._combos = {r: set() for r in self.rules}
        for c, rc in merged.items():
            if cards[c] == 0:
                continue
            if cards[c] < 0:
                raise AssertionError(f"negative atom cardinality for {c}")
            self._containing[c] = rc
            self._card[c] = cards[c]
            for r in rc:
                self._combos[r].add(c)

    def __repr__(self):
        return f"WeakCompletion({len(self.rules)} rules, {len(self)} atoms)"


def build(rules: Iterable[HeaderSet], layout: HeaderLayout | None = None) -> WeakCompletion:
    """Minimal weak completion of ``rules``; see :class:`WeakCompletion`."""
    return WeakCompletion.build(rules, layout)
