"""Network instances and centralized verification over header classes.

Every header class of the network's rule collection is handled through its
representative set ``s`` from the minimal weak completion: the action of a
node on the whole class is the action of the first rule of its table that
contains ``s`` (drop if none).  This yields one functional graph per class
(out-degree at most one), on which loops, black-holes, reachability and
consistency are read off directly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable, Mapping, Sequence

from .algebra import RuleCollection, WeakCompletion
from .headerset import HeaderLayout, HeaderSet, LayoutMismatch

__all__ = [
    "ActionKind",
    "Action",
    "DROP",
    "DELIVER",
    "ForwardingRule",
    "NetworkInstance",
    "NetworkError",
    "ClassGraph",
    "Fate",
    "Witness",
    "VerificationReport",
    "class_action",
    "build_class_graphs",
    "check_no_loop",
    "check_no_blackhole",
    "check_reachability",
    "check_consistency",
    "trace",
    "same_fate",
    "default_threads",
    "TrackedNetwork",
]

Node = Hashable
THREADS_ENV = "FTVERIFY_THREADS"


class NetworkError(ValueError):
    """Invalid network description."""


class ActionKind(str, Enum):
    FORWARD = "forward"
    DROP = "drop"
    DELIVER = "deliver"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    to: Node | None = None

    @classmethod
    def forward(cls, to: Node) -> "Action":
        return cls(ActionKind.FORWARD, to)

    @property
    def is_drop(self) -> bool:
        return self.kind is ActionKind.DROP

    def __str__(self):
        return f"forward({self.to})" if self.kind is ActionKind.FORWARD else self.kind.value


DROP = Action(ActionKind.DROP)
DELIVER = Action(ActionKind.DELIVER)


@dataclass(frozen=True)
class ForwardingRule:
    match: HeaderSet
    action: Action

    def __str__(self):
        return f"{self.match} -> {self.action}"


class NetworkInstance:
    """Graph plus one ordered forwarding table per node.

    ``links`` are undirected; a forward action must target a neighbour.
    """

    def __init__(
        self,
        layout: HeaderLayout,
        nodes: Iterable[Node],
        links: Iterable[Sequence[Node]],
        tables: Mapping[Node, Sequence[ForwardingRule]] | None = None,
    ):
        self.layout = layout
        self.nodes: tuple = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkError("duplicate node ids")
        known = set(self.nodes)
        adj: dict[Node, set] = {u: set() for u in self.nodes}
        for link in links:
            u, v = link
            if u not in known or v not in known:
                raise NetworkError(f"link {u}-{v} references an unknown node")
            if u == v:
                raise NetworkError(f"self-link on {u}")
            adj[u].add(v)
            adj[v].add(u)
        self._adj = {u: frozenset(vs) for u, vs in adj.items()}
        tables = dict(tables or {})
        for u in tables:
            if u not in known:
                raise NetworkError(f"table for unknown node {u}")
        self.tables: dict[Node, tuple[ForwardingRule, ...]] = {}
        for u in self.nodes:
            rules = tuple(tables.get(u, ()))
            for i, rule in enumerate(rules):
                if rule.match.layout != layout:
                    raise LayoutMismatch(f"rule {u}[{i}] uses another layout")
                if rule.match.is_empty():
                    raise NetworkError(f"rule {u}[{i}] has an empty match")
                if rule.action.kind is ActionKind.FORWARD and rule.action.to not in self._adj[u]:
                    raise NetworkError(f"rule {u}[{i}] forwards to non-neighbour {rule.action.to}")
            self.tables[u] = rules

    @property
    def links(self) -> list[tuple]:
        order = {u: i for i, u in enumerate(self.nodes)}
        seen = set()
        out = []
        for u in self.nodes:
            for v in sorted(self._adj[u], key=order.__getitem__):
                if (v, u) not in seen:
                    seen.add((u, v))
                    out.append((u, v))
        return out

    def neighbors(self, u: Node) -> frozenset:
        return self._adj[u]

    @property
    def rule_count(self) -> int:
        return sum(len(t) for t in self.tables.values())

    def rule_collection(self) -> RuleCollection:
        return RuleCollection(self.layout, (r.match for u in self.nodes for r in self.tables[u]))

    def rule_ids(self) -> dict[HeaderSet, list[str]]:
        """Rule set value -> table positions ``node[index]`` holding it."""
        ids: dict[HeaderSet, list[str]] = {}
        for u in self.nodes:
            for i, r in enumerate(self.tables[u]):
                ids.setdefault(r.match, []).append(f"{u}[{i}]")
        return ids

    def components(self) -> list[list[Node]]:
        seen = set()
        comps = []
        for s in self.nodes:
            if s in seen:
                continue
            comp, stack = [], [s]
            seen.add(s)
            while stack:
                u = stack.pop()
                comp.append(u)
                for v in self._adj[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            order = {u: i for i, u in enumerate(self.nodes)}
            comps.append(sorted(comp, key=order.__getitem__))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def with_tables(self, tables: Mapping[Node, Sequence[ForwardingRule]]) -> "NetworkInstance":
        merged = dict(self.tables)
        merged.update(tables)
        return NetworkInstance(self.layout, self.nodes, self.links, merged)

    def __repr__(self):
        return f"NetworkInstance({len(self.nodes)} nodes, {len(self.links)} links, {self.rule_count} rules)"


def class_action(table: Sequence[ForwardingRule], s: HeaderSet) -> Action:
    """Action of the first rule containing ``s``; drop when none does."""
    for rule in table:
        if s.is_subset(rule.match):
            return rule.action
    return DROP


def first_rule_index(table: Sequence[ForwardingRule], s: HeaderSet) -> int | None:
    for i, rule in enumerate(table):
        if s.is_subset(rule.match):
            return i
    return None


@dataclass(frozen=True)
class Fate:
    """Outcome of injecting a packet: ``delivered``/``dropped`` at a node, or ``loop``."""

    kind: str
    at: Node | None = None

    def __str__(self):
        return "loop" if self.kind == "loop" else f"{self.kind}-at({self.at})"

    def to_document(self):
        return {"kind": self.kind, "at": self.at}


def same_fate(a: Fate, b: Fate, strict: bool = False) -> bool:
    """Fate equality; drop locations only matter when ``strict``."""
    if a.kind != b.kind:
        return False
    if a.kind == "delivered" or (strict and a.kind == "dropped"):
        return a.at == b.at
    return True


def _follow(next_action, start: Node) -> tuple[Fate, list]:
    path = [start]
    seen = {start}
    u = start
    while True:
        act = next_action(u)
        if act.kind is ActionKind.DELIVER:
            return Fate("delivered", u), path
        if act.kind is ActionKind.DROP:
            return Fate("dropped", u), path
        u = act.to
        path.append(u)
        if u in seen:
            return Fate("loop"), path
        seen.add(u)


@dataclass
class ClassGraph:
    representative: HeaderSet
    labels: dict
    atom_cardinality: int = 0

    @property
    def arcs(self) -> list[tuple]:
        return [(u, a.to) for u, a in self.labels.items() if a.kind is ActionKind.FORWARD]

    def fate(self, start: Node) -> tuple[Fate, list]:
        return _follow(self.labels.__getitem__, start)

    def find_cycle(self) -> list | None:
        """A directed cycle as a node list (first node not repeated), or None."""
        state: dict[Node, int] = {}  # 1 on current walk, 2 finished
        for s in self.labels:
            if s in state:
                continue
            walk = []
            u = s
            while u is not None and u not in state:
                state[u] = 1
                walk.append(u)
                a = self.labels[u]
                u = a.to if a.kind is ActionKind.FORWARD else None
            if u is not None and state[u] == 1:
                return walk[walk.index(u):]
            for w in walk:
                state[w] = 2
        return None


@dataclass
class Witness:
    representative: HeaderSet | None
    detail: dict = field(default_factory=dict)

    def to_document(self):
        rep = self.representative.constraints() if self.representative is not None else None
        return {"representative": rep, **self.detail}


@dataclass
class VerificationReport:
    task: str
    passed: bool
    witnesses: list[Witness] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def __bool__(self):
        return self.passed

    def to_document(self):
        return {
            "task": self.task,
            "verdict": self.verdict,
            "witnesses": [w.to_document() for w in self.witnesses],
        }

    def summary(self) -> str:
        lines = [f"{self.task}: {self.verdict.upper()}"]
        for w in self.witnesses:
            rep = str(w.representative) if w.representative is not None else "-"
            extra = ", ".join(f"{k}={_fmt(v)}" for k, v in w.detail.items())
            lines.append(f"  class {rep}: {extra}")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(str(x) for x in v) + "]"
    return str(v)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_class_graphs(
    net: NetworkInstance, completion: WeakCompletion | None = None, threads: int | None = None
) -> list[ClassGraph]:
    """One graph per atom, ordered by the representative's canonical form."""
    if completion is None:
        completion = WeakCompletion.build(net.rule_collection(), net.layout)
    reps = sorted(completion.members, key=HeaderSet.sort_key)

    def one(s):
        labels = {u: class_action(net.tables[u], s) for u in net.nodes}
        return ClassGraph(s, labels, completion.atom_card(s))

    threads = threads or default_threads()
    if threads > 1 and len(reps) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, reps))
    return [one(s) for s in reps]


def _graphs(net, graphs):
    return build_class_graphs(net) if graphs is None else graphs


def check_no_loop(net: NetworkInstance, graphs: list[ClassGraph] | None = None) -> VerificationReport:
    witnesses = []
    for g in _graphs(net, graphs):
        cycle = g.find_cycle()
        if cycle is not None:
            witnesses.append(Witness(g.representative, {"cycle": cycle}))
    return VerificationReport("no-loop", not witnesses, witnesses)


def check_no_blackhole(net: NetworkInstance, graphs: list[ClassGraph] | None = None) -> VerificationReport:
    witnesses = []
    for g in _graphs(net, graphs):
        drop = next((u for u, a in g.labels.items() if a.is_drop), None)
        live = next((u for u, a in g.labels.items() if not a.is_drop), None)
        if drop is not None and live is not None:
            witnesses.append(Witness(g.representative, {"drop_node": drop, "non_drop_node": live}))
    return VerificationReport("no-blackhole", not witnesses, witnesses)


def _check_nodes(net, *nodes):
    for n in nodes:
        if n not in net.tables:
            raise NetworkError(f"unknown node {n!r}")


def check_reachability(
    net: NetworkInstance, u: Node, v: Node, graphs: list[ClassGraph] | None = None
) -> VerificationReport:
    """Pass iff some class has a forwarding path from ``u`` to ``v``.

    Packets may be injected at any node; ``u == v`` is reached by the empty path.
    """
    _check_nodes(net, u, v)
    task = f"reachability({u},{v})"
    for g in _graphs(net, graphs):
        _, path = g.fate(u)
        if v in path:
            return VerificationReport(task, True, [Witness(g.representative, {"path": path[: path.index(v) + 1]})])
    return VerificationReport(task, False, [Witness(None, {"unreachable": [u, v]})])


def check_consistency(
    net: NetworkInstance, u: Node, v: Node, graphs: list[ClassGraph] | None = None, strict: bool = False
) -> VerificationReport:
    _check_nodes(net, u, v)
    witnesses = []
    for g in _graphs(net, graphs):
        fu, _ = g.fate(u)
        fv, _ = g.fate(v)
        if not same_fate(fu, fv, strict):
            witnesses.append(Witness(g.representative, {"fate_" + str(u): str(fu), "fate_" + str(v): str(fv)}))
    return VerificationReport(f"consistency({u},{v})", not witnesses, witnesses)


def trace(net: NetworkInstance, header: int | HeaderSet, start: Node) -> tuple[Fate, list]:
    """Forward one concrete header hop by hop using plain membership tests."""
    if isinstance(header, HeaderSet):
        if header.cardinality() != 1:
            raise ValueError("trace needs a single header")
        header = _header_value(header)
    _check_nodes(net, start)

    def act(u):
        for rule in net.tables[u]:
            if rule.match.contains(header):
                return rule.action
        return DROP

    return _follow(act, start)


def _header_value(s: HeaderSet) -> int:
    values = {name: int(c, 2) if isinstance(c, str) else c[0] for name, c in s.constraints().items()}
    return s.layout.encode(values)


class TrackedNetwork:
    """A network and its completion, kept in step under table edits.

    The completion is indexed by rule set value; this class counts how many
    table entries carry each value and only inserts into (or deletes from)
    the completion when that count leaves (or returns to) zero.
    """

    def __init__(self, net: NetworkInstance):
        self.net = net
        self.completion = WeakCompletion.build(net.rule_collection(), net.layout)
        self._count: dict[HeaderSet, int] = {}
        for u in net.nodes:
            for r in net.tables[u]:
                self._count[r.match] = self._count.get(r.match, 0) + 1

    def insert(self, node: Node, index: int, rule: ForwardingRule) -> None:
        _check_nodes(self.net, node)
        table = list(self.net.tables[node])
        if not 0 <= index <= len(table):
            raise NetworkError(f"cannot insert at {node}[{index}]: table has {len(table)} rules")
        table.insert(index, rule)
        self.net = self.net.with_tables({node: table})
        n = self._count.get(rule.match, 0)
        self._count[rule.match] = n + 1
        if n == 0:
            self.completion.insert(rule.match)

    def delete(self, node: Node, index: int) -> ForwardingRule:
        _check_nodes(self.net, node)
        table = list(self.net.tables[node])
        if not 0 <= index < len(table):
            raise NetworkError(f"unknown rule reference {node}[{index}]")
        rule = table.pop(index)
        self.net = self.net.with_tables({node: table})
        self._count[rule.match] -= 1
        if self._count[rule.match] == 0:
            del self._count[rule.match]
            self.completion.delete(rule.match)
        return rule

    def matches_rebuild(self) -> bool:
        fresh = WeakCompletion.build(self.net.rule_collection(), self.net.layout)
        if fresh.member_set() != self.completion.member_set():
            return False
        return all(
            fresh.atom_card(c) == self.completion.atom_card(c)
            and fresh.rules_containing(c) == self.completion.rules_containing(c)
            for c in fresh
        )
