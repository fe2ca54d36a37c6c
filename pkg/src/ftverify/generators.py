"""Seedable random instances for property tests and the acceptance suite.

Every generator takes a ``random.Random`` so a failing instance can be
reproduced from its seed and the parameters recorded in :class:`GenParams`.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass

from .headerset import Field, FieldKind, HeaderLayout, HeaderSet, parse_set
from .network import DELIVER, DROP, Action, ForwardingRule, NetworkInstance

__all__ = [
    "GenParams",
    "random_layout",
    "random_rule",
    "random_rules",
    "random_network",
    "hierarchical_network",
    "prefix_rules",
]


@dataclass
class GenParams:
    seed: int
    width: int = 8
    layout_kind: str = "mask"
    rules: int = 8
    wildcard_density: float = 0.5
    nodes: int = 4
    rules_per_table: int = 4
    connected: bool = True
    acyclic: bool = False

    def describe(self) -> str:
        return ", ".join(f"{k}={v}" for k, v in asdict(self).items())


def random_layout(rng: random.Random, width: int, kind: str = "mask") -> HeaderLayout:
    """``kind`` is ``mask``, ``range`` or ``product`` (a mask field then a range field)."""
    if kind == "product" and width >= 2:
        a = rng.randint(1, width - 1)
        return HeaderLayout([Field("addr", a, FieldKind.MASK), Field("port", width - a, FieldKind.RANGE)])
    if kind == "range":
        return HeaderLayout.single(width, FieldKind.RANGE)
    return HeaderLayout.single(width, FieldKind.MASK)


def _random_mask(rng, width, density):
    if rng.random() < 0.4:
        k = rng.randint(0, width)
        return "".join(rng.choice("01") for _ in range(k)) + "*" * (width - k)
    return "".join("*" if rng.random() < density else rng.choice("01") for _ in range(width))


def _random_range(rng, width):
    top = (1 << width) - 1
    lo = rng.randint(0, top)
    if rng.random() < 0.5:
        hi = min(top, lo + rng.randint(0, max(1, top // 4)))
    else:
        hi = rng.randint(lo, top)
    return [lo, hi]


def random_rule(rng: random.Random, layout: HeaderLayout, density: float = 0.5) -> HeaderSet:
    cons = {}
    for f in layout.fields:
        if f.kind is FieldKind.MASK:
            cons[f.name] = _random_mask(rng, f.width, density)
        elif rng.random() < 0.8:
            cons[f.name] = _random_range(rng, f.width)
    return parse_set(layout, cons)


def random_rules(rng: random.Random, layout: HeaderLayout, n: int, density: float = 0.5) -> list[HeaderSet]:
    return [random_rule(rng, layout, density) for _ in range(n)]


def prefix_rules(rng: random.Random, width: int, n: int) -> list[HeaderSet]:
    """``n`` random prefixes on a single ``width``-bit mask field."""
    layout = HeaderLayout.single(width)
    out = []
    for _ in range(n):
        k = rng.randint(0, width)
        out.append(parse_set(layout, "".join(rng.choice("01") for _ in range(k)) + "*" * (width - k)))
    return out


def _random_graph(rng, nodes, connected):
    links = set()
    if connected:
        for i in range(1, len(nodes)):
            j = rng.randrange(i)
            links.add((nodes[j], nodes[i]))
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if rng.random() < 0.3:
                links.add((nodes[i], nodes[j]))
    return sorted(links)


def random_network(rng: random.Random, params: GenParams | None = None) -> tuple[NetworkInstance, GenParams]:
    """Random graph and tables; ``acyclic`` forwards only toward lower-ranked nodes."""
    if params is None:
        params = GenParams(
            seed=rng.randrange(1 << 30),
            width=rng.randint(1, 10),
            layout_kind=rng.choice(["mask", "mask", "range", "product"]),
            nodes=rng.randint(1, 6),
            rules_per_table=rng.randint(0, 4),
            wildcard_density=rng.choice([0.3, 0.5, 0.7]),
            connected=rng.random() < 0.8,
            acyclic=rng.random() < 0.4,
        )
    local = random.Random(params.seed)
    layout = random_layout(local, params.width, params.layout_kind)
    nodes = [f"n{i}" for i in range(params.nodes)]
    links = _random_graph(local, nodes, params.connected)
    adj = {u: set() for u in nodes}
    for u, v in links:
        adj[u].add(v)
        adj[v].add(u)
    rank = {u: i for i, u in enumerate(local.sample(nodes, len(nodes)))}
    tables = {}
    for u in nodes:
        targets = sorted(v for v in adj[u] if not params.acyclic or rank[v] < rank[u])
        table = []
        for _ in range(local.randint(0, params.rules_per_table)):
            match = random_rule(local, layout, params.wildcard_density)
            roll = local.random()
            if targets and roll < 0.55:
                action = Action.forward(local.choice(targets))
            elif roll < 0.8:
                action = DELIVER
            else:
                action = DROP
            table.append(ForwardingRule(match, action))
        tables[u] = table
    return NetworkInstance(layout, nodes, links, tables), params


def _specificity(rule: ForwardingRule) -> int:
    return -rule.match.care.bit_count()


def hierarchical_network(rng: random.Random, width: int = 10, nodes: int = 6, mutations: int = 1) -> NetworkInstance:
    """Tree of nested prefixes with longest-prefix-first tables.

    Each node owns its parent's prefix extended by one or two bits, forwards
    each child's prefix to the child, delivers the rest of its own prefix and
    sends everything else to its parent.  ``mutations`` random edits (next hop
    changes along tree links, own-prefix delivery turned into forwarding,
    rule removal) then perturb it; tables stay sorted by prefix length.
    A mutation may break the shrinking property along a path, so callers
    wanting MORE-SPECIFIC instances filter with ``check_more_specific``.
    """
    layout = HeaderLayout.single(width)
    names = [f"n{i}" for i in range(nodes)]
    parent: dict[str, str | None] = {names[0]: None}
    prefix = {names[0]: ""}
    children: dict[str, list[str]] = {u: [] for u in names}
    for i in range(1, nodes):
        for _ in range(20):
            p = names[rng.randrange(i)]
            ext = "".join(rng.choice("01") for _ in range(rng.randint(1, 2)))
            cand = prefix[p] + ext
            clash = any(
                prefix[c].startswith(cand) or cand.startswith(prefix[c]) for c in children[p]
            )
            if len(cand) <= width and not clash:
                break
        else:
            continue
        u = names[i]
        parent[u] = p
        prefix[u] = cand
        children[p].append(u)
    names = [u for u in names if u in prefix]

    def pset(pre):
        return parse_set(layout, pre + "*" * (width - len(pre)))

    tables: dict[str, list[ForwardingRule]] = {}
    for u in names:
        table = [ForwardingRule(pset(prefix[c]), Action.forward(c)) for c in children[u]]
        table.append(ForwardingRule(pset(prefix[u]), DELIVER))
        if parent[u] is not None:
            table.append(ForwardingRule(pset(""), Action.forward(parent[u])))
        tables[u] = table

    links = [(parent[u], u) for u in names if parent[u] is not None]
    adj = {u: [] for u in names}
    for a, b in links:
        adj[a].append(b)
        adj[b].append(a)
    for _ in range(mutations):
        u = rng.choice(names)
        table = tables[u]
        if not table:
            continue
        k = rng.randrange(len(table))
        kind = rng.random()
        if kind < 0.6 and adj[u]:
            table[k] = ForwardingRule(table[k].match, Action.forward(rng.choice(adj[u])))
        elif kind < 0.85:
            table[k] = ForwardingRule(table[k].match, DROP if rng.random() < 0.5 else DELIVER)
        else:
            del table[k]
    for u in names:
        tables[u].sort(key=_specificity)
    return NetworkInstance(layout, names, links, tables)
