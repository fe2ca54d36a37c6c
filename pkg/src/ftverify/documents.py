"""Structured documents: networks, proof labels and table edits.

Documents are YAML (JSON is accepted too, being a subset) and carry a
``version`` field.  Output documents are written as JSON.  Validation errors
name the offending location, e.g. ``tables.u[2].match.dst``.

Network document::

    version: 1
    layout:
      - {name: dst, width: 4, kind: mask}
      - {name: port, width: 8, kind: range}
    nodes: [u, v]
    links: [[u, v]]
    tables:
      u:
        - {match: {dst: "0***"}, action: forward, to: v}
        - {match: {port: "0-80"}, action: drop}
      v:
        - {match: {}, action: deliver}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import yaml

from .distributed import ProofLabeling
from .headerset import HeaderLayout, HeaderSet, HeaderSetError, parse_set
from .network import DELIVER, DROP, Action, ForwardingRule, NetworkError, NetworkInstance

__all__ = [
    "DocumentError",
    "VERSION",
    "load",
    "parse_network",
    "network_to_document",
    "labels_to_document",
    "parse_labels",
    "parse_edits",
    "Edit",
    "dumps",
]

VERSION = 1


class DocumentError(ValueError):
    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def load(source: str | Path) -> Any:
    """Read a YAML/JSON document from a path (or from text when given a str with newlines)."""
    if isinstance(source, Path) or "\n" not in str(source):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise DocumentError(f"cannot read {path}: {e.strerror}") from None
        name = str(path)
    else:
        text, name = source, "<text>"
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{name}:{mark.line + 1}:{mark.column + 1}" if mark else name
        raise DocumentError(f"syntax error: {getattr(e, 'problem', e)}", where) from None


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False)


def _need(cond, msg, where):
    if not cond:
        raise DocumentError(msg, where)


def _check_version(doc, where=""):
    _need(isinstance(doc, dict), "expected a mapping", where or "document")
    v = doc.get("version", VERSION)
    _need(v == VERSION, f"unsupported version {v!r}", "version")


def _layout(items) -> HeaderLayout:
    _need(isinstance(items, list) and items, "layout must be a non-empty list of fields", "layout")
    for i, f in enumerate(items):
        _need(isinstance(f, dict), "field must be a mapping", f"layout[{i}]")
        for key in ("name", "width"):
            _need(key in f, f"missing {key!r}", f"layout[{i}]")
    try:
        return HeaderLayout.from_description(items)
    except (HeaderSetError, ValueError, TypeError) as e:
        raise DocumentError(str(e), "layout") from None


def _match(layout, raw, where) -> HeaderSet:
    if raw is None:
        raw = {}
    try:
        if isinstance(raw, dict):
            for name, c in raw.items():
                try:
                    parse_set(layout, {str(name): c})
                except HeaderSetError as e:
                    raise DocumentError(str(e), f"{where}.{name}") from None
            return parse_set(layout, {str(k): v for k, v in raw.items()})
        return parse_set(layout, raw)
    except HeaderSetError as e:
        raise DocumentError(str(e), where) from None


def _action(raw: dict, where: str) -> Action:
    kind = raw.get("action")
    if kind == "forward":
        _need("to" in raw, "forward needs a 'to' node", where)
        return Action.forward(str(raw["to"]))
    if kind == "drop":
        return DROP
    if kind == "deliver":
        return DELIVER
    raise DocumentError(f"unknown action {kind!r}", f"{where}.action")


def parse_rule(layout, raw, where) -> ForwardingRule:
    _need(isinstance(raw, dict), "rule must be a mapping", where)
    return ForwardingRule(_match(layout, raw.get("match"), f"{where}.match"), _action(raw, where))


def parse_network(doc: Any) -> NetworkInstance:
    _check_version(doc)
    layout = _layout(doc.get("layout"))
    nodes = doc.get("nodes")
    tables_raw = doc.get("tables") or {}
    _need(isinstance(tables_raw, dict), "tables must map node ids to rule lists", "tables")
    if nodes is None:
        nodes = list(tables_raw)
    _need(isinstance(nodes, list), "nodes must be a list", "nodes")
    nodes = [str(u) for u in nodes]
    links = []
    for i, link in enumerate(doc.get("links") or []):
        _need(isinstance(link, list) and len(link) == 2, "link must be a pair of node ids", f"links[{i}]")
        links.append((str(link[0]), str(link[1])))
    tables = {}
    for u, rules in tables_raw.items():
        u = str(u)
        _need(u in nodes, f"unknown node {u!r}", f"tables.{u}")
        _need(isinstance(rules, list), "table must be a list", f"tables.{u}")
        tables[u] = [parse_rule(layout, r, f"tables.{u}[{i}]") for i, r in enumerate(rules)]
    try:
        return NetworkInstance(layout, nodes, links, tables)
    except NetworkError as e:
        raise DocumentError(str(e), "network") from None


def _action_doc(a: Action) -> dict:
    if a.to is not None:
        return {"action": a.kind.value, "to": a.to}
    return {"action": a.kind.value}


def rule_to_document(rule: ForwardingRule) -> dict:
    return {"match": rule.match.constraints(), **_action_doc(rule.action)}


def network_to_document(net: NetworkInstance) -> dict:
    return {
        "version": VERSION,
        "layout": net.layout.describe(),
        "nodes": list(net.nodes),
        "links": [list(l) for l in net.links],
        "tables": {u: [rule_to_document(r) for r in net.tables[u]] for u in net.nodes},
    }


def labels_to_document(labeling: ProofLabeling, layout: HeaderLayout) -> dict:
    nodes = {}
    for u, members in labeling.labels.items():
        dist = labeling.distances.get(u, {})
        nodes[str(u)] = [
            {"set": c.constraints(), "distance": dist.get(c)}
            for c in sorted(members, key=HeaderSet.sort_key)
        ]
    return {"version": VERSION, "kind": "labels", "layout": layout.describe(), "nodes": nodes}


def parse_labels(doc: Any, layout: HeaderLayout) -> ProofLabeling:
    _check_version(doc)
    _need(doc.get("kind", "labels") == "labels", "not a label document", "kind")
    if "layout" in doc:
        _need(_layout(doc["layout"]) == layout, "label layout differs from the network layout", "layout")
    nodes = doc.get("nodes")
    _need(isinstance(nodes, dict), "nodes must map node ids to member lists", "nodes")
    labels, distances = {}, {}
    for u, items in nodes.items():
        u = str(u)
        _need(isinstance(items, list), "label must be a list", f"nodes.{u}")
        members, dist = [], {}
        for i, item in enumerate(items):
            where = f"nodes.{u}[{i}]"
            _need(isinstance(item, dict) and "set" in item, "member needs a 'set'", where)
            c = _match(layout, item["set"], f"{where}.set")
            d = item.get("distance")
            _need(isinstance(d, int) and not isinstance(d, bool), "distance must be an integer", f"{where}.distance")
            members.append(c)
            dist[c] = d
        labels[u] = members
        distances[u] = dist
    return ProofLabeling(labels, distances)


class Edit:
    """One table edit: insert ``rule`` at ``node[index]`` or delete ``node[index]``."""

    __slots__ = ("op", "node", "index", "rule")

    def __init__(self, op: str, node: str, index: int, rule: ForwardingRule | None = None):
        self.op, self.node, self.index, self.rule = op, node, index, rule

    def to_document(self):
        doc = {"op": self.op, "node": self.node, "index": self.index}
        if self.rule is not None:
            doc.update(rule_to_document(self.rule))
        return doc

    def __repr__(self):
        return f"Edit({self.to_document()})"


def parse_edits(doc: Any, layout: HeaderLayout) -> list[Edit]:
    if isinstance(doc, dict):
        _check_version(doc)
        doc = doc.get("edits")
    _need(isinstance(doc, list), "edits must be a list", "edits")
    out = []
    for i, raw in enumerate(doc):
        where = f"edits[{i}]"
        _need(isinstance(raw, dict), "edit must be a mapping", where)
        op = raw.get("op")
        _need(op in ("insert", "delete"), f"unknown op {op!r}", f"{where}.op")
        _need("node" in raw, "missing 'node'", where)
        index = raw.get("index", 0)
        _need(isinstance(index, int), "index must be an integer", f"{where}.index")
        rule = parse_rule(layout, raw, where) if op == "insert" else None
        out.append(Edit(op, str(raw["node"]), index, rule))
    return out
