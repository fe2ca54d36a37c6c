"""Local checks simulated as synchronous rounds.

Each check runs in two phases: every node publishes what it is allowed to
share (its table, or its label), then every node decides using only its own
state and what its neighbours published.  The global verdict is the
conjunction of the local ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

from .algebra import WeakCompletion, atom_cardinalities, check_weak_completeness
from .headerset import HeaderSet
from .network import (
    ActionKind,
    NetworkInstance,
    build_class_graphs,
    check_no_loop,
    class_action,
    first_rule_index,
)

__all__ = [
    "LoopExists",
    "PreconditionViolated",
    "LocalVerdict",
    "LocalCheckReport",
    "ProofLabeling",
    "local_check_no_blackhole",
    "check_more_specific",
    "generate_proof_labels",
    "verify_proof_labels",
    "check_no_loop_more_specific",
]

Node = Hashable


class LoopExists(Exception):
    def __init__(self, report):
        self.report = report
        w = report.witnesses[0]
        super().__init__(f"forwarding loop {w.detail['cycle']} for class {w.representative}")


class PreconditionViolated(Exception):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class LocalVerdict:
    node: Node
    peer: Node | None
    passed: bool
    witnesses: list[dict] = field(default_factory=list)

    def to_document(self):
        return {"node": self.node, "peer": self.peer, "verdict": "pass" if self.passed else "fail",
                "witnesses": self.witnesses}


@dataclass
class LocalCheckReport:
    task: str
    verdicts: list[LocalVerdict] = field(default_factory=list)
    components: list[list] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def __bool__(self):
        return self.passed

    def failures(self) -> list[LocalVerdict]:
        return [v for v in self.verdicts if not v.passed]

    def to_document(self):
        return {
            "task": self.task,
            "verdict": "pass" if self.passed else "fail",
            "components": self.components,
            "warnings": self.warnings,
            "checks": [v.to_document() for v in self.verdicts],
        }

    def summary(self) -> str:
        lines = [f"{self.task}: {'PASS' if self.passed else 'FAIL'} ({len(self.verdicts)} local checks)"]
        lines += [f"  warning: {w}" for w in self.warnings]
        for v in self.failures():
            where = f"{v.node}" if v.peer is None else f"{v.node}->{v.peer}"
            for w in v.witnesses:
                lines.append(f"  at {where}: " + ", ".join(f"{k}={x}" for k, x in w.items()))
        return "\n".join(lines)


def _publish_tables(net: NetworkInstance) -> dict[Node, dict[Node, tuple]]:
    """Round 1: each node receives the table of each neighbour."""
    return {u: {v: net.tables[v] for v in net.neighbors(u)} for u in net.nodes}


def _ordered_peers(net, u):
    order = {x: i for i, x in enumerate(net.nodes)}
    return sorted(net.neighbors(u), key=order.__getitem__)


def _report(net: NetworkInstance, task: str) -> LocalCheckReport:
    rep = LocalCheckReport(task, components=net.components())
    if len(rep.components) > 1:
        rep.warnings.append(f"graph has {len(rep.components)} components; each is checked on its own")
    return rep


def _edge_atoms(mine, theirs, layout) -> list[HeaderSet]:
    wc = WeakCompletion.build([r.match for r in mine] + [r.match for r in theirs], layout)
    return sorted(wc.members, key=HeaderSet.sort_key)


def local_check_no_blackhole(net: NetworkInstance) -> LocalCheckReport:
    """Node ``u`` checks, for each neighbour ``v``, that it never drops what ``v`` keeps."""
    report = _report(net, "local-no-blackhole")
    inbox = _publish_tables(net)
    for u in net.nodes:
        mine = net.tables[u]
        for v in _ordered_peers(net, u):
            theirs = inbox[u][v]
            witnesses = []
            for c in _edge_atoms(mine, theirs, net.layout):
                if class_action(theirs, c).is_drop:
                    continue
                if class_action(mine, c).is_drop:
                    witnesses.append({
                        "representative": str(c),
                        "edge": [u, v],
                        "peer_rule": first_rule_index(theirs, c),
                        "local_rule": first_rule_index(mine, c),
                    })
            report.verdicts.append(LocalVerdict(u, v, not witnesses, witnesses))
    return report


def check_more_specific(net: NetworkInstance) -> LocalCheckReport:
    """Tables list more specific rules first, and hops only get more specific."""
    report = _report(net, "more-specific")
    inbox = _publish_tables(net)
    for u in net.nodes:
        table = net.tables[u]
        witnesses = []
        for i, ri in enumerate(table):
            for j in range(i + 1, len(table)):
                rj = table[j].match
                if rj.is_subset(ri.match) and rj != ri.match:
                    witnesses.append({"precedence": [i, j], "general": str(ri.match), "specific": str(rj)})
        report.verdicts.append(LocalVerdict(u, None, not witnesses, witnesses))
    for u in net.nodes:
        mine = net.tables[u]
        for v in _ordered_peers(net, u):
            theirs = inbox[u][v]
            witnesses = []
            for c in _edge_atoms(mine, theirs, net.layout):
                i = first_rule_index(mine, c)
                if i is None or mine[i].action.kind is not ActionKind.FORWARD or mine[i].action.to != v:
                    continue
                j = first_rule_index(theirs, c)
                if j is not None and not theirs[j].match.is_subset(mine[i].match):
                    witnesses.append({
                        "representative": str(c),
                        "edge": [u, v],
                        "local_rule": i,
                        "peer_rule": j,
                    })
            report.verdicts.append(LocalVerdict(u, v, not witnesses, witnesses))
    return report


@dataclass
class ProofLabeling:
    """Per node: a collection of sets ``L(u)`` and a distance per member."""

    labels: dict[Node, list[HeaderSet]]
    distances: dict[Node, dict[HeaderSet, int]]

    def distance(self, u, c) -> int | None:
        return self.distances.get(u, {}).get(c)

    def copy(self) -> "ProofLabeling":
        return ProofLabeling(
            {u: list(l) for u, l in self.labels.items()},
            {u: dict(d) for u, d in self.distances.items()},
        )


def generate_proof_labels(net: NetworkInstance) -> ProofLabeling:
    """Give every node the global completion, with hop counts to the terminal node.

    Raises :class:`LoopExists` if some class loops, since no decreasing
    distance assignment exists then.
    """
    wc = WeakCompletion.build(net.rule_collection(), net.layout)
    graphs = build_class_graphs(net, wc)
    loops = check_no_loop(net, graphs)
    if not loops.passed:
        raise LoopExists(loops)
    members = [g.representative for g in graphs]
    distances: dict[Node, dict[HeaderSet, int]] = {u: {} for u in net.nodes}
    for g in graphs:
        c = g.representative
        for s in net.nodes:
            walk = []
            u = s
            while c not in distances[u]:
                a = g.labels[u]
                if a.kind is not ActionKind.FORWARD:
                    distances[u][c] = 0
                    break
                walk.append(u)
                u = a.to
            d = distances[u][c]
            for w in reversed(walk):
                d += 1
                distances[w][c] = d
    return ProofLabeling({u: list(members) for u in net.nodes}, distances)


def verify_proof_labels(net: NetworkInstance, labeling: ProofLabeling) -> LocalCheckReport:
    """Purely local acceptance test; acceptance everywhere implies NO-LOOP.

    Node ``u`` checks: its label is weakly complete; it covers every rule of
    ``T(u)``; it equals each neighbour's label; and distances strictly
    decrease along each forward action it takes on a member.
    """
    report = _report(net, "proof-labels")
    # round 1: publish labels and distances
    published = {u: (labeling.labels.get(u), labeling.distances.get(u, {})) for u in net.nodes}
    for u in net.nodes:
        label, dist = published[u]
        witnesses = []
        if label is None:
            report.verdicts.append(LocalVerdict(u, None, False, [{"check": "label", "reason": "missing label"}]))
            continue
        members = set(label)
        ok, pair = check_weak_completeness(members, net.layout)
        if not ok:
            pair_text = [str(x) for x in pair] if pair else None
            witnesses.append({"check": "weakly-complete", "pair": pair_text})
        else:
            cards = atom_cardinalities(members)
            for i, r in enumerate(net.tables[u]):
                covered = sum(a for x, a in cards.items() if x.is_subset(r.match))
                if covered != r.match.cardinality():
                    witnesses.append({"check": "covers-table", "rule": i})
        for v in _ordered_peers(net, u):
            peer_label, _ = published[v]
            if peer_label is None or set(peer_label) != members:
                witnesses.append({"check": "neighbor-equal", "peer": v})
        for c in label:
            du = dist.get(c)
            if du is None:
                witnesses.append({"check": "distance", "member": str(c), "reason": "missing distance"})
                continue
            a = class_action(net.tables[u], c)
            if a.kind is not ActionKind.FORWARD:
                continue
            dv = published[a.to][1].get(c)
            if dv is None or not dv < du:
                witnesses.append({"check": "decreasing", "member": str(c), "peer": a.to,
                                  "local_distance": du, "peer_distance": dv})
        report.verdicts.append(LocalVerdict(u, None, not witnesses, witnesses))
    return report


def _find_cycle(arcs: dict[Node, list[Node]]) -> list | None:
    state: dict[Node, int] = {}
    for root in arcs:
        if root in state:
            continue
        stack = [(root, iter(arcs.get(root, ())))]
        path = [root]
        state[root] = 1
        while stack:
            u, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                state[u] = 2
            elif state.get(nxt) == 1:
                return path[path.index(nxt):]
            elif nxt not in state:
                state[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(arcs.get(nxt, ()))))
    return None


def check_no_loop_more_specific(net: NetworkInstance, live_arcs_only: bool = True) -> LocalCheckReport:
    """NO-LOOP under MORE-SPECIFIC via one acyclicity test per rule value.

    Under MORE-SPECIFIC a looping packet applies the same rule value at every
    hop, so it suffices that, for each value ``r``, the arcs ``u -> v`` of
    rules equal to ``r`` forwarding to ``v`` form no cycle.  With
    ``live_arcs_only`` an arc is kept only if, on the edge's local
    completion, some class takes that rule at ``u`` and a rule equal to ``r``
    at ``v``; this drops arcs no packet can use twice in a row.
    """
    pre = check_more_specific(net)
    if not pre.passed:
        raise PreconditionViolated("network does not satisfy MORE-SPECIFIC", pre)
    report = _report(net, "no-loop-more-specific")
    inbox = _publish_tables(net)
    per_rule: dict[HeaderSet, dict[Node, list[Node]]] = {}
    for u in net.nodes:
        mine = net.tables[u]
        live: set[tuple[int, Node]] = set()
        if live_arcs_only:
            for v in _ordered_peers(net, u):
                theirs = inbox[u][v]
                for c in _edge_atoms(mine, theirs, net.layout):
                    i = first_rule_index(mine, c)
                    if i is None or mine[i].action.kind is not ActionKind.FORWARD or mine[i].action.to != v:
                        continue
                    j = first_rule_index(theirs, c)
                    if j is not None and theirs[j].match == mine[i].match:
                        live.add((i, v))
        for i, rule in enumerate(mine):
            if rule.action.kind is not ActionKind.FORWARD:
                continue
            if live_arcs_only and (i, rule.action.to) not in live:
                continue
            targets = per_rule.setdefault(rule.match, {}).setdefault(u, [])
            if rule.action.to not in targets:
                targets.append(rule.action.to)
    for r in sorted(per_rule, key=HeaderSet.sort_key):
        cycle = _find_cycle(per_rule[r])
        witnesses = [{"rule": str(r), "cycle": cycle}] if cycle else []
        report.verdicts.append(LocalVerdict(str(r), None, not witnesses, witnesses))
    return report
