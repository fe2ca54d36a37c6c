"""Command-line entry point.

Exit codes: 0 all checks pass, 1 verification failure, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from itertools import product

from . import documents as docs
from .algebra import WeakCompletion
from .distributed import (
    LoopExists,
    PreconditionViolated,
    check_more_specific,
    check_no_loop_more_specific,
    generate_proof_labels,
    local_check_no_blackhole,
    verify_proof_labels,
)
from .generators import random_rule
from .headerset import HeaderSetError, parse_set
from .network import (
    DELIVER,
    DROP,
    Action,
    ForwardingRule,
    NetworkError,
    TrackedNetwork,
    build_class_graphs,
    check_consistency,
    check_no_blackhole,
    check_no_loop,
    check_reachability,
    default_threads,
    trace,
)
from .oracle import OracleCapExceeded, exhaustive_verify, validate_completion

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(args, doc, text=None):
    if args.format == "text" and text is not None:
        print(text)
    else:
        print(docs.dumps(doc))


def _load_network(path):
    return docs.parse_network(docs.load(path))


def _atom_report(net, completion):
    return completion.representatives().to_document(net.rule_ids())


def _text(constraints):
    return " ".join(f"{k}={v if isinstance(v, str) else '[%d,%d]' % tuple(v)}" for k, v in constraints.items())


def _atoms_text(report_doc):
    lines = [f"{report_doc['atom_count']} atoms"]
    for a in report_doc["atoms"]:
        rep = _text(a["representative"])
        rules = ", ".join("/".join(r.get("at") or [_text(r["match"])]) for r in a["matched_rules"]) or "-"
        lines.append(f"  {rep}  |a|={a['cardinality']}  rules: {rules}")
    return "\n".join(lines)


def cmd_classes(args):
    net = _load_network(args.network)
    wc = WeakCompletion.build(net.rule_collection(), net.layout)
    doc = _atom_report(net, wc)
    _emit(args, doc, _atoms_text(doc))
    return EXIT_OK


def _parse_checks(text, net):
    checks = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        head, *rest = item.split(":")
        if head in ("loops", "blackholes") and not rest:
            checks.append((head,))
        elif head in ("reach", "consistency") and len(rest) == 2:
            for n in rest:
                if n not in net.tables:
                    raise UsageError(f"unknown node {n!r} in check {item!r}")
            checks.append((head, rest[0], rest[1]))
        else:
            raise UsageError(f"bad check {item!r}; use loops, blackholes, reach:U:V or consistency:U:V")
    return checks


def cmd_verify(args):
    net = _load_network(args.network)
    checks = _parse_checks(args.checks, net)
    graphs = build_class_graphs(net, threads=args.threads)
    reports = []
    for c in checks:
        if c[0] == "loops":
            reports.append(check_no_loop(net, graphs))
        elif c[0] == "blackholes":
            reports.append(check_no_blackhole(net, graphs))
        elif c[0] == "reach":
            reports.append(check_reachability(net, c[1], c[2], graphs))
        else:
            reports.append(check_consistency(net, c[1], c[2], graphs, strict=args.strict_fate))
    ok = all(r.passed for r in reports)
    doc = {"version": docs.VERSION, "kind": "verification", "atom_count": len(graphs),
           "verdict": "pass" if ok else "fail", "reports": [r.to_document() for r in reports]}
    _emit(args, doc, "\n".join(r.summary() for r in reports))
    return EXIT_OK if ok else EXIT_FAIL


def _random_edit(rng, tracked):
    net = tracked.net
    u = rng.choice(net.nodes)
    table = net.tables[u]
    if table and rng.random() < 0.45:
        return docs.Edit("delete", u, rng.randrange(len(table)))
    nbrs = sorted(net.neighbors(u))
    roll = rng.random()
    action = Action.forward(rng.choice(nbrs)) if nbrs and roll < 0.5 else (DELIVER if roll < 0.8 else DROP)
    return docs.Edit("insert", u, rng.randint(0, len(table)), ForwardingRule(random_rule(rng, net.layout), action))


def cmd_update(args):
    net = _load_network(args.network)
    tracked = TrackedNetwork(net)
    edits = []
    if args.edits:
        edits = docs.parse_edits(docs.load(args.edits), net.layout)
    rng = random.Random(args.seed)
    applied = []
    consistent = True
    plan = list(edits) + [None] * args.random_edits
    for e in plan:
        if e is None:
            e = _random_edit(rng, tracked)
        try:
            if e.op == "insert":
                tracked.insert(e.node, e.index, e.rule)
            else:
                tracked.delete(e.node, e.index)
        except NetworkError as err:
            raise UsageError(str(err)) from None
        applied.append(e.to_document())
        if args.verify_against_rebuild and not tracked.matches_rebuild():
            consistent = False
    doc = _atom_report(tracked.net, tracked.completion)
    doc["edits"] = applied
    if args.verify_against_rebuild:
        doc["status"] = "consistent" if consistent else "inconsistent"
    text = _atoms_text(doc) + ("\nstatus: " + doc["status"] if "status" in doc else "")
    _emit(args, doc, text)
    return EXIT_OK if consistent else EXIT_FAIL


def cmd_local_check(args):
    net = _load_network(args.network)
    try:
        if args.which == "blackholes":
            report = local_check_no_blackhole(net)
        elif args.which == "more-specific":
            report = check_more_specific(net)
        else:
            report = check_no_loop_more_specific(net)
    except PreconditionViolated as e:
        doc = {"task": args.which, "verdict": "precondition-violated", "reason": str(e),
               "precondition": e.report.to_document() if e.report is not None else None}
        _emit(args, doc, f"{args.which}: PRECONDITION VIOLATED ({e})\n" + (e.report.summary() if e.report is not None else ""))
        return EXIT_FAIL
    _emit(args, report.to_document(), report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_label(args):
    net = _load_network(args.network)
    if args.action == "gen":
        try:
            labeling = generate_proof_labels(net)
        except LoopExists as e:
            doc = {"kind": "labels", "verdict": "fail", "error": "LoopExists", "report": e.report.to_document()}
            _emit(args, doc, f"LoopExists: {e}")
            return EXIT_FAIL
        doc = docs.labels_to_document(labeling, net.layout)
        text = docs.dumps(doc)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return EXIT_OK
    if not args.labels:
        raise UsageError("label verify needs a label file")
    labeling = docs.parse_labels(docs.load(args.labels), net.layout)
    report = verify_proof_labels(net, labeling)
    doc = report.to_document()
    doc["verdict"] = "accept" if report.passed else "reject"
    _emit(args, doc, report.summary().replace("PASS", "ACCEPT").replace("FAIL", "REJECT"))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_oracle(args):
    net = _load_network(args.network)
    rules = list(net.rule_collection())
    wc = WeakCompletion.build(rules, net.layout)
    check = validate_completion(rules, wc)
    divergences = []
    if not check.ok:
        divergences.append({"what": "classes", "detail": check.message, "witness": str(check.witness)})
    truth = exhaustive_verify(net, strict=args.strict_fate)
    graphs = build_class_graphs(net, wc, threads=args.threads)
    reports = {"no-loop": check_no_loop(net, graphs), "no-blackhole": check_no_blackhole(net, graphs)}
    oracle = {"no-loop": truth.no_loop, "no-blackhole": truth.no_blackhole}
    for u, v in product(net.nodes, net.nodes):
        reports[f"reach({u},{v})"] = check_reachability(net, u, v, graphs)
        oracle[f"reach({u},{v})"] = truth.reachability[u, v]
        reports[f"consistency({u},{v})"] = check_consistency(net, u, v, graphs, strict=args.strict_fate)
        oracle[f"consistency({u},{v})"] = truth.consistency[u, v]
    engine = {k: r.passed for k, r in reports.items()}
    for k in engine:
        if engine[k] != oracle[k]:
            divergences.append({"what": k, "engine": engine[k], "oracle": oracle[k],
                                "engine_report": reports[k].to_document()})
    status = "match" if not divergences else "divergence"
    doc = {"kind": "oracle", "status": status, "atom_count": len(wc), "divergences": divergences[:1],
           "verdicts": engine}
    _emit(args, doc, status if not divergences else f"divergence: {divergences[0]}")
    return EXIT_OK if not divergences else EXIT_FAIL


def _parse_header(layout, text):
    text = text.strip()
    if "=" not in text:
        try:
            s = parse_set(layout, text)
        except HeaderSetError:
            try:
                return layout.header(int(text, 0))
            except ValueError:
                raise UsageError(f"cannot read header {text!r}") from None
    else:
        cons = {}
        for part in text.replace(",", " ").split():
            name, _, val = part.partition("=")
            cons[name] = val
        s = parse_set(layout, cons)
    if s.cardinality() != 1:
        raise UsageError(f"{text!r} is not a single header")
    return s


def cmd_trace(args):
    net = _load_network(args.network)
    if args.node not in net.tables:
        raise UsageError(f"unknown node {args.node!r}")
    header = _parse_header(net.layout, args.header)
    fate, path = trace(net, header, args.node)
    doc = {"kind": "trace", "fate": fate.to_document(), "path": path}
    _emit(args, doc, f"{fate}  path: {' -> '.join(map(str, path))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, help="worker threads for per-class work "
                        "(default from FTVERIFY_THREADS, else 1)")
    common.add_argument("--seed", type=int, help="random seed for generated edits (default 0)")
    common.add_argument("--format", choices=["json", "text"], help="output format (default json)")
    p = argparse.ArgumentParser(prog="ftverify", parents=[common],
                                description="Forwarding table verification via header classes.")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    s = command("classes", "list the atoms of the network's rule collection")
    s.add_argument("network")
    s.set_defaults(func=cmd_classes)

    s = command("verify", "run centralized checks")
    s.add_argument("network")
    s.add_argument("--checks", default="loops,blackholes",
                   help="comma list of loops, blackholes, reach:U:V, consistency:U:V")
    s.add_argument("--strict-fate", action="store_true", help="drop location matters for consistency")
    s.set_defaults(func=cmd_verify)

    s = command("update", "apply table edits incrementally")
    s.add_argument("network")
    s.add_argument("--edits", help="edit document (list of insert/delete)")
    s.add_argument("--random-edits", type=int, default=0, metavar="N", help="append N random edits")
    s.add_argument("--verify-against-rebuild", action="store_true")
    s.set_defaults(func=cmd_update)

    s = command("local-check", "simulated local checks")
    s.add_argument("network")
    s.add_argument("which", choices=["blackholes", "more-specific", "loops-more-specific"])
    s.set_defaults(func=cmd_local_check)

    s = command("label", "generate or verify proof labels for NO-LOOP")
    s.add_argument("action", choices=["gen", "verify"])
    s.add_argument("network")
    s.add_argument("labels", nargs="?")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_label)

    s = command("oracle", "compare engine and exhaustive verdicts")
    s.add_argument("network")
    s.add_argument("--strict-fate", action="store_true")
    s.set_defaults(func=cmd_oracle)

    s = command("trace", "follow one concrete header")
    s.add_argument("network")
    s.add_argument("node")
    s.add_argument("header", help="bare constraint, name=value pairs, or an integer (0b/0x allowed)")
    s.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    for name, value in (("threads", None), ("seed", 0), ("format", "json"), ("strict_fate", False)):
        if not hasattr(args, name):
            setattr(args, name, value)
    if args.threads is None:
        args.threads = default_threads()
    started = time.perf_counter()
    try:
        code = args.func(args)
    except (docs.DocumentError, HeaderSetError, NetworkError, UsageError, OracleCapExceeded) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(f"# {args.command} finished in {time.perf_counter() - started:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
