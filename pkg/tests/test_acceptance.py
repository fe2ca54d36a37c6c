"""One test per acceptance criterion; each prints a single PASS/FAIL line."""

import random
import time
from itertools import product

import pytest

from conftest import record
from ftverify import (
    DELIVER,
    DROP,
    Action,
    FieldKind,
    ForwardingRule,
    HeaderLayout,
    LoopExists,
    ProofLabeling,
    WeakCompletion,
    build_class_graphs,
    check_consistency,
    check_more_specific,
    check_no_blackhole,
    check_no_loop,
    check_no_loop_more_specific,
    check_reachability,
    generate_proof_labels,
    local_check_no_blackhole,
    parse_set,
    verify_proof_labels,
)
from ftverify.generators import (
    GenParams,
    hierarchical_network,
    prefix_rules,
    random_layout,
    random_network,
    random_rule,
    random_rules,
)
from ftverify.oracle import exhaustive_verify, validate_completion


def same_completion(a, b):
    return (
        a.member_set() == b.member_set()
        and all(a.atom_card(c) == b.atom_card(c) for c in b)
        and all(a.rules_containing(c) == b.rules_containing(c) for c in b)
    )


def random_collection(rng, i):
    width = (4, 8, 12)[i % 3]
    kind = ("mask", "range", "product")[(i // 3) % 3]
    layout = random_layout(rng, width, kind)
    return layout, random_rules(rng, layout, rng.randint(0, 12), rng.choice([0.3, 0.5, 0.7]))


def test_oracle_equivalence():
    rng = random.Random(20240101)
    start = time.perf_counter()
    failures = []
    n = 1080
    for i in range(n):
        layout, rules = random_collection(rng, i)
        v = validate_completion(rules, WeakCompletion.build(rules, layout))
        if not v.ok:
            failures.append((i, v.message))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    record("oracle equivalence", ok, f"{n} collections, {len(failures)} mismatches, {elapsed:.1f}s")
    assert ok, failures[:3]


def test_order_invariance():
    rng = random.Random(7)
    bad = 0
    n = 220
    for i in range(n):
        layout, rules = random_collection(rng, i)
        base = WeakCompletion.build(rules, layout).member_set()
        for _ in range(5):
            perm = rules[:]
            rng.shuffle(perm)
            if WeakCompletion.build(perm, layout).member_set() != base:
                bad += 1
    record("order invariance", bad == 0, f"{n} collections x 5 permutations, {bad} differ")
    assert bad == 0


def test_incremental_consistency():
    rng = random.Random(99)
    bad = steps = 0
    n = 220
    for i in range(n):
        layout = random_layout(rng, rng.choice([4, 6, 8, 10]), rng.choice(["mask", "range", "product"]))
        pool = random_rules(rng, layout, rng.randint(1, 10))
        wc = WeakCompletion.build([], layout)
        live = []
        for _ in range(rng.randint(1, 20)):
            absent = [r for r in pool if r not in live]
            if live and (not absent or rng.random() < 0.4):
                r = rng.choice(live)
                wc.delete(r)
                live.remove(r)
            else:
                r = rng.choice(absent)
                wc.insert(r)
                live.append(r)
            steps += 1
            if not same_completion(wc, WeakCompletion.build(live, layout)):
                bad += 1
    record("incremental consistency", bad == 0, f"{n} scripts, {steps} steps, {bad} diverged")
    assert bad == 0


def intersection_closure(rules):
    """Every non-empty intersection of two or more rules, by plain fixpoint."""
    seen = set()
    frontier = set()
    for i, a in enumerate(rules):
        for b in rules[i + 1:]:
            x = a & b
            if not x.is_empty():
                frontier.add(x)
    while frontier:
        seen |= frontier
        frontier = {x & r for x in frontier for r in rules} - seen
        frontier = {x for x in frontier if not x.is_empty()}
    return seen


@pytest.mark.parametrize("n", [3, 10, 20, 50])
def test_range_example_numbers(n):
    start = time.perf_counter()
    layout = HeaderLayout.single(8, FieldKind.RANGE)
    rules = [parse_set(layout, [i, n + i]) for i in range(1, n + 1)]
    combos = intersection_closure(rules) - set(rules)
    members = len(WeakCompletion.build(rules, layout))
    elapsed = time.perf_counter() - start
    ok = len(combos) == n * (n - 1) // 2 and members <= 2 * n + 1 and elapsed < 1
    record(f"range example n={n}", ok,
           f"{len(combos)} intersections (expect {n * (n - 1) // 2}), {members} members (<= {2 * n + 1}), "
           f"{elapsed * 1000:.0f}ms")
    assert ok


def corpus(count=320, seed=2024):
    rng = random.Random(seed)
    nets = []
    while len(nets) < count:
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
        nets.append(random_network(rng, params)[0])
    return nets


CORPUS = corpus()
TRUTH = {}


def truth(i):
    if i not in TRUTH:
        TRUTH[i] = exhaustive_verify(CORPUS[i])
    return TRUTH[i]


def test_verification_cross_check():
    start = time.perf_counter()
    mismatches = []
    for i, net in enumerate(CORPUS):
        t = truth(i)
        graphs = build_class_graphs(net)
        got = [check_no_loop(net, graphs).passed == t.no_loop,
               check_no_blackhole(net, graphs).passed == t.no_blackhole]
        for u, v in product(net.nodes, net.nodes):
            got.append(check_reachability(net, u, v, graphs).passed == t.reachability[u, v])
            got.append(check_consistency(net, u, v, graphs).passed == t.consistency[u, v])
        if not all(got):
            mismatches.append(i)
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 120
    record("verification cross-check", ok, f"{len(CORPUS)} networks, {len(mismatches)} mismatches, {elapsed:.1f}s")
    assert ok, mismatches[:5]


def test_local_blackhole_equivalence():
    connected = [i for i, net in enumerate(CORPUS) if net.is_connected()]
    bad = [i for i in connected if local_check_no_blackhole(CORPUS[i]).passed != truth(i).no_blackhole]
    holes = sum(not truth(i).no_blackhole for i in connected)
    record("local blackhole equivalence", not bad,
           f"{len(connected)} connected networks ({holes} with black holes), {len(bad)} disagree")
    assert not bad


def _mutate_network(rng, net):
    u = rng.choice(net.nodes)
    table = list(net.tables[u])
    nbrs = sorted(net.neighbors(u))
    if table and rng.random() < 0.5:
        k = rng.randrange(len(table))
        action = Action.forward(rng.choice(nbrs)) if nbrs else DROP
        table[k] = ForwardingRule(table[k].match, action)
    else:
        action = Action.forward(rng.choice(nbrs)) if nbrs else DELIVER
        table.insert(rng.randint(0, len(table)), ForwardingRule(random_rule(rng, net.layout), action))
    return net.with_tables({u: table})


def _mutate_labels(rng, net, labeling):
    lab = labeling.copy()
    u = rng.choice(net.nodes)
    label = lab.labels[u]
    dist = lab.distances[u]
    roll = rng.random()
    if roll < 0.35 and label:
        c = rng.choice(label)
        dist[c] = rng.randint(0, len(net.nodes) + 1)
    elif roll < 0.5:
        v = rng.choice(net.nodes)
        shared = [c for c in label if c in lab.distances[v]]
        if shared:
            c = rng.choice(shared)
            dist[c], lab.distances[v][c] = lab.distances[v][c], dist[c]
    elif roll < 0.65 and label:
        c = label.pop(rng.randrange(len(label)))
        dist.pop(c, None)
    elif roll < 0.8:
        c = random_rule(rng, net.layout)
        if not c.is_empty() and c not in label:
            label.append(c)
            dist[c] = rng.randint(0, len(net.nodes))
    elif roll < 0.9:
        # relabel every node with the completion of its own table
        for v in net.nodes:
            own = WeakCompletion.build([r.match for r in net.tables[v]], net.layout).members
            lab.labels[v] = own
            lab.distances[v] = {c: rng.randint(0, len(net.nodes)) for c in own}
    else:
        for v in net.nodes:
            lab.distances[v] = {c: rng.randint(0, len(net.nodes)) for c in lab.labels[v]}
    return lab


def _guessed_labels(rng, net):
    members = WeakCompletion.build(net.rule_collection(), net.layout).members
    return ProofLabeling(
        {u: list(members) for u in net.nodes},
        {u: {c: rng.randint(0, len(net.nodes)) for c in members} for u in net.nodes},
    )


def test_proof_labeling():
    rng = random.Random(5)
    loop_free = [i for i in range(len(CORPUS)) if truth(i).no_loop]
    looping = [i for i in range(len(CORPUS)) if not truth(i).no_loop]

    honest_rejected = [i for i in loop_free if not verify_proof_labels(CORPUS[i], generate_proof_labels(CORPUS[i])).passed]

    # cyclic-forwarding networks only, to get many more looping instances
    extra_rng = random.Random(77)
    extra = []
    while len(extra) < 60:
        params = GenParams(seed=extra_rng.randrange(1 << 30), width=extra_rng.randint(1, 8),
                           layout_kind=extra_rng.choice(["mask", "range", "product"]),
                           nodes=extra_rng.randint(2, 6), rules_per_table=4, wildcard_density=0.7)
        net = random_network(extra_rng, params)[0]
        if not exhaustive_verify(net).no_loop:
            extra.append(net)
    looping_nets = [CORPUS[i] for i in looping] + extra

    loop_accepted = []
    gen_succeeded = []
    for i, net in enumerate(looping_nets):
        try:
            generate_proof_labels(net)
            gen_succeeded.append(i)
        except LoopExists:
            pass
        lab = _guessed_labels(rng, net)
        tried = [lab] + [_mutate_labels(rng, net, lab) for _ in range(50)]
        if any(verify_proof_labels(net, x).passed for x in tried):
            loop_accepted.append(i)

    unsound = []
    accepted = 0
    for k in range(500):
        i = loop_free[k % len(loop_free)]
        net = CORPUS[i]
        lab = _mutate_labels(rng, net, generate_proof_labels(net))
        if rng.random() < 0.5:
            net = _mutate_network(rng, net)
        if verify_proof_labels(net, lab).passed:
            accepted += 1
            if not exhaustive_verify(net).no_loop:
                unsound.append(i)

    ok = not honest_rejected and not loop_accepted and not gen_succeeded and not unsound
    record("proof labeling", ok,
           f"honest accepted {len(loop_free) - len(honest_rejected)}/{len(loop_free)}; "
           f"looping networks {len(looping_nets)}, any labeling accepted on {len(loop_accepted)}, "
           f"generation succeeded on {len(gen_succeeded)}; "
           f"500 tamperings: {accepted} accepted, {len(unsound)} accepted with a loop")
    assert ok


def test_more_specific_scheme():
    rng = random.Random(31)
    agree = total = skipped = loops = 0
    for k in range(400):
        net = hierarchical_network(rng, width=rng.randint(6, 10), nodes=rng.randint(2, 7), mutations=k % 4)
        if not check_more_specific(net).passed:
            skipped += 1
            continue
        total += 1
        expected = check_no_loop(net).passed
        loops += not expected
        agree += check_no_loop_more_specific(net).passed == expected
    ok = total >= 200 and agree == total and loops > 0
    record("MORE-SPECIFIC scheme", ok,
           f"{agree}/{total} agree ({loops} with loops; {skipped} generated instances violate MORE-SPECIFIC)")
    assert ok


def test_performance():
    rules = prefix_rules(random.Random(1), 32, 1000)
    layout = HeaderLayout.single(32)
    start = time.perf_counter()
    wc = WeakCompletion.build(rules, layout)
    elapsed = time.perf_counter() - start
    total = sum(wc.atom_card(c) for c in wc)
    ok = elapsed < 10 and total == layout.size
    record("performance", ok, f"1000 prefix rules -> c={len(wc)} atoms in {elapsed:.2f}s")
    assert ok
