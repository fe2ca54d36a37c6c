from pathlib import Path

import pytest

from ftverify import DELIVER, DROP, Action, ForwardingRule, HeaderLayout, NetworkInstance, parse_set

DATA = Path(__file__).parent / "data"


def mask(width, *texts):
    layout = HeaderLayout.single(width)
    return [parse_set(layout, t) for t in texts]


def net_from(width, tables, links=()):
    """Tiny network over one mask field; actions are "deliver", "drop" or a node id."""
    layout = HeaderLayout.single(width)
    nodes = list(tables)

    def action(a):
        return {"deliver": DELIVER, "drop": DROP}.get(a) or Action.forward(a)

    rules = {u: [ForwardingRule(parse_set(layout, m), action(a)) for m, a in t] for u, t in tables.items()}
    return NetworkInstance(layout, nodes, list(links), rules)


@pytest.fixture
def data_dir():
    return DATA


ACCEPTANCE = []


def record(name, ok, detail=""):
    """Log one acceptance criterion; printed again in the terminal summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
