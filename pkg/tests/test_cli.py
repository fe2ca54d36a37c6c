import json

import pytest

from ftverify.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_classes(capsys, data_dir):
    code, doc = run_json(capsys, "classes", data_dir / "two_rules.yaml")
    assert code == 0 and doc["atom_count"] == 4
    by_rep = {a["representative"]["h"]: a for a in doc["atoms"]}
    assert by_rep["00"]["matched_rules"] == [{"match": {"h": "*0"}, "at": ["u[1]"]}, {"match": {"h": "0*"}, "at": ["u[0]"]}]
    assert by_rep["**"]["matched_rules"] == []
    assert by_rep["00"]["cardinality"] == "1"
    assert run_json(capsys, "classes", data_dir / "empty.yaml")[1]["atom_count"] == 1
    assert run_json(capsys, "classes", data_dir / "ranges.yaml")[1]["atom_count"] == 6


def test_classes_output_is_deterministic(capsys, data_dir):
    a = run(capsys, "classes", data_dir / "product.yaml")[1]
    b = run(capsys, "--threads", 4, "classes", data_dir / "product.yaml")[1]
    assert a == b


def test_verify(capsys, data_dir):
    code, doc = run_json(capsys, "verify", data_dir / "mutual.yaml", "--checks", "loops")
    assert code == 1 and doc["reports"][0]["witnesses"][0]["cycle"] == ["u", "v"]
    code, doc = run_json(capsys, "verify", data_dir / "tree.yaml", "--checks", "loops,blackholes,reach:a:b")
    assert code == 0 and doc["verdict"] == "pass"
    code, doc = run_json(capsys, "verify", data_dir / "blackhole.yaml", "--checks", "blackholes")
    w = doc["reports"][0]["witnesses"][0]
    assert code == 1 and w["representative"] == {"dst": "00**"}
    assert (w["drop_node"], w["non_drop_node"]) == ("u", "v")


def test_verify_strict_fate(capsys, data_dir):
    half = data_dir / "product.yaml"
    loose = run_json(capsys, "verify", half, "--checks", "consistency:v:w")[0]
    strict = run_json(capsys, "verify", half, "--checks", "consistency:v:w", "--strict-fate")[0]
    assert (loose, strict) in {(0, 0), (0, 1), (1, 1)}


@pytest.mark.parametrize("checks", ["reach:u:nobody", "consistency:u", "cycles"])
def test_verify_bad_selector(capsys, data_dir, checks):
    code, _, err = run(capsys, "verify", data_dir / "mutual.yaml", "--checks", checks)
    assert code == 2 and "error" in err


def test_update(capsys, data_dir, tmp_path):
    base = run_json(capsys, "classes", data_dir / "two_rules.yaml")[1]
    rt = tmp_path / "rt.yaml"
    rt.write_text("- {op: insert, node: u, index: 2, match: {h: '1*'}, action: drop}\n"
                  "- {op: delete, node: u, index: 2}\n")
    code, doc = run_json(capsys, "update", data_dir / "two_rules.yaml", "--edits", rt)
    assert code == 0 and doc["atoms"] == base["atoms"]
    one = tmp_path / "one.yaml"
    one.write_text("version: 1\nedits:\n  - {op: delete, node: u, index: 1}\n")
    assert run_json(capsys, "update", data_dir / "two_rules.yaml", "--edits", one)[1]["atom_count"] == 2
    code, doc = run_json(capsys, "--seed", 7, "update", data_dir / "product.yaml",
                         "--random-edits", 10, "--verify-against-rebuild")
    assert code == 0 and doc["status"] == "consistent" and len(doc["edits"]) == 10


def test_update_unknown_rule(capsys, data_dir, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("- {op: delete, node: u, index: 5}\n")
    code, _, err = run(capsys, "update", data_dir / "two_rules.yaml", "--edits", bad)
    assert code == 2 and "unknown rule reference" in err


def test_local_check(capsys, data_dir):
    code, doc = run_json(capsys, "local-check", data_dir / "blackhole.yaml", "blackholes")
    assert code == 1 and doc["verdict"] == "fail"
    assert run(capsys, "local-check", data_dir / "prefix_tree.yaml", "more-specific")[0] == 0
    assert run(capsys, "local-check", data_dir / "prefix_tree.yaml", "loops-more-specific")[0] == 0
    code, doc = run_json(capsys, "local-check", data_dir / "product.yaml", "loops-more-specific")
    assert code == 1 and doc["verdict"] == "precondition-violated"


def test_label(capsys, data_dir, tmp_path):
    out = tmp_path / "labels.json"
    assert run(capsys, "label", "gen", data_dir / "chain.yaml", "-o", out)[0] == 0
    doc = json.loads(out.read_text())
    assert [doc["nodes"][n][0]["distance"] for n in "wvu"] == [0, 1, 2]
    code, rep = run_json(capsys, "label", "verify", data_dir / "chain.yaml", out)
    assert code == 0 and rep["verdict"] == "accept"
    doc["nodes"]["u"][0]["distance"] = 0
    out.write_text(json.dumps(doc))
    code, rep = run_json(capsys, "label", "verify", data_dir / "chain.yaml", out)
    assert code == 1 and rep["verdict"] == "reject"
    bad = [c for c in rep["checks"] if c["verdict"] == "fail"]
    assert bad[0]["node"] == "u" and bad[0]["witnesses"][0]["member"] == "***"
    code, rep = run_json(capsys, "label", "gen", data_dir / "mutual.yaml")
    assert code == 1 and rep["error"] == "LoopExists"


def test_label_malformed(capsys, data_dir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1, "nodes": {"u": [{"set": {"dst": "***"}}]}}')
    assert run(capsys, "label", "verify", data_dir / "chain.yaml", bad)[0] == 2


@pytest.mark.parametrize("name", ["two_rules", "ranges", "mutual", "tree", "blackhole", "chain", "product", "empty"])
def test_oracle_match(capsys, data_dir, name):
    code, doc = run_json(capsys, "oracle", data_dir / f"{name}.yaml")
    assert code == 0 and doc["status"] == "match"


def test_oracle_cap(capsys, data_dir):
    code, _, err = run(capsys, "oracle", data_dir / "wide.yaml")
    assert code == 2 and "cap" in err


def test_trace(capsys, data_dir):
    code, doc = run_json(capsys, "trace", data_dir / "product.yaml", "u", "dst=1000 port=5")
    assert code == 0 and doc["fate"] == {"kind": "delivered", "at": "w"} and doc["path"] == ["u", "v", "w"]
    code, doc = run_json(capsys, "trace", data_dir / "mutual.yaml", "u", "1010")
    assert doc["fate"]["kind"] == "loop"
    assert run_json(capsys, "trace", data_dir / "mutual.yaml", "u", "0b1010")[1] == doc
    assert run(capsys, "trace", data_dir / "mutual.yaml", "u", "1***")[0] == 2
    assert run(capsys, "trace", data_dir / "mutual.yaml", "u", "99")[0] == 2


def test_text_format(capsys, data_dir):
    code, out, _ = run(capsys, "classes", data_dir / "two_rules.yaml", "--format", "text")
    assert code == 0 and out.startswith("4 atoms")


def test_usage_errors(capsys, data_dir):
    assert run(capsys)[0] == 2
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "classes", data_dir / "missing.yaml")[0] == 2
