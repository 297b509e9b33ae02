import json

import pytest

from dgmlearn.cli import main


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_graph_statins(tmp_path, capsys, statin_path):
    code, out, _ = _run(capsys, "graph", "--facts", statin_path, "--out", tmp_path)
    assert code == 0
    assert "nodes 6  edges 5" in out
    stats = json.loads((tmp_path / "graph_stats.json").read_text())
    assert (stats["nodes"], stats["edges"]) == (6, 5)
    assert len((tmp_path / "graph.tsv").read_text().splitlines()) == 5
    manifest = json.loads((tmp_path / "manifest_graph.json").read_text())
    assert set(manifest["outputs"]) == {"graph.tsv", "graph_stats.json"}


def test_missing_facts_file(tmp_path, capsys):
    missing = tmp_path / "nope.pl"
    code, _, err = _run(capsys, "graph", "--facts", missing, "--out", tmp_path / "o")
    assert code != 0
    assert str(missing) in err


def test_empty_kb(tmp_path, capsys):
    f = tmp_path / "empty.pl"
    f.write_text("% nothing here\n")
    code, out, _ = _run(capsys, "graph", "--facts", f, "--out", tmp_path / "o")
    assert code == 0 and "nodes 0  edges 0" in out


def test_staged_commands_chain(tmp_path, capsys, statin_path):
    # statin has one positive; add a couple so examples and a rule exist
    f = tmp_path / "kb.pl"
    f.write_text(statin_path.read_text() + "Interacts(Simvastatin, Pravastatin).\n")
    base = ["--facts", f, "--out", tmp_path / "o", "--method", "ilp", "--seed", 3]
    assert _run(capsys, "rules", *base)[0] == 0
    assert (tmp_path / "o" / "rules.pl").read_text().startswith("% method: ilp\n")
    assert _run(capsys, "embed", *base, "-k", 3, "-w", 2)[0] == 0
    header = (tmp_path / "o" / "embedding.csv").read_text().splitlines()[0]
    assert header.startswith("tuple,neighborhood,label,f1")
    assert _run(capsys, "train", *base, "--classifier", "lr")[0] == 0
    code, out, _ = _run(capsys, "eval", *base)
    assert code == 0 and "accuracy=" in out
    for name in ("rules", "embed", "train", "eval"):
        assert (tmp_path / "o" / f"manifest_{name}.json").is_file()


def test_config_file_and_override(tmp_path, capsys, statin_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"facts_path = {statin_path}\nmethod = ilp  # comment\nseed = 9\n")
    code, *_ = _run(capsys, "graph", "--config", cfg, "--seed", 4, "--out", tmp_path / "o")
    assert code == 0
    manifest = json.loads((tmp_path / "o" / "manifest_graph.json").read_text())
    assert manifest["seed"] == 4
    assert manifest["config"]["method"] == "ilp"


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = _run(capsys, "graph", "--config", cfg)
    assert code == 1 and "colour" in err


def test_failed_stage_leaves_no_outputs(tmp_path, capsys, statin_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / "examples.tsv").write_text("tuple\tlabel\nPravastatin|Simvastatin\t1\n")
    (out / "rules.pl").write_text("% method: ilp\n")
    code, _, err = _run(capsys, "embed", "--facts", statin_path, "--out", out)
    assert code == 1 and "no clauses" in err
    assert sorted(p.name for p in out.iterdir()) == ["examples.tsv", "rules.pl"]


def test_sweep_writes_table(tmp_path, capsys, statin_path):
    f = tmp_path / "kb.pl"
    f.write_text(statin_path.read_text() + "Interacts(Simvastatin, Pravastatin).\n")
    code, out, _ = _run(capsys, "sweep", "--facts", f, "--out", tmp_path / "o", "--method", "rw",
                        "--sweep", "w=1,2", "--repeats", 1)
    assert code == 0
    lines = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("param,value") and len(lines) == 3
