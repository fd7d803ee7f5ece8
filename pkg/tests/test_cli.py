from __future__ import annotations

import json
import subprocess
import sys

import pytest

from treeaug.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


STAR = {"n": 4, "edges": [[0, 1], [0, 2], [0, 3]], "links": [[1, 2], [1, 3], [2, 3]]}


def test_gen_is_deterministic(capsys):
    a = run(capsys, "gen", "kwide", "--seed", "4", "-p", "n=9")
    b = run(capsys, "gen", "kwide", "--seed", "4", "-p", "n=9")
    assert a[0] == 0 and a[1] == b[1]
    assert json.loads(a[1])["n"] == 9


def test_gen_to_file_with_delta(tmp_path, capsys):
    path = tmp_path / "inst.json"
    code, out, _ = run(capsys, "gen", "random-tree", "-p", "n=7", "--delta", "5/2", "-o", str(path))
    assert code == 0 and out == ""
    costs = [l.get("cost", "1") for l in json.loads(path.read_text())["links"]]
    assert "5/2" in costs


def test_solve_star(tmp_path, capsys):
    path = write_json(tmp_path / "star.json", STAR)
    code, out, _ = run(capsys, "solve", path)
    rep = json.loads(out)
    assert code == 0
    assert rep["final_size"] == 2 and rep["ratio"] == "1" and rep["cut_lp"] == "3/2"


def test_solve_csv(tmp_path, capsys):
    path = write_json(tmp_path / "star.json", STAR)
    code, out, _ = run(capsys, "solve", path, "--out", "csv", "--no-lp")
    header, row = out.strip().splitlines()
    assert code == 0 and header.startswith("id,family,seed")
    assert row.startswith("star,")


def test_exit_codes(tmp_path, capsys):
    infeasible = write_json(tmp_path / "bad.json", {"n": 3, "edges": [[0, 1], [1, 2]], "links": [[0, 1]]})
    assert run(capsys, "solve", infeasible)[0] == 2
    big = tmp_path / "big.json"
    assert run(capsys, "gen", "path", "-p", "n=9", "-p", "links=all", "-o", str(big))[0] == 0
    assert run(capsys, "solve", str(big), "--mode", "full-reduction", "--exact-max-n", "3")[0] == 3
    assert run(capsys, "solve", str(tmp_path / "missing.json"))[0] == 1
    with pytest.raises(SystemExit) as info:
        main(["solve", infeasible, "--mode", "nope"])
    assert info.value.code == 1
    capsys.readouterr()


def test_delta_guard(tmp_path, capsys):
    inst = {"n": 2, "edges": [[0, 1]], "links": [{"u": 0, "v": 1, "cost": "3"}]}
    path = write_json(tmp_path / "w.json", inst)
    assert run(capsys, "solve", path, "--delta", "2")[0] == 0
    two = {"n": 3, "edges": [[0, 1], [1, 2]], "links": [[0, 1, 1], [1, 2, 3]]}
    path = write_json(tmp_path / "w2.json", two)
    assert run(capsys, "solve", path, "--delta", "2")[0] == 1


def test_verify(tmp_path, capsys):
    inst = write_json(tmp_path / "star.json", STAR)
    good = write_json(tmp_path / "good.json", [[1, 2], [1, 3]])
    code, out, _ = run(capsys, "verify", inst, good)
    assert code == 0 and json.loads(out) == {"feasible": True, "size": 2, "cost": "2"}
    bad = write_json(tmp_path / "bad.json", [[1, 2]])
    code, out, _ = run(capsys, "verify", inst, bad)
    assert code == 1 and json.loads(out)["feasible"] is False
    unknown = write_json(tmp_path / "unknown.json", [[0, 1]])
    assert run(capsys, "verify", inst, unknown)[0] == 1


def test_verify_accepts_solve_report(tmp_path, capsys):
    inst = write_json(tmp_path / "star.json", STAR)
    _, out, _ = run(capsys, "solve", inst)
    report = tmp_path / "report.json"
    report.write_text(out)
    code, out, _ = run(capsys, "verify", inst, str(report))
    assert code == 0 and json.loads(out)["feasible"] is True


def test_batch_outputs(tmp_path, capsys):
    manifest = tmp_path / "m.jsonl"
    entries = [{"kind": "kwide", "params": {"n": 7}, "seed": s} for s in range(3)]
    manifest.write_text("".join(json.dumps(e) + "\n" for e in entries))
    csv_a, csv_b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, out, _ = run(capsys, "batch", str(manifest), "--csv", str(csv_a))
    assert code == 0 and len(out.strip().splitlines()) == 3
    assert run(capsys, "batch", str(manifest), "--csv", str(csv_b), "--jsonl", str(tmp_path / "r.jsonl"))[0] == 0
    assert csv_a.read_bytes() == csv_b.read_bytes()
    assert len((tmp_path / "r.jsonl").read_text().splitlines()) == 3


def test_batch_empty_manifest(tmp_path, capsys):
    manifest = tmp_path / "empty.jsonl"
    manifest.write_text("")
    code, out, _ = run(capsys, "batch", str(manifest))
    assert code == 0 and out == ""


def test_module_entry_point(tmp_path):
    path = write_json(tmp_path / "star.json", STAR)
    proc = subprocess.run(
        [sys.executable, "-m", "treeaug", "solve", path, "--no-lp"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["final_size"] == 2


def test_exit_code_mapping():
    from treeaug.cli import exit_code
    from treeaug.errors import InfeasibleError, InputError, InvariantViolation, SizeLimitError

    assert exit_code(InputError("x")) == 1
    assert exit_code(InfeasibleError("x")) == 2
    assert exit_code(SizeLimitError("x")) == 3
    assert exit_code(InvariantViolation("x")) == 4
