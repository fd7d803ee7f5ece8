from __future__ import annotations

import json
from fractions import Fraction

import pytest

from conftest import kwide_instance, random_instance
from oracles import covers, enumerate_opt
from treeaug.errors import InfeasibleError, InputError
from treeaug.exact import brute_force_opt
from treeaug.generate import KINDS, generate
from treeaug.instance import TapInstance, Tree, is_feasible, is_k_wide, shadow_complete
from treeaug.pipeline import (
    CSV_COLUMNS,
    cg_lp_value,
    cut_lp_value,
    dumps_instance,
    instance_from_json,
    instance_to_json,
    read_manifest,
    run_batch,
    run_pipeline,
    summarize,
    summary_csv,
    wide_root,
)

# ---- generators ---------------------------------------------------------------------


def test_path_with_all_links_closes_to_three():
    inst = generate("path", {"n": 3, "links": "all"})
    assert len(shadow_complete(inst).links) == 3


def test_star_leaf_pairs_is_the_gap_instance():
    inst = generate("star", {"leaves": 3, "links": "leaf-pairs"})
    assert inst.n == 4 and len(inst.links) == 3
    assert brute_force_opt(inst).value == enumerate_opt(inst) == 2
    assert cut_lp_value(inst) == Fraction(3, 2)
    # the odd-set cut closes the gap
    assert cg_lp_value(shadow_complete(inst)) == 2


def test_generation_is_deterministic():
    for kind in KINDS:
        a = dumps_instance(generate(kind, {"n": 9, "delta": 2}, seed=7))
        b = dumps_instance(generate(kind, {"n": 9, "delta": 2}, seed=7))
        assert a == b


def test_generated_instances_are_coverable():
    for kind in KINDS:
        for seed in range(10):
            inst = generate(kind, {"n": 10}, seed)
            assert is_feasible(inst, range(len(inst.links)))


def test_kwide_generator_width():
    for k in (1, 2, 3):
        for seed in range(10):
            inst = generate("kwide", {"n": 12, "k": k}, seed)
            assert is_k_wide(inst.tree, 0, k)


def test_delta_pins_the_cost_ratio():
    inst = generate("random-tree", {"n": 8, "delta": 3}, 1)
    assert min(inst.costs) == 1 and max(inst.costs) == 3
    with pytest.raises(InputError):
        generate("random-tree", {"delta": Fraction(1, 2)})
    with pytest.raises(InputError):
        generate("nonsense")


# ---- instance files -------------------------------------------------------------------


def test_instance_json_roundtrip():
    for seed in range(20):
        inst = random_instance(seed, delta=2 if seed % 2 else 1)
        back = instance_from_json(json.loads(dumps_instance(inst)))
        assert back == inst


def test_instance_json_accepts_pair_lists():
    data = {"n": 3, "edges": [[0, 1], [1, 2]], "links": [[0, 2], [0, 1, "3/2"]]}
    inst = instance_from_json(data)
    assert inst.links[inst.link_id(0, 1)].cost == Fraction(3, 2)
    out = instance_to_json(inst)["links"]
    assert {"u": 0, "v": 1, "cost": "3/2"} in out and {"u": 0, "v": 2} in out
    with pytest.raises(InputError):
        instance_from_json({"n": 3, "edges": [[0, 1]]})


# ---- run_pipeline -----------------------------------------------------------------------


def test_single_edge_tree():
    inst = TapInstance.build(Tree(2, [(0, 1)]), [(0, 1)])
    rep = run_pipeline(inst, 2)
    assert rep.final_size == 1 and rep.ratio == "1" and rep.feasible


def test_three_leaf_star():
    inst = generate("star", {"leaves": 3, "links": "leaf-pairs"})
    rep = run_pipeline(inst, 2)
    assert rep.final_size == 2 and rep.ratio == "1"
    assert rep.cut_lp == "3/2" and rep.cg_lp == "2"


def test_modes_dispatch():
    inst = kwide_instance(3, n_max=9)
    assert run_pipeline(inst, 2).detail["dispatch"] == "k-wide-only"
    assert run_pipeline(inst, 2, "full-reduction").detail["dispatch"] == "full-reduction"
    weighted = generate("kwide", {"n": 8, "delta": 2}, 1)
    assert run_pipeline(weighted, 2).detail["dispatch"] == "weighted"
    with pytest.raises(InputError):
        run_pipeline(inst, 2, "fastest")
    binary = generate("binary", {"depth": 3})
    assert wide_root(binary, 1) is None
    with pytest.raises(InputError):
        run_pipeline(binary, 1, "k-wide-only")


def test_infeasible_instance_raises_with_report():
    inst = TapInstance.build(Tree(3, [(0, 1), (1, 2)]), [(0, 1)])
    with pytest.raises(InfeasibleError) as info:
        run_pipeline(inst, 2)
    assert info.value.report.status == "InfeasibleError"


def test_pipeline_outputs_are_feasible_and_mapped_back():
    for seed in range(40):
        inst = random_instance(seed, n_max=10, delta=1 + seed % 3)
        rep = run_pipeline(inst, 2, seed=seed, lp_values=False)
        ids = [inst.link_id(u, v) for u, v in rep.solution]
        assert covers(inst, ids)
        assert Fraction(rep.final_cost) == inst.cost_of(ids)
        assert Fraction(rep.opt) == brute_force_opt(inst).value
        assert Fraction(rep.ratio) >= 1


def test_report_is_json_serializable():
    rep = run_pipeline(kwide_instance(1, n_max=8), 2)
    data = json.loads(rep.dumps())
    assert data["status"] == "ok" and data["version"] == 1
    assert data["arm"] in ("cg", "rewire")


# ---- batch ----------------------------------------------------------------------------


def manifest(tmp_path, entries):
    path = tmp_path / "manifest.jsonl"
    path.write_text("".join(json.dumps(e) + "\n" for e in entries))
    return str(path)


def test_empty_manifest(tmp_path):
    path = manifest(tmp_path, [])
    entries = read_manifest(path)
    assert entries == []
    reports = run_batch(entries)
    assert reports == [] and summarize(reports) == []
    assert summary_csv([]) == ",".join(CSV_COLUMNS) + "\n"


def test_three_generators(tmp_path):
    entries = [
        {"kind": "kwide", "params": {"n": 8}, "seed": 1},
        {"kind": "path", "params": {"n": 6}, "seed": 2},
        {"kind": "star", "params": {"leaves": 3, "links": "leaf-pairs"}, "seed": 3},
    ]
    reports = run_batch(read_manifest(manifest(tmp_path, entries)))
    assert len(reports) == 3
    assert [r["family"] for r in reports] == ["kwide", "path", "star"]
    assert all(r["status"] == "ok" and r["feasible"] for r in reports)


def test_batch_reruns_are_identical(tmp_path):
    entries = [{"kind": k, "params": {"n": 8}, "seed": s} for k in ("kwide", "caterpillar") for s in range(3)]
    first = summary_csv(summarize(run_batch(entries)))
    second = summary_csv(summarize(run_batch(entries, workers=2)))
    assert first == second


def test_batch_records_errors(tmp_path):
    bad = {"instance": {"n": 3, "edges": [[0, 1], [1, 2]], "links": [[0, 1]]}, "family": "bad"}
    (rep,) = run_batch([bad])
    assert rep["status"] == "InfeasibleError" and rep["family"] == "bad"


def test_manifest_formats(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps([{"kind": "path"}]))
    assert read_manifest(str(path)) == [{"kind": "path"}]
    path.write_text("[1, 2]")
    with pytest.raises(InputError):
        read_manifest(str(path))
    path.write_text("{oops")
    with pytest.raises(InputError):
        read_manifest(str(path))
