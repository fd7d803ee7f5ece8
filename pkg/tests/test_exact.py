from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given

from conftest import instances, kwide_instance, random_instance
from oracles import constrained_min, covers, enumerate_opt, link_paths, literal_pair_minimal
from treeaug.config import limits_override
from treeaug.errors import InfeasibleError, InputError, SizeLimitError
from treeaug.exact import (
    brute_force_opt,
    complete_cross_set,
    shadow_minimalize,
    solve_few_leaf,
    subset_dp_opt,
)
from treeaug.instance import (
    TapInstance,
    Tree,
    classify,
    is_feasible,
    is_shadow_minimal,
    principal_subtrees,
    shadow_complete,
)

PATH3 = Tree(3, [(0, 1), (1, 2)])  # a=0, b=1, c=2
STAR3 = Tree(4, [(0, 1), (0, 2), (0, 3)])  # center r=0


def pair_ids(inst):
    return {l.pair: i for i, l in enumerate(inst.links)}


def lex_first_optimum(inst):
    """Smallest sorted id tuple among minimum-cost covers, by enumeration."""
    best = None
    m = len(inst.links)
    for size in range(m + 1):
        for combo in itertools.combinations(range(m), size):
            if not covers(inst, combo):
                continue
            key = (sum((inst.links[i].cost for i in combo), Fraction(0)), combo)
            if best is None or key < best:
                best = key
    return best


# ---- brute force ----------------------------------------------------------------------


def test_brute_force_path_example():
    inst = TapInstance.build(PATH3, [(0, 1), (1, 2), (0, 2)])
    sol = brute_force_opt(inst)
    assert sol.value == 1
    assert sol.link_ids == {pair_ids(inst)[(0, 2)]}
    assert sol.optimal


def test_brute_force_empty_target():
    inst = TapInstance.build(PATH3, [(0, 2)])
    sol = brute_force_opt(inst, [])
    assert sol.value == 0 and sol.link_ids == frozenset()


def test_brute_force_star_leaf_pairs():
    inst = TapInstance.build(STAR3, [(1, 2), (1, 3), (2, 3)])
    sol = brute_force_opt(inst)
    assert sol.value == enumerate_opt(inst) == 2
    assert covers(inst, sol.link_ids)


def test_brute_force_errors():
    inst = TapInstance.build(PATH3, [(0, 1)])
    with pytest.raises(InfeasibleError):
        brute_force_opt(inst)
    big = TapInstance.build(Tree(5, [(i, i + 1) for i in range(4)]), [(0, 4)])
    with limits_override(exact_max_n=4):
        with pytest.raises(SizeLimitError):
            brute_force_opt(big)


def test_brute_force_lexicographic_ties():
    for seed in range(60):
        inst = random_instance(seed, n_max=7)
        if len(inst.links) > 12:
            continue
        value, combo = lex_first_optimum(inst)
        sol = brute_force_opt(inst)
        assert sol.value == value
        if inst.is_unit_cost:
            assert tuple(sorted(sol.link_ids)) == combo


def test_brute_force_matches_enumeration_and_dp():
    for seed in range(150):
        inst = random_instance(seed, n_max=10)
        if len(inst.links) > 14:
            continue
        sol = brute_force_opt(inst)
        assert is_feasible(inst, sol.link_ids)
        assert sol.value == enumerate_opt(inst) == subset_dp_opt(inst)


@given(instances(weighted=True))
def test_brute_force_weighted_matches_dp(inst):
    sol = brute_force_opt(inst)
    assert covers(inst, sol.link_ids)
    assert sol.value == inst.cost_of(sol.link_ids) == subset_dp_opt(inst)


def test_brute_force_restricted_target():
    for seed in range(40):
        inst = random_instance(seed, n_max=9)
        rng = random.Random(seed)
        target = rng.sample(list(inst.tree.edges), rng.randint(1, len(inst.tree.edges)))
        sol = brute_force_opt(inst, target)
        assert covers(inst, sol.link_ids, target)
        if len(inst.links) <= 14:
            assert sol.value == enumerate_opt(inst, target)


def test_brute_force_solution_is_inclusion_minimal():
    for seed in range(80):
        inst = random_instance(seed, n_max=10)
        sol = sorted(brute_force_opt(inst).link_ids)
        for drop in sol:
            assert not covers(inst, [i for i in sol if i != drop])


# ---- shadow-minimalization -------------------------------------------------------------


def test_shadow_minimalize_fixpoint():
    inst = shadow_complete(TapInstance.build(PATH3, [(0, 2)]))
    ids = pair_ids(inst)
    assert shadow_minimalize(inst, [ids[(0, 2)]]) == {ids[(0, 2)]}


def test_shadow_minimalize_path_pair():
    inst = shadow_complete(TapInstance.build(PATH3, [(0, 2), (0, 1)]))
    ids = pair_ids(inst)
    start = [ids[(0, 2)], ids[(0, 1)]]
    out = shadow_minimalize(inst, start)
    assert len(out) == 2
    assert is_shadow_minimal(inst, out)
    paths = link_paths(inst)
    assert set().union(*(paths[i] for i in out)) == set().union(*(paths[i] for i in start))
    assert shadow_minimalize(inst, out) == out


def test_shadow_minimalize_needs_closed_instance():
    with pytest.raises(InputError):
        shadow_minimalize(TapInstance.build(PATH3, [(0, 2)]), [0])


@given(instances(max_n=8, weighted=True, closed=True))
def test_shadow_minimalize_properties(inst):
    rng = random.Random(len(inst.links))
    start = set(rng.sample(range(len(inst.links)), min(len(inst.links), 4)))
    out = shadow_minimalize(inst, start)
    paths = link_paths(inst)
    union_in = set().union(*(paths[i] for i in start))
    assert set().union(*(paths[i] for i in out)) == union_in
    assert len(out) <= len(start)
    assert inst.cost_of(out) <= inst.cost_of(start)
    for i in out:
        assert any(paths[i] <= paths[j] for j in start)
    for a, b in itertools.combinations(sorted(out), 2):
        assert literal_pair_minimal(inst, a, b)
    assert shadow_minimalize(inst, out) == out


# ---- few-leaf solver -----------------------------------------------------------------


def test_few_leaf_single_edge_residual():
    tree = Tree(4, [(0, 1), (1, 2), (2, 3)])
    inst = TapInstance.build(tree, [(0, 3), (1, 2), (0, 2)], [3, 2, 1])
    sol = solve_few_leaf(inst, [(0, 1), (2, 3)])
    assert sol.value == 1
    assert sol.link_ids == {pair_ids(inst)[(0, 2)]}


def test_few_leaf_everything_contracted():
    inst = TapInstance.build(PATH3, [(0, 2)])
    sol = solve_few_leaf(inst, list(PATH3.edges))
    assert sol.value == 0 and sol.link_ids == frozenset()


def test_few_leaf_leaf_bound():
    star = Tree(8, [(0, i) for i in range(1, 8)])
    inst = TapInstance.build(star, [(i, i + 1) for i in range(1, 7)] + [(1, 7)])
    with pytest.raises(SizeLimitError):
        solve_few_leaf(inst)
    # contracting two spokes leaves 5 leaves
    assert solve_few_leaf(inst, [(0, 1), (0, 2)]).value == subset_dp_opt(
        inst, [e for e in star.edges if e not in ((0, 1), (0, 2))]
    )


def test_few_leaf_three_leaf_subtrees():
    checked = 0
    for seed in range(200):
        inst = random_instance(seed, n_max=11)
        if len(inst.tree.leaves()) != 3:
            continue
        sol = solve_few_leaf(inst)
        assert sol.value == brute_force_opt(inst).value == subset_dp_opt(inst)
        checked += 1
    assert checked >= 10


# ---- C(i, R) --------------------------------------------------------------------------


def test_completion_empty_when_r_covers():
    star = Tree(3, [(0, 1), (0, 2)])
    inst = shadow_complete(TapInstance.build(star, [(1, 2)]))
    i = pair_ids(inst)[(1, 2)]
    assert complete_cross_set(inst, 0, 0, [i]) == frozenset()


def test_completion_path_uses_full_uplink():
    tree = Tree(4, [(0, 1), (1, 2), (2, 3)])
    inst = shadow_complete(TapInstance.build(tree, [(0, 3)]))
    assert complete_cross_set(inst, 0, 0, []) == {pair_ids(inst)[(0, 3)]}


def test_completion_matches_constrained_search():
    checked = 0
    for seed in range(120):
        inst = kwide_instance(seed, n_max=10, k=2)
        if len(inst.links) > 40:
            continue
        cls = classify(inst, 0)
        subs = principal_subtrees(inst.tree, 0)
        for idx, (vertices, edges) in enumerate(subs):
            for r in sorted(cls.cross):
                l = inst.links[r]
                if (l.u in vertices) == (l.v in vertices):
                    continue
                try:
                    C = complete_cross_set(inst, 0, idx, [r])
                except InfeasibleError:
                    assert constrained_min(inst, vertices, edges, [r]) is None
                    continue
                full = C | {r}
                assert is_shadow_minimal(inst, full)
                assert covers(inst, full, inst.tree.edges_of(edges))
                assert len(C) == constrained_min(inst, vertices, edges, [r])
                checked += 1
    assert checked >= 30
