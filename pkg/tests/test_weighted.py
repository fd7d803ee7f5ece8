from __future__ import annotations

import decimal
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import instances, kwide_instance, mixed_lp_point, random_instance
from oracles import covers, cov_mass_literal, side_mass_literal
from treeaug.decompose import is_gamma_light, reduction_width
from treeaug.errors import InputError
from treeaug.exact import brute_force_opt, subset_dp_opt
from treeaug.instance import Link, TapInstance, Tree, is_feasible, shadow_complete
from treeaug.lp.cuts import build_cut_lp
from treeaug.lp.kwide import solve_k_wide_lp
from treeaug.lp.model import solve_lp
from treeaug.rounding import cg_round, derandomized_round, rewire_gains
from treeaug.weighted import (
    WeightedRoundingInner,
    cost_group,
    g_delta_bound,
    group_count,
    normalize_and_group,
    weighted_cg_round,
    weighted_gamma_light,
    weighted_reduce,
    weighted_rewire_round,
    weighted_round_k_wide,
)

ZERO = Fraction(0)
THIRD = Fraction(1, 3)


def with_costs(inst, costs):
    links = tuple(Link(l.u, l.v, Fraction(c), l.origin) for l, c in zip(inst.links, costs))
    return TapInstance(inst.tree, links, inst.shadow_closed)


def weighted_kwide(seed, n_max=10, k=2, delta=3):
    return kwide_instance(seed, n_max=n_max, k=k, delta=delta)


# ---- grouping -------------------------------------------------------------------------------


def test_unit_costs_form_one_group():
    inst = random_instance(5)
    cfg = normalize_and_group(inst)
    assert cfg.delta == 1 and cfg.p == 1
    assert set(cfg.group_assignment.values()) == {1}


def test_costs_one_and_two():
    inst = TapInstance.build(Tree(3, [(0, 1), (1, 2)]), [(0, 1), (1, 2)], [1, 2])
    cfg = normalize_and_group(inst)
    assert cfg.delta == 2 and cfg.p == 2
    assert cfg.group_assignment == {0: 1, 1: 2}


def test_normalization_rescales_cheapest_to_one():
    inst = TapInstance.build(Tree(3, [(0, 1), (1, 2)]), [(0, 1), (1, 2)], [4, 6])
    cfg = normalize_and_group(inst)
    assert cfg.scale == 4 and cfg.delta == Fraction(3, 2)
    assert cfg.instance.costs == (1, Fraction(3, 2))


def test_group_count_values():
    assert group_count(1) == 1
    assert group_count(Fraction(3, 2)) == 1
    assert group_count(Fraction(9, 4)) == 2
    assert group_count(Fraction(23, 10)) == 3
    assert group_count(3) == 3
    with pytest.raises(InputError):
        group_count(Fraction(1, 2))


@given(st.fractions(min_value=1, max_value=200))
def test_group_count_matches_logarithm(delta):
    p = group_count(delta)
    # 1.5^(p-1) < Δ ≤ 1.5^p, unless p is clamped to 1
    assert Fraction(3, 2) ** p >= delta
    assert p == 1 or Fraction(3, 2) ** (p - 1) < delta
    if abs(math.log(delta, 1.5) - round(math.log(delta, 1.5))) > 1e-9:
        assert p == max(1, math.ceil(math.log(delta, 1.5)))


@given(instances(weighted=True))
def test_groups_are_geometric(inst):
    cfg = normalize_and_group(inst)
    costs = cfg.instance.costs
    assert min(costs) == 1 and max(costs) == cfg.delta
    for i, h in cfg.group_assignment.items():
        assert 1 <= h <= cfg.p
        assert Fraction(3, 2) ** (h - 1) <= costs[i]
        assert costs[i] < Fraction(3, 2) ** h or (h == cfg.p and costs[i] == Fraction(3, 2) ** h)
    for h in range(1, cfg.p + 1):
        g = [costs[i] for i in cfg.group(h)]
        if g:
            assert max(g) <= Fraction(3, 2) * min(g)


@given(st.integers(1, 5), st.lists(st.fractions(0, 1), min_size=3, max_size=3))
def test_same_group_rewiring_saves_a_third(h, offsets):
    p = 5
    low = Fraction(3, 2) ** (h - 1)
    # three costs inside [1.5^(h-1), 1.5^h)
    a, b, c = (low + low * o / 2 * Fraction(99, 100) for o in offsets)
    assert cost_group(a, p) == cost_group(b, p) == cost_group(c, p) == h
    assert c - a - b <= -THIRD


# ---- weighted lightness --------------------------------------------------------------------


def lp_x(inst):
    return dict(enumerate(solve_lp(build_cut_lp(inst)).x))


@given(instances(closed=True))
def test_weighted_light_equals_plain_for_unit_costs(inst):
    x = lp_x(inst)
    for eid in range(1, inst.n):
        if inst.tree.full_mask >> eid & 1:
            for k in (1, 4, 9):
                assert weighted_gamma_light(inst, x, inst.tree.full_mask, eid, k=k) == is_gamma_light(
                    inst, x, inst.tree.full_mask, eid, k=k
                )


def test_weighted_zero_mass_edge_is_light():
    inst = TapInstance.build(Tree(3, [(0, 1), (1, 2)]), [(0, 1), (1, 2)], [1, 3])
    x = {0: Fraction(1), 1: ZERO}
    assert weighted_gamma_light(inst, x, inst.tree.full_mask, inst.tree.edge_id(1, 2), Fraction(1, 10))


@given(instances(weighted=True, closed=True))
def test_weighted_light_matches_definition(inst):
    x = lp_x(inst)
    edges = inst.tree.edges
    for e in edges:
        eid = inst.tree.edge_id(*e)
        lhs = cov_mass_literal(inst, x, e, weighted=True)
        rhs = min(side_mass_literal(inst, x, edges, e, v, weighted=True) for v in e)
        for k in (1, 4, 9):
            assert weighted_gamma_light(inst, x, inst.tree.full_mask, eid, k=k) == (lhs * lhs * k <= rhs * rhs)
        assert weighted_gamma_light(inst, x, inst.tree.full_mask, eid, Fraction(1, 3)) == (3 * lhs <= rhs)


# ---- g(Δ) -----------------------------------------------------------------------------------


def test_g_delta_at_one():
    direct = 2 - 4 * (12 - math.sqrt(141))
    assert math.isclose(g_delta_bound(1), direct, abs_tol=1e-12)
    assert math.isclose(g_delta_bound(1), 1.497368348151669, abs_tol=1e-12)


def test_g_delta_closed_form():
    # the textbook form cancels badly in floats, so evaluate it with 50 digits
    with decimal.localcontext() as ctx:
        ctx.prec = 50
        for delta in (Fraction(3, 2), 2, 3, 10, 100):
            f = Fraction(group_count(Fraction(delta)) * delta)
            beta = decimal.Decimal(f.numerator) / f.denominator
            direct = 2 - 4 * beta * (12 * beta - (144 * beta * beta - 3).sqrt())
            assert math.isclose(g_delta_bound(delta), float(direct), abs_tol=1e-12)


def test_g_delta_below_three_halves():
    for delta in (1, 2, 10, 100):
        assert g_delta_bound(delta) < 1.5


def test_g_delta_monotone_and_limit():
    grid = [1 + Fraction(i, 20) for i in range(20 * 99 + 1)]
    values = [g_delta_bound(d) for d in grid]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert values[-1] < 1.5
    assert 1.5 - g_delta_bound(10**6) < 1e-9
    with pytest.raises(InputError):
        g_delta_bound(Fraction(9, 10))


# ---- CG arm ------------------------------------------------------------------------------------


def test_weighted_cg_round_unit_costs_is_cg_round():
    for seed in range(10):
        inst = kwide_instance(seed, n_max=9)
        x = solve_k_wide_lp(inst, 0, 2).x
        assert weighted_cg_round(inst, 0, x).solution == cg_round(inst, 0, x).solution


def test_weighted_cg_round_integral_point():
    inst = with_costs(shadow_complete(TapInstance.build(Tree(3, [(0, 1), (1, 2)]), [(0, 2)])), [2, 2, 2])
    ids = {l.pair: i for i, l in enumerate(inst.links)}
    x = {i: ZERO for i in range(len(inst.links))}
    x[ids[(0, 2)]] = Fraction(1)
    res = weighted_cg_round(inst, 0, x)
    assert res.solution == {ids[(0, 2)]}
    assert inst.cost_of(res.solution) <= res.bound


def test_weighted_cg_round_bound():
    for seed in range(30):
        inst = normalize_and_group(weighted_kwide(seed, delta=1 + seed % 3)).instance
        lp = solve_k_wide_lp(inst, 0, 2)
        res = weighted_cg_round(inst, 0, lp.x, lp.cuts)
        assert covers(inst, res.solution)
        assert inst.cost_of(res.solution) <= res.bound


# ---- rewiring arm ---------------------------------------------------------------------------


def test_weighted_rewire_unit_costs_uses_all_critical_links():
    for seed in range(10):
        inst = kwide_instance(seed, n_max=9)
        cfg = normalize_and_group(inst)
        lp = solve_k_wide_lp(inst, 0, 2)
        res = weighted_rewire_round(inst, 0, 2, cfg, lp)
        assert res.group == 1
        plain = derandomized_round(inst, lp, gain=THIRD)
        assert res.solution == plain.solution


def test_weighted_rewire_guarantees():
    executed = 0
    for seed in range(40):
        inst = normalize_and_group(weighted_kwide(seed)).instance
        cfg = normalize_and_group(inst)
        for lp in (solve_k_wide_lp(inst, 0, 2), mixed_lp_point(inst, 0, 2, seed)):
            res = weighted_rewire_round(inst, 0, 2, cfg, lp)
            crit = lp.classification.crit_cross
            assert cfg.p * res.group_mass[res.group] >= sum((lp.x[i] for i in crit), ZERO)
            st = res.derand.state
            for (*_, gain) in rewire_gains(inst, st.matching, st.anchor):
                assert gain <= -THIRD
                executed += 1
            assert st.matching <= cfg.group(res.group)
            base = sum((inst.cost_of(loc) for loc in st.locals), ZERO)
            assert inst.cost_of(res.solution) <= base - THIRD * len(st.matching)
            assert is_feasible(inst, res.solution)
    assert executed >= 5


# ---- full k-wide rounding and reduction ---------------------------------------------------------


def test_weighted_round_ratio_against_brute_force():
    for seed in range(40):
        inst = weighted_kwide(seed, n_max=10)
        res = weighted_round_k_wide(inst, 0, 2)
        assert is_feasible(inst, res.solution)
        cost = inst.cost_of(res.solution)
        opt = brute_force_opt(inst).value
        assert opt == subset_dp_opt(inst)
        assert float(cost / opt) <= g_delta_bound(res.config.delta) + 1e-9
        lp = res.lp
        total = sum(lp.x.values(), ZERO)
        assert total <= lp.objective_value <= res.config.delta * total


def test_weighted_reduce_feasible():
    for seed in range(15):
        inst = shadow_complete(random_instance(seed, n_max=9, kind="random-tree", delta=2))
        res, cfg = weighted_reduce(inst, 2)
        assert covers(inst, res.solution)
        width = reduction_width(cfg.instance, 2, True)
        assert width == math.floor(2 * cfg.delta)
        dec = res.decomposition
        assert dec.weighted
        # split budget with cost-weighted masses: (Σ c·x(cov e_i))² k ≤ c(x)²
        x = res.x
        split = sum(
            (cov_mass_literal(cfg.instance, x, cfg.instance.tree.edge_of(e), weighted=True)
             for e in dec.split_edges if e is not None),
            ZERO,
        )
        cx = sum((cfg.instance.costs[i] * v for i, v in x.items()), ZERO)
        assert split * split * 2 <= cx * cx


def test_weighted_inner_alpha_bounds_guarantee():
    for delta in (1, 2, 3):
        inner = WeightedRoundingInner(delta)
        assert g_delta_bound(delta) < inner.alpha <= Fraction(3, 2)
