"""Weighted instances with bounded cost ratio Δ.

Costs are rescaled so the cheapest link costs 1. Links are grouped
geometrically by cost with ratio 3/2 inside each group. The rewiring arm then
only matches links of one group (the one carrying most critical cross mass).
Every such replacement saves at least a third of a unit. The decomposition
measures lightness by cost-weighted mass and produces kΔ-wide pieces.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Mapping
from fractions import Fraction

from treeaug.config import LIMITS
from treeaug.decompose import ReductionResult, is_gamma_light, reduce_to_k_wide
from treeaug.errors import InputError, InvariantViolation
from treeaug.exact import brute_force_opt
from treeaug.instance import Link, TapInstance, principal_leaf_counts
from treeaug.lp.kwide import KWideLpSolution, mass, solve_k_wide_lp
from treeaug.rounding import (
    AlphaProfile,
    CgRoundResult,
    DerandResult,
    alpha_profile,
    cg_round,
    derandomized_round,
    rewire_gains,
    verify_uplink_domination,
)

ZERO = Fraction(0)
RATIO = Fraction(3, 2)
GROUP_GAIN = Fraction(1, 3)


@dataclasses.dataclass(frozen=True)
class WeightedConfig:
    delta: Fraction  # c_max / c_min
    p: int  # number of cost groups
    group_assignment: dict[int, int]  # link id -> group in 1..p
    scale: Fraction  # original c_min; normalized cost = cost / scale
    instance: TapInstance  # the instance with c_min = 1

    def group(self, h: int) -> frozenset[int]:
        return frozenset(i for i, g in self.group_assignment.items() if g == h)


def group_count(delta: Fraction) -> int:
    """max(1, ⌈log_{3/2} Δ⌉), computed exactly."""
    delta = Fraction(delta)
    if delta < 1:
        raise InputError("delta must be at least 1")
    p, power = 0, Fraction(1)
    while power < delta:
        p += 1
        power *= RATIO
    return max(1, p)


def cost_group(cost: Fraction, p: int) -> int:
    """h with cost in [1.5^{h-1}, 1.5^h); the top group also takes 1.5^p."""
    h, upper = 1, RATIO
    while cost >= upper and h < p:
        h += 1
        upper *= RATIO
    return h


def normalize_and_group(inst: TapInstance) -> WeightedConfig:
    if any(l.cost <= 0 for l in inst.links):
        raise InputError("link costs must be positive")
    if not inst.links:
        return WeightedConfig(Fraction(1), 1, {}, Fraction(1), inst)
    scale = min(inst.costs)
    links = tuple(Link(l.u, l.v, l.cost / scale, l.origin) for l in inst.links)
    norm_inst = TapInstance(inst.tree, links, inst.shadow_closed)
    delta = max(norm_inst.costs)
    p = group_count(delta)
    groups = {i: cost_group(l.cost, p) for i, l in enumerate(links)}
    cfg = WeightedConfig(delta, p, groups, scale, norm_inst)
    for h in range(1, p + 1):
        g = [links[i].cost for i in cfg.group(h)]
        if g and max(g) > RATIO * min(g):
            raise InvariantViolation(f"cost group {h} spans a ratio above 3/2")
    return cfg


def weighted_gamma_light(inst, x, subtree, edge, gamma=None, *, k=None) -> bool:
    """Lightness with cost-weighted masses."""
    return is_gamma_light(inst, x, subtree, edge, gamma, k=k, weighted=True)


def g_delta_bound(delta: Fraction | int) -> float:
    """2 − 4β(12β − √(144β² − 3)) with β = pΔ, in cancellation-free form."""
    delta = Fraction(delta)
    if delta < 1:
        raise InputError("delta must be at least 1")
    beta = group_count(delta) * delta
    root = math.sqrt(144 * beta * beta - 3)
    # 12β − √(144β² − 3) = 3 / (12β + √(144β² − 3))
    return 2 - 12 * float(beta) / (12 * float(beta) + root)


def weighted_cg_round(inst: TapInstance, root: int, x: Mapping[int, Fraction], cuts=()) -> CgRoundResult:
    """The CG arm; its bound 2c(x_in) − c(x_up) + c(x_cross) is already cost-weighted."""
    return cg_round(inst, root, x, cuts)


def group_masses(cfg: WeightedConfig, x: Mapping[int, Fraction], crit: frozenset[int]) -> dict[int, Fraction]:
    return {h: mass(x, cfg.group(h) & crit) for h in range(1, cfg.p + 1)}


@dataclasses.dataclass(frozen=True)
class WeightedRewireResult:
    solution: frozenset[int]
    group: int
    group_mass: dict[int, Fraction]
    derand: DerandResult
    gains: tuple[Fraction, ...]


def weighted_rewire_round(
    inst: TapInstance,
    root: int,
    k: int,
    config: WeightedConfig,
    lp_sol: KWideLpSolution,
    *,
    all_groups: bool = False,
) -> WeightedRewireResult:
    """Rewire inside the heaviest cost group (or, with ``all_groups``, the best group).

    ``inst`` must be the normalized instance of ``config``.
    """
    cls = lp_sol.classification
    crit = cls.crit_cross
    gm = group_masses(config, lp_sol.x, crit)
    j = max(gm, key=lambda h: (gm[h], -h))
    if config.p * gm[j] < mass(lp_sol.x, crit):
        raise InvariantViolation("heaviest group carries less than x(L_cross^crit)/p")
    candidates = sorted(gm) if all_groups else [j]
    best = None
    for h in candidates:
        der = derandomized_round(inst, lp_sol, edges=config.group(h) & crit, gain=GROUP_GAIN)
        gains = tuple(g for *_, g in rewire_gains(inst, der.state.matching, der.state.anchor))
        if any(g > -GROUP_GAIN for g in gains):
            raise InvariantViolation("a same-group rewiring saved less than 1/3")
        base = sum((inst.cost_of(loc) for loc in der.state.locals), ZERO)
        if inst.cost_of(der.solution) > base - GROUP_GAIN * len(der.state.matching):
            raise InvariantViolation("rewired cost exceeds the 1/3-discounted locals")
        res = WeightedRewireResult(der.solution, h, gm, der, gains)
        if best is None or inst.cost_of(res.solution) < inst.cost_of(best.solution):
            best = res
    return best


@dataclasses.dataclass(frozen=True)
class WeightedRoundResult:
    solution: frozenset[int]
    arm: str
    cg: CgRoundResult
    rewire: WeightedRewireResult
    lp: KWideLpSolution
    alpha: AlphaProfile
    config: WeightedConfig

    def report(self) -> dict:
        lp = self.lp.objective_value
        cost = self.config.instance.cost_of(self.solution)
        return {
            "delta": str(self.config.delta),
            "p": self.config.p,
            "group": self.rewire.group,
            "group_mass": {str(h): str(v) for h, v in self.rewire.group_mass.items()},
            "g_delta_bound": g_delta_bound(self.config.delta),
            "lp_value": str(lp),
            "ratio_to_lp": float(cost / lp) if lp else None,
            "chosen_arm": self.arm,
            "alpha": self.alpha.as_dict(),
        }


def weighted_round_k_wide(
    inst: TapInstance,
    root: int,
    k: int,
    *,
    config: WeightedConfig | None = None,
    all_groups: bool = False,
) -> WeightedRoundResult:
    """Cheaper of the CG arm and the grouped rewiring arm on the normalized instance.

    Link ids are shared with ``inst``; only the costs are rescaled.
    """
    config = config or normalize_and_group(inst)
    ninst = config.instance
    lp_sol = solve_k_wide_lp(ninst, root, k)
    x = lp_sol.x
    opt_star = lp_sol.objective_value
    cls = lp_sol.classification
    total = mass(x, x)
    # x(L) ≤ OPT* ≤ Δ·x(L); the second gives x(L_cross^crit)/OPT* ≥ α_crit/Δ
    if total > opt_star or opt_star > config.delta * total:
        raise InvariantViolation("weighted LP value outside [x(L), Δ·x(L)]")
    if not verify_uplink_domination(ninst, lp_sol):
        raise InvariantViolation("x(L_up) < x(L_cross^no-crit) on a weighted instance")
    cg = weighted_cg_round(ninst, root, x, lp_sol.cuts)
    rw = weighted_rewire_round(ninst, root, k, config, lp_sol, all_groups=all_groups)
    if ninst.cost_of(rw.solution) < ninst.cost_of(cg.solution):
        arm, sol = "rewire", rw.solution
    else:
        arm, sol = "cg", cg.solution
    if ninst.cost_of(cg.solution) > cg.bound:
        raise InvariantViolation("weighted CG arm exceeds its bound")
    return WeightedRoundResult(sol, arm, cg, rw, lp_sol, alpha_profile(x, cls), config)


class WeightedRoundingInner:
    """Inner solver for the weighted reduction; exact search past the Λ width limit."""

    name = "weighted-rounding"

    def __init__(self, delta: Fraction | int = 1) -> None:
        # a rational upper bound on 3/2 − g(Δ)
        self.alpha = Fraction(math.ceil(g_delta_bound(delta) * 10**6) + 1, 10**6)
        self.fallbacks = 0
        self.reports: list[dict] = []

    def solve(self, sub: TapInstance, k: int) -> frozenset[int]:
        if not sub.tree.edges:
            return frozenset()
        width = max(principal_leaf_counts(sub.tree, 0), default=0)
        if min(k, width) > LIMITS.lambda_max_width:
            self.fallbacks += 1
            return brute_force_opt(sub).link_ids
        res = weighted_round_k_wide(sub, 0, k)
        self.reports.append(res.report())
        return res.solution


def weighted_reduce(
    inst: TapInstance, k: int, inner=None, *, workers: int = 1
) -> tuple[ReductionResult, WeightedConfig]:
    """Weighted splitting plus a weighted inner solver on the normalized instance."""
    cfg = normalize_and_group(inst)
    inner = inner or WeightedRoundingInner(cfg.delta)
    res = reduce_to_k_wide(cfg.instance, k, inner, weighted=True, workers=workers)
    return res, cfg
