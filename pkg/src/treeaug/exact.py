"""Exact solvers used as oracles and as subroutines.

``brute_force_opt`` is a branch-and-bound over "which link covers the deepest
uncovered edge". Ties between optimal covers are broken towards the
lexicographically smallest sorted id tuple. This is done by perturbing every cost
by ``-2^-(rank+1)`` scaled below the cost granularity. The perturbed costs are
pairwise distinct over sets, so the search never has to compare ties.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterable
from fractions import Fraction

import numpy as np

from treeaug.config import LIMITS
from treeaug.errors import InfeasibleError, InputError, InvariantViolation, SizeLimitError
from treeaug.instance import (
    Edge,
    TapInstance,
    bits,
    pair_is_shadow_minimal,
    principal_subtrees,
    shortening,
)


@dataclasses.dataclass(frozen=True)
class ExactSolution:
    link_ids: frozenset[int]
    value: Fraction
    optimal: bool = True


def _edge_mask(inst: TapInstance, edges: int | Iterable[Edge] | None) -> int:
    if edges is None:
        return inst.tree.full_mask
    if isinstance(edges, int):
        if edges & ~inst.tree.full_mask:
            raise InputError("edge mask contains non-edges")
        return edges
    return inst.tree.mask_of(edges)


def _link_mask(inst: TapInstance, allowed: int | Iterable[int] | None) -> int:
    if allowed is None:
        return (1 << len(inst.links)) - 1
    if isinstance(allowed, int):
        return allowed
    m = 0
    for i in allowed:
        m |= 1 << i
    return m


def brute_force_opt(
    inst: TapInstance,
    target_edges: int | Iterable[Edge] | None = None,
    *,
    allowed: int | Iterable[int] | None = None,
) -> ExactSolution:
    """Minimum-cost set of links (from ``allowed``) covering ``target_edges``.

    ``target_edges`` is an edge bitmask, an iterable of vertex pairs, or None for
    every tree edge.
    """
    if inst.n > LIMITS.exact_max_n:
        raise SizeLimitError(f"brute force refuses n={inst.n} > {LIMITS.exact_max_n}")
    target = _edge_mask(inst, target_edges)
    allowed_mask = _link_mask(inst, allowed)
    if target == 0:
        return ExactSolution(frozenset(), Fraction(0))

    ids = list(bits(allowed_mask))
    width = len(ids)
    denom = 1
    for i in ids:
        denom = math.lcm(denom, inst.links[i].cost.denominator)
    scale = denom << width
    pert = {}
    for rank, i in enumerate(ids):
        c = inst.links[i].cost
        pert[i] = c.numerator * (denom // c.denominator) * scale // denom - (1 << (width - 1 - rank))

    masks = inst.link_masks
    depth = inst.tree.base.depth
    edges = sorted(bits(target), key=lambda e: (-depth[e], e))
    cover: dict[int, int] = {}
    by_price: dict[int, list[int]] = {}
    for e in edges:
        cm = inst.cov_masks[e] & allowed_mask
        if not cm:
            raise InfeasibleError(f"edge {inst.tree.edge_of(e)} cannot be covered")
        cover[e] = cm
        by_price[e] = sorted(bits(cm), key=pert.__getitem__)

    def lower_bound(unc: int, forb: int) -> float | int:
        used = 0
        total = 0
        for e in edges:
            if not (unc >> e) & 1:
                continue
            cm = cover[e] & ~forb
            if not cm:
                return math.inf
            if cm & used:
                continue
            used |= cm
            for i in by_price[e]:
                if not (forb >> i) & 1:
                    total += pert[i]
                    break
        return total

    # greedy incumbent
    unc, chosen, cost = target, 0, 0
    while unc:
        e = next(e for e in edges if (unc >> e) & 1)
        pick = max(bits(cover[e]), key=lambda i: (Fraction((masks[i] & unc).bit_count(), pert[i]), -i))
        chosen |= 1 << pick
        cost += pert[pick]
        unc &= ~masks[pick]
    best = [cost, chosen]

    def search(unc: int, cur: int, chosen: int, forb: int) -> None:
        if not unc:
            if cur < best[0]:
                best[0], best[1] = cur, chosen
            return
        if cur + lower_bound(unc, forb) >= best[0]:
            return
        e = next(e for e in edges if (unc >> e) & 1)
        cands = [(i, masks[i] & unc) for i in bits(cover[e] & ~forb)]
        kept = []
        for i, cu in cands:
            dominated = False
            for j, cj in cands:
                if j != i and cu & cj == cu and pert[j] < pert[i]:
                    dominated = True
                    break
            if not dominated:
                kept.append((i, cu))
        kept.sort(key=lambda t: (-t[1].bit_count(), pert[t[0]]))
        banned = forb
        for i, cu in kept:
            search(unc & ~cu, cur + pert[i], chosen | (1 << i), banned)
            banned |= 1 << i

    search(target, 0, 0, 0)
    sol = frozenset(bits(best[1]))
    return ExactSolution(sol, inst.cost_of(sol))


def subset_dp_opt(
    inst: TapInstance,
    target_edges: int | Iterable[Edge] | None = None,
    *,
    allowed: int | Iterable[int] | None = None,
) -> Fraction:
    """Optimal cover value by dynamic programming over subsets of target edges.

    Independent of the branch-and-bound; used as a cross-check oracle. The table
    has 2^|target| entries, so keep targets below ~16 edges.
    """
    target = _edge_mask(inst, target_edges)
    positions = {e: p for p, e in enumerate(bits(target))}
    t = len(positions)
    if t > 20:
        raise SizeLimitError("subset DP limited to 20 target edges")
    ids = list(bits(_link_mask(inst, allowed)))
    denom = 1
    for i in ids:
        denom = math.lcm(denom, inst.links[i].cost.denominator)
    lmasks, lcosts = [], []
    for i in ids:
        m = 0
        for e in bits(inst.link_masks[i] & target):
            m |= 1 << positions[e]
        if m:
            lmasks.append(m)
            lcosts.append(int(inst.links[i].cost * denom))
    if not lmasks and t:
        raise InfeasibleError("no link touches the target")
    big = np.iinfo(np.int64).max // 4
    dp = np.full(1 << t, big, dtype=np.int64)
    dp[0] = 0
    lm = np.array(lmasks, dtype=np.int64)
    lc = np.array(lcosts, dtype=np.int64)
    for mask in range(1 << t):
        base = dp[mask]
        if base >= big:
            continue
        np.minimum.at(dp, mask | lm, base + lc)
    best = int(dp[(1 << t) - 1])
    if best >= big:
        raise InfeasibleError("target cannot be covered")
    return Fraction(best, denom)


def shadow_minimalize(
    inst: TapInstance, solution: Iterable[int], frozen: Iterable[int] = ()
) -> frozenset[int]:
    """Shorten links until the set is pairwise shadow-minimal.

    Links in ``frozen`` are never shortened. The covered edge set is unchanged
    and, because shadows cost at most their origin, so is the cost bound.
    """
    if not inst.shadow_closed:
        raise InputError("shadow_minimalize needs a shadow-closed instance")
    fixed = frozenset(frozen)
    cur = set(solution)
    while True:
        found = None
        order = sorted(cur)
        for ai, a in enumerate(order):
            for b in order[ai + 1:]:
                for x, y in ((a, b), (b, a)):
                    if x in fixed:
                        continue
                    s = shortening(inst, x, y)
                    if s is not None:
                        found = (x, inst.link_id(*s))
                        break
                if found:
                    break
            if found:
                break
        if found is None:
            return frozenset(cur)
        cur.discard(found[0])
        cur.add(found[1])


def solve_few_leaf(
    inst: TapInstance,
    contracted: int | Iterable[Edge] = 0,
    *,
    allowed: int | Iterable[int] | None = None,
) -> ExactSolution:
    """Exact optimum on the tree obtained by contracting ``contracted``.

    Only trees with few leaves after contraction are accepted. The work is
    delegated to the branch-and-bound restricted to links touching the residual
    edges.
    """
    cmask = _edge_mask(inst, contracted)
    residual = inst.tree.full_mask & ~cmask
    # leaves of the quotient tree: components of contracted edges with residual degree 1
    parent = list(range(inst.n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in bits(cmask):
        u, v = inst.tree.edge_of(e)
        parent[find(u)] = find(v)
    deg: dict[int, int] = {}
    for e in bits(residual):
        for w in inst.tree.edge_of(e):
            r = find(w)
            deg[r] = deg.get(r, 0) + 1
    leaves = sum(1 for d in deg.values() if d == 1)
    if leaves > LIMITS.few_leaf_max:
        raise SizeLimitError(f"residual tree has {leaves} leaves > {LIMITS.few_leaf_max}")
    universe = inst.cov_of_mask(residual) & _link_mask(inst, allowed)
    return brute_force_opt(inst, residual, allowed=universe)


class SubtreeCompleter:
    """Computes C(i, R) for one principal subtree, caching pair checks."""

    def __init__(self, inst: TapInstance, root: int, index: int):
        if not inst.shadow_closed:
            raise InputError("C(i,R) needs a shadow-closed instance")
        self.inst = inst
        self.root = root
        self.index = index
        self.vertices, self.edges = principal_subtrees(inst.tree, root)[index]
        inl = 0
        for i, l in enumerate(inst.links):
            if l.u in self.vertices and l.v in self.vertices:
                inl |= 1 << i
        self.inlinks = inl
        self._compat: dict[int, int] = {}

    def compatible(self, r: int) -> int:
        """In-subtree links ℓ such that {r, ℓ} is shadow-minimal."""
        got = self._compat.get(r)
        if got is None:
            got = 0
            for i in bits(self.inlinks):
                if pair_is_shadow_minimal(self.inst, r, i):
                    got |= 1 << i
            self._compat[r] = got
        return got

    def complete(self, cross_set: Iterable[int]) -> frozenset[int]:
        inst = self.inst
        R = frozenset(cross_set)
        allowed = self.inlinks
        for r in R:
            allowed &= self.compatible(r)
        residual = self.edges & ~inst.covered_mask(R)
        sol = brute_force_opt(inst, residual, allowed=allowed)
        full = shadow_minimalize(inst, sol.link_ids | R, frozen=R)
        C = full - R
        if inst.covered_mask(full) & self.edges != self.edges:
            raise InvariantViolation("R ∪ C(i,R) does not cover E_i")
        if inst.cost_of(C) != sol.value:
            raise InvariantViolation("shortening changed the size of C(i,R)")
        return C


def complete_cross_set(
    inst: TapInstance, root: int, subtree_index: int, cross_set: Iterable[int]
) -> frozenset[int]:
    """C(i, R): a cheapest in-subtree completion of R that keeps R ∪ C shadow-minimal."""
    return SubtreeCompleter(inst, root, subtree_index).complete(cross_set)
