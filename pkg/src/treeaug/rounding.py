"""Rounding a k-wide-LP solution.

Two arms are computed and the smaller result wins:

* the CG arm moves in-link mass onto up-links and then rounds the resulting
  point exactly (a minimum cover over its support and the shadows of it);
* the rewiring arm picks one local cover per principal subtree, marks active
  critical vertices and merges pairs of anchor cross-links along a matching.
  Columns are fixed one subtree at a time by conditional expectations, so the
  result is deterministic.

Everything is exact rational arithmetic. The bounds the analysis promises are
checked on every run and an :class:`InvariantViolation` is raised when one
fails.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterable, Mapping, Sequence
from fractions import Fraction

import numpy as np

from treeaug.errors import InputError, InvariantViolation
from treeaug.exact import brute_force_opt
from treeaug.instance import Edge, LinkClassification, TapInstance, classify, is_feasible, norm
from treeaug.lp.cuts import CgCut
from treeaug.lp.kwide import KWideLpSolution, mass, solve_k_wide_lp
from treeaug.lp.model import LpModel, solve_lp

ZERO = Fraction(0)


# ---- profile of an LP solution ---------------------------------------------


@dataclasses.dataclass(frozen=True)
class AlphaProfile:
    alpha_in: Fraction
    alpha_up: Fraction
    alpha_cross: Fraction
    alpha_crit: Fraction
    alpha_nocrit: Fraction

    def as_dict(self) -> dict[str, str]:
        return {f.name: str(getattr(self, f.name)) for f in dataclasses.fields(self)}


def alpha_profile(x: Mapping[int, Fraction], cls: LinkClassification) -> AlphaProfile:
    total = mass(x, x)
    if total == 0:
        return AlphaProfile(ZERO, ZERO, ZERO, ZERO, ZERO)
    prof = AlphaProfile(
        mass(x, cls.inlinks) / total,
        mass(x, cls.up) / total,
        mass(x, cls.cross) / total,
        mass(x, cls.crit_cross) / total,
        mass(x, cls.nocrit_cross) / total,
    )
    if prof.alpha_in + prof.alpha_cross != 1 or prof.alpha_crit + prof.alpha_nocrit != prof.alpha_cross:
        raise InvariantViolation("α-profile does not add up")
    if prof.alpha_up > prof.alpha_in:
        raise InvariantViolation("α_up exceeds α_in")
    return prof


def verify_uplink_domination(inst: TapInstance, lp_sol: KWideLpSolution) -> bool:
    """x(L_up) ≥ x(L_cross^no-crit); holds for every k-wide-LP solution."""
    cls = lp_sol.classification
    return mass(lp_sol.x, cls.up) >= mass(lp_sol.x, cls.nocrit_cross)


def nonroot_leaves(inst: TapInstance, root: int) -> list[int]:
    return [v for v in range(inst.n) if v != root and inst.tree.degree(v) == 1]


def leaf_inequality(inst: TapInstance, lp_sol: KWideLpSolution) -> tuple[Fraction, int]:
    """(2·x(L) − x(L_up) − x(L_cross^no-crit), number of non-root leaves)."""
    cls = lp_sol.classification
    x = lp_sol.x
    lhs = 2 * mass(x, x) - mass(x, cls.up) - mass(x, cls.nocrit_cross)
    return lhs, len(nonroot_leaves(inst, cls.root))


# ---- CG arm ------------------------------------------------------------------


def inlink_to_uplink_transform(
    inst: TapInstance, root: int, x: Mapping[int, Fraction], cuts: Iterable[CgCut] = ()
) -> dict[int, Fraction]:
    """Replace every in-link {u,v} that is not an up-link by {u,a} and {v,a}, a = apex."""
    if not inst.shadow_closed:
        raise InputError("the in-link transform needs a shadow-closed instance")
    cls = classify(inst, root)
    r = inst.tree.rooted(root)
    y = {i: ZERO for i in range(len(inst.links))}
    for i, val in x.items():
        if not val:
            continue
        if i in cls.inlinks and i not in cls.up:
            l = inst.links[i]
            a = r.lca(l.u, l.v)
            for w in (l.u, l.v):
                y[inst.link_id(w, a)] += val
        else:
            y[i] += val
    if mass(y, cls.cross) != mass(x, cls.cross):
        raise InvariantViolation("transform changed the cross-link mass")
    if mass(y, cls.up) != 2 * mass(x, cls.inlinks) - mass(x, cls.up):
        raise InvariantViolation("transform produced the wrong up-link mass")
    for cut in cuts:
        if cut.violation(y) > 0:
            raise InvariantViolation("transformed point violates a CG cut")
    return y


@dataclasses.dataclass(frozen=True)
class CgRoundResult:
    solution: frozenset[int]
    y: dict[int, Fraction]
    bound: Fraction  # 2·c(x on L_in) − c(x on L_up) + c(x on L_cross)


def _support_closure(inst: TapInstance, support: Iterable[int]) -> int:
    masks = inst.link_masks
    sup = [masks[i] for i in support]
    out = 0
    for j, m in enumerate(masks):
        if any(m & s == m for s in sup):
            out |= 1 << j
    return out


def cg_round(
    inst: TapInstance, root: int, x: Mapping[int, Fraction], cuts: Iterable[CgCut] = ()
) -> CgRoundResult:
    """Round a point of the CG-closure through the up-link transform.

    The lossless step is done exactly: a cheapest cover using only the support
    of the transformed point and shadows of those links.
    """
    cls = classify(inst, root)
    y = inlink_to_uplink_transform(inst, root, x, cuts)
    costs = inst.costs
    cy = sum((costs[i] * v for i, v in y.items()), ZERO)
    bound = (
        2 * _cost_mass(costs, x, cls.inlinks)
        - _cost_mass(costs, x, cls.up)
        + _cost_mass(costs, x, cls.cross)
    )
    if cy > bound:
        raise InvariantViolation("transformed point costs more than the CG-arm bound")
    support = [i for i, v in y.items() if v]
    sol = brute_force_opt(inst, allowed=_support_closure(inst, support))
    if sol.value > cy:
        raise InvariantViolation(f"lossless rounding failed: {sol.value} > {cy}")
    if not is_feasible(inst, sol.link_ids):
        raise InvariantViolation("CG-arm output is not feasible")
    return CgRoundResult(sol.link_ids, y, bound)


def _cost_mass(costs: Sequence[Fraction], x: Mapping[int, Fraction], ids: Iterable[int]) -> Fraction:
    return sum((costs[i] * x.get(i, ZERO) for i in ids), ZERO)


# ---- sampling ----------------------------------------------------------------


def _uniform_below(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) built from 64-bit words, by rejection."""
    nbits = bound.bit_length()
    words = -(-nbits // 64)
    while True:
        v = 0
        for w in rng.bit_generator.random_raw(words, output=True).tolist():
            v = (v << 64) | w
        v &= (1 << nbits) - 1
        if v < bound:
            return v


def exact_choice(rng: np.random.Generator, weights: Sequence[Fraction]) -> int:
    """Index drawn with probability exactly weights[i] (weights sum to 1)."""
    denom = 1
    for w in weights:
        denom = math.lcm(denom, w.denominator)
    ints = [int(w * denom) for w in weights]
    if sum(ints) != denom:
        raise InputError("weights do not sum to 1")
    r = _uniform_below(rng, denom)
    for i, w in enumerate(ints):
        if r < w:
            return i
        r -= w
    raise AssertionError("unreachable")


def sample_columns(lp_sol: KWideLpSolution, rng: np.random.Generator) -> tuple[int, ...]:
    out = []
    for fam in lp_sol.families:
        i = fam.subtree_index
        out.append(exact_choice(rng, [lp_sol.lam[(i, c)] for c in range(len(fam.columns))]))
    return tuple(out)


def sample_locals(lp_sol: KWideLpSolution, seed: int) -> tuple[frozenset[int], ...]:
    """One column per subtree, drawn independently from λ with a seeded PCG64."""
    cols = sample_columns(lp_sol, np.random.default_rng(seed))
    return tuple(lp_sol.column(i, c) for i, c in enumerate(cols))


# ---- active vertices, matchings, rewiring -------------------------------------


def rewire_edges(cls: LinkClassification, critical_only: bool = True) -> frozenset[int]:
    return cls.crit_cross if critical_only else cls.cross


def active_vertices(
    inst: TapInstance,
    cls: LinkClassification,
    locals_: Sequence[Iterable[int]],
    *,
    edges: Iterable[int] | None = None,
) -> tuple[frozenset[int], dict[int, int]]:
    """Active vertices and their anchor links.

    A vertex of subtree i is active when the local cover of subtree i holds a
    link of ``edges`` (default: critical cross-links) incident to it.
    """
    allowed = cls.crit_cross if edges is None else frozenset(edges)
    top = inst.tree.rooted(cls.root).top
    anchor: dict[int, int] = {}
    for i, loc in enumerate(locals_):
        for l in loc:
            if l not in allowed:
                continue
            link = inst.links[l]
            for w in (link.u, link.v):
                if w == cls.root or top[w] != i:
                    continue
                if anchor.get(w, l) != l:
                    raise InvariantViolation(f"vertex {w} has two anchor links in subtree {i}")
                anchor[w] = l
    return frozenset(anchor), anchor


def _primes(count: int) -> list[int]:
    out: list[int] = []
    c = 2
    while len(out) < count:
        if all(c % p for p in out if p * p <= c):
            out.append(c)
        c += 1
    return out


def _incident(edges: Mapping[int, Edge]) -> dict[int, list[int]]:
    inc: dict[int, list[int]] = {}
    for e, (u, v) in edges.items():
        inc.setdefault(u, []).append(e)
        inc.setdefault(v, []).append(e)
    return inc


def sparsify_to_vertex(
    vertices: Iterable[int], edges: Mapping[int, Edge], x: Mapping[int, Fraction]
) -> dict[int, Fraction]:
    """A vertex z of {z ≥ 0 : z(δ(v)) = x(δ(v)) for all v}.

    The LP minimises Σ z_e / p_e where p_e is the e-th prime in sorted edge
    order, which singles out one basic optimum.
    """
    verts = sorted(set(vertices))
    order = sorted(edges, key=lambda e: (norm(*edges[e]), e))
    if any(x.get(e, ZERO) < 0 for e in order):
        raise InputError("x must be nonnegative")
    model = LpModel()
    primes = _primes(len(order))
    col = {e: model.add_var(f"z{e}", 0, None, Fraction(1, p)) for e, p in zip(order, primes)}
    inc = _incident(edges)
    for v in verts:
        es = inc.get(v, [])
        if es:
            model.add_row({col[e]: 1 for e in es}, "==", mass(x, es), name=f"deg_{v}")
    res = solve_lp(model)
    z = {e: res.x[col[e]] for e in order}
    for v in verts:
        es = inc.get(v, [])
        if mass(z, es) != mass(x, es):
            raise InvariantViolation(f"z leaves Q at vertex {v}")
    if sum(1 for v in z.values() if v) > len(verts):
        raise InvariantViolation("z has more support than vertices; not a vertex of Q")
    return z


def greedy_matching(edges: Mapping[int, Edge], z: Mapping[int, Fraction]) -> tuple[int, ...]:
    """Greedy matching on supp(z) by decreasing z; ties by (min endpoint, max endpoint)."""
    order = sorted(
        (e for e in edges if z.get(e, ZERO) > 0),
        key=lambda e: (-z[e], *norm(*edges[e]), e),
    )
    used: set[int] = set()
    out = []
    for e in order:
        u, v = edges[e]
        if u in used or v in used:
            continue
        used.update((u, v))
        out.append(e)
    return tuple(out)


@dataclasses.dataclass(frozen=True)
class MatchingCertificate:
    z: dict[int, Fraction]
    support_size: int
    num_vertices: int
    matching: tuple[int, ...]
    degree_mass: dict[int, Fraction]  # x(δ(v))
    expected_hits: Fraction  # Σ over M of x(δ(u))·x(δ(v))
    square_sum: Fraction  # Σ z_e²
    bound: Fraction  # x(E)² / |V|
    split_bound: Fraction  # z(E1)²/|E1| + z(E2)²/|E2| for the given split
    split: tuple[frozenset[int], frozenset[int]]


def _sq_over(total: Fraction, size: int) -> Fraction:
    return total * total / size if size else ZERO


def matching_certificate(
    vertices: Iterable[int],
    edges: Mapping[int, Edge],
    x: Mapping[int, Fraction],
    two_leaf: Iterable[int] = (),
) -> MatchingCertificate:
    """Vertex of Q, greedy matching and the chain of bounds, all checked exactly.

    ``two_leaf`` selects E2 (edges whose endpoints are both leaves); E1 is the
    rest of supp(z).
    """
    verts = sorted(set(vertices))
    z = sparsify_to_vertex(verts, edges, x)
    m = greedy_matching(edges, z)
    inc = _incident(edges)
    deg = {v: mass(x, inc.get(v, ())) for v in verts}
    hits = sum((deg[edges[e][0]] * deg[edges[e][1]] for e in m), ZERO)
    squares = sum((v * v for v in z.values()), ZERO)
    if hits < squares:
        raise InvariantViolation("greedy matching misses Σ z_e²")
    support = frozenset(e for e, v in z.items() if v)
    total = mass(x, edges)
    bound = _sq_over(total, len(verts))
    if squares * len(support) < total * total:
        raise InvariantViolation("Cauchy-Schwarz step failed")
    if hits < bound:
        raise InvariantViolation("matching expectation below x(E)²/|V|")
    e2 = support & frozenset(two_leaf)
    e1 = support - e2
    split = _sq_over(mass(z, e1), len(e1)) + _sq_over(mass(z, e2), len(e2))
    if squares < split:
        raise InvariantViolation("refined split bound exceeds Σ z_e²")
    return MatchingCertificate(z, len(support), len(verts), m, deg, hits, squares, bound, split, (e1, e2))


def rewire(
    inst: TapInstance,
    locals_: Sequence[Iterable[int]],
    matching: Iterable[int],
    anchors: Mapping[int, int],
    root: int,
) -> frozenset[int]:
    """B = union over i of (L_i minus the anchors of matched vertices of subtree i), plus M.

    A cross-link can be the anchor of both its endpoints. It is then dropped
    only from the local covers whose matched vertex it anchors.
    """
    m = frozenset(matching)
    top = inst.tree.rooted(root).top
    removed: dict[int, set[int]] = {}
    seen: set[int] = set()
    for e in m:
        l = inst.links[e]
        for w in (l.u, l.v):
            if w not in anchors:
                raise InvariantViolation(f"matching link {e} has an inactive endpoint")
            if w in seen:
                raise InvariantViolation("M is not a matching")
            seen.add(w)
            removed.setdefault(top[w], set()).add(anchors[w])
    b: set[int] = set(m)
    total = 0
    for i, loc in enumerate(locals_):
        loc = frozenset(loc)
        total += len(loc)
        gone = removed.get(i, set())
        if not gone <= loc:
            raise InvariantViolation(f"an anchor is missing from local cover {i}")
        b |= loc - gone
    b = frozenset(b)
    if not is_feasible(inst, b):
        raise InvariantViolation("rewiring lost feasibility")
    if len(b) > total - len(m):
        raise InvariantViolation("rewiring saved less than one link per matched pair")
    return b


def rewire_gains(
    inst: TapInstance, matching: Iterable[int], anchors: Mapping[int, int]
) -> list[tuple[int, int, int, Fraction]]:
    """(ℓ*, ℓ_u, ℓ_v, c(ℓ*) − c(ℓ_u) − c(ℓ_v)) for every executed rewiring."""
    out = []
    for e in sorted(matching):
        l = inst.links[e]
        a, b = anchors[l.u], anchors[l.v]
        out.append((e, a, b, l.cost - inst.links[a].cost - inst.links[b].cost))
    return out


# ---- derandomisation ----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RewireState:
    locals: tuple[frozenset[int], ...]
    active: frozenset[int]
    anchor: dict[int, int]
    matching: frozenset[int]  # M restricted to pairs of active vertices
    result: frozenset[int]


@dataclasses.dataclass(frozen=True)
class DerandResult:
    state: RewireState
    columns: tuple[int, ...]
    phi: tuple[Fraction, ...]  # tracked conditional expectation, before and after each step
    certificate: MatchingCertificate
    full_matching: tuple[int, ...]
    edges: frozenset[int]
    gain: Fraction

    @property
    def solution(self) -> frozenset[int]:
        return self.state.result


class _Conditional:
    """Φ = Σ_i E[c(L_i)] − gain · Σ_{uv ∈ M} Pr[u∈A]·Pr[v∈A] under partial fixings."""

    def __init__(self, inst, lp_sol, edges, matching, gain):
        self.lp = lp_sol
        self.gain = gain
        cls = lp_sol.classification
        top = inst.tree.rooted(cls.root).top
        self.top = top
        self.matching = [inst.links[e].pair for e in matching]
        self.cost: list[list[Fraction]] = []
        self.act: list[list[frozenset[int]]] = []
        self.mean_cost: list[Fraction] = []
        self.marginal: dict[int, Fraction] = {}
        for fam in lp_sol.families:
            i = fam.subtree_index
            costs, acts = [], []
            exp = ZERO
            for c, (R, cols) in enumerate(fam.columns):
                cc = inst.cost_of(cols)
                act = frozenset(
                    w for l in R if l in edges for w in inst.links[l].pair if top[w] == i
                )
                costs.append(cc)
                acts.append(act)
                lam = lp_sol.lam[(i, c)]
                exp += lam * cc
                for w in act:
                    self.marginal[w] = self.marginal.get(w, ZERO) + lam
            self.cost.append(costs)
            self.act.append(acts)
            self.mean_cost.append(exp)

    def prob(self, w: int, fixed: Mapping[int, int]) -> Fraction:
        i = self.top[w]
        if i in fixed:
            return Fraction(1) if w in self.act[i][fixed[i]] else ZERO
        return self.marginal.get(w, ZERO)

    def value(self, fixed: Mapping[int, int]) -> Fraction:
        total = sum(
            (self.cost[i][fixed[i]] if i in fixed else self.mean_cost[i] for i in range(len(self.cost))),
            ZERO,
        )
        hits = sum((self.prob(u, fixed) * self.prob(v, fixed) for u, v in self.matching), ZERO)
        return total - self.gain * hits


def matching_graph(
    inst: TapInstance, cls: LinkClassification, edges: Iterable[int]
) -> tuple[list[int], dict[int, Edge]]:
    es = {e: inst.links[e].pair for e in sorted(edges)}
    verts = sorted(cls.critical_vertices)
    return verts, es


def derandomized_round(
    inst: TapInstance,
    lp_sol: KWideLpSolution,
    *,
    edges: Iterable[int] | None = None,
    critical_only: bool = True,
    gain: Fraction = Fraction(1),
) -> DerandResult:
    """Rewiring arm with columns fixed by conditional expectations.

    ``edges`` restricts the rewiring graph (default: critical cross-links, or
    all cross-links when ``critical_only`` is False). ``gain`` is the saving
    credited per rewired pair in the tracked expectation.
    """
    cls = lp_sol.classification
    if edges is None:
        edges = rewire_edges(cls, critical_only)
    edge_set = frozenset(edges)
    if critical_only:
        verts, es = matching_graph(inst, cls, edge_set)
    else:
        es = {e: inst.links[e].pair for e in sorted(edge_set)}
        verts = sorted(v for v in range(inst.n) if v != cls.root)
    leaves = set(nonroot_leaves(inst, cls.root))
    two_leaf = [e for e, (u, v) in es.items() if u in leaves and v in leaves]
    cert = matching_certificate(verts, es, lp_sol.x, two_leaf)
    if len(cert.split[1]) > len(leaves):
        raise InvariantViolation("more leaf-to-leaf support links than leaves")
    cond = _Conditional(inst, lp_sol, edge_set, cert.matching, gain)
    for w in verts:
        if cond.marginal.get(w, ZERO) != cert.degree_mass[w]:
            raise InvariantViolation(f"Pr[{w} active] differs from x(δ({w}))")
    fixed: dict[int, int] = {}
    phi = [cond.value(fixed)]
    start = sum(cond.mean_cost, ZERO) - gain * cert.expected_hits
    if phi[0] != start:
        raise InvariantViolation("initial conditional expectation is off")
    for fam in lp_sol.families:
        i = fam.subtree_index
        best = None
        for c in range(len(fam.columns)):
            if not lp_sol.lam[(i, c)]:
                continue
            fixed[i] = c
            v = cond.value(fixed)
            if best is None or v < best[0]:
                best = (v, c)
        assert best is not None
        fixed[i] = best[1]
        if best[0] > phi[-1]:
            raise InvariantViolation(f"conditioning on subtree {i} increased the expectation")
        phi.append(best[0])
    columns = tuple(fixed[i] for i in range(len(lp_sol.families)))
    locals_ = tuple(lp_sol.column(i, c) for i, c in enumerate(columns))
    active, anchor = active_vertices(inst, cls, locals_, edges=edge_set)
    m_act = frozenset(e for e in cert.matching if set(es[e]) <= active)
    b = rewire(inst, locals_, m_act, anchor, cls.root)
    final = sum((inst.cost_of(loc) for loc in locals_), ZERO) - gain * len(m_act)
    if final != phi[-1]:
        raise InvariantViolation("fully conditioned expectation differs from the realised value")
    realised = sum((inst.cost_of(loc) for loc in locals_), ZERO) + sum(
        (g for *_, g in rewire_gains(inst, m_act, anchor)), ZERO
    )
    if inst.cost_of(b) > realised or realised > final:
        raise InvariantViolation("rewired cost exceeds the tracked expectation")
    state = RewireState(locals_, active, anchor, m_act, b)
    return DerandResult(state, columns, tuple(phi), cert, cert.matching, edge_set, gain)


def sampled_round(
    inst: TapInstance, lp_sol: KWideLpSolution, seed: int, *, critical_only: bool = True
) -> RewireState:
    """Randomised rewiring: sampled locals, the marginal matching, then rewiring."""
    cls = lp_sol.classification
    edge_set = rewire_edges(cls, critical_only)
    verts, es = matching_graph(inst, cls, edge_set)
    if not critical_only:
        verts = sorted(v for v in range(inst.n) if v != cls.root)
    cert = matching_certificate(verts, es, lp_sol.x)
    locals_ = sample_locals(lp_sol, seed)
    active, anchor = active_vertices(inst, cls, locals_, edges=edge_set)
    m_act = frozenset(e for e in cert.matching if set(es[e]) <= active)
    return RewireState(locals_, active, anchor, m_act, rewire(inst, locals_, m_act, anchor, cls.root))


# ---- best of two ----------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class KWideRoundResult:
    solution: frozenset[int]
    arm: str  # "cg" or "rewire"
    cg: CgRoundResult
    derand: DerandResult
    lp: KWideLpSolution
    alpha: AlphaProfile
    bounds: dict[str, Fraction]

    def report(self) -> dict:
        return {
            "lp_value": str(self.lp.objective_value),
            "alpha": self.alpha.as_dict(),
            "cg_size": len(self.cg.solution),
            "rewire_size": len(self.derand.solution),
            "matching_size": len(self.derand.state.matching),
            "chosen_arm": self.arm,
            "cg_rounds": self.lp.rounds,
            "bounds": {k: str(v) for k, v in self.bounds.items()},
        }


def round_k_wide(
    inst: TapInstance,
    root: int,
    k: int,
    *,
    lp_sol: KWideLpSolution | None = None,
    critical_only: bool = True,
) -> KWideRoundResult:
    """Solve the k-wide-LP and return the cheaper of the two rounded solutions."""
    if lp_sol is None:
        lp_sol = solve_k_wide_lp(inst, root, k)
    cls = lp_sol.classification
    x = lp_sol.x
    total = mass(x, x)
    cg = cg_round(inst, root, x, lp_sol.cuts)
    der = derandomized_round(inst, lp_sol, critical_only=critical_only)
    a, b = cg.solution, der.solution
    if inst.cost_of(b) < inst.cost_of(a):
        arm, sol = "rewire", b
    else:
        arm, sol = "cg", a
    if not verify_uplink_domination(inst, lp_sol):
        raise InvariantViolation("x(L_up) < x(L_cross^no-crit)")
    lhs, leaves = leaf_inequality(inst, lp_sol)
    if lhs < leaves:
        raise InvariantViolation("leaf-counting inequality fails")
    if inst.n > 1 and 2 * leaves <= len(cls.critical_vertices):
        raise InvariantViolation("more than 2K critical vertices")
    rewire_bound = mass(x, cls.inlinks) + 2 * mass(x, cls.cross) - der.certificate.expected_hits
    bounds = {
        "lp": lp_sol.objective_value,
        "cg": cg.bound,
        "rewire": rewire_bound,
        "rewire_plain": mass(x, cls.inlinks) + 2 * mass(x, cls.cross) - der.certificate.bound,
    }
    if inst.is_unit_cost:
        if len(a) > cg.bound:
            raise InvariantViolation("CG arm exceeds its bound")
        if len(b) > der.phi[0] or der.phi[0] != rewire_bound:
            raise InvariantViolation("rewiring arm exceeds its bound")
        best = min(cg.bound, rewire_bound)
        if len(sol) > best:
            raise InvariantViolation("best-of-two exceeds the analysed bound")
        if 16 * best * best > 34 * total * total:
            raise InvariantViolation("analysed bound exceeds √34/4 · x(L)")
    alpha = alpha_profile(x, cls)
    return KWideRoundResult(sol, arm, cg, der, lp_sol, alpha, bounds)


# ---- worst-case calculus ----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CalculusResult:
    kind: str
    point: dict[str, float]
    value: float
    grid_value: float  # best value on the grid before refinement
    ridge_gap: float  # |f1 - f2| at the returned point


def refined_bound_terms(x, y):
    f1 = 1 - x
    f2 = x - x**2 * (1 - 2 * y + 2 * y**2) / (2 - x * y)
    return f1, f2


def three_class_bound_terms(up, crit, nocrit):
    cross = crit + nocrit
    return 1 - cross - up, cross - crit**2 / (4 - 2 * up - 2 * nocrit)


def _a1_ok(p):
    up, crit, nocrit = p[..., 0], p[..., 1], p[..., 2]
    return (up >= nocrit) & (up + crit + nocrit <= 1)


_CALCULUS = {
    # terms, variable names, box, linear feasibility as (coeffs, rhs) meaning coeffs·p <= rhs
    "lemma_a1": (
        three_class_bound_terms,
        ("alpha_up", "alpha_crit", "alpha_nocrit"),
        [(0.0, 1.0)] * 3,
        [((-1.0, 0.0, 1.0), 0.0), ((1.0, 1.0, 1.0), 1.0)],
    ),
    "appendix_e": (refined_bound_terms, ("x", "y"), [(0.0, 1.0), (0.0, 0.5)], []),
}


def bound_calculus(kind: str, grid_step: Fraction | float = Fraction(1, 1000)) -> CalculusResult:
    """Maximise 1 + min{f1, f2} over the stated domain.

    A grid search (spacing ``grid_step`` for two variables, max(grid_step,
    1/200) for three) finds the basin; SLSQP on the epigraph form
    max t s.t. t <= f1, t <= f2 then polishes the point.
    """
    from scipy.optimize import minimize

    if kind not in _CALCULUS:
        raise InputError(f"unknown calculus kind {kind!r}")
    step = float(grid_step)
    if step > 1 / 1000:
        raise InputError("grid_step must be at most 1/1000")
    terms, names, box, lin = _CALCULUS[kind]
    dim = len(box)
    if dim > 2:
        step = max(step, 1 / 200)
    axes = [np.linspace(lo, hi, int(round((hi - lo) / step)) + 1) for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    ok = np.ones(len(pts), dtype=bool)
    for coeffs, rhs in lin:
        ok &= pts @ np.array(coeffs) <= rhs + 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        f1, f2 = terms(*pts.T)
        vals = np.where(ok, np.minimum(f1, f2), -np.inf)
    j = int(np.argmax(vals))
    start = np.append(pts[j], vals[j])

    cons = [
        {"type": "ineq", "fun": lambda q: terms(*q[:-1])[0] - q[-1]},
        {"type": "ineq", "fun": lambda q: terms(*q[:-1])[1] - q[-1]},
    ]
    for coeffs, rhs in lin:
        cons.append({"type": "ineq", "fun": lambda q, c=np.array(coeffs), r=rhs: r - c @ q[:-1]})
    res = minimize(
        lambda q: -q[-1],
        start,
        jac=lambda q: np.append(np.zeros(dim), -1.0),
        bounds=list(box) + [(None, None)],
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    point = np.clip(res.x[:-1], [b[0] for b in box], [b[1] for b in box])
    a, b = terms(*point)
    value = 1 + min(a, b)
    if value < 1 + vals[j]:  # refinement must not lose ground
        point, value = pts[j], 1 + vals[j]
        a, b = terms(*point)
    return CalculusResult(
        kind,
        dict(zip(names, map(float, point))),
        float(value),
        float(1 + vals[j]),
        float(abs(a - b)),
    )
