"""Splitting a tree along light edges and the cutting-plane reduction to k-wide pieces.

Given a cut-LP point x, the tree is cut at γ-light edges (γ = 1/√k) into
pieces that share vertices but not edges. In each piece, the ζ-heavy edges
(ζ = √k/4) around a well-chosen vertex form a core. Contracting the core
leaves a k-wide instance rooted at the contracted node.

``reduce_to_k_wide`` runs a cutting-plane loop: it solves an LP, decomposes
the optimum, lets an inner k-wide solver cover every piece, and adds a
lower-bound cut whenever a piece turned out more expensive than the LP paid
for it. A binary search over the budget ν finds the smallest budget at which
no cut is found. The pieces' solutions plus an exact cover of the cores form
the answer.

Irrational thresholds are compared through squares: x ≤ y/√k is checked as
x²·k ≤ y² for nonnegative x, y.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Protocol

from treeaug.config import LIMITS
from treeaug.errors import InputError, InvariantViolation
from treeaug.exact import brute_force_opt
from treeaug.instance import (
    Link,
    TapInstance,
    Tree,
    bits,
    is_feasible,
    is_k_wide,
    norm,
    principal_leaf_counts,
    shadow_complete,
)
from treeaug.lp.cuts import build_cut_lp
from treeaug.lp.model import solve_lp

ZERO = Fraction(0)


# ---- masses and thresholds ------------------------------------------------------


class Weigher:
    """x-mass of a link bitmask, plain or cost-weighted."""

    def __init__(self, inst: TapInstance, x: Mapping[int, Fraction], weighted: bool = False):
        self.inst = inst
        self.x = x
        self.weighted = weighted
        self._cache: dict[int, Fraction] = {}

    def __call__(self, link_mask: int) -> Fraction:
        got = self._cache.get(link_mask)
        if got is None:
            if self.weighted:
                got = self.inst.cost_mass(self.x, link_mask)
            else:
                got = self.inst.mass(self.x, link_mask)
            self._cache[link_mask] = got
        return got

    def total(self) -> Fraction:
        return self((1 << len(self.inst.links)) - 1)


def at_most_over_sqrt(a: Fraction, b: Fraction, k: int) -> bool:
    """a ≤ b/√k for a, b ≥ 0."""
    return a * a * k <= b * b


def at_least_sqrt_over_4(a: Fraction, k: int) -> bool:
    """a ≥ √k/4 for a ≥ 0."""
    return 16 * a * a >= k


# ---- tree pieces --------------------------------------------------------------------


def piece_vertices(tree: Tree, edge_mask: int) -> frozenset[int]:
    out: set[int] = set()
    for e in bits(edge_mask):
        out.update(tree.edge_of(e))
    return frozenset(out)


def side_edges(tree: Tree, edge_mask: int, e: int, start: int) -> int:
    """E_S(e, start): edges of S reachable from ``start`` without using e."""
    rest = edge_mask & ~(1 << e)
    adj: dict[int, list[tuple[int, int]]] = {}
    for f in bits(rest):
        a, b = tree.edge_of(f)
        adj.setdefault(a, []).append((b, f))
        adj.setdefault(b, []).append((a, f))
    out = 0
    seen = {start}
    stack = [start]
    while stack:
        w = stack.pop()
        for nb, f in adj.get(w, ()):
            out |= 1 << f
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return out


def side_mass(inst: TapInstance, weigh: Weigher, edge_mask: int, e: int, start: int) -> Fraction:
    """x(cov(E_S(e, start)) ∖ cov(e))."""
    side = side_edges(inst.tree, edge_mask, e, start)
    return weigh(inst.cov_of_mask(side) & ~inst.cov_masks[e])


def is_gamma_light(
    inst: TapInstance,
    x: Mapping[int, Fraction],
    subtree: int | tuple[object, int],
    edge: int,
    gamma: Fraction | None = None,
    *,
    k: int | None = None,
    weighted: bool = False,
    weigh: Weigher | None = None,
) -> bool:
    """x(cov(e)) ≤ γ · min of the two side masses inside the subtree.

    ``subtree`` is an edge bitmask or a (vertices, edge mask) pair. Pass either a
    rational ``gamma`` or ``k`` for γ = 1/√k; both comparisons are exact.
    """
    if (gamma is None) == (k is None):
        raise InputError("pass exactly one of gamma and k")
    if gamma is not None and gamma <= 0:
        raise InputError("gamma must be positive")
    mask = subtree if isinstance(subtree, int) else subtree[1]
    if not (mask >> edge) & 1:
        raise InputError("edge is not in the subtree")
    weigh = weigh or Weigher(inst, x, weighted)
    u, v = inst.tree.edge_of(edge)
    lhs = weigh(inst.cov_masks[edge])
    rhs = min(side_mass(inst, weigh, mask, edge, u), side_mass(inst, weigh, mask, edge, v))
    if gamma is not None:
        return lhs <= Fraction(gamma) * rhs
    return at_most_over_sqrt(lhs, rhs, k)


def light_edges(inst: TapInstance, weigh: Weigher, mask: int, k: int) -> list[int]:
    return [e for e in bits(mask) if is_gamma_light(inst, weigh.x, mask, e, k=k, weigh=weigh)]


def split_pieces(tree: Tree, mask: int, e: int) -> tuple[int, int]:
    """(T^u, T^v) for e = {u,v}: the u-side plus e, and the v-side."""
    u, v = tree.edge_of(e)
    return side_edges(tree, mask, e, u) | (1 << e), side_edges(tree, mask, e, v)


# ---- decomposition record -----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Decomposition:
    k: int  # γ = 1/√k, ζ = √k/4
    subtrees: tuple[tuple[frozenset[int], int], ...]  # (V_i, E_i mask)
    split_edges: tuple[int | None, ...]  # e_i, None for the last piece
    cores: tuple[int, ...] = ()  # H_i masks
    core_vertices: tuple[frozenset[int], ...] = ()
    core_roots: tuple[int, ...] = ()
    split_tree: tuple[tuple[int, int], ...] = ()  # pieces sharing a vertex
    weighted: bool = False

    @property
    def q(self) -> int:
        return len(self.subtrees)

    @property
    def gamma(self) -> Fraction | float:
        """1/√k; exact when k is a perfect square."""
        r = math.isqrt(self.k)
        return Fraction(1, r) if r * r == self.k else 1 / math.sqrt(self.k)

    @property
    def zeta(self) -> Fraction | float:
        """√k/4; exact when k is a perfect square."""
        r = math.isqrt(self.k)
        return Fraction(r, 4) if r * r == self.k else math.sqrt(self.k) / 4

    def to_json(self, tree: Tree) -> dict:
        return {
            "k": self.k,
            "weighted": self.weighted,
            "subtrees": [
                {"vertices": sorted(vs), "edges": [list(tree.edge_of(e)) for e in bits(m)]}
                for vs, m in self.subtrees
            ],
            "split_edges": [None if e is None else list(tree.edge_of(e)) for e in self.split_edges],
            "cores": [[list(tree.edge_of(e)) for e in bits(h)] for h in self.cores],
            "core_roots": list(self.core_roots),
        }

    def dumps(self, tree: Tree) -> str:
        return json.dumps(self.to_json(tree), indent=2)


def split_decomposition(
    inst: TapInstance, x: Mapping[int, Fraction], k: int, *, weighted: bool = False
) -> Decomposition:
    """Split at critical γ-light edges until no piece has a light edge.

    Among the light edges of the current piece, edges are scanned by the size
    of their smaller piece (then by id). The first edge with an unsplittable
    piece is used; that piece is final and is charged the split edge.
    """
    if k < 1:
        raise InputError("k must be positive")
    tree = inst.tree
    weigh = Weigher(inst, x, weighted)
    finals: list[tuple[int, int | None]] = []
    current = tree.full_mask
    while True:
        light = light_edges(inst, weigh, current, k)
        if not light:
            break

        def smaller(e: int) -> int:
            a, b = split_pieces(tree, current, e)
            return min(a.bit_count(), b.bit_count())

        chosen = None
        for e in sorted(light, key=lambda e: (smaller(e), e)):
            a, b = split_pieces(tree, current, e)
            for piece, other in sorted(((a, b), (b, a)), key=lambda p: (p[0].bit_count(), p[0])):
                if not light_edges(inst, weigh, piece, k):
                    chosen = (e, piece, other)
                    break
            if chosen:
                break
        if chosen is None:
            raise InvariantViolation("no critical light edge although a light edge exists")
        e, piece, other = chosen
        finals.append((piece, e))
        current = other
    finals.append((current, None))
    subtrees = tuple((piece_vertices(tree, m), m) for m, _ in finals)
    split = tuple(e for _, e in finals)
    st = []
    for i in range(len(subtrees)):
        for j in range(i + 1, len(subtrees)):
            if subtrees[i][0] & subtrees[j][0]:
                st.append((i, j))
    dec = Decomposition(k, subtrees, split, split_tree=tuple(st), weighted=weighted)
    check_split(inst, x, dec)
    return dec


def check_split(inst: TapInstance, x: Mapping[int, Fraction], dec: Decomposition) -> None:
    """Partition, disjointness of the charged link sets and the split budgets."""
    weigh = Weigher(inst, x, dec.weighted)
    seen = 0
    for _, m in dec.subtrees:
        if m & seen:
            raise InvariantViolation("pieces share an edge")
        seen |= m
    if seen != inst.tree.full_mask:
        raise InvariantViolation("pieces do not cover the tree")
    charged = []
    for (_, m), e in zip(dec.subtrees, dec.split_edges):
        c = inst.cov_of_mask(m)
        if e is not None:
            c &= ~inst.cov_masks[e]
        charged.append(c)
    for i in range(len(charged)):
        for j in range(i + 1, len(charged)):
            if charged[i] & charged[j]:
                raise InvariantViolation(f"charged link sets of pieces {i} and {j} overlap")
    total = weigh.total()
    split_mass = sum((weigh(inst.cov_masks[e]) for e in dec.split_edges if e is not None), ZERO)
    if not at_most_over_sqrt(split_mass, total, dec.k):
        raise InvariantViolation("split edges carry more than x(L)/√k")
    piece_mass = sum((weigh(inst.cov_of_mask(m)) for _, m in dec.subtrees), ZERO)
    # Σ x(cov(E_i)) ≤ (1 + 2/√k) x(L)  ⇔  Σ - x(L) ≤ 2 x(L)/√k
    if piece_mass < total or not at_most_over_sqrt(piece_mass - total, 2 * total, dec.k):
        raise InvariantViolation("pieces cost more than (1 + 2γ)·x(L)")


# ---- heavy cores ----------------------------------------------------------------------


def core_root(inst: TapInstance, weigh: Weigher, mask: int) -> int:
    """Smallest vertex that lies on the heavier side of every edge of the piece.

    For each edge the two side masses are compared. The edge is oriented from
    the heavier side to the lighter one (both ways on ties). The returned vertex
    has every edge of the piece pointing away from it. This gives the root
    property at its own edges and the monotone version further out.
    """
    verts = piece_vertices(inst.tree, mask)
    allowed = set(verts)
    for e in bits(mask):
        u, v = inst.tree.edge_of(e)
        su = side_mass(inst, weigh, mask, e, u)
        sv = side_mass(inst, weigh, mask, e, v)
        if su == sv:
            continue
        heavy = u if su > sv else v
        side = piece_vertices(inst.tree, side_edges(inst.tree, mask, e, heavy)) | {heavy}
        allowed &= side
    if not allowed:
        raise InvariantViolation("no vertex is on the heavy side of every edge")
    return min(allowed)


def heavy_core(
    inst: TapInstance, x: Mapping[int, Fraction], subtree: tuple[frozenset[int], int], k: int,
    *, weighted: bool = False,
) -> tuple[int, int, frozenset[int]]:
    """(r_i, H_i, W_i) for one unsplittable piece.

    H_i is the component around r_i of the ζ-heavy edges. The heaviness test
    always uses the plain x-mass, also for weighted decompositions.
    """
    verts, mask = subtree
    weigh = Weigher(inst, x, weighted)
    plain = weigh if not weighted else Weigher(inst, x, False)
    if mask == 0:
        r = min(verts)
        return r, 0, frozenset({r})
    r = core_root(inst, weigh, mask)
    heavy = [e for e in bits(mask) if at_least_sqrt_over_4(plain(inst.cov_masks[e]), k)]
    adj: dict[int, list[tuple[int, int]]] = {}
    for e in heavy:
        a, b = inst.tree.edge_of(e)
        adj.setdefault(a, []).append((b, e))
        adj.setdefault(b, []).append((a, e))
    core, w = 0, {r}
    stack = [r]
    while stack:
        a = stack.pop()
        for b, e in adj.get(a, ()):
            core |= 1 << e
            if b not in w:
                w.add(b)
                stack.append(b)
    return r, core, frozenset(w)


def check_root_property(inst: TapInstance, weigh: Weigher, mask: int, r: int) -> bool:
    """x(cov(E(e,w)) ∖ cov(e)) ≤ x(cov(E(e,r)) ∖ cov(e)) for every edge e = {r, w}."""
    for e in bits(mask):
        a, b = inst.tree.edge_of(e)
        if r not in (a, b):
            continue
        w = b if a == r else a
        if side_mass(inst, weigh, mask, e, w) > side_mass(inst, weigh, mask, e, r):
            return False
    return True


def decompose(
    inst: TapInstance, x: Mapping[int, Fraction], k: int, *, weighted: bool = False
) -> Decomposition:
    """Full decomposition: split pieces plus their heavy cores."""
    dec = split_decomposition(inst, x, k, weighted=weighted)
    roots, cores, cverts = [], [], []
    weigh = Weigher(inst, x, weighted)
    for piece in dec.subtrees:
        r, h, w = heavy_core(inst, x, piece, k, weighted=weighted)
        if not check_root_property(inst, weigh, piece[1], r):
            raise InvariantViolation("core root violates the root property")
        roots.append(r)
        cores.append(h)
        cverts.append(w)
    return dataclasses.replace(
        dec, cores=tuple(cores), core_vertices=tuple(cverts), core_roots=tuple(roots)
    )


# ---- contracted sub-instances ------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SubInstance:
    """T_i/H_i with links restricted to the piece; vertex 0 is the contracted core."""

    instance: TapInstance  # shadow-closed
    vertex_map: dict[int, int]  # original vertex -> sub vertex
    target: int  # original edge mask E_i ∖ H_i

    def to_original(self, ids: Iterable[int]) -> frozenset[int]:
        return self.instance.to_origin(ids)


def contracted_instance(
    inst: TapInstance, piece: tuple[frozenset[int], int], core: int, core_verts: frozenset[int]
) -> SubInstance:
    tree = inst.tree
    verts, mask = piece
    target = mask & ~core
    vmap = {w: 0 for w in core_verts}
    for w in sorted(verts - core_verts):
        vmap[w] = len(set(vmap.values()))
    n = len(set(vmap.values()))
    edges = [norm(vmap[a], vmap[b]) for a, b in tree.edges_of(target)]
    sub_tree = Tree(n, edges, 0)
    best: dict[tuple[int, int], tuple[Fraction, int]] = {}
    for i, m in enumerate(inst.link_masks):
        part = m & target
        if not part:
            continue
        # endpoints of the sub-path P_ℓ ∩ E_i inside the piece
        deg: dict[int, int] = {}
        for e in bits(m & mask):
            for w in tree.edge_of(e):
                deg[w] = deg.get(w, 0) + 1
        ends = [w for w, d in deg.items() if d == 1]
        a, b = vmap[ends[0]], vmap[ends[1]]
        if a == b:
            raise InvariantViolation("restricted link collapsed although it covers a target edge")
        key = norm(a, b)
        cand = (inst.links[i].cost, i)
        if key not in best or cand < best[key]:
            best[key] = cand
    links = [Link(u, v, c, i) for (u, v), (c, i) in sorted(best.items())]
    sub = shadow_complete(TapInstance(sub_tree, tuple(links)))
    return SubInstance(sub, vmap, target)


# ---- inner k-wide solvers -----------------------------------------------------------


class InnerSolver(Protocol):
    name: str
    alpha: Fraction  # rational upper bound on the approximation ratio

    def solve(self, sub: TapInstance, k: int) -> frozenset[int]: ...


class ExactInner:
    name = "exact"
    alpha = Fraction(1)

    def solve(self, sub: TapInstance, k: int) -> frozenset[int]:
        return brute_force_opt(sub).link_ids


class RoundingInner:
    """The k-wide rounding; exact search when Λ would be too wide to enumerate."""

    name = "rounding"
    alpha = Fraction(1458, 1000)

    def __init__(self) -> None:
        self.fallbacks = 0
        self.reports: list[dict] = []

    def solve(self, sub: TapInstance, k: int) -> frozenset[int]:
        from treeaug.rounding import round_k_wide

        if not sub.tree.edges:
            return frozenset()
        width = max(principal_leaf_counts(sub.tree, 0), default=0)
        if min(k, width) > LIMITS.lambda_max_width:
            self.fallbacks += 1
            return brute_force_opt(sub).link_ids
        res = round_k_wide(sub, 0, k)
        self.reports.append(res.report())
        return res.solution


# ---- heavy-edge cover -----------------------------------------------------------------


def cover_heavy_edges(
    inst: TapInstance, x: Mapping[int, Fraction], cores: Iterable[int], k: int
) -> frozenset[int]:
    """Cheapest link set covering every core edge, checked against (2/ζ)·c(x)."""
    target = 0
    for h in cores:
        target |= h
    if not target:
        return frozenset()
    sol = brute_force_opt(inst, target).link_ids
    cx = sum((inst.links[i].cost * v for i, v in x.items()), ZERO)
    # cost ≤ (2/ζ) c·x = 8 c·x / √k
    if not at_most_over_sqrt(inst.cost_of(sol), 8 * cx, k):
        raise InvariantViolation("heavy-edge cover exceeds (2/ζ)·c(x)")
    return sol


# ---- partial separation oracle and reduction ---------------------------------------------


@dataclasses.dataclass(frozen=True)
class PieceCut:
    links: frozenset[int]  # cov(E_i ∖ H_i)
    rhs: Fraction
    target: int  # E_i ∖ H_i


@dataclasses.dataclass(frozen=True)
class OracleOutcome:
    kind: str  # "budget", "cover", "piece" or "none"
    cut: PieceCut | None = None
    decomposition: Decomposition | None = None
    local_solutions: tuple[frozenset[int], ...] = ()
    edge: int | None = None


class _InnerCache:
    def __init__(self, inst: TapInstance, inner: InnerSolver, width: int):
        self.inst, self.inner, self.k = inst, inner, width
        self.memo: dict[tuple[int, int, frozenset[int]], frozenset[int]] = {}

    def solve(self, piece, core, core_verts) -> frozenset[int]:
        key = (piece[1], core, core_verts)
        got = self.memo.get(key)
        if got is None:
            sub = contracted_instance(self.inst, piece, core, core_verts)
            if not is_k_wide(sub.instance.tree, 0, self.k):
                raise InvariantViolation("T_i/H_i is not k-wide")
            ids = self.inner.solve(sub.instance, self.k)
            if not is_feasible(sub.instance, ids):
                raise InvariantViolation(f"inner solver {self.inner.name} returned an infeasible set")
            got = sub.to_original(ids)
            if self.inst.covered_mask(got) & sub.target != sub.target:
                raise InvariantViolation("mapped local solution misses a piece edge")
            self.memo[key] = got
        return got


def reduction_width(inst: TapInstance, k: int, weighted: bool) -> int:
    """Leaf bound of the contracted pieces: k, or ⌊kΔ⌋ for weighted splitting."""
    if not weighted or not inst.links:
        return k
    costs = inst.costs
    return math.floor(k * max(costs) / min(costs))


def _piece_rhs(inst: TapInstance, local: frozenset[int], alpha: Fraction) -> Fraction:
    if inst.is_unit_cost:
        return Fraction(math.ceil(Fraction(len(local)) / alpha))
    return inst.cost_of(local) / alpha


def partial_separation_oracle(
    inst: TapInstance,
    y: Mapping[int, Fraction],
    nu: Fraction | int,
    k: int,
    inner: InnerSolver,
    *,
    weighted: bool = False,
    workers: int = 1,
    _cache: _InnerCache | None = None,
) -> OracleOutcome:
    """Budget row, covering rows, then piece lower bounds from the inner solver."""
    weigh = Weigher(inst, y, weighted or not inst.is_unit_cost)
    if weigh.total() > nu:
        return OracleOutcome("budget")
    for e in bits(inst.tree.full_mask):
        if inst.mass(y, inst.cov_masks[e]) < 1:
            return OracleOutcome("cover", edge=e)
    cache = _cache or _InnerCache(inst, inner, reduction_width(inst, k, weighted))
    dec = decompose(inst, y, k, weighted=weighted)
    jobs = list(zip(dec.subtrees, dec.cores, dec.core_vertices))

    def run(job) -> frozenset[int]:
        piece, core, cv = job
        return cache.solve(piece, core, cv) if piece[1] & ~core else frozenset()

    if workers > 1 and len(jobs) > 1:
        # pieces are independent; results are read back in piece order
        with ThreadPoolExecutor(max_workers=workers) as pool:
            locals_ = list(pool.map(run, jobs))
    else:
        locals_ = [run(job) for job in jobs]
    for (piece, core, _), local in zip(jobs, locals_):
        target = piece[1] & ~core
        if not target:
            continue
        cov = inst.cov_of_mask(target)
        rhs = _piece_rhs(inst, local, inner.alpha)
        if inst.cost_mass(y, cov) < rhs:
            ids = frozenset(bits(cov))
            return OracleOutcome("piece", PieceCut(ids, rhs, target), dec, tuple(locals_))
    return OracleOutcome("none", None, dec, tuple(locals_))


@dataclasses.dataclass
class CuttingPlaneModel:
    inst: TapInstance
    learned: list[PieceCut] = dataclasses.field(default_factory=list)

    def solve(self):
        model = build_cut_lp(self.inst)
        for j, cut in enumerate(self.learned):
            model.add_row(
                {i: self.inst.links[i].cost for i in cut.links}, ">=", cut.rhs, name=f"piece_{j}"
            )
        return solve_lp(model)


@dataclasses.dataclass(frozen=True)
class ReductionResult:
    solution: frozenset[int]
    nu: Fraction
    x: dict[int, Fraction]
    decomposition: Decomposition
    local_solutions: tuple[frozenset[int], ...]
    heavy_cover: frozenset[int]
    cuts: tuple[PieceCut, ...]
    oracle_calls: int

    def report(self, tree: Tree) -> dict:
        return {
            "nu": str(self.nu),
            "lp_value": str(sum(self.x.values(), ZERO)),
            "pieces": self.decomposition.q,
            "heavy_cover_size": len(self.heavy_cover),
            "local_sizes": [len(s) for s in self.local_solutions],
            "cuts": len(self.cuts),
            "oracle_calls": self.oracle_calls,
            "decomposition": self.decomposition.to_json(tree),
        }


def reduce_to_k_wide(
    inst: TapInstance,
    k: int,
    inner: InnerSolver | None = None,
    *,
    weighted: bool = False,
    workers: int = 1,
    max_rounds: int = 10_000,
) -> ReductionResult:
    """Binary search on ν with the cutting-plane loop; assemble M ∪ ⋃ L_i."""
    if not inst.shadow_closed:
        raise InputError("reduce_to_k_wide needs a shadow-closed instance")
    inner = inner or ExactInner()
    if not inst.tree.edges:
        dec = Decomposition(k, ((frozenset({0}), 0),), (None,), (0,), (frozenset({0}),), (0,))
        return ReductionResult(frozenset(), Fraction(0), {}, dec, (frozenset(),), frozenset(), (), 0)
    cpm = CuttingPlaneModel(inst)
    cache = _InnerCache(inst, inner, reduction_width(inst, k, weighted))
    calls = 0

    def attempt(nu: int):
        nonlocal calls
        for _ in range(max_rounds):
            res = cpm.solve()
            if res.value > nu:
                return None
            y = {i: v for i, v in enumerate(res.x)}
            calls += 1
            out = partial_separation_oracle(
                inst, y, nu, k, inner, weighted=weighted, workers=workers, _cache=cache
            )
            if out.kind == "none":
                return y, out
            if out.kind != "piece":
                raise InvariantViolation(f"LP optimum failed the {out.kind} check")
            cpm.learned.append(out.cut)
        raise InvariantViolation("cutting-plane loop did not settle")

    top = math.ceil(sum(inst.costs, ZERO))
    found = attempt(top)
    if found is None:
        raise InvariantViolation("full budget declared empty")
    lo, hi, best = 0, top, (top, found)
    while lo < hi:
        mid = (lo + hi) // 2
        got = attempt(mid)
        if got is None:
            lo = mid + 1
        else:
            hi, best = mid, (mid, got)
    nu, (y, out) = best
    dec = out.decomposition
    m = cover_heavy_edges(inst, y, dec.cores, k)
    q = frozenset(m.union(*out.local_solutions))
    if not is_feasible(inst, q):
        raise InvariantViolation("assembled solution is infeasible")
    return ReductionResult(q, Fraction(nu), y, dec, out.local_solutions, m, tuple(cpm.learned), calls)
