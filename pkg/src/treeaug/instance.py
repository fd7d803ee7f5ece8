"""Trees, links and tree augmentation instances.

Vertices are ``0..n-1``. Internally each tree is rooted at ``tree.root`` (or
vertex 0 when no root is given) and every non-root vertex ``v`` owns the edge to
its parent. That edge gets the id ``v``, so an edge set is a Python int used as
a bitmask. The public surface speaks in vertex pairs. Masks are exposed for
the hot loops in the other modules.
"""

from __future__ import annotations

import dataclasses
import functools
from collections import deque
from collections.abc import Iterable, Mapping
from fractions import Fraction

from treeaug.errors import InputError, InvariantViolation

Edge = tuple[int, int]
LinkMap = Mapping[int, Fraction]


def norm(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


def bits(mask: int) -> Iterable[int]:
    """Yield the positions of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def to_fraction(value: object) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise InputError(f"costs must be exact rationals, got float {value!r}")
    try:
        return Fraction(value)  # type: ignore[arg-type]
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a rational number: {value!r}") from exc


@dataclasses.dataclass(frozen=True)
class Rooting:
    """Parent/child structure of a tree for one choice of root."""

    root: int
    parent: tuple[int, ...]  # -1 for the root
    depth: tuple[int, ...]
    order: tuple[int, ...]  # BFS order from the root
    children: tuple[tuple[int, ...], ...]
    top: tuple[int, ...]  # index of the principal subtree containing v, -1 for the root

    @property
    def principal_children(self) -> tuple[int, ...]:
        return self.children[self.root]

    def is_ancestor(self, a: int, b: int) -> bool:
        """True when ``a`` lies on the path from the root to ``b`` (a == b counts)."""
        while self.depth[b] > self.depth[a]:
            b = self.parent[b]
        return a == b

    def lca(self, a: int, b: int) -> int:
        while self.depth[a] > self.depth[b]:
            a = self.parent[a]
        while self.depth[b] > self.depth[a]:
            b = self.parent[b]
        while a != b:
            a, b = self.parent[a], self.parent[b]
        return a


@dataclasses.dataclass(frozen=True)
class Tree:
    n: int
    edges: tuple[Edge, ...]
    root: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InputError("a tree needs at least one vertex")
        edges = tuple(norm(int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) != self.n - 1:
            raise InputError(f"a tree on {self.n} vertices has {self.n - 1} edges, got {len(edges)}")
        for u, v in edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise InputError(f"bad tree edge {(u, v)}")
        if len(set(edges)) != len(edges):
            raise InputError("parallel tree edges are not supported")
        if self.root is not None and not 0 <= self.root < self.n:
            raise InputError(f"root {self.root} out of range")
        if len(self.base.order) != self.n:
            raise InputError("edge set is not connected")

    @functools.cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @functools.cached_property
    def base(self) -> Rooting:
        """Rooting used for edge ids."""
        return self.rooted(0 if self.root is None else self.root)

    @functools.cached_property
    def _rootings(self) -> dict[int, Rooting]:
        return {}

    def rooted(self, root: int) -> Rooting:
        if not 0 <= root < self.n:
            raise InputError(f"root {root} out of range")
        cached = self._rootings.get(root)
        if cached is None:
            cached = self._rootings[root] = self._root_at(root)
        return cached

    def _root_at(self, root: int) -> Rooting:
        parent = [-1] * self.n
        depth = [0] * self.n
        seen = [False] * self.n
        seen[root] = True
        order = [root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in self.adjacency[u]:
                if not seen[w]:
                    seen[w] = True
                    parent[w] = u
                    depth[w] = depth[u] + 1
                    order.append(w)
                    queue.append(w)
        children: list[list[int]] = [[] for _ in range(self.n)]
        for v in order[1:]:
            children[parent[v]].append(v)
        top = [-1] * self.n
        for i, c in enumerate(children[root]):
            top[c] = i
        for v in order[1:]:
            if parent[v] != root:
                top[v] = top[parent[v]]
        return Rooting(
            root,
            tuple(parent),
            tuple(depth),
            tuple(order),
            tuple(tuple(c) for c in children),
            tuple(top),
        )

    # ---- edge ids -------------------------------------------------------
    def edge_id(self, u: int, v: int) -> int:
        p = self.base.parent
        if 0 <= u < self.n and p[u] == v:
            return u
        if 0 <= v < self.n and p[v] == u:
            return v
        raise InputError(f"{(u, v)} is not a tree edge")

    def edge_of(self, eid: int) -> Edge:
        return norm(eid, self.base.parent[eid])

    @functools.cached_property
    def full_mask(self) -> int:
        mask = 0
        for v in range(self.n):
            if v != self.base.root:
                mask |= 1 << v
        return mask

    def mask_of(self, edges: Iterable[Edge]) -> int:
        mask = 0
        for u, v in edges:
            mask |= 1 << self.edge_id(u, v)
        return mask

    def edges_of(self, mask: int) -> list[Edge]:
        return [self.edge_of(e) for e in bits(mask)]

    # ---- paths ----------------------------------------------------------
    def path_vertices(self, u: int, v: int) -> list[int]:
        """Vertices of the u–v path in order, both ends included."""
        r = self.base
        left, right = [u], [v]
        a, b = u, v
        while r.depth[a] > r.depth[b]:
            a = r.parent[a]
            left.append(a)
        while r.depth[b] > r.depth[a]:
            b = r.parent[b]
            right.append(b)
        while a != b:
            a, b = r.parent[a], r.parent[b]
            left.append(a)
            right.append(b)
        right.pop()  # the lca is already the last entry of `left`
        return left + right[::-1]

    def path_mask(self, u: int, v: int) -> int:
        r = self.base
        mask = 0
        while r.depth[u] > r.depth[v]:
            mask |= 1 << u
            u = r.parent[u]
        while r.depth[v] > r.depth[u]:
            mask |= 1 << v
            v = r.parent[v]
        while u != v:
            mask |= (1 << u) | (1 << v)
            u, v = r.parent[u], r.parent[v]
        return mask

    def leaves(self) -> list[int]:
        return [v for v in range(self.n) if self.degree(v) == 1]


def tree_path(tree: Tree, u: int, v: int) -> list[Edge]:
    """Ordered edge list of the unique u–v path."""
    if u == v:
        raise InputError("the path between a vertex and itself is empty")
    if not (0 <= u < tree.n and 0 <= v < tree.n):
        raise InputError(f"vertex out of range: {(u, v)}")
    vs = tree.path_vertices(u, v)
    return [norm(a, b) for a, b in zip(vs, vs[1:])]


@dataclasses.dataclass(frozen=True)
class Link:
    u: int
    v: int
    cost: Fraction = Fraction(1)
    origin: int | None = None  # id of the input link this one stands in for

    @property
    def pair(self) -> Edge:
        return norm(self.u, self.v)


@dataclasses.dataclass(frozen=True)
class TapInstance:
    tree: Tree
    links: tuple[Link, ...]
    shadow_closed: bool = False

    def __post_init__(self) -> None:
        links = tuple(
            Link(*norm(int(l.u), int(l.v)), to_fraction(l.cost), l.origin) for l in self.links
        )
        object.__setattr__(self, "links", links)
        seen: set[Edge] = set()
        for l in links:
            if l.u == l.v or not (0 <= l.u < self.tree.n and 0 <= l.v < self.tree.n):
                raise InputError(f"bad link {l.pair}")
            if l.cost <= 0:
                raise InputError(f"link {l.pair} has nonpositive cost {l.cost}")
            if l.pair in seen:
                raise InputError(f"duplicate link {l.pair}")
            seen.add(l.pair)

    @classmethod
    def build(
        cls,
        tree: Tree,
        links: Iterable[Edge | Link],
        costs: Iterable[object] | None = None,
    ) -> TapInstance:
        """Create an instance from raw pairs, merging duplicates at minimum cost."""
        raw: list[Link] = []
        cost_list = None if costs is None else list(costs)
        for i, item in enumerate(links):
            if isinstance(item, Link):
                raw.append(Link(item.u, item.v, to_fraction(item.cost)))
            else:
                u, v = item
                c = Fraction(1) if cost_list is None else to_fraction(cost_list[i])
                raw.append(Link(u, v, c))
        best: dict[Edge, Fraction] = {}
        order: list[Edge] = []
        for l in raw:
            if l.u == l.v:
                raise InputError(f"link {(l.u, l.v)} is a loop")
            p = l.pair
            if p not in best:
                order.append(p)
                best[p] = l.cost
            elif l.cost < best[p]:
                best[p] = l.cost
        return cls(tree, tuple(Link(u, v, best[(u, v)]) for u, v in order))

    # ---- derived data ---------------------------------------------------
    @property
    def n(self) -> int:
        return self.tree.n

    @functools.cached_property
    def link_masks(self) -> tuple[int, ...]:
        return tuple(self.tree.path_mask(l.u, l.v) for l in self.links)

    @functools.cached_property
    def cov_masks(self) -> dict[int, int]:
        """Edge id -> bitmask of link ids covering it."""
        cov = {e: 0 for e in bits(self.tree.full_mask)}
        for i, m in enumerate(self.link_masks):
            for e in bits(m):
                cov[e] |= 1 << i
        return cov

    @functools.cached_property
    def pair_index(self) -> dict[Edge, int]:
        return {l.pair: i for i, l in enumerate(self.links)}

    @functools.cached_property
    def costs(self) -> tuple[Fraction, ...]:
        return tuple(l.cost for l in self.links)

    @property
    def is_unit_cost(self) -> bool:
        return all(c == 1 for c in self.costs)

    def link_id(self, u: int, v: int) -> int:
        try:
            return self.pair_index[norm(u, v)]
        except KeyError:
            raise InputError(f"no link {(u, v)}") from None

    def cov_of_mask(self, edge_mask: int) -> int:
        out = 0
        cov = self.cov_masks
        for e in bits(edge_mask):
            out |= cov[e]
        return out

    def covered_mask(self, link_ids: Iterable[int]) -> int:
        m = 0
        for i in link_ids:
            m |= self.link_masks[i]
        return m

    def cost_of(self, link_ids: Iterable[int]) -> Fraction:
        return sum((self.links[i].cost for i in link_ids), Fraction(0))

    def mass(self, x: LinkMap, link_mask: int) -> Fraction:
        """x(S) for the link set given as a bitmask."""
        total = Fraction(0)
        for i in bits(link_mask):
            v = x.get(i)
            if v:
                total += v
        return total

    def cost_mass(self, x: LinkMap, link_mask: int) -> Fraction:
        total = Fraction(0)
        for i in bits(link_mask):
            v = x.get(i)
            if v:
                total += v * self.links[i].cost
        return total

    def unit_cost(self) -> TapInstance:
        """The same instance with every cost set to 1."""
        if self.is_unit_cost:
            return self
        links = tuple(Link(l.u, l.v, Fraction(1), l.origin) for l in self.links)
        return TapInstance(self.tree, links, self.shadow_closed)

    def with_root(self, root: int | None) -> TapInstance:
        if root == self.tree.root:
            return self
        return TapInstance(Tree(self.tree.n, self.tree.edges, root), self.links, self.shadow_closed)

    def to_origin(self, link_ids: Iterable[int]) -> frozenset[int]:
        """Map link ids to the input links they stand in for."""
        out = set()
        for i in link_ids:
            o = self.links[i].origin
            out.add(i if o is None else o)
        return frozenset(out)


def cover(inst: TapInstance, edge_set: Iterable[Edge]) -> frozenset[int]:
    """Ids of the links whose path meets ``edge_set``; unknown edges raise InputError."""
    return frozenset(bits(inst.cov_of_mask(inst.tree.mask_of(edge_set))))


def shadow_complete(inst: TapInstance) -> TapInstance:
    """Add every shadow of every link, tagging each with the link it came from.

    A shadow's cost is the minimum cost among the links it is a shadow of, so
    replacing a shadow by its origin never changes the cost. Existing links keep
    their id. New links are appended in sorted pair order.
    """
    entries: dict[Edge, list] = {}
    for i, l in enumerate(inst.links):
        entries[l.pair] = [l.cost, i if l.origin is None else l.origin]
    tree = inst.tree
    for i, l in enumerate(inst.links):
        origin = i if l.origin is None else l.origin
        vs = tree.path_vertices(l.u, l.v)
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                p = norm(vs[a], vs[b])
                if p == l.pair:
                    continue
                cur = entries.get(p)
                if cur is None:
                    entries[p] = [l.cost, origin]
                elif l.cost < cur[0]:
                    cur[0], cur[1] = l.cost, origin
    links = []
    for i, l in enumerate(inst.links):
        c, o = entries[l.pair]
        links.append(Link(l.u, l.v, c, o))
    for p in sorted(set(entries) - {l.pair for l in inst.links}):
        c, o = entries[p]
        links.append(Link(p[0], p[1], c, o))
    return TapInstance(tree, tuple(links), True)


@dataclasses.dataclass(frozen=True)
class LinkClassification:
    root: int
    cross: frozenset[int]
    inlinks: frozenset[int]
    up: frozenset[int]
    crit_cross: frozenset[int]
    nocrit_cross: frozenset[int]
    critical_vertices: frozenset[int]


def classify(inst: TapInstance, root: int) -> LinkClassification:
    r = inst.tree.rooted(root)
    crit = frozenset(v for v in range(inst.n) if v != root and inst.tree.degree(v) != 2)
    cross, inl, up, cc, nc = set(), set(), set(), set(), set()
    for i, l in enumerate(inst.links):
        if l.u != root and l.v != root and r.top[l.u] != r.top[l.v]:
            cross.add(i)
            (cc if (l.u in crit and l.v in crit) else nc).add(i)
        else:
            inl.add(i)
            if r.is_ancestor(l.u, l.v) or r.is_ancestor(l.v, l.u):
                up.add(i)
    return LinkClassification(
        root, frozenset(cross), frozenset(inl), frozenset(up), frozenset(cc), frozenset(nc), crit
    )


def principal_leaf_counts(tree: Tree, root: int) -> list[int]:
    """Number of leaves (childless vertices) of every principal subtree."""
    r = tree.rooted(root)
    counts = [0] * len(r.principal_children)
    for v in range(tree.n):
        if v != root and not r.children[v]:
            counts[r.top[v]] += 1
    return counts


def is_k_wide(tree: Tree, root: int, k: int) -> bool:
    return all(c <= k for c in principal_leaf_counts(tree, root))


def _bridges(n: int, edge_list: list[Edge]) -> int:
    """Number of bridges of a connected multigraph (iterative lowpoint search)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for idx, (u, v) in enumerate(edge_list):
        adj[u].append((v, idx))
        adj[v].append((u, idx))
    disc = [-1] * n
    low = [0] * n
    count = 0
    timer = 0
    for start in range(n):
        if disc[start] != -1:
            continue
        disc[start] = low[start] = timer
        timer += 1
        stack = [(start, -1, iter(adj[start]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, idx in it:
                if idx == via:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, idx, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[v])
                    if low[v] > disc[p]:
                        count += 1
    return count


def is_feasible(inst: TapInstance, solution: Iterable[int]) -> bool:
    """Coverage test, cross-checked against bridge detection on tree + links."""
    sol = list(solution)
    for i in sol:
        if not 0 <= i < len(inst.links):
            raise InputError(f"unknown link id {i}")
    by_cover = inst.covered_mask(sol) == inst.tree.full_mask
    graph = list(inst.tree.edges) + [inst.links[i].pair for i in set(sol)]
    by_bridges = _bridges(inst.n, graph) == 0
    if by_cover != by_bridges:
        raise InvariantViolation("coverage and bridge tests disagree")
    return by_cover


# ---- shadow-minimality -------------------------------------------------

def shortening(inst: TapInstance, a: int, b: int) -> Edge | None:
    """Shadow of link ``a`` that keeps the union with ``b``'s path, if a proper one exists.

    Returns the inclusion-minimal such shadow (lexicographically smallest
    endpoints among equals) or None when no proper shadow of ``a`` works.
    """
    la = inst.links[a]
    vs = inst.tree.path_vertices(la.u, la.v)
    mb = inst.link_masks[b]
    tree = inst.tree
    outside = [i for i in range(len(vs) - 1) if not (mb >> tree.edge_id(vs[i], vs[i + 1])) & 1]
    if not outside:
        if len(vs) <= 2:
            return None
        return min(norm(vs[i], vs[i + 1]) for i in range(len(vs) - 1))
    lo, hi = outside[0], outside[-1]
    if lo == 0 and hi == len(vs) - 2:
        return None
    return norm(vs[lo], vs[hi + 1])


def pair_is_shadow_minimal(inst: TapInstance, a: int, b: int) -> bool:
    return shortening(inst, a, b) is None and shortening(inst, b, a) is None


def is_shadow_minimal(inst: TapInstance, solution: Iterable[int]) -> bool:
    sol = sorted(set(solution))
    for i, a in enumerate(sol):
        for b in sol[i + 1:]:
            if not pair_is_shadow_minimal(inst, a, b):
                return False
    return True


def principal_subtrees(tree: Tree, root: int) -> list[tuple[frozenset[int], int]]:
    """(vertex set, edge mask) of every principal subtree, in child order.

    Each vertex set contains the root.
    """
    r = tree.rooted(root)
    verts: list[set[int]] = [{root} for _ in r.principal_children]
    masks = [0] * len(r.principal_children)
    for v in r.order[1:]:
        t = r.top[v]
        verts[t].add(v)
        masks[t] |= 1 << tree.edge_id(v, r.parent[v])
    return [(frozenset(vs), m) for vs, m in zip(verts, masks)]
