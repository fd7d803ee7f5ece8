"""Seeded instance generators.

Every generator takes a ``random.Random``-compatible seed. The same seed always
gives the same instance. Tree shapes: uniform random trees (Prüfer sequences),
paths, stars, caterpillars, complete binary trees and random k-wide trees. Link
sets: all pairs, independent random pairs, or leaf-to-leaf pairs. Random link
sets are patched until every edge is coverable.
"""

from __future__ import annotations

import heapq
import random
from fractions import Fraction
from typing import Any

from treeaug.errors import InputError
from treeaug.instance import Edge, Link, TapInstance, Tree, bits, norm

KINDS = ("random-tree", "path", "star", "caterpillar", "binary", "kwide", "gap-family")


def prufer_tree(n: int, rng: random.Random) -> list[Edge]:
    if n < 1:
        raise InputError("n must be positive")
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = [rng.randrange(n) for _ in range(n - 2)]
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append(norm(leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    a, b = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append(norm(a, b))
    return edges


def kwide_tree(n: int, k: int, rng: random.Random) -> list[Edge]:
    """Random tree rooted at 0 whose principal subtrees have at most k leaves."""
    if k < 1:
        raise InputError("k must be positive")
    edges: list[Edge] = []
    subtrees: list[list[int]] = []  # vertices of each principal subtree
    childless: list[set[int]] = []
    for v in range(1, n):
        grow = [i for i in range(len(subtrees))]
        if not subtrees or rng.random() < 0.3:
            edges.append((0, v))
            subtrees.append([v])
            childless.append({v})
            continue
        i = rng.choice(grow)
        options = [w for w in subtrees[i] if w in childless[i] or len(childless[i]) < k]
        w = rng.choice(options)
        edges.append(norm(w, v))
        childless[i].discard(w)
        childless[i].add(v)
        subtrees[i].append(v)
    return edges


def _shape(kind: str, p: dict[str, Any], rng: random.Random) -> tuple[int, list[Edge], int | None]:
    if kind == "random-tree":
        n = int(p.get("n", 8))
        return n, prufer_tree(n, rng), p.get("root")
    if kind == "path":
        n = int(p.get("n", 5))
        return n, [(i, i + 1) for i in range(n - 1)], p.get("root", 0)
    if kind in ("star", "gap-family"):
        leaves = int(p.get("leaves", 3))
        return leaves + 1, [(0, i) for i in range(1, leaves + 1)], 0
    if kind == "caterpillar":
        spine = int(p.get("spine", 4))
        legs = int(p.get("legs", 1))
        edges = [(i, i + 1) for i in range(spine - 1)]
        nxt = spine
        for s in range(spine):
            for _ in range(legs):
                edges.append((s, nxt))
                nxt += 1
        return nxt, edges, p.get("root", 0)
    if kind == "binary":
        depth = int(p.get("depth", 3))
        n = (1 << (depth + 1)) - 1
        return n, [((v - 1) // 2, v) for v in range(1, n)], 0
    if kind == "kwide":
        n = int(p.get("n", 10))
        return n, kwide_tree(n, int(p.get("k", 2)), rng), 0
    raise InputError(f"unknown generator kind {kind!r}; choose from {KINDS}")


def _random_cost(rng: random.Random, delta: Fraction) -> Fraction:
    return 1 + (delta - 1) * Fraction(rng.randint(0, 12), 12)


def generate(kind: str, params: dict[str, Any] | None = None, seed: int = 0) -> TapInstance:
    """Build an instance of the given family.

    Common params: ``links`` ("all", "random", "leaf-pairs"), ``density`` for
    random links, ``delta`` for random rational costs in [1, delta].
    """
    p = dict(params or {})
    rng = random.Random(seed)
    n, edges, root = _shape(kind, p, rng)
    tree = Tree(n, edges, root)
    default_links = "leaf-pairs" if kind == "gap-family" else "random"
    mode = p.get("links", default_links)
    pairs: list[Edge]
    if mode == "all":
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    elif mode == "leaf-pairs":
        leaves = tree.leaves() if n > 2 else list(range(n))
        pairs = [(u, v) for i, u in enumerate(leaves) for v in leaves[i + 1:]]
    elif mode == "random":
        density = float(p.get("density", 0.3))
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < density]
    else:
        raise InputError(f"unknown link mode {mode!r}")
    if mode == "random":
        pairs = _patch_coverage(tree, pairs, rng)
    delta = Fraction(p.get("delta", 1))
    if delta < 1:
        raise InputError("delta must be at least 1")
    links = [
        Link(u, v, _random_cost(rng, delta) if delta > 1 else Fraction(1)) for u, v in pairs
    ]
    if delta > 1 and links:
        # pin the extremes so the realised cost ratio is exactly delta
        links[0] = Link(links[0].u, links[0].v, Fraction(1))
        if len(links) > 1:
            links[-1] = Link(links[-1].u, links[-1].v, delta)
    return TapInstance.build(tree, links)


def _patch_coverage(tree: Tree, pairs: list[Edge], rng: random.Random) -> list[Edge]:
    covered = 0
    for u, v in pairs:
        covered |= tree.path_mask(u, v)
    out = list(pairs)
    base = tree.base
    missing = tree.full_mask & ~covered
    while missing:
        e = max(bits(missing), key=lambda w: (base.depth[w], w))
        below = _subtree(tree, e)
        a = rng.choice(sorted(below))
        b = rng.choice([w for w in range(tree.n) if w not in below])
        out.append(norm(a, b))
        covered |= tree.path_mask(a, b)
        missing = tree.full_mask & ~covered
    return sorted(set(out))


def _subtree(tree: Tree, v: int) -> set[int]:
    kids = tree.base.children
    seen = {v}
    stack = [v]
    while stack:
        w = stack.pop()
        for c in kids[w]:
            seen.add(c)
            stack.append(c)
    return seen
