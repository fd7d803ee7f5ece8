"""Decompose a tree at a light bridge, then run the reduction with the exact inner solver."""

from __future__ import annotations

import json
from fractions import Fraction

from treeaug.decompose import decompose, reduce_to_k_wide
from treeaug.exact import brute_force_opt
from treeaug.instance import TapInstance, Tree, shadow_complete


def two_blocks() -> TapInstance:
    # paths 0..4 and 5..9, each well covered inside, joined by the edge (4, 5)
    tree = Tree(10, [(i, i + 1) for i in range(9)])
    links = [(0, 4), (0, 3), (1, 4), (4, 5), (5, 9), (5, 8), (6, 9)]
    return TapInstance.build(tree, links)


def main() -> None:
    inst = two_blocks()
    x = {i: Fraction(1) for i in range(len(inst.links))}
    dec = decompose(inst, x, 4)
    print("decomposition at k = 4:")
    print(json.dumps(dec.to_json(inst.tree)))
    closed = shadow_complete(inst)
    res = reduce_to_k_wide(closed, 25)
    print("reduction at k = 25:")
    print(json.dumps(res.report(closed.tree)))
    print("size", len(res.solution), "OPT", brute_force_opt(closed).value)


if __name__ == "__main__":
    main()
