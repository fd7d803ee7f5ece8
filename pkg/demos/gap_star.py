"""The three-leaf star: the cut-LP is 3/2, the odd-set cut lifts it to 2, rounding finds 2."""

from __future__ import annotations

from treeaug.exact import brute_force_opt
from treeaug.generate import generate
from treeaug.instance import shadow_complete
from treeaug.lp.cuts import build_cut_lp, separate_cg
from treeaug.lp.model import solve_lp
from treeaug.rounding import round_k_wide


def main() -> None:
    inst = shadow_complete(generate("star", {"leaves": 3, "links": "leaf-pairs"}))
    print("links:", [l.pair for l in inst.links])
    res = solve_lp(build_cut_lp(inst))
    print("cut-LP value:", res.value)
    cut = separate_cg(inst, dict(enumerate(res.x)))
    print("violated CG cut on S =", sorted(cut.vertex_set), "rhs", cut.rhs)
    rounded = round_k_wide(inst, 0, 1)
    print("k-wide LP value:", rounded.lp.objective_value)
    print("rounded size:", len(rounded.solution), "via", rounded.arm, "arm")
    print("OPT:", brute_force_opt(inst).value)


if __name__ == "__main__":
    main()
