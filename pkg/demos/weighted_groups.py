"""Cost groups and the weighted guarantee for a few cost ratios."""

from __future__ import annotations

from treeaug.exact import brute_force_opt
from treeaug.generate import generate
from treeaug.instance import shadow_complete
from treeaug.pipeline import wide_root
from treeaug.weighted import g_delta_bound, group_count, normalize_and_group, weighted_round_k_wide


def main() -> None:
    print(f"{'delta':>6} {'p':>3} {'guarantee':>12}")
    for delta in (1, 2, 3, 10, 100):
        print(f"{delta:>6} {group_count(delta):>3} {g_delta_bound(delta):>12.9f}")
    inst = shadow_complete(generate("kwide", {"n": 10, "k": 2, "delta": 3}, seed=4))
    cfg = normalize_and_group(inst)
    print("groups:", {h: len(cfg.group(h)) for h in range(1, cfg.p + 1)})
    res = weighted_round_k_wide(inst, wide_root(inst, 2), 2)
    print("rewired in group", res.rewire.group, "gains", [str(g) for g in res.rewire.gains])
    print("cost", inst.cost_of(res.solution), "WOPT", brute_force_opt(inst).value)


if __name__ == "__main__":
    main()
