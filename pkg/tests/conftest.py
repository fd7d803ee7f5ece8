from __future__ import annotations

import random
from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from treeaug.generate import generate
from treeaug.instance import TapInstance, Tree, shadow_complete

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def trees(draw, min_n=2, max_n=9):
    n = draw(st.integers(min_n, max_n))
    parents = [draw(st.integers(0, v - 1)) for v in range(1, n)]
    return Tree(n, [(p, v) for v, p in zip(range(1, n), parents)])


@st.composite
def instances(draw, min_n=2, max_n=9, weighted=False, closed=False):
    tree = draw(trees(min_n, max_n))
    n = tree.n
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), max_size=2 * n, unique=True))
    # keep every edge coverable
    covered = 0
    for u, v in chosen:
        covered |= tree.path_mask(u, v)
    for e in tree.edges:
        if not covered >> tree.edge_id(*e) & 1:
            chosen.append(e)
    if weighted:
        costs = [Fraction(draw(st.integers(1, 6)), 2) for _ in chosen]
    else:
        costs = None
    inst = TapInstance.build(tree, chosen, costs)
    return shadow_complete(inst) if closed else inst


def random_instance(seed: int, n_max: int = 12, kind: str | None = None, **params) -> TapInstance:
    rng = random.Random(seed)
    kind = kind or rng.choice(["random-tree", "caterpillar", "path", "kwide"])
    n = rng.randint(3, n_max)
    p = {"n": n, "spine": max(2, n // 2), "k": 2, "density": rng.choice([0.2, 0.3, 0.5])}
    p.update(params)
    return generate(kind, p, seed)


def kwide_instance(seed: int, n_max: int = 12, k: int = 2, **params) -> TapInstance:
    rng = random.Random(seed)
    p = {"n": rng.randint(3, n_max), "k": k, "density": rng.choice([0.2, 0.3, 0.5])}
    p.update(params)
    return shadow_complete(generate("kwide", p, seed))


def mixed_lp_point(inst, root: int, k: int, seed: int, parts: int = 3):
    """A fractional point of the k-wide-LP: a convex mix of vertices under random objectives.

    Each vertex passes CG separation, so the mix satisfies every CG cut and the
    consistency rows.
    """
    import dataclasses

    from treeaug.instance import Link
    from treeaug.lp.kwide import enumerate_lambda_families, solve_k_wide_lp

    rng = random.Random(seed)
    fams = enumerate_lambda_families(inst, root, k)
    sols = [solve_k_wide_lp(inst, root, k, families=fams)]
    for _ in range(parts - 1):
        links = tuple(Link(l.u, l.v, Fraction(rng.randint(1, 6)), l.origin) for l in inst.links)
        other = TapInstance(inst.tree, links, inst.shadow_closed)
        sols.append(solve_k_wide_lp(other, root, k, families=fams))
    weights = [Fraction(rng.randint(1, 4)) for _ in sols]
    total = sum(weights)
    weights = [w / total for w in weights]
    x = {l: sum((w * s.x[l] for w, s in zip(weights, sols)), Fraction(0)) for l in sols[0].x}
    lam = {key: sum((w * s.lam[key] for w, s in zip(weights, sols)), Fraction(0)) for key in sols[0].lam}
    cuts = tuple(c for s in sols for c in s.cuts)
    value = sum((inst.links[l].cost * v for l, v in x.items()), Fraction(0))
    return dataclasses.replace(sols[0], x=x, lam=lam, objective_value=value, cuts=cuts)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
