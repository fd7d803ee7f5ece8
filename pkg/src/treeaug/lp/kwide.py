"""The k-wide-LP: λ-weights over shadow-minimal local covers of each principal subtree.

For every principal subtree ``i`` and every shadow-minimal set ``R`` of
cross-links touching it, a column stands for the local cover ``R ∪ C(i,R)``.
The LP picks a convex combination of columns per subtree. The combinations
must agree on every cross-link, since a cross-link lives in two subtrees.

The x variables are substituted out: ``x_ℓ`` is the λ-mass of the columns that
contain ℓ. This leaves one convexity row per subtree and one agreement row per
cross-link. The objective Σ c_ℓ x_ℓ becomes a per-column cost in which
cross-links count half, because each one is paid for from both of its subtrees.
"""

from __future__ import annotations

import dataclasses
import itertools
from collections.abc import Mapping
from fractions import Fraction

from treeaug.config import LIMITS
from treeaug.errors import InfeasibleError, InputError, InvariantViolation, SizeLimitError
from treeaug.exact import SubtreeCompleter
from treeaug.instance import (
    LinkClassification,
    TapInstance,
    classify,
    is_k_wide,
    pair_is_shadow_minimal,
    principal_leaf_counts,
    principal_subtrees,
)
from treeaug.lp.cuts import CgCut, separate_cg
from treeaug.lp.model import LpModel, solve_lp


@dataclasses.dataclass(frozen=True)
class LambdaFamily:
    subtree_index: int
    vertices: frozenset[int]
    edge_mask: int
    columns: tuple[tuple[frozenset[int], frozenset[int]], ...]  # (R, L_i^R)


@dataclasses.dataclass(frozen=True)
class KWideLpSolution:
    root: int
    k: int
    x: dict[int, Fraction]  # every link id, zeros included
    lam: dict[tuple[int, int], Fraction]  # (subtree, column index) -> weight, zeros included
    objective_value: Fraction
    families: tuple[LambdaFamily, ...]
    cuts: tuple[CgCut, ...]
    classification: LinkClassification
    rounds: int

    def column(self, i: int, c: int) -> frozenset[int]:
        return self.families[i].columns[c][1]


def _check_width(inst: TapInstance, root: int, k: int) -> None:
    if not is_k_wide(inst.tree, root, k):
        raise InputError(f"instance is not {k}-wide with respect to root {root}")
    width = max(principal_leaf_counts(inst.tree, root), default=0)
    if min(k, width) > LIMITS.lambda_max_width:
        raise SizeLimitError(
            f"Λ generation refuses width {min(k, width)} > {LIMITS.lambda_max_width}"
        )


def enumerate_lambda_families(inst: TapInstance, root: int, k: int) -> list[LambdaFamily]:
    """All shadow-minimal cross sets R (|R| ≤ k) per subtree, with their completions."""
    if not inst.shadow_closed:
        raise InputError("the k-wide-LP needs a shadow-closed instance")
    _check_width(inst, root, k)
    cls = classify(inst, root)
    rooting = inst.tree.rooted(root)
    out = []
    for i, (verts, emask) in enumerate(principal_subtrees(inst.tree, root)):
        cross_i = sorted(
            c for c in cls.cross
            if rooting.top[inst.links[c].u] == i or rooting.top[inst.links[c].v] == i
        )
        ok = {
            (a, b): pair_is_shadow_minimal(inst, a, b)
            for a, b in itertools.combinations(cross_i, 2)
        }
        completer = SubtreeCompleter(inst, root, i)
        columns = []
        level = [()]
        for size in range(k + 1):
            nxt = []
            for R in level:
                try:
                    C = completer.complete(R)
                except InfeasibleError:
                    C = None
                if C is not None:
                    columns.append((frozenset(R), frozenset(R) | C))
                if size == k:
                    continue
                start = cross_i.index(R[-1]) + 1 if R else 0
                for c in cross_i[start:]:
                    if all(ok[(a, c)] for a in R):
                        nxt.append(R + (c,))
            level = nxt
        if not columns:
            raise InfeasibleError(f"principal subtree {i} has no feasible local cover")
        out.append(LambdaFamily(i, verts, emask, tuple(columns)))
    return out


def _side_of(inst: TapInstance, root: int, link: int) -> int:
    r = inst.tree.rooted(root)
    l = inst.links[link]
    tops = [r.top[w] for w in (l.u, l.v) if w != root]
    return min(tops)


def solve_k_wide_lp(
    inst: TapInstance,
    root: int,
    k: int,
    *,
    families: list[LambdaFamily] | None = None,
    max_rounds: int = 500,
) -> KWideLpSolution:
    """Minimise Σ c_ℓ x_ℓ over the k-wide-LP, adding CG cuts until none is violated."""
    if families is None:
        families = enumerate_lambda_families(inst, root, k)
    else:
        _check_width(inst, root, k)
    cls = classify(inst, root)
    model = LpModel()
    var_of: list[list[int]] = []
    # x_ℓ as a sparse combination of λ variables (taken from one designated subtree)
    x_expr: dict[int, list[int]] = {i: [] for i in range(len(inst.links))}
    per_side: dict[tuple[int, int], list[int]] = {}
    for fam in families:
        i = fam.subtree_index
        ids = []
        for c, (_, cols) in enumerate(fam.columns):
            weight = Fraction(0)
            for l in cols:
                cost = inst.links[l].cost
                weight += cost / 2 if l in cls.cross else cost
            j = model.add_var(f"lam_{i}_{c}", 0, None, weight)
            ids.append(j)
            for l in cols:
                per_side.setdefault((l, i), []).append(j)
        var_of.append(ids)
        model.add_row({j: 1 for j in ids}, "==", 1, name=f"convex_{i}")
    for l in sorted(cls.cross):
        lk = inst.links[l]
        r = inst.tree.rooted(root)
        a, b = r.top[lk.u], r.top[lk.v]
        left, right = per_side.get((l, a), []), per_side.get((l, b), [])
        if left or right:
            coeffs = {j: 1 for j in left}
            for j in right:
                coeffs[j] = -1
            model.add_row(coeffs, "==", 0, name=f"agree_{l}")
    for (l, i), js in per_side.items():
        if l in cls.inlinks or i == _side_of(inst, root, l):
            x_expr[l] = js
    cuts: list[CgCut] = []
    rounds = 0
    while True:
        rounds += 1
        res = solve_lp(model)
        lam_vals = res.x
        x = {l: sum((lam_vals[j] for j in js), Fraction(0)) for l, js in x_expr.items()}
        cut = separate_cg(inst, x)
        if cut is None:
            break
        if rounds >= max_rounds:
            raise InvariantViolation("cutting-plane loop did not converge")
        cuts.append(cut)
        coeffs: dict[int, Fraction] = {}
        for l, m in cut.multiplicities.items():
            for j in x_expr[l]:
                coeffs[j] = coeffs.get(j, Fraction(0)) + m
        model.add_row(coeffs, ">=", cut.rhs, name=f"cg_{len(cuts)}")
    lam = {}
    for i, ids in enumerate(var_of):
        for c, j in enumerate(ids):
            lam[(i, c)] = lam_vals[j]
    value = sum((inst.links[l].cost * v for l, v in x.items()), Fraction(0))
    if value != res.value:
        raise InvariantViolation("k-wide-LP objective does not match Σ c_ℓ x_ℓ")
    return KWideLpSolution(root, k, x, lam, value, tuple(families), tuple(cuts), cls, rounds)


def check_consistency(inst: TapInstance, sol: KWideLpSolution) -> None:
    """Replay the λ/x identities and the generated cuts exactly; raise on failure."""
    for fam in sol.families:
        i = fam.subtree_index
        total = sum((sol.lam[(i, c)] for c in range(len(fam.columns))), Fraction(0))
        if total != 1:
            raise InvariantViolation(f"λ of subtree {i} sums to {total}")
        cov = inst.cov_of_mask(fam.edge_mask)
        for l in range(len(inst.links)):
            if not (cov >> l) & 1:
                continue
            mass = sum(
                (sol.lam[(i, c)] for c, (_, cols) in enumerate(fam.columns) if l in cols),
                Fraction(0),
            )
            if mass != sol.x[l]:
                raise InvariantViolation(f"x and λ disagree on link {l} in subtree {i}")
    for cut in sol.cuts:
        if cut.violation(sol.x) > 0:
            raise InvariantViolation("a generated CG cut is violated")


def mass(x: Mapping[int, Fraction], ids) -> Fraction:
    return sum((x.get(i, Fraction(0)) for i in ids), Fraction(0))
