"""The cut-LP and {0,½}-Chvátal–Gomory cuts over odd tree cuts."""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Mapping
from fractions import Fraction

import numpy as np

from treeaug.config import LIMITS
from treeaug.errors import SizeLimitError
from treeaug.instance import TapInstance, bits
from treeaug.lp.model import LpModel


def build_cut_lp(inst: TapInstance, *, upper_bounds: bool = True) -> LpModel:
    """One variable per link (x_ℓ in [0,1]) and one covering row per tree edge.

    Variable ``j`` is link ``j``. The objective is Σ c_ℓ x_ℓ.
    """
    model = LpModel()
    for i, l in enumerate(inst.links):
        model.add_var(f"x{i}", 0, 1 if upper_bounds else None, l.cost)
    for e in bits(inst.tree.full_mask):
        cov = inst.cov_masks[e]
        u, v = inst.tree.edge_of(e)
        if not cov:
            model.warnings.append(f"edge ({u},{v}) has no covering link; the LP is infeasible")
        model.add_row({i: 1 for i in bits(cov)}, ">=", 1, name=f"cov_{u}_{v}")
    return model


@dataclasses.dataclass(frozen=True)
class CgCut:
    vertex_set: frozenset[int]
    multiplicities: Mapping[int, int]  # link id -> ⌈|P_ℓ ∩ δ(S)| / 2⌉, positive entries only
    rhs: Fraction

    def lhs(self, x: Mapping[int, Fraction]) -> Fraction:
        return sum((m * x.get(i, 0) for i, m in self.multiplicities.items()), Fraction(0))

    def violation(self, x: Mapping[int, Fraction]) -> Fraction:
        return self.rhs - self.lhs(x)


def cut_edges(inst: TapInstance, vertex_set: frozenset[int] | set[int]) -> int:
    """Edge mask of δ_E(S)."""
    mask = 0
    for e in bits(inst.tree.full_mask):
        u, v = inst.tree.edge_of(e)
        if (u in vertex_set) != (v in vertex_set):
            mask |= 1 << e
    return mask


def cg_cut_for(inst: TapInstance, vertex_set: frozenset[int] | set[int]) -> CgCut | None:
    """The CG cut of S, or None when |δ_E(S)| is even."""
    delta = cut_edges(inst, vertex_set)
    size = delta.bit_count()
    if size % 2 == 0:
        return None
    mult = {}
    for i, m in enumerate(inst.link_masks):
        c = (m & delta).bit_count()
        if c:
            mult[i] = (c + 1) // 2
    return CgCut(frozenset(vertex_set), mult, Fraction(size + 1, 2))


def _integer_scale(x: Mapping[int, Fraction], count: int) -> tuple[list[int], int]:
    denom = 1
    for v in x.values():
        denom = math.lcm(denom, Fraction(v).denominator)
    return [int(Fraction(x.get(i, 0)) * denom) for i in range(count)], denom


def separate_cg(inst: TapInstance, x: Mapping[int, Fraction], *, chunk: int = 1 << 13) -> CgCut | None:
    """A most violated CG cut, or None.

    All 2^(n-1) vertex sets avoiding vertex 0 are enumerated (each cut appears
    once since complements give the same cut). Ties are broken towards the
    smallest set read as a bitmask. All comparisons are exact integers.
    """
    n = inst.n
    if n > LIMITS.cg_max_n:
        raise SizeLimitError(f"CG enumeration refuses n={n} > {LIMITS.cg_max_n}")
    if n < 2:
        return None
    tree = inst.tree
    eids = list(bits(tree.full_mask))
    ends = np.array([tree.edge_of(e) for e in eids], dtype=np.int64)
    nl = len(inst.links)
    paths = np.zeros((len(eids), nl), dtype=np.float64)
    pos = {e: k for k, e in enumerate(eids)}
    for i, m in enumerate(inst.link_masks):
        for e in bits(m):
            paths[pos[e], i] = 1.0
    xs, denom = _integer_scale(x, nl)
    big = max(xs) if xs else 0
    exact_int = big * nl * n < (1 << 62)
    xvec = np.array(xs, dtype=np.int64 if exact_int else object)
    best_key: tuple[int, int] | None = None
    total = 1 << (n - 1)
    for start in range(1, total, chunk):
        stop = min(total, start + chunk)
        sets = np.arange(start, stop, dtype=np.int64) << 1  # bit v = vertex v in S, vertex 0 never
        side = (sets[:, None, None] >> ends[None, :, :]) & 1
        delta = side[:, :, 0] ^ side[:, :, 1]
        size = delta.sum(axis=1)
        odd = (size & 1) == 1
        if not odd.any():
            continue
        sets, delta, size = sets[odd], delta[odd], size[odd]
        counts = np.rint(delta.astype(np.float64) @ paths).astype(np.int64)
        mult = (counts + 1) // 2
        if exact_int:
            lhs = mult @ xvec
        else:
            lhs = mult.astype(object) @ xvec
        rhs = (size + 1) * denom  # twice the rhs, scaled
        viol = rhs - 2 * lhs
        k = int(np.argmax(viol))
        v = int(viol[k])
        if v > 0 and (best_key is None or v > best_key[0]):
            best_key = (v, int(sets[k]))
    if best_key is None:
        return None
    s = best_key[1]
    cut = cg_cut_for(inst, frozenset(v for v in range(n) if (s >> v) & 1))
    assert cut is not None and cut.violation(x) > 0
    return cut
