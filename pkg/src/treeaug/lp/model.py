"""Exact LP models and the ``solve_lp`` entry point.

``solve_lp`` asks HiGHS for an optimal vertex and then rebuilds that vertex in
exact rational arithmetic. It confirms optimality with an exact primal/dual
check. Floating-point numbers only choose which constraints are tight. Every
returned number comes from the exact solve. If the check fails for any reason
(tolerance trouble, degeneracy, solver disagreement), the model goes to the
in-repo Bland simplex. Pass ``method="simplex"`` to skip HiGHS entirely.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Mapping
from fractions import Fraction
from typing import TextIO

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from treeaug.errors import InfeasibleError, InputError, UnboundedError
from treeaug.lp.simplex import simplex_solve

SENSES = ("<=", ">=", "==")


@dataclasses.dataclass
class Row:
    coeffs: dict[int, Fraction]
    sense: str
    rhs: Fraction
    name: str = ""

    def activity(self, x: list[Fraction]) -> Fraction:
        return sum((a * x[j] for j, a in self.coeffs.items()), Fraction(0))

    def holds(self, x: list[Fraction]) -> bool:
        act = self.activity(x)
        if self.sense == "<=":
            return act <= self.rhs
        if self.sense == ">=":
            return act >= self.rhs
        return act == self.rhs


class LpModel:
    """Minimisation LP with named, bounded variables and sparse rational rows."""

    def __init__(self) -> None:
        self.names: list[str] = []
        self.lower: list[Fraction | None] = []
        self.upper: list[Fraction | None] = []
        self.rows: list[Row] = []
        self.objective: dict[int, Fraction] = {}
        self.warnings: list[str] = []
        self._index: dict[str, int] = {}

    @property
    def num_vars(self) -> int:
        return len(self.names)

    def add_var(
        self,
        name: str,
        lower: Fraction | int | None = 0,
        upper: Fraction | int | None = None,
        obj: Fraction | int = 0,
    ) -> int:
        if name in self._index:
            raise InputError(f"duplicate variable {name}")
        j = len(self.names)
        self.names.append(name)
        self.lower.append(None if lower is None else Fraction(lower))
        self.upper.append(None if upper is None else Fraction(upper))
        if obj:
            self.objective[j] = Fraction(obj)
        self._index[name] = j
        return j

    def var(self, name: str) -> int:
        return self._index[name]

    def add_row(
        self,
        coeffs: Mapping[int, Fraction | int] | Iterable[tuple[int, Fraction | int]],
        sense: str,
        rhs: Fraction | int,
        name: str = "",
    ) -> int:
        if sense not in SENSES:
            raise InputError(f"unknown relation {sense!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        row: dict[int, Fraction] = {}
        for j, a in items:
            if j in row:
                raise InputError(f"variable {self.names[j]} twice in one row")
            if not 0 <= j < self.num_vars:
                raise InputError(f"unknown variable index {j}")
            if a:
                row[j] = Fraction(a)
        self.rows.append(Row(row, sense, Fraction(rhs), name))
        return len(self.rows) - 1

    def copy(self) -> LpModel:
        other = LpModel()
        other.names = list(self.names)
        other.lower = list(self.lower)
        other.upper = list(self.upper)
        other.rows = [Row(dict(r.coeffs), r.sense, r.rhs, r.name) for r in self.rows]
        other.objective = dict(self.objective)
        other.warnings = list(self.warnings)
        other._index = dict(self._index)
        return other

    def is_feasible_point(self, x: list[Fraction]) -> bool:
        for j, v in enumerate(x):
            lo, hi = self.lower[j], self.upper[j]
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                return False
        return all(r.holds(x) for r in self.rows)

    def value_of(self, x: list[Fraction]) -> Fraction:
        return sum((c * x[j] for j, c in self.objective.items()), Fraction(0))


@dataclasses.dataclass(frozen=True)
class LpResult:
    value: Fraction
    x: tuple[Fraction, ...]
    names: tuple[str, ...]
    method: str  # "certified" or "simplex"

    def by_name(self) -> dict[str, Fraction]:
        return dict(zip(self.names, self.x))


def solve_lp(model: LpModel, method: str = "auto") -> LpResult:
    """Exact optimum and an optimal vertex of ``model``.

    Raises InfeasibleError or UnboundedError.
    """
    if method not in ("auto", "simplex"):
        raise InputError(f"unknown method {method!r}")
    if method == "auto" and model.num_vars:
        got = _certified(model)
        if got is not None:
            value, x = got
            return LpResult(value, tuple(x), tuple(model.names), "certified")
    value, x = simplex_solve(model)
    return LpResult(value, tuple(x), tuple(model.names), "simplex")


# ---- float-guided exact solve ----------------------------------------------

_TOL = 1e-9


def _float_solve(model: LpModel):
    n = model.num_vars
    c = np.zeros(n)
    for j, v in model.objective.items():
        c[j] = float(v)
    ub_rows, ub_cols, ub_vals, b_ub, ub_map = [], [], [], [], []
    eq_rows, eq_cols, eq_vals, b_eq, eq_map = [], [], [], [], []
    for i, row in enumerate(model.rows):
        if row.sense == "==":
            k = len(b_eq)
            for j, a in row.coeffs.items():
                eq_rows.append(k)
                eq_cols.append(j)
                eq_vals.append(float(a))
            b_eq.append(float(row.rhs))
            eq_map.append(i)
        else:
            sign = 1.0 if row.sense == "<=" else -1.0
            k = len(b_ub)
            for j, a in row.coeffs.items():
                ub_rows.append(k)
                ub_cols.append(j)
                ub_vals.append(sign * float(a))
            b_ub.append(sign * float(row.rhs))
            ub_map.append(i)
    a_ub = sp.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(len(b_ub), n)) if b_ub else None
    a_eq = sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(len(b_eq), n)) if b_eq else None
    bounds = [
        (None if lo is None else float(lo), None if hi is None else float(hi))
        for lo, hi in zip(model.lower, model.upper)
    ]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub or None,
        A_eq=a_eq,
        b_eq=b_eq or None,
        bounds=bounds,
        method="highs-ds",
    )
    if res.status != 0:
        return None
    marg = np.zeros(len(model.rows))
    if b_ub:
        marg[ub_map] = np.abs(res.ineqlin.marginals)
    if b_eq:
        marg[eq_map] = np.abs(res.eqlin.marginals)
    return np.asarray(res.x), marg


def _eliminate(
    rows: list[tuple[dict[int, Fraction], Fraction]],
) -> tuple[list[tuple[int, dict[int, Fraction], Fraction]], list[int], bool]:
    """Forward elimination in the given row order.

    Returns the pivot rows as (pivot column, reduced row, rhs), the indices of
    the accepted input rows, and whether every dependent row was consistent.
    """
    pivots: list[tuple[int, dict[int, Fraction], Fraction]] = []
    accepted: list[int] = []
    consistent = True
    for idx, (coeffs, rhs) in enumerate(rows):
        r = dict(coeffs)
        b = rhs
        for col, prow, prhs in pivots:
            f = r.get(col)
            if f:
                f = f / prow[col]
                for j, a in prow.items():
                    v = r.get(j, 0) - f * a
                    if v:
                        r[j] = v
                    else:
                        r.pop(j, None)
                b -= f * prhs
        if r:
            pivots.append((min(r), r, b))
            accepted.append(idx)
        elif b:
            consistent = False
    return pivots, accepted, consistent


def _back_substitute(pivots: list[tuple[int, dict[int, Fraction], Fraction]]) -> dict[int, Fraction]:
    sol: dict[int, Fraction] = {}
    for col, prow, prhs in reversed(pivots):
        acc = prhs
        for j, a in prow.items():
            if j != col:
                acc -= a * sol[j]
        sol[col] = acc / prow[col]
    return sol


def _certified(model: LpModel) -> tuple[Fraction, list[Fraction]] | None:
    got = _float_solve(model)
    if got is None:
        return None
    xf, marg = got
    n = model.num_vars
    lo = model.lower
    hi = model.upper
    # classify variables
    fixed: dict[int, Fraction] = {}
    at_upper: set[int] = set()
    basic: list[int] = []
    for j in range(n):
        v = float(xf[j])
        if lo[j] is not None and abs(v - float(lo[j])) <= _TOL:
            fixed[j] = lo[j]
        elif hi[j] is not None and abs(v - float(hi[j])) <= _TOL:
            fixed[j] = hi[j]
            at_upper.add(j)
        else:
            basic.append(j)
    basic_set = set(basic)
    # tight rows, most important duals first
    tight = []
    for i, row in enumerate(model.rows):
        act = sum(float(a) * xf[j] for j, a in row.coeffs.items())
        if row.sense == "==" or abs(act - float(row.rhs)) <= _TOL * max(1.0, abs(float(row.rhs))):
            tight.append(i)
    tight.sort(key=lambda i: (-marg[i], model.rows[i].sense != "==", i))
    system = []
    for i in tight:
        row = model.rows[i]
        rhs = row.rhs
        coeffs = {}
        for j, a in row.coeffs.items():
            if j in basic_set:
                coeffs[j] = a
            else:
                rhs -= a * fixed[j]
        system.append((coeffs, rhs))
    pivots, accepted, consistent = _eliminate(system)
    if not consistent or len(pivots) != len(basic):
        return None
    sol = _back_substitute(pivots)
    x = [fixed.get(j, Fraction(0)) for j in range(n)]
    for j, v in sol.items():
        x[j] = v
    if not model.is_feasible_point(x):
        return None
    # duals on the accepted tight rows: Σ_i y_i a_ij = c_j for basic j
    dual_rows = [tight[k] for k in accepted]
    trans: list[tuple[dict[int, Fraction], Fraction]] = []
    col_entries: dict[int, dict[int, Fraction]] = {j: {} for j in basic}
    for i in dual_rows:
        for j, a in model.rows[i].coeffs.items():
            if j in basic_set:
                col_entries[j][i] = a
    for j in basic:
        trans.append((col_entries[j], model.objective.get(j, Fraction(0))))
    dpiv, _, dcons = _eliminate(trans)
    if not dcons or len(dpiv) != len(dual_rows):
        return None
    y = _back_substitute(dpiv)
    for i in dual_rows:
        yi = y.get(i, Fraction(0))
        sense = model.rows[i].sense
        if (sense == "<=" and yi > 0) or (sense == ">=" and yi < 0):
            return None
    reduced = dict(model.objective)
    for i in dual_rows:
        yi = y.get(i)
        if yi:
            for j, a in model.rows[i].coeffs.items():
                reduced[j] = reduced.get(j, Fraction(0)) - yi * a
    for j, v in fixed.items():
        d = reduced.get(j, Fraction(0))
        if lo[j] is not None and hi[j] is not None and lo[j] == hi[j]:
            continue
        if j in at_upper:
            if d > 0:
                return None
        elif d < 0:
            return None
    return model.value_of(x), x


# ---- text dump --------------------------------------------------------------

def _term(a: Fraction, name: str, first: bool) -> str:
    sign = "-" if a < 0 else ("" if first else "+")
    mag = abs(a)
    coef = "" if mag == 1 else f"{mag} "
    return f"{sign} {coef}{name}".strip() if not first else f"{sign}{coef}{name}"


def write_lp(model: LpModel, out: TextIO) -> None:
    """Write the model in CPLEX LP syntax with coefficients as exact fractions."""
    out.write("Minimize\n obj:")
    terms = sorted(model.objective.items())
    out.write(" " + " ".join(_term(a, model.names[j], k == 0) for k, (j, a) in enumerate(terms)) if terms else " 0")
    out.write("\nSubject To\n")
    for i, row in enumerate(model.rows):
        name = row.name or f"r{i}"
        items = sorted(row.coeffs.items())
        lhs = " ".join(_term(a, model.names[j], k == 0) for k, (j, a) in enumerate(items)) or "0"
        rel = {"<=": "<=", ">=": ">=", "==": "="}[row.sense]
        out.write(f" {name}: {lhs} {rel} {row.rhs}\n")
    out.write("Bounds\n")
    for j, name in enumerate(model.names):
        lo, hi = model.lower[j], model.upper[j]
        lo_s = "-inf" if lo is None else str(lo)
        hi_s = "+inf" if hi is None else str(hi)
        out.write(f" {lo_s} <= {name} <= {hi_s}\n")
    out.write("End\n")


__all__ = [
    "InfeasibleError",
    "LpModel",
    "LpResult",
    "Row",
    "UnboundedError",
    "solve_lp",
    "write_lp",
]
