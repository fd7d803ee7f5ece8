"""Dense two-phase tableau simplex over ``fractions.Fraction`` with Bland's rule.

The solver works on the standard form ``min c·x, A x = b, x ≥ 0, b ≥ 0``.
``standard_form`` maps an :class:`~treeaug.lp.model.LpModel` onto it by shifting
lower bounds, splitting free variables, turning upper bounds into rows and
adding slack columns.
"""

from __future__ import annotations

from fractions import Fraction

from treeaug.errors import InfeasibleError, UnboundedError

ZERO = Fraction(0)
ONE = Fraction(1)


class StandardForm:
    def __init__(self, model) -> None:
        ncols = 0
        # original var j -> list of (column, sign); value = shift + Σ sign·x_col
        self.var_cols: list[list[tuple[int, int]]] = []
        self.shift: list[Fraction] = []
        rows: list[tuple[dict[int, Fraction], str, Fraction]] = []
        for j in range(model.num_vars):
            lo, hi = model.lower[j], model.upper[j]
            if lo is None:
                self.var_cols.append([(ncols, 1), (ncols + 1, -1)])
                self.shift.append(ZERO)
                ncols += 2
                if hi is not None:
                    rows.append(({ncols - 2: ONE, ncols - 1: -ONE}, "<=", Fraction(hi)))
            else:
                self.var_cols.append([(ncols, 1)])
                self.shift.append(Fraction(lo))
                ncols += 1
                if hi is not None:
                    rows.append(({ncols - 1: ONE}, "<=", Fraction(hi) - Fraction(lo)))
        self.num_struct = ncols
        self.cost = [ZERO] * ncols
        self.const = ZERO
        for j, c in model.objective.items():
            self.const += c * self.shift[j]
            for col, s in self.var_cols[j]:
                self.cost[col] += c * s
        for row in model.rows:
            coeffs: dict[int, Fraction] = {}
            rhs = Fraction(row.rhs)
            for j, a in row.coeffs.items():
                rhs -= a * self.shift[j]
                for col, s in self.var_cols[j]:
                    coeffs[col] = coeffs.get(col, ZERO) + a * s
            rows.append((coeffs, row.sense, rhs))
        # slack columns
        self.rows: list[tuple[dict[int, Fraction], Fraction]] = []
        self.slack_of_row: list[int | None] = []
        for coeffs, sense, rhs in rows:
            coeffs = {c: a for c, a in coeffs.items() if a}
            slack = None
            if sense == "<=":
                slack = ncols
                coeffs[ncols] = ONE
                ncols += 1
            elif sense == ">=":
                slack = ncols
                coeffs[ncols] = -ONE
                ncols += 1
            if rhs < 0:
                coeffs = {c: -a for c, a in coeffs.items()}
                rhs = -rhs
            self.rows.append((coeffs, rhs))
            self.slack_of_row.append(slack)
        self.ncols = ncols
        self.cost += [ZERO] * (ncols - self.num_struct)

    def recover(self, values: list[Fraction]) -> list[Fraction]:
        out = []
        for j, cols in enumerate(self.var_cols):
            v = self.shift[j]
            for col, s in cols:
                v += s * values[col]
            out.append(v)
        return out


def _pivot(rows: list[list[Fraction]], r: int, c: int) -> None:
    pr = rows[r]
    p = pr[c]
    if p != ONE:
        inv = ONE / p
        pr = [v * inv if v else v for v in pr]
        rows[r] = pr
    nz = [j for j, v in enumerate(pr) if v]
    for i, row in enumerate(rows):
        if i == r:
            continue
        f = row[c]
        if f:
            for j in nz:
                row[j] -= f * pr[j]


def _run(tab: list[list[Fraction]], basis: list[int], allowed: list[bool]) -> None:
    """Bland's-rule iterations; the objective row is ``tab[-1]``."""
    m = len(basis)
    while True:
        obj = tab[-1]
        enter = -1
        for j in range(len(obj) - 1):
            if allowed[j] and obj[j] < 0:
                enter = j
                break
        if enter < 0:
            return
        leave = -1
        best: Fraction | None = None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave < 0:
            raise UnboundedError("LP is unbounded")
        _pivot(tab, leave, enter)
        basis[leave] = enter


def simplex_solve(model) -> tuple[Fraction, list[Fraction]]:
    """Exact optimum of ``model``: (value, values of the original variables)."""
    sf = StandardForm(model)
    n = sf.ncols
    # artificial columns where no unit slack can start the basis
    basis: list[int] = []
    art_rows = []
    for i, (coeffs, rhs) in enumerate(sf.rows):
        s = sf.slack_of_row[i]
        if s is not None and coeffs.get(s) == ONE:
            basis.append(s)
        else:
            basis.append(-1)
            art_rows.append(i)
    total = n + len(art_rows)
    tab: list[list[Fraction]] = []
    for i, (coeffs, rhs) in enumerate(sf.rows):
        row = [ZERO] * (total + 1)
        for c, a in coeffs.items():
            row[c] = a
        row[-1] = rhs
        tab.append(row)
    for k, i in enumerate(art_rows):
        tab[i][n + k] = ONE
        basis[i] = n + k
    allowed = [True] * total
    if art_rows:
        obj = [ZERO] * (total + 1)
        for k in range(len(art_rows)):
            obj[n + k] = ONE
        for i in art_rows:
            for j, v in enumerate(tab[i]):
                if v:
                    obj[j] -= v
        tab.append(obj)
        _run(tab, basis, allowed)
        if -tab[-1][-1] > 0:
            raise InfeasibleError("LP is infeasible")
        tab.pop()
        # drive artificials out of the basis
        i = 0
        while i < len(basis):
            if basis[i] >= n:
                col = next((j for j in range(n) if tab[i][j]), -1)
                if col < 0:
                    del tab[i]
                    del basis[i]
                    continue
                _pivot(tab, i, col)
                basis[i] = col
            i += 1
        for k in range(len(art_rows)):
            allowed[n + k] = False
    obj = [ZERO] * (total + 1)
    for j in range(n):
        obj[j] = sf.cost[j]
    for i, b in enumerate(basis):
        cb = sf.cost[b] if b < n else ZERO
        if cb:
            for j, v in enumerate(tab[i]):
                if v:
                    obj[j] -= cb * v
    tab.append(obj)
    _run(tab, basis, allowed)
    values = [ZERO] * n
    for i, b in enumerate(basis):
        if b < n:
            values[b] = tab[i][-1]
    x = sf.recover(values)
    value = sf.const + sum((c * v for c, v in zip(sf.cost, values) if c), ZERO)
    return value, x
