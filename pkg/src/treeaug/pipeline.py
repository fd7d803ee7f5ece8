"""End-to-end runs, reports and batch execution.

Instance files are JSON::

    {"n": 4, "root": 0, "edges": [[0, 1], [0, 2], [0, 3]],
     "links": [{"u": 1, "v": 2}, {"u": 2, "v": 3, "cost": "3/2"}]}

Costs are integer or fraction strings and default to 1; ``root`` may be
null or absent. Links written as ``[u, v]`` or ``[u, v, cost]`` are accepted
on input too.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any

from treeaug.config import LIMITS, limits_override
from treeaug.decompose import RoundingInner, reduce_to_k_wide
from treeaug.errors import InfeasibleError, InputError, InvariantViolation, TapError
from treeaug.exact import brute_force_opt
from treeaug.generate import generate
from treeaug.instance import TapInstance, Tree, is_feasible, is_k_wide, shadow_complete, to_fraction
from treeaug.lp.cuts import build_cut_lp, separate_cg
from treeaug.lp.model import solve_lp
from treeaug.rounding import round_k_wide, sampled_round
from treeaug.weighted import weighted_reduce, weighted_round_k_wide

REPORT_VERSION = 1
MODES = ("auto", "k-wide-only", "full-reduction", "weighted")
CSV_COLUMNS = (
    "family", "runs", "ok", "errors", "max_n", "mean_final_cost", "max_ratio", "mean_ratio",
    "rewire_arm", "cg_arm",
)
WORKERS_ENV = "TREEAUG_WORKERS"


# ---- instance files -------------------------------------------------------------


def instance_to_json(inst: TapInstance) -> dict[str, Any]:
    return {
        "n": inst.n,
        "root": inst.tree.root,
        "edges": [list(e) for e in inst.tree.edges],
        "links": [
            {"u": l.u, "v": l.v} if l.cost == 1 else {"u": l.u, "v": l.v, "cost": str(l.cost)}
            for l in inst.links
        ],
    }


def _link_entry(item: Any) -> tuple[int, int, Fraction]:
    if isinstance(item, dict):
        return int(item["u"]), int(item["v"]), to_fraction(item.get("cost", 1))
    if isinstance(item, (list, tuple)) and len(item) in (2, 3):
        cost = to_fraction(item[2]) if len(item) == 3 else Fraction(1)
        return int(item[0]), int(item[1]), cost
    raise InputError(f"bad link entry {item!r}")


def instance_from_json(data: dict[str, Any]) -> TapInstance:
    try:
        tree = Tree(int(data["n"]), [tuple(e) for e in data["edges"]], data.get("root"))
        pairs, costs = [], []
        for item in data["links"]:
            u, v, c = _link_entry(item)
            pairs.append((u, v))
            costs.append(c)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed instance: {exc}") from exc
    return TapInstance.build(tree, pairs, costs)


def dumps_instance(inst: TapInstance) -> str:
    return json.dumps(instance_to_json(inst), sort_keys=True)


def load_instance(path: str) -> TapInstance:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read instance {path}: {exc}") from exc
    return instance_from_json(data)


# ---- reports ------------------------------------------------------------------------


@dataclasses.dataclass
class RunReport:
    id: str
    seed: int
    mode: str
    n: int
    num_links: int
    k: int
    delta: str
    status: str = "ok"
    root: int | None = None
    opt: str | None = None
    cut_lp: str | None = None
    cg_lp: str | None = None
    kwide_lp: str | None = None
    cg_arm_cost: str | None = None
    rewire_arm_cost: str | None = None
    arm: str | None = None
    matching_size: int | None = None
    sampled_cost: str | None = None
    pieces: int | None = None
    final_size: int | None = None
    final_cost: str | None = None
    ratio: str | None = None
    ratio_float: float | None = None
    feasible: bool | None = None
    solution: list[list[int]] | None = None
    detail: dict[str, Any] = dataclasses.field(default_factory=dict)
    error: str | None = None
    wall_time: float = 0.0
    version: int = REPORT_VERSION

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def cut_lp_value(inst: TapInstance) -> Fraction:
    return solve_lp(build_cut_lp(inst)).value


def cg_lp_value(inst: TapInstance, max_rounds: int = 200) -> Fraction:
    """Cut-LP plus {0,½}-CG cuts added until none is violated."""
    model = build_cut_lp(inst)
    for r in range(max_rounds):
        res = solve_lp(model)
        x = dict(enumerate(res.x))
        cut = separate_cg(inst, x)
        if cut is None:
            return res.value
        model.add_row(cut.multiplicities, ">=", cut.rhs, name=f"cg_{r}")
    raise InvariantViolation("CG closure did not settle")


def wide_root(inst: TapInstance, k: int) -> int | None:
    """The given root if it makes the tree k-wide, else the smallest such vertex."""
    tree = inst.tree
    order = ([tree.root] if tree.root is not None else []) + list(range(inst.n))
    for r in order:
        if is_k_wide(tree, r, k):
            return r
    return None


def _frac(v: Fraction | None) -> str | None:
    return None if v is None else str(v)


def run_pipeline(
    inst: TapInstance,
    k: int,
    mode: str = "auto",
    seed: int = 0,
    *,
    instance_id: str = "instance",
    oracle_bound: int | None = None,
    lp_values: bool = True,
) -> RunReport:
    """Solve one instance and fill a report.

    Modes: ``k-wide-only`` rounds directly and needs a k-wide root;
    ``full-reduction`` decomposes and rounds each piece; ``weighted`` uses the
    grouped variants; ``auto`` picks k-wide rounding when a k-wide root exists
    (weighted variants for non-unit costs) and the reduction otherwise.
    Size-limit errors are raised with the partial report attached as
    ``exc.report``.
    """
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; choose from {MODES}")
    if k < 1:
        raise InputError("k must be positive")
    start = time.perf_counter()
    costs = inst.costs
    delta = max(costs) / min(costs) if costs else Fraction(1)
    rep = RunReport(instance_id, seed, mode, inst.n, len(inst.links), k, str(delta))
    try:
        _run(inst, k, mode, seed, rep, oracle_bound, lp_values)
    except TapError as exc:
        rep.status = type(exc).__name__
        rep.error = str(exc)
        rep.wall_time = time.perf_counter() - start
        exc.report = rep  # type: ignore[attr-defined]
        raise
    rep.wall_time = time.perf_counter() - start
    return rep


def _run(inst, k, mode, seed, rep: RunReport, oracle_bound, lp_values) -> None:
    closed = shadow_complete(inst)
    if not is_feasible(closed, range(len(closed.links))):
        raise InfeasibleError("some tree edge is covered by no link")
    weighted = not closed.is_unit_cost
    root = wide_root(closed, k)
    if mode == "auto":
        chosen = "weighted" if weighted else ("k-wide-only" if root is not None else "full-reduction")
    else:
        chosen = mode
    rep.detail["dispatch"] = chosen
    if lp_values and closed.tree.edges:
        rep.cut_lp = _frac(cut_lp_value(closed))
        rep.cg_lp = _frac(cg_lp_value(closed))
    if chosen == "k-wide-only":
        if root is None:
            raise InputError(f"instance has no root making it {k}-wide")
        rep.root = root
        res = round_k_wide(closed, root, k)
        sol = res.solution
        rep.kwide_lp = _frac(res.lp.objective_value)
        rep.cg_arm_cost = _frac(closed.cost_of(res.cg.solution))
        rep.rewire_arm_cost = _frac(closed.cost_of(res.derand.solution))
        rep.arm = res.arm
        rep.matching_size = len(res.derand.state.matching)
        rep.sampled_cost = _frac(closed.cost_of(sampled_round(closed, res.lp, seed).result))
        rep.detail["rounding"] = res.report()
    elif chosen == "full-reduction":
        inner = RoundingInner()
        red = reduce_to_k_wide(closed, k, inner)
        sol = red.solution
        rep.pieces = red.decomposition.q
        rep.detail["reduction"] = red.report(closed.tree)
        rep.detail["inner_fallbacks"] = inner.fallbacks
    else:
        if root is not None:
            rep.root = root
            res = weighted_round_k_wide(closed, root, k)
            sol = res.solution
            rep.kwide_lp = _frac(res.lp.objective_value * res.config.scale)
            rep.cg_arm_cost = _frac(closed.cost_of(res.cg.solution))
            rep.rewire_arm_cost = _frac(closed.cost_of(res.rewire.solution))
            rep.arm = res.arm
            rep.matching_size = len(res.rewire.derand.state.matching)
            rep.detail["weighted"] = res.report()
        else:
            red, cfg = weighted_reduce(closed, k)
            sol = red.solution
            rep.pieces = red.decomposition.q
            rep.detail["reduction"] = red.report(closed.tree)
            rep.detail["weighted"] = {"delta": str(cfg.delta), "p": cfg.p}
    if not is_feasible(closed, sol):
        raise InvariantViolation("pipeline produced an infeasible solution")
    original = closed.to_origin(sol)
    if not is_feasible(inst, original):
        raise InvariantViolation("solution mapped to input links is infeasible")
    cost = inst.cost_of(original)
    rep.feasible = True
    rep.final_size = len(original)
    rep.final_cost = str(cost)
    rep.solution = [list(inst.links[i].pair) for i in sorted(original)]
    bound = LIMITS.oracle_max_n if oracle_bound is None else oracle_bound
    if inst.n <= bound:
        opt = brute_force_opt(closed).value
        rep.opt = str(opt)
        if opt:
            rep.ratio = str(cost / opt)
            rep.ratio_float = float(cost / opt)
        else:
            rep.ratio, rep.ratio_float = "1", 1.0


# ---- batch ----------------------------------------------------------------------------


def read_manifest(path: str) -> list[dict[str, Any]]:
    """A JSON array of entries or one JSON object per line."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    text = text.strip()
    if not text:
        return []
    try:
        if text.startswith("["):
            entries = json.loads(text)
        else:
            entries = [json.loads(line) for line in text.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest does not parse: {exc}") from exc
    if not all(isinstance(e, dict) for e in entries):
        raise InputError("manifest entries must be objects")
    return entries


def _entry_instance(entry: dict[str, Any], base_dir: str) -> TapInstance:
    if "instance" in entry:
        path = entry["instance"]
        if isinstance(path, dict):
            return instance_from_json(path)
        return load_instance(os.path.join(base_dir, path))
    return generate(entry.get("kind", "random-tree"), entry.get("params", {}), int(entry.get("seed", 0)))


def run_entry(entry: dict[str, Any], index: int, base_dir: str = ".", limits: dict | None = None) -> dict:
    """Run one manifest entry; failures become error reports."""
    with limits_override(**(limits or {})):
        eid = str(entry.get("id", index))
        seed = int(entry.get("seed", 0))
        try:
            inst = _entry_instance(entry, base_dir)
            rep = run_pipeline(
                inst,
                int(entry.get("k", 2)),
                entry.get("mode", "auto"),
                seed,
                instance_id=eid,
                oracle_bound=entry.get("oracle_bound"),
                lp_values=bool(entry.get("lp_values", True)),
            )
            out = rep.to_json()
        except TapError as exc:
            rep = getattr(exc, "report", None)
            out = rep.to_json() if rep is not None else {
                "id": eid, "seed": seed, "status": type(exc).__name__, "error": str(exc),
                "version": REPORT_VERSION,
            }
        out["family"] = entry.get("family", entry.get("kind", "file"))
        return out


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise InputError(f"{WORKERS_ENV} must be an integer") from exc


def run_batch(
    entries: Sequence[dict[str, Any]], *, base_dir: str = ".", workers: int | None = None
) -> list[dict]:
    """Reports in manifest order; entries run on a process pool when workers > 1."""
    workers = worker_count() if workers is None else workers
    limits = dataclasses.asdict(LIMITS)
    if workers <= 1 or len(entries) <= 1:
        return [run_entry(e, i, base_dir, limits) for i, e in enumerate(entries)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(run_entry, e, i, base_dir, limits) for i, e in enumerate(entries)]
        return [f.result() for f in futs]


def summarize(reports: Iterable[dict]) -> list[dict[str, Any]]:
    """Per-family aggregates; wall times are left out so reruns compare equal."""
    fams: dict[str, list[dict]] = {}
    for r in reports:
        fams.setdefault(r.get("family", ""), []).append(r)
    rows = []
    for fam in sorted(fams):
        rs = fams[fam]
        ok = [r for r in rs if r.get("status") == "ok"]
        ratios = [Fraction(r["ratio"]) for r in ok if r.get("ratio") is not None]
        costs = [Fraction(r["final_cost"]) for r in ok]
        rows.append({
            "family": fam,
            "runs": len(rs),
            "ok": len(ok),
            "errors": len(rs) - len(ok),
            "max_n": max((r.get("n", 0) for r in rs), default=0),
            "mean_final_cost": f"{float(sum(costs) / len(costs)):.6f}" if costs else "",
            "max_ratio": f"{float(max(ratios)):.6f}" if ratios else "",
            "mean_ratio": f"{float(sum(ratios) / len(ratios)):.6f}" if ratios else "",
            "rewire_arm": sum(1 for r in ok if r.get("arm") == "rewire"),
            "cg_arm": sum(1 for r in ok if r.get("arm") == "cg"),
        })
    return rows


def summary_csv(rows: Iterable[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def report_csv(reports: Iterable[dict]) -> str:
    """One row per run with the scalar report fields (no timings)."""
    cols = (
        "id", "family", "seed", "mode", "status", "n", "num_links", "k", "delta", "opt",
        "cut_lp", "cg_lp", "kwide_lp", "arm", "final_size", "final_cost", "ratio",
    )
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({c: ("" if r.get(c) is None else r.get(c)) for c in cols})
    return buf.getvalue()
