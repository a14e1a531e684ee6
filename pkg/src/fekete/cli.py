"""Command line front end.

``fekete run config.json`` executes one experiment described by a JSON
config and writes points.csv, metrics.csv, timings.csv, and a run.json
manifest into the configured output directory.  ``fekete compare`` joins the
metrics of several finished runs into one table.

Exit codes: 0 on success, 2 when a selection run failed (artifacts are still
written, failed budgets are marked in metrics.csv), 1 for I/O problems,
malformed configs, and solver breakdowns.  Reruns of the same config produce
byte-identical artifacts except timings.csv.

Config schema::

    {
      "kernel":  {"name": "brownian" | "spherical_imq" | "gaussian",
                  "params": {...}},
      "domain":  {"name": "interval01" | "interval11" | "square" | "triangle"
                          | "disk" | "sphere",
                  "m": <count>          (interval domains)
                  "k": <grid size>},    (lattice and sphere domains)
      "method":  {"name": "algorithm1" | "algorithm2" | "p_greedy",
                  "n_values": [...]     (algorithm1, p_greedy)
                  "schedule": [...]},   (algorithm2)
      "solver":  {"backend": "builtin" | "external:<command>", "tol": 1e-8},
      "output":  "<directory>",
      "seed":    0
    }

The solver backend resolves flag over FEKETE_BACKEND over config.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .conic_solver import SolverOptions, solve, solve_external
from .errors import ConditioningError, SolverFailure
from .geometry import interval_candidates, lattice_candidates, sphere_candidates
from .interpolation import condition_number, kernel_system, max_power_over, p_greedy
from .kernels import brownian_kernel, gaussian_kernel, spherical_imq_kernel
from .selection import algorithm1, algorithm2
from .socp_builder import program_to_debug_json

_ENV_BACKEND = "FEKETE_BACKEND"


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; exit 2 is reserved for failed selections
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_kernel(cfg: dict):
    name = cfg["name"]
    params = dict(cfg.get("params", {}))
    if name == "brownian":
        if params:
            raise ValueError("brownian kernel takes no params")
        return brownian_kernel()
    if name == "spherical_imq":
        return spherical_imq_kernel(gamma=float(params.pop("gamma")))
    if name == "gaussian":
        return gaussian_kernel(
            d=int(params.pop("d", 1)),
            eps=float(params.pop("eps", 1.0)),
            alpha=float(params.pop("alpha", 1.0)),
            ordering=str(params.pop("ordering", "standard")),
        )
    raise ValueError(f"unknown kernel {name!r}")


def _build_domain(cfg: dict):
    name = cfg["name"]
    if name in ("interval01", "interval11"):
        return interval_candidates(int(cfg["m"]), domain=name)
    if name == "sphere":
        return sphere_candidates(int(cfg["k"]))
    if name in ("square", "triangle", "disk"):
        return lattice_candidates(int(cfg["k"]), domain=name)
    raise ValueError(f"unknown domain {name!r}")


def _point_dim(points: np.ndarray) -> int:
    return 1 if points.ndim == 1 else points.shape[1]


class _Plan:
    """Validated experiment plan; constructing it performs no I/O."""

    def __init__(self, cfg: dict, args):
        self.cfg = cfg
        self.kernel = _build_kernel(cfg["kernel"])
        self.candidates = _build_domain(cfg["domain"])
        dim = _point_dim(self.candidates.points)
        if self.kernel.dimension != dim:
            raise ValueError(
                f"kernel dimension {self.kernel.dimension} does not match "
                f"domain dimension {dim}"
            )

        method = cfg["method"]
        self.method = method["name"]
        if self.method in ("algorithm1", "p_greedy"):
            if "schedule" in method:
                raise ValueError(f"{self.method} takes n_values, not a schedule")
            self.n_values = [int(n) for n in method["n_values"]]
            if not self.n_values or any(n < 1 for n in self.n_values):
                raise ValueError("n_values must be a nonempty list of positive budgets")
            if max(self.n_values) > len(self.candidates):
                raise ValueError("a budget exceeds the candidate count")
        elif self.method == "algorithm2":
            if "n_values" in method:
                raise ValueError("algorithm2 takes a schedule, not n_values")
            self.schedule = [int(n) for n in method["schedule"]]
            self.n_values = list(self.schedule)
        else:
            raise ValueError(f"unknown method {method['name']!r}")

        solver_cfg = dict(cfg.get("solver", {}))
        backend = args.backend or os.environ.get(_ENV_BACKEND) or solver_cfg.get("backend", "builtin")
        if backend != "builtin" and not backend.startswith("external:"):
            raise ValueError(f"backend must be 'builtin' or 'external:<command>', got {backend!r}")
        self.backend = backend
        self.tol = float(args.tol if args.tol is not None else solver_cfg.get("tol", 1e-8))
        self.seed = int(cfg.get("seed", 0))
        self.outdir = Path(args.output if args.output else cfg["output"])
        self.dump_socp = bool(args.dump_socp)

        params = cfg["kernel"].get("params", {})
        self.kernel_id = cfg["kernel"]["name"] + json.dumps(
            params, sort_keys=True, separators=(",", ":")
        )
        dom = cfg["domain"]
        size = f"m={int(dom['m'])}" if "m" in dom else f"k={int(dom['k'])}"
        self.domain_id = f"{dom['name']}:{size}"


class _TimedSolve:
    """Wraps a solve callable: accumulates per-call durations, dumps programs."""

    def __init__(self, inner, dump_dir: Path | None):
        self.inner = inner
        self.dump_dir = dump_dir
        self.calls: list[float] = []
        self.count = 0

    def __call__(self, prog):
        if self.dump_dir is not None:
            self.count += 1
            path = self.dump_dir / f"socp_{self.count:04d}.json"
            path.write_text(program_to_debug_json(prog))
        t0 = time.perf_counter()
        try:
            return self.inner(prog)
        finally:
            self.calls.append(time.perf_counter() - t0)


def _make_solver(plan: _Plan) -> _TimedSolve:
    dump_dir = plan.outdir if plan.dump_socp else None
    if plan.backend == "builtin":
        options = SolverOptions(tol=plan.tol)
        return _TimedSolve(lambda prog: solve(prog, options), dump_dir)
    command = plan.backend[len("external:"):]
    return _TimedSolve(lambda prog: solve_external(prog, command), dump_dir)


def _prefix_metrics(plan: _Plan, indices) -> tuple[float, float]:
    pts = plan.candidates.points[np.asarray(indices, dtype=int)]
    try:
        system = kernel_system(plan.kernel, pts)
    except ConditioningError:
        return math.nan, math.inf
    max_pow, _ = max_power_over(system, plan.candidates)
    return max_pow, condition_number(system)


def _run_algorithm1(plan: _Plan):
    records, point_rows = [], []
    for n in plan.n_values:
        timer = _make_solver(plan)
        t0 = time.perf_counter()
        res = algorithm1(plan.kernel, plan.candidates, n, solve_fn=timer)
        total = time.perf_counter() - t0
        solve_s = sum(timer.calls)
        for warning in res.warnings:
            print(f"warning: n={n}: {warning}", file=sys.stderr)
        if res.status != "ok":
            records.append(
                {"n": n, "status": "failed", "max_power": math.nan, "cond": math.nan,
                 "build_s": total - solve_s, "solve_s": solve_s}
            )
            continue
        records.append(
            {"n": n, "status": "ok",
             "max_power": res.diagnostics["max_power"],
             "cond": res.diagnostics["condition_number"],
             "build_s": total - solve_s, "solve_s": solve_s}
        )
        point_rows += [(n, j) for j in res.chosen]
    return records, point_rows


def _run_algorithm2(plan: _Plan):
    timer = _make_solver(plan)
    t0 = time.perf_counter()
    stage_results = algorithm2(plan.kernel, plan.candidates, plan.schedule, solve_fn=timer)
    total = time.perf_counter() - t0
    solve_times = list(timer.calls)
    build_share = (total - sum(solve_times)) / max(len(stage_results), 1)

    records, point_rows = [], []
    call_idx = 0
    for res in stage_results:
        for warning in res.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        n = res.diagnostics["budget"]
        solve_s = 0.0
        if res.diagnostics["solver_status"] != "analytic":
            solve_s = solve_times[call_idx]
            call_idx += 1
        if res.status != "ok":
            records.append(
                {"n": n, "status": "failed", "max_power": math.nan,
                 "cond": math.nan, "build_s": build_share, "solve_s": solve_s}
            )
            continue
        records.append(
            {"n": n, "status": "ok",
             "max_power": res.diagnostics["max_power"],
             "cond": res.diagnostics["condition_number"],
             "build_s": build_share, "solve_s": solve_s}
        )
        point_rows += [(n, j) for j in res.chosen]
    return records, point_rows


def _run_pgreedy(plan: _Plan):
    records, point_rows = [], []
    n_max = max(plan.n_values)
    t0 = time.perf_counter()
    try:
        chosen = p_greedy(plan.kernel, plan.candidates, n_max)
    except ConditioningError as exc:
        print(f"warning: greedy selection aborted: {exc}", file=sys.stderr)
        total = time.perf_counter() - t0
        for n in plan.n_values:
            records.append(
                {"n": n, "status": "failed", "max_power": math.nan,
                 "cond": math.nan, "build_s": total, "solve_s": 0.0}
            )
        return records, point_rows
    total = time.perf_counter() - t0
    for n in plan.n_values:
        max_pow, cond = _prefix_metrics(plan, chosen[:n])
        records.append(
            {"n": n, "status": "ok", "max_power": max_pow, "cond": cond,
             "build_s": total, "solve_s": 0.0}
        )
        point_rows += [(n, j) for j in chosen[:n]]
    return records, point_rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _write_artifacts(plan: _Plan, records, point_rows) -> None:
    dim = _point_dim(plan.candidates.points)
    coord_cols = [f"x{i + 1}" for i in range(dim)]
    pts = plan.candidates.points.reshape(len(plan.candidates), dim)
    _write_csv(
        plan.outdir / "points.csv",
        ["n", "index", *coord_cols],
        [(n, j, *(float(c) for c in pts[j])) for n, j in point_rows],
    )
    _write_csv(
        plan.outdir / "metrics.csv",
        ["n", "max_power", "cond", "status"],
        [(r["n"], float(r["max_power"]), float(r["cond"]), r["status"]) for r in records],
    )
    _write_csv(
        plan.outdir / "timings.csv",
        ["n", "build_s", "solve_s"],
        [(r["n"], float(r["build_s"]), float(r["solve_s"])) for r in records],
    )
    manifest = {
        "kernel_id": plan.kernel_id,
        "domain_id": plan.domain_id,
        "method": plan.method,
        "n_values": plan.n_values,
        "backend": plan.backend,
        "tol": plan.tol,
        "seed": plan.seed,
        "config": plan.cfg,
        "artifacts": ["points.csv", "metrics.csv", "timings.csv"],
        "statuses": {str(r["n"]): r["status"] for r in records},
    }
    (plan.outdir / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cmd_run(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"malformed config JSON: {exc}", file=sys.stderr)
        return 1
    try:
        plan = _Plan(cfg, args)
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        plan.outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return 1

    runner = {
        "algorithm1": _run_algorithm1,
        "algorithm2": _run_algorithm2,
        "p_greedy": _run_pgreedy,
    }[plan.method]
    try:
        records, point_rows = runner(plan)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1

    try:
        _write_artifacts(plan, records, point_rows)
    except OSError as exc:
        print(f"cannot write artifacts: {exc}", file=sys.stderr)
        return 1

    failed = [r["n"] for r in records if r["status"] != "ok"]
    if failed:
        print(f"selection failed for budgets {failed}", file=sys.stderr)
        return 2
    return 0


def _cmd_compare(args) -> int:
    runs = []
    gaps = []
    for d in args.dirs:
        base = Path(d)
        manifest_path = base / "run.json"
        metrics_path = base / "metrics.csv"
        if not manifest_path.is_file():
            gaps.append(f"{d}: missing run.json")
            continue
        if not metrics_path.is_file():
            gaps.append(f"{d}: missing metrics.csv")
            continue
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            gaps.append(f"{d}: malformed run.json ({exc})")
            continue
        with open(metrics_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        runs.append((manifest, rows))
    if gaps:
        print("compare aborted, incomplete runs:", file=sys.stderr)
        for gap in gaps:
            print(f"  {gap}", file=sys.stderr)
        return 1

    labels = []
    seen: dict[str, int] = {}
    for manifest, _ in runs:
        label = manifest.get("method", "run")
        seen[label] = seen.get(label, 0) + 1
        labels.append(label if seen[label] == 1 else f"{label}_{seen[label]}")

    table: dict[tuple, dict[str, dict]] = {}
    for (manifest, rows), label in zip(runs, labels):
        for row in rows:
            key = (manifest.get("kernel_id", ""), manifest.get("domain_id", ""), int(row["n"]))
            table.setdefault(key, {})[label] = row

    header = ["kernel", "domain", "n"]
    for label in labels:
        header += [f"{label}_max_power", f"{label}_cond", f"{label}_status"]
    out_rows = []
    for key in sorted(table):
        cells = list(key)
        for label in labels:
            row = table[key].get(label)
            if row is None:
                cells += ["", "", ""]
            else:
                cells += [row["max_power"], row["cond"], row["status"]]
        out_rows.append(cells)

    if args.output:
        with open(args.output, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(out_rows)
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(out_rows)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fekete", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment config")
    run.add_argument("config", help="path to a JSON experiment config")
    run.add_argument("--backend", default=None,
                     help="'builtin' or 'external:<command>' (overrides env and config)")
    run.add_argument("--tol", type=float, default=None, help="solver tolerance override")
    run.add_argument("--output", default=None, help="output directory override")
    run.add_argument("--dump-socp", action="store_true",
                     help="write each cone program as JSON next to the artifacts")
    run.set_defaults(func=_cmd_run)

    cmp_parser = sub.add_parser("compare", help="join metrics of finished runs")
    cmp_parser.add_argument("dirs", nargs="+", help="run output directories")
    cmp_parser.add_argument("--output", default=None, help="write the table to this CSV file")
    cmp_parser.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
