"""Command-line front end.

Commands: ``simulate-graph``, ``simulate-limit``, ``uribe``, ``verify-exact``
and ``convergence``.  Every artifact starts with a header that records the
tool version and the scenario, and is written atomically.  Exit codes: 0 on
success, 1 on a module error, 2 on a usage error, 3 on a failed verdict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__, bfw, exact, levy, stats, uribe
from .config import (
    DEFAULT_THRESHOLD,
    MassConfig,
    RegimeParams,
    choose_m,
    dust_moments,
    make_standard_config,
    sigma,
)
from .errors import McxError
from .partition import Partition
from .rng import stream
from .workers import map_ranges

COMMANDS = ("simulate-graph", "simulate-limit", "uribe", "verify-exact", "convergence")
VERIFY_MAX_N = 10
EXIT_OK, EXIT_MODULE, EXIT_USAGE, EXIT_VERDICT = 0, 1, 2, 3
CONFIG_FIELDS = ("n", "kappa", "t", "c", "l", "threshold")


@dataclass
class Scenario:
    command: str
    params: RegimeParams
    n: int | None
    replicas: int
    seed: int
    horizon: float | None = None
    step: float | None = None
    threshold: float = DEFAULT_THRESHOLD
    out_path: str | None = None
    format: str = "csv"
    masses: tuple | None = None
    l: int | None = None
    q: float | None = None
    s: float | None = None
    min_length: float | None = None
    n_list: tuple = ()
    walk: bool = False
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        """Scenario fields that determine the output (``jobs`` does not)."""
        return {
            "command": self.command,
            "kappa": self.params.kappa,
            "t": self.params.t,
            "c": list(self.params.c),
            "n": self.n,
            "l": self.l,
            "masses": None if self.masses is None else list(self.masses),
            "q": self.q,
            "s": self.s,
            "replicas": self.replicas,
            "seed": self.seed,
            "horizon": self.horizon,
            "step": self.step,
            "min_length": self.min_length,
            "threshold": self.threshold,
            "n_list": list(self.n_list),
            "walk": self.walk,
            "format": self.format,
        }


# -- output -----------------------------------------------------------------


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return _num(obj)


def _cell(v) -> str:
    v = _num(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(scenario: Scenario, header: list, rows: list, report: dict) -> str:
    """CSV (with a ``#`` header comment) or JSON text for the artifact."""
    meta = {"tool": "mcx", "version": __version__, "scenario": _clean(scenario.as_dict())}
    if scenario.format == "json":
        doc = {"header": meta, "report": _clean(report), "columns": header, "rows": _clean(rows)}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write("# report " + json.dumps(_clean(report), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".mcx-", dir=folder)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(scenario: Scenario, text: str, path: str | None = None) -> None:
    path = scenario.out_path if path is None else path
    if path is None:
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def _side_path(scenario: Scenario, suffix: str) -> str | None:
    if scenario.out_path is None:
        return None
    root, ext = os.path.splitext(scenario.out_path)
    return f"{root}.{suffix}{ext or '.csv'}"


# -- commands ---------------------------------------------------------------


def _config(sc: Scenario) -> MassConfig:
    if sc.masses is not None:
        return MassConfig.from_values(sc.masses)
    return make_standard_config(sc.n, sc.params, sc.l)


def _graph_range(x, q, seed, lo, hi):
    out = []
    for r in range(lo, hi):
        res = bfw.build_bfw(x, q, stream(seed, r))
        out.append((bfw.components(res).lengths.tolist(), len(res.surplus_edges)))
    return out


def cmd_simulate_graph(sc: Scenario):
    x = _config(sc)
    q = sc.q if sc.q is not None else 1.0 / sigma(x, 2) + sc.params.t
    parts = map_ranges(_graph_range, sc.replicas, sc.jobs, x, q, sc.seed)
    runs = [item for p in parts for item in p]
    rows = [(r, k, mass) for r, (comp, _) in enumerate(runs) for k, mass in enumerate(comp)]
    m = choose_m(x, sc.threshold)
    report = {
        "blocks": x.n,
        "q": q,
        "sigma1": sigma(x, 1),
        "sigma2": sigma(x, 2),
        "m": m,
        "dust": dust_moments(x, m, sc.params.t) if m < x.n else None,
        "components": [len(comp) for comp, _ in runs],
        "surplus": [k for _, k in runs],
        "mean_largest": float(np.mean([comp[0] for comp, _ in runs])),
    }
    if sc.walk:
        res = bfw.build_bfw(x, q, stream(sc.seed, 0))
        walk_rows = res.walk.points()
        _emit(sc, render(sc, ["time", "value"], walk_rows, {"replica": 0}), _side_path(sc, "walk"))
    return ["replica", "rank", "mass"], rows, report, True


def cmd_simulate_limit(sc: Scenario):
    p = sc.params
    horizon = sc.horizon if sc.horizon is not None else levy.default_horizon(p)
    step = sc.step if sc.step is not None else levy.default_step(horizon)
    rows, per = [], []
    first = None
    for r in range(sc.replicas):
        path = levy.sample_W(p, horizon, step, stream(sc.seed, r))
        ref = levy.reflect(path)
        ex = levy.excursions(ref, sc.min_length)
        first = first or (path, ref)
        for k, length in enumerate(ex.lengths.lengths.tolist()):
            rows.append((r, k, length))
        per.append(
            {
                "truncated": ex.truncated,
                "open_length": ex.open_length,
                "zero_measure": ex.zero_measure,
                "jump_starts": ex.jump_starts,
                "count": len(ex.lengths),
            }
        )
    report = {
        "horizon": horizon,
        "step": step,
        "truncation_count": sum(e["truncated"] for e in per),
        "tail_bound": levy.truncation_tail(p.c, len(p.c)),
        "replicas": per,
    }
    if sc.walk and first is not None:
        path, ref = first
        prow = list(zip(path.times.tolist(), path.values.tolist(), ref.values.tolist()))
        _emit(sc, render(sc, ["time", "W", "B"], prow, {"replica": 0}), _side_path(sc, "path"))
    return ["replica", "rank", "length"], rows, report, True


def cmd_uribe(sc: Scenario):
    x = _config(sc)
    s = sc.s if sc.s is not None else 0.0
    rows, per = [], []
    for r in range(sc.replicas):
        marks = uribe.sample_marks(x, stream(sc.seed, r))
        res = uribe.residuals(x, marks, s).r
        part = uribe.partition_at(x, marks, s)
        lab = part.labels()
        for (k, xi, before), resid in zip(uribe.diagram_rows(x, marks), res.tolist()):
            block = int(marks.pi[k])
            rows.append((r, k, block, xi, before, resid, int(lab[block])))
        per.append({"first_merge": uribe.first_merge_time(x, marks), "blocks": [list(b) for b in part.blocks]})
    report = {"s": s, "replicas": per}
    return ["replica", "position", "block", "mark", "mass_before", "residual", "cluster"], rows, report, True


def _codes_range(x, s, seed, lo, hi):
    return bfw.component_codes(x, s, hi - lo, seed, first=lo)


def cmd_verify_exact(sc: Scenario):
    x = _config(sc)
    if x.n > VERIFY_MAX_N:
        raise McxError(f"verify-exact supports at most {VERIFY_MAX_N} blocks")
    if x.n < 2:
        raise McxError("verify-exact needs at least two blocks")
    s = sc.s if sc.s is not None else 0.3
    R = sc.replicas
    sources = {
        "gillespie": exact.gillespie_batch(x, s, R, stream(sc.seed, 0)),
        "uribe": uribe.partition_codes(x, s, R, stream(sc.seed, 1)),
        "bfw": np.concatenate(map_ranges(_codes_range, R, sc.jobs, x, s, sc.seed + 1)),
    }
    singles = Partition.singletons(x.masses)
    singles_code = singles.code()
    pair_code = singles.merged(0, 1, x.masses).code()
    oracles = {
        "no_merge": (singles_code, exact.prob_no_merge(x, s)),
        "merge_0_1": (pair_code, exact.prob_first_merge_pair(x, s, (0, 1))),
    }
    rows, ok = [], True
    for name, codes in sources.items():
        for qty, (code, p) in oracles.items():
            count = int(np.count_nonzero(codes == code))
            good, z = stats.binomial_check(count, R, p)
            ok &= bool(good)
            rows.append((name, qty, count / R, p, z, "pass" if good else "fail"))
    report = {"s": s, "blocks": x.n, "verdict": "pass" if ok else "fail"}
    return ["source", "quantity", "empirical", "exact", "z", "verdict"], rows, report, ok


def cmd_convergence(sc: Scenario):
    n_list = sc.n_list or (1000, 10000)
    table = stats.convergence_study(
        sc.params, n_list, sc.replicas, sc.seed, horizon=sc.horizon, step=sc.step, jobs=sc.jobs
    )
    ks = [row["ks_statistic"] for row in table]
    decreasing = all(b < a for a, b in zip(ks, ks[1:]))
    ok = (
        decreasing
        and table[-1]["ks_pvalue"] > stats.SINGLE_ALPHA
        and all(row["unit_guard"] and row["mass_violations"] == 0 for row in table)
    )
    cols = ["n", "ks_statistic", "ks_pvalue", "mean_largest", "mean_limit_largest", "top_l2", "limit_truncations"]
    rows = [tuple(row[c] for c in cols) for row in table]
    report = {"table": table, "ks_decreasing": decreasing, "verdict": "pass" if ok else "fail"}
    return cols, rows, report, ok


HANDLERS = {
    "simulate-graph": cmd_simulate_graph,
    "simulate-limit": cmd_simulate_limit,
    "uribe": cmd_uribe,
    "verify-exact": cmd_verify_exact,
    "convergence": cmd_convergence,
}


def run(sc: Scenario) -> int:
    try:
        header, rows, report, ok = HANDLERS[sc.command](sc)
    except (McxError, ValueError) as exc:
        print(f"mcx {sc.command}: error: {exc}", file=sys.stderr)
        return EXIT_MODULE
    _emit(sc, render(sc, header, rows, report))
    verdict = "" if "verdict" not in report else f" verdict={report['verdict']}"
    dest = sc.out_path or "-"
    print(
        f"mcx {sc.command}: seed={sc.seed} replicas={sc.replicas} rows={len(rows)} out={dest}{verdict}",
        file=sys.stderr if sc.out_path is None else sys.stdout,
    )
    return EXIT_OK if ok else EXIT_VERDICT


# -- argument parsing -------------------------------------------------------


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of numbers, got {text!r}")


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}")


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("MCX_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcx", description="Multiplicative coalescent simulations.")
    parser.add_argument("--version", action="version", version=f"mcx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with any of n, kappa, t, c, l, threshold")
        p.add_argument("--n", type=int)
        p.add_argument("--kappa", type=float)
        p.add_argument("--t", type=float)
        p.add_argument("--c", type=_floats)
        p.add_argument("--l", type=int)
        p.add_argument("--masses", type=_floats, help="explicit block masses; overrides --n/--kappa/--c")
        p.add_argument("--q", type=float)
        p.add_argument("--s", type=float)
        p.add_argument("--replicas", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=_default_jobs())
        p.add_argument("--horizon", type=float)
        p.add_argument("--step", type=float)
        p.add_argument("--min-length", type=float)
        p.add_argument("--threshold", type=float)
        p.add_argument("--n-list", type=_ints, help="sizes for the convergence study")
        p.add_argument("--walk", action="store_true", help="also export the walk or path of replica 0")
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def scenario_from_args(parser: argparse.ArgumentParser, args) -> Scenario:
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read --config: {exc}")
        unknown = set(cfg) - set(CONFIG_FIELDS)
        if unknown:
            parser.error(f"unknown config fields {sorted(unknown)}; allowed {list(CONFIG_FIELDS)}")

    def pick(name, default=None):
        v = getattr(args, name)
        return v if v is not None else cfg.get(name, default)

    if args.replicas < 1:
        parser.error("--replicas must be >= 1")
    if args.seed < 0:
        parser.error("--seed must be >= 0")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    n = pick("n")
    needs_config = args.command in ("simulate-graph", "uribe", "verify-exact")
    if needs_config and args.masses is None and n is None:
        parser.error(f"{args.command} needs --masses or --n")
    if n is not None and int(n) < 1:
        parser.error("--n must be >= 1")
    if args.masses is not None:
        if not args.masses:
            parser.error("--masses is empty")
        if n is not None and int(n) != len(args.masses):
            parser.error(f"--n {n} does not match {len(args.masses)} masses")
    try:
        params = RegimeParams(
            kappa=float(pick("kappa", 1.0)),
            t=float(pick("t", 0.0)),
            c=tuple(pick("c", ()) or ()),
        )
    except (McxError, ValueError) as exc:
        parser.error(str(exc))
    for flag in ("q", "s", "horizon", "step", "min_length"):
        v = getattr(args, flag)
        if v is not None and not (v > 0 or (flag == "s" and v == 0)):
            parser.error(f"--{flag.replace('_', '-')} must be > 0")
    if args.command == "simulate-limit" and params.kappa == 0 and not params.c:
        parser.error("simulate-limit with --kappa 0 needs a non-empty --c")
    return Scenario(
        command=args.command,
        params=params,
        n=None if n is None else int(n),
        replicas=args.replicas,
        seed=args.seed,
        horizon=args.horizon,
        step=args.step,
        threshold=float(pick("threshold", DEFAULT_THRESHOLD)),
        out_path=args.out,
        format=args.format,
        masses=args.masses,
        l=pick("l"),
        q=args.q,
        s=args.s,
        min_length=args.min_length,
        n_list=args.n_list or (),
        walk=args.walk,
        jobs=args.jobs,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return run(scenario_from_args(parser, args))


if __name__ == "__main__":
    sys.exit(main())
