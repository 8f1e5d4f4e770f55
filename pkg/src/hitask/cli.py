"""Command-line harness.

    hitask run --op cholesky --n N --b1 B1 [--b2 B2] --config G1|G2|G3|FILE
               [--threads W] [--ranks P] [--seed S] [--verify]
               [--trace FILE] [--out FILE] [--negate-diagonal]
    hitask trace-check FILE
    hitask bench --n 256,512 --b1 4 [--b2 2] --config G1,G2 [--threads 1,4] [--repeat 3]

Exit codes: 0 ok, 2 verification failed, 3 numerical failure, 4 configuration
error or malformed input, 5 trace violations, 1 anything else (deadlock).
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import os
import sys
import time
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import config as cfg
from .cholesky import cholesky, residual
from .data import PartitionSpec, create_data, fill_spd
from .dispatcher import Dispatcher
from .errors import ConfigurationError, DeadlockError, NumericalError, TaskFailure, UsageError
from .trace import TraceFormatError, read_trace, write_trace
from .tracecheck import check_trace

CSV_HEADER = "config,n,b1,b2,workers,ranks,wall_ms,leaf_tasks,messages,residual"
VERIFY_TOL = 1e-8

EXIT_OK, EXIT_ERROR, EXIT_VERIFY, EXIT_NUMERIC, EXIT_CONFIG, EXIT_TRACE = 0, 1, 2, 3, 4, 5


@dataclass
class ResultRow:
    config: str
    n: int
    b1: int
    b2: int
    workers: int
    ranks: int
    wall_ms: float
    leaf_tasks: int
    messages: int
    residual: float | None = None

    def csv_fields(self):
        out = []
        for v in astuple(self):
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out

    @classmethod
    def from_csv(cls, rec):
        vals = []
        for raw, f in zip(rec, fields(cls)):
            if f.name == "config":
                vals.append(raw)
            elif f.name == "wall_ms":
                vals.append(float(raw))
            elif f.name == "residual":
                vals.append(float(raw) if raw else None)
            else:
                vals.append(int(raw))
        return cls(*vals)


def read_rows(text):
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("missing or wrong CSV header")
    return [ResultRow.from_csv(rec) for rec in csv.reader(lines[1:]) if rec]


@dataclass
class RunOutcome:
    code: int
    row: ResultRow | None = None
    events: list | None = None
    message: str = ""


def _node_param(graph, kind, key, default):
    vals = [n.params.get(key) for n in graph.path() if n.kind == kind]
    if not vals:
        return default
    if kind == "threaded":
        return vals[0] or cfg.default_workers()
    return vals[0] or 1


def run_cholesky(config="G1", n=64, b1=2, b2=None, threads=None, ranks=None, seed=0,
                 verify=False, negate_diagonal=False, timeout=30.0):
    """One factorization run; never raises for the failure classes mapped to exit codes."""
    try:
        graph = cfg.load(config, workers=threads, ranks=ranks)
        spec = PartitionSpec.square(b1, b2)
        a = create_data(n, n, spec)
        cfg.check_partition_depth(graph, len(spec))
    except (ConfigurationError, UsageError) as exc:
        return RunOutcome(EXIT_CONFIG, message=f"configuration error: {exc}")
    fill_spd(a, seed)
    if negate_diagonal:
        a.view()[np.diag_indices(n)] *= -1.0
    original = a.view().copy() if verify else None

    d = Dispatcher(graph, timeout=timeout, partition_levels=len(spec))
    outcome = RunOutcome(EXIT_OK)
    t0 = time.perf_counter()
    try:
        cholesky(d, a)
        d.wait_all()
    except TaskFailure as exc:
        cause = exc.cause
        if isinstance(cause, NumericalError):
            outcome = RunOutcome(EXIT_NUMERIC, message=f"numerical failure in task {exc.task.id}: {cause}")
        elif isinstance(cause, (ConfigurationError, UsageError)):
            outcome = RunOutcome(EXIT_CONFIG, message=f"configuration error: {cause}")
        else:
            outcome = RunOutcome(EXIT_ERROR, message=f"task failure: {exc}")
    except DeadlockError as exc:
        outcome = RunOutcome(EXIT_ERROR, message=str(exc))
    finally:
        wall_ms = (time.perf_counter() - t0) * 1000.0
        d.shutdown()
    outcome.events = d.trace()
    if outcome.code != EXIT_OK:
        return outcome

    res = residual(a.view(), original) if verify else None
    outcome.row = ResultRow(config, n, b1, b2 or 0,
                            _node_param(graph, "threaded", "workers", 1),
                            _node_param(graph, "distsim", "ranks", 1),
                            wall_ms, d.leaf_tasks, d.messages, res)
    if verify and not res <= VERIFY_TOL:
        outcome.code = EXIT_VERIFY
        outcome.message = f"verification failed: residual {res:.3e} > {VERIFY_TOL:g}"
    return outcome


def _emit_rows(rows, out_path):
    if out_path:
        fresh = not os.path.exists(out_path) or os.path.getsize(out_path) == 0
        with open(out_path, "a", newline="") as fh:
            if fresh:
                fh.write(CSV_HEADER + "\n")
            w = csv.writer(fh, lineterminator="\n")
            for r in rows:
                w.writerow(r.csv_fields())
    else:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for r in rows:
            w.writerow(r.csv_fields())
        sys.stdout.write(buf.getvalue())


def cmd_run(args):
    if args.op != "cholesky":
        print(f"unsupported --op {args.op!r}", file=sys.stderr)
        return EXIT_CONFIG
    out = run_cholesky(args.config, args.n, args.b1, args.b2, args.threads, args.ranks,
                       args.seed, args.verify, args.negate_diagonal, args.timeout)
    if args.trace and out.events is not None:
        write_trace(out.events, args.trace)
    if out.message:
        print(out.message, file=sys.stderr)
    if out.row is not None:
        _emit_rows([out.row], args.out)
    return out.code


def cmd_trace_check(args):
    try:
        events = read_trace(args.trace_file)
    except TraceFormatError as exc:
        print(f"malformed trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    problems = check_trace(events)
    if problems:
        for p in problems:
            print(p)
        print(f"{len(problems)} violation(s) in {len(events)} events", file=sys.stderr)
        return EXIT_TRACE
    print(f"ok: {len(events)} events")
    return EXIT_OK


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_bench(args):
    rows = []
    b2s = args.b2 or [None]
    threads = args.threads or [None]
    for n, b1, b2, conf, w in itertools.product(args.n, args.b1, b2s, args.config.split(","), threads):
        best = None
        for _ in range(args.repeat):
            out = run_cholesky(conf, n, b1, b2, w, args.ranks, args.seed, args.verify,
                               timeout=args.timeout)
            if out.code != EXIT_OK:
                print(out.message, file=sys.stderr)
                return out.code
            if best is None or out.row.wall_ms < best.wall_ms:
                best = out.row
        rows.append(best)
    _emit_rows(rows, args.out)

    base = {(r.n, r.b1, r.b2): r.wall_ms for r in rows if r.config.upper() == "G1"}
    for r in rows:
        key = (r.n, r.b1, r.b2)
        if key in base and r.config.upper() != "G1":
            print(f"speedup {r.config} W={r.workers} vs G1 at n={r.n} b1={r.b1} b2={r.b2}: "
                  f"{base[key] / r.wall_ms:.2f}x", file=sys.stderr)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="hitask", description="hierarchical task runtime harness")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="factorize one matrix under a flow-graph configuration")
    run.add_argument("--op", default="cholesky")
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--b1", type=int, required=True)
    run.add_argument("--b2", type=int)
    run.add_argument("--config", required=True, help="G1, G2, G3 or a config file path")
    run.add_argument("--threads", type=int)
    run.add_argument("--ranks", type=int)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--verify", action="store_true")
    run.add_argument("--trace")
    run.add_argument("--out")
    run.add_argument("--negate-diagonal", action="store_true",
                     help="flip the sign of the diagonal (non-SPD input)")
    run.add_argument("--timeout", type=float, default=30.0)
    run.set_defaults(func=cmd_run)

    tc = sub.add_parser("trace-check", help="verify a trace file")
    tc.add_argument("trace_file")
    tc.set_defaults(func=cmd_trace_check)

    bench = sub.add_parser("bench", help="sweep sizes and configurations")
    bench.add_argument("--n", type=_int_list, required=True)
    bench.add_argument("--b1", type=_int_list, required=True)
    bench.add_argument("--b2", type=_int_list)
    bench.add_argument("--config", default="G1,G2")
    bench.add_argument("--threads", type=_int_list)
    bench.add_argument("--ranks", type=int)
    bench.add_argument("--repeat", type=int, default=3)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--verify", action="store_true")
    bench.add_argument("--out")
    bench.add_argument("--timeout", type=float, default=30.0)
    bench.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
