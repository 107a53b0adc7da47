"""Command-line front end.

Subcommands::

    tdsmor generate BENCH --out FILE        write a benchmark system
    tdsmor reduce  --system FILE --method M --out FILE
    tdsmor simulate --system FILE --input DESC --horizon T --out FILE
    tdsmor compare --system FILE --reduced R1 [R2 ...] --input DESC --horizon T --out FILE
    tdsmor selftest [--inject-fault]

Exit codes: 0 success, 1 self-test failure or unexpected error,
2 invalid arguments, 3 I/O error, 4 numerical failure, 5 capacity exceeded.
"""

import argparse
import csv
import io as _stdio
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import io as tio
from .benchmarks import parse_benchmark
from .bt import DEFAULT_K, reduce_combbt, reduce_dominant, reduce_grambt
from .errors import ArgumentError, CapacityError, NumericalError, TdsMorError
from .laguerre import DEFAULT_DISCOUNT
from .selftest import run_selftest
from .system import error_metrics, parse_input, simulate, spectral_radius
from .walsh_mor import LIFTED_MEMORY_CAP, reduce_lifted_walsh, reduce_walsh

log = logging.getLogger("tdsmor")

EXIT_OK, EXIT_FAIL, EXIT_ARG, EXIT_IO, EXIT_NUM, EXIT_CAP = 0, 1, 2, 3, 4, 5
METHODS = ("walsh", "combbt", "grambt", "dominant", "lifted-walsh")
DEFAULT_WALSH_N = 16


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one reduction run."""

    system: str
    method: str
    order: int = None
    walsh_N: int = DEFAULT_WALSH_N
    laguerre_K: int = DEFAULT_K
    discount: float = DEFAULT_DISCOUNT
    tol: float = 1e-10
    scheme: str = "causal"
    input: str = None
    memory_cap: int = LIFTED_MEMORY_CAP
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.method not in METHODS:
            raise ArgumentError(f"unknown method {self.method!r}")
        if self.method in ("walsh", "lifted-walsh"):
            N = self.walsh_N
            if N is None or N < 2 or N & (N - 1):
                raise ArgumentError(f"--walsh-N must be a power of two >= 2, got {N}")
            if self.input is None:
                raise ArgumentError(f"method {self.method} needs --input")
        else:
            if self.order is None or self.order < 1:
                raise ArgumentError(f"method {self.method} needs --order r >= 1")
            if self.laguerre_K < 2:
                raise ArgumentError("--laguerre-K must be at least 2")
            if not 0.0 < self.discount < 1.0:
                raise ArgumentError("--discount must lie in (0, 1)")
        return self


def _fmt(x):
    return format(float(x), ".17g")


def _atomic_text(path, text):
    tio._atomic_write(path, text, mode="w")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        _atomic_text(out, text)


def _load_system(path):
    system, init, reduced, meta = tio.load(path)
    return system, init, reduced, meta


def cmd_generate(args):
    spec = parse_benchmark(args.benchmark, seed=args.seed)
    t0 = time.perf_counter()
    system, init = spec.generate()
    elapsed = time.perf_counter() - t0
    tio.save(args.out, system, init, meta={"benchmark": spec.as_dict()})
    report = {"benchmark": spec.as_dict(), "n": system.n, "m": system.m, "p": system.p,
              "delays": list(system.delays), "out": args.out, "seconds": elapsed}
    if not args.quiet:
        sys.stdout.write(_dump_json(report))
    return EXIT_OK


def run_reduction(cfg, system, init):
    """Dispatch one reduction; returns the :class:`ReducedSystem`."""
    cfg.validate()
    u = parse_input(cfg.input, system.m) if cfg.input is not None else None
    if cfg.method == "walsh":
        return reduce_walsh(system, init, u, cfg.walsh_N, tol=cfg.tol)
    if cfg.method == "lifted-walsh":
        return reduce_lifted_walsh(system, init, u, cfg.walsh_N, tol=cfg.tol,
                                   memory_cap=cfg.memory_cap)
    if cfg.method == "combbt":
        return reduce_combbt(system, init, cfg.order, cfg.laguerre_K, cfg.discount, cfg.scheme)
    if cfg.method == "grambt":
        return reduce_grambt(system, cfg.order, cfg.laguerre_K, cfg.discount, init=init,
                             scheme=cfg.scheme)
    return reduce_dominant(system, init, cfg.order, cfg.laguerre_K, cfg.discount, cfg.scheme)


def cmd_reduce(args):
    cfg = ExperimentConfig(system=args.system, method=args.method, order=args.order,
                           walsh_N=args.walsh_N, laguerre_K=args.laguerre_K,
                           discount=args.discount, tol=args.tol, scheme=args.scheme,
                           input=args.input, memory_cap=args.memory_cap).validate()
    system, init, _, meta = _load_system(args.system)
    t0 = time.perf_counter()
    red = run_reduction(cfg, system, init)
    elapsed = time.perf_counter() - t0
    params = dict(red.params)
    params["wall_clock"] = elapsed
    if "reduced_spectral_radius" not in params:
        try:
            params["reduced_spectral_radius"] = spectral_radius(red.system)
        except NumericalError:
            params["reduced_spectral_radius"] = None
    red = type(red)(system=red.system, init=red.init, V=red.V, W=red.W,
                    method=red.method, params=_jsonable(params))
    report = {"config": asdict(cfg), "method": red.method, "r": red.r, "full_n": system.n,
              "params": red.params, "source_meta": meta, "version": __version__}
    tio.save(args.out, red.system, red.init, reduced=red, meta={"config": asdict(cfg)})
    _emit(_dump_json(report), args.report)
    return EXIT_OK


def _outputs_csv(T, columns):
    """CSV text: ``t`` then the named columns, 17 significant digits."""
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [name for name, _ in columns])
    for t in range(T + 1):
        w.writerow([str(t)] + [_fmt(col[t]) for _, col in columns])
    return buf.getvalue()


def cmd_simulate(args):
    system, init, _, _ = _load_system(args.system)
    u = parse_input(args.input, system.m)
    t0 = time.perf_counter()
    traj = simulate(system, init, u, args.horizon)
    elapsed = time.perf_counter() - t0
    Y = traj.outputs
    if args.format == "json":
        text = _dump_json({"system": args.system, "input": args.input, "horizon": args.horizon,
                           "seconds": elapsed, "outputs": Y})
    else:
        text = _outputs_csv(args.horizon, [(f"y{i + 1}", Y[:, i]) for i in range(system.p)])
    _emit(text, args.out)
    return EXIT_OK


def _labels(paths, reduced):
    labels, seen = [], {}
    for path, red in zip(paths, reduced):
        base = red.method if red is not None else os.path.splitext(os.path.basename(path))[0]
        seen[base] = seen.get(base, 0) + 1
        labels.append(base if seen[base] == 1 else f"{base}{seen[base]}")
    return labels


def cmd_compare(args):
    system, init, _, _ = _load_system(args.system)
    u = parse_input(args.input, system.m)
    T = args.horizon
    full = simulate(system, init, u, T).outputs
    models = []
    for path in args.reduced:
        rsys, rinit, red, _ = _load_system(path)
        if rsys.m != system.m or rsys.p != system.p:
            raise ArgumentError(f"{path}: model has m={rsys.m}, p={rsys.p}; "
                                f"full system has m={system.m}, p={system.p}")
        models.append((path, rsys, rinit, red))
    labels = _labels([m[0] for m in models], [m[3] for m in models])
    columns = [(f"y_full{i + 1}", full[:, i]) for i in range(system.p)]
    summary = {"system": args.system, "input": args.input, "horizon": T, "models": []}
    for label, (path, rsys, rinit, red) in zip(labels, models):
        t0 = time.perf_counter()
        y = simulate(rsys, rinit, u, T).outputs
        sim_time = time.perf_counter() - t0
        met = error_metrics(full, y)
        columns += [(f"{label}_y{i + 1}", y[:, i]) for i in range(system.p)]
        columns.append((f"{label}_abs_err", met.abs_err))
        params = red.params if red is not None else {}
        summary["models"].append({
            "label": label, "file": path, "method": red.method if red else None,
            "r": rsys.n, "rel_l2": met.rel_l2, "max_abs_err": met.max_abs,
            "reduction_wall_clock": params.get("wall_clock"),
            "simulation_seconds": sim_time, "params": params,
        })
    csv_text = _outputs_csv(T, columns)
    if args.format == "json":
        _emit(_dump_json(summary), args.out)
        return EXIT_OK
    _emit(csv_text, args.out)
    if args.summary:
        summary_path = args.summary
    elif args.out not in (None, "-"):
        summary_path = os.path.splitext(args.out)[0] + ".summary.json"
    else:
        summary_path = None
    if summary_path:
        _atomic_text(summary_path, _dump_json(summary))
    else:
        sys.stderr.write(_dump_json(summary))
    return EXIT_OK


def cmd_selftest(args):
    results = run_selftest(fault=args.inject_fault)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("selftest:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="tdsmor", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark system to a file")
    g.add_argument("benchmark", help="platoon[:n=512], convdiff[:h=25], rod[:n=1500], "
                                     "random[:n=30,delays=1+2,seed=0,margin=0.1]")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--quiet", action="store_true")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reduce", help="reduce a stored system")
    r.add_argument("--system", required=True)
    r.add_argument("--method", required=True, choices=METHODS)
    r.add_argument("--order", type=int, help="reduced order r (combbt, grambt, dominant)")
    r.add_argument("--walsh-N", dest="walsh_N", type=int, default=DEFAULT_WALSH_N)
    r.add_argument("--laguerre-K", dest="laguerre_K", type=int, default=DEFAULT_K)
    r.add_argument("--discount", type=float, default=DEFAULT_DISCOUNT)
    r.add_argument("--scheme", choices=("causal", "normalized"), default="causal")
    r.add_argument("--tol", type=float, default=1e-10)
    r.add_argument("--input", help="input descriptor (walsh methods)")
    r.add_argument("--memory-cap", dest="memory_cap", type=int, default=LIFTED_MEMORY_CAP)
    r.add_argument("--out", required=True)
    r.add_argument("--report", default=None, help="JSON report path (default stdout)")
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("simulate", help="simulate a stored system")
    s.add_argument("--system", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--horizon", type=int, required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="compare reduced models with the full system")
    c.add_argument("--system", required=True)
    c.add_argument("--reduced", nargs="+", required=True)
    c.add_argument("--input", required=True)
    c.add_argument("--horizon", type=int, required=True)
    c.add_argument("--out", default="-")
    c.add_argument("--summary", default=None, help="JSON summary path "
                                                   "(default: next to --out)")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("selftest", help="run the small-size invariant checks")
    t.add_argument("--inject-fault", action="store_true",
                   help="perturb the Walsh summation matrix (negative control)")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "horizon", 1) is not None and getattr(args, "horizon", 1) < 1:
        parser.error("--horizon must be at least 1")
    try:
        return args.func(args)
    except ArgumentError as exc:
        print(f"tdsmor: error: {exc}", file=sys.stderr)
        return EXIT_ARG
    except CapacityError as exc:
        print(f"tdsmor: capacity: {exc}", file=sys.stderr)
        return EXIT_CAP
    except NumericalError as exc:
        diag = getattr(exc, "diagnostics", {})
        extra = f" {json.dumps(_jsonable(diag))}" if diag else ""
        print(f"tdsmor: numerical: {exc}{extra}", file=sys.stderr)
        return EXIT_NUM
    except OSError as exc:
        print(f"tdsmor: i/o: {exc}", file=sys.stderr)
        return EXIT_IO
    except TdsMorError as exc:
        print(f"tdsmor: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
