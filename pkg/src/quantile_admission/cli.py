"""Command-line entry point.

Subcommands::

    simulate  run one chain and write its trace CSV
    drift     tabulate rho and rho_plus, or report the sign decomposition (drift roots)
    classify  list every candidate limit with its case tags
    limit     write (x, density, tail) of the predicted limit
    ensemble  run replicas from a config file and write a JSON summary
    verify    run the acceptance checks

``--measure`` takes a config file with a [measure] section or an inline
``family:key=value,...`` string such as ``exponential:rate=2``.
"""

import argparse
import csv
import json
import sys

from . import __version__
from .config import ExperimentConfig, parse_measure_arg
from .drift import drift_table, sign_analysis
from .errors import ConfigError, NumericError, QuantileAdmissionError
from .harness import estimate_limit_quantile, run_ensemble
from .limits import classify, limit_table
from .process import ENGINES, run_chain
from .streams import as_fraction

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _fraction(text):
    try:
        return as_fraction(text)
    except (ConfigError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def cmd_simulate(args):
    mu = parse_measure_arg(args.measure)
    tr = run_chain(mu, args.r, args.n, args.engine, seed=args.seed, stream=args.stream)
    if args.trace:
        tr.to_csv(args.trace, args.thin)
    out = {"n": len(tr), "final_m": float(tr.final_m), "engine": args.engine}
    if len(tr) >= 16:
        m_hat, se = estimate_limit_quantile(tr)
        out.update(m_hat=m_hat, stderr=se)
    if tr.t[-1] >= 0:
        out["rounds"] = int(tr.t[-1])
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_drift(args):
    mu = parse_measure_arg(args.measure)
    if args.action == "roots":
        text = sign_analysis(mu, float(args.r), args.grid).report()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    rows = drift_table(mu, float(args.r), args.grid)
    if args.out:
        _write_rows(args.out, ("m", "rho", "rho_plus"), rows)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(("m", "rho", "rho_plus"))
        w.writerows(rows)
    return EXIT_OK


def cmd_classify(args):
    mu = parse_measure_arg(args.measure)
    sys.stdout.write(classify(mu, float(args.r), args.grid).report())
    return EXIT_OK


def cmd_limit(args):
    mu = parse_measure_arg(args.measure)
    cls = classify(mu, float(args.r))
    if not cls.specs:
        raise NumericError("no limit candidate found")
    if not 0 <= args.index < len(cls.specs):
        raise ConfigError(f"--index must lie in [0, {len(cls.specs) - 1}]")
    if len(cls.specs) > 1 or cls.continuum:
        print(f"warning: {len(cls.specs)} candidate limits; writing index {args.index}",
              file=sys.stderr)
    spec = cls.specs[args.index]
    _write_rows(args.out, ("x", "density", "tail"), limit_table(spec, args.points))
    print(spec.describe())
    return EXIT_OK


def cmd_ensemble(args):
    cfg = ExperimentConfig.from_file(args.config)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    summary = run_ensemble(cfg, workers=args.workers)
    if not cfg.out_dir:
        print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"verdict={summary.verdict} clusters={len(summary.clusters)} "
              f"failed={len(summary.failed)} -> {cfg.out_dir}")
    return EXIT_OK


def cmd_verify(args):
    from .acceptance import run_all

    results = run_all(args.only)
    failed = [r.id for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="quantile-admission", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def measure_args(sp, grid=True):
        sp.add_argument("--measure", required=True, help="config path or family:key=value,...")
        sp.add_argument("--r", required=True, type=_fraction, help="quantile level in (0,1)")
        if grid:
            sp.add_argument("--grid", type=int, default=512, help="grid resolution")

    sp = sub.add_parser("simulate", help="run one chain")
    measure_args(sp, grid=False)
    sp.add_argument("--n", type=int, required=True, help="admissions")
    sp.add_argument("--engine", choices=ENGINES, default="threshold")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stream", type=int, default=0)
    sp.add_argument("--trace", help="trace CSV path")
    sp.add_argument("--thin", type=int, default=1, help="keep every n-th trace row")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("drift", help="drift table or sign decomposition")
    sp.add_argument("action", nargs="?", choices=("table", "roots"), default="table")
    measure_args(sp)
    sp.add_argument("--out", help="output path (stdout if omitted)")
    sp.set_defaults(func=cmd_drift)

    sp = sub.add_parser("classify", help="candidate limits and determinism verdict")
    measure_args(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("limit", help="predicted limit density and tail on a grid")
    measure_args(sp, grid=False)
    sp.add_argument("--out", required=True)
    sp.add_argument("--points", type=int, default=512)
    sp.add_argument("--index", type=int, default=0, help="which candidate when several exist")
    sp.set_defaults(func=cmd_limit)

    sp = sub.add_parser("ensemble", help="replicas from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir", help="override [output] dir")
    sp.add_argument("--workers", type=int, help="worker processes (default: QC_THREADS or CPU count)")
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("verify", help="run the acceptance checks")
    sp.add_argument("--only", type=int, nargs="+", help="criterion numbers")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QuantileAdmissionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
