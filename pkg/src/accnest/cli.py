"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence.
"""

import argparse
import logging
import sys

from . import harness
from .errors import ConfigError, DivergenceError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

_CFG_KEYS = {"problem", "method", "restart", "seed", "tol_grad", "max_grad_calls",
             "out", "traj", "traj_coords", "no_timing", "cache_dir"}


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _parse_restart(raw):
    if raw is None or str(raw).lower() in ("", "none"):
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"bad restart period {raw!r}") from exc


def _parse_coords(raw):
    if raw is None:
        return None
    try:
        i, j = (int(s) for s in str(raw).split(","))
    except ValueError as exc:
        raise ConfigError(f"--traj-coords expects i,j, got {raw!r}") from exc
    return i, j


def _parse_bool(raw):
    return str(raw).strip().lower() in ("1", "true", "yes", "on")


def build_config(args):
    """Merge the optional config file with command line overrides."""
    values = read_config_file(args.config) if args.config else {}
    params = {k: v for k, v in values.items() if k not in _CFG_KEYS}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    for key in _CFG_KEYS:
        cli_val = getattr(args, key, None)
        if cli_val not in (None, False):
            values[key] = cli_val
    try:
        cfg = harness.ExperimentConfig(
            problem=values.get("problem", "bowl"),
            method=values.get("method", "nmul"),
            restart_period=_parse_restart(values.get("restart")),
            seed=int(values.get("seed", 0)),
            tol_grad=float(values.get("tol_grad", 1e-10)),
            max_grad_calls=int(values.get("max_grad_calls", 20_000)),
            out=values.get("out"),
            traj=values.get("traj"),
            traj_coords=_parse_coords(values.get("traj_coords")),
            timing=not _parse_bool(values.get("no_timing", False)),
            params=params,
            cache_dir=values.get("cache_dir"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def make_parser():
    p = argparse.ArgumentParser(prog="accnest", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--problem", choices=harness.PROBLEMS)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tol-grad", dest="tol_grad", type=float)
        sp.add_argument("--max-grad-calls", dest="max_grad_calls", type=int)
        sp.add_argument("--no-timing", dest="no_timing", action="store_true",
                        help="write zeros in the time_ns column")
        sp.add_argument("--cache-dir", dest="cache_dir",
                        help="directory for problem and reference caches")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="problem parameter, e.g. n=200 (repeatable)")
        sp.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", help="run one method and write its trace")
    common(run)
    run.add_argument("--method", choices=harness.METHODS)
    run.add_argument("--restart", help="restart period for nl, or 'none'")
    run.add_argument("--out", help="trace CSV path")
    run.add_argument("--traj", help="trajectory projection CSV path")
    run.add_argument("--traj-coords", dest="traj_coords",
                     help="1-based coordinates i,j for --traj (default 1,n)")

    cmp_ = sub.add_parser("compare", help="compare methods on one problem")
    common(cmp_)
    cmp_.add_argument("--methods", default=",".join(harness.METHODS[:-1]),
                      help="comma-separated methods; nl sweeps restart periods")
    cmp_.add_argument("--metric", choices=("f_gap", "x_err"), default="f_gap")
    cmp_.add_argument("--out", help="comparison CSV path (default stdout)")

    eta = sub.add_parser("eta", help="sample the feasibility cubic on [0, 1]")
    eta.add_argument("--rho", type=float, required=True)
    eta.add_argument("--d", type=float, required=True)
    eta.add_argument("--samples", type=int, default=201)
    eta.add_argument("--out")
    return p


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        if args.command == "eta":
            _emit(harness.eta_samples_csv(args.rho, args.d, args.samples), args.out)
            return EXIT_OK
        if args.command == "run":
            cfg = build_config(args)
            result = harness.run_experiment(cfg)
            print(harness.format_summary(result.summary))
            return EXIT_OK
        out = args.out
        args.out = None
        base = build_config(argparse.Namespace(**{**vars(args), "method": None}))
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        cfgs = [harness.ExperimentConfig(**{**vars(base), "method": m}).validate()
                for m in methods]
        rows, _ = harness.compare(cfgs, metric=args.metric)
        _emit(harness.compare_csv(rows), out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
