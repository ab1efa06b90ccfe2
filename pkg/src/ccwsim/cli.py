"""Command-line interface.

Subcommands: ``simulate``, ``analyze``, ``table2``, ``curve`` and ``oracle``.
Every subcommand accepts ``--config FILE`` with ``key=value`` lines naming
its options (dashes or underscores); flags given on the command line win.
Commands that draw random numbers require an explicit ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .ccw import WeightScheme, clone_and_censor, estimate_weights, weighted_risk
from .cohort import (
    INTERVENTION_KINDS,
    Intervention,
    RiskEstimate,
    TreatmentModel,
    closed_form_risk,
    mc_risk,
    simulate_intervention,
)
from .errors import CCWError, ConfigurationError
from .experiments import (
    DESK_N,
    DESK_REPS,
    DISTRIBUTIONS,
    EQUALITY_TOLERANCE,
    FULL_N,
    FULL_REPS,
    StartDistribution,
    check_table3,
    initiation_curve,
    render_table2,
    run_table2,
)
from .io import (
    curve_csv,
    parse_cohort_csv,
    write_cohort_csv,
    write_manifest,
    write_risk_csv,
    write_table2_csv,
    write_weights_csv,
)
from .scenarios import CATALOG, get_scenario, load_scenario

BOOL_KEYS = {"full_scale"}


def _p_init(text: str) -> tuple:
    try:
        return tuple(tuple(float(v) for v in row.split(",")) for row in text.split(";"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'p0c0,p0c1;p1c0,p1c1;...', got {text!r}") from None


def _days(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated days, got {text!r}") from None


def _model_args(sp):
    sp.add_argument("--scenario", default="base", choices=list(CATALOG), help="built-in outcome model")
    sp.add_argument("--scenario-file", help="key=value outcome model; overrides --scenario")
    sp.add_argument("--p-c1", type=float, default=0.5, help="P(C=1) at baseline")
    sp.add_argument("--p-init", type=_p_init, default="0.2,0.4;0.3,0.3;0,0",
                    help="initiation probabilities per period, 'c0,c1' rows separated by ';'")


def _random_args(sp):
    sp.add_argument("--seed", type=int, default=None, help="master seed (required)")
    sp.add_argument("--workers", type=int, default=1)


def _intervention_args(sp, default):
    sp.add_argument("--intervention", choices=INTERVENTION_KINDS, default=default)
    sp.add_argument("--window-start", type=int, default=0)
    sp.add_argument("--window-end", type=int, default=1)
    sp.add_argument("--history", choices=("conditional", "marginal"), default="conditional")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="ccwsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    sp = subs["simulate"] = sub.add_parser("simulate", help="simulate a cohort and write person-period CSV")
    _model_args(sp)
    _random_args(sp)
    _intervention_args(sp, "natural")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--replicate", type=int, default=0)
    sp.add_argument("--out", help="output CSV path")

    sp = subs["analyze"] = sub.add_parser("analyze", help="clone-censor-weight analysis of a person-period CSV")
    sp.add_argument("--input", help="person-period CSV")
    sp.add_argument("--window", type=int, default=1, help="window-end period of the initiation regimen")
    sp.add_argument("--scheme", choices=["limited", "all_initiator", "both"], default="limited")
    sp.add_argument("--horizon", type=int, default=None, help="risk horizon (default: data horizon)")
    sp.add_argument("--tie-tolerance", type=int, default=0)
    sp.add_argument("--out", help="output directory for risk.csv, weights CSVs and manifest")

    sp = subs["table2"] = sub.add_parser("table2", help="CCW estimates and oracle risks for every scenario")
    sp.add_argument("--p-c1", type=float, default=0.5)
    sp.add_argument("--p-init", type=_p_init, default="0.2,0.4;0.3,0.3;0,0")
    _random_args(sp)
    sp.add_argument("--n", type=int, default=DESK_N)
    sp.add_argument("--reps", type=int, default=DESK_REPS)
    sp.add_argument("--ccw-pool", type=int, default=None,
                    help="replicate populations pooled into the CCW cohort (default: all)")
    sp.add_argument("--tolerance", type=float, default=EQUALITY_TOLERANCE)
    sp.add_argument("--full-scale", action="store_true",
                    help=f"n={FULL_N:,}, reps={FULL_REPS}, CCW on a single cohort")
    sp.add_argument("--out", help="output directory")

    sp = subs["curve"] = sub.add_parser("curve", help="cumulative initiation under the implied intervention")
    sp.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform")
    sp.add_argument("--never", type=float, default=0.0, help="share who never initiate naturally")
    sp.add_argument("--window", type=int, default=30, help="window end in days")
    sp.add_argument("--resolution", type=int, default=1, help="days between points")
    sp.add_argument("--mu", type=float)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--days", type=_days, default="", help="start days for --dist empirical")
    sp.add_argument("--out", help="output CSV path")

    sp = subs["oracle"] = sub.add_parser("oracle", help="Monte Carlo (and closed-form) risk under an intervention")
    _model_args(sp)
    _random_args(sp)
    _intervention_args(sp, "feasible")
    sp.add_argument("--n", type=int, default=DESK_N)
    sp.add_argument("--reps", type=int, default=DESK_REPS)
    sp.add_argument("--out", help="output CSV path")

    for sp in subs.values():
        sp.add_argument("--config", help="key=value file of option defaults")
    return parser, subs


def read_config(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or not key:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        out[key.replace("-", "_")] = value
    return out


def _parse(argv):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sp = subs[args.command]
        config = read_config(args.config)
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(config) - known - {"config"})
        if unknown:
            raise ConfigurationError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        for key in BOOL_KEYS & set(config):
            config[key] = config[key].lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ConfigurationError(f"--{name.replace('_', '-')} is required (flag or config key)")


def _treatment(args) -> TreatmentModel:
    return TreatmentModel(p_c1=args.p_c1, p_init=args.p_init)


def _scenario(args, horizon):
    if args.scenario_file:
        return load_scenario(args.scenario_file, horizon)
    return get_scenario(args.scenario)


def _intervention(args) -> Intervention:
    return Intervention(args.intervention, args.window_start, args.window_end, args.history)


def _echo(args) -> dict:
    return {k: (list(map(list, v)) if k == "p_init" else list(v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items())}


def cmd_simulate(args):
    _require(args, "seed", "out")
    tm = _treatment(args)
    spec = _scenario(args, tm.horizon)
    cohort = simulate_intervention(spec, tm, _intervention(args), args.n, args.seed, args.replicate, args.workers)
    write_cohort_csv(cohort, args.out)
    write_manifest(f"{args.out}.manifest.json", "simulate", _echo(args))
    print(f"wrote {len(cohort)} persons to {args.out}")


def cmd_analyze(args):
    _require(args, "input")
    cohort = parse_cohort_csv(args.input)
    horizon = cohort.horizon if args.horizon is None else args.horizon
    schemes = ["limited", "all_initiator"] if args.scheme == "both" else [args.scheme]
    clones = clone_and_censor(cohort, args.window, max(horizon, cohort.horizon))
    estimates, weighted = [], {}
    for scheme in schemes:
        w = estimate_weights(clones, WeightScheme(scheme), tie_tolerance=args.tie_tolerance)
        est = weighted_risk(w, horizon)
        estimates.append(RiskEstimate(est.risk, horizon, f"ccw:{scheme}", len(w)))
        weighted[scheme] = w
    text = write_risk_csv(estimates)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "risk.csv").write_text(text, encoding="utf-8")
        for scheme, w in weighted.items():
            write_weights_csv(w, out / f"weights_{scheme}.csv")
        write_manifest(out / "manifest.json", "analyze", _echo(args))
    sys.stdout.write(text)


def cmd_table2(args):
    _require(args, "seed")
    n, reps, pool = args.n, args.reps, args.ccw_pool
    if args.full_scale:
        n, reps, pool = FULL_N, FULL_REPS, 1 if pool is None else pool
    rows = run_table2(_treatment(args), n, reps, args.seed, args.workers, ccw_pool=pool)
    report = check_table3(rows, args.tolerance)
    text = render_table2(rows) + "\n" + report.render()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_table2_csv(rows, out / "table2.csv")
        (out / "table3_report.txt").write_text(text, encoding="utf-8")
        echo = _echo(args) | {"n": n, "reps": reps, "ccw_pool": pool}
        write_manifest(out / "manifest.json", "table2", echo)
    sys.stdout.write(text)


def cmd_curve(args):
    dist = StartDistribution(args.dist, args.never, args.mu, args.sigma, args.rate, args.days)
    text = curve_csv(initiation_curve(dist, args.window, args.resolution))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        write_manifest(f"{args.out}.manifest.json", "curve", _echo(args))
    sys.stdout.write(text)


def cmd_oracle(args):
    _require(args, "seed")
    tm = _treatment(args)
    spec = _scenario(args, tm.horizon)
    iv = _intervention(args)
    estimates = [mc_risk(spec, tm, iv, args.n, args.reps, args.seed, workers=args.workers)]
    if iv.kind in ("start_at_0", "start_at_1"):
        exact = closed_form_risk(spec, tm.p_c1, int(iv.kind[-1]), tm.horizon)
        estimates.append(RiskEstimate(exact, tm.horizon, f"closed_form:{iv.kind}", 0, 0, spec.name))
    text = write_risk_csv(estimates, args.out)
    if args.out:
        write_manifest(f"{args.out}.manifest.json", "oracle", _echo(args))
    sys.stdout.write(text)


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "table2": cmd_table2,
    "curve": cmd_curve,
    "oracle": cmd_oracle,
}


def run_cli(argv=None) -> int:
    """Run one subcommand; returns the process exit status.

    0 on success, 2 for usage errors, otherwise the exit code of the
    :class:`CCWError` subclass raised (3 configuration, 4 input data,
    5 estimation or simulation).
    """
    try:
        args = _parse(argv)
        COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except CCWError as exc:
        print(f"error [{exc.module}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [io_cli] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
