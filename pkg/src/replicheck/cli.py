"""Command-line interface.

Three commands: ``two-group`` (analytic assessment of an
original/replication pair), ``exchangeable`` (Monte Carlo assessment of a
study set), and ``simulate`` (the contamination/selection sweeps).  Exit
codes: 0 success, 2 input error, 3 numeric degeneracy, 4 configuration
error.
"""

import argparse
import sys

from .classic import cochran_q, egger_test
from .consistency import DEFAULT_TARGETS
from .grid import default_exchangeable_model, default_two_group_model
from .io import (
    build_result_document,
    dump_result,
    read_exchangeable_csv,
    read_two_group_csv,
    write_sweep_csvs,
)
from .model import (
    ConfigError,
    InfeasibleCensoringError,
    InputError,
    NumericDegeneracyError,
)
from .posterior import DEFAULT_DRAWS, DEFAULT_SEED, get_quantity, posterior_prp
from .prior import prior_prp, prior_prp_pub_bias
from .simlab import sensitivity_sweep


class _Parser(argparse.ArgumentParser):
    # Bad flags and flag values are configuration errors (exit 4), not
    # argparse's default exit 2, which this tool reserves for input data.
    def error(self, message):
        self.exit(4, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"--alpha must lie in (0, 1), got {alpha}")


def build_parser():
    parser = _Parser(prog="replicheck", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    two = sub.add_parser(
        "two-group", parents=[], help="assess an original/replication pair"
    )
    two.add_argument("input_csv", help="CSV with header study_id,role,beta_hat,se")
    two.add_argument("--sided", choices=("two", "high", "low"), default="two")
    two.add_argument(
        "--statistic",
        choices=("default", "pub-bias"),
        default="default",
        help="pub-bias uses the one-sided shrinkage-ratio assessment (--sided ignored)",
    )
    two.add_argument("--alpha", type=float, default=0.05, help="predictive interval level")
    two.add_argument(
        "--gamma-targets",
        type=_float_list,
        default=DEFAULT_TARGETS,
        metavar="T1,T2,...",
        help="sign-consistency targets for the gamma grid",
    )
    two.add_argument(
        "--lambda-override",
        type=_float_list,
        default=None,
        metavar="L1,L2,...",
        help="replace the data-anchored scale grid with these lambda_sq values",
    )
    two.add_argument("--out", default=None, help="write JSON here instead of stdout")
    two.set_defaults(func=_cmd_two_group)

    exch = sub.add_parser("exchangeable", help="assess an exchangeable study set")
    exch.add_argument("input_csv", help="CSV with header study_id,beta_hat,se")
    exch.add_argument("--quantity", choices=("q", "egger"), default="q")
    exch.add_argument("--draws", type=int, default=DEFAULT_DRAWS)
    exch.add_argument("--seed", type=int, default=DEFAULT_SEED)
    exch.add_argument(
        "--classic",
        action="store_true",
        help="also report Cochran's Q and Egger regression",
    )
    exch.add_argument(
        "--smoothed",
        action="store_true",
        help="use the (hits+1)/(draws+1) estimator instead of hits/draws",
    )
    exch.add_argument("--out", default=None)
    exch.set_defaults(func=_cmd_exchangeable)

    sim = sub.add_parser("simulate", help="run contamination/selection sweeps")
    sim_sub = sim.add_subparsers(dest="sim_kind", required=True)

    batch = sim_sub.add_parser("batch", help="batch-effect contamination sweep")
    batch.add_argument("--design", choices=("two-group", "exchangeable"), default="two-group")
    batch.add_argument(
        "--eta", type=_float_list, default=(0.0, 0.6, 1.0), metavar="E1,E2,..."
    )
    batch.add_argument(
        "--sigma-rep",
        type=float,
        default=None,
        help="replication residual sd (two-group design only)",
    )
    _add_sweep_flags(batch)
    batch.set_defaults(func=_cmd_simulate_batch)

    pub = sim_sub.add_parser("pubbias", help="publication-bias censoring sweep")
    pub.add_argument("--design", choices=("two-group", "exchangeable"), default="two-group")
    pub.add_argument(
        "--p-threshold",
        type=_float_list,
        default=None,
        metavar="T1,T2,...",
        help="hard censoring thresholds (two-group design)",
    )
    pub.add_argument(
        "--c",
        type=_float_list,
        default=None,
        metavar="C1,C2,...",
        help="soft censoring strengths (exchangeable design)",
    )
    _add_sweep_flags(pub)
    pub.set_defaults(func=_cmd_simulate_pubbias)

    return parser


def _add_sweep_flags(sub):
    sub.add_argument("--reps", type=int, default=1000)
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sub.add_argument("--alpha", type=float, default=0.05)
    sub.add_argument(
        "--draws", type=int, default=2000, help="Monte Carlo draws per assessment"
    )
    sub.add_argument("--out-dir", default=".")


def _emit(doc, out_path):
    if out_path is None:
        dump_result(doc, sys.stdout)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            dump_result(doc, fh)


def _cmd_two_group(args):
    _check_alpha(args.alpha)
    pair = read_two_group_csv(args.input_csv)
    model = default_two_group_model(
        pair.original,
        gamma_targets=args.gamma_targets,
        lambda_override=args.lambda_override,
    )
    if args.statistic == "pub-bias":
        result = prior_prp_pub_bias(pair, model=model)
    else:
        result = prior_prp(pair, model=model, sided=args.sided, alpha=args.alpha)
    doc = build_result_document(result, model, "prior_predictive", "two_group")
    _emit(doc, args.out)
    return 0


def _cmd_exchangeable(args):
    studies = read_exchangeable_csv(args.input_csv)
    if len(studies) < 2:
        raise InputError(f"need at least 2 studies, got {len(studies)}")
    model = default_exchangeable_model(studies)
    quantity = get_quantity(args.quantity)
    result = posterior_prp(
        studies,
        model=model,
        quantity=quantity,
        draws=args.draws,
        seed=args.seed,
        smoothed=args.smoothed,
    )
    classic = None
    if args.classic:
        classic = {"cochran_q": cochran_q(studies)}
        try:
            classic["egger"] = egger_test(studies)
        except (InputError, NumericDegeneracyError) as exc:
            print(f"replicheck: note: Egger comparator skipped: {exc}", file=sys.stderr)
            classic["egger"] = None
    doc = build_result_document(
        result, model, "posterior_predictive", "exchangeable", classic=classic
    )
    _emit(doc, args.out)
    return 0


def _run_sweep(scenario, magnitudes, args, overrides):
    _check_alpha(args.alpha)
    sweep = sensitivity_sweep(
        scenario,
        magnitudes,
        n_reps=args.reps,
        alpha=args.alpha,
        seed=args.seed,
        draws=args.draws,
        config=overrides,
    )
    prefix = scenario.replace("-", "_")
    rep_path, sum_path = write_sweep_csvs(sweep, args.out_dir, prefix)
    for row in sweep.summary:
        print(f"magnitude={row.magnitude:g} method={row.method} flag_rate={row.flag_rate:.4f}")
    print(f"wrote {rep_path}")
    print(f"wrote {sum_path}")
    return 0


def _cmd_simulate_batch(args):
    overrides = {}
    if args.sigma_rep is not None:
        if args.design != "two-group":
            raise ConfigError("--sigma-rep applies to the two-group design only")
        overrides["residual_sd"] = (1.0, args.sigma_rep)
    scenario = f"batch-{args.design}"
    return _run_sweep(scenario, args.eta, args, overrides)


def _cmd_simulate_pubbias(args):
    if args.design == "two-group":
        if args.c is not None:
            raise ConfigError("--c applies to the exchangeable design only")
        magnitudes = args.p_threshold or (0.01, 0.05, 1.0)
    else:
        if args.p_threshold is not None:
            raise ConfigError("--p-threshold applies to the two-group design only")
        magnitudes = args.c if args.c is not None else (0.0, 5.0, 10.0)
    scenario = f"pubbias-{args.design}"
    return _run_sweep(scenario, magnitudes, args, {})


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(2, exc)
    except NumericDegeneracyError as exc:
        return _fail(3, exc)
    except (ConfigError, InfeasibleCensoringError) as exc:
        return _fail(4, exc)
    except OSError as exc:
        return _fail(2, exc)


def _fail(code, exc):
    print(f"replicheck: error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
