"""Command line entry point: ``rdp-audit {run,oracle,sweep}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import divergence as div
from . import harness, oracles
from .density import BandwidthRule, DEFAULT_GRID_SIZE, DEFAULT_UNDERSMOOTH
from .mechanisms import MECHANISMS, build_mechanism

log = logging.getLogger("rdp_audit")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}")


def _bandwidth(text: str) -> str:
    if text in ("rot", "plugin"):
        return text
    if text.startswith("fixed:"):
        try:
            if float(text.split(":", 1)[1]) > 0:
                return text
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"bandwidth must be rot, plugin or fixed:<h>, got {text!r}")


def _count(text: str) -> int:
    value = int(float(text))
    if value != float(text):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return value


def _add_mechanism_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mechanism", required=True, choices=sorted(MECHANISMS))
    p.add_argument("--lambda", dest="lams", type=_float_list, default=[2.0],
                   help="comma separated Renyi orders (default 2)")
    p.add_argument("--m", type=int, default=10, help="database size (default 10)")
    p.add_argument("--b", type=float, help="noise scale / standard deviation")
    p.add_argument("--gamma", type=float, help="subsampling inclusion probability")
    p.add_argument("--eps0", type=float, help="local randomized response parameter")
    p.add_argument("--eta", type=float, help="gradient descent learning rate")
    p.add_argument("--iters", type=int, help="gradient descent iterations")
    p.add_argument("--subsample-formula", choices=oracles.SUBSAMPLE_FORMULAS, default="order_j")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    _add_mechanism_args(p)
    p.add_argument("--n", type=_count, default=div.DEFAULT_N, help="samples per database")
    p.add_argument("--alpha", type=float, default=div.DEFAULT_ALPHA)
    p.add_argument("--reps", type=int, default=1, help="replications")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--bandwidth", type=_bandwidth, default="rot", help="rot | plugin | fixed:<h>")
    p.add_argument("--undersmooth", type=float, default=DEFAULT_UNDERSMOOTH)
    p.add_argument("--kernel", choices=("gaussian", "silverman"), default="gaussian")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--timing", action="store_true",
                   help="record wall time per replication (output is then not byte-reproducible)")
    p.add_argument("--out-csv")
    p.add_argument("--out-json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdp-audit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replicated lower-bound experiment")
    _add_run_args(run)
    run.add_argument("--tau", type=float, default=div.DEFAULT_TAU)
    run.add_argument("--beta", type=float, default=div.DEFAULT_BETA)

    orc = sub.add_parser("oracle", help="print closed-form divergences")
    _add_mechanism_args(orc)

    sweep = sub.add_parser("sweep", help="repeat run over (tau, beta) pairs")
    _add_run_args(sweep)
    sweep.add_argument("--taus", type=_float_list, default=[1e-5, 5e-6])
    sweep.add_argument("--betas", type=_float_list, default=None,
                       help="one beta per tau (default 1/tau)")
    return parser


def _mechanism(args):
    return build_mechanism(args.mechanism, b=args.b, gamma=args.gamma, eps0=args.eps0,
                           eta=args.eta, iters=args.iters)


def _plan(args, tau, beta) -> harness.ExperimentPlan:
    config = div.EstimatorConfig(
        alpha=args.alpha,
        floor=div.FloorParams(tau, beta),
        bandwidth=BandwidthRule.parse(args.bandwidth, args.undersmooth),
        kernel=args.kernel,
        grid_size=args.grid,
    )
    return harness.ExperimentPlan(
        mechanism=_mechanism(args),
        lams=tuple(args.lams),
        n=args.n,
        config=config,
        replications=args.reps,
        seed=args.seed,
        m=args.m,
        subsample_formula=args.subsample_formula,
    )


def _print_summary(stats, tau, beta):
    for lam, s in sorted(stats.items()):
        print(f"{s.mechanism} lambda={lam:g} tau={tau:g} beta={beta:g} R={s.replications} "
              f"alpha_hat={s.alpha_hat:.3f} median_ratio={s.ratio_median:.4f} "
              f"IQR=[{s.ratio_q25:.4f}, {s.ratio_q75:.4f}]")


def _floors(args) -> list[tuple[float, float]]:
    if args.command == "run":
        return [(args.tau, args.beta)]
    # 1/tau rounded so that tau=1e-5 gives exactly 1e5
    betas = args.betas or [float(f"{1.0 / t:.15g}") for t in args.taus]
    if len(betas) != len(args.taus):
        raise ValueError("--betas needs one value per --taus entry")
    return list(zip(args.taus, betas))


def _execute(args, plans) -> None:
    all_records, blocks = [], []
    for (tau, beta), plan in plans:
        records, stats = harness.run_experiment(plan, args.threads, args.timing)
        _print_summary(stats, tau, beta)
        all_records.extend(records)
        blocks.extend(harness.summary_json(stats, plan.params()))
    if args.out_csv:
        harness.write_csv(all_records, args.out_csv)
    if args.out_json:
        try:
            with open(args.out_json, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(blocks, fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write JSON to {args.out_json}: {exc}") from exc


def main(argv=None) -> int:
    """Exit status 0 on success, 2 on argument errors, 1 on runtime errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    # argument-level validation: bad parameter values count as usage errors
    try:
        if args.command == "oracle":
            spec = _mechanism(args)
        else:
            plans = [((tau, beta), _plan(args, tau, beta)) for tau, beta in _floors(args)]
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"rdp-audit: error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "oracle":
            for lam in args.lams:
                print(f"{oracles.true_divergence(spec, lam, args.m, args.subsample_formula):.12g}")
        else:
            _execute(args, plans)
    except Exception as exc:
        print(f"rdp-audit: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
