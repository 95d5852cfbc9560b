"""Command-line harness.

Subcommands:

* ``run``        one experiment (full information or bandit) over a stream
                 file or a synthetic stream spec; writes the round log CSV
                 and prints a key=value summary.
* ``figure1``    the binary-margin gap-curve grid as a 4-column CSV.
* ``abstention`` the expert-advice-with-abstention simulation and audit.
* ``sweep``      a grid of (K, T) runs summarized one row per cell.

Synthetic stream specs look like ``separable:margin=1.0,u-norm=3.0`` or
``label-noise:rate=0.1,margin=1.0,u-norm=3.0`` (keys may also use
underscores); class count, dimension, bound, and horizon come from the main
flags.  If the --stream value names an existing file it is parsed as a
stream file instead.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .abstention import (
    AbstentionCostError,
    emit_abstention_csv,
    simulate,
    theorem7_audit,
)
from .environments import (
    StreamFormatError,
    StreamGenerationError,
    StreamSpec,
    generate,
    load_stream,
)
from .harness import (
    BoundViolationError,
    HarnessError,
    emit_figure1_csv,
    emit_round_csv,
    emit_summary,
    figure1_curves,
    format_summary,
    run_bandit,
    run_full_info,
)
from .learner import ConfigError, FeedbackMode, GaptronConfig
from .losses import LossFamily

LOSS_NAMES = {
    "logistic": LossFamily.LOGISTIC,
    "hinge": LossFamily.HINGE,
    "smooth-hinge": LossFamily.SMOOTH_HINGE,
}
FEEDBACK_NAMES = {
    "full-info": FeedbackMode.FULL_INFO,
    "bandit": FeedbackMode.BANDIT,
}


def _parse_stream_options(text: str) -> dict[str, str]:
    options: dict[str, str] = {}
    if not text:
        return options
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"bad stream option {item!r}, expected key=value")
        key, value = item.split("=", 1)
        options[key.strip().replace("-", "_")] = value.strip()
    return options


def resolve_stream(args) -> "LabeledStream":
    """A file path loads a stream file; anything else parses as a spec."""
    text = args.stream
    if os.path.exists(text):
        return load_stream(text, x_bound=args.x_bound, norm_policy=args.norm_policy)
    kind, _, rest = text.partition(":")
    kind = kind.strip().replace("-", "_")
    if kind not in ("separable", "label_noise"):
        raise ValueError(
            f"--stream {text!r} is neither an existing file nor a "
            "separable:/label-noise: spec"
        )
    options = _parse_stream_options(rest)
    spec = StreamSpec(
        kind=kind,
        n_classes=args.k,
        n_features=args.d,
        x_bound=args.x_bound,
        u_norm=float(options.pop("u_norm", 3.0)),
        horizon=args.horizon,
        margin=float(options.pop("margin", 1.0)),
        noise_rate=float(options.pop("rate", 0.0)),
        rng_seed=int(options.pop("seed", args.seed)),
    )
    if options:
        raise ValueError(f"unknown stream options: {sorted(options)}")
    return generate(spec)


def cmd_run(args) -> int:
    loss = LOSS_NAMES[args.loss]
    feedback = FEEDBACK_NAMES[args.feedback]
    stream = resolve_stream(args)
    # file streams fix the horizon to their own length
    horizon = len(stream.examples) if stream.examples else args.horizon
    config = GaptronConfig(
        loss=loss,
        feedback=feedback,
        n_classes=max(args.k, stream.n_classes),
        n_features=stream.examples[0].features.shape[0] if stream.examples else args.d,
        radius=args.radius,
        x_bound=args.x_bound,
        horizon=horizon,
        beta=args.beta,
        eta_override=args.eta,
        gamma_override=args.gamma,
        rng_seed=args.seed,
        norm_policy=args.norm_policy,
    )
    if feedback is FeedbackMode.FULL_INFO:
        result = run_full_info(config, stream, enforce_bound=False)
        first = result
    else:
        aggregate = run_bandit(config, stream, n_seeds=args.seeds, enforce_bound=False)
        result = aggregate
        first = aggregate.runs[0]
    if args.out:
        emit_round_csv(first, args.out)
    summary = format_summary(result, n_seeds=args.seeds)
    sys.stdout.write(summary)
    if args.summary_out:
        emit_summary(result, args.summary_out)
    return 0


def cmd_figure1(args) -> int:
    lo, hi, step = (float(v) for v in args.grid.split(":"))
    rows = figure1_curves(eta=args.eta, lo=lo, hi=hi, step=step)
    if args.out:
        emit_figure1_csv(rows, args.out)
    else:
        for z, green, red, blue in rows:
            sys.stdout.write(f"{z},{green},{red},{blue}\n")
    return 0


def cmd_abstention(args) -> int:
    trace = simulate(
        n_experts=args.experts,
        horizon=args.horizon,
        cost=args.cost,
        rng_seed=args.seed,
    )
    report = theorem7_audit(trace)
    if args.out:
        emit_abstention_csv(trace, args.out)
    for key in (
        "learner_loss",
        "best_expert_loss",
        "slack_term",
        "bound",
        "holds",
        "hedge_regret",
        "hedge_bound",
        "hedge_holds",
        "max_abstention_gap",
        "abstention_gap_holds",
        "n_rounds",
        "n_experts",
    ):
        value = getattr(report, key)
        if isinstance(value, bool):
            value = str(value).lower()
        sys.stdout.write(f"{key}={value}\n")
    return 0


SWEEP_COLUMNS = (
    "loss", "feedback", "k", "t", "d", "bound", "l_t", "m_t",
    "regret_actual", "gap_violations", "bound_holds",
)


def cmd_sweep(args) -> int:
    loss = LOSS_NAMES[args.loss]
    feedback = FEEDBACK_NAMES[args.feedback]
    k_values = [int(v) for v in args.k_grid.split(",")]
    horizons = [int(v) for v in args.t_grid.split(",")]
    rows = []
    for k in k_values:
        for horizon in horizons:
            spec = StreamSpec(
                kind="separable",
                n_classes=k,
                n_features=args.d,
                x_bound=args.x_bound,
                u_norm=args.u_norm,
                horizon=horizon,
                margin=args.margin,
                rng_seed=args.seed,
            )
            stream = generate(spec)
            config = GaptronConfig(
                loss=loss,
                feedback=feedback,
                n_classes=k,
                n_features=args.d,
                radius=args.u_norm,
                x_bound=args.x_bound,
                horizon=horizon,
                rng_seed=args.seed,
            )
            if feedback is FeedbackMode.FULL_INFO:
                result = run_full_info(config, stream, enforce_bound=False)
                l_t = result.comparator_loss
                m_t = result.expected_mistakes
            else:
                agg = run_bandit(config, stream, n_seeds=args.seeds,
                                 enforce_bound=False)
                result = agg
                l_t = agg.mean_comparator_loss
                m_t = agg.mean_realized_mistakes
            rows.append(
                [
                    args.loss, args.feedback, k, horizon, args.d,
                    repr(result.theorem_bound), repr(l_t), repr(m_t),
                    repr(m_t - l_t), result.gap_violations,
                    str(result.bound_holds).lower(),
                ]
            )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(SWEEP_COLUMNS)
            writer.writerows(rows)
    else:
        sys.stdout.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            sys.stdout.write(",".join(str(v) for v in row) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaptron",
        description="Online multiclass classification runs and audits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment over a stream")
    run.add_argument("--loss", choices=sorted(LOSS_NAMES), required=True)
    run.add_argument("--feedback", choices=sorted(FEEDBACK_NAMES),
                     default="full-info")
    run.add_argument("--k", type=int, default=3, help="number of classes")
    run.add_argument("--d", type=int, default=10, help="feature dimension")
    run.add_argument("--x-bound", type=float, default=1.0)
    run.add_argument("--radius", type=float, default=3.0,
                     help="Frobenius ball radius for the learner")
    run.add_argument("--horizon", type=int, default=1000)
    run.add_argument("--seeds", type=int, default=1,
                     help="independent trajectories (bandit aggregation)")
    run.add_argument("--stream", default="separable:margin=1.0,u-norm=3.0",
                     help="stream file path or synthetic spec")
    run.add_argument("--eta", type=float, default=None, help="learning-rate override")
    run.add_argument("--gamma", type=float, default=None,
                     help="exploration-rate override")
    run.add_argument("--beta", type=float, default=None,
                     help="hinge confidence threshold (default 1/K)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--norm-policy", choices=("strict", "rescale"),
                     default="strict")
    run.add_argument("--out", default=None, help="round log CSV path")
    run.add_argument("--summary-out", default=None, help="summary file path")
    run.set_defaults(func=cmd_run)

    fig = sub.add_parser("figure1", help="gap-curve grid CSV")
    fig.add_argument("--eta", type=float, default=0.125)
    fig.add_argument("--grid", default="-1.5:1.5:0.01", help="lo:hi:step")
    fig.add_argument("--out", default=None)
    fig.set_defaults(func=cmd_figure1)

    abst = sub.add_parser("abstention", help="expert advice with abstention")
    abst.add_argument("--experts", type=int, default=10)
    abst.add_argument("--horizon", type=int, default=10000)
    abst.add_argument("--cost", type=float, default=0.4)
    abst.add_argument("--seed", type=int, default=0)
    abst.add_argument("--out", default=None)
    abst.set_defaults(func=cmd_abstention)

    sweep = sub.add_parser("sweep", help="grid of (K, T) runs")
    sweep.add_argument("--loss", choices=sorted(LOSS_NAMES), required=True)
    sweep.add_argument("--feedback", choices=sorted(FEEDBACK_NAMES),
                       default="full-info")
    sweep.add_argument("--k-grid", default="2,3,5")
    sweep.add_argument("--t-grid", default="500,1000,2000")
    sweep.add_argument("--d", type=int, default=10)
    sweep.add_argument("--x-bound", type=float, default=1.0)
    sweep.add_argument("--u-norm", type=float, default=3.0)
    sweep.add_argument("--margin", type=float, default=1.0)
    sweep.add_argument("--seeds", type=int, default=8)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", default=None)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ConfigError,
        HarnessError,
        BoundViolationError,
        StreamFormatError,
        StreamGenerationError,
        AbstentionCostError,
        ValueError,
        OSError,
    ) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
