"""Command-line entry point: ``deepgreedy {run,compare,theory,lemma-check,slope}``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, theory
from .core import SIM_STREAM, ExperimentConfig, stream_rng
from .environments import expected_optimal_mean
from .errors import DeepGreedyError, DomainError
from .harness import ENV_NAMES, EnvSpec
from .policies import POLICY_NAMES

log = logging.getLogger("deepgreedy")


def _add_experiment_flags(p):
    p.add_argument("--config", type=Path, help="key = value experiment file")
    p.add_argument("--env", choices=ENV_NAMES)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--steps", type=int, help="override total_steps")
    p.add_argument("--seed", type=int, help="override rng_seed")
    p.add_argument("--noise", type=float, help="override noise_sigma")
    p.add_argument("--k", type=int, help="override num_actions")
    p.add_argument("--p", type=float, help="override epsilon_exponent")
    p.add_argument("--images-path")
    p.add_argument("--labels-path")
    p.add_argument("--pool-factor", type=int)
    p.add_argument("--plot", action="store_true", help="also render a PNG next to the CSV")


def _experiment(args):
    if args.config:
        config, env_spec, policy = harness.load_config(args.config)
    else:
        config, env_spec, policy = ExperimentConfig(), EnvSpec(), "deep-eps-greedy"
    overrides = {
        "total_steps": args.steps,
        "rng_seed": args.seed,
        "noise_sigma": args.noise,
        "num_actions": args.k,
        "epsilon_exponent": args.p,
    }
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    env_over = {
        "name": args.env,
        "images_path": args.images_path,
        "labels_path": args.labels_path,
        "pool_factor": args.pool_factor,
    }
    env_spec = replace(env_spec, **{k: v for k, v in env_over.items() if v is not None})
    return config, env_spec, policy


def cmd_run(args):
    config, env_spec, policy = _experiment(args)
    policy = args.policy or policy
    summary, results = harness.run_replicates(
        config, env_spec, policy, args.replicates, args.parallelism
    )
    out = args.out
    if args.replicates == 1:
        harness.emit_run_csv(results[0], out)
    else:
        harness.emit_summary_csv(summary, out)
    for seed, err in summary.failures.items():
        log.error("replicate seed %d failed: %s", seed, err)
    print(
        f"{policy} on {env_spec.name}: final normalized reward "
        f"{summary.mean_normalized_reward[-1]:.4f} +- {summary.stderr_normalized_reward[-1]:.4f}, "
        f"regret {summary.mean_regret[-1]:.4f} ({summary.replicates} run(s)) -> {out}"
    )
    if args.plot:
        png = Path(out).with_suffix(".png")
        from .plotting import plot_summary

        plot_summary(summary, png, title=f"{policy} / {env_spec.name}")
        print(f"figure -> {png}")
    return 1 if summary.failures else 0


def cmd_compare(args):
    config, env_spec, _ = _experiment(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = {}
    for policy in args.policies:
        summary, _ = harness.run_replicates(
            config, env_spec, policy, args.replicates, args.parallelism
        )
        harness.emit_summary_csv(summary, out_dir / f"{policy}.csv")
        summaries[policy] = summary
        print(f"{policy:>18s}: {summary.mean_normalized_reward[-1]:.4f} "
              f"+- {summary.stderr_normalized_reward[-1]:.4f}")
    if args.plot:
        from .plotting import plot_comparison

        reference = None
        if env_spec.name in ("codebook", "mnist"):
            reference = expected_optimal_mean(config.num_actions)
        png = plot_comparison(
            summaries, out_dir / "comparison.png",
            title=f"{env_spec.name}, sigma={config.noise_sigma:g}", reference=reference,
        )
        print(f"figure -> {png}")
    return 0


def theory_rows(K, ps, delta, constant, min_size, max_gap, t_min, t_max, points):
    """Rows of the ``theory`` CSV; values outside a formula's domain are NaN."""
    rows = []
    for t in np.geomspace(t_min, t_max, points):
        for p in ps:
            params = theory.TheoryParams(K, p, delta, [constant], [min_size], max_gap)
            lower = theory.regret_lower_bound(params, t)
            try:
                upper = theory.regret_upper_bound(params, t)
            except DomainError:
                upper = math.nan
            if 0 < p <= 1 and t >= 2:
                thr = theory.lemma_threshold(t, K, p)
                prob = theory.lemma_probability_bound(t, K, p)
            else:
                thr = prob = math.nan
            rows.append((t, p, lower, upper, thr, prob))
    return rows


def cmd_theory(args):
    rows = theory_rows(
        args.k, args.p, args.delta, args.c, args.n, args.max_gap, args.t_min, args.t_max, args.points
    )
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "p", "lower_bound", "upper_bound", "lemma_threshold", "lemma_prob_bound"])
        for row in rows:
            w.writerow([format(v, ".17g") for v in row])
    finally:
        if args.out:
            fh.close()
    if args.plot:
        if not args.out:
            raise DeepGreedyError("--plot needs --out")
        from .plotting import plot_theory

        for p in args.p:
            sel = [r for r in rows if r[1] == p]
            png = Path(args.out).with_name(f"{Path(args.out).stem}_p{p:g}.png")
            plot_theory([r[0] for r in sel], [r[2] for r in sel], [r[3] for r in sel], png,
                        title=f"K={args.k}, p={p:g}")
            print(f"figure -> {png}", file=sys.stderr)
    return 0


def cmd_lemma_check(args):
    rng = stream_rng(args.seed, SIM_STREAM)
    res = harness.monte_carlo_lemma_check(args.k, args.p, args.t, args.replicates, rng, args.threshold)
    print(f"K={args.k} p={args.p:g} t={args.t} replicates={res.replicates}")
    print(f"threshold            {res.threshold:.6g}")
    print(f"empirical P(min_i T^R_i >= threshold)  {res.empirical:.6f}")
    print(f"mean exploration pulls per arm  {np.array2string(res.mean_pulls, precision=4)}")
    if res.bound is None:
        print("no lemma bound for this exponent")
        return 0
    print(f"lemma bound          {res.bound:.6f}{' (vacuous)' if res.vacuous else ''}")
    print(f"acceptance floor     {res.bound - res.margin:.6f}")
    print("PASS" if res.passed else "FAIL")
    return 0 if res.passed else 1


def cmd_slope(args):
    cols = harness.load_csv(args.input)
    trace = harness.regret_column(cols)
    slope = harness.fit_loglog_slope(trace, args.t_min, args.t_max or trace.size)
    print(f"{slope:.6f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="deepgreedy", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one policy, optionally replicated")
    _add_experiment_flags(p)
    p.add_argument("--policy", choices=POLICY_NAMES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several policies on the same settings")
    _add_experiment_flags(p)
    p.add_argument("--policies", nargs="+", choices=POLICY_NAMES,
                   default=["deep-eps-greedy", "simple-eps-greedy", "linucb", "linear", "random", "optimal"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare, replicates=12)

    p = sub.add_parser("theory", help="tabulate regret bounds and lemma quantities")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--p", type=float, nargs="+", default=[1.0])
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0, help="network constant C_i (all arms)")
    p.add_argument("--n", type=int, default=3, help="minimal sample size n_i (all arms)")
    p.add_argument("--max-gap", type=float, default=9.0)
    p.add_argument("--t-min", type=float, default=1e3)
    p.add_argument("--t-max", type=float, default=1e12)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--out")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("lemma-check", help="Monte-Carlo check of the exploration-count lemma")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--threshold", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lemma_check)

    p = sub.add_parser("slope", help="log-log slope of a regret trace CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--t-min", type=int, default=1)
    p.add_argument("--t-max", type=int)
    p.set_defaults(func=cmd_slope)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DeepGreedyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
