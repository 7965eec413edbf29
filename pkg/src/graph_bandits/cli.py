"""Command-line interface: ``graph-bandits <command> ...``.

Exit status is 0 on success, 2 for bad input (config, spec strings, graph
files) and 1 when a run breaks one of the learners' runtime contracts.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from . import graph as gr
from .env import LOWER_BOUND_T_FACTOR, EnvError, lower_bound_floor, lower_bound_independent_set
from .lp import LPError, solve_max_min_exploration
from .policies import POLICY_NAMES, PolicyError
from .sim import (
    THREADS_ENV,
    ConfigError,
    RunConfig,
    SimulationError,
    aggregate,
    aggregate_csv,
    load_config,
    run_all,
    runs_csv,
    with_overrides,
)

FIG1_P = (0.05, 0.25, 0.5, 0.75)
FIG1_POLICIES = ("exp3", "expban", "elp")
DESK = dict(k=100, T=10000)
FULL = dict(k=300, T=30000)

GRAPH_FORMAT = """\
graph files: first line "k directed" (directed is 0 or 1), then one "i j" edge
per line with 0-based actions; "#" starts a comment. Edge "i j" means playing
i reveals j's reward; undirected edges go both ways. Self-loops are implicit.
"""

CONFIG_FORMAT = """\
config file (JSON object):
  T            rounds (required)
  k            actions (required unless graph is file:...)
  graph        file:<path> | er:<p> | er-directed:<p> | er-rounds:<p> |
               complete | empty | star | path | cycle | disjoint_cliques(m)
  policy       elp | elp-directed | expban | exp3 | meta-elp, optionally
               followed by :beta=<x>,gamma=<y>
  adversary    fig1:<special> (default fig1:0) | bernoulli:<means-file> | lowerbound
  observation  exact (default) | noise:<delta>
  seed         base seed (default 0)
  runs         independent runs (default 1)
  check_invariants  verify per-round inequalities (default false)
Relative paths are resolved against the config file's directory.
"""


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def _fmt(x) -> str:
    return f"{x:.6g}"


def _regret_line(results) -> str:
    agg = aggregate(results)
    mean, se = agg.realized_regret_stats()
    line = f"final regret {mean:.2f} +/- {se:.2f}"
    pseudo = agg.pseudo_regret_stats()
    if pseudo is not None:
        line += f"  pseudo-regret {pseudo[0]:.2f} +/- {pseudo[1]:.2f}"
    return line


def _params_line(meta: dict) -> str:
    keys = ("beta", "gamma", "alpha_hat", "alpha_hat_method", "chi_hat", "c", "lp_value", "copies")
    parts = []
    for key in keys:
        if key in meta:
            val = meta[key]
            parts.append(f"{key}={_fmt(val) if isinstance(val, float) else val}")
    return " ".join(parts)


# -- commands ---------------------------------------------------------------


def cmd_graph_stats(args) -> int:
    g = gr.read_graph(args.file)
    alpha, method = gr.independence_estimate(g)
    part = gr.clique_partition_greedy(g)
    print(f"k {g.k}")
    print(f"directed {int(g.directed)}")
    print(f"edges {g.edge_count}")
    print(f"alpha {alpha} ({method})")
    print(f"cliques {part.c} (greedy)")
    return 0


def cmd_lp_solve(args) -> int:
    g = gr.read_graph(args.file)
    dist = solve_max_min_exploration(g)
    print(f"value {dist.value!r}")
    print("s " + " ".join(repr(float(v)) for v in dist.s))
    print(f"certificate_gap {dist.gap:.3e}")
    return 0


def _config_from_args(args) -> RunConfig:
    config = load_config(args.config)
    return with_overrides(config, seed=args.seed, runs=args.runs, T=args.T)


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    results = run_all(config, args.threads)
    out = Path(args.out_dir)
    _write(out, "runs.csv", runs_csv(results))
    _write(out, "aggregate.csv", aggregate_csv(aggregate(results), str(config.policy)))
    print(f"{config.policy}: {_regret_line(results)}")
    print(f"  {_params_line(results[0].metadata)}")
    print(f"wrote {out / 'runs.csv'} and {out / 'aggregate.csv'}")
    return 0


def _p_label(p: float) -> str:
    return f"{p:g}"


def cmd_reproduce_fig1(args) -> int:
    scale = FULL if args.full else DESK
    k = args.k if args.k is not None else scale["k"]
    T = args.T if args.T is not None else scale["T"]
    out = Path(args.out_dir)
    summary = io.StringIO()
    writer = csv.writer(summary, lineterminator="\n")
    writer.writerow(["p", "policy", "final_mean_payoff", "se"])
    print(f"k={k} T={T} runs={args.runs} seed={args.seed}")
    print(f"{'p':>6} " + " ".join(f"{name:>20}" for name in FIG1_POLICIES))
    for p in args.p:
        cells = []
        for name in FIG1_POLICIES:
            config = RunConfig(T=T, k=k, graph=f"er:{p!r}", policy=name, adversary="fig1:0",
                               seed=args.seed, runs=args.runs)
            agg = aggregate(run_all(config, args.threads))
            _write(out, f"fig1_p{_p_label(p)}_{name}.csv", aggregate_csv(agg, name))
            writer.writerow([repr(float(p)), name, repr(agg.final_payoff), repr(agg.final_payoff_se)])
            cells.append(f"{agg.final_payoff:.4f} +/- {agg.final_payoff_se:.4f}")
        print(f"{_p_label(p):>6} " + " ".join(f"{c:>20}" for c in cells))
    _write(out, "fig1_summary.csv", summary.getvalue())
    print(f"wrote curves and fig1_summary.csv to {out}")
    return 0


def cmd_lower_bound_demo(args) -> int:
    path = Path(args.file).resolve()
    g = gr.read_graph(path)
    if g.directed:
        raise ConfigError("graph", "the lower-bound adversary needs an undirected graph")
    nodes, exact = lower_bound_independent_set(g)
    alpha = len(nodes)
    threshold = LOWER_BOUND_T_FACTOR * alpha ** 3
    if args.T < threshold:
        print(f"warning: T={args.T} is below {LOWER_BOUND_T_FACTOR}*alpha^3 = {threshold}; "
              "the floor is not guaranteed here", file=sys.stderr)
    config = RunConfig(T=args.T, k=g.k, graph=f"file:{path}", policy=args.policy,
                       adversary="lowerbound", seed=args.seed, runs=args.runs)
    results = run_all(config, args.threads)
    agg = aggregate(results)
    mean, se = agg.pseudo_regret_stats()
    floor = lower_bound_floor(alpha, args.T)
    print(f"alpha {alpha} ({'exact' if exact else 'greedy'})")
    print(f"pseudo-regret {mean:.3f} +/- {se:.3f}")
    print(f"floor 0.06*sqrt(alpha*T) = {floor:.3f}")
    print(f"ratio {mean / floor:.3f}")
    if args.out_dir:
        _write(Path(args.out_dir), "lower_bound.csv", aggregate_csv(agg, str(config.policy)))
    return 0


# -- parser -----------------------------------------------------------------


def _nonneg_int(text: str) -> int:
    val = int(text)
    if val < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return val


def _pos_int(text: str) -> int:
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def _prob(text: str) -> float:
    val = float(text)
    if not 0.0 <= val <= 1.0 or math.isnan(val):
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return val


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="graph-bandits",
        description="Adversarial bandits with graph-structured side observations.",
        epilog=f"Worker processes default to the CPU count; set {THREADS_ENV} (0 = auto) to cap them.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    threads_help = f"worker processes (default: ${THREADS_ENV}, 0 = all CPUs)"

    p = sub.add_parser("graph-stats", help="size, edges, independence number and clique count of a graph",
                       description="Print k, edge count, independence number (exact up to "
                                   f"{gr.EXACT_ALPHA_LIMIT} nodes, greedy beyond) and greedy clique count.",
                       epilog=GRAPH_FORMAT, formatter_class=fmt)
    p.add_argument("file", help="graph file")
    p.set_defaults(func=cmd_graph_stats)

    p = sub.add_parser("lp-solve", help="exploration distribution maximizing the smallest neighborhood mass",
                       description="Solve the exploration LP; print its value, the distribution s and "
                                   "the duality gap of the certificate.",
                       epilog=GRAPH_FORMAT, formatter_class=fmt)
    p.add_argument("file", help="graph file")
    p.set_defaults(func=cmd_lp_solve)

    p = sub.add_parser("simulate", help="run one configured experiment",
                       description="Run a config; write runs.csv (run,t,action,reward,cum_reward,regret) "
                                   "and aggregate.csv (policy,t,mean_payoff,std_payoff,mean_regret,std_regret).",
                       epilog=CONFIG_FORMAT + "\n" + GRAPH_FORMAT, formatter_class=fmt)
    p.add_argument("config", help="JSON config file")
    p.add_argument("--seed", type=_nonneg_int, help="override the config seed")
    p.add_argument("--runs", type=_pos_int, help="override the number of runs")
    p.add_argument("--T", type=_pos_int, help="override the horizon")
    p.add_argument("--threads", type=_nonneg_int, help=threads_help)
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce-fig1", help="EXP3 vs ExpBan vs ELP on Erdos-Renyi graphs",
                       description="For each edge probability: one seeded Erdos-Renyi graph, rewards "
                                   "Bernoulli(1/2) except action 0 at Bernoulli(3/4), and the three "
                                   "policies with tuned parameters. Writes fig1_p<p>_<policy>.csv curves "
                                   "and fig1_summary.csv.",
                       formatter_class=fmt)
    p.add_argument("--k", type=_pos_int, help=f"actions (default {DESK['k']}, or {FULL['k']} with --full)")
    p.add_argument("--p", type=_prob, nargs="+", default=list(FIG1_P),
                   help="edge probabilities (default: %(default)s)")
    p.add_argument("--T", type=_pos_int, help=f"horizon (default {DESK['T']}, or {FULL['T']} with --full)")
    p.add_argument("--runs", type=_pos_int, default=10, help="runs per policy (default: %(default)s)")
    p.add_argument("--seed", type=_nonneg_int, default=0, help="base seed (default: %(default)s)")
    p.add_argument("--full", action="store_true", help="use the large scale k=300, T=30000")
    p.add_argument("--threads", type=_nonneg_int, help=threads_help)
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.set_defaults(func=cmd_reproduce_fig1)

    p = sub.add_parser("lower-bound-demo", help="run a policy against the randomized hard instance",
                       description="Play against the hard instance built on a maximum independent set "
                                   "and compare mean pseudo-regret with 0.06*sqrt(alpha*T). Warns when "
                                   f"T < {LOWER_BOUND_T_FACTOR}*alpha^3.",
                       epilog=GRAPH_FORMAT, formatter_class=fmt)
    p.add_argument("file", help="undirected graph file")
    p.add_argument("--T", type=_pos_int, default=10000, help="horizon (default: %(default)s)")
    p.add_argument("--runs", type=_pos_int, default=50, help="runs (default: %(default)s)")
    p.add_argument("--policy", default="elp", help=f"one of {', '.join(POLICY_NAMES)} (default: %(default)s)")
    p.add_argument("--seed", type=_nonneg_int, default=0, help="base seed (default: %(default)s)")
    p.add_argument("--threads", type=_nonneg_int, help=threads_help)
    p.add_argument("--out-dir", help="also write lower_bound.csv here")
    p.set_defaults(func=cmd_lower_bound_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error in field '{exc.field}': {exc}", file=sys.stderr)
        return 2
    except (gr.GraphError, EnvError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, PolicyError, LPError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
