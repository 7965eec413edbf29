"""Deterministic round loop, regret accounting and Monte Carlo aggregation."""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import graph as gr
from .env import Adversary, AdversarySpec, ObservationModel, RewardTable, observe
from .policies import PolicySpec, build_policy, neighborhood_ratio_sum

THREADS_ENV = "GRAPH_BANDITS_THREADS"
CHECK_MAX_K = 14

# independent random streams per run
ADVERSARY_STREAM, POLICY_STREAM, NOISE_STREAM, SAMPLING_STREAM = range(4)
GRAPH_STREAM = 1 << 20


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class SimulationError(RuntimeError):
    pass


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for ``(seed, key...)``; independent of which other streams exist."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    T: int
    k: int
    graph: str
    policy: str
    adversary: str = "fig1:0"
    observation: str = "exact"
    seed: int = 0
    runs: int = 1
    check_invariants: bool = False
    base_dir: str = "."

    def __post_init__(self):
        if not isinstance(self.T, int) or self.T < 1:
            raise ConfigError("T", "must be an integer >= 1")
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("runs", "must be an integer >= 1")
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k", "must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        try:
            PolicySpec.parse(self.policy)
        except ValueError as exc:
            raise ConfigError("policy", str(exc)) from None
        try:
            AdversarySpec.parse(self.adversary)
        except ValueError as exc:
            raise ConfigError("adversary", str(exc)) from None
        try:
            ObservationModel.parse(self.observation)
        except ValueError as exc:
            raise ConfigError("observation", str(exc)) from None

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = set(data) - known
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(name, "unknown field")
        for name in ("T", "graph", "policy"):
            if name not in data:
                raise ConfigError(name, "missing required field")
        data = dict(data)
        if "k" not in data:
            data["k"] = _graph_k_hint(data["graph"], base_dir)
        return cls(base_dir=base_dir, **data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("base_dir")
        return out


def _graph_k_hint(spec: str, base_dir: str) -> int:
    if isinstance(spec, str) and spec.startswith("file:"):
        try:
            return read_graph_spec_file(spec[5:], base_dir).k
        except (OSError, gr.GraphError) as exc:
            raise ConfigError("graph", str(exc)) from None
    raise ConfigError("k", "missing required field")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return RunConfig.from_dict(data, base_dir=str(path.parent))


def read_graph_spec_file(name: str, base_dir: str) -> gr.FeedbackGraph:
    path = Path(name)
    if not path.is_absolute():
        path = Path(base_dir) / path
    return gr.read_graph(path)


def build_graphs(spec: str, k: int, seed: int, base_dir: str = ".") -> gr.GraphSequence:
    """Graph spec strings.

    ``file:<path>``, ``er:<p>``, ``er-directed:<p>``, ``er-rounds:<p>`` (fresh
    graph every round) or a fixture name such as ``star`` or
    ``disjoint_cliques(3)``. Random graphs are seeded from the run seed's
    graph stream, so all runs of one config share them.
    """
    name, _, arg = spec.strip().partition(":")
    graph_seed = int(stream(seed, GRAPH_STREAM).integers(2**63))
    try:
        if name == "file":
            g = read_graph_spec_file(arg, base_dir)
            if g.k != k:
                raise ConfigError("graph", f"file has k={g.k}, config says k={k}")
            return gr.GraphSequence.fixed(g)
        if name in ("er", "er-directed", "er-rounds"):
            try:
                p = float(arg)
            except ValueError:
                raise ConfigError("graph", f"{name} needs an edge probability, got {arg!r}") from None
            if name == "er-rounds":
                return gr.GraphSequence.per_round(k, gr.ErdosRenyiRounds(k, p, graph_seed))
            return gr.GraphSequence.fixed(gr.erdos_renyi(k, p, graph_seed, directed=name == "er-directed"))
        return gr.GraphSequence.fixed(gr.fixture(spec, k))
    except (gr.GraphError, OSError) as exc:
        raise ConfigError("graph", str(exc)) from None


# -- results ----------------------------------------------------------------


@dataclass
class RunResult:
    run: int
    actions: np.ndarray
    rewards: np.ndarray
    cum_reward: np.ndarray
    regret_curve: np.ndarray
    realized_regret: float
    pseudo_regret: float | None
    metadata: dict = field(default_factory=dict)


def compensated_cumsum(x) -> np.ndarray:
    """Prefix sums with Kahan compensation."""
    out = np.empty(len(x))
    total = 0.0
    comp = 0.0
    for i, v in enumerate(np.asarray(x, dtype=float).tolist()):
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[i] = total
    return out


def regret(table: RewardTable, actions) -> tuple[float, float | None]:
    """Realized regret against the best column, and pseudo-regret when means are known."""
    actions = np.asarray(actions, dtype=np.intp)
    if actions.shape != (table.T,):
        raise ValueError(f"expected {table.T} actions, got {actions.shape[0]}")
    got = table.g[np.arange(table.T), actions]
    realized = float(table.g.sum(axis=0).max() - np.sum(got))
    pseudo = None
    if table.means is not None:
        pseudo = float(table.means.max() * table.T - np.sum(table.means[actions]))
    return realized, pseudo


@dataclass
class _Context:
    graphs: gr.GraphSequence
    adversary: Adversary
    model: ObservationModel
    alpha: int | None


@lru_cache(maxsize=8)
def _context(config: RunConfig) -> _Context:
    graphs = build_graphs(config.graph, config.k, config.seed, config.base_dir)
    try:
        adversary = Adversary(config.adversary, graphs.graph, config.k, Path(config.base_dir))
    except (ValueError, OSError) as exc:
        raise ConfigError("adversary", str(exc)) from None
    alpha = None
    if config.check_invariants and graphs.is_fixed and not graphs.graph.directed and config.k <= CHECK_MAX_K:
        alpha = gr.independence_number_exact(graphs.graph)[0]
    return _Context(graphs, adversary, ObservationModel.parse(config.observation), alpha)


def run_single(config: RunConfig, run_index: int) -> RunResult:
    """Play ``config.T`` rounds of one run; deterministic in ``(config, run_index)``."""
    ctx = _context(config)
    T, k = config.T, config.k
    table = ctx.adversary.draw(T, np.random.SeedSequence(config.seed, spawn_key=(run_index, ADVERSARY_STREAM)))
    try:
        policy = build_policy(config.policy, ctx.graphs, T, ctx.model.b, stream(config.seed, run_index, POLICY_STREAM))
    except ValueError as exc:
        raise ConfigError("policy", str(exc)) from None
    noise = stream(config.seed, run_index, NOISE_STREAM)
    sampler = stream(config.seed, run_index, SAMPLING_STREAM)
    check = config.check_invariants

    actions = np.empty(T, dtype=np.intp)
    for t in range(T):
        graph = ctx.graphs.at(t)
        try:
            p = policy.begin_round(t, graph)
            if p.shape != (k,) or p.min() < 0.0 or abs(p.sum() - 1.0) > 1e-12:
                raise SimulationError("policy emitted an invalid distribution")
            if check:
                _check_round(policy, graph, p, ctx)
            cdf = np.cumsum(p)
            a = int(np.searchsorted(cdf, sampler.random() * cdf[-1], side="right"))
            a = min(a, k - 1)
            actions[t] = a
            indices, values = observe(ctx.model, graph, a, table.g[t], noise)
            policy.observe(t, a, float(table.g[t, a]), indices, values)
        except Exception as exc:
            raise SimulationError(f"run {run_index}, round {t + 1}: {exc}") from exc

    rewards = table.g[np.arange(T), actions]
    cum = compensated_cumsum(rewards)
    best = np.cumsum(table.g, axis=0).max(axis=1)
    realized, pseudo = regret(table, actions)
    meta = dict(policy.metadata)
    meta.update({key: val for key, val in table.info.items()})
    return RunResult(run_index, actions, rewards, cum, best - cum, realized, pseudo, meta)


def _check_round(policy, graph: gr.FeedbackGraph, p: np.ndarray, ctx: _Context) -> None:
    if not graph.directed and graph.k <= CHECK_MAX_K:
        alpha = ctx.alpha if ctx.graphs.is_fixed and ctx.alpha is not None else gr.independence_number_exact(graph)[0]
        ratio = neighborhood_ratio_sum(graph, p)
        if ratio > alpha + 1e-9:
            raise SimulationError(f"ratio sum {ratio} exceeds independence number {alpha}")
    gamma, s = getattr(policy, "gamma", None), getattr(policy, "s", None)
    if s is not None and np.any(p < gamma * s - 1e-15):
        raise SimulationError("ELP distribution fell below its exploration floor")


# -- aggregation ------------------------------------------------------------


@dataclass
class Aggregate:
    runs: int
    mean_cum_reward: np.ndarray
    std_cum_reward: np.ndarray
    mean_payoff: np.ndarray
    std_payoff: np.ndarray
    mean_regret: np.ndarray
    std_regret: np.ndarray
    realized_regret: np.ndarray
    pseudo_regret: np.ndarray | None
    metadata: dict = field(default_factory=dict)

    @property
    def final_payoff(self) -> float:
        return float(self.mean_payoff[-1])

    @property
    def final_payoff_se(self) -> float:
        return float(self.std_payoff[-1] / np.sqrt(self.runs))

    @staticmethod
    def _mean_se(x: np.ndarray) -> tuple[float, float]:
        sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        return float(np.mean(x)), sd / np.sqrt(x.size)

    def realized_regret_stats(self) -> tuple[float, float]:
        return self._mean_se(self.realized_regret)

    def pseudo_regret_stats(self) -> tuple[float, float] | None:
        if self.pseudo_regret is None:
            return None
        return self._mean_se(self.pseudo_regret)


def aggregate(results: list[RunResult]) -> Aggregate:
    if not results:
        raise ValueError("nothing to aggregate")
    results = sorted(results, key=lambda r: r.run)
    n = len(results)
    T = len(results[0].cum_reward)
    t = np.arange(1, T + 1)
    cum = np.vstack([r.cum_reward for r in results])
    reg = np.vstack([r.regret_curve for r in results])
    payoff = cum / t
    ddof = 1 if n > 1 else 0
    pseudo = None
    if all(r.pseudo_regret is not None for r in results):
        pseudo = np.array([r.pseudo_regret for r in results])
    return Aggregate(
        runs=n,
        mean_cum_reward=cum.mean(axis=0),
        std_cum_reward=cum.std(axis=0, ddof=ddof),
        mean_payoff=payoff.mean(axis=0),
        std_payoff=payoff.std(axis=0, ddof=ddof),
        mean_regret=reg.mean(axis=0),
        std_regret=reg.std(axis=0, ddof=ddof),
        realized_regret=np.array([r.realized_regret for r in results]),
        pseudo_regret=pseudo,
        metadata=dict(results[0].metadata),
    )


def worker_count(requested: int | None = None) -> int:
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "0") or "0"
        try:
            requested = int(raw)
        except ValueError:
            raise ConfigError(THREADS_ENV, f"must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ConfigError(THREADS_ENV, "must be >= 0")
    return requested or (os.cpu_count() or 1)


def _run_star(args) -> RunResult:
    return run_single(*args)


def run_all(config: RunConfig, workers: int | None = None) -> list[RunResult]:
    """All runs of ``config``, ordered by run index regardless of scheduling."""
    _context(config)  # surface config errors before spawning workers
    n = min(worker_count(workers), config.runs)
    jobs = [(config, i) for i in range(config.runs)]
    if n <= 1:
        return [run_single(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_star, jobs))


def run_monte_carlo(config: RunConfig, workers: int | None = None) -> Aggregate:
    return aggregate(run_all(config, workers))


# -- CSV --------------------------------------------------------------------


def _num(v) -> str:
    return repr(float(v))


def runs_csv(results: list[RunResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run", "t", "action", "reward", "cum_reward", "regret"])
    for r in sorted(results, key=lambda r: r.run):
        for t in range(len(r.actions)):
            writer.writerow([r.run, t + 1, int(r.actions[t]), _num(r.rewards[t]),
                             _num(r.cum_reward[t]), _num(r.regret_curve[t])])
    return buf.getvalue()


def aggregate_csv(agg: Aggregate, policy: str | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    head = ["t", "mean_payoff", "std_payoff", "mean_regret", "std_regret"]
    writer.writerow((["policy"] if policy else []) + head)
    for t in range(len(agg.mean_payoff)):
        row = [t + 1, _num(agg.mean_payoff[t]), _num(agg.std_payoff[t]),
               _num(agg.mean_regret[t]), _num(agg.std_regret[t])]
        writer.writerow(([policy] if policy else []) + row)
    return buf.getvalue()


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
