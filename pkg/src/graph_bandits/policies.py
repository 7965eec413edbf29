"""Learners for bandits with graph-structured side observations.

Every policy follows the same round protocol::

    p = policy.begin_round(t, graph)        # distribution over the k actions
    ...environment samples i_t ~ p...
    policy.observe(t, i_t, reward, indices, values)

where ``indices`` are exactly the actions ``j`` with ``i_t`` in ``N_j`` (sorted)
and ``values`` their reward estimates. ``reward`` is the realized reward of
``i_t`` itself, which is what the bandit-level components learn from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import (
    FeedbackGraph,
    GraphSequence,
    clique_partition_greedy,
    independence_estimate,
)
from .lp import solve_max_min_exploration

_EPS = 1e-12


class PolicyError(RuntimeError):
    pass


def _softmax(logw: np.ndarray) -> np.ndarray:
    # weights are kept as logs: products of exp factors over long horizons
    # overflow, and rescaling them instead underflows the losers to zero
    z = np.exp(logw - logw.max())
    return z / z.sum()


def neighborhood_ratio_sum(g: FeedbackGraph, p) -> float:
    """``sum_j p_j / sum_{l in N_j} p_l``; at most α(G) on undirected graphs."""
    p = np.asarray(p, dtype=float)
    mass = p @ g.observes
    return float(np.sum(p / mass))


# -- tuning -----------------------------------------------------------------


def elp_tune_beta(alpha_sum: float, b: float, k: int) -> float:
    """Learning rate sqrt(ln k / (3 b^2 alpha_sum)), clamped below 1/(2bk)."""
    if alpha_sum <= 0 or b <= 0 or k < 2:
        raise ValueError("need alpha_sum > 0, b > 0 and k >= 2")
    return min(math.sqrt(math.log(k) / (3.0 * b * b * alpha_sum)), (1.0 - 1e-9) / (2.0 * b * k))


def forecaster_beta(n: int, b: float, T: int) -> float:
    if n <= 1:
        return 0.0
    return min(math.sqrt(math.log(n) / (b * b * T)), (1.0 - 1e-9) / b)


def exp3_gamma(n: int, T: int) -> float:
    if n <= 1:
        return 0.0
    return min(1.0, math.sqrt(n * math.log(n) / ((math.e - 1.0) * T)))


def expban_tune(sizes, b: float, T: int) -> tuple[list[float], float]:
    """Per-clique forecaster rates and the EXP3 mixing rate over ``len(sizes)`` cliques."""
    if T < 1 or not sizes:
        raise ValueError("need T >= 1 and at least one clique")
    return [forecaster_beta(n, b, T) for n in sizes], exp3_gamma(len(sizes), T)


# -- building blocks --------------------------------------------------------


class Exp3:
    """EXP3 with uniform mixing over ``n`` arms; rewards are scaled by ``bound``."""

    def __init__(self, n: int, gamma: float, bound: float = 1.0):
        if n < 1:
            raise ValueError("EXP3 needs at least one arm")
        if n > 1 and not 0.0 < gamma <= 1.0:
            raise ValueError(f"mixing rate {gamma} outside (0, 1]")
        self.n = n
        self.gamma = gamma
        self.bound = bound
        self.logw = np.zeros(n)

    @property
    def w(self) -> np.ndarray:
        return np.exp(self.logw)

    def distribution(self) -> np.ndarray:
        if self.n == 1:
            return np.ones(1)
        return (1.0 - self.gamma) * _softmax(self.logw) + self.gamma / self.n

    def update(self, arm: int, reward: float) -> None:
        if not 0.0 <= reward <= self.bound + _EPS:
            raise PolicyError(f"reward {reward} outside [0, {self.bound}]")
        if self.n == 1:
            return
        p = self.distribution()[arm]
        estimate = (reward / self.bound) / p
        self.logw[arm] += self.gamma * estimate / self.n


class CliqueForecaster:
    """Exponentially weighted forecaster over the members of one clique."""

    def __init__(self, members, beta: float, b: float = 1.0):
        self.members = np.asarray(sorted(members), dtype=np.intp)
        if len(self.members) > 1 and not 0.0 < beta < 1.0 / b:
            raise ValueError(f"forecaster rate {beta} outside (0, 1/b)")
        self.beta = beta
        self.b = b
        self.logw = np.zeros(len(self.members))

    @property
    def w(self) -> np.ndarray:
        return np.exp(self.logw)

    def distribution(self) -> np.ndarray:
        return _softmax(self.logw)

    def update(self, estimates) -> None:
        """``estimates`` aligned with ``members``."""
        estimates = np.asarray(estimates, dtype=float)
        if estimates.shape != self.logw.shape:
            raise PolicyError("missing estimate for a clique member")
        if np.any(np.abs(estimates) > self.b + _EPS):
            raise PolicyError("estimate exceeds bound b")
        self.logw += self.beta * estimates


def elp_round_params(g: FeedbackGraph, beta: float, b: float) -> tuple[np.ndarray, float]:
    """Exploration distribution and its mixing rate ``beta*b / value``."""
    dist = solve_max_min_exploration(g)
    return dist.s, beta * b / dist.value


def elp_distribution(w, gamma: float, s, log: bool = False) -> np.ndarray:
    """Mix normalized weights with ``s``; pass ``log=True`` for log-weights."""
    w = np.asarray(w, dtype=float)
    w = _softmax(w) if log else w / w.sum()
    return (1.0 - gamma) * w + gamma * np.asarray(s, dtype=float)


# -- policies ---------------------------------------------------------------


class Policy:
    name = "policy"

    def __init__(self, k: int):
        self.k = k
        self.metadata: dict = {"policy": self.name}

    def begin_round(self, t: int, graph: FeedbackGraph) -> np.ndarray:
        raise NotImplementedError

    def observe(self, t: int, action: int, reward: float, indices, values) -> None:
        raise NotImplementedError


def _check_estimates(graph: FeedbackGraph, action: int, indices, b: float, values) -> None:
    expected = graph.revealed_by(action)
    if len(indices) != len(expected) or np.any(np.asarray(indices) != expected):
        raise PolicyError(f"estimates for {list(indices)} but action {action} reveals {expected.tolist()}")
    if np.any(np.abs(values) > b + _EPS):
        raise PolicyError(f"estimate magnitude exceeds b={b}")


class Elp(Policy):
    """Exponential weights mixed with the graph's max-min exploration distribution."""

    name = "elp"

    def __init__(self, k: int, beta: float, b: float = 1.0):
        super().__init__(k)
        if not 0.0 < beta < 1.0 / (2.0 * b * k):
            raise ValueError(f"beta={beta} outside (0, 1/(2bk))")
        self.beta = beta
        self.b = b
        self.logw = np.full(k, -math.log(k))
        self._cached: tuple[FeedbackGraph, np.ndarray, float, float] | None = None
        self.graph: FeedbackGraph | None = None
        self.p: np.ndarray | None = None
        self.gamma = 0.0
        self.s: np.ndarray | None = None
        self.metadata.update(beta=beta, b=b)

    @property
    def w(self) -> np.ndarray:
        return np.exp(self.logw)

    def _params(self, graph: FeedbackGraph) -> tuple[np.ndarray, float]:
        if self._cached is None or not (self._cached[0] is graph or self._cached[0] == graph):
            dist = solve_max_min_exploration(graph)
            self._cached = (graph, dist.s, self.beta * self.b / dist.value, dist.value)
            self.metadata["lp_value"] = dist.value
        return self._cached[1], self._cached[2]

    def begin_round(self, t: int, graph: FeedbackGraph) -> np.ndarray:
        self.s, self.gamma = self._params(graph)
        self.graph = graph
        self.p = elp_distribution(self.logw, self.gamma, self.s, log=True)
        return self.p

    def estimates(self, action: int, indices, values) -> np.ndarray:
        """Importance-weighted estimates ``values / sum_{l in N_j} p_l`` for the revealed ``j``."""
        denom = self.p @ self.graph.observes[:, indices]
        return np.asarray(values, dtype=float) / denom

    def observe(self, t: int, action: int, reward: float, indices, values) -> None:
        values = np.asarray(values, dtype=float)
        _check_estimates(self.graph, action, indices, self.b, values)
        scaled = self.beta * self.estimates(action, indices, values)
        if scaled.size and scaled.max() > 1.0 + 1e-9:
            raise PolicyError(f"round {t}: beta * estimate = {scaled.max()} exceeds 1")
        self.logw[indices] += scaled


class Exp3Policy(Policy):
    """Plain EXP3 over the actions; side observations are ignored."""

    name = "exp3"

    def __init__(self, k: int, gamma: float):
        super().__init__(k)
        self.exp3 = Exp3(k, gamma)
        self.metadata.update(gamma=gamma)

    def begin_round(self, t: int, graph: FeedbackGraph) -> np.ndarray:
        return self.exp3.distribution()

    def observe(self, t: int, action: int, reward: float, indices, values) -> None:
        self.exp3.update(action, reward)


class ExpBan(Policy):
    """EXP3 over clique meta-actions, each running an experts forecaster. Fixed graphs only."""

    name = "expban"

    def __init__(self, graph: FeedbackGraph, T: int, b: float = 1.0,
                 beta: float | None = None, gamma: float | None = None, partition=None):
        super().__init__(graph.k)
        self.graph = graph
        self.b = b
        self.partition = partition if partition is not None else clique_partition_greedy(graph)
        for block in self.partition.blocks:
            if not graph.is_clique(block):
                raise ValueError(f"block {block} is not a clique")
        betas, tuned_gamma = expban_tune([len(blk) for blk in self.partition.blocks], b, T)
        if beta is not None:
            betas = [beta if len(blk) > 1 else 0.0 for blk in self.partition.blocks]
        gamma = tuned_gamma if gamma is None else gamma
        self.forecasters = [CliqueForecaster(blk, bt, b) for blk, bt in zip(self.partition.blocks, betas)]
        self.meta = Exp3(self.partition.c, gamma)
        self.block_of = self.partition.block_of()
        # within-clique distributions laid out over actions; refreshed per update
        self._inner = np.empty(self.k)
        for f in self.forecasters:
            self._inner[f.members] = f.distribution()
        self.metadata.update(c=self.partition.c, gamma=gamma, beta=max(betas))

    def begin_round(self, t: int, graph: FeedbackGraph) -> np.ndarray:
        if graph is not self.graph and graph != self.graph:
            raise PolicyError("ExpBan requires a fixed feedback graph")
        return self.meta.distribution()[self.block_of] * self._inner

    def observe(self, t: int, action: int, reward: float, indices, values) -> None:
        values = np.asarray(values, dtype=float)
        _check_estimates(self.graph, action, indices, self.b, values)
        c = int(self.block_of[action])
        self.meta.update(c, reward)
        f = self.forecasters[c]
        pos = np.searchsorted(indices, f.members)
        f.update(values[pos])
        self._inner[f.members] = f.distribution()


class MetaElp(Policy):
    """EXP3 over ELP copies tuned to a doubling grid of α-sum guesses."""

    name = "meta-elp"

    def __init__(self, k: int, T: int, rng: np.random.Generator, b: float = 1.0,
                 gamma: float | None = None, beta: float | None = None):
        super().__init__(k)
        if k < 2:
            raise ValueError("meta-ELP needs k >= 2")
        n = max(1, math.ceil(math.log2(k)))
        # copy i (0-based) guesses sum_t α(G_t) = 2^i * T
        self.copies = [Elp(k, beta if beta is not None else elp_tune_beta(2.0 ** i * T, b, k), b)
                       for i in range(n)]
        gamma = exp3_gamma(n, T) if gamma is None else gamma
        self.meta = Exp3(n, gamma)
        self.rng = rng
        self.active = 0
        self.metadata.update(copies=n, gamma=gamma, betas=[c.beta for c in self.copies])

    def begin_round(self, t: int, graph: FeedbackGraph) -> np.ndarray:
        dist = self.meta.distribution()
        self.active = int(min(np.searchsorted(np.cumsum(dist), self.rng.random(), side="right"), len(dist) - 1))
        return self.copies[self.active].begin_round(t, graph)

    def observe(self, t: int, action: int, reward: float, indices, values) -> None:
        self.meta.update(self.active, reward)
        self.copies[self.active].observe(t, action, reward, indices, values)


# -- spec strings -----------------------------------------------------------

POLICY_NAMES = ("elp", "elp-directed", "expban", "exp3", "meta-elp")


@dataclass(frozen=True)
class PolicySpec:
    name: str
    beta: float | None = None
    gamma: float | None = None

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        """``name`` or ``name:beta=0.01,gamma=0.1``."""
        name, _, rest = text.strip().partition(":")
        if name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
        opts: dict[str, float] = {}
        for item in filter(None, (part.strip() for part in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq or key not in ("beta", "gamma"):
                raise ValueError(f"bad policy option {item!r} in {text!r}")
            try:
                opts[key] = float(val)
            except ValueError:
                raise ValueError(f"policy option {key} needs a number, got {val!r}") from None
        return cls(name, **opts)

    def __str__(self) -> str:
        opts = [f"{key}={getattr(self, key)}" for key in ("beta", "gamma") if getattr(self, key) is not None]
        return self.name + (":" + ",".join(opts) if opts else "")


def _graph_quantity_sum(graphs: GraphSequence, T: int, quantity) -> tuple[float, str]:
    if graphs.is_fixed:
        value, method = quantity(graphs.graph)
        return float(value) * T, method
    total, methods = 0.0, set()
    for t in range(T):
        value, method = quantity(graphs.at(t))
        total += value
        methods.add(method)
    return total, "greedy" if "greedy" in methods else "exact"


def _clique_count(g: FeedbackGraph) -> tuple[int, str]:
    return clique_partition_greedy(g).c, "greedy"


def build_policy(spec: PolicySpec | str, graphs: GraphSequence, T: int, b: float = 1.0,
                 rng: np.random.Generator | None = None) -> Policy:
    """Instantiate a policy with theoretically tuned parameters unless overridden."""
    if isinstance(spec, str):
        spec = PolicySpec.parse(spec)
    k = graphs.k
    if spec.name in ("elp", "elp-directed"):
        if spec.name == "elp":
            total, method = _graph_quantity_sum(graphs, T, independence_estimate)
            key = "alpha_hat"
        else:
            total, method = _graph_quantity_sum(graphs, T, _clique_count)
            key = "chi_hat"
        if k < 2:
            raise ValueError("ELP needs k >= 2")
        beta = spec.beta if spec.beta is not None else elp_tune_beta(total, b, k)
        policy = Elp(k, beta, b)
        policy.name = spec.name
        policy.metadata.update(policy=spec.name, **{key: total / T, f"{key}_method": method})
        return policy
    if spec.name == "exp3":
        gamma = spec.gamma if spec.gamma is not None else exp3_gamma(k, T)
        return Exp3Policy(k, gamma)
    if spec.name == "expban":
        if not graphs.is_fixed:
            raise ValueError("expban requires a fixed graph")
        return ExpBan(graphs.graph, T, b, beta=spec.beta, gamma=spec.gamma)
    if rng is None:
        rng = np.random.default_rng()
    return MetaElp(k, T, rng, b, gamma=spec.gamma, beta=spec.beta)
