"""Oblivious adversaries and the reward-estimate channel.

Reward tables are drawn in full before any learner acts, so the sequence is
fixed in advance by construction.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import FeedbackGraph, independence_number_exact, greedy_independent_set, EXACT_ALPHA_LIMIT

LOWER_BOUND_C1 = 1.0 / (8.0 * math.log(4.0 / 3.0))
LOWER_BOUND_C2 = (math.sqrt(2.0) - 1.0) / math.sqrt(32.0 * math.log(4.0 / 3.0))
LOWER_BOUND_FLOOR = 0.06
LOWER_BOUND_T_FACTOR = 374


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class RewardTable:
    """``g[t, i]`` is the reward of action ``i`` in round ``t`` (0-based)."""

    g: np.ndarray
    means: np.ndarray | None = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.g.ndim != 2:
            raise EnvError("reward table must be T x k")
        if np.any(self.g < 0.0) or np.any(self.g > 1.0):
            raise EnvError("rewards must lie in [0, 1]")

    @property
    def T(self) -> int:
        return self.g.shape[0]

    @property
    def k(self) -> int:
        return self.g.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"a{i}" for i in range(self.k)])
        for t, row in enumerate(self.g, 1):
            writer.writerow([t] + [repr(float(v)) for v in row])
        return buf.getvalue()


def gen_bernoulli_table(means, T: int, seed) -> RewardTable:
    """Independent Bernoulli rewards per (round, action)."""
    means = np.asarray(means, dtype=float)
    if means.ndim != 1 or means.size == 0:
        raise EnvError("means must be a nonempty vector")
    if np.any(means < 0.0) or np.any(means > 1.0):
        raise EnvError("means must lie in [0, 1]")
    if T < 1:
        raise EnvError("T must be at least 1")
    rng = np.random.default_rng(seed)
    g = (rng.random((T, means.size)) < means).astype(float)
    return RewardTable(g, means)


def fig1_adversary(k: int, special: int) -> np.ndarray:
    """Fair coins everywhere except one action paying 1 with probability 3/4."""
    if not 0 <= special < k:
        raise EnvError(f"special action {special} outside [0, {k})")
    means = np.full(k, 0.5)
    means[special] = 0.75
    return means


@dataclass(frozen=True)
class LowerBoundAdversarySpec:
    independent_set: tuple[int, ...]
    special: int
    epsilon: float
    exact: bool

    @property
    def alpha_hat(self) -> int:
        return len(self.independent_set)

    def means(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        out[list(self.independent_set)] = 0.5
        out[self.special] = 0.5 + self.epsilon
        return out


def lower_bound_epsilon(alpha: int, T: int) -> float:
    return math.sqrt(LOWER_BOUND_C1 * alpha / T)


def lower_bound_floor(alpha: int, T: int) -> float:
    return LOWER_BOUND_FLOOR * math.sqrt(alpha * T)


def lower_bound_independent_set(g: FeedbackGraph) -> tuple[tuple[int, ...], bool]:
    if g.k <= EXACT_ALPHA_LIMIT:
        return tuple(sorted(independence_number_exact(g)[1])), True
    return tuple(sorted(greedy_independent_set(g))), False


def lower_bound_adversary(g: FeedbackGraph, T: int, seed, independent_set=None) -> tuple[RewardTable, LowerBoundAdversarySpec]:
    """Randomized hard instance: one hidden action of a maximum independent set is slightly better.

    The hidden action pays Bernoulli(1/2 + eps), the rest of the set pays
    Bernoulli(1/2), and every action outside the set always pays 0, with
    ``eps = sqrt(c1 * |S| / T)``.
    """
    if g.directed:
        raise EnvError("the lower-bound adversary needs an undirected graph")
    if independent_set is None:
        nodes, exact = lower_bound_independent_set(g)
    else:
        nodes, exact = tuple(sorted(independent_set)), False
    alpha = len(nodes)
    if T < 4 * LOWER_BOUND_C1 * alpha:
        raise EnvError(f"T={T} too small: need T >= {4 * LOWER_BOUND_C1 * alpha:.2f} so that eps <= 1/2")
    rng = np.random.default_rng(seed)
    special = int(nodes[rng.integers(alpha)])
    spec = LowerBoundAdversarySpec(nodes, special, lower_bound_epsilon(alpha, T), exact)
    means = spec.means(g.k)
    g_tab = (rng.random((T, g.k)) < means).astype(float)
    return RewardTable(g_tab, means, {"special": special, "epsilon": spec.epsilon}), spec


# -- observation channel ----------------------------------------------------


@dataclass(frozen=True)
class ObservationModel:
    """Exact rewards, or rewards plus independent Uniform[-delta, delta] noise (never clipped)."""

    delta: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise EnvError("noise half-width must be nonnegative")

    @property
    def b(self) -> float:
        return 1.0 + self.delta

    @property
    def exact(self) -> bool:
        return self.delta == 0.0

    @classmethod
    def parse(cls, text: str) -> "ObservationModel":
        """``exact`` or ``noise:<delta>``."""
        text = text.strip()
        if text == "exact":
            return cls()
        name, _, arg = text.partition(":")
        if name == "noise":
            try:
                return cls(float(arg))
            except ValueError:
                pass
        raise EnvError(f"unknown observation model {text!r}; use 'exact' or 'noise:<delta>'")

    def __str__(self) -> str:
        return "exact" if self.exact else f"noise:{self.delta}"


def observe(model: ObservationModel, graph: FeedbackGraph, action: int, g_row, rng=None):
    """Estimates for every ``j`` with ``action`` in ``N_j``: returns ``(indices, values)``."""
    indices = graph.revealed_by(action)
    values = np.asarray(g_row, dtype=float)[indices]
    if not model.exact:
        values = values + rng.uniform(-model.delta, model.delta, size=indices.size)
    if np.any(np.abs(values) > model.b):
        raise EnvError("estimate exceeds its bound")
    return indices, values


# -- spec strings -----------------------------------------------------------


@dataclass(frozen=True)
class AdversarySpec:
    """``bernoulli:<means-file>``, ``fig1:<special>`` or ``lowerbound``."""

    kind: str
    special: int = 0
    means_file: str | None = None

    @classmethod
    def parse(cls, text: str) -> "AdversarySpec":
        name, _, arg = text.strip().partition(":")
        if name == "lowerbound" and not arg:
            return cls("lowerbound")
        if name == "fig1":
            try:
                return cls("fig1", special=int(arg) if arg else 0)
            except ValueError:
                raise EnvError(f"fig1 needs an integer action, got {arg!r}") from None
        if name == "bernoulli" and arg:
            return cls("bernoulli", means_file=arg)
        raise EnvError(f"unknown adversary {text!r}; use bernoulli:<file>, fig1:<special> or lowerbound")

    def __str__(self) -> str:
        if self.kind == "fig1":
            return f"fig1:{self.special}"
        if self.kind == "bernoulli":
            return f"bernoulli:{self.means_file}"
        return self.kind


def read_means(path) -> np.ndarray:
    """Whitespace- or comma-separated means; ``#`` comments allowed."""
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].replace(",", " ")
        vals += [float(v) for v in line.split()]
    return np.asarray(vals)


class Adversary:
    """Draws one reward table per run from an adversary spec."""

    def __init__(self, spec: AdversarySpec | str, graph: FeedbackGraph | None, k: int, base_dir: Path | None = None):
        if isinstance(spec, str):
            spec = AdversarySpec.parse(spec)
        self.spec = spec
        self.k = k
        self.graph = graph
        self._means = None
        self._lb_set = None
        if spec.kind == "fig1":
            self._means = fig1_adversary(k, spec.special)
        elif spec.kind == "bernoulli":
            path = Path(spec.means_file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            self._means = read_means(path)
            if self._means.size != k:
                raise EnvError(f"means file lists {self._means.size} actions, expected {k}")
            if np.any(self._means < 0) or np.any(self._means > 1):
                raise EnvError("means must lie in [0, 1]")
        else:
            if graph is None:
                raise EnvError("lowerbound adversary needs a fixed graph")
            self._lb_set = lower_bound_independent_set(graph)

    def draw(self, T: int, seed) -> RewardTable:
        if self._lb_set is not None:
            nodes, exact = self._lb_set
            table, spec = lower_bound_adversary(self.graph, T, seed, independent_set=nodes)
            table.info.update(alpha_hat=spec.alpha_hat, exact=exact)
            return table
        return gen_bernoulli_table(self._means, T, seed)
