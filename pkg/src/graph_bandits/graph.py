"""Feedback graphs and their combinatorial quantities.

A feedback graph over ``k`` actions stores, for every action ``j``, the
in-neighborhood ``N_j``: the set of actions whose choice yields an estimate
of ``j``'s reward. An edge ``(i, j)`` means "choosing i reveals j", so it
puts ``i`` into ``N_j``. Every action observes itself.

Neighborhoods are kept as Python int bitsets (bit ``i`` of ``in_masks[j]``
is set iff ``i`` is in ``N_j``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

EXACT_ALPHA_LIMIT = 30


class GraphError(ValueError):
    pass


class ExactLimitExceeded(GraphError):
    """Raised when an exact solver is asked for a graph above its node limit."""


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _lowest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


@dataclass(frozen=True)
class FeedbackGraph:
    k: int
    directed: bool
    in_masks: tuple[int, ...]

    def __post_init__(self):
        if self.k < 1:
            raise GraphError("graph needs at least one action")
        if len(self.in_masks) != self.k:
            raise GraphError(f"expected {self.k} neighborhoods, got {len(self.in_masks)}")
        full = (1 << self.k) - 1
        for j, mask in enumerate(self.in_masks):
            if not (mask >> j) & 1:
                raise GraphError(f"action {j} is missing from its own neighborhood")
            if mask & ~full:
                raise GraphError(f"neighborhood of {j} has members outside [0, {self.k})")
        if not self.directed:
            m = self.observes
            if not np.array_equal(m, m.T):
                raise GraphError("undirected graph with asymmetric neighborhoods")

    @classmethod
    def from_matrix(cls, observes, directed: bool) -> "FeedbackGraph":
        """Build from a boolean matrix with ``observes[i, j]`` true iff i is in N_j."""
        m = np.array(observes, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GraphError("observation matrix must be square")
        k = m.shape[0]
        m = m | np.eye(k, dtype=bool)
        if not directed:
            m = m | m.T
        masks = tuple(sum(1 << int(i) for i in np.flatnonzero(m[:, j])) for j in range(k))
        return cls(k, bool(directed), masks)

    # -- views -------------------------------------------------------------

    @cached_property
    def observes(self) -> np.ndarray:
        """``observes[i, j]`` is true iff choosing ``i`` yields an estimate of ``j``."""
        m = np.zeros((self.k, self.k), dtype=bool)
        for j, mask in enumerate(self.in_masks):
            m[_bits(mask), j] = True
        m.flags.writeable = False
        return m

    @cached_property
    def _revealed(self) -> tuple[np.ndarray, ...]:
        m = self.observes
        return tuple(np.flatnonzero(m[i]) for i in range(self.k))

    def neighborhood(self, j: int) -> frozenset[int]:
        return frozenset(_bits(self.in_masks[j]))

    def revealed_by(self, i: int) -> np.ndarray:
        """Sorted actions ``j`` with ``i`` in ``N_j``."""
        return self._revealed[i]

    @cached_property
    def link_masks(self) -> tuple[int, ...]:
        """Symmetrized adjacency without self loops: linked if an edge exists either way."""
        out = [0] * self.k
        for j, mask in enumerate(self.in_masks):
            for i in _bits(mask):
                if i != j:
                    out[i] |= 1 << j
                    out[j] |= 1 << i
        return tuple(out)

    @cached_property
    def mutual_masks(self) -> tuple[int, ...]:
        """Pairs that observe each other in both directions (self excluded)."""
        out = []
        for i in range(self.k):
            mask = 0
            for j in _bits(self.in_masks[i]):
                if j != i and (self.in_masks[j] >> i) & 1:
                    mask |= 1 << j
            out.append(mask)
        return tuple(out)

    @property
    def edge_count(self) -> int:
        """Unordered links when undirected, ordered edges when directed; self loops excluded."""
        total = sum(bin(mask).count("1") - 1 for mask in self.in_masks)
        return total if self.directed else total // 2

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for i in range(self.k):
            for j in self.revealed_by(i):
                j = int(j)
                if j != i and (self.directed or i < j):
                    out.append((i, j))
        return out

    def is_independent(self, nodes: Iterable[int]) -> bool:
        mask = 0
        for v in nodes:
            mask |= 1 << v
        return all(not (self.link_masks[v] & mask) for v in _bits(mask))

    def is_clique(self, nodes: Iterable[int]) -> bool:
        """True iff every ordered pair in ``nodes`` observes the other."""
        nodes = list(nodes)
        return all((self.in_masks[j] >> i) & 1 for i in nodes for j in nodes)


def from_edge_list(k: int, edges: Iterable[Sequence[int]], directed: bool) -> FeedbackGraph:
    """Build a graph from ``(i, j)`` pairs meaning "choosing i reveals j".

    Self loops are implicit. Undirected edges are symmetrized.
    """
    if k < 1:
        raise GraphError("k must be at least 1")
    masks = [1 << j for j in range(k)]
    for edge in edges:
        i, j = (int(v) for v in edge)
        if not (0 <= i < k and 0 <= j < k):
            raise GraphError(f"edge ({i}, {j}) has an endpoint outside [0, {k})")
        masks[j] |= 1 << i
        if not directed:
            masks[i] |= 1 << j
    return FeedbackGraph(k, bool(directed), tuple(masks))


# -- independence number ----------------------------------------------------


def _clique_cover_size(cand: int, link: Sequence[int]) -> int:
    """Greedy cover of ``cand`` by cliques of the link graph; bounds any independent subset."""
    count = 0
    while cand:
        v = _lowest(cand)
        cand &= ~(1 << v)
        pool = cand & link[v]
        while pool:
            w = _lowest(pool)
            cand &= ~(1 << w)
            pool &= link[w] & ~(1 << w)
        count += 1
    return count


def independence_number_exact(g: FeedbackGraph, limit: int = EXACT_ALPHA_LIMIT) -> tuple[int, frozenset[int]]:
    """Exact maximum independent set by bitset branch and bound.

    Directed graphs use the either-direction link relation. Returns the size
    and one maximum set. Graphs with more than ``limit`` nodes are refused.
    """
    if g.k > limit:
        raise ExactLimitExceeded(f"k={g.k} exceeds exact independence limit {limit}; use greedy_independent_set")
    link = g.link_masks
    seed = greedy_independent_set(g)
    best = [len(seed), sum(1 << v for v in seed)]

    def search(cand: int, size: int, chosen: int) -> None:
        # isolated candidates are always taken
        free = 0
        for v in _bits(cand):
            if not (link[v] & cand):
                free |= 1 << v
        if free:
            cand &= ~free
            chosen |= free
            size += bin(free).count("1")
        if not cand:
            if size > best[0]:
                best[0], best[1] = size, chosen
            return
        if size + _clique_cover_size(cand, link) <= best[0]:
            return
        v = max(_bits(cand), key=lambda u: (bin(link[u] & cand).count("1"), -u))
        search(cand & ~(1 << v) & ~link[v], size + 1, chosen | (1 << v))
        search(cand & ~(1 << v), size, chosen)

    search((1 << g.k) - 1, 0, 0)
    return best[0], frozenset(_bits(best[1]))


def greedy_independent_set(g: FeedbackGraph) -> frozenset[int]:
    """Maximal independent set: repeatedly take the minimum-degree remaining node."""
    link = g.link_masks
    remaining = (1 << g.k) - 1
    chosen = []
    while remaining:
        v = min(_bits(remaining), key=lambda u: (bin(link[u] & remaining).count("1"), u))
        chosen.append(v)
        remaining &= ~(link[v] | (1 << v))
    return frozenset(chosen)


def independence_estimate(g: FeedbackGraph, limit: int = EXACT_ALPHA_LIMIT) -> tuple[int, str]:
    """α(G) when exact search is allowed, else the greedy lower bound. Second item names the method."""
    if g.k <= limit:
        return independence_number_exact(g, limit)[0], "exact"
    return len(greedy_independent_set(g)), "greedy"


# -- clique partition -------------------------------------------------------


@dataclass(frozen=True)
class CliquePartition:
    blocks: tuple[tuple[int, ...], ...]

    @property
    def c(self) -> int:
        return len(self.blocks)

    def block_of(self) -> np.ndarray:
        """Array mapping each action to the index of its block."""
        k = sum(len(b) for b in self.blocks)
        out = np.empty(k, dtype=np.intp)
        for idx, block in enumerate(self.blocks):
            out[list(block)] = idx
        return out


def clique_partition_greedy(g: FeedbackGraph) -> CliquePartition:
    """Partition actions into cliques by greedily coloring the complement.

    Two actions may share a block only if each observes the other. Nodes are
    colored first-fit in order of descending complement degree, ties by index.
    """
    k = g.k
    full = (1 << k) - 1
    conflict = [full & ~g.mutual_masks[v] & ~(1 << v) for v in range(k)]
    order = sorted(range(k), key=lambda v: (-bin(conflict[v]).count("1"), v))
    classes: list[int] = []
    for v in order:
        for idx, members in enumerate(classes):
            if not (members & conflict[v]):
                classes[idx] = members | (1 << v)
                break
        else:
            classes.append(1 << v)
    blocks = sorted(tuple(_bits(m)) for m in classes)
    return CliquePartition(tuple(blocks))


# -- generators -------------------------------------------------------------


def erdos_renyi(k: int, p: float, seed, directed: bool = False) -> FeedbackGraph:
    """G(k, p): every unordered (or ordered, if directed) pair linked independently."""
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"edge probability {p} outside [0, 1]")
    rng = np.random.default_rng(seed)
    draws = rng.random((k, k)) < p
    if directed:
        m = draws
    else:
        m = np.triu(draws, 1)
    np.fill_diagonal(m, True)
    return FeedbackGraph.from_matrix(m, directed)


def _disjoint_cliques(k: int, m: int) -> FeedbackGraph:
    if not 1 <= m <= k:
        raise GraphError(f"cannot split {k} actions into {m} cliques")
    size, extra = divmod(k, m)
    edges = []
    start = 0
    for b in range(m):
        n = size + (1 if b < extra else 0)
        members = range(start, start + n)
        edges += [(i, j) for i in members for j in members if i < j]
        start += n
    return from_edge_list(k, edges, directed=False)


_FIXTURE_RE = re.compile(r"^(\w+?)(?:[(:](\d+)\)?)?$")


def fixture(name: str, k: int) -> FeedbackGraph:
    """Named test graphs: complete, empty, star (center 0), cycle, path, disjoint_cliques(m)."""
    match = _FIXTURE_RE.match(name.strip())
    if not match:
        raise GraphError(f"unknown fixture {name!r}")
    base, arg = match.group(1), match.group(2)
    if base == "disjoint_cliques":
        if arg is None:
            raise GraphError("disjoint_cliques needs a clique count, e.g. disjoint_cliques(3)")
        return _disjoint_cliques(k, int(arg))
    if arg is not None:
        raise GraphError(f"fixture {base!r} takes no argument")
    if base == "complete":
        edges = [(i, j) for i in range(k) for j in range(i + 1, k)]
    elif base == "empty":
        edges = []
    elif base == "star":
        edges = [(0, j) for j in range(1, k)]
    elif base == "path":
        edges = [(i, i + 1) for i in range(k - 1)]
    elif base == "cycle":
        if k < 3:
            raise GraphError("cycle needs k >= 3")
        edges = [(i, (i + 1) % k) for i in range(k)]
    else:
        raise GraphError(f"unknown fixture {name!r}")
    return from_edge_list(k, edges, directed=False)


# -- sequences --------------------------------------------------------------


class GraphSequence:
    """Graphs indexed by round ``t`` (0-based): one fixed graph or a per-round generator."""

    def __init__(self, k: int, fixed: FeedbackGraph | None = None,
                 generator: Callable[[int], FeedbackGraph] | None = None):
        if (fixed is None) == (generator is None):
            raise GraphError("give exactly one of a fixed graph or a generator")
        if fixed is not None and fixed.k != k:
            raise GraphError("fixed graph size does not match k")
        self.k = k
        self.graph = fixed
        self._generator = generator

    @classmethod
    def fixed(cls, g: FeedbackGraph) -> "GraphSequence":
        return cls(g.k, fixed=g)

    @classmethod
    def per_round(cls, k: int, generator: Callable[[int], FeedbackGraph]) -> "GraphSequence":
        return cls(k, generator=generator)

    @property
    def is_fixed(self) -> bool:
        return self.graph is not None

    def at(self, t: int) -> FeedbackGraph:
        if self.graph is not None:
            return self.graph
        g = self._generator(t)
        if g.k != self.k:
            raise GraphError(f"round {t} graph has k={g.k}, expected {self.k}")
        return g


class ErdosRenyiRounds:
    """Fresh G(k, p) every round, deterministic in ``(seed, t)``. Picklable."""

    def __init__(self, k: int, p: float, seed: int, directed: bool = False):
        self.k, self.p, self.seed, self.directed = k, p, seed, directed

    def __call__(self, t: int) -> FeedbackGraph:
        return erdos_renyi(self.k, self.p, [self.seed, t], self.directed)


# -- text format ------------------------------------------------------------


def parse_graph_text(text: str) -> FeedbackGraph:
    """Parse ``k directed`` header then ``i j`` edge lines; ``#`` starts a comment."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise GraphError("graph file is empty")
    lineno, head = rows[0]
    if len(head) != 2 or head[1] not in ("0", "1"):
        raise GraphError(f"line {lineno}: header must be 'k directed' with directed 0 or 1")
    try:
        k = int(head[0])
    except ValueError:
        raise GraphError(f"line {lineno}: k must be an integer") from None
    edges = []
    for lineno, parts in rows[1:]:
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'i j'")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"line {lineno}: endpoints must be integers") from None
        if not (0 <= i < k and 0 <= j < k):
            raise GraphError(f"line {lineno}: edge ({i}, {j}) has an endpoint outside [0, {k})")
        edges.append((i, j))
    return from_edge_list(k, edges, directed=head[1] == "1")


def format_graph_text(g: FeedbackGraph) -> str:
    lines = [f"{g.k} {int(g.directed)}"]
    lines += [f"{i} {j}" for i, j in g.edges()]
    return "\n".join(lines) + "\n"


def read_graph(path) -> FeedbackGraph:
    return parse_graph_text(Path(path).read_text())


def write_graph(g: FeedbackGraph, path) -> None:
    Path(path).write_text(format_graph_text(g))
