"""Bitset graph kernel: representation, seeded generators, density and order utilities.

Graphs are immutable, undirected, loop-free, with adjacency stored as one
Python int bitmask per vertex.  All randomness flows through numpy's Philox
counter-based generator so that identical seeds reproduce identical graphs
on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "VertexSet",
    "Labelling",
    "rng_for",
    "iter_bits",
    "mask_of",
    "gnp",
    "paley",
    "p_density",
    "bandwidth_of_labelling",
    "degeneracy_order",
    "write_graph_file",
    "read_graph_file",
    "parse_graph_text",
]


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for (seed, stream); the single PRNG used package-wide."""
    return np.random.Generator(np.random.Philox(key=(seed & (2**64 - 1)) * 2**64 + (stream & (2**64 - 1))))


def iter_bits(mask: int):
    """Yield set bit positions of `mask` in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(vertices) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


class VertexSet:
    """Immutable vertex subset of [n], backed by an int bitmask with cached size."""

    __slots__ = ("n", "mask", "_size")

    def __init__(self, n: int, mask: int):
        if mask < 0 or mask >> n:
            raise ValueError("mask has bits outside [n]")
        self.n = n
        self.mask = mask
        self._size = mask.bit_count()

    @classmethod
    def from_iter(cls, n: int, vertices) -> "VertexSet":
        return cls(n, mask_of(vertices))

    @classmethod
    def full(cls, n: int) -> "VertexSet":
        return cls(n, (1 << n) - 1)

    @classmethod
    def empty(cls, n: int) -> "VertexSet":
        return cls(n, 0)

    def __len__(self) -> int:
        return self._size

    def __contains__(self, v: int) -> bool:
        return bool((self.mask >> v) & 1)

    def __iter__(self):
        return iter_bits(self.mask)

    def __and__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.n, self.mask & other.mask)

    def __or__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.n, self.mask | other.mask)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.n, self.mask & ~other.mask)

    def __xor__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.n, self.mask ^ other.mask)

    def __eq__(self, other) -> bool:
        return isinstance(other, VertexSet) and self.n == other.n and self.mask == other.mask

    def __hash__(self) -> int:
        return hash((self.n, self.mask))

    def __repr__(self) -> str:
        return f"VertexSet(n={self.n}, size={self._size})"

    def to_list(self) -> list[int]:
        return list(iter_bits(self.mask))


class Graph:
    """Immutable undirected graph on vertices 0..n-1 with bitset adjacency."""

    __slots__ = ("n", "adj", "_m")

    def __init__(self, n: int, adj: tuple[int, ...]):
        if len(adj) != n:
            raise ValueError("adjacency length mismatch")
        self.n = n
        self.adj = adj
        self._m = sum(a.bit_count() for a in adj) // 2

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        adj = [0] * n
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) outside [0,{n})")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return cls(n, tuple(adj))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, tuple([0] * n))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        full = (1 << n) - 1
        return cls(n, tuple(full ^ (1 << v) for v in range(n)))

    @property
    def m(self) -> int:
        return self._m

    def neighbours(self, v: int) -> int:
        return self.adj[v]

    def degree(self, v: int) -> int:
        return self.adj[v].bit_count()

    def degree_into(self, v: int, mask: int) -> int:
        return (self.adj[v] & mask).bit_count()

    def min_degree(self) -> int:
        return min((a.bit_count() for a in self.adj), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return bool((self.adj[u] >> v) & 1)

    def edges(self):
        for u in range(self.n):
            rest = self.adj[u] >> (u + 1)
            for off in iter_bits(rest):
                yield (u, u + 1 + off)

    def edges_between(self, xmask: int, ymask: int) -> int:
        """Number of edges with one end in X, the other in Y (X, Y disjoint)."""
        if xmask & ymask:
            raise ValueError("edges_between requires disjoint sets")
        return sum((self.adj[x] & ymask).bit_count() for x in iter_bits(xmask))

    def edges_inside(self, mask: int) -> int:
        return sum((self.adj[x] & mask).bit_count() for x in iter_bits(mask)) // 2

    def without_edges(self, edges) -> "Graph":
        adj = list(self.adj)
        for u, v in edges:
            adj[u] &= ~(1 << v)
            adj[v] &= ~(1 << u)
        return Graph(self.n, tuple(adj))

    def common_neighbourhood(self, vertices, within: int | None = None) -> int:
        m = (1 << self.n) - 1 if within is None else within
        for v in vertices:
            m &= self.adj[v]
        return m

    def bfs_distances(self, sources, limit: int | None = None) -> list[int]:
        """BFS distance from a source set; -1 for unreached (or beyond `limit`)."""
        dist = [-1] * self.n
        frontier = []
        for s in sources:
            if dist[s] == -1:
                dist[s] = 0
                frontier.append(s)
        d = 0
        while frontier and (limit is None or d < limit):
            d += 1
            nxt = []
            for u in frontier:
                for w in iter_bits(self.adj[u]):
                    if dist[w] == -1:
                        dist[w] = d
                        nxt.append(w)
            frontier = nxt
        return dist

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.adj == other.adj

    def __hash__(self) -> int:
        return hash((self.n, self.adj))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self._m})"


@dataclass(frozen=True)
class Labelling:
    """Bijection position -> vertex, with the inverse map cached."""

    order: tuple[int, ...]
    pos: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        n = len(self.order)
        pos = [-1] * n
        for p, v in enumerate(self.order):
            if not (0 <= v < n) or pos[v] != -1:
                raise ValueError("labelling is not a permutation")
            pos[v] = p
        object.__setattr__(self, "pos", tuple(pos))

    @classmethod
    def identity(cls, n: int) -> "Labelling":
        return cls(tuple(range(n)))

    def __len__(self) -> int:
        return len(self.order)


def gnp(n: int, p: float, seed: int) -> Graph:
    """Binomial random graph: each unordered pair is an edge independently with probability p."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    adj = [0] * n
    if p > 0.0 and n > 1:
        rng = rng_for(seed, stream=0)
        iu, iv = np.triu_indices(n, k=1)
        hit = rng.random(iu.shape[0]) < p
        for u, v in zip(iu[hit].tolist(), iv[hit].tolist()):
            adj[u] |= 1 << v
            adj[v] |= 1 << u
    return Graph(n, tuple(adj))


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def paley(q: int) -> Graph:
    """Paley graph on GF(q): u ~ v iff u - v is a nonzero quadratic residue mod q.

    Requires q prime with q = 1 (mod 4) so that the residue relation is symmetric;
    the result is (q-1)/2-regular.
    """
    if not _is_prime(q) or q % 4 != 1:
        raise ValueError("paley requires a prime q with q = 1 (mod 4)")
    residues = {(x * x) % q for x in range(1, q)}
    adj = [0] * q
    for u in range(q):
        for r in residues:
            adj[u] |= 1 << ((u + r) % q)
    return Graph(q, tuple(adj))


def p_density(g: Graph, x: VertexSet, y: VertexSet, p: float) -> float:
    """Edge density of the pair (X, Y) normalised by the ambient density p.

    May exceed 1; only defined for disjoint nonempty sides and p > 0.
    """
    if p <= 0.0:
        raise ValueError("p must be positive")
    if len(x) == 0 or len(y) == 0:
        raise ValueError("sides must be nonempty")
    if x.mask & y.mask:
        raise ValueError("sides must be disjoint")
    return g.edges_between(x.mask, y.mask) / (p * len(x) * len(y))


def bandwidth_of_labelling(g: Graph, l: Labelling) -> int:
    """Maximum position stretch over edges; 0 for edgeless graphs."""
    if len(l) != g.n:
        raise ValueError("labelling size mismatch")
    pos = l.pos
    best = 0
    for u, v in g.edges():
        s = abs(pos[u] - pos[v])
        if s > best:
            best = s
    return best


def degeneracy_order(g: Graph) -> tuple[Labelling, int]:
    """Greedy min-degree removal order and its degeneracy.

    Bucket-queue implementation; ties break on the smallest vertex id.  The
    returned d is the maximum degree a vertex has into the not-yet-removed set
    at its removal time, so every vertex has at most d neighbours that are
    removed after it.
    """
    import heapq

    n = g.n
    deg = [g.degree(v) for v in range(n)]
    heap = [(deg[v], v) for v in range(n)]
    heapq.heapify(heap)
    removed = [False] * n
    order = []
    d = 0
    while heap:
        dv, v = heapq.heappop(heap)
        if removed[v] or dv != deg[v]:
            continue  # stale entry
        order.append(v)
        removed[v] = True
        d = max(d, dv)
        for w in iter_bits(g.adj[v]):
            if not removed[w]:
                deg[w] -= 1
                heapq.heappush(heap, (deg[w], w))
    return Labelling(tuple(order)), d


def write_graph_file(g: Graph) -> str:
    """Serialise to the text format: `graph <n> <m>` then one `<u> <v>` line per edge."""
    lines = [f"graph {g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def parse_graph_text(text: str) -> Graph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("graph "):
        raise ValueError("missing graph header")
    parts = lines[0].split()
    if len(parts) != 3:
        raise ValueError("malformed graph header")
    n, m = int(parts[1]), int(parts[2])
    if len(lines) - 1 != m:
        raise ValueError(f"expected {m} edge lines, found {len(lines) - 1}")
    seen = set()
    edges = []
    for ln in lines[1:]:
        us, vs = ln.split()
        u, v = int(us), int(vs)
        if u == v:
            raise ValueError(f"self-loop at {u}")
        if not (0 <= u < v < n):
            raise ValueError(f"edge ({u},{v}) violates 0 <= u < v < n")
        if (u, v) in seen:
            raise ValueError(f"duplicate edge ({u},{v})")
        seen.add((u, v))
        edges.append((u, v))
    return Graph.from_edges(n, edges)


def read_graph_file(path) -> Graph:
    with open(path, "r", encoding="ascii") as fh:
        return parse_graph_text(fh.read())
