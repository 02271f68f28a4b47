"""Shared fixture builders for the test suite."""

import itertools

from spanembed.graph_core import VertexSet, gnp, iter_bits, rng_for
from spanembed.guest_prep import assign_guest
from spanembed.harness import make_guest
from spanembed.reduced_graph import BackboneIndex, ReducedGraph, prepare_host


def deleted_to_floor(host, gamma, k, p, seed):
    """Random adversary pushed all the way to the degree floor."""
    floor = ((k - 1) / k + gamma) * p * host.n
    rng = rng_for(seed, stream=42)
    deg = [host.degree(v) for v in range(host.n)]
    edges = list(host.edges())
    drop = []
    for i in rng.permutation(len(edges)):
        u, v = edges[int(i)]
        if deg[u] - 1 >= floor and deg[v] - 1 >= floor:
            deg[u] -= 1
            deg[v] -= 1
            drop.append((u, v))
    return host.without_edges(drop)


def complete_reduced(r, k):
    idx = BackboneIndex(r, k)
    edges = {frozenset(e) for e in itertools.combinations(idx.cells(), 2)}
    return ReducedGraph(index=idx, edges=edges, extension={i: ((i + 1) % r, 0) for i in range(r)})


def even_targets(n, r, k):
    cells = [(i, j) for i in range(r) for j in range(k)]
    base = n // len(cells)
    rem = n - base * len(cells)
    return {cell: base + (1 if idx < rem else 0) for idx, cell in enumerate(cells)}


def pre_embed_instance(n=1000, seed=0, v0_target=None, eps=0.25):
    """Host structure, guest, and assignment with V0 padded to a target size."""
    p, k, gamma = 0.4, 2, 0.2
    host = gnp(n, p, seed)
    g = deleted_to_floor(host, gamma, k, p, seed)
    hs = prepare_host(g, host, p, gamma, k, eps, 0.1, 4, seed=seed)
    if v0_target is not None and len(hs.v0) < v0_target:
        short = v0_target - len(hs.v0)
        cells = sorted(hs.clusters)
        moved = hs.v0.mask
        for t in range(short):
            cell = cells[t % len(cells)]
            v = max(iter_bits(hs.clusters[cell].mask))
            hs.clusters[cell] = hs.clusters[cell] - VertexSet.from_iter(n, [v])
            moved |= 1 << v
        hs.v0 = VertexSet(n, moved)
    guest, lab, col, _ = make_guest("hamilton_cycle", n, seed)
    cells = sorted(hs.clusters)
    v0s = len(hs.v0)
    base = v0s // len(cells)
    m = {c: len(hs.clusters[c]) + base for c in cells}
    for c in cells[: v0s - base * len(cells)]:
        m[c] += 1
    assignment = assign_guest(guest, lab, col, hs.reduced, m, xi=0.05, beta=8 / (k * n), seed=seed)
    return g, host, hs, guest, lab, assignment
