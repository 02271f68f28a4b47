import pytest

from spanembed.graph_core import VertexSet, gnp, iter_bits, rng_for
from spanembed.guest_prep import assign_guest
from spanembed.harness import make_guest
from spanembed.pre_embedding import (
    PreEmbedError,
    pre_embed,
    reserve_set,
    restriction_image,
    validate_restriction_pair,
    RestrictionPair,
    dump_transcript,
)
from spanembed.reduced_graph import prepare_host


def deleted_to_floor(host, gamma, k, p, seed):
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


def build_instance(n=1000, seed=0, v0_target=None, eps=0.25):
    """Host structure + guest assignment, optionally padding V0 to a target size."""
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


PARAMS = dict(eps=0.25, d=0.1, p=0.4, mu=0.15, delta=2)


class TestReserveSet:
    def test_mu_one_is_everything(self):
        g = gnp(60, 0.5, 1)
        s = reserve_set(g, g, {}, 1.0, seed=1)
        assert len(s) == 60

    def test_tiny_mu_empty(self):
        g = gnp(60, 0.5, 1)
        s = reserve_set(g, g, {}, 0.01, seed=1)
        assert len(s) == 0

    def test_seeded_probe_certified(self):
        host = gnp(1000, 0.4, 8)
        g = deleted_to_floor(host, 0.2, 2, 0.4, 8)
        hs = prepare_host(g, host, 0.4, 0.2, 2, 0.25, 0.1, 4, seed=8)
        s = reserve_set(g, host, hs.clusters, 0.05, seed=8, delta_max=2, eps=0.25)
        assert len(s) == 50
        for c in hs.clusters.values():
            assert (c.mask & s.mask).bit_count() <= 2 * 0.05 * len(c) + 2


class TestPreEmbed:
    def test_empty_v0_trivial(self):
        g, host, hs, guest, lab, assignment = build_instance(seed=3)
        hs.v0 = VertexSet.empty(g.n)
        reserve = reserve_set(g, host, hs.clusters, 0.15, seed=3)
        state, f_star, restr = pre_embed(
            g, host, hs.v0, hs.clusters, hs.reduced, guest, lab, assignment, reserve, PARAMS, seed=3
        )
        assert not state.phi
        assert f_star == assignment.f
        assert not restr.J

    def test_invariants_on_seeded_instances(self):
        for seed, v0_target in [(0, 1), (1, 3), (2, 8), (4, 5)]:
            g, host, hs, guest, lab, assignment = build_instance(seed=seed, v0_target=v0_target)
            reserve = reserve_set(g, host, hs.clusters, 0.15, seed=seed)
            state, f_star, restr = pre_embed(
                g, host, hs.v0, hs.clusters, hs.reduced, guest, lab, assignment, reserve, PARAMS, seed=seed
            )
            im = state.image_mask()
            # exceptional set fully covered, images inside V0 + reserve
            assert hs.v0.mask & ~im == 0
            assert im & ~(hs.v0.mask | reserve.mask) == 0
            # injective, edge-preserving where both ends are embedded
            assert len(set(state.phi.values())) == len(state.phi)
            for x, v in state.phi.items():
                for y in iter_bits(guest.adj[x]):
                    if y in state.phi:
                        assert g.has_edge(v, state.phi[y])
            # each anchor's embedded neighbour images sit in N_G(v_t) cap reserve
            for anchor, v_t in state.anchors:
                for y in iter_bits(guest.adj[anchor]):
                    w = state.phi[y]
                    assert g.has_edge(v_t, w) and w in reserve
            # anchors pairwise far apart in the guest
            anchors = [a for a, _ in state.anchors]
            sep = 2 * hs.r + 20
            for i, a in enumerate(anchors):
                dist = guest.bfs_distances([a], limit=sep - 1)
                for b in anchors[i + 1:]:
                    assert dist[b] == -1  # further than sep - 1
            # rerouted assignment is still a homomorphism
            dom = state.domain_mask()
            for u, v in guest.edges():
                if ((dom >> u) & 1) or ((dom >> v) & 1):
                    continue
                assert hs.reduced.has_edge(f_star[u], f_star[v])

    def test_single_exceptional_cycle_embeds_three(self):
        g, host, hs, guest, lab, assignment = build_instance(seed=5, v0_target=1)
        reserve = reserve_set(g, host, hs.clusters, 0.15, seed=5)
        state, _, _ = pre_embed(
            g, host, hs.v0, hs.clusters, hs.reduced, guest, lab, assignment, reserve, PARAMS, seed=5
        )
        if len(hs.v0) == 1:
            assert len(state.phi) == 3  # the anchor and its two cycle neighbours

    def test_transcript_lines(self):
        g, host, hs, guest, lab, assignment = build_instance(seed=6, v0_target=2)
        reserve = reserve_set(g, host, hs.clusters, 0.15, seed=6)
        state, _, _ = pre_embed(
            g, host, hs.v0, hs.clusters, hs.reduced, guest, lab, assignment, reserve, PARAMS, seed=6
        )
        text = dump_transcript(state)
        assert any(ln.startswith("anchor ") for ln in text.splitlines())
        assert any(ln.startswith("leaf ") for ln in text.splitlines())


class TestRestrictionValidation:
    def test_empty_pair_vacuous(self):
        g = gnp(40, 0.5, 1)
        report = validate_restriction_pair(
            RestrictionPair(), {}, {}, g, g, 0.1, 0.01, 2, 2, 0.25, 0.5, 0.1
        )
        assert report["all_ok"]["ok"]

    def test_degree_budget_violation(self):
        from spanembed.graph_core import Graph

        guest = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
        restr = RestrictionPair(J={0: (7, 8)})
        g = gnp(40, 0.5, 2)
        cells = {(0, 0): VertexSet.from_iter(40, range(20))}
        f_star = ((0, 0),) * 4
        report = validate_restriction_pair(
            restr, cells, {(0, 0): 4}, g, g, 0.9, 1e-6, 2, 2, 0.9, 0.5, 0.1,
            f_star=f_star, guest=guest,
        )
        assert not report["degree_budget"]["ok"]
        assert 0 in report["degree_budget"]["violations"]

    def test_fixture_from_seeded_run(self):
        g, host, hs, guest, lab, assignment = build_instance(seed=7, v0_target=4)
        reserve = reserve_set(g, host, hs.clusters, 0.15, seed=7)
        state, f_star, restr = pre_embed(
            g, host, hs.v0, hs.clusters, hs.reduced, guest, lab, assignment, reserve, PARAMS, seed=7
        )
        im = state.image_mask()
        clusters_prime = {c: VertexSet(g.n, vs.mask & ~im) for c, vs in hs.clusters.items()}
        parts = {}
        dom = state.domain_mask()
        for v in range(g.n):
            if not ((dom >> v) & 1):
                parts[f_star[v]] = parts.get(f_star[v], 0) + 1
        report = validate_restriction_pair(
            restr, clusters_prime, parts, host, g,
            rho=0.1, zeta=0.01, delta=2, delta_j=2, eps=0.25, p=0.4, d=0.1,
            f_star=f_star, guest=guest, skip=set(state.phi.keys()), seed=7,
        )
        assert report["all_ok"]["ok"], {k: v for k, v in report.items() if not v["ok"]}

    def test_restriction_image_mask(self):
        g = gnp(30, 0.5, 3)
        cells = {(0, 0): VertexSet.from_iter(30, range(15))}
        img = restriction_image(g, cells, (0, 0), [20])
        assert img == g.adj[20] & cells[(0, 0)].mask
