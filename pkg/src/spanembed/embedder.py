"""Spanning-completion stage: greedy candidate embedding plus buffer matching.

The main phase walks the guest in the supplied order, embedding each non-buffer
vertex into its candidate set (image restriction or assigned cluster, cut down
by the images of embedded neighbours).  Buffer vertices are deferred and
finished per cluster by augmenting-path bipartite matching; bounded backjumps
and seeded restarts handle dead ends.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

from .graph_core import Graph, Labelling, VertexSet, iter_bits, mask_of, rng_for
from .pre_embedding import RestrictionPair, restriction_image

__all__ = [
    "BufferPlan",
    "EmbedResult",
    "choose_buffers",
    "embed",
    "verify_embedding",
    "embedding_violations",
    "EmbedError",
    "dump_embedding",
]


class EmbedError(RuntimeError):
    """Embedding failed; carries the stuck vertex and a depletion trace."""

    def __init__(self, message: str, stuck: int | None = None, trace: list[str] | None = None):
        super().__init__(message)
        self.stuck = stuck
        self.trace = trace or []


@dataclass
class BufferPlan:
    """Guest vertices per cell deferred to the matching phase."""

    buffers: dict[tuple[int, int], VertexSet]

    def mask(self) -> int:
        m = 0
        for b in self.buffers.values():
            m |= b.mask
        return m


def choose_buffers(
    guest: Graph,
    f_star: tuple[tuple[int, int], ...],
    eligible_mask: int,
    cells: list[tuple[int, int]],
    vartheta: float,
    skip_mask: int = 0,
    order: Labelling | None = None,
) -> BufferPlan:
    """Pick pairwise non-adjacent eligible vertices per cell, about a
    vartheta-fraction of the cell's guest part.

    Scans latest embedding positions first: clusters drain as their guests'
    stretch of the order ends, so the deferred vertices must be the tail ones.
    """
    counts: dict[tuple[int, int], int] = {c: 0 for c in cells}
    for v, cell in enumerate(f_star):
        if not ((skip_mask >> v) & 1):
            counts[cell] = counts.get(cell, 0) + 1
    chosen: dict[tuple[int, int], list[int]] = {c: [] for c in cells}
    blocked = 0
    scan = reversed(order.order) if order is not None else range(guest.n)
    for v in scan:
        if (skip_mask >> v) & 1 or not ((eligible_mask >> v) & 1) or ((blocked >> v) & 1):
            continue
        cell = f_star[v]
        want = max(1, math.ceil(vartheta * counts.get(cell, 0)))
        if len(chosen[cell]) >= want:
            continue
        chosen[cell].append(v)
        blocked |= (1 << v) | guest.adj[v]
    return BufferPlan({c: VertexSet.from_iter(guest.n, vs) for c, vs in chosen.items()})


@dataclass
class EmbedResult:
    phi: dict[int, int]
    retries: int
    main_embedded: int
    matched: int


def embed(
    g: Graph,
    guest: Graph,
    clusters: dict[tuple[int, int], VertexSet],
    f_star: tuple[tuple[int, int], ...],
    restr: RestrictionPair,
    buffers: BufferPlan,
    order: Labelling,
    initial_phi: dict[int, int] | None = None,
    params: dict | None = None,
    seed: int = 0,
) -> EmbedResult:
    """Complete the embedding of the unembedded guest into the clusters.

    Requires |cluster| == |guest part| per cell.  Honors image restrictions,
    prefers candidates keeping the most options open for unembedded
    neighbours, backjumps over the most recent conflicting placement when a
    candidate set empties, and finishes buffer vertices via perfect matchings.
    """
    params = params or {}
    restarts = params.get("restarts", 10)
    backjump_budget = params.get("backjumps", 300)
    initial_phi = initial_phi or {}
    n = guest.n
    # augmenting paths in the buffer phase can be as long as a cluster
    limit = sys.getrecursionlimit()
    if limit < 2 * n + 100:
        sys.setrecursionlimit(2 * n + 100)
    skip_mask = mask_of(initial_phi.keys())
    buf_mask = buffers.mask() & ~skip_mask

    # size compatibility
    part_count: dict[tuple[int, int], int] = {}
    for v in range(n):
        if not ((skip_mask >> v) & 1):
            part_count[f_star[v]] = part_count.get(f_star[v], 0) + 1
    for cell, c in clusters.items():
        if part_count.get(cell, 0) != len(c):
            raise EmbedError(
                f"cell {cell}: cluster size {len(c)} != guest part {part_count.get(cell, 0)}"
            )

    base_mask: dict[int, int] = {}
    for v in range(n):
        if (skip_mask >> v) & 1:
            continue
        js = restr.J.get(v, ())
        base_mask[v] = restriction_image(g, clusters, f_star[v], js) if js else clusters[f_star[v]].mask

    main_order = [v for v in order.order if not ((skip_mask >> v) & 1) and not ((buf_mask >> v) & 1)]
    order_index = {v: i for i, v in enumerate(main_order)}
    last_err: EmbedError | None = None
    for attempt in range(restarts):
        rng = rng_for(seed + attempt, stream=91)
        phi: dict[int, int] = dict(initial_phi)
        img_owner: dict[int, int] = {v: x for x, v in initial_phi.items()}
        used = mask_of(initial_phi.values())
        placed_stack: list[int] = []
        stack_pos: dict[int, int] = {}
        jumps = 0
        idx = 0
        blacklist: dict[int, int] = {}
        trace: list[str] = []
        failed = False

        def constrained_mask(y: int, extra_used: int) -> int:
            m = base_mask[y] & ~used & ~extra_used
            for w in iter_bits(guest.adj[y]):
                if w in phi:
                    m &= g.adj[phi[w]]
            return m

        def try_swap(x: int, need: int) -> bool:
            """Free one host in `need` by relocating its current same-stage owner."""
            nonlocal used
            for w in iter_bits(need & used):
                y = img_owner.get(w)
                if y is None or y in initial_phi:
                    continue
                alt = constrained_mask(y, extra_used=0) & ~(1 << w) & ~blacklist.get(y, 0)
                if alt == 0:
                    continue
                w2 = next(iter_bits(alt))
                phi[y] = w2
                img_owner[w2] = y
                used |= 1 << w2
                used &= ~(1 << w)
                del img_owner[w]
                return True
            return False

        while idx < len(main_order):
            x = main_order[idx]
            cand = base_mask[x] & ~used & ~blacklist.get(x, 0)
            for y in iter_bits(guest.adj[x]):
                if y in phi:
                    cand &= g.adj[phi[y]]
            if cand == 0:
                # local repair first: relocate a same-cell occupant of a host
                # that would serve x, then fall back to backjumping
                need = base_mask[x] & ~blacklist.get(x, 0)
                for y in iter_bits(guest.adj[x]):
                    if y in phi:
                        need &= g.adj[phi[y]]
                if need and try_swap(x, need):
                    continue
                jumps += 1
                trace.append(f"deplete {x} at index {idx}")
                if jumps > backjump_budget:
                    last_err = EmbedError(
                        f"candidate depletion at guest {x}", stuck=x, trace=trace[-10:]
                    )
                    failed = True
                    break
                nbr_positions = [
                    stack_pos[y] for y in iter_bits(guest.adj[x]) if y in phi and y in stack_pos
                ]
                if not nbr_positions:
                    last_err = EmbedError(
                        f"guest {x} has an empty base candidate set", stuck=x, trace=trace[-10:]
                    )
                    failed = True
                    break
                cut = max(nbr_positions)
                culprit = placed_stack[cut]
                blacklist[culprit] = blacklist.get(culprit, 0) | (1 << phi[culprit])
                for y in placed_stack[cut:]:
                    used &= ~(1 << phi[y])
                    img_owner.pop(phi[y], None)
                    del phi[y]
                    del stack_pos[y]
                for y in placed_stack[cut + 1:]:
                    blacklist.pop(y, None)
                placed_stack = placed_stack[:cut]
                idx = order_index[culprit]
                continue
            # prefer images keeping unembedded neighbours most flexible
            future = [y for y in iter_bits(guest.adj[x]) if y not in phi and not ((skip_mask >> y) & 1)]
            best_v, best_key = -1, None
            cand_list = list(iter_bits(cand))
            if len(cand_list) > 24:
                picks = rng.permutation(len(cand_list))[:24]
                cand_list = [cand_list[int(i)] for i in picks]
            for v in cand_list:
                if future:
                    score = min(
                        (g.adj[v] & base_mask[y] & ~used).bit_count() for y in future
                    )
                    key = (-score, (g.adj[v] & ~used).bit_count(), v)
                else:
                    key = (0, (g.adj[v] & ~used).bit_count(), v)
                if best_key is None or key < best_key:
                    best_v, best_key = v, key
            phi[x] = best_v
            img_owner[best_v] = x
            used |= 1 << best_v
            stack_pos[x] = len(placed_stack)
            placed_stack.append(x)
            blacklist.pop(x, None)
            idx += 1
        if failed:
            continue

        # buffer phase: per-cell matching that augments through the main-phase
        # placements (free buffer candidates alone are far too thin at desk
        # scale, but the full cell's candidate relation is dense).  When even
        # that fails, one embedded neighbour of the stuck buffer is relocated
        # to reopen its common neighbourhood.
        matched = 0
        owners: dict[tuple[int, int], dict[int, int]] = {c: {} for c in buffers.buffers}
        for v in range(n):
            if not ((skip_mask >> v) & 1) and v in phi and f_star[v] in owners:
                owners[f_star[v]][phi[v]] = v
        pending = [
            (c, v) for c, bset in sorted(buffers.buffers.items()) for v in bset if v not in phi
        ]

        def cand_of(x: int) -> int:
            m = base_mask[x]
            for y in iter_bits(guest.adj[x]):
                if y in phi and y != x:
                    m &= g.adj[phi[y]]
            return m

        def assign(cell, x: int, h: int):
            # write-through: phi and used always reflect the working matching
            nonlocal used
            old = phi.get(x)
            if old is not None:
                used &= ~(1 << old)
                owners[cell].pop(old, None)
            owners[cell][h] = x
            phi[x] = h
            used |= 1 << h

        def augment(cell, x: int, seen: set[int]) -> bool:
            own = owners[cell]
            for h in iter_bits(cand_of(x) & ~mask_of(seen)):
                seen.add(h)
                cur = own.get(h)
                if ((used >> h) & 1) and cur is None:
                    continue
                if cur is None:
                    assign(cell, x, h)
                    return True
                if cur != x and augment(cell, cur, seen):
                    assign(cell, x, h)
                    return True
            return False

        def relocate_neighbour(x: int) -> bool:
            """Move one embedded neighbour of x so x's cell regains a candidate.

            The target host may itself be occupied: its occupant is displaced
            and re-placed by augmentation, with rollback on failure.
            """
            for y in iter_bits(guest.adj[x]):
                if y not in phi or y in initial_phi:
                    continue
                ycell = f_star[y]
                if ycell not in owners:
                    continue
                others = base_mask[x]
                for z in iter_bits(guest.adj[x]):
                    if z in phi and z != y:
                        others &= g.adj[phi[z]]
                old = phi[y]
                for w2 in iter_bits(cand_of(y) & ~(1 << old)):
                    if not (g.adj[w2] & others):
                        continue
                    cur = owners[ycell].get(w2)
                    if cur is None and ((used >> w2) & 1):
                        continue  # held outside this stage
                    if cur is None:
                        assign(ycell, y, w2)
                        return True
                    del phi[cur]
                    assign(ycell, y, w2)
                    if augment(ycell, cur, {w2}):
                        return True
                    assign(ycell, y, old)
                    assign(ycell, cur, w2)
            return False

        failed_x = None
        for cell, x in pending:
            done = augment(cell, x, set())
            if not done and relocate_neighbour(x):
                done = augment(cell, x, set())
            if not done:
                failed_x = (cell, x)
                break
            matched += 1
        if failed_x is not None:
            last_err = EmbedError(
                f"no perfect matching in cell {failed_x[0]}", stuck=failed_x[1],
                trace=[f"pending {len(pending)} buffers"],
            )
            continue
        return EmbedResult(phi=phi, retries=attempt, main_embedded=len(main_order), matched=matched)
    raise last_err or EmbedError("embedding failed with no attempts")


def embedding_violations(
    g: Graph,
    guest: Graph,
    phi: dict[int, int],
    images: dict[int, int] | None = None,
) -> list[str]:
    """All reasons phi fails to be a restriction-honoring embedding."""
    out = []
    if len(phi) != guest.n:
        out.append(f"not total: {len(phi)}/{guest.n}")
    seen: dict[int, int] = {}
    for x, v in phi.items():
        if v in seen:
            out.append(f"images collide: {x} and {seen[v]} -> {v}")
        seen[v] = x
    for u, v in guest.edges():
        if u in phi and v in phi and not g.has_edge(phi[u], phi[v]):
            out.append(f"edge ({u},{v}) -> ({phi[u]},{phi[v]}) missing in host")
    if images:
        for x, m in images.items():
            if x in phi and not ((m >> phi[x]) & 1):
                out.append(f"vertex {x} -> {phi[x]} violates its image restriction")
    return out


def verify_embedding(
    g: Graph,
    guest: Graph,
    phi: dict[int, int],
    images: dict[int, int] | None = None,
) -> bool:
    """True iff phi is total, injective, edge-preserving, and restriction-honoring."""
    return not embedding_violations(g, guest, phi, images)


def dump_embedding(phi: dict[int, int]) -> str:
    return "\n".join(f"embed {x} {v}" for x, v in sorted(phi.items())) + "\n"
