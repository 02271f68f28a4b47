"""Guest-side structure: blocks, sections, colour switching, and the cell assignment.

A guest arrives as (graph, bandwidth labelling, proper (k+1)-colouring with a
sparse colour 0).  `assign_guest` partitions the labelling into blocks and
sections, optionally rebalances colour classes by switching colours inside
zero-free blocks under random permutations, and produces the homomorphism
f: V(H) -> [r] x [k] (colour-0 vertices route to the row's extension cell z_i)
together with the special set X and the per-property certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .graph_core import Graph, Labelling, VertexSet, iter_bits, rng_for
from .reduced_graph import ReducedGraph

__all__ = [
    "Colouring",
    "BlockStructure",
    "GuestAssignment",
    "check_zero_free",
    "switch_colours",
    "assign_guest",
    "check_bounded_order",
    "GuestPrepError",
    "SwitchError",
    "dump_assignment",
    "write_guest_bundle",
]


class GuestPrepError(RuntimeError):
    """Guest assignment failed; `violated` names the first broken property."""

    def __init__(self, violated: str, message: str):
        super().__init__(f"[{violated}] {message}")
        self.violated = violated


class SwitchError(ValueError):
    pass


@dataclass(frozen=True)
class Colouring:
    """Vertex colouring with colours in {0, ..., k}; colour 0 is the sparse spare."""

    sigma: tuple[int, ...]
    k: int

    def __post_init__(self):
        if any(not (0 <= c <= self.k) for c in self.sigma):
            raise ValueError("colour out of range")

    def is_proper(self, g: Graph) -> bool:
        return all(self.sigma[u] != self.sigma[v] for u, v in g.edges())

    def zero_vertices(self) -> list[int]:
        return [v for v, c in enumerate(self.sigma) if c == 0]


def _blocks(n: int, k: int, beta: float) -> tuple[int, int]:
    """(block length, block count) for the labelling split; floors to integers."""
    blocklen = math.floor(4 * k * beta * n)
    if blocklen < 1:
        raise ValueError(f"4*k*beta*n = {4 * k * beta * n:.3f} < 1: beta too small for n")
    return blocklen, math.ceil(n / blocklen)


def _zero_blocks(col: Colouring, l: Labelling, blocklen: int, nblocks: int) -> set[int]:
    zb = set()
    for v in col.zero_vertices():
        zb.add(min(l.pos[v] // blocklen, nblocks - 1))
    return zb


def check_zero_free(col: Colouring, l: Labelling, z: float, beta: float, k: int) -> bool:
    """Every window of z consecutive blocks contains at most one block using colour 0."""
    n = len(l)
    blocklen, nblocks = _blocks(n, k, beta)
    zb = sorted(_zero_blocks(col, l, blocklen, nblocks))
    w = int(z)
    for a, b in zip(zb, zb[1:]):
        if b - a < w:  # two zero blocks inside one window of z consecutive blocks
            return False
    return True


@dataclass
class BlockStructure:
    """Blocks, sections, intervals, and switching blocks over a bandwidth labelling."""

    n: int
    k: int
    r: int
    beta: float
    blocklen: int
    nblocks: int
    section_bounds: list[int]  # t_0 .. t_r as block indices (section i = blocks t_{i-1}..t_i - 1)
    intervals: list[list[tuple[int, int]]]  # per section: (first block, last block) inclusive
    b: int  # blocks per interval

    def section_of_position(self, pos: int) -> int:
        blk = min(pos // self.blocklen, self.nblocks - 1)
        for i in range(1, self.r + 1):
            if blk < self.section_bounds[i]:
                return i - 1
        return self.r - 1

    def block_positions(self, t: int) -> range:
        return range(t * self.blocklen, min((t + 1) * self.blocklen, self.n))

    def section_positions(self, i: int) -> range:
        lo = self.section_bounds[i] * self.blocklen
        hi = min(self.section_bounds[i + 1] * self.blocklen, self.n)
        return range(lo, hi)

    def switching_blocks(self, i: int) -> list[tuple[int, tuple[int, int]]]:
        """(interval index ell, (block1, block2)) for ell in 2..s_i-1 (1-based)."""
        out = []
        ivs = self.intervals[i]
        for ell in range(1, len(ivs) - 1):
            first = ivs[ell][0]
            out.append((ell, (first, first + 1)))
        return out


def build_block_structure(
    n: int,
    k: int,
    beta: float,
    m_targets: dict[tuple[int, int], int],
    col: Colouring,
    l: Labelling,
    r: int,
) -> BlockStructure:
    """Choose section boundaries at zero-free block pairs near the target masses."""
    blocklen, nblocks = _blocks(n, k, beta)
    zb = _zero_blocks(col, l, blocklen, nblocks)

    def boundary_ok(t: int) -> bool:
        # B_t is a section's last block, B_{t+1} the next section's first
        return t not in zb and (t + 1 >= nblocks or (t + 1) not in zb)

    bounds = [0]
    acc = 0
    for i in range(r - 1):
        acc += sum(m_targets[(i, j)] for j in range(k))
        # cumulative block mass stays at or below the target mass
        target = min(nblocks - 1, max(bounds[-1] + 1, math.floor(acc / blocklen)))
        chosen = None
        for off in range(nblocks):
            for cand in (target - off, target + off):
                if bounds[-1] < cand < nblocks and boundary_ok(cand - 1):
                    chosen = cand
                    break
            if chosen is not None:
                break
        if chosen is None:
            raise GuestPrepError("sections", f"no zero-free boundary for section {i}")
        # section sizing: cumulative block mass within 3 blocks of the target mass
        if not (chosen * blocklen <= acc + blocklen // 2 < 12 * k * beta * n + chosen * blocklen + blocklen):
            raise GuestPrepError(
                "sections", f"boundary {chosen} misses the target mass by more than 3 blocks"
            )
        bounds.append(chosen)
    bounds.append(nblocks)
    b = max(1, math.floor(k / math.sqrt(beta)))
    intervals: list[list[tuple[int, int]]] = []
    for i in range(r):
        lo, hi = bounds[i], bounds[i + 1] - 1
        ivs = []
        t = lo
        while t <= hi:
            ivs.append((t, min(t + b - 1, hi)))
            t += b
        intervals.append(ivs)
    return BlockStructure(
        n=n, k=k, r=r, beta=beta, blocklen=blocklen, nblocks=nblocks,
        section_bounds=bounds, intervals=intervals, b=b,
    )


def switch_colours(
    h: Graph,
    col: Colouring,
    l: Labelling,
    block_t: int,
    pi: dict[int, int],
    beta: float | None = None,
    blocklen: int | None = None,
    budget: int = 200_000,
) -> Colouring:
    """Proper recolouring equal to `col` before block t and pi o col (fixing 0) after.

    Inside the block the colours are found by a greedy backtracking search that
    prefers the old colouring in the first half and the permuted one in the
    second; colour 0 is a last resort.  The block must be zero-free under `col`.
    """
    n = len(l)
    k = col.k
    if blocklen is None:
        if beta is None:
            raise ValueError("need beta or blocklen")
        blocklen, _ = _blocks(n, k, beta)
    lo, hi = block_t * blocklen, min((block_t + 1) * blocklen, n)
    if any(col.sigma[l.order[p]] == 0 for p in range(lo, hi)):
        raise SwitchError(f"block {block_t} is not zero-free")
    if sorted(pi) != list(range(1, k + 1)) or sorted(pi.values()) != list(range(1, k + 1)):
        raise ValueError("pi must permute [k]")

    new = list(col.sigma)
    for p in range(hi, n):
        c = col.sigma[l.order[p]]
        new[l.order[p]] = pi[c] if c != 0 else 0
    if all(pi[c] == c for c in range(1, k + 1)):
        return Colouring(tuple(new), k)

    # CSP over the block positions, left to right
    mid = (lo + hi) // 2
    prefs: list[list[int]] = []
    for p in range(lo, hi):
        c = col.sigma[l.order[p]]
        want = [c, pi[c]] if p < mid else [pi[c], c]
        rest = [x for x in range(1, k + 1) if x not in want]
        prefs.append(want + rest + [0])

    steps = 0

    def solve(idx: int) -> bool:
        nonlocal steps
        if idx == hi - lo:
            return True
        p = lo + idx
        v = l.order[p]
        forbidden = set()
        for w in iter_bits(h.adj[v]):
            q = l.pos[w]
            if q < p or q >= hi:
                forbidden.add(new[w])
            elif lo <= q < p:
                forbidden.add(new[w])
        for c in prefs[idx]:
            steps += 1
            if steps > budget:
                return False
            if c in forbidden:
                continue
            new[v] = c
            if solve(idx + 1):
                return True
        new[v] = col.sigma[v]
        return False

    if not solve(0):
        raise SwitchError(f"no proper switch found in block {block_t} within budget")
    out = Colouring(tuple(new), k)
    return out


@dataclass
class GuestAssignment:
    """Homomorphism f from guest vertices to [r] x [k] cells with bookkeeping."""

    f: tuple[tuple[int, int], ...]
    special: VertexSet
    m_targets: dict[tuple[int, int], int]
    blocks: BlockStructure
    sigma_prime: Colouring
    certs: dict[str, bool] = field(default_factory=dict)
    zero_routed: tuple[int, ...] = ()

    def cell_counts(self) -> dict[tuple[int, int], int]:
        counts: dict[tuple[int, int], int] = {}
        for cell in self.f:
            counts[cell] = counts.get(cell, 0) + 1
        return counts

    def preimage(self, cell: tuple[int, int]) -> list[int]:
        return [v for v, c in enumerate(self.f) if c == cell]


def _certify_assignment(
    h: Graph,
    l: Labelling,
    f: list[tuple[int, int]],
    special_mask: int,
    reduced: ReducedGraph,
    m_targets: dict[tuple[int, int], int],
    xi: float,
    beta: float,
    sigma: Colouring,
    deg_bound: int,
) -> tuple[dict[str, bool], str]:
    n = h.n
    certs: dict[str, bool] = {}
    counts: dict[tuple[int, int], int] = {cell: 0 for cell in m_targets}
    for cell in f:
        counts[cell] = counts.get(cell, 0) + 1
    certs["part_sizes"] = all(
        m_targets[cell] - xi * n <= counts.get(cell, 0) <= m_targets[cell] + xi * n
        for cell in m_targets
    )
    certs["special_small"] = special_mask.bit_count() <= xi * n
    hom = all(reduced.has_edge(f[u], f[v]) for u, v in h.edges())
    certs["homomorphism"] = hom
    loc = True
    for x in range(n):
        if (special_mask >> x) & 1:
            continue
        i = f[x][0]
        for y in iter_bits(h.adj[x]):
            if f[y][0] != i:
                loc = False
                break
            for z in iter_bits(h.adj[y]):
                if f[z][0] != i:
                    loc = False
                    break
            if not loc:
                break
        if not loc:
            break
    certs["two_step_locality"] = loc
    prefix = math.floor(math.sqrt(beta) * n)
    certs["prefix_rule"] = all(
        f[l.order[p]] == (0, sigma.sigma[l.order[p]] - 1)
        for p in range(min(prefix, n))
        if sigma.sigma[l.order[p]] != 0
    ) and all(sigma.sigma[l.order[p]] != 0 for p in range(min(prefix, n)))
    lowdeg_ok = True
    for cell, cnt in counts.items():
        if cnt == 0:
            continue
        low = sum(1 for v in range(n) if f[v] == cell and h.degree(v) <= 2 * deg_bound)
        if low < cnt / (24 * deg_bound):
            lowdeg_ok = False
            break
    certs["low_degree_fraction"] = lowdeg_ok
    failed = ", ".join(k_ for k_, v_ in certs.items() if not v_)
    return certs, failed


def assign_guest(
    h: Graph,
    l: Labelling,
    col: Colouring,
    reduced: ReducedGraph,
    m_targets: dict[tuple[int, int], int],
    xi: float,
    beta: float,
    seed: int = 0,
    max_retries: int = 200,
) -> GuestAssignment:
    """Map guest vertices to reduced-graph cells respecting colours and sections.

    Sections get rows, colours get columns (after optional random permutation
    switching per interval), and colour-0 vertices go to the row's extension
    cell.  Certifies part-size windows, special-set size, the homomorphism
    property (full edge scan), two-step row locality, the prefix rule, and the
    low-degree fraction; retries fresh permutations until the counts land.
    """
    from .graph_core import bandwidth_of_labelling, degeneracy_order

    n = h.n
    k = col.k
    r = reduced.index.r
    if reduced.index.k != k:
        raise ValueError("colouring k does not match reduced graph")
    bw = bandwidth_of_labelling(h, l)
    if bw > beta * n + 1e-9:
        raise GuestPrepError("precondition", f"bandwidth {bw} > beta*n = {beta * n:.1f}")
    if not col.is_proper(h):
        raise GuestPrepError("precondition", "colouring is not proper")
    if not check_zero_free(col, l, 10.0 / xi, beta, k):
        raise GuestPrepError("precondition", "colouring is not (10/xi, beta)-zero-free")
    prefix = math.floor(math.sqrt(beta) * n)
    if any(col.sigma[l.order[p]] == 0 for p in range(min(prefix, n))):
        raise GuestPrepError("precondition", "colour zero in the first sqrt(beta)*n positions")
    if not reduced.validate_extension():
        raise GuestPrepError("precondition", "reduced graph extension map invalid")
    total = sum(m_targets.values())
    if total != n:
        raise GuestPrepError("precondition", f"m targets sum to {total} != n")
    for (i, j), m in m_targets.items():
        if not (n / (10 * k * r) <= m <= 10 * n / (k * r)):
            raise GuestPrepError("precondition", f"m[{i},{j}]={m} outside [n/10kr, 10n/kr]")

    _, deg_bound = degeneracy_order(h)
    deg_bound = max(1, deg_bound)
    blocks = build_block_structure(n, k, beta, m_targets, col, l, r)

    rng = rng_for(seed, stream=51)
    last_fail = ""
    for attempt in range(max_retries):
        sigma_prime = col
        applied = True
        # switch colours at interval starts (intervals 2..s_i-1 of each section)
        for i in range(r):
            for ell, (b1, b2) in blocks.switching_blocks(i):
                perm_vals = [int(x) + 1 for x in rng.permutation(k)]
                pi = {c: perm_vals[c - 1] for c in range(1, k + 1)}
                zb = _zero_blocks(sigma_prime, l, blocks.blocklen, blocks.nblocks)
                t = b1 if b1 not in zb else (b2 if b2 not in zb else None)
                if t is None:
                    applied = False
                    break
                try:
                    sigma_prime = switch_colours(
                        h, sigma_prime, l, t, pi, blocklen=blocks.blocklen
                    )
                except SwitchError:
                    applied = False
                    break
            if not applied:
                break
        if not applied:
            last_fail = "switching"
            continue

        f: list[tuple[int, int]] = [(-1, -1)] * n
        zero_routed = []
        for pos in range(n):
            v = l.order[pos]
            i = blocks.section_of_position(pos)
            c = sigma_prime.sigma[v]
            if c == 0:
                f[v] = reduced.extension[i]
                zero_routed.append(v)
            else:
                f[v] = (i, c - 1)

        # special set: distance <= 2 from boundary vertices, switching blocks,
        # or colour-zero vertices
        bwn = math.floor(beta * n)
        seeds_mask = 0
        for i in range(r - 1):
            t_edge = blocks.section_bounds[i + 1]
            last_block = blocks.block_positions(t_edge - 1)
            first_block = blocks.block_positions(t_edge) if t_edge < blocks.nblocks else range(0)
            for p in list(last_block)[-bwn:] if bwn else []:
                seeds_mask |= 1 << l.order[p]
            for p in list(first_block)[:bwn] if bwn else []:
                seeds_mask |= 1 << l.order[p]
        for i in range(r):
            for _ell, (b1, b2) in blocks.switching_blocks(i):
                for t in (b1, b2):
                    for p in blocks.block_positions(t):
                        seeds_mask |= 1 << l.order[p]
        for v in sigma_prime.zero_vertices():
            seeds_mask |= 1 << v
        for v in col.zero_vertices():
            seeds_mask |= 1 << v
        special_mask = seeds_mask
        for _ in range(2):
            grow = special_mask
            for v in iter_bits(special_mask):
                grow |= h.adj[v]
            special_mask = grow

        certs, failed = _certify_assignment(
            h, l, f, special_mask, reduced, m_targets, xi, beta, col, deg_bound
        )
        if not failed:
            return GuestAssignment(
                f=tuple(f),
                special=VertexSet(n, special_mask),
                m_targets=dict(m_targets),
                blocks=blocks,
                sigma_prime=sigma_prime,
                certs=certs,
                zero_routed=tuple(zero_routed),
            )
        last_fail = failed
        if not any(blocks.switching_blocks(i) for i in range(r)):
            break  # nothing random to retry
    raise GuestPrepError(last_fail or "unknown", f"assignment failed after retries ({last_fail})")


def check_bounded_order(
    h: Graph,
    order: Labelling,
    restricting: dict[int, set[int]] | None,
    buffers: VertexSet | None,
    d_tilde: int,
    p: float,
    m: float,
    exceptional: VertexSet | None = None,
) -> dict[str, list[int]]:
    """Per-vertex validation of the bounded-order conditions for embedding orders.

    back_degree: pi(x) = |J_x| + #earlier neighbours must fit under d_tilde
    adjusted for later edges/triangles at x (buffer neighbours need one spare,
    buffer vertices capped at degree d_tilde).
    locality: unless exceptional or pi(x) <= d_tilde/2, an unrestricted x needs
    every earlier neighbour within p^pi(x) * m positions.
    buffer_locality: neighbours of buffer vertices reach all but a quota of
    their earlier neighbours within p^d_tilde * m positions.
    Returns violator lists keyed by condition.
    """
    n = h.n
    restricting = restricting or {}
    buf_mask = buffers.mask if buffers is not None else 0
    exc_mask = exceptional.mask if exceptional is not None else 0
    near_buf = 0
    for v in iter_bits(buf_mask):
        near_buf |= h.adj[v]
    pos = order.pos

    def pi(x: int) -> int:
        return len(restricting.get(x, ())) + sum(1 for y in iter_bits(h.adj[x]) if pos[y] < pos[x])

    pis = [pi(x) for x in range(n)]
    max_pi_free = max((pis[x] for x in range(n) if not ((exc_mask >> x) & 1)), default=0)

    report: dict[str, list[int]] = {"back_degree": [], "locality": [], "buffer_locality": []}
    for x in range(n):
        later = [y for y in iter_bits(h.adj[x]) if pos[y] > pos[x]]
        dx = d_tilde
        if any(h.has_edge(y, z) for ii, y in enumerate(later) for z in later[ii + 1:]):
            dx = d_tilde - 2
        elif later:
            dx = d_tilde - 1
        limit = dx - 1 if ((near_buf >> x) & 1) else dx
        if pis[x] > limit:
            report["back_degree"].append(x)
            continue
        if ((buf_mask >> x) & 1) and h.degree(x) > d_tilde:
            report["back_degree"].append(x)
            continue
        if not ((exc_mask >> x) & 1) and pis[x] > d_tilde / 2.0:
            if x in restricting and restricting[x]:
                report["locality"].append(x)
            else:
                reach = p ** pis[x] * m
                if any(pos[x] - pos[y] > reach for y in iter_bits(h.adj[x]) if pos[y] < pos[x]):
                    report["locality"].append(x)
        if (near_buf >> x) & 1:
            quota = d_tilde - 1 - max_pi_free
            far = sum(
                1 for y in iter_bits(h.adj[x])
                if pos[y] < pos[x] and pos[x] - pos[y] > p ** d_tilde * m
            )
            if far > max(0, quota):
                report["buffer_locality"].append(x)
    return report


def dump_assignment(assignment: GuestAssignment) -> str:
    """`assign <v> <i> <j>` lines plus the special set."""
    lines = [f"assign {v} {cell[0]} {cell[1]}" for v, cell in enumerate(assignment.f)]
    vs = " ".join(str(v) for v in assignment.special)
    lines.append(f"special {vs}".rstrip())
    return "\n".join(lines) + "\n"


def write_guest_bundle(h: Graph, l: Labelling, col: Colouring) -> str:
    """Graph file text plus labelling and colouring lines."""
    from .graph_core import write_graph_file

    parts = [write_graph_file(h).rstrip("\n")]
    parts.append("labelling " + " ".join(str(v) for v in l.order))
    parts.append("colouring " + " ".join(str(c) for c in col.sigma))
    return "\n".join(parts) + "\n"
